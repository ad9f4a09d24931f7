use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pycnoflow::output::read_ascii_grid;
use pycnoflow::{load_regions, LoadOptions, RegionMap};
use serde_json::Value;
use tempfile::TempDir;

/// Two rectangles in lon/lat-like coordinates, split at x = 10.5.
const HALVES: &str = r#"{"type":"FeatureCollection","features":[
{"type":"Feature","properties":{"id":"west"},"geometry":{"type":"Polygon",
 "coordinates":[[[10,40],[10.5,40],[10.5,41],[10,41],[10,40]]]}},
{"type":"Feature","properties":{"id":"east"},"geometry":{"type":"Polygon",
 "coordinates":[[[10.5,40],[11,40],[11,41],[10.5,41],[10.5,40]]]}}]}"#;

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new(values: &str) -> Self {
        let dir = TempDir::new().unwrap();
        std::fs::write(dir.path().join("map.geojson"), HALVES).unwrap();
        std::fs::write(dir.path().join("values.csv"), values).unwrap();
        Self { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_pycnoflow"));
        cmd.args(args)
            .arg("--geojson")
            .arg(self.path("map.geojson"))
            .arg("--values")
            .arg(self.path("values.csv"))
            .arg("--report")
            .arg(self.path("report.json"));
        cmd.output().unwrap()
    }

    fn report(&self) -> Value {
        serde_json::from_str(&std::fs::read_to_string(self.path("report.json")).unwrap()).unwrap()
    }
}

fn read_map(path: &Path) -> RegionMap<f64> {
    load_regions(&std::fs::read(path).unwrap(), None, &LoadOptions::default()).unwrap()
}

fn out_arg(f: &Fixture, name: &str) -> String {
    f.path(name).to_str().unwrap().to_string()
}

#[test]
fn cartogram_reaches_target_areas() {
    let f = Fixture::new("id,value\nwest,3\neast,1\n");
    let out = out_arg(&f, "cart.geojson");
    let o = f.run(&["cartogram", "--grid", "128", "--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let map = read_map(&f.path("cart.geojson"));
    let total: f64 = map.regions.iter().map(|r| r.area).sum();
    assert!((total - 1.0).abs() < 0.005);
    let west = map.regions.iter().find(|r| r.id == "west").unwrap();
    let east = map.regions.iter().find(|r| r.id == "east").unwrap();
    assert!((west.area / total - 0.75).abs() < 0.01 * 0.75);
    assert!((east.area / total - 0.25).abs() < 0.01 * 0.25);
    // Output stays in the input coordinate system.
    let bb = map.bounding_box().unwrap();
    assert!(bb.min.x > 9.0 && bb.max.x < 12.0 && bb.min.y > 39.0 && bb.max.y < 42.0);

    let report = f.report();
    assert_eq!(report["converged"], true);
    assert!(report["max_area_error"].as_f64().unwrap() < 0.01);
    assert_eq!(report["regions"].as_array().unwrap().len(), 2);
}

#[test]
fn missing_value_is_an_input_error() {
    let f = Fixture::new("id,value\nwest,3\n");
    let out = out_arg(&f, "cart.geojson");
    let o = f.run(&["cartogram", "--grid", "64", "--out", &out]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("east"));
    assert!(!f.path("cart.geojson").exists());
}

#[test]
fn usage_errors_exit_with_one() {
    let f = Fixture::new("id,value\nwest,3\neast,1\n");
    let o = f.run(&["cartogram", "--grid", "64"]);
    assert_eq!(o.status.code(), Some(1));
    let o = f.run(&["pycno", "--method", "kriging", "--density-out", "x.asc"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn iteration_cap_exits_with_two_and_still_writes() {
    let f = Fixture::new("id,value\nwest,3\neast,1\n");
    let out = out_arg(&f, "cart.geojson");
    let o = f.run(&["cartogram", "--grid", "64", "--max-iters", "1", "--out", &out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(f.path("cart.geojson").exists());
    let report = f.report();
    assert_eq!(report["converged"], false);
    assert_eq!(report["iterations"], 1);
}

#[test]
fn uniform_map_gives_constant_density() {
    let f = Fixture::new("id,value\nwest,5\neast,5\n");
    let asc = out_arg(&f, "density.asc");
    let o = f.run(&["pycno", "--grid", "64", "--density-out", &asc]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let grid = read_ascii_grid(std::fs::File::open(f.path("density.asc")).unwrap()).unwrap();
    // ρ̄ = 10 people over one square degree.
    assert!(grid.data.iter().all(|&v| (v - 10.0).abs() < 1e-6 * 10.0));
}

#[test]
fn pycno_flow_and_hybrid() {
    let f = Fixture::new("id,value\nwest,3\neast,1\n");
    let asc = out_arg(&f, "density.asc");
    let svg = out_arg(&f, "density.svg");
    let out = out_arg(&f, "cart.geojson");
    let o = f.run(&[
        "pycno", "--grid", "256", "--density-out", &asc, "--svg", &svg, "--out", &out,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let flow = f.report();
    // The error is a discretisation effect; it falls below 1% from 256 cells.
    for r in flow["regions"].as_array().unwrap() {
        assert!(r["pycno_error"].as_f64().unwrap() < 0.02, "{r}");
    }
    let grid = read_ascii_grid(std::fs::File::open(f.path("density.asc")).unwrap()).unwrap();
    assert!(grid.data.iter().all(|&v| v > 0.0));
    assert!(std::fs::read_to_string(f.path("density.svg")).unwrap().contains("<svg"));
    assert!(f.path("cart.geojson").exists());

    let o = f.run(&["pycno", "--grid", "64", "--method", "hybrid", "--density-out", &asc]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let hybrid = f.report();
    let h = hybrid["roughness"]["hybrid"].as_f64().unwrap();
    let fl = hybrid["roughness"]["flow"].as_f64().unwrap();
    assert!(h <= fl, "hybrid {h} flow {fl}");
    assert_eq!(hybrid["method"], "hybrid");
}

#[test]
fn tobler_method_runs_without_a_cartogram() {
    let f = Fixture::new("id,value\nwest,3\neast,1\n");
    let asc = out_arg(&f, "density.asc");
    let o = f.run(&["pycno", "--grid", "32", "--method", "tobler", "--density-out", &asc]);
    assert!(matches!(o.status.code(), Some(0) | Some(2)), "{}", String::from_utf8_lossy(&o.stderr));
    let report = f.report();
    assert!(report["roughness"]["tobler"].as_f64().is_some());
    for r in report["regions"].as_array().unwrap() {
        assert!(r["pycno_error"].as_f64().unwrap() < 1e-6, "{r}");
    }
}
