use pycnoflow::output::regions_to_geojson;
use pycnoflow::pipeline::{cartogram, pycnophylactic};
use pycnoflow::{
    density_from_jacobian, fixtures, jacobian_grid, load_regions, pycno_check, run, CartogramOptions, LoadOptions, Method,
    Point, PycnoOptions, RegionMap,
};

fn opts(grid: usize) -> CartogramOptions<f64> {
    CartogramOptions {
        grid,
        ..Default::default()
    }
}

#[test]
fn uniform_map_is_left_in_place() {
    let map = fixtures::half_split::<f64>(2.0, 2.0);
    let r = run(&map, &opts(128)).unwrap();
    assert!(r.converged);
    assert_eq!(r.stack.len(), 1);
    assert!(r.area_error() < 1e-6);
    let width = r.original.frame.width();
    for (a, b) in r.original.regions.iter().zip(&r.projected.regions) {
        for (p, q) in a.vertices().zip(b.vertices()) {
            assert!(p.distance(q) < 1e-9 * width);
        }
    }
}

#[test]
fn three_to_one_moves_boundary_to_three_quarters() {
    let map = fixtures::half_split::<f64>(3.0, 1.0);
    let r = run(&map, &opts(128)).unwrap();
    assert!(r.converged, "{:?}", r.stack.log);
    assert!(r.area_error() < 0.01);
    assert!(r.stack.len() <= 20);

    // Vertices of the shared edge, away from the top and bottom walls.
    let input = r.projected_in_input_coords();
    let left = &input.regions[0];
    let original = &r.original.regions[0];
    let mut xs = Vec::new();
    for (p, q) in original.vertices().zip(left.vertices()) {
        let p = r.affine.inverse(*p);
        if (p.x - 0.5).abs() < 1e-9 && p.y > 0.25 && p.y < 0.75 {
            xs.push(q.x);
        }
    }
    assert!(!xs.is_empty());
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    assert!((mean - 0.75).abs() < 0.03, "boundary at {mean}");
}

#[test]
fn quadrants_stay_adjacent_and_conserve_area() {
    let map = fixtures::quadrants::<f64>([1.0, 2.0, 3.0, 4.0]);
    let r = run(&map, &opts(128)).unwrap();
    assert!(r.converged);

    // The centre vertex is shared by all four quadrants and must land on
    // one point, bit for bit.
    let centre = r.affine.forward(Point::new(0.5, 0.5));
    let images: Vec<Point<f64>> = r
        .original
        .regions
        .iter()
        .zip(&r.projected.regions)
        .map(|(a, b)| {
            let k = a.vertices().position(|p| p.distance(&centre) < 1e-9).expect("centre vertex");
            *b.vertices().nth(k).unwrap()
        })
        .collect();
    assert!(images.windows(2).all(|w| w[0] == w[1]));

    // Every vertex shared between regions has one image.
    let mut seen: Vec<(Point<f64>, Point<f64>)> = Vec::new();
    for (a, b) in r.original.regions.iter().zip(&r.projected.regions) {
        for (p, q) in a.vertices().zip(b.vertices()) {
            if let Some((_, q0)) = seen.iter().find(|(p0, _)| p0 == p) {
                assert_eq!(q0, q);
            } else {
                seen.push((*p, *q));
            }
        }
    }

    let before = r.original.total_area();
    let after = r.projected.total_area();
    assert!((after - before).abs() < 0.005 * before);
}

#[test]
fn iteration_log_is_monotone_and_deterministic() {
    let map = fixtures::quadrants::<f64>([1.0, 2.0, 3.0, 4.0]);
    let o = CartogramOptions {
        tolerance: 1e-4,
        max_iterations: 6,
        ..opts(64)
    };
    let a = run(&map, &o).unwrap();
    let b = run(&map, &o).unwrap();
    assert_eq!(a.stack.log, b.stack.log);
    let errors: Vec<f64> = a.stack.log.iter().map(|l| l.area_error).collect();
    // Once the residual modes drop below the equilibrium threshold the
    // flow is the identity and the error only changes by rounding.
    assert!(errors.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)), "{errors:?}");
    let sigmas: Vec<f64> = a.stack.log.iter().map(|l| l.sigma).filter(|&s| s > 0.0).collect();
    assert!(sigmas.windows(2).all(|w| w[1] < w[0]), "{sigmas:?}");
}

#[test]
fn forced_non_convergence_is_reported() {
    let map = fixtures::half_split::<f64>(3.0, 1.0);
    let r = run(
        &map,
        &CartogramOptions {
            max_iterations: 1,
            ..opts(64)
        },
    )
    .unwrap();
    assert!(!r.converged);
    assert_eq!(r.stack.len(), 1);
}

#[test]
fn zero_population_region_is_floored() {
    let map = fixtures::quadrants::<f64>([0.0, 2.0, 3.0, 4.0]);
    let out = cartogram(&map, &opts(64)).unwrap();
    assert_eq!(out.report.zero_population_ids, vec!["SW".to_string()]);
    assert!(out.result.achieved_areas.iter().all(|&a| a > 0.0));
}

#[test]
fn jacobian_of_converged_stack() {
    let map = fixtures::half_split::<f64>(3.0, 1.0);
    let r = run(&map, &opts(128)).unwrap();
    let jac = jacobian_grid(&r.stack, &r.original.frame, 128).unwrap();
    assert!(jac.data.iter().all(|&j| j > 0.0));
    assert!((jac.mean() - 1.0).abs() < 1e-4);

    // Dense region expanded, sparse region shrunk.
    let raster = density_from_jacobian(&jac, r.mean_density).unwrap();
    let errs = pycno_check(&raster, &r.original).unwrap();
    assert!(errs.iter().all(|(_, e)| *e < 0.05), "{errs:?}");
}

#[test]
fn empty_stack_gives_constant_raster() {
    let map = fixtures::fitted(&fixtures::half_split::<f64>(3.0, 1.0), 64);
    let jac = jacobian_grid(&Default::default(), &map.frame, 64).unwrap();
    let raster = density_from_jacobian(&jac, 4.0).unwrap();
    assert!(raster.data.iter().all(|&v| v == 4.0));
}

#[test]
fn emitted_geojson_reingests_to_reported_areas() {
    let map = fixtures::quadrants::<f64>([1.0, 2.0, 3.0, 4.0]);
    let out = cartogram(&map, &opts(64)).unwrap();
    let projected = out.result.projected_in_input_coords();
    let text = regions_to_geojson(&projected);
    let back: RegionMap<f64> = load_regions(text.as_bytes(), None, &LoadOptions::default()).unwrap();
    for (r, report) in back.regions.iter().zip(&out.report.regions) {
        assert_eq!(r.id, report.id);
        assert!((r.area - report.achieved_area).abs() <= 1e-9 * report.achieved_area);
    }
}

#[test]
fn single_precision_pipeline_runs() {
    let map = fixtures::half_split::<f32>(3.0, 1.0);
    let r = run(
        &map,
        &CartogramOptions::<f32> {
            grid: 64,
            ..Default::default()
        },
    )
    .unwrap();
    assert!(r.converged);
    assert!(r.area_error() < 0.01);
}

#[test]
fn pycno_methods_report_consistent_metrics() {
    let map = fixtures::half_split::<f64>(3.0, 1.0);
    let cart = opts(64);
    let flow = pycnophylactic(&map, &cart, &PycnoOptions::default()).unwrap();
    let rough = &flow.report.roughness;
    assert!(rough.flow.unwrap() < rough.plateau.unwrap());
    assert!(flow.report.regions.iter().all(|r| r.pycno_error.unwrap() < 0.05));
    // In input coordinates the raster still integrates to ρ̄ times the
    // frame area (ρ̄ = 4 on the unit square).
    let frame_area = flow.raster.geom.width() * flow.raster.geom.height();
    assert!((flow.raster.total_mass() - 4.0 * frame_area).abs() < 1e-6 * 4.0 * frame_area);

    let hybrid = pycnophylactic(
        &map,
        &cart,
        &PycnoOptions {
            method: Method::Hybrid,
            ..Default::default()
        },
    )
    .unwrap();
    let hr = &hybrid.report.roughness;
    assert!(hr.hybrid.unwrap() <= hr.flow.unwrap());
    for (h, f) in hybrid.report.regions.iter().zip(&flow.report.regions) {
        assert!(h.pycno_error.unwrap() <= f.pycno_error.unwrap() + 1e-9);
    }
}
