use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use pycnoflow::output::{regions_to_geojson, write_ascii_grid, write_svg_heatmap, RunReport};
use pycnoflow::pipeline::{cartogram, pycnophylactic};
use pycnoflow::{load_regions, CartogramOptions, Error, LoadOptions, Method, PycnoOptions, RegionMap, ValueTable};

/// Contiguous cartograms and smooth pycnophylactic densities.
#[derive(Parser)]
#[command(name = "pycnoflow", version)]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the cartogram boundaries as GeoJSON.
    Cartogram(CartogramArgs),
    /// Write the smooth density as an ESRI ASCII grid.
    Pycno(PycnoArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Input FeatureCollection of Polygon/MultiPolygon features.
    #[arg(long)]
    geojson: PathBuf,
    /// CSV with an `id,value` header; without it populations are read from the features.
    #[arg(long)]
    values: Option<PathBuf>,
    /// Flow grid cells per side (power of two).
    #[arg(long, default_value_t = 512)]
    grid: usize,
    /// Target maximum relative area error.
    #[arg(long, default_value_t = 0.01)]
    tol: f64,
    #[arg(long = "max-iters", default_value_t = 20)]
    max_iters: usize,
    /// First blur width in grid cells (default: grid / 20).
    #[arg(long)]
    sigma0: Option<f64>,
    #[arg(long = "sigma-decay", default_value_t = 0.5)]
    sigma_decay: f64,
    /// Write a JSON run report here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Feature property holding the region id.
    #[arg(long = "id-property", default_value = "id")]
    id_property: String,
    /// Feature property holding the population when no values file is given.
    #[arg(long = "population-property", default_value = "population")]
    population_property: String,
}

#[derive(Args)]
struct CartogramArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Output GeoJSON of the projected regions.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Flow,
    Tobler,
    Hybrid,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Flow => Method::Flow,
            MethodArg::Tobler => Method::Tobler,
            MethodArg::Hybrid => Method::Hybrid,
        }
    }
}

#[derive(Args)]
struct PycnoArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Output GeoJSON of the projected regions (flow and hybrid methods).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output ESRI ASCII grid of the density.
    #[arg(long = "density-out")]
    density_out: PathBuf,
    /// Output raster cells per side (default: the flow grid size).
    #[arg(long = "jacobian-grid")]
    jacobian_grid: Option<usize>,
    /// Optional SVG heat map with the region boundaries.
    #[arg(long)]
    svg: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = MethodArg::Flow)]
    method: MethodArg,
}

/// Failures mapped to exit code 1.
#[derive(Debug)]
struct Failure(String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self(e.to_string())
    }
}

fn io_context(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure(format!("{}: {e}", path.display()))
}

fn load(common: &CommonArgs) -> Result<RegionMap<f64>, Failure> {
    let bytes = std::fs::read(&common.geojson).map_err(io_context(&common.geojson))?;
    let table = match &common.values {
        Some(path) => Some(ValueTable::from_csv(File::open(path).map_err(io_context(path))?)?),
        None => None,
    };
    let opts = LoadOptions {
        id_property: common.id_property.clone(),
        population_property: common.population_property.clone(),
    };
    Ok(load_regions(&bytes, table.as_ref(), &opts)?)
}

fn cartogram_options(common: &CommonArgs) -> CartogramOptions<f64> {
    CartogramOptions {
        grid: common.grid,
        tolerance: common.tol,
        max_iterations: common.max_iters,
        sigma0: common.sigma0,
        sigma_decay: common.sigma_decay,
        ..Default::default()
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    Ok(BufWriter::new(File::create(path).map_err(io_context(path))?))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).map_err(io_context(path))?;
    w.flush().map_err(io_context(path))
}

fn write_report(path: Option<&Path>, report: &RunReport) -> Result<(), Failure> {
    if let Some(path) = path {
        write_text(path, &report.to_json()?)?;
    }
    Ok(())
}

fn run_cartogram(args: &CartogramArgs) -> Result<bool, Failure> {
    let map = load(&args.common)?;
    let out = cartogram(&map, &cartogram_options(&args.common))?;
    write_text(&args.out, &regions_to_geojson(&out.result.projected_in_input_coords()))?;
    write_report(args.common.report.as_deref(), &out.report)?;
    info!(
        "{} iterations, max area error {:.4}",
        out.report.iterations,
        out.result.area_error()
    );
    Ok(out.report.converged)
}

fn run_pycno(args: &PycnoArgs) -> Result<bool, Failure> {
    let map = load(&args.common)?;
    let opts = PycnoOptions {
        jacobian_grid: args.jacobian_grid,
        method: args.method.into(),
        ..Default::default()
    };
    let out = pycnophylactic(&map, &cartogram_options(&args.common), &opts)?;

    let mut w = create(&args.density_out)?;
    write_ascii_grid(&out.raster, &mut w)?;
    w.flush().map_err(io_context(&args.density_out))?;
    if let Some(path) = &args.svg {
        let mut w = create(path)?;
        write_svg_heatmap(&out.raster, &map, &mut w)?;
        w.flush().map_err(io_context(path))?;
    }
    if let Some(path) = &args.out {
        match &out.cartogram {
            Some(result) => write_text(path, &regions_to_geojson(&result.projected_in_input_coords()))?,
            None => warn!("--out ignored: the tobler method builds no cartogram"),
        }
    }
    write_report(args.common.report.as_deref(), &out.report)?;
    Ok(out.report.converged)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let outcome = match &cli.command {
        Command::Cartogram(args) => run_cartogram(args),
        Command::Pycno(args) => run_pycno(args),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: did not converge within the iteration limit");
            ExitCode::from(2)
        }
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
