//! End-to-end runs shared by the command-line tool and library users.

use std::time::Instant;

use crate::baseline::{ca_run, roughness, CaOptions};
use crate::driver::{run, CartogramOptions, CartogramResult};
use crate::error::{Error, Result};
use crate::geometry::{fit_frame, RegionMap};
use crate::grid::GridGeometry;
use crate::output::{RegionReport, RoughnessReport, RunReport};
use crate::pycno::{density_from_jacobian, jacobian_grid, pycno_signed_errors, to_input_coords, PycnoRaster};
use crate::rasterize::{mean_density, plateau_density, rasterize_labels_on};
use crate::scalar::Scalar;

/// How the smooth density is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// `ρ̄ · det J` of the cartogram projection.
    Flow,
    /// Cellular-automaton smoothing of the plateau density.
    Tobler,
    /// Cellular-automaton smoothing started from the flow density.
    Hybrid,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flow" => Ok(Self::Flow),
            "tobler" => Ok(Self::Tobler),
            "hybrid" => Ok(Self::Hybrid),
            other => Err(Error::InvalidOption(format!("unknown method {other:?}"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Flow => "flow",
            Self::Tobler => "tobler",
            Self::Hybrid => "hybrid",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PycnoOptions<T> {
    /// Cells per side of the output raster; `None` uses the flow grid size.
    pub jacobian_grid: Option<usize>,
    pub method: Method,
    pub smoothing: CaOptions<T>,
}

impl<T: Scalar> Default for PycnoOptions<T> {
    fn default() -> Self {
        Self {
            jacobian_grid: None,
            method: Method::Flow,
            smoothing: CaOptions::default(),
        }
    }
}

/// Per-region report lines for a cartogram, in input units.
pub fn region_reports<T: Scalar>(result: &CartogramResult<T>, pycno_errors: Option<&[T]>) -> Vec<RegionReport> {
    let s2 = (result.affine.scale * result.affine.scale).as_f64();
    result
        .original
        .regions
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let target = result.target_areas[i].as_f64();
            let achieved = result.achieved_areas[i].as_f64();
            RegionReport {
                id: r.id.clone(),
                population: r.population.as_f64(),
                target_area: target / s2,
                achieved_area: achieved / s2,
                area_error: (achieved / target - 1.0).abs(),
                pycno_error: pycno_errors.map(|e| e[i].abs().as_f64()),
            }
        })
        .collect()
}

fn cartogram_report<T: Scalar>(result: &CartogramResult<T>) -> RunReport {
    RunReport {
        regions: region_reports(result, None),
        iterations: result.stack.len(),
        sigma_log: result.stack.log.iter().map(|l| l.sigma.as_f64()).collect(),
        area_error_log: result.stack.log.iter().map(|l| l.area_error.as_f64()).collect(),
        max_area_error: Some(result.area_error().as_f64()),
        converged: result.converged,
        zero_population_ids: result.floored.clone(),
        ..Default::default()
    }
}

/// Cartogram plus its report.
#[derive(Debug, Clone)]
pub struct CartogramRun<T: Scalar> {
    pub result: CartogramResult<T>,
    pub report: RunReport,
}

pub fn cartogram<T: Scalar>(map: &RegionMap<T>, opts: &CartogramOptions<T>) -> Result<CartogramRun<T>> {
    let start = Instant::now();
    let result = run(map, opts)?;
    let mut report = cartogram_report(&result);
    report.wall_time_seconds = start.elapsed().as_secs_f64();
    Ok(CartogramRun { result, report })
}

#[derive(Debug, Clone)]
pub struct PycnoRun<T: Scalar> {
    /// Absent for the pure cellular-automaton method.
    pub cartogram: Option<CartogramResult<T>>,
    /// Output density in input coordinates.
    pub raster: PycnoRaster<T>,
    /// Flow density in input coordinates, when computed.
    pub flow_raster: Option<PycnoRaster<T>>,
    pub report: RunReport,
}

/// Smooth pycnophylactic density of `map` by the chosen method.
pub fn pycnophylactic<T: Scalar>(map: &RegionMap<T>, cart: &CartogramOptions<T>, opts: &PycnoOptions<T>) -> Result<PycnoRun<T>> {
    let start = Instant::now();
    let cells = opts.jacobian_grid.unwrap_or(cart.grid);

    let (cartogram, fitted, affine, mut report) = match opts.method {
        Method::Flow | Method::Hybrid => {
            let result = run(map, cart)?;
            let report = cartogram_report(&result);
            let fitted = result.original.clone();
            let affine = result.affine;
            (Some(result), fitted, affine, report)
        }
        Method::Tobler => {
            let (fitted, affine) = fit_frame(map, cart.grid, cart.padding)?;
            (None, fitted, affine, RunReport::default())
        }
    };

    let geom = GridGeometry::over(&fitted.frame, cells, cells);
    let labels = rasterize_labels_on(&fitted, geom);
    let plateau = plateau_density(&fitted, &labels)?;
    let populations = fitted.populations();
    let mut rough = RoughnessReport {
        plateau: Some(roughness(&to_input_coords(&plateau, &affine)).as_f64()),
        ..Default::default()
    };

    let flow_raster = match &cartogram {
        Some(result) => {
            let jac = jacobian_grid(&result.stack, &fitted.frame, cells)?;
            let raster = density_from_jacobian(&jac, mean_density(&fitted)?)?;
            rough.flow = Some(roughness(&to_input_coords(&raster, &affine)).as_f64());
            Some(raster)
        }
        None => None,
    };

    let raster = match (opts.method, &flow_raster) {
        (Method::Flow, Some(r)) => r.clone(),
        (Method::Hybrid, Some(r)) => {
            let out = ca_run(&labels, &populations, r, &opts.smoothing)?;
            rough.hybrid = Some(roughness(&to_input_coords(&out.density, &affine)).as_f64());
            out.density
        }
        (Method::Tobler, _) => {
            let out = ca_run(&labels, &populations, &plateau, &opts.smoothing)?;
            rough.tobler = Some(roughness(&to_input_coords(&out.density, &affine)).as_f64());
            report.converged = out.converged;
            report.iterations = out.iterations;
            out.density
        }
        _ => unreachable!("flow raster exists for flow-based methods"),
    };

    let errors = pycno_signed_errors(&raster, &fitted)?;
    match &cartogram {
        Some(result) => report.regions = region_reports(result, Some(&errors)),
        None => {
            // No projection: achieved areas are the input areas.
            let s2 = (affine.scale * affine.scale).as_f64();
            let mean = mean_density(&fitted)?.as_f64();
            let floor = 1e-8 * fitted.total_population().as_f64();
            report.regions = fitted
                .regions
                .iter()
                .zip(&errors)
                .map(|(r, e)| {
                    let target = r.population.as_f64().max(floor) / mean;
                    let achieved = r.area.as_f64();
                    RegionReport {
                        id: r.id.clone(),
                        population: r.population.as_f64(),
                        target_area: target / s2,
                        achieved_area: achieved / s2,
                        area_error: (achieved / target - 1.0).abs(),
                        pycno_error: Some(e.abs().as_f64()),
                    }
                })
                .collect();
        }
    }
    report.method = Some(opts.method.to_string());
    report.roughness = rough;
    report.wall_time_seconds = start.elapsed().as_secs_f64();

    Ok(PycnoRun {
        raster: to_input_coords(&raster, &affine),
        flow_raster: flow_raster.map(|r| to_input_coords(&r, &affine)),
        cartogram,
        report,
    })
}
