//! The outer cartogram loop: rasterise the current boundaries, blur, flow,
//! project, and repeat with a narrower kernel until every region has the
//! area its population asks for.

use log::{debug, warn};

use crate::error::{Error, Result};
use crate::flow::{integrate_flow, DisplacementField, FlowOptions};
use crate::geometry::{fit_frame, Affine, Point, RegionMap};
use crate::grid::{DensityGrid, Grid, LabelGrid, EXTERIOR};
use crate::rasterize::{plateau_density, rasterize_labels};
use crate::scalar::Scalar;
use crate::spectral::gaussian_blur;

/// Bilinear interpolation of the node images of `field` at `p`.
pub fn apply_displacement<T: Scalar>(field: &DisplacementField<T>, p: Point<T>) -> Result<Point<T>> {
    field.apply(p)
}

/// Resets every exterior cell to `mean`; labelled cells are copied.
pub fn replenish_exterior<T: Scalar>(density: &DensityGrid<T>, labels: &LabelGrid<T>, mean: T) -> Result<DensityGrid<T>> {
    if !density.geom.same_shape(&labels.geom) {
        return Err(Error::ShapeMismatch);
    }
    let data = density
        .data
        .iter()
        .zip(&labels.labels)
        .map(|(&v, &l)| if l == EXTERIOR { mean } else { v })
        .collect();
    Grid::from_vec(density.geom, data)
}

/// `max_i |achieved_i / (P_i / ρ̄) − 1|` over regions with positive
/// population, with `ρ̄ = Σ P / total_area`.
pub fn area_error_of<T: Scalar>(populations: &[T], achieved: &[T], total_area: T) -> T {
    let total: T = populations.iter().fold(T::zero(), |a, &p| a + p);
    let mean = total / total_area;
    let mut worst = T::zero();
    for (&p, &a) in populations.iter().zip(achieved) {
        if p > T::zero() {
            worst = worst.max((a / (p / mean) - T::one()).abs());
        }
    }
    worst
}

/// Outer-loop settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartogramOptions<T> {
    /// Cells per side of the flow grid (power of two).
    pub grid: usize,
    /// Frame side over map extent.
    pub padding: T,
    /// Target maximum relative area error.
    pub tolerance: T,
    pub max_iterations: usize,
    /// First blur width in cells; `None` means `grid / 20`.
    pub sigma0: Option<T>,
    /// Factor applied to the blur width after each iteration.
    pub sigma_decay: T,
    /// Blur widths below this many cells are treated as zero.
    pub sigma_floor: T,
    /// Widen the blur when the blurred density drops below this fraction of the mean.
    pub min_density_fraction: T,
    pub blur_retry_factor: T,
    pub blur_retries: usize,
    /// Densify boundaries to at most this many cells per segment; `None` disables.
    pub densify: Option<T>,
    pub flow: FlowOptions<T>,
}

impl<T: Scalar> Default for CartogramOptions<T> {
    fn default() -> Self {
        Self {
            grid: 512,
            padding: T::lit(1.5),
            tolerance: T::lit(0.01),
            max_iterations: 20,
            sigma0: None,
            sigma_decay: T::lit(0.5),
            sigma_floor: T::lit(0.1),
            min_density_fraction: T::lit(0.1),
            blur_retry_factor: T::lit(1.5),
            blur_retries: 5,
            densify: Some(T::one()),
            flow: FlowOptions::default(),
        }
    }
}

impl<T: Scalar> CartogramOptions<T> {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidOption(m.to_string()));
        if self.max_iterations == 0 {
            return bad("max iterations must be at least 1");
        }
        if !(self.tolerance > T::zero()) {
            return bad("tolerance must be positive");
        }
        if !(self.sigma_decay > T::zero() && self.sigma_decay < T::one()) {
            return bad("sigma decay must lie in (0, 1)");
        }
        if let Some(s) = self.sigma0 {
            if !(s >= T::zero()) {
                return bad("sigma0 must be nonnegative");
            }
        }
        Ok(())
    }

    /// Blur width for iteration `k` (1-based), in cells.
    pub fn sigma(&self, k: usize) -> T {
        let s0 = self.sigma0.unwrap_or(T::from_count(self.grid) / T::lit(20.0));
        let s = s0 * self.sigma_decay.powi(k as i32 - 1);
        if s < self.sigma_floor {
            T::zero()
        } else {
            s
        }
    }
}

/// Diagnostics of one outer iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationLog<T> {
    pub iteration: usize,
    /// Blur width actually used, in cells.
    pub sigma: T,
    /// Largest `|ρ − ρ̄|` of the piecewise-constant density before blurring.
    pub max_residual: T,
    /// Area error after this iteration's projection.
    pub area_error: T,
    pub flow_steps: usize,
    pub flow_rejected: usize,
}

/// The projections `t_1 … t_l` in application order.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionStack<T> {
    pub fields: Vec<DisplacementField<T>>,
    pub log: Vec<IterationLog<T>>,
}

impl<T: Scalar> ProjectionStack<T> {
    pub fn new() -> Self {
        Self {
            fields: Vec::new(),
            log: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }
}

impl<T: Scalar> Default for ProjectionStack<T> {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone)]
pub struct CartogramResult<T: Scalar> {
    /// Input map in frame coordinates after densification.
    pub original: RegionMap<T>,
    /// Projected map in frame coordinates.
    pub projected: RegionMap<T>,
    /// Frame coordinates = `affine.forward(input coordinates)`.
    pub affine: Affine<T>,
    pub stack: ProjectionStack<T>,
    /// Populations after flooring zero values.
    pub populations: Vec<T>,
    /// `P_i / ρ̄` in frame units.
    pub target_areas: Vec<T>,
    pub achieved_areas: Vec<T>,
    /// `Σ P / Σ A` of the input, in frame units.
    pub mean_density: T,
    pub converged: bool,
    /// Ids of regions whose zero population was floored.
    pub floored: Vec<String>,
}

impl<T: Scalar> CartogramResult<T> {
    pub fn area_error(&self) -> T {
        area_error(self)
    }

    /// Projected map in the input's coordinate system.
    pub fn projected_in_input_coords(&self) -> RegionMap<T> {
        let mut out = self.projected.map_vertices(|p| self.affine.inverse(p));
        out.frame = crate::geometry::Rect::new(
            self.affine.inverse(self.projected.frame.min),
            self.affine.inverse(self.projected.frame.max),
        );
        out
    }
}

/// Largest relative area error of the cartogram (see [`area_error_of`]).
/// Regions with zero population are excluded.
pub fn area_error<T: Scalar>(cartogram: &CartogramResult<T>) -> T {
    let total_area = cartogram.original.total_area();
    let populations: Vec<T> = cartogram
        .original
        .regions
        .iter()
        .zip(&cartogram.populations)
        .map(|(r, &p)| if r.population > T::zero() { p } else { T::zero() })
        .collect();
    area_error_of(&populations, &cartogram.achieved_areas, total_area)
}

/// Builds a contiguous cartogram of `map`.
///
/// Returns a result with `converged == false` when the tolerance is not
/// reached within the iteration limit; flow failures are reported with the
/// iteration index.
pub fn run<T: Scalar>(map: &RegionMap<T>, opts: &CartogramOptions<T>) -> Result<CartogramResult<T>> {
    opts.validate()?;
    let (mut fitted, affine) = fit_frame(map, opts.grid, opts.padding)?;
    if let Some(len) = opts.densify {
        fitted = fitted.densified(len);
    }

    let total_population = fitted.total_population();
    let floor = T::lit(1e-8) * total_population;
    let mut floored = Vec::new();
    for region in &mut fitted.regions {
        if region.population <= T::zero() {
            warn!("region {} has zero population; using a floor of {}", region.id, floor);
            floored.push(region.id.clone());
        }
    }
    let populations: Vec<T> = fitted.regions.iter().map(|r| r.population.max(floor)).collect();
    if !(total_population > T::zero()) {
        return Err(Error::InvalidOption("total population must be positive".into()));
    }

    let total_area = fitted.total_area();
    let mean = populations.iter().fold(T::zero(), |a, &p| a + p) / total_area;
    let target_areas: Vec<T> = populations.iter().map(|&p| p / mean).collect();

    let mut current = fitted.clone();
    for (region, &p) in current.regions.iter_mut().zip(&populations) {
        region.population = p;
    }

    let mut stack = ProjectionStack::new();
    let mut converged = false;
    let mut last_error = T::infinity();

    for k in 1..=opts.max_iterations {
        let wrap = |e: Error| Error::Iteration {
            iteration: k,
            source: Box::new(e),
        };
        let labels = rasterize_labels(&current, opts.grid);
        // Residual against the current boundaries, with the exterior reset
        // to the mean of the original map.
        let mut plateau = plateau_density(&current, &labels).map_err(wrap)?;
        plateau = replenish_exterior(&plateau, &labels, mean).map_err(wrap)?;
        let max_residual = plateau.data.iter().fold(T::zero(), |m, &v| m.max((v - mean).abs()));

        let (blurred, sigma) = blur_positive(&plateau, opts.sigma(k), mean, opts);
        let outcome = integrate_flow(&blurred, &[], &opts.flow).map_err(wrap)?;
        current = current.try_map_vertices(|p| outcome.field.apply(p)).map_err(wrap)?;

        let achieved = current.areas();
        let err = area_error_of(&positive_only(&fitted, &populations), &achieved, total_area);
        debug!(
            "iteration {k}: sigma {sigma}, max residual {max_residual}, area error {err}, {} steps",
            outcome.steps
        );
        if err > last_error {
            warn!("area error increased at iteration {k}: {last_error} -> {err}");
        }
        last_error = err;
        stack.fields.push(outcome.field);
        stack.log.push(IterationLog {
            iteration: k,
            sigma,
            max_residual,
            area_error: err,
            flow_steps: outcome.steps,
            flow_rejected: outcome.rejected,
        });
        if err < opts.tolerance {
            converged = true;
            break;
        }
    }

    let achieved_areas = current.areas();
    Ok(CartogramResult {
        original: fitted,
        projected: current,
        affine,
        stack,
        populations,
        target_areas,
        achieved_areas,
        mean_density: mean,
        converged,
        floored,
    })
}

fn positive_only<T: Scalar>(map: &RegionMap<T>, populations: &[T]) -> Vec<T> {
    map.regions
        .iter()
        .zip(populations)
        .map(|(r, &p)| if r.population > T::zero() { p } else { T::zero() })
        .collect()
}

/// Blurs `density` with width `sigma`, widening the kernel while the result
/// dips below `min_density_fraction · mean`.
fn blur_positive<T: Scalar>(density: &DensityGrid<T>, sigma: T, mean: T, opts: &CartogramOptions<T>) -> (DensityGrid<T>, T) {
    let floor = opts.min_density_fraction * mean;
    let mut sigma = sigma;
    let mut blurred = gaussian_blur(density, sigma);
    for _ in 0..opts.blur_retries {
        if blurred.min() > floor {
            break;
        }
        sigma = (sigma * opts.blur_retry_factor).max(T::one());
        warn!("blurred density too small; widening blur to {sigma} cells");
        blurred = gaussian_blur(density, sigma);
    }
    (blurred, sigma)
}
