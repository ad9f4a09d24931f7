//! Mass-preserving cellular-automaton smoothing on the raster, used both as
//! a stand-alone baseline and as a post-pass over the flow-based density.

use log::warn;

use crate::error::{Error, Result};
use crate::grid::{DensityGrid, Grid, GridGeometry, LabelGrid, EXTERIOR};
use crate::scalar::Scalar;

/// `∬ (∇²ρ)² dx dy`, with the five-point Laplacian evaluated on interior
/// cells (the outermost ring of cells has no complete stencil and is
/// skipped).
pub fn roughness<T: Scalar>(density: &DensityGrid<T>) -> T {
    let g = &density.geom;
    if g.nx < 3 || g.ny < 3 {
        return T::zero();
    }
    let (idx2, idy2) = (T::one() / (g.dx * g.dx), T::one() / (g.dy * g.dy));
    let two = T::lit(2.0);
    let mut acc = T::zero();
    for j in 1..g.ny - 1 {
        for i in 1..g.nx - 1 {
            let c = density.get(i, j);
            let lap = (density.get(i + 1, j) + density.get(i - 1, j) - two * c) * idx2
                + (density.get(i, j + 1) + density.get(i, j - 1) - two * c) * idy2;
            acc = acc + lap * lap;
        }
    }
    acc * g.cell_area()
}

/// Value of the neighbour `(i + di, j + dj)`; neighbours off the grid are
/// mirrored back onto the cell itself.
#[inline]
fn neighbour<T: Scalar>(density: &DensityGrid<T>, i: usize, j: usize, di: isize, dj: isize) -> T {
    let g = &density.geom;
    let (ii, jj) = (i as isize + di, j as isize + dj);
    if ii < 0 || jj < 0 || ii >= g.nx as isize || jj >= g.ny as isize {
        density.get(i, j)
    } else {
        density.get(ii as usize, jj as usize)
    }
}

/// Smoothing state: the density, the original labels and the per-region
/// masses that must be preserved.
#[derive(Debug, Clone)]
pub struct CAState<T: Scalar> {
    pub density: DensityGrid<T>,
    pub labels: LabelGrid<T>,
    pub targets: Vec<T>,
    pub iteration: usize,
}

impl<T: Scalar> CAState<T> {
    pub fn new(density: DensityGrid<T>, labels: LabelGrid<T>, targets: Vec<T>) -> Result<Self> {
        if !density.geom.same_shape(&labels.geom) || targets.len() != labels.regions {
            return Err(Error::ShapeMismatch);
        }
        Ok(Self {
            density,
            labels,
            targets,
            iteration: 0,
        })
    }

    pub fn region_masses(&self) -> Vec<T> {
        region_sums(&self.density, &self.labels)
            .into_iter()
            .map(|s| s * self.density.geom.cell_area())
            .collect()
    }
}

/// Per-region sums with compensated (Neumaier) summation, so that the
/// rounding error stays well below the mass tolerance on large grids.
fn region_sums<T: Scalar>(density: &DensityGrid<T>, labels: &LabelGrid<T>) -> Vec<T> {
    let mut sums = vec![T::zero(); labels.regions];
    let mut carry = vec![T::zero(); labels.regions];
    for (&l, &v) in labels.labels.iter().zip(&density.data) {
        if l != EXTERIOR {
            let r = l as usize;
            let t = sums[r] + v;
            carry[r] = carry[r] + if sums[r].abs() >= v.abs() { (sums[r] - t) + v } else { (v - t) + sums[r] };
            sums[r] = t;
        }
    }
    sums.iter().zip(&carry).map(|(&s, &c)| s + c).collect()
}

const MAX_RESTORE_PASSES: usize = 50;

/// Restores each region's mass: additive shift, then clamping negatives to
/// zero and removing the clamped amount proportionally from the positive
/// cells.
fn restore_masses<T: Scalar>(density: &mut Grid<T>, labels: &LabelGrid<T>, targets: &[T]) -> Result<()> {
    let counts = labels.cell_counts();
    let area = density.geom.cell_area();
    let goal: Vec<T> = targets.iter().map(|&p| p / area).collect();
    for _ in 0..MAX_RESTORE_PASSES {
        let sums = region_sums(density, labels);
        let shift: Vec<T> = sums
            .iter()
            .zip(&goal)
            .zip(&counts)
            .map(|((&s, &g), &n)| if n > 0 { (g - s) / T::from_count(n) } else { T::zero() })
            .collect();
        let mut positive = vec![T::zero(); labels.regions];
        let mut clamped = vec![T::zero(); labels.regions];
        for (v, &l) in density.data.iter_mut().zip(&labels.labels) {
            if l == EXTERIOR {
                continue;
            }
            let r = l as usize;
            *v = *v + shift[r];
            if *v < T::zero() {
                clamped[r] = clamped[r] - *v;
                *v = T::zero();
            } else {
                positive[r] = positive[r] + *v;
            }
        }
        let mut factor = vec![T::one(); labels.regions];
        for r in 0..labels.regions {
            if clamped[r] > T::zero() {
                if !(positive[r] > T::zero()) {
                    return Err(Error::MassRestoration(r));
                }
                factor[r] = ((positive[r] - clamped[r]) / positive[r]).max(T::zero());
            }
        }
        for (v, &l) in density.data.iter_mut().zip(&labels.labels) {
            if l != EXTERIOR {
                *v = *v * factor[l as usize];
            }
        }
        let sums = region_sums(density, labels);
        let ok = sums.iter().zip(&goal).zip(&counts).all(|((&s, &g), &n)| {
            n == 0 || (s - g).abs() <= T::lit(1e-12) * g.abs().max(T::min_positive_value())
        });
        if ok {
            return Ok(());
        }
    }
    let sums = region_sums(density, labels);
    let worst = (0..labels.regions)
        .filter(|&r| counts[r] > 0)
        .max_by(|&a, &b| {
            let ea = (sums[a] - goal[a]).abs();
            let eb = (sums[b] - goal[b]).abs();
            ea.partial_cmp(&eb).unwrap_or(std::cmp::Ordering::Equal)
        })
        .unwrap_or(0);
    Err(Error::MassRestoration(worst))
}

/// One relaxation sweep followed by mass restoration.
///
/// Every labelled cell moves toward the average of its four neighbours;
/// neighbours outside the grid are replaced by the cell itself. Exterior
/// cells are left unchanged and act as fixed neighbours.
pub fn ca_step<T: Scalar>(state: &CAState<T>, relaxation: T) -> Result<CAState<T>> {
    if !(relaxation > T::zero() && relaxation <= T::one()) {
        return Err(Error::InvalidOption(format!("relaxation must lie in (0, 1], got {relaxation}")));
    }
    let g = state.density.geom;
    let old = &state.density;
    let labels = &state.labels;
    let quarter = T::lit(0.25);
    let mut next = old.clone();
    for j in 0..g.ny {
        for i in 0..g.nx {
            let k = g.index(i, j);
            if labels.labels[k] == EXTERIOR {
                continue;
            }
            let c = old.data[k];
            let n = |di, dj| neighbour(old, i, j, di, dj);
            let avg = (n(-1, 0) + n(1, 0) + n(0, -1) + n(0, 1)) * quarter;
            next.data[k] = c + relaxation * (avg - c);
        }
    }
    restore_masses(&mut next, labels, &state.targets)?;
    Ok(CAState {
        density: next,
        labels: state.labels.clone(),
        targets: state.targets.clone(),
        iteration: state.iteration + 1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaOptions<T> {
    pub relaxation: T,
    /// Stop when no cell changes by more than this; `None` means `1e-6 · ρ̄`.
    pub threshold: Option<T>,
    /// `None` means ten times the larger grid side.
    pub max_iterations: Option<usize>,
    /// Relaxation halvings tried before giving up on a step.
    pub max_retries: usize,
}

impl<T: Scalar> Default for CaOptions<T> {
    fn default() -> Self {
        Self {
            relaxation: T::lit(0.5),
            threshold: None,
            max_iterations: None,
            max_retries: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CaOutcome<T> {
    pub density: DensityGrid<T>,
    /// Accepted steps.
    pub iterations: usize,
    /// Largest cell change fell below the threshold.
    pub converged: bool,
    /// Roughness after each accepted step, starting with the initial state.
    pub roughness: Vec<T>,
    /// Largest cell change of the last accepted step.
    pub last_change: T,
}

/// Scales each region of `density` so that its integral equals its target.
/// Regions whose integral is zero are filled uniformly.
pub fn snap_masses<T: Scalar>(density: &DensityGrid<T>, labels: &LabelGrid<T>, targets: &[T]) -> Result<DensityGrid<T>> {
    if !density.geom.same_shape(&labels.geom) || targets.len() != labels.regions {
        return Err(Error::ShapeMismatch);
    }
    let area = density.geom.cell_area();
    let sums = region_sums(density, labels);
    let counts = labels.cell_counts();
    let mut out = density.clone();
    for (v, &l) in out.data.iter_mut().zip(&labels.labels) {
        if l == EXTERIOR {
            continue;
        }
        let r = l as usize;
        let goal = targets[r] / area;
        *v = if sums[r] > T::zero() {
            *v * (goal / sums[r])
        } else {
            goal / T::from_count(counts[r])
        };
    }
    Ok(out)
}

/// Resamples a raster onto `geom` by bilinear interpolation between cell
/// centres; returns a copy when the geometries already agree.
pub fn resample<T: Scalar>(raster: &DensityGrid<T>, geom: GridGeometry<T>) -> DensityGrid<T> {
    if raster.geom == geom {
        return raster.clone();
    }
    Grid::from_fn(geom, |i, j| raster.sample(geom.cell_center(i, j)))
}

/// Iterates [`ca_step`] from `init`, accepting a step only when roughness
/// does not increase (halving the relaxation otherwise).
///
/// `init` is first resampled onto the label grid and its region masses are
/// snapped to `targets`, so the mass invariant holds from the start.
pub fn ca_run<T: Scalar>(labels: &LabelGrid<T>, targets: &[T], init: &DensityGrid<T>, opts: &CaOptions<T>) -> Result<CaOutcome<T>> {
    ca_run_observed(labels, targets, init, opts, |_| {})
}

/// [`ca_run`], calling `observe` with the state after every accepted step.
pub fn ca_run_observed<T: Scalar>(
    labels: &LabelGrid<T>,
    targets: &[T],
    init: &DensityGrid<T>,
    opts: &CaOptions<T>,
    mut observe: impl FnMut(&CAState<T>),
) -> Result<CaOutcome<T>> {
    let start = snap_masses(&resample(init, labels.geom), labels, targets)?;
    let total_area = T::from_count(labels.labels.iter().filter(|&&l| l != EXTERIOR).count()) * labels.geom.cell_area();
    let total_pop = targets.iter().fold(T::zero(), |a, &b| a + b);
    let mean = if total_area > T::zero() { total_pop / total_area } else { T::zero() };
    let threshold = opts.threshold.unwrap_or(T::lit(1e-6) * mean);
    let max_iterations = opts.max_iterations.unwrap_or(10 * labels.geom.nx.max(labels.geom.ny));

    let mut state = CAState::new(start, labels.clone(), targets.to_vec())?;
    let mut rough = roughness(&state.density);
    let mut history = vec![rough];
    let mut converged = false;
    let mut last_change = T::infinity();

    'outer: while state.iteration < max_iterations {
        let mut relaxation = opts.relaxation;
        let mut tries = 0;
        let candidate = loop {
            let cand = ca_step(&state, relaxation)?;
            let r = roughness(&cand.density);
            if r <= rough {
                break (cand, r);
            }
            tries += 1;
            if tries > opts.max_retries {
                warn!("smoothing stalled after {} steps: roughness would increase", state.iteration);
                break 'outer;
            }
            relaxation = relaxation * T::lit(0.5);
        };
        let (next, r) = candidate;
        last_change = next
            .density
            .data
            .iter()
            .zip(&state.density.data)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()));
        state = next;
        observe(&state);
        rough = r;
        history.push(r);
        if last_change < threshold {
            converged = true;
            break;
        }
    }
    Ok(CaOutcome {
        density: state.density,
        iterations: state.iteration,
        converged,
        roughness: history,
        last_change,
    })
}
