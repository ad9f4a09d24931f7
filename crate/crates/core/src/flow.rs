//! One round of the diffusion-driven density-equalising projection.
//!
//! The density is treated as a fluid that spreads by diffusion inside the
//! frame. Every point moves with velocity `v = −∇ρ / ρ`, the gradient of a
//! scalar and therefore curl-free; mass is conserved because the flux
//! `ρ v = −∇ρ` is the diffusion flux. Integrating `dx/dτ = v(x, τ)` until the
//! density is flat yields the displacement of every grid node.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{Point, Rect};
use crate::grid::{DensityGrid, GridGeometry};
use crate::scalar::Scalar;
use crate::spectral::{CosineTransform, NodeBasis, SpectralField};

/// Mapped position of every grid node for one projection.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField<T> {
    /// Cell layout; nodes are the `(nx + 1) × (ny + 1)` cell corners.
    pub geom: GridGeometry<T>,
    /// Row-major, index `j * (nx + 1) + i`.
    pub nodes: Vec<Point<T>>,
}

impl<T: Scalar> DisplacementField<T> {
    pub fn identity(geom: GridGeometry<T>) -> Self {
        Self::from_fn(geom, |p| p)
    }

    /// Field whose node `(i, j)` maps to `f(node position)`.
    pub fn from_fn(geom: GridGeometry<T>, f: impl Fn(Point<T>) -> Point<T>) -> Self {
        let mut nodes = Vec::with_capacity((geom.nx + 1) * (geom.ny + 1));
        for j in 0..=geom.ny {
            for i in 0..=geom.nx {
                nodes.push(f(geom.node(i, j)));
            }
        }
        Self { geom, nodes }
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> Point<T> {
        self.nodes[j * (self.geom.nx + 1) + i]
    }

    pub fn frame(&self) -> Rect<T> {
        self.geom.frame()
    }

    /// Bilinear interpolation of the node images at `p`.
    pub fn apply(&self, p: Point<T>) -> Result<Point<T>> {
        let frame = self.frame();
        if !p.is_finite() || !frame.contains_with_slack(&p, T::lit(1e-9)) {
            return Err(Error::OutsideFrame {
                x: p.x.as_f64(),
                y: p.y.as_f64(),
            });
        }
        let (i, j, tx, ty) = locate(&self.geom, p);
        let one = T::one();
        let (a, b, c, d) = (self.node(i, j), self.node(i + 1, j), self.node(i, j + 1), self.node(i + 1, j + 1));
        let w = [(one - tx) * (one - ty), tx * (one - ty), (one - tx) * ty, tx * ty];
        Ok(Point::new(
            a.x * w[0] + b.x * w[1] + c.x * w[2] + d.x * w[3],
            a.y * w[0] + b.y * w[1] + c.y * w[2] + d.y * w[3],
        ))
    }

    /// Signed area of the image of cell `(i, j)`, taking the four mapped
    /// corners as a quadrilateral.
    pub fn cell_image_area(&self, i: usize, j: usize) -> T {
        quad_area([self.node(i, j), self.node(i + 1, j), self.node(i + 1, j + 1), self.node(i, j + 1)])
    }

    /// Fails on the first cell whose image is not positively oriented.
    pub fn check_orientation(&self) -> Result<()> {
        for j in 0..self.geom.ny {
            for i in 0..self.geom.nx {
                if !(self.cell_image_area(i, j) > T::zero()) {
                    return Err(Error::OrientationFlip { i, j });
                }
            }
        }
        Ok(())
    }

    /// Largest node movement.
    pub fn max_displacement(&self) -> T {
        let mut best = T::zero();
        for j in 0..=self.geom.ny {
            for i in 0..=self.geom.nx {
                best = best.max(self.node(i, j).distance(&self.geom.node(i, j)));
            }
        }
        best
    }
}

/// Shoelace area of a quadrilateral given counter-clockwise.
pub fn quad_area<T: Scalar>(q: [Point<T>; 4]) -> T {
    let [a, b, c, d] = q;
    ((c.x - a.x) * (d.y - b.y) - (d.x - b.x) * (c.y - a.y)) * T::lit(0.5)
}

/// Cell containing `p` (clamped to the grid) and the fractional offsets.
#[inline]
fn locate<T: Scalar>(geom: &GridGeometry<T>, p: Point<T>) -> (usize, usize, T, T) {
    let fx = ((p.x - geom.origin.x) / geom.dx).max(T::zero()).min(T::from_count(geom.nx));
    let fy = ((p.y - geom.origin.y) / geom.dy).max(T::zero()).min(T::from_count(geom.ny));
    let i = fx.floor().to_usize().unwrap_or(0).min(geom.nx - 1);
    let j = fy.floor().to_usize().unwrap_or(0).min(geom.ny - 1);
    (i, j, fx - T::from_count(i), fy - T::from_count(j))
}

/// Velocity sampled at the grid nodes at one pseudo-time.
#[derive(Debug, Clone)]
pub struct VelocityField<T> {
    pub geom: GridGeometry<T>,
    pub vx: Vec<T>,
    pub vy: Vec<T>,
}

impl<T: Scalar> VelocityField<T> {
    #[inline]
    pub fn node(&self, i: usize, j: usize) -> (T, T) {
        let k = j * (self.geom.nx + 1) + i;
        (self.vx[k], self.vy[k])
    }

    /// Bilinear interpolation between nodes; points are clamped to the frame.
    #[inline]
    pub fn at(&self, p: Point<T>) -> (T, T) {
        let (i, j, tx, ty) = locate(&self.geom, p);
        let w = self.geom.nx + 1;
        let k = j * w + i;
        let one = T::one();
        let (w00, w10, w01, w11) = ((one - tx) * (one - ty), tx * (one - ty), (one - tx) * ty, tx * ty);
        (
            self.vx[k] * w00 + self.vx[k + 1] * w10 + self.vx[k + w] * w01 + self.vx[k + w + 1] * w11,
            self.vy[k] * w00 + self.vy[k + 1] * w10 + self.vy[k + w] * w01 + self.vy[k + w + 1] * w11,
        )
    }

    pub fn max_speed(&self) -> T {
        self.vx
            .iter()
            .zip(&self.vy)
            .fold(T::zero(), |m, (&x, &y)| m.max(x.hypot(y)))
    }
}

/// Precomputed spectral data of the density being flattened.
#[derive(Debug, Clone)]
pub struct FlowState<T: Scalar> {
    field: SpectralField<T>,
    kx: Vec<T>,
    ky: Vec<T>,
}

impl<T: Scalar> FlowState<T> {
    pub fn new(density: &DensityGrid<T>) -> Self {
        let field = SpectralField::analyze(density);
        Self::from_field(field)
    }

    pub fn with_plan(plan: Arc<CosineTransform<T>>, density: &DensityGrid<T>) -> Self {
        Self::from_field(SpectralField::analyze_with(plan, density))
    }

    fn from_field(field: SpectralField<T>) -> Self {
        let kx = field.kx();
        let ky = field.ky();
        Self { field, kx, ky }
    }

    pub fn geom(&self) -> &GridGeometry<T> {
        &self.field.geom
    }

    pub fn mean(&self) -> T {
        self.field.mean()
    }

    pub fn spectral(&self) -> &SpectralField<T> {
        &self.field
    }

    /// Largest absolute amplitude among the nonzero modes at time `tau`.
    pub fn residual_amplitude(&self, tau: T) -> T {
        let nx = self.field.geom.nx;
        let (ex, ey) = self.decay_factors(tau);
        let mut best = T::zero();
        for (n, &fy) in ey.iter().enumerate() {
            let row = &self.field.coeffs[n * nx..(n + 1) * nx];
            for (m, (&a, &fx)) in row.iter().zip(&ex).enumerate() {
                if m == 0 && n == 0 {
                    continue;
                }
                best = best.max(a.abs() * fx * fy);
            }
        }
        best
    }

    /// `exp(−k²τ)` per axis; the decay of mode `(m, n)` is `ex[m] · ey[n]`.
    fn decay_factors(&self, tau: T) -> (Vec<T>, Vec<T>) {
        let f = |k: &Vec<T>| k.iter().map(|&k| (-k * k * tau).exp()).collect();
        (f(&self.kx), f(&self.ky))
    }

    fn decayed(&self, tau: T) -> Vec<T> {
        let nx = self.field.geom.nx;
        let (ex, ey) = self.decay_factors(tau);
        let mut c = self.field.coeffs.clone();
        for (row, &fy) in c.chunks_exact_mut(nx).zip(&ey) {
            for (v, &fx) in row.iter_mut().zip(&ex) {
                *v = *v * fx * fy;
            }
        }
        c
    }

    /// Density at every node at time `tau`.
    pub fn density_at_nodes(&self, tau: T) -> Vec<T> {
        self.field
            .plan()
            .synthesize_nodes(&self.decayed(tau), NodeBasis::Cos, NodeBasis::Cos)
    }

    /// `v = −∇ρ / ρ` at every node at time `tau`. The x-derivative uses a
    /// sine series in x, which vanishes on the x-walls (and likewise in y),
    /// so the normal velocity on the walls is exactly zero.
    pub fn velocity_field(&self, tau: T) -> Result<VelocityField<T>> {
        let geom = self.field.geom;
        let nx = geom.nx;
        let plan = self.field.plan();
        let c = self.decayed(tau);
        let [rho, mut vx, mut vy] = plan.synthesize_node_gradient(&c, &self.kx, &self.ky);
        for (k, &r) in rho.iter().enumerate() {
            if !(r > T::zero()) {
                let (i, j) = (k % (nx + 1), k / (nx + 1));
                let p = geom.node(i, j);
                return Err(Error::NonPositiveDensity {
                    density: r.as_f64(),
                    x: p.x.as_f64(),
                    y: p.y.as_f64(),
                });
            }
            vx[k] = -vx[k] / r;
            vy[k] = -vy[k] / r;
        }
        Ok(VelocityField { geom, vx, vy })
    }
}

/// Velocity at an arbitrary point, interpolated bilinearly between nodes.
pub fn velocity_at<T: Scalar>(point: Point<T>, tau: T, state: &FlowState<T>) -> Result<(T, T)> {
    Ok(state.velocity_field(tau)?.at(point))
}

/// Tolerances of the trajectory integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions<T> {
    /// Stop when every nonzero mode is below this fraction of the mean.
    pub equilibrium: T,
    /// Largest accepted Euler/midpoint disagreement, in cell widths.
    pub step_tolerance: T,
    /// Step growth factor after `growth_after` consecutive acceptances.
    pub growth: T,
    pub growth_after: usize,
    /// Initial step; `None` picks one that moves the fastest node one cell.
    pub initial_step: Option<T>,
    /// Abort once the step falls below this fraction of the initial step.
    pub underflow: T,
    pub max_steps: usize,
}

impl<T: Scalar> Default for FlowOptions<T> {
    fn default() -> Self {
        Self {
            equilibrium: T::lit(1e-3),
            step_tolerance: T::lit(0.01),
            growth: T::lit(1.25),
            growth_after: 5,
            initial_step: None,
            underflow: T::lit(1e-12),
            max_steps: 100_000,
        }
    }
}

/// Result of flattening one density.
#[derive(Debug, Clone)]
pub struct FlowOutcome<T> {
    pub field: DisplacementField<T>,
    pub targets: Vec<Point<T>>,
    /// Accepted steps.
    pub steps: usize,
    pub rejected: usize,
    /// Pseudo-time at which the density was declared flat.
    pub tau: T,
}

/// Advects every grid node and every target point with the flow of
/// `density` until it is equilibrated.
///
/// Each step compares an Euler and a midpoint prediction; the midpoint
/// result is kept when they agree to within the step tolerance, otherwise
/// the step is halved.
pub fn integrate_flow<T: Scalar>(density: &DensityGrid<T>, targets: &[Point<T>], opts: &FlowOptions<T>) -> Result<FlowOutcome<T>> {
    let state = FlowState::new(density);
    integrate_state(&state, targets, opts)
}

pub fn integrate_state<T: Scalar>(state: &FlowState<T>, targets: &[Point<T>], opts: &FlowOptions<T>) -> Result<FlowOutcome<T>> {
    let geom = *state.geom();
    let frame = geom.frame();
    let mean = state.mean();
    if !(mean > T::zero()) {
        return Err(Error::NonPositiveDensity {
            density: mean.as_f64(),
            x: f64::NAN,
            y: f64::NAN,
        });
    }
    let cell = geom.dx.min(geom.dy);
    let tolerance = opts.step_tolerance * cell;
    let threshold = opts.equilibrium * mean;

    let node_count = (geom.nx + 1) * (geom.ny + 1);
    let mut points: Vec<Point<T>> = DisplacementField::identity(geom).nodes;
    points.extend_from_slice(targets);

    let mut tau = T::zero();
    let mut steps = 0usize;
    let mut rejected = 0usize;

    if state.residual_amplitude(tau) >= threshold {
        let mut v_now = state.velocity_field(tau)?;
        let vmax = v_now.max_speed();
        let mut dt = opts.initial_step.unwrap_or_else(|| if vmax > T::zero() { cell / vmax } else { T::one() });
        let dt_initial = dt;
        let mut streak = 0usize;
        let half = T::lit(0.5);
        let mut euler = vec![Point::default(); points.len()];
        let mut midpoint = vec![Point::default(); points.len()];

        while state.residual_amplitude(tau) >= threshold {
            if steps >= opts.max_steps {
                return Err(Error::TooManySteps(opts.max_steps));
            }
            let v_mid = state.velocity_field(tau + dt * half)?;
            let mut err = T::zero();
            for ((p, e), m) in points.iter().zip(euler.iter_mut()).zip(midpoint.iter_mut()) {
                let (ux, uy) = v_now.at(*p);
                *e = Point::new(p.x + dt * ux, p.y + dt * uy);
                let half_way = Point::new(p.x + dt * half * ux, p.y + dt * half * uy);
                let (wx, wy) = v_mid.at(half_way);
                *m = Point::new(p.x + dt * wx, p.y + dt * wy);
                err = err.max(e.distance(m));
            }
            if err < tolerance {
                for (p, m) in points.iter_mut().zip(&midpoint) {
                    *p = clamp(*m, &frame);
                }
                tau = tau + dt;
                steps += 1;
                streak += 1;
                if streak == opts.growth_after {
                    dt = dt * opts.growth;
                    streak = 0;
                }
                v_now = state.velocity_field(tau)?;
            } else {
                dt = dt * half;
                streak = 0;
                rejected += 1;
                if dt < opts.underflow * dt_initial {
                    return Err(Error::StepUnderflow {
                        tau: tau.as_f64(),
                        step: dt.as_f64(),
                    });
                }
            }
        }
    }

    let targets = points.split_off(node_count);
    let field = DisplacementField { geom, nodes: points };
    field.check_orientation()?;
    Ok(FlowOutcome {
        field,
        targets,
        steps,
        rejected,
        tau,
    })
}

#[inline]
fn clamp<T: Scalar>(p: Point<T>, frame: &Rect<T>) -> Point<T> {
    Point::new(p.x.max(frame.min.x).min(frame.max.x), p.y.max(frame.min.y).min(frame.max.y))
}
