//! Cosine-series representation of cell-centred fields under reflective
//! (no-flux) walls, with the Gaussian low-pass filter and the heat-equation
//! propagator that act diagonally on it.
//!
//! A field on an `nx × ny` grid over a frame of size `Lx × Ly` is written as
//!
//! ```text
//! ρ(x, y) = Σ_{m<nx, n<ny} a[n][m] · cos(π m (x − x0) / Lx) · cos(π n (y − y0) / Ly)
//! ```
//!
//! so `a[0][0]` is the mean of the field. Cell centres are synthesised with
//! a DCT-III; cell corners (grid nodes, including the walls) with a DCT-I
//! for cosine factors and a DST-I for the sine factors that appear in
//! derivatives.

use std::sync::Arc;

use rustdct::{Dct1, DctPlanner, Dst1, TransformType2And3};

use crate::grid::{Grid, GridGeometry};
use crate::scalar::Scalar;

/// Basis used along one axis when evaluating a series at grid nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeBasis {
    Cos,
    Sin,
}

struct Axis<T: Scalar> {
    n: usize,
    dct2: Arc<dyn TransformType2And3<T>>,
    dct1: Arc<dyn Dct1<T>>,
    dst1: Option<Arc<dyn Dst1<T>>>,
}

impl<T: Scalar> Axis<T> {
    fn new(planner: &mut DctPlanner<T>, n: usize) -> Self {
        Self {
            n,
            dct2: planner.plan_dct2(n),
            dct1: planner.plan_dct1(n + 1),
            dst1: (n >= 2).then(|| planner.plan_dst1(n - 1)),
        }
    }

    fn scratch_len(&self) -> usize {
        let d2 = self.dct2.get_scratch_len();
        let d1 = self.dct1.get_scratch_len();
        let s1 = self.dst1.as_ref().map_or(0, |d| d.get_scratch_len());
        d2.max(d1).max(s1)
    }

    /// Values at cell centres → normalised cosine coefficients.
    fn analyze(&self, input: &[T], out: &mut [T], scratch: &mut [T]) {
        out.copy_from_slice(input);
        self.dct2.process_dct2_with_scratch(out, &mut scratch[..self.dct2.get_scratch_len()]);
        let n = T::from_count(self.n);
        let two = T::lit(2.0);
        out[0] = out[0] / n;
        for v in &mut out[1..] {
            *v = *v * two / n;
        }
    }

    /// Coefficients → values at the `n` cell centres.
    fn synth_centers(&self, input: &[T], out: &mut [T], scratch: &mut [T]) {
        out.copy_from_slice(input);
        out[0] = out[0] * T::lit(2.0);
        self.dct2.process_dct3_with_scratch(out, &mut scratch[..self.dct2.get_scratch_len()]);
    }

    /// Coefficients → values at the `n + 1` nodes.
    fn synth_nodes(&self, basis: NodeBasis, input: &[T], out: &mut [T], scratch: &mut [T]) {
        match basis {
            NodeBasis::Cos => {
                out[..self.n].copy_from_slice(input);
                out[0] = out[0] * T::lit(2.0);
                out[self.n] = T::zero();
                self.dct1.process_dct1_with_scratch(out, &mut scratch[..self.dct1.get_scratch_len()]);
            }
            NodeBasis::Sin => {
                out[0] = T::zero();
                out[self.n] = T::zero();
                if let Some(dst1) = &self.dst1 {
                    let inner = &mut out[1..self.n];
                    inner.copy_from_slice(&input[1..]);
                    dst1.process_dst1_with_scratch(inner, &mut scratch[..dst1.get_scratch_len()]);
                }
            }
        }
    }
}

/// Planned 1-D transforms for a fixed `nx × ny` shape.
pub struct CosineTransform<T: Scalar> {
    x: Axis<T>,
    y: Axis<T>,
}

impl<T: Scalar> std::fmt::Debug for CosineTransform<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CosineTransform").field("nx", &self.x.n).field("ny", &self.y.n).finish()
    }
}

enum Pass {
    Analyze,
    Centers,
    Nodes(NodeBasis),
}

impl<T: Scalar> CosineTransform<T> {
    pub fn new(nx: usize, ny: usize) -> Self {
        assert!(nx >= 1 && ny >= 1, "empty grid");
        let mut planner = DctPlanner::new();
        let x = Axis::new(&mut planner, nx);
        let y = Axis::new(&mut planner, ny);
        Self { x, y }
    }

    pub fn nx(&self) -> usize {
        self.x.n
    }

    pub fn ny(&self) -> usize {
        self.y.n
    }

    /// Applies `px` along every row and then `py` along every column of a
    /// row-major `ny × nx` array.
    fn separable(&self, input: &[T], px: Pass, py: Pass) -> Vec<T> {
        let (nx, ny) = (self.x.n, self.y.n);
        debug_assert_eq!(input.len(), nx * ny);
        let out_len = |axis: &Axis<T>, p: &Pass| match p {
            Pass::Nodes(_) => axis.n + 1,
            _ => axis.n,
        };
        let mx = out_len(&self.x, &px);
        let my = out_len(&self.y, &py);
        let mut scratch = vec![T::zero(); self.x.scratch_len().max(self.y.scratch_len())];

        // Row pass, written transposed: column-major `mx × ny`.
        let mut cols = vec![T::zero(); mx * ny];
        let mut row_out = vec![T::zero(); mx];
        for j in 0..ny {
            let row = &input[j * nx..(j + 1) * nx];
            run(&self.x, &px, row, &mut row_out, &mut scratch);
            for (i, &v) in row_out.iter().enumerate() {
                cols[i * ny + j] = v;
            }
        }

        let mut out = vec![T::zero(); mx * my];
        let mut col_out = vec![T::zero(); my];
        for i in 0..mx {
            let col = &cols[i * ny..(i + 1) * ny];
            run(&self.y, &py, col, &mut col_out, &mut scratch);
            for (j, &v) in col_out.iter().enumerate() {
                out[j * mx + i] = v;
            }
        }
        out
    }

    /// Cell-centred values → coefficients `a[n][m]` (row-major, `n` along y).
    pub fn analyze(&self, values: &[T]) -> Vec<T> {
        self.separable(values, Pass::Analyze, Pass::Analyze)
    }

    /// Coefficients → cell-centred values.
    pub fn synthesize_centers(&self, coeffs: &[T]) -> Vec<T> {
        self.separable(coeffs, Pass::Centers, Pass::Centers)
    }

    /// Coefficients → values at the `(nx + 1) × (ny + 1)` nodes, with the
    /// chosen basis along each axis.
    pub fn synthesize_nodes(&self, coeffs: &[T], bx: NodeBasis, by: NodeBasis) -> Vec<T> {
        self.separable(coeffs, Pass::Nodes(bx), Pass::Nodes(by))
    }
}

impl<T: Scalar> CosineTransform<T> {
    /// Node values of the series and of its x- and y-derivatives, given the
    /// wavenumbers of each axis. Shares the row pass between the series and
    /// its y-derivative.
    pub fn synthesize_node_gradient(&self, coeffs: &[T], kx: &[T], ky: &[T]) -> [Vec<T>; 3] {
        let (nx, ny) = (self.x.n, self.y.n);
        debug_assert_eq!(coeffs.len(), nx * ny);
        let (mx, my) = (nx + 1, ny + 1);
        let mut scratch = vec![T::zero(); self.x.scratch_len().max(self.y.scratch_len())];

        // Row pass, written transposed: column-major `mx × ny`.
        let mut cos_cols = vec![T::zero(); mx * ny];
        let mut sin_cols = vec![T::zero(); mx * ny];
        let mut row_out = vec![T::zero(); mx];
        let mut deriv = vec![T::zero(); nx];
        for j in 0..ny {
            let row = &coeffs[j * nx..(j + 1) * nx];
            self.x.synth_nodes(NodeBasis::Cos, row, &mut row_out, &mut scratch);
            for (i, &v) in row_out.iter().enumerate() {
                cos_cols[i * ny + j] = v;
            }
            for ((d, &a), &k) in deriv.iter_mut().zip(row).zip(kx) {
                *d = a * k;
            }
            self.x.synth_nodes(NodeBasis::Sin, &deriv, &mut row_out, &mut scratch);
            for (i, &v) in row_out.iter().enumerate() {
                sin_cols[i * ny + j] = -v;
            }
        }

        let mut rho = vec![T::zero(); mx * my];
        let mut dx = vec![T::zero(); mx * my];
        let mut dy = vec![T::zero(); mx * my];
        let mut col_out = vec![T::zero(); my];
        let mut deriv = vec![T::zero(); ny];
        let scatter = |dst: &mut Vec<T>, i: usize, src: &[T], sign: T| {
            for (j, &v) in src.iter().enumerate() {
                dst[j * mx + i] = sign * v;
            }
        };
        for i in 0..mx {
            let col = &cos_cols[i * ny..(i + 1) * ny];
            self.y.synth_nodes(NodeBasis::Cos, col, &mut col_out, &mut scratch);
            scatter(&mut rho, i, &col_out, T::one());
            for ((d, &a), &k) in deriv.iter_mut().zip(col).zip(ky) {
                *d = a * k;
            }
            self.y.synth_nodes(NodeBasis::Sin, &deriv, &mut col_out, &mut scratch);
            scatter(&mut dy, i, &col_out, -T::one());
            let col = &sin_cols[i * ny..(i + 1) * ny];
            self.y.synth_nodes(NodeBasis::Cos, col, &mut col_out, &mut scratch);
            scatter(&mut dx, i, &col_out, T::one());
        }
        [rho, dx, dy]
    }
}

fn run<T: Scalar>(axis: &Axis<T>, pass: &Pass, input: &[T], out: &mut [T], scratch: &mut [T]) {
    match pass {
        Pass::Analyze => axis.analyze(input, out, scratch),
        Pass::Centers => axis.synth_centers(input, out, scratch),
        Pass::Nodes(b) => axis.synth_nodes(*b, input, out, scratch),
    }
}

/// Cosine coefficients of a cell-centred grid field.
#[derive(Debug, Clone)]
pub struct SpectralField<T: Scalar> {
    pub geom: GridGeometry<T>,
    /// Row-major `ny × nx`; entry `[n * nx + m]` multiplies the `(m, n)` mode.
    pub coeffs: Vec<T>,
    plan: Arc<CosineTransform<T>>,
}

impl<T: Scalar> SpectralField<T> {
    pub fn analyze(grid: &Grid<T>) -> Self {
        let plan = Arc::new(CosineTransform::new(grid.geom.nx, grid.geom.ny));
        Self::analyze_with(plan, grid)
    }

    pub fn analyze_with(plan: Arc<CosineTransform<T>>, grid: &Grid<T>) -> Self {
        assert_eq!((plan.nx(), plan.ny()), (grid.geom.nx, grid.geom.ny), "plan shape mismatch");
        Self {
            geom: grid.geom,
            coeffs: plan.analyze(&grid.data),
            plan,
        }
    }

    pub fn plan(&self) -> &Arc<CosineTransform<T>> {
        &self.plan
    }

    /// Mean of the represented field; times the frame area it is the total mass.
    pub fn mean(&self) -> T {
        self.coeffs[0]
    }

    /// Wavenumbers `π m / Lx` for `m < nx`.
    pub fn kx(&self) -> Vec<T> {
        wavenumbers(self.geom.nx, self.geom.width())
    }

    /// Wavenumbers `π n / Ly` for `n < ny`.
    pub fn ky(&self) -> Vec<T> {
        wavenumbers(self.geom.ny, self.geom.height())
    }

    /// Returns a copy with coefficient `(m, n)` multiplied by `f(kx², ky²)`.
    pub fn scaled(&self, f: impl Fn(T, T) -> T) -> Self {
        let kx = self.kx();
        let ky = self.ky();
        let nx = self.geom.nx;
        let mut out = self.clone();
        for (n, &ky) in ky.iter().enumerate() {
            for (m, &kx) in kx.iter().enumerate() {
                let c = &mut out.coeffs[n * nx + m];
                *c = *c * f(kx * kx, ky * ky);
            }
        }
        out
    }

    pub fn to_grid(&self) -> Grid<T> {
        Grid {
            geom: self.geom,
            data: self.plan.synthesize_centers(&self.coeffs),
        }
    }
}

pub(crate) fn wavenumbers<T: Scalar>(n: usize, length: T) -> Vec<T> {
    (0..n).map(|m| T::PI() * T::from_count(m) / length).collect()
}

/// Gaussian low-pass filter of width `sigma` (in frame units), applied in
/// the cosine basis so that walls reflect. The zero mode is untouched, so
/// total mass is preserved.
pub fn gaussian_blur<T: Scalar>(density: &Grid<T>, sigma: T) -> Grid<T> {
    if sigma == T::zero() {
        return density.clone();
    }
    let half_s2 = sigma * sigma * T::lit(0.5);
    SpectralField::analyze(density)
        .scaled(|kx2, ky2| (-(kx2 + ky2) * half_s2).exp())
        .to_grid()
}

/// Heat-equation solution at pseudo-time `t` with no-flux walls.
pub fn diffuse<T: Scalar>(initial: &SpectralField<T>, t: T) -> Grid<T> {
    initial.scaled(|kx2, ky2| (-(kx2 + ky2) * t).exp()).to_grid()
}
