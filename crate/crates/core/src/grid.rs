//! Regular cell-centred grids over a rectangular frame.

use crate::error::{Error, Result};
use crate::geometry::{Point, Rect};
use crate::scalar::Scalar;

/// Shape and placement of an `nx × ny` grid. Cell `(i, j)` spans
/// `[x0 + i·dx, x0 + (i+1)·dx] × [y0 + j·dy, y0 + (j+1)·dy]`; row `j = 0`
/// is the lowest in y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry<T> {
    pub nx: usize,
    pub ny: usize,
    pub origin: Point<T>,
    pub dx: T,
    pub dy: T,
}

impl<T: Scalar> GridGeometry<T> {
    pub fn new(nx: usize, ny: usize, origin: Point<T>, dx: T, dy: T) -> Self {
        Self { nx, ny, origin, dx, dy }
    }

    /// Splits `frame` into `nx × ny` cells.
    pub fn over(frame: &Rect<T>, nx: usize, ny: usize) -> Self {
        Self {
            nx,
            ny,
            origin: frame.min,
            dx: frame.width() / T::from_count(nx),
            dy: frame.height() / T::from_count(ny),
        }
    }

    /// Square `n × n` grid of unit cells on `[0, n]²`.
    pub fn unit(n: usize) -> Self {
        Self::new(n, n, Point::new(T::zero(), T::zero()), T::one(), T::one())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn cell_area(&self) -> T {
        self.dx * self.dy
    }

    pub fn width(&self) -> T {
        self.dx * T::from_count(self.nx)
    }

    pub fn height(&self) -> T {
        self.dy * T::from_count(self.ny)
    }

    pub fn frame(&self) -> Rect<T> {
        Rect::new(
            self.origin,
            Point::new(self.origin.x + self.width(), self.origin.y + self.height()),
        )
    }

    #[inline]
    pub fn cell_center(&self, i: usize, j: usize) -> Point<T> {
        let h = T::lit(0.5);
        Point::new(
            self.origin.x + (T::from_count(i) + h) * self.dx,
            self.origin.y + (T::from_count(j) + h) * self.dy,
        )
    }

    /// Corner node `(i, j)` with `0 ≤ i ≤ nx`, `0 ≤ j ≤ ny`.
    #[inline]
    pub fn node(&self, i: usize, j: usize) -> Point<T> {
        Point::new(
            self.origin.x + T::from_count(i) * self.dx,
            self.origin.y + T::from_count(j) * self.dy,
        )
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.nx == other.nx && self.ny == other.ny
    }
}

/// Scalar field sampled at cell centres. Used for densities, residuals and
/// Jacobian factors alike.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    pub geom: GridGeometry<T>,
    pub data: Vec<T>,
}

pub type DensityGrid<T> = Grid<T>;

impl<T: Scalar> Grid<T> {
    pub fn filled(geom: GridGeometry<T>, value: T) -> Self {
        Self {
            data: vec![value; geom.len()],
            geom,
        }
    }

    pub fn from_fn(geom: GridGeometry<T>, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(geom.len());
        for j in 0..geom.ny {
            for i in 0..geom.nx {
                data.push(f(i, j));
            }
        }
        Self { geom, data }
    }

    pub fn from_vec(geom: GridGeometry<T>, data: Vec<T>) -> Result<Self> {
        if data.len() != geom.len() {
            return Err(Error::ShapeMismatch);
        }
        Ok(Self { geom, data })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[self.geom.index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        let k = self.geom.index(i, j);
        self.data[k] = v;
    }

    pub fn sum(&self) -> T {
        self.data.iter().fold(T::zero(), |a, &b| a + b)
    }

    /// Integral over the frame by the midpoint rule.
    pub fn total_mass(&self) -> T {
        self.sum() * self.geom.cell_area()
    }

    pub fn mean(&self) -> T {
        self.sum() / T::from_count(self.data.len())
    }

    pub fn min(&self) -> T {
        self.data.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max(&self) -> T {
        self.data.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            geom: self.geom,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Bilinear sample at `p` treating values as located at cell centres;
    /// clamps to the outermost centres.
    pub fn sample(&self, p: Point<T>) -> T {
        let g = &self.geom;
        let h = T::lit(0.5);
        let fx = ((p.x - g.origin.x) / g.dx - h).max(T::zero()).min(T::from_count(g.nx - 1));
        let fy = ((p.y - g.origin.y) / g.dy - h).max(T::zero()).min(T::from_count(g.ny - 1));
        let i0 = fx.floor().to_usize().unwrap_or(0).min(g.nx.saturating_sub(2));
        let j0 = fy.floor().to_usize().unwrap_or(0).min(g.ny.saturating_sub(2));
        let i1 = (i0 + 1).min(g.nx - 1);
        let j1 = (j0 + 1).min(g.ny - 1);
        let tx = fx - T::from_count(i0);
        let ty = fy - T::from_count(j0);
        let one = T::one();
        self.get(i0, j0) * (one - tx) * (one - ty)
            + self.get(i1, j0) * tx * (one - ty)
            + self.get(i0, j1) * (one - tx) * ty
            + self.get(i1, j1) * tx * ty
    }
}

/// Marker for cells outside every region.
pub const EXTERIOR: u32 = u32::MAX;

/// Per-cell region index, or [`EXTERIOR`].
#[derive(Debug, Clone, PartialEq)]
pub struct LabelGrid<T> {
    pub geom: GridGeometry<T>,
    pub labels: Vec<u32>,
    /// Number of regions the labels refer to.
    pub regions: usize,
}

impl<T: Scalar> LabelGrid<T> {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.labels[self.geom.index(i, j)]
    }

    pub fn region_of(&self, i: usize, j: usize) -> Option<usize> {
        match self.get(i, j) {
            EXTERIOR => None,
            r => Some(r as usize),
        }
    }

    pub fn cell_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.regions];
        for &l in &self.labels {
            if l != EXTERIOR {
                counts[l as usize] += 1;
            }
        }
        counts
    }
}
