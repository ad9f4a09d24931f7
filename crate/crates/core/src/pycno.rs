//! Pycnophylactic density from the area distortion of the composed
//! projection.

use crate::driver::ProjectionStack;
use crate::error::{Error, Result};
use crate::flow::quad_area;
use crate::geometry::{Affine, Point, Rect, RegionMap};
use crate::grid::{Grid, GridGeometry};
use crate::rasterize::{integrate_over_regions, rasterize_labels_on};
use crate::scalar::Scalar;

/// Per-cell area expansion factor of a projection.
pub type JacobianGrid<T> = Grid<T>;

/// Density on the unprojected frame whose region integrals reproduce the
/// populations.
pub type PycnoRaster<T> = Grid<T>;

/// Applies `t_1`, then `t_2`, …, then `t_l` to `p`. Every stage must receive
/// a point inside its frame.
pub fn compose_at<T: Scalar>(stack: &ProjectionStack<T>, p: Point<T>) -> Result<Point<T>> {
    let mut q = p;
    for (k, field) in stack.fields.iter().enumerate() {
        if !q.is_finite() || !field.frame().contains_with_slack(&q, T::lit(1e-9)) {
            return Err(Error::StageLeftFrame {
                stage: k + 1,
                x: q.x.as_f64(),
                y: q.y.as_f64(),
            });
        }
        q = field.apply(q)?;
    }
    Ok(q)
}

/// Maps the `(cells + 1)²` corner lattice of `frame` through the stack and
/// returns, per cell, the area of the mapped quadrilateral over the cell
/// area. An empty stack yields ones.
pub fn jacobian_grid<T: Scalar>(stack: &ProjectionStack<T>, frame: &Rect<T>, cells: usize) -> Result<JacobianGrid<T>> {
    if cells < 2 {
        return Err(Error::InvalidOption(format!("Jacobian grid needs at least 2 cells, got {cells}")));
    }
    let geom = GridGeometry::over(frame, cells, cells);
    let w = cells + 1;
    let mut corners = Vec::with_capacity(w * w);
    for j in 0..=cells {
        for i in 0..=cells {
            corners.push(compose_at(stack, geom.node(i, j))?);
        }
    }
    let cell_area = geom.cell_area();
    let mut data = Vec::with_capacity(cells * cells);
    for j in 0..cells {
        for i in 0..cells {
            let k = j * w + i;
            let area = quad_area([corners[k], corners[k + 1], corners[k + w + 1], corners[k + w]]);
            if !(area > T::zero()) {
                return Err(Error::Fold { i, j });
            }
            data.push(area / cell_area);
        }
    }
    Grid::from_vec(geom, data)
}

/// `ρ = ρ̄ · det J`, cellwise.
pub fn density_from_jacobian<T: Scalar>(jac: &JacobianGrid<T>, mean: T) -> Result<PycnoRaster<T>> {
    if !(mean > T::zero()) {
        return Err(Error::InvalidOption(format!("mean density must be positive, got {mean}")));
    }
    Ok(jac.map(|j| j * mean))
}

/// Signed relative mismatch `(∬_{U_i} ρ − P_i) / P_i` per region, in map
/// order. Regions with zero population report the absolute integral.
pub fn pycno_signed_errors<T: Scalar>(raster: &PycnoRaster<T>, map: &RegionMap<T>) -> Result<Vec<T>> {
    let labels = rasterize_labels_on(map, raster.geom);
    let masses = integrate_over_regions(raster, &labels)?;
    Ok(map
        .regions
        .iter()
        .zip(masses)
        .map(|(r, m)| {
            if r.population > T::zero() {
                (m - r.population) / r.population
            } else {
                m
            }
        })
        .collect())
}

/// `|∬_{U_i} ρ − P_i| / P_i` per region as `(id, error)` pairs.
pub fn pycno_check<T: Scalar>(raster: &PycnoRaster<T>, map: &RegionMap<T>) -> Result<Vec<(String, T)>> {
    let errs = pycno_signed_errors(raster, map)?;
    Ok(map.regions.iter().zip(errs).map(|(r, e)| (r.id.clone(), e.abs())).collect())
}

/// Re-expresses a raster given in frame coordinates in the input
/// coordinates of `affine`: positions are mapped back and densities are
/// rescaled so that integrals are unchanged.
pub fn to_input_coords<T: Scalar>(raster: &PycnoRaster<T>, affine: &Affine<T>) -> PycnoRaster<T> {
    let s = affine.scale;
    let g = raster.geom;
    let geom = GridGeometry::new(g.nx, g.ny, affine.inverse(g.origin), g.dx / s, g.dy / s);
    Grid {
        geom,
        data: raster.data.iter().map(|&v| v * s * s).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::flow::DisplacementField;

    fn frame(n: f64) -> Rect<f64> {
        Rect::new(Point::new(0.0, 0.0), Point::new(n, n))
    }

    fn stack_of(fields: Vec<DisplacementField<f64>>) -> ProjectionStack<f64> {
        ProjectionStack { fields, log: vec![] }
    }

    #[test]
    fn compose_examples() {
        let geom = GridGeometry::<f64>::unit(8);
        let p = Point::new(1.25, 2.5);
        assert_eq!(compose_at(&ProjectionStack::new(), p).unwrap(), p);
        assert_eq!(compose_at(&stack_of(vec![DisplacementField::identity(geom)]), p).unwrap(), p);

        let shift = |d: f64| DisplacementField::from_fn(geom, move |q| Point::new(q.x + d, q.y + 2.0 * d));
        let q = compose_at(&stack_of(vec![shift(0.5), shift(0.25)]), p).unwrap();
        assert!((q.x - 2.0).abs() < 1e-14 && (q.y - 4.0).abs() < 1e-14);

        let scale = |s: f64| DisplacementField::from_fn(geom, move |q| Point::new(q.x * s, q.y * s));
        let q = compose_at(&stack_of(vec![scale(2.0), scale(0.5)]), p).unwrap();
        assert!(q.distance(&p) < 1e-14);

        let far = Point::new(6.0, 6.0);
        let err = compose_at(&stack_of(vec![scale(2.0), scale(0.5)]), far).unwrap_err();
        assert!(matches!(err, Error::StageLeftFrame { stage: 2, .. }));
    }

    #[test]
    fn jacobian_examples() {
        let geom = GridGeometry::<f64>::unit(8);
        let id = jacobian_grid(&stack_of(vec![DisplacementField::identity(geom)]), &frame(8.0), 16).unwrap();
        assert!(id.data.iter().all(|&v| (v - 1.0).abs() < 1e-14));

        let scale = DisplacementField::from_fn(geom, |q| Point::new(q.x * 1.2, q.y * 1.2));
        let jac = jacobian_grid(&stack_of(vec![scale]), &frame(8.0), 16).unwrap();
        assert!(jac.data.iter().all(|&v| (v - 1.44).abs() < 1e-10));
        let raster = density_from_jacobian(&jac, 10.0).unwrap();
        assert!(raster.data.iter().all(|&v| (v - 14.4).abs() < 1e-9));

        let shear = DisplacementField::from_fn(geom, |q| Point::new(q.x + 0.3 * q.y, q.y));
        let jac = jacobian_grid(&stack_of(vec![shear]), &frame(8.0), 16).unwrap();
        assert!(jac.data.iter().all(|&v| (v - 1.0).abs() < 1e-10));

        let fold = DisplacementField::from_fn(geom, |q| Point::new(8.0 - q.x, q.y));
        assert!(matches!(
            jacobian_grid(&stack_of(vec![fold]), &frame(8.0), 4),
            Err(Error::Fold { .. })
        ));
    }

    #[test]
    fn unprojected_constant_raster_errors() {
        let map = fixtures::half_split::<f64>(3.0, 1.0);
        let jac = jacobian_grid(&ProjectionStack::new(), &map.frame, 64).unwrap();
        let raster = density_from_jacobian(&jac, 4.0).unwrap();
        assert!(raster.data.iter().all(|&v| v == 4.0));
        let errs = pycno_check(&raster, &map).unwrap();
        assert_eq!(errs[0].0, "L");
        assert!((errs[0].1 - 1.0 / 3.0).abs() < 1e-12);
        assert!((errs[1].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_identity_is_exact() {
        let map = fixtures::half_split::<f64>(2.0, 2.0);
        let raster = density_from_jacobian(&jacobian_grid(&ProjectionStack::new(), &map.frame, 64).unwrap(), 4.0).unwrap();
        assert!(pycno_check(&raster, &map).unwrap().iter().all(|(_, e)| *e < 1e-6));
    }

    #[test]
    fn input_coords_preserve_integrals() {
        let raster = Grid::from_fn(GridGeometry::<f64>::unit(8), |i, j| (i + j) as f64);
        let affine = Affine {
            scale: 4.0,
            offset: Point::new(1.0, -2.0),
        };
        let back = to_input_coords(&raster, &affine);
        assert!((back.total_mass() - raster.total_mass()).abs() < 1e-12);
        assert_eq!(back.geom.origin, Point::new(-0.25, 0.5));
    }
}
