//! Region labelling on a cell grid, plateau and residual densities, and
//! per-region quadrature.

use log::warn;

use crate::driver::replenish_exterior;
use crate::error::{Error, Result};
use crate::geometry::{Point, RegionMap};
use crate::grid::{DensityGrid, Grid, GridGeometry, LabelGrid, EXTERIOR};
use crate::scalar::Scalar;

/// Labels the cells of an `cells × cells` grid over `map.frame`.
pub fn rasterize_labels<T: Scalar>(map: &RegionMap<T>, cells: usize) -> LabelGrid<T> {
    rasterize_labels_on(map, GridGeometry::over(&map.frame, cells, cells))
}

/// Scanline point-in-polygon labelling of cell centres with the even-odd
/// rule. A centre is inside when `x_enter ≤ x < x_exit` on its scanline;
/// edges are half-open in y. Where regions overlap the first one wins.
pub fn rasterize_labels_on<T: Scalar>(map: &RegionMap<T>, geom: GridGeometry<T>) -> LabelGrid<T> {
    let mut labels = vec![EXTERIOR; geom.len()];
    let mut overlaps = 0usize;
    let half = T::lit(0.5);
    let mut crossings: Vec<T> = Vec::new();

    for (r, region) in map.regions.iter().enumerate() {
        let edges: Vec<(Point<T>, Point<T>)> = region.rings().flat_map(|ring| ring.edges()).collect();
        if edges.is_empty() {
            continue;
        }
        let (ymin, ymax) = edges.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), (a, _)| {
            (lo.min(a.y), hi.max(a.y))
        });
        let row_of = |y: T| (y - geom.origin.y) / geom.dy - half;
        let j_lo = row_of(ymin).ceil().max(T::zero()).to_usize().unwrap_or(0);
        let j_hi = row_of(ymax).floor().to_isize().unwrap_or(-1);
        if j_hi < 0 {
            continue;
        }
        let j_hi = (j_hi as usize).min(geom.ny.saturating_sub(1));

        for j in j_lo..=j_hi {
            let y = geom.cell_center(0, j).y;
            crossings.clear();
            for (a, b) in &edges {
                if (a.y <= y) != (b.y <= y) {
                    crossings.push(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
                }
            }
            crossings.sort_by(|p, q| p.partial_cmp(q).expect("finite crossings"));
            for pair in crossings.chunks_exact(2) {
                let start = first_center_at_or_after(&geom, pair[0]);
                let end = first_center_at_or_after(&geom, pair[1]);
                for i in start..end {
                    let k = geom.index(i, j);
                    if labels[k] == EXTERIOR {
                        labels[k] = r as u32;
                    } else if labels[k] != r as u32 {
                        overlaps += 1;
                    }
                }
            }
        }
    }
    if overlaps > 0 {
        warn!("{overlaps} cells covered by more than one region; kept the first-declared region");
    }
    LabelGrid {
        geom,
        labels,
        regions: map.regions.len(),
    }
}

fn first_center_at_or_after<T: Scalar>(geom: &GridGeometry<T>, x: T) -> usize {
    let f = ((x - geom.origin.x) / geom.dx - T::lit(0.5)).ceil();
    if f <= T::zero() {
        0
    } else {
        f.to_usize().unwrap_or(geom.nx).min(geom.nx)
    }
}

/// Spatially averaged density `Σ P_i / Σ A_i`.
pub fn mean_density<T: Scalar>(map: &RegionMap<T>) -> Result<T> {
    let area = map.total_area();
    if !(area > T::zero()) {
        return Err(Error::ZeroArea);
    }
    Ok(map.total_population() / area)
}

/// Piecewise-constant density: `P_i / A_i` on cells labelled `i`, the mean
/// density everywhere else.
pub fn plateau_density<T: Scalar>(map: &RegionMap<T>, labels: &LabelGrid<T>) -> Result<DensityGrid<T>> {
    let mean = mean_density(map)?;
    let per_region: Vec<T> = map.regions.iter().map(|r| r.population / r.area).collect();
    let raw = Grid::from_vec(
        labels.geom,
        labels
            .labels
            .iter()
            .map(|&l| if l == EXTERIOR { T::zero() } else { per_region[l as usize] })
            .collect(),
    )?;
    replenish_exterior(&raw, labels, mean)
}

/// `density − mean · jacobian`, cellwise; a missing Jacobian means `det J ≡ 1`.
pub fn residual_density<T: Scalar>(density: &DensityGrid<T>, mean: T, jacobian: Option<&Grid<T>>) -> Result<DensityGrid<T>> {
    match jacobian {
        None => Ok(density.map(|v| v - mean)),
        Some(jac) => {
            if !jac.geom.same_shape(&density.geom) {
                return Err(Error::ShapeMismatch);
            }
            let data = density.data.iter().zip(&jac.data).map(|(&d, &j)| d - mean * j).collect();
            Grid::from_vec(density.geom, data)
        }
    }
}

/// Midpoint-rule integral of `density` over each labelled region.
pub fn integrate_over_regions<T: Scalar>(density: &DensityGrid<T>, labels: &LabelGrid<T>) -> Result<Vec<T>> {
    if !density.geom.same_shape(&labels.geom) {
        return Err(Error::ShapeMismatch);
    }
    let mut sums = vec![T::zero(); labels.regions];
    for (&l, &v) in labels.labels.iter().zip(&density.data) {
        if l != EXTERIOR {
            sums[l as usize] = sums[l as usize] + v;
        }
    }
    let area = density.geom.cell_area();
    Ok(sums.into_iter().map(|s| s * area).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn half_split_labels() {
        let map = fixtures::half_split::<f64>(3.0, 1.0);
        let labels = rasterize_labels(&map, 8);
        for j in 0..8 {
            for i in 0..8 {
                assert_eq!(labels.get(i, j), if i < 4 { 0 } else { 1 });
            }
        }
    }

    #[test]
    fn padded_frame_border_is_exterior() {
        let map = fixtures::fitted(&fixtures::half_split::<f64>(3.0, 1.0), 64);
        let labels = rasterize_labels(&map, 64);
        for k in 0..64 {
            assert_eq!(labels.get(k, 0), EXTERIOR);
            assert_eq!(labels.get(0, k), EXTERIOR);
            assert_eq!(labels.get(k, 63), EXTERIOR);
            assert_eq!(labels.get(63, k), EXTERIOR);
        }
        assert_eq!(labels.get(32, 32), 1);
    }

    #[test]
    fn hole_is_exterior() {
        let map = fixtures::square_with_hole::<f64>();
        let labels = rasterize_labels(&map, 8);
        assert_eq!(labels.get(0, 0), 0);
        assert_eq!(labels.get(3, 3), EXTERIOR);
        assert_eq!(labels.get(4, 4), EXTERIOR);
        assert_eq!(labels.cell_counts(), vec![48]);
    }

    #[test]
    fn mean_density_examples() {
        assert_eq!(mean_density(&fixtures::half_split::<f64>(3.0, 1.0)).unwrap(), 4.0);
        assert_eq!(mean_density(&fixtures::half_split::<f64>(2.0, 2.0)).unwrap(), 4.0);
        assert_eq!(mean_density(&fixtures::quadrants::<f64>([1.0, 2.0, 3.0, 4.0])).unwrap(), 10.0);
    }

    #[test]
    fn plateau_values() {
        let map = fixtures::half_split::<f64>(3.0, 1.0);
        let framed = fixtures::fitted(&map, 32);
        let labels = rasterize_labels(&framed, 32);
        let plateau = plateau_density(&framed, &labels).unwrap();
        let scale2 = (32.0f64 / 1.5).powi(2);
        for j in 0..32 {
            for i in 0..32 {
                let expected = match labels.region_of(i, j) {
                    Some(0) => 6.0,
                    Some(_) => 2.0,
                    None => 4.0,
                } / scale2;
                assert!((plateau.get(i, j) - expected).abs() < 1e-12 * expected);
            }
        }

        let quads = fixtures::quadrants::<f64>([1.0, 2.0, 3.0, 4.0]);
        let labels = rasterize_labels(&quads, 4);
        let plateau = plateau_density(&quads, &labels).unwrap();
        assert_eq!(plateau.get(0, 0), 4.0);
        assert_eq!(plateau.get(3, 0), 8.0);
        assert_eq!(plateau.get(0, 3), 12.0);
        assert_eq!(plateau.get(3, 3), 16.0);

        let uniform = fixtures::half_split::<f64>(2.0, 2.0);
        let labels = rasterize_labels(&uniform, 8);
        assert!(plateau_density(&uniform, &labels).unwrap().data.iter().all(|&v| v == 4.0));
    }

    #[test]
    fn residual_examples() {
        let map = fixtures::half_split::<f64>(3.0, 1.0);
        let labels = rasterize_labels(&map, 8);
        let plateau = plateau_density(&map, &labels).unwrap();
        let res = residual_density(&plateau, 4.0, None).unwrap();
        assert_eq!(res.get(0, 0), 2.0);
        assert_eq!(res.get(7, 0), -2.0);

        let jac = Grid::filled(plateau.geom, 1.5);
        let res = residual_density(&plateau, 4.0, Some(&jac)).unwrap();
        assert_eq!(res.get(0, 0), 0.0);
        assert_eq!(res.get(7, 0), -4.0);

        let uniform = fixtures::half_split::<f64>(2.0, 2.0);
        let labels = rasterize_labels(&uniform, 8);
        let res = residual_density(&plateau_density(&uniform, &labels).unwrap(), 4.0, None).unwrap();
        assert!(res.data.iter().all(|&v| v == 0.0));

        let exterior = fixtures::fitted(&map, 32);
        let labels = rasterize_labels(&exterior, 32);
        let mean = mean_density(&exterior).unwrap();
        let res = residual_density(&plateau_density(&exterior, &labels).unwrap(), mean, None).unwrap();
        assert_eq!(res.get(0, 0), 0.0);
    }

    #[test]
    fn integrate_examples() {
        let map = fixtures::fitted(&fixtures::half_split::<f64>(3.0, 1.0), 512);
        let labels = rasterize_labels(&map, 512);
        let plateau = plateau_density(&map, &labels).unwrap();
        let mass = integrate_over_regions(&plateau, &labels).unwrap();
        assert!((mass[0] - 3.0).abs() < 0.005 * 3.0);
        assert!((mass[1] - 1.0).abs() < 0.005);

        let uniform = fixtures::fitted(&fixtures::half_split::<f64>(2.0, 2.0), 512);
        let labels = rasterize_labels(&uniform, 512);
        let mass = integrate_over_regions(&plateau_density(&uniform, &labels).unwrap(), &labels).unwrap();
        assert!(mass.iter().all(|m| (m - 2.0).abs() < 0.01));

        let zero = Grid::filled(labels.geom, 0.0);
        assert_eq!(integrate_over_regions(&zero, &labels).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn plateau_mass_and_residual_balance() {
        for map in [
            fixtures::half_split::<f64>(3.0, 1.0),
            fixtures::quadrants([1.0, 2.0, 3.0, 4.0]),
        ] {
            let map = fixtures::fitted(&map, 512);
            let labels = rasterize_labels(&map, 512);
            let plateau = plateau_density(&map, &labels).unwrap();
            assert!(plateau.min() >= 0.0);
            let total: f64 = integrate_over_regions(&plateau, &labels).unwrap().iter().sum();
            let p = map.total_population();
            assert!((total - p).abs() < 0.01 * p);
            let res = residual_density(&plateau, mean_density(&map).unwrap(), None).unwrap();
            let balance: f64 = integrate_over_regions(&res, &labels).unwrap().iter().sum();
            assert!(balance.abs() < 0.01 * p);
        }
    }

    #[test]
    fn label_error_is_first_order() {
        // The diagonal of the unit triangle passes through one cell centre
        // per row, so the counted area is exactly (n - 1) / (2n).
        let tri = fixtures::unit_triangle::<f64>();
        let errs: Vec<f64> = [32, 64, 128]
            .iter()
            .map(|&n| {
                let labels = rasterize_labels(&tri, n);
                let plateau = plateau_density(&tri, &labels).unwrap();
                let m = integrate_over_regions(&plateau, &labels).unwrap()[0];
                (m - 1.0).abs()
            })
            .collect();
        assert!((errs[1] / errs[0] - 0.5).abs() < 0.05, "{errs:?}");
        assert!((errs[2] / errs[0] - 0.25).abs() < 0.05, "{errs:?}");
    }

    #[test]
    fn disc_error_shrinks_with_resolution() {
        let disc = fixtures::disc::<f64>(256);
        let err = |n: usize| {
            let labels = rasterize_labels(&disc, n);
            let plateau = plateau_density(&disc, &labels).unwrap();
            (integrate_over_regions(&plateau, &labels).unwrap()[0] - 1.0).abs()
        };
        let (e64, e512) = (err(64), err(512));
        assert!(e512 < e64, "{e64} {e512}");
        assert!(e512 < 4.0 / 512.0);
    }
}
