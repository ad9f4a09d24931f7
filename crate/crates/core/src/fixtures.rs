//! Small synthetic maps used by the test suites and the README examples.

use crate::geometry::{fit_frame, Point, Polygon, Region, RegionMap, Ring};
use crate::scalar::Scalar;

fn rect<T: Scalar>(x0: f64, y0: f64, x1: f64, y1: f64) -> Ring<T> {
    Ring::new(
        [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
            .iter()
            .map(|&(x, y)| Point::new(T::lit(x), T::lit(y)))
            .collect(),
    )
}

fn region<T: Scalar>(id: &str, ring: Ring<T>, population: f64) -> Region<T> {
    Region::new(id, vec![Polygon::new(ring, vec![])], T::lit(population)).expect("valid fixture")
}

/// Unit square split at `x = 0.5` into regions `L` and `R`.
pub fn half_split<T: Scalar>(left: f64, right: f64) -> RegionMap<T> {
    RegionMap::new(vec![
        region("L", rect(0.0, 0.0, 0.5, 1.0), left),
        region("R", rect(0.5, 0.0, 1.0, 1.0), right),
    ])
    .expect("non-empty")
}

/// Unit square cut into quadrants `SW`, `SE`, `NW`, `NE` (in that order).
pub fn quadrants<T: Scalar>(populations: [f64; 4]) -> RegionMap<T> {
    RegionMap::new(vec![
        region("SW", rect(0.0, 0.0, 0.5, 0.5), populations[0]),
        region("SE", rect(0.5, 0.0, 1.0, 0.5), populations[1]),
        region("NW", rect(0.0, 0.5, 0.5, 1.0), populations[2]),
        region("NE", rect(0.5, 0.5, 1.0, 1.0), populations[3]),
    ])
    .expect("non-empty")
}

/// Unit square with a centred `0.5 × 0.5` hole, population 1.
pub fn square_with_hole<T: Scalar>() -> RegionMap<T> {
    let r = Region::new(
        "A",
        vec![Polygon::new(rect(0.0, 0.0, 1.0, 1.0), vec![rect(0.25, 0.25, 0.75, 0.75)])],
        T::one(),
    )
    .expect("valid fixture");
    RegionMap::new(vec![r]).expect("non-empty")
}

/// Triangle `(0,0), (1,0), (0,1)` with population 1, framed by the unit square.
pub fn unit_triangle<T: Scalar>() -> RegionMap<T> {
    let ring = Ring::new(vec![
        Point::new(T::zero(), T::zero()),
        Point::new(T::one(), T::zero()),
        Point::new(T::zero(), T::one()),
    ]);
    let mut map = RegionMap::new(vec![region("T", ring, 1.0)]).expect("non-empty");
    map.frame.max = Point::new(T::one(), T::one());
    map
}

/// Regular `sides`-gon approximating a disc of radius 0.4 centred in the
/// unit square, population 1.
pub fn disc<T: Scalar>(sides: usize) -> RegionMap<T> {
    let ring = Ring::new(
        (0..sides)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / sides as f64;
                Point::new(T::lit(0.5 + 0.4 * a.cos()), T::lit(0.5 + 0.4 * a.sin()))
            })
            .collect(),
    );
    let mut map = RegionMap::new(vec![region("D", ring, 1.0)]).expect("non-empty");
    map.frame.min = Point::new(T::zero(), T::zero());
    map.frame.max = Point::new(T::one(), T::one());
    map
}

/// `map` rescaled into a padded `cells × cells` frame (padding 1.5).
pub fn fitted<T: Scalar>(map: &RegionMap<T>, cells: usize) -> RegionMap<T> {
    fit_frame(map, cells, T::lit(1.5)).expect("fixture fits").0
}
