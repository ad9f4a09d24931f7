//! Planar polygon geometry: regions, areas and the computational frame.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn cast<U: Scalar>(self) -> Point<U> {
        Point::new(U::lit(self.x.as_f64()), U::lit(self.y.as_f64()))
    }
}

/// Closed polyline. The closing vertex is implicit: `vertices[0]` is not
/// repeated at the end.
#[derive(Debug, Clone, PartialEq)]
pub struct Ring<T> {
    pub vertices: Vec<Point<T>>,
}

impl<T: Scalar> Ring<T> {
    /// Builds a ring, dropping an explicit closing vertex if present.
    pub fn new(mut vertices: Vec<Point<T>>) -> Self {
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        Self { vertices }
    }

    /// Shoelace signed area; positive for counter-clockwise rings.
    pub fn signed_area(&self) -> T {
        let n = self.vertices.len();
        if n < 3 {
            return T::zero();
        }
        let mut acc = T::zero();
        for k in 0..n {
            let a = self.vertices[k];
            let b = self.vertices[(k + 1) % n];
            acc = acc + (a.x * b.y - b.x * a.y);
        }
        acc * T::lit(0.5)
    }

    pub fn area(&self) -> T {
        self.signed_area().abs()
    }

    /// Iterates the ring's edges, including the closing one.
    pub fn edges(&self) -> impl Iterator<Item = (Point<T>, Point<T>)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |k| (self.vertices[k], self.vertices[(k + 1) % n]))
    }

    fn distinct_vertices(&self) -> usize {
        let mut v: Vec<(u64, u64)> = self
            .vertices
            .iter()
            .map(|p| (p.x.as_f64().to_bits(), p.y.as_f64().to_bits()))
            .collect();
        v.sort_unstable();
        v.dedup();
        v.len()
    }
}

/// One exterior ring and the holes cut out of it.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon<T> {
    pub exterior: Ring<T>,
    pub holes: Vec<Ring<T>>,
}

impl<T: Scalar> Polygon<T> {
    pub fn new(exterior: Ring<T>, holes: Vec<Ring<T>>) -> Self {
        Self { exterior, holes }
    }

    pub fn rings(&self) -> impl Iterator<Item = &Ring<T>> {
        std::iter::once(&self.exterior).chain(self.holes.iter())
    }

    fn rings_mut(&mut self) -> impl Iterator<Item = &mut Ring<T>> {
        std::iter::once(&mut self.exterior).chain(self.holes.iter_mut())
    }
}

/// An enumeration unit: one or more polygons sharing one population.
#[derive(Debug, Clone, PartialEq)]
pub struct Region<T> {
    pub id: String,
    pub polygons: Vec<Polygon<T>>,
    pub population: T,
    pub area: T,
}

impl<T: Scalar> Region<T> {
    /// Builds a region and computes its area. Fails on degenerate rings or
    /// a negative population.
    pub fn new(id: impl Into<String>, polygons: Vec<Polygon<T>>, population: T) -> Result<Self> {
        let id = id.into();
        if population < T::zero() || population.is_nan() {
            return Err(Error::NegativePopulation(id));
        }
        let mut region = Self {
            id,
            polygons,
            population,
            area: T::zero(),
        };
        region.area = region_area(&region)?;
        Ok(region)
    }

    pub fn rings(&self) -> impl Iterator<Item = &Ring<T>> {
        self.polygons.iter().flat_map(|p| p.rings())
    }

    pub fn vertices(&self) -> impl Iterator<Item = &Point<T>> {
        self.rings().flat_map(|r| r.vertices.iter())
    }

    pub fn vertices_mut(&mut self) -> impl Iterator<Item = &mut Point<T>> {
        self.polygons
            .iter_mut()
            .flat_map(|p| p.rings_mut())
            .flat_map(|r| r.vertices.iter_mut())
    }

    /// Recomputes `area` from the current vertices without validating.
    pub fn refresh_area(&mut self) {
        self.area = polygons_area(&self.polygons);
    }
}

fn polygons_area<T: Scalar>(polygons: &[Polygon<T>]) -> T {
    polygons.iter().fold(T::zero(), |acc, p| {
        let holes = p.holes.iter().fold(T::zero(), |h, r| h + r.area());
        acc + p.exterior.area() - holes
    })
}

/// Area of a region: exterior rings minus holes, independent of ring
/// orientation.
pub fn region_area<T: Scalar>(region: &Region<T>) -> Result<T> {
    for ring in region.rings() {
        if ring.distinct_vertices() < 3 || ring.area() <= T::zero() || !ring.area().is_finite() {
            return Err(Error::DegenerateRing(region.id.clone()));
        }
    }
    let area = polygons_area(&region.polygons);
    if area <= T::zero() {
        return Err(Error::DegenerateRing(region.id.clone()));
    }
    Ok(area)
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect<T> {
    pub min: Point<T>,
    pub max: Point<T>,
}

impl<T: Scalar> Rect<T> {
    pub fn new(min: Point<T>, max: Point<T>) -> Self {
        Self { min, max }
    }

    pub fn width(&self) -> T {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> T {
        self.max.y - self.min.y
    }

    pub fn area(&self) -> T {
        self.width() * self.height()
    }

    pub fn contains(&self, p: &Point<T>) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    /// Containment with a tolerance given as a fraction of the larger side.
    pub fn contains_with_slack(&self, p: &Point<T>, rel: T) -> bool {
        let slack = self.width().max(self.height()) * rel;
        p.x >= self.min.x - slack
            && p.x <= self.max.x + slack
            && p.y >= self.min.y - slack
            && p.y <= self.max.y + slack
    }

    fn bounding<'a>(points: impl Iterator<Item = &'a Point<T>>) -> Option<Self> {
        let mut it = points.peekable();
        let first = **it.peek()?;
        let mut rect = Rect::new(first, first);
        for p in it {
            rect.min.x = rect.min.x.min(p.x);
            rect.min.y = rect.min.y.min(p.y);
            rect.max.x = rect.max.x.max(p.x);
            rect.max.y = rect.max.y.max(p.y);
        }
        Some(rect)
    }
}

/// Polygonal enumeration units inside a rectangular computational frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMap<T> {
    pub regions: Vec<Region<T>>,
    pub frame: Rect<T>,
}

impl<T: Scalar> RegionMap<T> {
    /// Builds a map whose frame is the bounding box of the regions.
    pub fn new(regions: Vec<Region<T>>) -> Result<Self> {
        let frame = Rect::bounding(regions.iter().flat_map(|r| r.vertices())).ok_or(Error::EmptyMap)?;
        Ok(Self { regions, frame })
    }

    pub fn with_frame(regions: Vec<Region<T>>, frame: Rect<T>) -> Self {
        Self { regions, frame }
    }

    pub fn bounding_box(&self) -> Option<Rect<T>> {
        Rect::bounding(self.regions.iter().flat_map(|r| r.vertices()))
    }

    pub fn total_population(&self) -> T {
        self.regions.iter().fold(T::zero(), |a, r| a + r.population)
    }

    pub fn total_area(&self) -> T {
        self.regions.iter().fold(T::zero(), |a, r| a + r.area)
    }

    pub fn populations(&self) -> Vec<T> {
        self.regions.iter().map(|r| r.population).collect()
    }

    pub fn areas(&self) -> Vec<T> {
        self.regions.iter().map(|r| r.area).collect()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.regions.iter().position(|r| r.id == id)
    }

    /// Applies `f` to every vertex and recomputes region areas.
    pub fn map_vertices(&self, mut f: impl FnMut(Point<T>) -> Point<T>) -> Self {
        let mut out = self.clone();
        for region in &mut out.regions {
            for v in region.vertices_mut() {
                *v = f(*v);
            }
            region.refresh_area();
        }
        out
    }

    /// Fallible variant of [`RegionMap::map_vertices`].
    pub fn try_map_vertices(&self, mut f: impl FnMut(Point<T>) -> Result<Point<T>>) -> Result<Self> {
        let mut out = self.clone();
        for region in &mut out.regions {
            for v in region.vertices_mut() {
                *v = f(*v)?;
            }
            region.refresh_area();
        }
        Ok(out)
    }

    /// Inserts vertices so that no edge is longer than `max_len`.
    ///
    /// New points are generated from the lexicographically smaller endpoint,
    /// so an edge shared by two regions gets bitwise identical points no
    /// matter which direction each ring traverses it.
    pub fn densified(&self, max_len: T) -> Self {
        let mut out = self.clone();
        for region in &mut out.regions {
            for poly in &mut region.polygons {
                for ring in poly.rings_mut() {
                    *ring = densify_ring(ring, max_len);
                }
            }
            region.refresh_area();
        }
        out
    }
}

fn densify_ring<T: Scalar>(ring: &Ring<T>, max_len: T) -> Ring<T> {
    let mut out = Vec::with_capacity(ring.vertices.len());
    for (a, b) in ring.edges() {
        out.push(a);
        let len = a.distance(&b);
        if !(len > max_len) {
            continue;
        }
        let pieces = (len / max_len).ceil().to_usize().unwrap_or(1).max(1);
        let forward = (a.x, a.y) <= (b.x, b.y);
        let (p, q) = if forward { (a, b) } else { (b, a) };
        let n = T::from_count(pieces);
        let interior: Vec<Point<T>> = (1..pieces)
            .map(|k| {
                let s = T::from_count(k) / n;
                Point::new(p.x + (q.x - p.x) * s, p.y + (q.y - p.y) * s)
            })
            .collect();
        if forward {
            out.extend(interior);
        } else {
            out.extend(interior.into_iter().rev());
        }
    }
    Ring { vertices: out }
}

/// Uniform scale plus translation: `forward(p) = scale * p + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine<T> {
    pub scale: T,
    pub offset: Point<T>,
}

impl<T: Scalar> Affine<T> {
    pub fn identity() -> Self {
        Self {
            scale: T::one(),
            offset: Point::new(T::zero(), T::zero()),
        }
    }

    pub fn forward(&self, p: Point<T>) -> Point<T> {
        Point::new(self.scale * p.x + self.offset.x, self.scale * p.y + self.offset.y)
    }

    pub fn inverse(&self, q: Point<T>) -> Point<T> {
        Point::new((q.x - self.offset.x) / self.scale, (q.y - self.offset.y) / self.scale)
    }
}

/// Rescales `map` into the square frame `[0, grid_size]²` (one unit per
/// grid cell), centred, with the longer side of its bounding box spanning
/// `grid_size / padding` units.
pub fn fit_frame<T: Scalar>(map: &RegionMap<T>, grid_size: usize, padding: T) -> Result<(RegionMap<T>, Affine<T>)> {
    if grid_size < 2 || !grid_size.is_power_of_two() {
        return Err(Error::GridSize(grid_size));
    }
    if !(padding >= T::one()) {
        return Err(Error::InvalidOption(format!("padding must be >= 1, got {padding}")));
    }
    let bbox = map.bounding_box().ok_or(Error::EmptyMap)?;
    let extent = bbox.width().max(bbox.height());
    if !(extent > T::zero()) {
        return Err(Error::EmptyMap);
    }
    let size = T::from_count(grid_size);
    let half = T::lit(0.5);
    let scale = size / padding / extent;
    let centre = Point::new((bbox.min.x + bbox.max.x) * half, (bbox.min.y + bbox.max.y) * half);
    let affine = Affine {
        scale,
        offset: Point::new(size * half - scale * centre.x, size * half - scale * centre.y),
    };
    let mut fitted = map.map_vertices(|p| affine.forward(p));
    fitted.frame = Rect::new(Point::new(T::zero(), T::zero()), Point::new(size, size));
    Ok((fitted, affine))
}
