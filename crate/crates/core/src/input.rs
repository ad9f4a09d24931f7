//! GeoJSON and CSV ingestion.

use std::collections::{HashMap, HashSet};
use std::io::Read;

use geojson::{feature::Id, FeatureCollection, GeoJson, JsonValue, PolygonType, Value};

use crate::error::{Error, Result};
use crate::geometry::{Point, Polygon, Region, RegionMap, Ring};
use crate::scalar::Scalar;

/// Raw `id → value` pairs, kept as text so that malformed numbers can be
/// reported against their id.
#[derive(Debug, Clone, Default)]
pub struct ValueTable {
    entries: Vec<(String, String)>,
}

impl ValueTable {
    pub fn from_pairs<I, K, V>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: ToString,
    {
        let mut seen = HashSet::new();
        let mut entries = Vec::new();
        for (k, v) in pairs {
            let k = k.into();
            if !seen.insert(k.clone()) {
                return Err(Error::DuplicateId(k));
            }
            entries.push((k, v.to_string()));
        }
        Ok(Self { entries })
    }

    /// Reads a UTF-8 CSV with header `id,value`.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
        let (id_col, value_col) = match (col("id"), col("value")) {
            (Some(i), Some(v)) => (i, v),
            _ => return Err(Error::InvalidOption("values file needs an `id,value` header".into())),
        };
        let mut pairs = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let id = record.get(id_col).unwrap_or_default().to_string();
            let value = record.get(value_col).unwrap_or_default().to_string();
            pairs.push((id, value));
        }
        Self::from_pairs(pairs)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Where feature ids and populations are read from.
#[derive(Debug, Clone)]
pub struct LoadOptions {
    /// Property holding the id; the feature-level `id` member is the fallback.
    pub id_property: String,
    /// Property holding the population when no value table is supplied.
    pub population_property: String,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            id_property: "id".into(),
            population_property: "population".into(),
        }
    }
}

fn parse_value<T: Scalar>(id: &str, raw: &str) -> Result<T> {
    let v: f64 = raw.trim().parse().map_err(|_| Error::NonNumericValue {
        id: id.to_string(),
        value: raw.to_string(),
    })?;
    if !v.is_finite() {
        return Err(Error::NonNumericValue {
            id: id.to_string(),
            value: raw.to_string(),
        });
    }
    if v < 0.0 {
        return Err(Error::NegativePopulation(id.to_string()));
    }
    Ok(T::lit(v))
}

fn json_to_text(v: &JsonValue) -> Option<String> {
    match v {
        JsonValue::String(s) => Some(s.clone()),
        JsonValue::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn ring_from<T: Scalar>(id: &str, positions: &[Vec<f64>]) -> Result<Ring<T>> {
    let mut pts = Vec::with_capacity(positions.len());
    for p in positions {
        if p.len() < 2 || !p[0].is_finite() || !p[1].is_finite() {
            return Err(Error::GeoJson(format!("bad coordinate in {id}")));
        }
        pts.push(Point::new(T::lit(p[0]), T::lit(p[1])));
    }
    Ok(Ring::new(pts))
}

fn polygon_from<T: Scalar>(id: &str, rings: &PolygonType) -> Result<Polygon<T>> {
    let mut it = rings.iter();
    let exterior = it.next().ok_or_else(|| Error::DegenerateRing(id.to_string()))?;
    let exterior = ring_from(id, exterior)?;
    let holes = it.map(|r| ring_from(id, r)).collect::<Result<Vec<_>>>()?;
    Ok(Polygon::new(exterior, holes))
}

/// Parses a GeoJSON FeatureCollection of Polygon/MultiPolygon features into
/// a [`RegionMap`]. Populations come from `values` when given, otherwise from
/// the `population_property` of each feature.
pub fn load_regions<T: Scalar>(geojson: &[u8], values: Option<&ValueTable>, opts: &LoadOptions) -> Result<RegionMap<T>> {
    let text = std::str::from_utf8(geojson).map_err(|e| Error::GeoJson(e.to_string()))?;
    let parsed: GeoJson = text.parse().map_err(|e: geojson::Error| Error::GeoJson(e.to_string()))?;
    let collection = FeatureCollection::try_from(parsed).map_err(|e| Error::GeoJson(e.to_string()))?;

    let table: Option<HashMap<&str, &str>> =
        values.map(|t| t.entries.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect());

    let mut regions = Vec::with_capacity(collection.features.len());
    let mut seen = HashSet::new();
    for (index, feature) in collection.features.iter().enumerate() {
        let id = feature
            .properties
            .as_ref()
            .and_then(|p| p.get(&opts.id_property))
            .and_then(json_to_text)
            .or_else(|| match &feature.id {
                Some(Id::String(s)) => Some(s.clone()),
                Some(Id::Number(n)) => Some(n.to_string()),
                None => None,
            })
            .ok_or(Error::MissingId(index))?;
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }

        let population: T = match &table {
            Some(t) => {
                let raw = t.get(id.as_str()).ok_or_else(|| Error::MissingValue(id.clone()))?;
                parse_value(&id, raw)?
            }
            None => {
                let raw = feature
                    .properties
                    .as_ref()
                    .and_then(|p| p.get(&opts.population_property))
                    .ok_or_else(|| Error::MissingValue(id.clone()))?;
                let text = json_to_text(raw).ok_or_else(|| Error::NonNumericValue {
                    id: id.clone(),
                    value: raw.to_string(),
                })?;
                parse_value(&id, &text)?
            }
        };

        let geometry = feature.geometry.as_ref().ok_or_else(|| Error::UnsupportedGeometry(id.clone()))?;
        let polygons = match &geometry.value {
            Value::Polygon(rings) => vec![polygon_from(&id, rings)?],
            Value::MultiPolygon(polys) => polys.iter().map(|p| polygon_from(&id, p)).collect::<Result<_>>()?,
            _ => return Err(Error::UnsupportedGeometry(id)),
        };
        regions.push(Region::new(id, polygons, population)?);
    }

    if let Some(t) = values {
        if let Some((k, _)) = t.entries.iter().find(|(k, _)| !seen.contains(k)) {
            return Err(Error::UnknownValueId(k.clone()));
        }
    }
    RegionMap::new(regions)
}
