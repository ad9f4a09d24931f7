use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid GeoJSON: {0}")]
    GeoJson(String),
    #[error("feature #{0} has no id")]
    MissingId(usize),
    #[error("duplicate id {0}")]
    DuplicateId(String),
    #[error("id {0} in values table has no geometry")]
    UnknownValueId(String),
    #[error("no value for id {0}")]
    MissingValue(String),
    #[error("negative population for {0}")]
    NegativePopulation(String),
    #[error("non-numeric value for {id}: {value:?}")]
    NonNumericValue { id: String, value: String },
    #[error("unsupported geometry for {0}: only Polygon and MultiPolygon are accepted")]
    UnsupportedGeometry(String),
    #[error("degenerate ring (zero area) in region {0}")]
    DegenerateRing(String),
    #[error("map is empty")]
    EmptyMap,
    #[error("grid size {0} must be a power of two")]
    GridSize(usize),
    #[error("invalid option: {0}")]
    InvalidOption(String),
    #[error("total region area is zero")]
    ZeroArea,
    #[error("grid shapes do not match")]
    ShapeMismatch,
    #[error("nonpositive density {density} at ({x}, {y}); blur width too small for this residual")]
    NonPositiveDensity { density: f64, x: f64, y: f64 },
    #[error("time step underflow at tau = {tau} (step {step})")]
    StepUnderflow { tau: f64, step: f64 },
    #[error("flow did not equilibrate within {0} steps")]
    TooManySteps(usize),
    #[error("cell ({i}, {j}) of the displacement field flipped orientation")]
    OrientationFlip { i: usize, j: usize },
    #[error("point ({x}, {y}) lies outside the frame")]
    OutsideFrame { x: f64, y: f64 },
    #[error("projection stage {stage} received ({x}, {y}), which lies outside the frame")]
    StageLeftFrame { stage: usize, x: f64, y: f64 },
    #[error("mapped cell ({i}, {j}) has nonpositive area (fold)")]
    Fold { i: usize, j: usize },
    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("mass of region {0} cannot be restored")]
    MassRestoration(usize),
    #[error("malformed ASCII grid: {0}")]
    AsciiGrid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
