//! Density-equalizing cartograms by linear diffusion, and smooth
//! pycnophylactic densities read off their area distortion.
//!
//! The core is generic over [`Scalar`] (`f32` or `f64`); the `*64` and `*32`
//! aliases below fix the precision.

// `!(x > 0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod driver;
pub mod error;
pub mod fixtures;
pub mod flow;
pub mod geometry;
pub mod grid;
pub mod input;
pub mod output;
pub mod pipeline;
pub mod pycno;
pub mod rasterize;
pub mod scalar;
pub mod spectral;

pub use baseline::{ca_run, ca_step, roughness, CAState, CaOptions, CaOutcome};
pub use driver::{apply_displacement, area_error, run, CartogramOptions, CartogramResult, IterationLog, ProjectionStack};
pub use error::{Error, Result};
pub use flow::{integrate_flow, velocity_at, DisplacementField, FlowOptions, FlowOutcome, FlowState, VelocityField};
pub use geometry::{fit_frame, Affine, Point, Polygon, Rect, Region, RegionMap, Ring};
pub use grid::{DensityGrid, Grid, GridGeometry, LabelGrid, EXTERIOR};
pub use input::{load_regions, LoadOptions, ValueTable};
pub use pipeline::{Method, PycnoOptions};
pub use pycno::{compose_at, density_from_jacobian, jacobian_grid, pycno_check, JacobianGrid, PycnoRaster};
pub use rasterize::{mean_density, plateau_density, rasterize_labels, residual_density};
pub use scalar::Scalar;
pub use spectral::{diffuse, gaussian_blur, SpectralField};

pub type Point64 = Point<f64>;
pub type Point32 = Point<f32>;
pub type RegionMap64 = RegionMap<f64>;
pub type RegionMap32 = RegionMap<f32>;
pub type Grid64 = Grid<f64>;
pub type Grid32 = Grid<f32>;
pub type DisplacementField64 = DisplacementField<f64>;
pub type DisplacementField32 = DisplacementField<f32>;
pub type CartogramOptions64 = CartogramOptions<f64>;
pub type CartogramOptions32 = CartogramOptions<f32>;
pub type CartogramResult64 = CartogramResult<f64>;
pub type CartogramResult32 = CartogramResult<f32>;
