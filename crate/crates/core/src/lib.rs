//! Sensor discovery, ranking and descriptor generation.
//!
//! The pipeline stages live in separate modules:
//!
//! * [`model`]: repository-neutral sensor types and regions
//! * [`repository`]: fixture, synthetic and (optionally) live sensor sources
//! * [`topsis`] and [`selector`]: multi-criteria ranking of candidates
//! * [`marshal`]: GSN virtual-sensor XML descriptors and the artifact store
//! * [`archive`]: reproducible `.tar.gz` bundles
//! * [`analysis`]: weather suitability rankings per rheumatic disease

pub mod analysis;
pub mod archive;
pub mod error;
pub mod marshal;
pub mod model;
pub mod repository;
pub mod scalar;
pub mod selector;
pub mod topsis;

pub use error::{
    AnalysisError, ArchiveError, MarshalError, ModelError, RepositoryError, SelectError,
    TopsisError,
};
pub use model::{region_contains, ContextVector, GenericSensor, GeoPoint, Measurements, Region};
pub use scalar::Scalar;

/// Double-precision decision matrix.
pub type DecisionMatrixF64 = topsis::DecisionMatrix<f64>;
/// Single-precision decision matrix.
pub type DecisionMatrixF32 = topsis::DecisionMatrix<f32>;
pub type TopsisResultF64 = topsis::TopsisResult<f64>;
pub type TopsisResultF32 = topsis::TopsisResult<f32>;
