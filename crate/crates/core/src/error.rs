use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("latitude {0} outside [-90, 90]")]
    Latitude(f64),
    #[error("longitude {0} outside [-180, 180]")]
    Longitude(f64),
    #[error("region north edge {north} is below its south edge {south}")]
    RegionLatitudeOrder { north: f64, south: f64 },
    #[error("region west edge {west} is east of its east edge {east} (antimeridian wrap is not supported)")]
    RegionLongitudeOrder { west: f64, east: f64 },
    #[error("context property {field} has invalid value {value}")]
    Context { field: &'static str, value: f64 },
    #[error("measurement {field} has invalid value {value}")]
    Measurement { field: &'static str, value: f64 },
    #[error("sensor {0} has an empty source url")]
    EmptySourceUrl(u64),
}

#[derive(Debug, Error)]
pub enum RepositoryError {
    #[error("repository unreachable: {0}")]
    Unreachable(String),
    #[error("no fixture covers the requested region")]
    NoFixtureForRegion,
    #[error("malformed media type: {0}")]
    MalformedMediaType(String),
    #[error("unparseable payload: {0}")]
    UnparseablePayload(String),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("unknown repository source `{0}`")]
    UnknownSource(String),
    #[error("fixture io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopsisError {
    #[error("decision matrix needs at least one option")]
    NoOptions,
    #[error("decision matrix needs at least one criterion")]
    NoCriteria,
    #[error("expected {expected} values, got {actual}")]
    Shape { expected: usize, actual: usize },
    #[error("non-finite value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },
    #[error("duplicate criterion `{0}`")]
    DuplicateCriterion(String),
    #[error("expected {expected} weights, got {actual}")]
    Weights { expected: usize, actual: usize },
    #[error("malformed criterion header `{0}` (expected name:max or name:min)")]
    Header(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelectError {
    #[error("no sensors to select from")]
    EmptySensorList,
    #[error("unknown criterion `{0}`")]
    UnknownCriterion(String),
    #[error("k must be at least 1")]
    ZeroCount,
    #[error(transparent)]
    Topsis(#[from] TopsisError),
}

#[derive(Debug, Error)]
pub enum MarshalError {
    #[error("invalid measurement type `{0}` (expected temperature, humidity or pressure)")]
    InvalidMeasurementType(String),
    #[error("history must be at least one hour")]
    ZeroHistory,
    #[error("no sensors to marshal")]
    EmptyBatch,
    #[error("invalid sensor {id}: {source}")]
    InvalidSensor { id: u64, source: ModelError },
    #[error("descriptor is not well-formed xml: {0}")]
    Xml(String),
    #[error("descriptor structure mismatch: {0}")]
    Structure(String),
    #[error("artifact store: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("no files to archive")]
    EmptyFileList,
    #[error("archive entry `{0}` is not a plain file name")]
    UnsafeEntry(String),
    #[error("archive io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("no readings to rank")]
    EmptyReadings,
    #[error("duplicate city `{0}`")]
    DuplicateCity(String),
    #[error("invalid reading for {city}: {reason}")]
    InvalidReading { city: String, reason: String },
    #[error("unknown disease `{0}`")]
    UnknownDisease(String),
    #[error(transparent)]
    Topsis(#[from] TopsisError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
