//! Ingest and preprocessing of station and grid-cell temperature series.

pub mod geo;
pub mod geohash;
pub mod impute;
pub mod samples;
pub mod series;

/// File names shared by the generator, the preprocessing store and the experiments.
pub mod files {
    pub const IOT_CSV: &str = "iot.csv";
    pub const IOT_TRUTH_CSV: &str = "iot_truth.csv";
    pub const STATIONS_CSV: &str = "stations.csv";
    pub const STATIONS_TRUTH_CSV: &str = "stations_truth.csv";
    pub const GRID_CSV: &str = "grid.csv";
    pub const SCENARIO_FILE: &str = "scenario.cfg";
    pub const TEST_WINDOWS_CSV: &str = "test_windows.csv";
}

pub use geo::haversine_m;
pub use geohash::GridCell;
pub use impute::{
    filter_by_missing_ratio, interpolate_dataset, interpolate_linear, missing_ratio,
    nearest_k_average, preprocess, spatial_average, Preprocessed, PreprocessOptions,
};
pub use samples::{
    exclude_overlapping, fit_norm_stats, make_windows, read_samples_csv, select_test_days, select_test_windows,
    split_train_val, test_windows_for_days, write_samples_csv, NormStats, Sample, TestWindow,
};
pub use series::{format_timestamp, parse_timestamp, Dataset, GridIndex, TimeSeries, TIMESTAMP_FORMAT};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("geohash error: {0}")]
    Geohash(String),
    #[error("line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("line {line}: timestamp for station `{station}` is not after the previous row")]
    NonMonotone { station: String, line: u64 },
    #[error("series `{0}` has no observed values")]
    AllMissing(String),
    #[error("nearest-{needed} average for `{target}`: only {available} candidate series cover its span")]
    NotEnoughNeighbors {
        target: String,
        needed: usize,
        available: usize,
    },
    #[error("zero variance in training data")]
    ZeroVariance,
    #[error("no samples to fit normalization statistics")]
    NoSamples,
    #[error("insufficient coverage: {needed} test days requested, {available} available")]
    InsufficientCoverage { needed: usize, available: usize },
    #[error("unknown station `{0}`")]
    UnknownStation(String),
    #[error("empty dataset: {0}")]
    Empty(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
