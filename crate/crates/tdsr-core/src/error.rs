use thiserror::Error;

/// Errors produced by the core pipeline.
#[derive(Error, Debug)]
pub enum Error {
    #[error("degenerate box [{xmin}, {ymin}, {xmax}, {ymax}]: extents must be positive and finite")]
    DegenerateBox {
        xmin: f64,
        ymin: f64,
        xmax: f64,
        ymax: f64,
    },

    #[error("label {label} outside 1..={num_classes}")]
    InvalidLabel { label: usize, num_classes: usize },

    #[error("{context}: shape mismatch, expected {expected} got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("image {height}x{width} not divisible by factor {factor}")]
    NotDivisible {
        height: usize,
        width: usize,
        factor: usize,
    },

    #[error("image {height}x{width} smaller than {min}")]
    ImageTooSmall {
        height: usize,
        width: usize,
        min: usize,
    },

    #[error("unsupported scale factor {0} (expected 2, 4 or 8)")]
    UnsupportedScaleFactor(usize),

    #[error("invalid schedule segment `{segment}`: {reason}")]
    ScheduleParse { segment: String, reason: String },

    #[error("iteration {iteration} outside schedule of {total} iterations")]
    IterationOutOfRange { iteration: u64, total: u64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dataset record {line}: {reason}")]
    DatasetRecord { line: usize, reason: String },

    #[error("checkpoint format: {0}")]
    CheckpointFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
