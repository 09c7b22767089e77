use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid extent {rows}x{cols}: both dimensions must be non-zero")]
    InvalidExtent { rows: usize, cols: usize },

    #[error("invalid bounding box: {0}")]
    InvalidBox(String),

    #[error("invalid class probabilities: {0}")]
    InvalidProbs(String),

    #[error("invalid mask: {0}")]
    InvalidMask(String),

    #[error("class index {index} out of range for {classes} classes")]
    ClassMismatch { index: usize, classes: usize },

    #[error("invalid ground truth: {0}")]
    InvalidGroundTruth(String),

    #[error("cluster with {k} members is inconsistent with {passes} passes")]
    Consistency { k: usize, passes: usize },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("infeasible configuration: {0}")]
    InfeasibleConfig(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("frame alignment error: missing observations for {missing_obs:?}, missing ground truth for {missing_gt:?}")]
    Alignment {
        missing_obs: Vec<String>,
        missing_gt: Vec<String>,
    },

    #[error("parse error at `{path}` (line {line}, column {column}): {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{context}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}
