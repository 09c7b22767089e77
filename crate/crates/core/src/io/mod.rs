//! JSON/TOML file formats and helpers.

mod dataset;
mod observations;
mod report;
pub mod rle;

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub use dataset::{DatasetFile, DetectionRecord, FrameRecord, GroundTruthRecord, MaskRecord};
pub use observations::{FrameObservationsRecord, ObservationRecord, ObservationsFile, UncertaintyRecord};
pub use report::{curve_csv, ClassMetrics, ConfigEcho, Counts, MetricsReport, SemanticMetrics, SpatialMetrics};

pub const FORMAT_VERSION: u32 = 1;

/// Round to nine significant digits.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().expect("formatted float parses")
}

pub(crate) fn round_all(values: &[f64]) -> Vec<f64> {
    values.iter().map(|&v| round_sig(v)).collect()
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

/// Parse JSON, reporting the field path and position of the first error.
pub fn from_json_str<T: DeserializeOwned>(text: &str) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| Error::Parse {
        path: e.path().to_string(),
        line: e.inner().line(),
        column: e.inner().column(),
        message: e.inner().to_string(),
    })
}

pub fn from_toml_str<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = toml::Deserializer::parse(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        Error::Parse {
            path: ".".into(),
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let (line, column) = e.inner().span().map_or((0, 0), |s| line_col(text, s.start));
        Error::Parse {
            path: e.path().to_string(),
            line,
            column,
            message: e.inner().message().to_string(),
        }
    })
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        context: format!("reading {}", path.display()),
        source,
    })
}

/// Writes `text`, creating missing parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let io_err = |source| Error::Io {
        context: format!("writing {}", path.display()),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err)?;
    }
    fs::write(path, text).map_err(io_err)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    from_json_str(&read_text(path)?)
}

/// Config files are JSON when the extension says so and TOML otherwise.
pub fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("json") => from_json_str(&text),
        _ => from_toml_str(&text),
    }
}

pub fn to_json_compact<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string(value).expect("file records serialize");
    s.push('\n');
    s
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("file records serialize");
    s.push('\n');
    s
}
