//! Per-image annotation timing log, stored as CSV `image_id,seconds,method`.

use std::fmt;
use std::fs::OpenOptions;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TimingError {
    #[error("annotation time must be a positive number of seconds, got {0}")]
    NonPositive(f64),
    #[error("unknown annotation method {0:?} (expected \"point-based\" or \"detailed\")")]
    UnknownMethod(String),
    #[error("timing CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("timing log I/O: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AnnotationMethod {
    /// Control points turned into a mask by this toolkit.
    #[serde(rename = "point-based")]
    PointBased,
    /// Mask painted pixel by pixel.
    #[serde(rename = "detailed")]
    Detailed,
}

impl fmt::Display for AnnotationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AnnotationMethod::PointBased => "point-based",
            AnnotationMethod::Detailed => "detailed",
        })
    }
}

impl FromStr for AnnotationMethod {
    type Err = TimingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "point-based" => Ok(AnnotationMethod::PointBased),
            "detailed" => Ok(AnnotationMethod::Detailed),
            other => Err(TimingError::UnknownMethod(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingEntry {
    pub image_id: String,
    pub seconds: f64,
    pub method: AnnotationMethod,
}

impl TimingEntry {
    pub fn new(
        image_id: impl Into<String>,
        seconds: f64,
        method: AnnotationMethod,
    ) -> Result<Self, TimingError> {
        if !(seconds.is_finite() && seconds > 0.0) {
            return Err(TimingError::NonPositive(seconds));
        }
        Ok(Self {
            image_id: image_id.into(),
            seconds,
            method,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: AnnotationMethod,
    pub count: usize,
    pub min_seconds: f64,
    pub max_seconds: f64,
    pub mean_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimingLog {
    entries: Vec<TimingEntry>,
}

impl TimingLog {
    pub fn entries(&self) -> &[TimingEntry] {
        &self.entries
    }

    pub fn push(&mut self, entry: TimingEntry) -> Result<(), TimingError> {
        // Re-check: fields are public.
        let entry = TimingEntry::new(entry.image_id, entry.seconds, entry.method)?;
        self.entries.push(entry);
        Ok(())
    }

    /// Min, max and mean seconds per method, methods in declaration order.
    pub fn summary(&self) -> Vec<MethodSummary> {
        [AnnotationMethod::PointBased, AnnotationMethod::Detailed]
            .into_iter()
            .filter_map(|method| {
                let secs: Vec<f64> = self
                    .entries
                    .iter()
                    .filter(|e| e.method == method)
                    .map(|e| e.seconds)
                    .collect();
                if secs.is_empty() {
                    return None;
                }
                Some(MethodSummary {
                    method,
                    count: secs.len(),
                    min_seconds: secs.iter().copied().fold(f64::INFINITY, f64::min),
                    max_seconds: secs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    mean_seconds: secs.iter().sum::<f64>() / secs.len() as f64,
                })
            })
            .collect()
    }

    pub fn from_csv(text: &str) -> Result<Self, TimingError> {
        let mut log = TimingLog::default();
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        for row in reader.deserialize::<TimingEntry>() {
            log.push(row?)?;
        }
        Ok(log)
    }

    pub fn to_csv(&self) -> Result<String, TimingError> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        if self.entries.is_empty() {
            writer.write_record(["image_id", "seconds", "method"])?;
        }
        for e in &self.entries {
            writer.serialize(e)?;
        }
        let bytes = writer.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    /// Appends one row to a CSV log, writing the header if the file is new
    /// or empty.
    pub fn append_to_file(path: &Path, entry: &TimingEntry) -> Result<(), TimingError> {
        let entry = TimingEntry::new(entry.image_id.clone(), entry.seconds, entry.method)?;
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        let needs_header = file.metadata()?.len() == 0;
        let mut writer = csv::WriterBuilder::new()
            .has_headers(needs_header)
            .from_writer(file);
        writer.serialize(&entry)?;
        writer.flush()?;
        Ok(())
    }
}
