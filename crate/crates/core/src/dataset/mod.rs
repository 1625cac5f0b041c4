//! Annotation and mask files, dataset splits, timing logs and batch jobs.

pub mod annotation;
pub mod batch;
pub mod png_io;
pub mod split;
pub mod timing;

use std::path::PathBuf;

use thiserror::Error;

pub use annotation::{
    parse_annotation, parse_annotation_detailed, write_annotation, AnnotationError,
    ControlPointAnnotation, ParsedAnnotation,
};
pub use batch::{
    batch_evaluate, batch_generate, EvaluationReport, GenerateOptions, GenerateReport,
};
pub use png_io::{read_mask_png, write_mask_png, PngError};
pub use split::{split_dataset, DatasetSplit, SplitError};
pub use timing::{AnnotationMethod, TimingEntry, TimingError, TimingLog};

/// Failures that stop a whole batch job. Per-file problems are collected in
/// the job report instead.
#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}
