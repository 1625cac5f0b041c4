//! Directory-level mask generation and evaluation.
//!
//! Files are processed in parallel; one bad file never aborts the batch.
//! Reports are sorted by image id (or file name) so they do not depend on
//! scheduling.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::annotation::parse_annotation_detailed;
use super::png_io::{read_mask_png, write_mask_png};
use super::DatasetError;
use crate::metrics::{confusion, ImageMetrics, MetricsReport};

pub const MASK_SUFFIX: &str = "_mask.png";
pub const MANIFEST_NAME: &str = "manifest.json";

pub fn mask_file_name(image_id: &str) -> String {
    format!("{image_id}{MASK_SUFFIX}")
}

/// Image id of a mask file: `<id>_mask.png` or plain `<id>.png`.
pub fn image_id_from_mask_name(file_name: &str) -> Option<&str> {
    file_name
        .strip_suffix(MASK_SUFFIX)
        .or_else(|| file_name.strip_suffix(".png"))
        .filter(|id| !id.is_empty())
}

#[derive(Debug, Clone, Default)]
pub struct GenerateOptions {
    /// Replaces every annotation's own `tau` when set.
    pub tau: Option<u32>,
    pub samples_per_segment: Option<usize>,
    pub clamp_ends: bool,
    /// Worker threads; 0 lets the pool decide.
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratedMask {
    pub image_id: String,
    pub annotation: PathBuf,
    pub mask: PathBuf,
    pub tau: u32,
    pub stems: usize,
    pub ignored_shapes: usize,
    pub millis: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileFailure {
    pub file: PathBuf,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GenerateReport {
    pub successes: Vec<GeneratedMask>,
    pub failures: Vec<FileFailure>,
}

#[derive(Serialize)]
struct ManifestEntry<'a> {
    image_id: &'a str,
    annotation: String,
    mask: String,
    tau: u32,
}

#[derive(Serialize)]
struct Manifest<'a> {
    clamp_ends: bool,
    samples_per_segment: Option<usize>,
    masks: Vec<ManifestEntry<'a>>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn list_files(dir: &Path, extension: &str) -> Result<Vec<PathBuf>, DatasetError> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        let matches = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case(extension));
        if matches && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

pub(crate) fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

fn generate_one(
    path: &Path,
    output_dir: &Path,
    opts: &GenerateOptions,
) -> Result<GeneratedMask, String> {
    let start = Instant::now();
    let text = fs::read_to_string(path).map_err(|e| format!("read failed: {e}"))?;
    let fallback = path.file_stem().and_then(|s| s.to_str());
    let parsed = parse_annotation_detailed(&text, fallback).map_err(|e| e.to_string())?;
    let mut annotation = parsed.annotation;
    if let Some(tau) = opts.tau {
        annotation.tau = tau;
    }
    let mask = annotation
        .render_mask(opts.clamp_ends, opts.samples_per_segment)
        .map_err(|e| e.to_string())?;
    let bytes = write_mask_png(&mask).map_err(|e| e.to_string())?;
    let mask_path = output_dir.join(mask_file_name(&annotation.image_id));
    fs::write(&mask_path, bytes).map_err(|e| format!("write {} failed: {e}", mask_path.display()))?;
    Ok(GeneratedMask {
        image_id: annotation.image_id,
        annotation: path.to_path_buf(),
        mask: mask_path,
        tau: annotation.tau,
        stems: annotation.stems.len(),
        ignored_shapes: parsed.ignored_shapes,
        millis: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// One `<image_id>_mask.png` per `*.json` annotation in `annotation_dir`,
/// plus a `manifest.json` listing what was written.
pub fn batch_generate(
    annotation_dir: &Path,
    output_dir: &Path,
    opts: &GenerateOptions,
) -> Result<GenerateReport, DatasetError> {
    let files = list_files(annotation_dir, "json")?;
    fs::create_dir_all(output_dir).map_err(io_err(output_dir))?;

    let results: Vec<(PathBuf, Result<GeneratedMask, String>)> = with_pool(opts.jobs, || {
        files
            .par_iter()
            .map(|f| (f.clone(), generate_one(f, output_dir, opts)))
            .collect()
    });

    let mut report = GenerateReport::default();
    let mut seen: BTreeMap<String, PathBuf> = BTreeMap::new();
    for (file, result) in results {
        match result {
            Ok(done) => {
                if let Some(first) = seen.get(&done.image_id) {
                    report.failures.push(FileFailure {
                        error: format!(
                            "image id {:?} already produced by {}; mask overwritten",
                            done.image_id,
                            first.display()
                        ),
                        file,
                    });
                } else {
                    seen.insert(done.image_id.clone(), file);
                    report.successes.push(done);
                }
            }
            Err(error) => report.failures.push(FileFailure { file, error }),
        }
    }
    report.successes.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    report.failures.sort_by(|a, b| a.file.cmp(&b.file));

    let name = |p: &Path| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let manifest = Manifest {
        clamp_ends: opts.clamp_ends,
        samples_per_segment: opts.samples_per_segment,
        masks: report
            .successes
            .iter()
            .map(|s| ManifestEntry {
                image_id: &s.image_id,
                annotation: name(&s.annotation),
                mask: name(&s.mask),
                tau: s.tau,
            })
            .collect(),
    };
    let manifest_path = output_dir.join(MANIFEST_NAME);
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&manifest_path, text).map_err(io_err(&manifest_path))?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Pred,
    Gt,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UnpairedMask {
    pub image_id: String,
    /// The directory the mask was found in; the other one lacks it.
    pub found_in: Side,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PairFailure {
    pub image_id: String,
    pub error: String,
}

/// Metrics over all pairable masks plus everything that could not be
/// compared. Unpaired masks are warnings; pair failures are errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub metrics: MetricsReport,
    pub unpaired: Vec<UnpairedMask>,
    pub failures: Vec<PairFailure>,
}

impl EvaluationReport {
    pub fn warning_count(&self) -> usize {
        self.unpaired.len()
    }
}

fn index_masks(dir: &Path, failures: &mut Vec<PairFailure>) -> Result<BTreeMap<String, PathBuf>, DatasetError> {
    let mut index = BTreeMap::new();
    for path in list_files(dir, "png")? {
        let Some(id) = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(image_id_from_mask_name)
            .map(str::to_string)
        else {
            continue;
        };
        if let Some(prev) = index.get(&id) {
            failures.push(PairFailure {
                error: format!(
                    "{} and {} both map to this image id; using the first",
                    Path::new(prev).display(),
                    path.display()
                ),
                image_id: id,
            });
            continue;
        }
        index.insert(id, path);
    }
    Ok(index)
}

fn evaluate_pair(pred: &Path, gt: &Path) -> Result<crate::metrics::ConfusionCounts, String> {
    let load = |p: &Path| -> Result<_, String> {
        let bytes = fs::read(p).map_err(|e| format!("{}: {e}", p.display()))?;
        read_mask_png(&bytes).map_err(|e| format!("{}: {e}", p.display()))
    };
    let (pm, gm) = (load(pred)?, load(gt)?);
    confusion(&pm, &gm).map_err(|e| e.to_string())
}

/// Pairs masks by image id across the two directories and scores each pair.
pub fn batch_evaluate(pred_dir: &Path, gt_dir: &Path, jobs: usize) -> Result<EvaluationReport, DatasetError> {
    let mut failures = Vec::new();
    let preds = index_masks(pred_dir, &mut failures)?;
    let gts = index_masks(gt_dir, &mut failures)?;

    let mut unpaired = Vec::new();
    let mut pairs = Vec::new();
    for (id, p) in &preds {
        match gts.get(id) {
            Some(g) => pairs.push((id.clone(), p.clone(), g.clone())),
            None => unpaired.push(UnpairedMask {
                image_id: id.clone(),
                found_in: Side::Pred,
            }),
        }
    }
    unpaired.extend(gts.keys().filter(|id| !preds.contains_key(*id)).map(|id| UnpairedMask {
        image_id: id.clone(),
        found_in: Side::Gt,
    }));
    unpaired.sort_by(|a, b| a.image_id.cmp(&b.image_id));

    let results: Vec<_> = with_pool(jobs, || {
        pairs
            .par_iter()
            .map(|(id, p, g)| (id.clone(), evaluate_pair(p, g)))
            .collect()
    });
    let mut per_image = Vec::new();
    for (image_id, r) in results {
        match r {
            Ok(c) => per_image.push(ImageMetrics::new(image_id, c)),
            Err(error) => failures.push(PairFailure { image_id, error }),
        }
    }
    failures.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    Ok(EvaluationReport {
        metrics: MetricsReport::from_images(per_image),
        unpaired,
        failures,
    })
}
