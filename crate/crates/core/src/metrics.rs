//! Pixel-level agreement between a predicted mask and a ground-truth mask.
//!
//! Every ratio returns 0 when its denominator is 0, so an empty prediction
//! or an empty ground truth is never rewarded.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mask::BinaryMask;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("dimension mismatch: prediction is {pred_width}x{pred_height}, ground truth is {gt_width}x{gt_height}")]
    DimensionMismatch {
        pred_width: u32,
        pred_height: u32,
        gt_width: u32,
        gt_height: u32,
    },
    #[error("cannot aggregate an empty list of images")]
    EmptyAggregate,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Counts with prediction and ground truth swapped.
    pub fn transposed(self) -> Self {
        Self {
            fp: self.fn_,
            fn_: self.fp,
            ..self
        }
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self {
            tp: self.tp + rhs.tp,
            fp: self.fp + rhs.fp,
            fn_: self.fn_ + rhs.fn_,
            tn: self.tn + rhs.tn,
        }
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |a, b| a + b)
    }
}

/// Counts over every pixel. Rows are tallied in parallel with exact integer
/// sums.
pub fn confusion(pred: &BinaryMask, gt: &BinaryMask) -> Result<ConfusionCounts, MetricsError> {
    if pred.dimensions() != gt.dimensions() {
        return Err(MetricsError::DimensionMismatch {
            pred_width: pred.width(),
            pred_height: pred.height(),
            gt_width: gt.width(),
            gt_height: gt.height(),
        });
    }
    let wpr = pred.words_per_row();
    let (tp, fp, fn_) = pred
        .words()
        .par_chunks(wpr)
        .zip(gt.words().par_chunks(wpr))
        .map(|(p, g)| {
            p.iter().zip(g).fold((0u64, 0u64, 0u64), |(tp, fp, fn_), (&p, &g)| {
                (
                    tp + (p & g).count_ones() as u64,
                    fp + (p & !g).count_ones() as u64,
                    fn_ + (!p & g).count_ones() as u64,
                )
            })
        })
        .reduce(|| (0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    Ok(ConfusionCounts {
        tp,
        fp,
        fn_,
        tn: pred.pixel_count() - tp - fp - fn_,
    })
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// `tp / (tp + fp)`, 0 when nothing is predicted.
pub fn precision(c: &ConfusionCounts) -> f64 {
    ratio(c.tp, c.tp + c.fp)
}

/// `tp / (tp + fn)`, 0 when the ground truth is empty.
pub fn recall(c: &ConfusionCounts) -> f64 {
    ratio(c.tp, c.tp + c.fn_)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum F1Formula {
    /// Harmonic mean, `2PR / (P + R)`.
    Standard,
    /// `PR / (P + R)`, without the factor 2; exactly half the harmonic mean.
    /// Serialized as `"paper"` to match the `f1_paper` report column.
    #[serde(rename = "paper")]
    Halved,
}

pub fn f1_from(precision: f64, recall: f64, formula: F1Formula) -> f64 {
    let sum = precision + recall;
    if sum == 0.0 {
        return 0.0;
    }
    let half = precision * recall / sum;
    match formula {
        F1Formula::Standard => 2.0 * half,
        F1Formula::Halved => half,
    }
}

pub fn f1(c: &ConfusionCounts, formula: F1Formula) -> f64 {
    f1_from(precision(c), recall(c), formula)
}

/// Precision, recall and both F1 variants for one set of counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1_standard: f64,
    pub f1_paper: f64,
}

impl Scores {
    pub fn from_counts(c: &ConfusionCounts) -> Self {
        let (p, r) = (precision(c), recall(c));
        Self {
            precision: p,
            recall: r,
            f1_standard: f1_from(p, r, F1Formula::Standard),
            f1_paper: f1_from(p, r, F1Formula::Halved),
        }
    }

    pub fn f1(&self, formula: F1Formula) -> f64 {
        match formula {
            F1Formula::Standard => self.f1_standard,
            F1Formula::Halved => self.f1_paper,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Metrics of the pixel counts pooled over all images.
    Micro,
    /// Unweighted mean of per-image metrics.
    Macro,
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::Micro => "micro",
            Aggregation::Macro => "macro",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub mode: Aggregation,
    pub images: usize,
    /// Pooled counts; the micro scores are recomputed from these.
    pub counts: ConfusionCounts,
    #[serde(flatten)]
    pub scores: Scores,
}

pub fn aggregate(
    counts: &[ConfusionCounts],
    mode: Aggregation,
) -> Result<AggregateMetrics, MetricsError> {
    if counts.is_empty() {
        return Err(MetricsError::EmptyAggregate);
    }
    let pooled: ConfusionCounts = counts.iter().copied().sum();
    let scores = match mode {
        Aggregation::Micro => Scores::from_counts(&pooled),
        Aggregation::Macro => {
            let n = counts.len() as f64;
            let per: Vec<Scores> = counts.iter().map(Scores::from_counts).collect();
            let mean = |f: fn(&Scores) -> f64| per.iter().map(f).sum::<f64>() / n;
            Scores {
                precision: mean(|s| s.precision),
                recall: mean(|s| s.recall),
                f1_standard: mean(|s| s.f1_standard),
                f1_paper: mean(|s| s.f1_paper),
            }
        }
    };
    Ok(AggregateMetrics {
        mode,
        images: counts.len(),
        counts: pooled,
        scores,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageMetrics {
    pub image_id: String,
    pub counts: ConfusionCounts,
    #[serde(flatten)]
    pub scores: Scores,
}

impl ImageMetrics {
    pub fn new(image_id: impl Into<String>, counts: ConfusionCounts) -> Self {
        Self {
            image_id: image_id.into(),
            counts,
            scores: Scores::from_counts(&counts),
        }
    }
}

/// Per-image rows plus both aggregates. `headline` names the aggregate the
/// summary line quotes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_image: Vec<ImageMetrics>,
    pub micro: Option<AggregateMetrics>,
    #[serde(rename = "macro")]
    pub macro_: Option<AggregateMetrics>,
    pub headline: Aggregation,
    pub aggregation_note: String,
}

impl MetricsReport {
    /// Rows are sorted by image id so output does not depend on the order the
    /// pairs were evaluated in.
    pub fn from_images(mut per_image: Vec<ImageMetrics>) -> Self {
        per_image.sort_by(|a, b| a.image_id.cmp(&b.image_id));
        let counts: Vec<ConfusionCounts> = per_image.iter().map(|m| m.counts).collect();
        let micro = aggregate(&counts, Aggregation::Micro).ok();
        let macro_ = aggregate(&counts, Aggregation::Macro).ok();
        Self {
            aggregation_note: format!(
                "headline: micro (pixel counts pooled over {} images); macro = unweighted mean of per-image metrics",
                per_image.len()
            ),
            per_image,
            micro,
            macro_,
            headline: Aggregation::Micro,
        }
    }

    pub fn headline_metrics(&self) -> Option<&AggregateMetrics> {
        match self.headline {
            Aggregation::Micro => self.micro.as_ref(),
            Aggregation::Macro => self.macro_.as_ref(),
        }
    }
}
