//! Control-point annotations in LabelMe-compatible JSON.
//!
//! Recognized stem shapes (label `"stem"`):
//! - `linestrip`: the points list is one stem, base to tip;
//! - `point`: single points sharing a `group_id` form one stem in order of
//!   appearance. Stem points without a `group_id` form one stem together.
//!
//! Everything else is ignored and counted. `tau` may be given at the top
//! level or on stem shapes; the top-level value wins, and per-shape values
//! must agree with each other.

use std::collections::HashMap;
use std::path::Path;

use serde::Deserialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::mask::BinaryMask;
use crate::raster::{generate_union_mask, RasterError, StemMaskParams};
use crate::spline::{Point2, StemCurve, ORDER};
use crate::DEFAULT_TAU;

pub const STEM_LABEL: &str = "stem";
const LABELME_VERSION: &str = "5.2.1";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnnotationError {
    #[error("invalid annotation JSON at byte {offset} (line {line}, column {column}): {message}")]
    Json {
        offset: usize,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("no stems: the document has no shape labeled \"stem\"")]
    NoStems,
    #[error("shape {shape_index}: a stem needs at least {ORDER} control points, got {got}")]
    TooFewPoints { shape_index: usize, got: usize },
    #[error("shape {shape_index}: point {point_index} has a non-finite coordinate")]
    NonFinitePoint {
        shape_index: usize,
        point_index: usize,
    },
    #[error("stem {stem_index}, point {point_index} at ({x}, {y}) lies more than one image diagonal outside the image")]
    PointTooFarOut {
        stem_index: usize,
        point_index: usize,
        x: f64,
        y: f64,
    },
    #[error("missing or invalid image dimensions (imageWidth/imageHeight must be integers >= 1)")]
    InvalidDimensions,
    #[error("missing image id: no imagePath in the document")]
    MissingImageId,
    #[error("invalid image id {0:?}: must be non-empty and free of path separators")]
    InvalidImageId(String),
    #[error("invalid tau {0}: must be an integer >= 1")]
    InvalidTau(String),
    #[error("stem shapes disagree on tau: {0} vs {1}")]
    ConflictingTau(u32, u32),
}

/// One image's control points.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPointAnnotation {
    pub image_id: String,
    pub image_width: u32,
    pub image_height: u32,
    /// Ordered control points per stem, base to tip.
    pub stems: Vec<Vec<Point2>>,
    pub tau: u32,
}

impl ControlPointAnnotation {
    pub fn validate(&self) -> Result<(), AnnotationError> {
        validate_image_id(&self.image_id)?;
        if self.image_width == 0 || self.image_height == 0 {
            return Err(AnnotationError::InvalidDimensions);
        }
        if self.tau < 1 {
            return Err(AnnotationError::InvalidTau(self.tau.to_string()));
        }
        if self.stems.is_empty() {
            return Err(AnnotationError::NoStems);
        }
        let (w, h) = (self.image_width as f64, self.image_height as f64);
        let diag = w.hypot(h);
        for (stem_index, stem) in self.stems.iter().enumerate() {
            if stem.len() < ORDER {
                return Err(AnnotationError::TooFewPoints {
                    shape_index: stem_index,
                    got: stem.len(),
                });
            }
            for (point_index, p) in stem.iter().enumerate() {
                let (x, y) = (p.x(), p.y());
                if x < -diag || x > w + diag || y < -diag || y > h + diag {
                    return Err(AnnotationError::PointTooFarOut {
                        stem_index,
                        point_index,
                        x,
                        y,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn curves(&self, clamp_ends: bool) -> Result<Vec<StemCurve>, RasterError> {
        self.stems
            .iter()
            .map(|s| {
                if clamp_ends {
                    StemCurve::clamped(s.clone())
                } else {
                    StemCurve::new(s.clone())
                }
                .map_err(RasterError::from)
            })
            .collect()
    }

    /// Union mask over all stems at this annotation's `tau`.
    pub fn render_mask(
        &self,
        clamp_ends: bool,
        samples_per_segment: Option<usize>,
    ) -> Result<BinaryMask, RasterError> {
        generate_union_mask(
            &self.curves(clamp_ends)?,
            self.image_width,
            self.image_height,
            StemMaskParams {
                tau: self.tau,
                samples_per_segment,
            },
        )
    }
}

fn validate_image_id(id: &str) -> Result<(), AnnotationError> {
    if id.is_empty() || id.contains(['/', '\\']) || id == "." || id == ".." {
        return Err(AnnotationError::InvalidImageId(id.to_string()));
    }
    Ok(())
}

/// Parse outcome with the number of shapes that were not stems.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedAnnotation {
    pub annotation: ControlPointAnnotation,
    pub ignored_shapes: usize,
}

#[derive(Deserialize)]
struct RawDocument {
    #[serde(default)]
    shapes: Vec<RawShape>,
    #[serde(rename = "imagePath")]
    image_path: Option<String>,
    #[serde(rename = "imageWidth")]
    image_width: Option<Value>,
    #[serde(rename = "imageHeight")]
    image_height: Option<Value>,
    tau: Option<Value>,
}

#[derive(Deserialize)]
struct RawShape {
    #[serde(default)]
    label: String,
    #[serde(default)]
    points: Vec<Vec<f64>>,
    #[serde(default)]
    shape_type: Option<String>,
    #[serde(default)]
    group_id: Option<i64>,
    tau: Option<Value>,
}

fn json_error(text: &str, err: &serde_json::Error) -> AnnotationError {
    let (line, column) = (err.line(), err.column());
    let offset = text
        .split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum::<usize>()
        + column.saturating_sub(1);
    AnnotationError::Json {
        offset: offset.min(text.len()),
        line,
        column,
        message: err.to_string(),
    }
}

fn parse_tau(v: &Value) -> Result<u32, AnnotationError> {
    let tau = match v {
        Value::Number(n) => n
            .as_u64()
            .or_else(|| n.as_f64().filter(|f| f.fract() == 0.0 && *f >= 0.0).map(|f| f as u64)),
        _ => None,
    };
    match tau {
        Some(t) if (1..=u32::MAX as u64).contains(&t) => Ok(t as u32),
        _ => Err(AnnotationError::InvalidTau(v.to_string())),
    }
}

fn parse_dimension(v: Option<&Value>) -> Result<u32, AnnotationError> {
    v.and_then(Value::as_u64)
        .filter(|d| (1..=u32::MAX as u64).contains(d))
        .map(|d| d as u32)
        .ok_or(AnnotationError::InvalidDimensions)
}

fn to_points(shape_index: usize, raw: &[Vec<f64>]) -> Result<Vec<Point2>, AnnotationError> {
    raw.iter()
        .enumerate()
        .map(|(point_index, xy)| match xy.as_slice() {
            [x, y] => Point2::new(*x, *y).map_err(|_| AnnotationError::NonFinitePoint {
                shape_index,
                point_index,
            }),
            _ => Err(AnnotationError::Json {
                offset: 0,
                line: 0,
                column: 0,
                message: format!(
                    "shape {shape_index}, point {point_index}: expected [x, y], got {} values",
                    xy.len()
                ),
            }),
        })
        .collect()
}

/// Parses a LabelMe document; the image id is the file stem of `imagePath`.
pub fn parse_annotation(document: &str) -> Result<ControlPointAnnotation, AnnotationError> {
    parse_annotation_detailed(document, None).map(|p| p.annotation)
}

/// Like [`parse_annotation`], falling back to `fallback_id` when the
/// document has no `imagePath`.
pub fn parse_annotation_detailed(
    document: &str,
    fallback_id: Option<&str>,
) -> Result<ParsedAnnotation, AnnotationError> {
    let raw: RawDocument =
        serde_json::from_str(document).map_err(|e| json_error(document, &e))?;

    let image_id = match raw.image_path.as_deref().filter(|p| !p.is_empty()) {
        Some(path) => Path::new(&path.replace('\\', "/"))
            .file_stem()
            .and_then(|s| s.to_str())
            .map(str::to_string)
            .ok_or(AnnotationError::MissingImageId)?,
        None => fallback_id
            .map(str::to_string)
            .ok_or(AnnotationError::MissingImageId)?,
    };
    let image_width = parse_dimension(raw.image_width.as_ref())?;
    let image_height = parse_dimension(raw.image_height.as_ref())?;

    // (first shape index, points) in order of first appearance
    let mut stems: Vec<(usize, Vec<Point2>)> = Vec::new();
    let mut groups: HashMap<Option<i64>, usize> = HashMap::new();
    let mut shape_tau: Option<u32> = None;
    let mut ignored_shapes = 0;

    for (shape_index, shape) in raw.shapes.iter().enumerate() {
        let kind = shape.shape_type.as_deref().unwrap_or("polygon");
        if shape.label != STEM_LABEL || !matches!(kind, "linestrip" | "point") {
            ignored_shapes += 1;
            continue;
        }
        if let Some(v) = &shape.tau {
            let t = parse_tau(v)?;
            match shape_tau {
                Some(prev) if prev != t => return Err(AnnotationError::ConflictingTau(prev, t)),
                _ => shape_tau = Some(t),
            }
        }
        let points = to_points(shape_index, &shape.points)?;
        if kind == "linestrip" {
            stems.push((shape_index, points));
        } else {
            let slot = *groups.entry(shape.group_id).or_insert_with(|| {
                stems.push((shape_index, Vec::new()));
                stems.len() - 1
            });
            stems[slot].1.extend(points);
        }
    }

    if stems.is_empty() {
        return Err(AnnotationError::NoStems);
    }
    for (shape_index, points) in &stems {
        if points.len() < ORDER {
            return Err(AnnotationError::TooFewPoints {
                shape_index: *shape_index,
                got: points.len(),
            });
        }
    }
    let tau = match &raw.tau {
        Some(v) => parse_tau(v)?,
        None => shape_tau.unwrap_or(DEFAULT_TAU),
    };

    let annotation = ControlPointAnnotation {
        image_id,
        image_width,
        image_height,
        stems: stems.into_iter().map(|(_, p)| p).collect(),
        tau,
    };
    annotation.validate()?;
    Ok(ParsedAnnotation {
        annotation,
        ignored_shapes,
    })
}

/// Emits a LabelMe document with one `linestrip` per stem. `tau` is always
/// written at the top level.
pub fn write_annotation(annotation: &ControlPointAnnotation) -> String {
    let shapes: Vec<Value> = annotation
        .stems
        .iter()
        .map(|stem| {
            json!({
                "label": STEM_LABEL,
                "points": stem.iter().map(|p| [p.x(), p.y()]).collect::<Vec<_>>(),
                "group_id": null,
                "description": "",
                "shape_type": "linestrip",
                "flags": {},
            })
        })
        .collect();
    let doc = json!({
        "version": LABELME_VERSION,
        "flags": {},
        "shapes": shapes,
        "imagePath": format!("{}.jpg", annotation.image_id),
        "imageData": null,
        "imageHeight": annotation.image_height,
        "imageWidth": annotation.image_width,
        "tau": annotation.tau,
    });
    let mut out = serde_json::to_string_pretty(&doc).expect("annotation JSON is always serializable");
    out.push('\n');
    out
}
