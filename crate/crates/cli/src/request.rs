//! The mask-generation request shared by `preview` and `POST /v1/mask`.
//!
//! Both front ends build a [`GenerateRequest`] and call [`render_png`], so
//! identical parameters give identical PNG bytes.

use serde::{Deserialize, Serialize};
use stemtrace_core::dataset::{write_mask_png, AnnotationError, ControlPointAnnotation};
use stemtrace_core::{Point2, RasterError, SplineError, DEFAULT_TAU};
use thiserror::Error;

/// Largest canvas a single request may ask for.
pub const MAX_REQUEST_PIXELS: u64 = 200_000_000;

fn default_tau() -> u32 {
    DEFAULT_TAU
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateRequest {
    pub image_width: u32,
    pub image_height: u32,
    pub stems: Vec<Vec<Point2>>,
    #[serde(default = "default_tau")]
    pub tau: u32,
    #[serde(default)]
    pub clamp_ends: bool,
    #[serde(default)]
    pub samples_per_segment: Option<usize>,
}

impl GenerateRequest {
    pub fn from_annotation(a: &ControlPointAnnotation, clamp_ends: bool, samples_per_segment: Option<usize>) -> Self {
        Self {
            image_width: a.image_width,
            image_height: a.image_height,
            stems: a.stems.clone(),
            tau: a.tau,
            clamp_ends,
            samples_per_segment,
        }
    }

    fn to_annotation(&self) -> ControlPointAnnotation {
        ControlPointAnnotation {
            image_id: "request".to_string(),
            image_width: self.image_width,
            image_height: self.image_height,
            stems: self.stems.clone(),
            tau: self.tau,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RequestError {
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
    #[error("samples_per_segment must be at least 2, got {0}")]
    Sampling(usize),
    #[error("canvas of {width}x{height} exceeds the {MAX_REQUEST_PIXELS}-pixel limit")]
    TooLarge { width: u32, height: u32 },
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error("mask encoding failed: {0}")]
    Encode(String),
}

impl RequestError {
    /// Stable machine-readable code for API clients.
    pub fn code(&self) -> &'static str {
        match self {
            RequestError::Annotation(e) => match e {
                AnnotationError::TooFewPoints { .. } => "insufficient_control_points",
                AnnotationError::NoStems => "no_stems",
                AnnotationError::InvalidTau(_) | AnnotationError::ConflictingTau(..) => "invalid_tau",
                AnnotationError::InvalidDimensions => "invalid_dimensions",
                AnnotationError::PointTooFarOut { .. } | AnnotationError::NonFinitePoint { .. } => {
                    "invalid_control_point"
                }
                AnnotationError::Json { .. } => "invalid_json",
                AnnotationError::MissingImageId | AnnotationError::InvalidImageId(_) => "invalid_image_id",
            },
            RequestError::Sampling(_) => "invalid_sampling",
            RequestError::TooLarge { .. } => "image_too_large",
            RequestError::Raster(RasterError::Spline(SplineError::InsufficientControlPoints { .. })) => {
                "insufficient_control_points"
            }
            RequestError::Raster(_) => "invalid_request",
            RequestError::Encode(_) => "internal_error",
        }
    }
}

/// What was actually used to draw the mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderInfo {
    pub tau: u32,
    pub clamp_ends: bool,
    /// Per stem, in request order.
    pub samples_per_segment: Vec<usize>,
}

impl RenderInfo {
    pub fn sampling_header(&self) -> String {
        self.samples_per_segment
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join(",")
    }
}

pub fn render_png(req: &GenerateRequest) -> Result<(Vec<u8>, RenderInfo), RequestError> {
    let annotation = req.to_annotation();
    annotation.validate()?;
    if let Some(n) = req.samples_per_segment.filter(|&n| n < 2) {
        return Err(RequestError::Sampling(n));
    }
    if req.image_width as u64 * req.image_height as u64 > MAX_REQUEST_PIXELS {
        return Err(RequestError::TooLarge {
            width: req.image_width,
            height: req.image_height,
        });
    }
    let curves = annotation.curves(req.clamp_ends)?;
    let info = RenderInfo {
        tau: req.tau,
        clamp_ends: req.clamp_ends,
        samples_per_segment: curves
            .iter()
            .map(|c| req.samples_per_segment.unwrap_or_else(|| c.default_samples_per_segment()))
            .collect(),
    };
    let mask = annotation.render_mask(req.clamp_ends, req.samples_per_segment)?;
    let png = write_mask_png(&mask).map_err(|e| RequestError::Encode(e.to_string()))?;
    Ok((png, info))
}
