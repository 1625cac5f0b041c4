//! Stem masks from a handful of control points.
//!
//! Annotators click four or five points along a plant stem; the points are
//! interpolated with a uniform cubic B-spline ([`spline`]), drawn as a
//! one-pixel line and dilated by a disk into a `tau`-pixel-wide mask
//! ([`raster`]). [`metrics`] compares masks pixel by pixel and [`dataset`]
//! handles the files around all of this.

pub mod dataset;
pub mod mask;
pub mod metrics;
pub mod raster;
pub mod report;
pub mod spline;

/// Default stem width in pixels.
pub const DEFAULT_TAU: u32 = 30;

pub use mask::{BinaryMask, MaskError};
pub use metrics::{
    aggregate, confusion, f1, precision, recall, Aggregation, ConfusionCounts, F1Formula,
    MetricsReport,
};
pub use raster::{
    dilate, generate_stem_mask, generate_union_mask, rasterize_polyline, RasterError,
    StemMaskParams, StructuringElement,
};
pub use spline::{
    basis, eval_segment, eval_segment_derivative, num_segments, sample_curve, CurveSample,
    Point2, SplineError, StemCurve,
};
