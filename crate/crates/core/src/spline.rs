//! Uniform cubic (order 4) B-spline curves through annotator control points.
//!
//! A curve with `n` control points has `n - 3` segments. Segment `i` blends
//! points `i..i + 4` with the four cubic basis polynomials over a local
//! parameter `t` in `[0, 1]`. Uniform knots, no arc-length reparameterization.
//!
//! The curve does not pass through its first and last control point unless it
//! is built with [`StemCurve::clamped`], which triplicates both ends.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Spline order; a segment is blended from this many control points.
pub const ORDER: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SplineError {
    #[error("non-finite coordinate ({x}, {y})")]
    NonFinite { x: f64, y: f64 },
    #[error("insufficient control points: {got} given, at least {ORDER} required")]
    InsufficientControlPoints { got: usize },
    #[error("basis index {0} out of range 0..=3")]
    BasisIndex(usize),
    #[error("parameter t = {0} outside [0, 1]")]
    ParameterOutOfRange(f64),
    #[error("a segment takes exactly {ORDER} control points, got {0}")]
    SegmentArity(usize),
    #[error("unsupported derivative order {0}; only 1 and 2 are available")]
    DerivativeOrder(u8),
    #[error("segment {index} does not exist; the curve has {segments}")]
    SegmentIndex { index: usize, segments: usize },
    #[error("samples_per_segment must be at least 2, got {0}")]
    TooFewSamples(usize),
}

/// A finite sub-pixel image coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    x: f64,
    y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Result<Self, SplineError> {
        if x.is_finite() && y.is_finite() {
            Ok(Self { x, y })
        } else {
            Err(SplineError::NonFinite { x, y })
        }
    }

    pub fn x(self) -> f64 {
        self.x
    }

    pub fn y(self) -> f64 {
        self.y
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// `Σ w[k] · points[k]` for weights known to sum to `weight_sum`
    /// (1 for positions, 0 for derivatives), written relative to `points[1]`
    /// so repeated control points reproduce exactly.
    fn combine(points: &[Point2; 4], w: [f64; 4], weight_sum: f64) -> Point2 {
        let base = points[1];
        let mut x = weight_sum * base.x;
        let mut y = weight_sum * base.y;
        for k in [0, 2, 3] {
            x += w[k] * (points[k].x - base.x);
            y += w[k] * (points[k].y - base.y);
        }
        Point2 { x, y }
    }
}

impl TryFrom<[f64; 2]> for Point2 {
    type Error = SplineError;

    fn try_from([x, y]: [f64; 2]) -> Result<Self, Self::Error> {
        Point2::new(x, y)
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

/// Tangent or curvature vector of a segment, in pixels per unit `t` (or per `t²`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vector2 {
    pub x: f64,
    pub y: f64,
}

fn check_t(t: f64) -> Result<(), SplineError> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(SplineError::ParameterOutOfRange(t))
    }
}

/// All four basis weights at `t`. Callers guarantee `t` is in range.
///
/// The third weight is `(-3t³ + 3t² + 3t + 1) / 6`, which together with the
/// others sums to one for every `t`.
#[inline]
pub(crate) fn basis_weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    let s = 1.0 - t;
    [
        s * s * s / 6.0,
        (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0,
        (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0,
        t3 / 6.0,
    ]
}

#[inline]
fn basis_first_derivatives(t: f64) -> [f64; 4] {
    let s = 1.0 - t;
    [
        -0.5 * s * s,
        (3.0 * t * t - 4.0 * t) / 2.0,
        (-3.0 * t * t + 2.0 * t + 1.0) / 2.0,
        0.5 * t * t,
    ]
}

#[inline]
fn basis_second_derivatives(t: f64) -> [f64; 4] {
    [1.0 - t, 3.0 * t - 2.0, 1.0 - 3.0 * t, t]
}

/// The `k`-th uniform cubic B-spline basis weight at `t`.
pub fn basis(k: usize, t: f64) -> Result<f64, SplineError> {
    if k >= ORDER {
        return Err(SplineError::BasisIndex(k));
    }
    check_t(t)?;
    Ok(basis_weights(t)[k])
}

fn as_segment(ctrl: &[Point2]) -> Result<&[Point2; 4], SplineError> {
    ctrl.try_into().map_err(|_| SplineError::SegmentArity(ctrl.len()))
}

/// Evaluate one segment blended from exactly four control points.
pub fn eval_segment(ctrl: &[Point2], t: f64) -> Result<Point2, SplineError> {
    let ctrl = as_segment(ctrl)?;
    check_t(t)?;
    Ok(Point2::combine(ctrl, basis_weights(t), 1.0))
}

/// Analytic first or second derivative of a segment with respect to `t`.
pub fn eval_segment_derivative(
    ctrl: &[Point2],
    t: f64,
    derivative_order: u8,
) -> Result<Vector2, SplineError> {
    let ctrl = as_segment(ctrl)?;
    check_t(t)?;
    let w = match derivative_order {
        1 => basis_first_derivatives(t),
        2 => basis_second_derivatives(t),
        other => return Err(SplineError::DerivativeOrder(other)),
    };
    let p = Point2::combine(ctrl, w, 0.0);
    Ok(Vector2 { x: p.x, y: p.y })
}

pub fn num_segments(n_control_points: usize) -> Result<usize, SplineError> {
    if n_control_points < ORDER {
        return Err(SplineError::InsufficientControlPoints {
            got: n_control_points,
        });
    }
    Ok(n_control_points - (ORDER - 1))
}

/// A validated control polygon, ordered from stem base to tip.
#[derive(Debug, Clone, PartialEq)]
pub struct StemCurve {
    control_points: Vec<Point2>,
}

impl StemCurve {
    pub fn new(control_points: Vec<Point2>) -> Result<Self, SplineError> {
        num_segments(control_points.len())?;
        Ok(Self { control_points })
    }

    /// Triplicates the first and last point so the curve starts and ends on
    /// them. Needs the same four input points as [`StemCurve::new`].
    pub fn clamped(control_points: Vec<Point2>) -> Result<Self, SplineError> {
        num_segments(control_points.len())?;
        let first = control_points[0];
        let last = control_points[control_points.len() - 1];
        let mut points = Vec::with_capacity(control_points.len() + 4);
        points.extend([first, first]);
        points.extend(control_points);
        points.extend([last, last]);
        Ok(Self {
            control_points: points,
        })
    }

    pub fn control_points(&self) -> &[Point2] {
        &self.control_points
    }

    pub fn order(&self) -> usize {
        ORDER
    }

    pub fn num_segments(&self) -> usize {
        self.control_points.len() - (ORDER - 1)
    }

    /// The four control points blended by segment `index`.
    pub fn segment(&self, index: usize) -> &[Point2] {
        &self.control_points[index..index + ORDER]
    }

    pub fn eval(&self, segment: usize, t: f64) -> Result<Point2, SplineError> {
        if segment >= self.num_segments() {
            return Err(SplineError::SegmentIndex {
                index: segment,
                segments: self.num_segments(),
            });
        }
        eval_segment(self.segment(segment), t)
    }

    /// Total length of the control polygon in pixels.
    pub fn control_polygon_length(&self) -> f64 {
        self.control_points
            .windows(2)
            .map(|w| w[0].distance(w[1]))
            .sum()
    }

    /// Sampling density used when the caller does not choose one:
    /// `max(32, 2 * ceil(polygon length / segment count))`.
    pub fn default_samples_per_segment(&self) -> usize {
        let per_segment = self.control_polygon_length() / self.num_segments() as f64;
        let dense = 2 * per_segment.ceil().min(1.0e9) as usize;
        dense.max(32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveSample {
    pub segment_index: usize,
    pub t: f64,
    pub position: Point2,
}

/// Samples every segment at `t = j / (samples_per_segment - 1)`. The joint
/// shared by consecutive segments is emitted once.
pub fn sample_curve(
    curve: &StemCurve,
    samples_per_segment: usize,
) -> Result<Vec<CurveSample>, SplineError> {
    if samples_per_segment < 2 {
        return Err(SplineError::TooFewSamples(samples_per_segment));
    }
    let segments = curve.num_segments();
    let step = (samples_per_segment - 1) as f64;
    let mut samples = Vec::with_capacity(segments * (samples_per_segment - 1) + 1);
    for segment_index in 0..segments {
        let ctrl: &[Point2; 4] = curve.segment(segment_index).try_into().unwrap();
        let first = if segment_index == 0 { 0 } else { 1 };
        for j in first..samples_per_segment {
            let t = j as f64 / step;
            samples.push(CurveSample {
                segment_index,
                t,
                position: Point2::combine(ctrl, basis_weights(t), 1.0),
            });
        }
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> Point2 {
        Point2::new(x, y).unwrap()
    }

    fn line4() -> Vec<Point2> {
        vec![p(0.0, 0.0), p(1.0, 0.0), p(2.0, 0.0), p(3.0, 0.0)]
    }

    #[test]
    fn basis_values() {
        assert_eq!(basis(0, 0.0).unwrap(), 1.0 / 6.0);
        assert_eq!(basis(3, 0.0).unwrap(), 0.0);
        assert!((basis(1, 0.5).unwrap() - 2.875 / 6.0).abs() < 1e-15);
        let sum: f64 = (0..4).map(|k| basis(k, 0.37).unwrap()).sum();
        assert!((sum - 1.0).abs() < 1e-15);
    }

    #[test]
    fn basis_domain_errors() {
        assert_eq!(basis(4, 0.5), Err(SplineError::BasisIndex(4)));
        assert!(matches!(
            basis(0, 1.5),
            Err(SplineError::ParameterOutOfRange(_))
        ));
        assert!(basis(0, -0.0).is_ok());
        assert!(basis(0, f64::NAN).is_err());
    }

    #[test]
    fn segment_examples() {
        let c = vec![p(7.0, 9.0); 4];
        for t in [0.0, 0.3, 1.0] {
            assert_eq!(eval_segment(&c, t).unwrap(), p(7.0, 9.0));
        }
        assert_eq!(eval_segment(&line4(), 0.0).unwrap(), p(1.0, 0.0));
        let mid = eval_segment(&line4(), 0.5).unwrap();
        assert!((mid.x() - 1.5).abs() < 1e-15 && mid.y() == 0.0);
        assert_eq!(
            eval_segment(&line4()[..3], 0.5),
            Err(SplineError::SegmentArity(3))
        );
    }

    #[test]
    fn derivative_examples() {
        let c = vec![p(7.0, 9.0); 4];
        assert_eq!(
            eval_segment_derivative(&c, 0.4, 1).unwrap(),
            Vector2 { x: 0.0, y: 0.0 }
        );
        let d1 = eval_segment_derivative(&line4(), 0.0, 1).unwrap();
        assert_eq!((d1.x, d1.y), (1.0, 0.0));
        for t in [0.0, 0.25, 0.9] {
            let d2 = eval_segment_derivative(&line4(), t, 2).unwrap();
            assert!(d2.x.abs() < 1e-15 && d2.y == 0.0);
        }
        assert_eq!(
            eval_segment_derivative(&line4(), 0.0, 3),
            Err(SplineError::DerivativeOrder(3))
        );
    }

    #[test]
    fn segment_counts() {
        assert_eq!(num_segments(4), Ok(1));
        assert_eq!(num_segments(5), Ok(2));
        assert_eq!(
            num_segments(3),
            Err(SplineError::InsufficientControlPoints { got: 3 })
        );
    }

    #[test]
    fn sampling_counts_and_joints() {
        let curve = StemCurve::new(line4()).unwrap();
        let s = sample_curve(&curve, 2).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].t, s[1].t), (0.0, 1.0));

        let mut pts = line4();
        pts.push(p(5.0, 2.0));
        let curve = StemCurve::new(pts).unwrap();
        let s = sample_curve(&curve, 3).unwrap();
        assert_eq!(s.len(), 5);
        let order: Vec<_> = s.iter().map(|c| (c.segment_index, c.t)).collect();
        assert_eq!(
            order,
            vec![(0, 0.0), (0, 0.5), (0, 1.0), (1, 0.5), (1, 1.0)]
        );
        assert!(sample_curve(&curve, 1).is_err());

        let constant = StemCurve::new(vec![p(3.0, 4.0); 6]).unwrap();
        assert!(sample_curve(&constant, 7)
            .unwrap()
            .iter()
            .all(|c| c.position == p(3.0, 4.0)));
    }

    #[test]
    fn clamped_curve_touches_endpoints() {
        let pts = vec![p(10.0, 10.0), p(40.0, 80.0), p(90.0, 20.0), p(120.0, 70.0)];
        let curve = StemCurve::clamped(pts).unwrap();
        assert_eq!(curve.num_segments(), 5);
        assert_eq!(curve.eval(0, 0.0).unwrap(), p(10.0, 10.0));
        let last = curve.eval(4, 1.0).unwrap();
        assert!((last.x() - 120.0).abs() < 1e-12 && (last.y() - 70.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_finite_points() {
        assert!(Point2::new(f64::NAN, 0.0).is_err());
        assert!(Point2::new(0.0, f64::INFINITY).is_err());
        assert!(serde_json::from_str::<Point2>("[1.0, 2.0]").is_ok());
    }

    #[test]
    fn default_density() {
        let curve = StemCurve::new(line4()).unwrap();
        assert_eq!(curve.default_samples_per_segment(), 32);
        let long = StemCurve::new(vec![
            p(0.0, 0.0),
            p(0.0, 100.0),
            p(0.0, 200.0),
            p(0.0, 300.0),
            p(0.0, 400.0),
        ])
        .unwrap();
        // 400 px over 2 segments
        assert_eq!(long.default_samples_per_segment(), 400);
    }
}
