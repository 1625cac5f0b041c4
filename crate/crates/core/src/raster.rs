//! Curve to mask: one-pixel polyline rasterization and disk dilation.

use rayon::prelude::*;
use thiserror::Error;

use crate::mask::{BinaryMask, MaskError};
use crate::spline::{sample_curve, Point2, SplineError, StemCurve};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RasterError {
    #[error("cannot rasterize an empty sample list")]
    EmptySamples,
    #[error("tau must be at least 1 pixel, got {0}")]
    TauTooSmall(u32),
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error(transparent)]
    Spline(#[from] SplineError),
}

// Rounded coordinates are kept well inside i64 so line arithmetic in i128
// can never overflow.
const COORD_LIMIT: f64 = (1u64 << 52) as f64;

/// Nearest pixel, ties away from zero.
fn to_pixel(p: Point2) -> (i64, i64) {
    let r = |v: f64| v.round().clamp(-COORD_LIMIT, COORD_LIMIT) as i64;
    (r(p.x()), r(p.y()))
}

/// Draws the closed integer segment `a..=b` with octant Bresenham stepping,
/// keeping only pixels inside the mask.
///
/// Step `k` along the major axis moves the minor axis by
/// `floor((2k·d_minor + d_major - 1) / (2·d_major))`, the same pixels the
/// incremental decision-variable loop picks. The closed form lets the loop
/// start and stop at the canvas edges.
pub(crate) fn draw_segment(mask: &mut BinaryMask, a: (i64, i64), b: (i64, i64)) {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let x_major = dx.abs() >= dy.abs();
    let (major0, minor0, d_major, d_minor, s_major, s_minor, major_len, minor_len) = if x_major {
        (a.0, a.1, dx.abs(), dy.abs(), dx.signum(), dy.signum(), w, h)
    } else {
        (a.1, a.0, dy.abs(), dx.abs(), dy.signum(), dx.signum(), h, w)
    };

    if d_major == 0 {
        if (0..w).contains(&a.0) && (0..h).contains(&a.1) {
            mask.set(a.0 as u32, a.1 as u32, true);
        }
        return;
    }

    // Step range along the major axis that stays on the canvas.
    let step_bounds = |start: i64, sign: i64, len: i64| -> (i64, i64) {
        if sign > 0 {
            (-start, len - 1 - start)
        } else {
            (start - (len - 1), start)
        }
    };
    let (mut k_lo, mut k_hi) = step_bounds(major0, s_major, major_len);
    k_lo = k_lo.max(0);
    k_hi = k_hi.min(d_major);

    // Coarse window along the minor axis; the exact check happens per pixel.
    if d_minor > 0 {
        let slope = d_minor as f64 / d_major as f64;
        let (m_lo, m_hi) = step_bounds(minor0, s_minor, minor_len);
        let lo = ((m_lo as f64 - 1.0) / slope).floor() - 1.0;
        let hi = ((m_hi as f64 + 1.0) / slope).ceil() + 1.0;
        k_lo = k_lo.max(lo.max(0.0) as i64);
        k_hi = k_hi.min(hi.min(d_major as f64) as i64);
    } else if !(0..minor_len).contains(&minor0) {
        return;
    }

    let (dmaj, dmin) = (d_major as i128, d_minor as i128);
    for k in k_lo..=k_hi {
        let offset = ((2 * k as i128 * dmin + dmaj - 1) / (2 * dmaj)) as i64;
        let major = major0 + s_major * k;
        let minor = minor0 + s_minor * offset;
        let (x, y) = if x_major { (major, minor) } else { (minor, major) };
        if (0..w).contains(&x) && (0..h).contains(&y) {
            mask.set(x as u32, y as u32, true);
        }
    }
}

/// Joins consecutive samples with integer lines after rounding each to the
/// nearest pixel. Geometry outside the canvas is dropped.
pub fn rasterize_polyline(
    samples: &[Point2],
    width: u32,
    height: u32,
) -> Result<BinaryMask, RasterError> {
    let mut mask = BinaryMask::new(width, height)?;
    draw_polyline(&mut mask, samples)?;
    Ok(mask)
}

pub(crate) fn draw_polyline(mask: &mut BinaryMask, samples: &[Point2]) -> Result<(), RasterError> {
    let first = samples.first().ok_or(RasterError::EmptySamples)?;
    let mut prev = to_pixel(*first);
    draw_segment(mask, prev, prev);
    for p in &samples[1..] {
        let next = to_pixel(*p);
        if next != prev {
            draw_segment(mask, prev, next);
        }
        prev = next;
    }
    Ok(())
}

/// A disk-shaped footprint: every integer offset with `dx² + dy² <= radius²`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuringElement {
    radius: u32,
    // half_widths[|dy|] = largest dx with dx² + dy² <= r²
    half_widths: Vec<u32>,
}

impl StructuringElement {
    pub fn disk(radius: u32) -> Self {
        let r2 = radius as u64 * radius as u64;
        let half_widths = (0..=radius as u64)
            .map(|dy| {
                let mut dx = ((r2 - dy * dy) as f64).sqrt() as u64;
                while dx * dx + dy * dy > r2 {
                    dx -= 1;
                }
                while (dx + 1) * (dx + 1) + dy * dy <= r2 {
                    dx += 1;
                }
                dx as u32
            })
            .collect();
        Self {
            radius,
            half_widths,
        }
    }

    /// The disk used for a stem of width `tau`: radius `floor(tau / 2)`.
    pub fn for_tau(tau: u32) -> Self {
        Self::disk(tau / 2)
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    /// Half-width of the footprint on row `dy`, or `None` outside the disk.
    pub fn half_width(&self, dy: i64) -> Option<u32> {
        self.half_widths.get(dy.unsigned_abs() as usize).copied()
    }

    pub fn offsets(&self) -> Vec<(i32, i32)> {
        let r = self.radius as i32;
        (-r..=r)
            .flat_map(|dy| {
                let hw = self.half_widths[dy.unsigned_abs() as usize] as i32;
                (-hw..=hw).map(move |dx| (dx, dy))
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.half_widths
            .iter()
            .enumerate()
            .map(|(dy, &hw)| (2 * hw as usize + 1) * if dy == 0 { 1 } else { 2 })
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// `dst = src | (src shifted by s)` over one row of words, bit `x` of the
/// row being pixel `x`. Bits pushed past either end of the row are dropped.
fn shift_or(src: &[u64], s: usize, towards_higher_x: bool, tail: u64, dst: &mut [u64]) {
    let n = src.len();
    let (ws, bs) = (s / 64, s % 64);
    for i in 0..n {
        let mut v = src[i];
        if towards_higher_x {
            if i >= ws {
                v |= src[i - ws] << bs;
                if bs > 0 && i > ws {
                    v |= src[i - ws - 1] >> (64 - bs);
                }
            }
        } else if i + ws < n {
            v |= src[i + ws] >> bs;
            if bs > 0 && i + ws + 1 < n {
                v |= src[i + ws + 1] << (64 - bs);
            }
        }
        dst[i] = v;
    }
    dst[n - 1] &= tail;
}

/// ORs the horizontal dilation of `src` by `half_width` into `out`.
///
/// Runs one pass towards higher x and one towards lower x. Each pass doubles
/// its reach per shift, so a pass costs `O(log half_width)` row sweeps.
fn or_dilated_row(
    src: &[u64],
    half_width: usize,
    tail: u64,
    acc: &mut Vec<u64>,
    tmp: &mut Vec<u64>,
    out: &mut [u64],
) {
    acc.clear();
    acc.extend_from_slice(src);
    tmp.resize(src.len(), 0);
    for towards_higher_x in [true, false] {
        let mut reach = 0;
        while reach < half_width {
            let step = (reach + 1).min(half_width - reach);
            shift_or(acc, step, towards_higher_x, tail, tmp);
            std::mem::swap(acc, tmp);
            reach += step;
        }
    }
    for (o, a) in out.iter_mut().zip(acc.iter()) {
        *o |= a;
    }
}

/// Morphological dilation. Output pixel `(x, y)` is set iff some offset
/// `(dx, dy)` of the element has `(x - dx, y - dy)` set in the input. The
/// canvas does not grow.
///
/// Rows are computed independently in parallel; the result does not depend
/// on the thread count.
pub fn dilate(mask: &BinaryMask, element: &StructuringElement) -> BinaryMask {
    let mut out = mask.clone();
    if element.radius() == 0 || mask.is_empty() {
        return out;
    }
    let wpr = mask.words_per_row();
    let height = mask.height() as i64;
    let tail = mask.tail_mask();
    let r = element.radius() as i64;
    let row_empty: Vec<bool> = (0..mask.height())
        .map(|y| mask.row_words(y).iter().all(|&w| w == 0))
        .collect();

    out.words_mut()
        .par_chunks_mut(wpr)
        .enumerate()
        .for_each_init(
            || (Vec::with_capacity(wpr), Vec::with_capacity(wpr)),
            |(acc, tmp), (y, row)| {
                let y = y as i64;
                for dy in -r..=r {
                    let src_y = y - dy;
                    if src_y < 0 || src_y >= height || row_empty[src_y as usize] {
                        continue;
                    }
                    let hw = element.half_width(dy).unwrap_or(0) as usize;
                    let src = mask.row_words(src_y as u32);
                    or_dilated_row(src, hw, tail, acc, tmp, row);
                }
            },
        );
    out
}

/// Parameters shared by every stem rendered into one mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StemMaskParams {
    pub tau: u32,
    /// `None` picks [`StemCurve::default_samples_per_segment`] per stem.
    pub samples_per_segment: Option<usize>,
}

impl Default for StemMaskParams {
    fn default() -> Self {
        Self {
            tau: crate::DEFAULT_TAU,
            samples_per_segment: None,
        }
    }
}

fn curve_samples(curve: &StemCurve, samples_per_segment: Option<usize>) -> Result<Vec<Point2>, RasterError> {
    let n = samples_per_segment.unwrap_or_else(|| curve.default_samples_per_segment());
    Ok(sample_curve(curve, n)?.into_iter().map(|s| s.position).collect())
}

/// `tau`-pixel-wide mask of a single stem:
/// `dilate(rasterize_polyline(sample_curve(curve)), disk(tau / 2))`.
pub fn generate_stem_mask(
    curve: &StemCurve,
    tau: u32,
    width: u32,
    height: u32,
    samples_per_segment: Option<usize>,
) -> Result<BinaryMask, RasterError> {
    generate_union_mask(
        std::slice::from_ref(curve),
        width,
        height,
        StemMaskParams {
            tau,
            samples_per_segment,
        },
    )
}

/// Union of the stem masks of several curves.
///
/// The centre lines are drawn into one canvas and dilated once; dilation
/// distributes over union so this equals OR-ing the per-stem masks.
pub fn generate_union_mask(
    curves: &[StemCurve],
    width: u32,
    height: u32,
    params: StemMaskParams,
) -> Result<BinaryMask, RasterError> {
    if params.tau < 1 {
        return Err(RasterError::TauTooSmall(params.tau));
    }
    let mut mask = BinaryMask::new(width, height)?;
    for curve in curves {
        draw_polyline(&mut mask, &curve_samples(curve, params.samples_per_segment)?)?;
    }
    Ok(dilate(&mask, &StructuringElement::for_tau(params.tau)))
}
