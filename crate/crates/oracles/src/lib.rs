//! Slow, obviously-correct reference implementations for tests.
//!
//! Nothing here calls into the code it is used to check: the spline is
//! evaluated with the textbook matrix form, lines with the incremental
//! decision-variable loop, dilation and confusion per pixel.

use rand::Rng;
use stemtrace_core::{BinaryMask, Point2};

/// Uniform cubic B-spline basis matrix, scaled by 6; rows multiply
/// `[t³, t², t, 1]`.
const BSPLINE_MATRIX: [[f64; 4]; 4] = [
    [-1.0, 3.0, -3.0, 1.0],
    [3.0, -6.0, 3.0, 0.0],
    [-3.0, 0.0, 3.0, 0.0],
    [1.0, 4.0, 1.0, 0.0],
];

pub fn matrix_weights(t: f64) -> [f64; 4] {
    let powers = [t * t * t, t * t, t, 1.0];
    let mut w = [0.0; 4];
    for (k, wk) in w.iter_mut().enumerate() {
        *wk = (0..4).map(|row| powers[row] * BSPLINE_MATRIX[row][k]).sum::<f64>() / 6.0;
    }
    w
}

pub fn matrix_eval(ctrl: &[(f64, f64)], t: f64) -> (f64, f64) {
    let w = matrix_weights(t);
    let x = (0..4).map(|k| w[k] * ctrl[k].0).sum();
    let y = (0..4).map(|k| w[k] * ctrl[k].1).sum();
    (x, y)
}

/// Central finite difference of [`matrix_eval`] in `t`, clamped to [0, 1].
pub fn finite_difference(ctrl: &[(f64, f64)], t: f64, order: u8) -> (f64, f64) {
    let h = 1e-4;
    let f = |t: f64| matrix_eval(ctrl, t);
    match order {
        1 => {
            let (a, b) = (f(t + h), f(t - h));
            ((a.0 - b.0) / (2.0 * h), (a.1 - b.1) / (2.0 * h))
        }
        _ => {
            let (a, m, b) = (f(t + h), f(t), f(t - h));
            (
                (a.0 - 2.0 * m.0 + b.0) / (h * h),
                (a.1 - 2.0 * m.1 + b.1) / (h * h),
            )
        }
    }
}

/// Dense polyline along the whole curve with at least `per_pixel` vertices
/// per pixel of arc length (each segment's arc length is bounded by its
/// control polygon length).
pub fn dense_curve(points: &[(f64, f64)], per_pixel: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for seg in points.windows(4) {
        let polygon: f64 = seg
            .windows(2)
            .map(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1))
            .sum();
        let n = (polygon * per_pixel).ceil() as usize + 8;
        for j in 0..=n {
            out.push(matrix_eval(seg, j as f64 / n as f64));
        }
    }
    out
}

/// Incremental Bresenham over all octants, endpoints included.
pub fn bresenham(a: (i64, i64), b: (i64, i64)) -> Vec<(i64, i64)> {
    let (dx, dy) = ((b.0 - a.0).abs(), (b.1 - a.1).abs());
    let (sx, sy) = ((b.0 - a.0).signum(), (b.1 - a.1).signum());
    let steep = dy > dx;
    let (d_major, d_minor) = if steep { (dy, dx) } else { (dx, dy) };
    let (mut x, mut y) = a;
    let mut decision = 2 * d_minor - d_major;
    let mut out = Vec::with_capacity(d_major as usize + 1);
    for _ in 0..=d_major {
        out.push((x, y));
        if decision > 0 {
            if steep {
                x += sx;
            } else {
                y += sy;
            }
            decision -= 2 * d_major;
        }
        decision += 2 * d_minor;
        if steep {
            y += sy;
        } else {
            x += sx;
        }
    }
    out
}

fn round_half_away(v: f64) -> i64 {
    if v >= 0.0 {
        (v + 0.5).floor() as i64
    } else {
        -((-v + 0.5).floor() as i64)
    }
}

/// Row-major booleans of the polyline drawn with [`bresenham`], pixels off
/// the canvas discarded.
pub fn polyline_pixels(samples: &[(f64, f64)], width: u32, height: u32) -> Vec<bool> {
    let mut bits = vec![false; width as usize * height as usize];
    let px: Vec<(i64, i64)> = samples
        .iter()
        .map(|&(x, y)| (round_half_away(x), round_half_away(y)))
        .collect();
    let mut plot = |(x, y): (i64, i64)| {
        if x >= 0 && y >= 0 && x < width as i64 && y < height as i64 {
            bits[y as usize * width as usize + x as usize] = true;
        }
    };
    plot(px[0]);
    for w in px.windows(2) {
        for p in bresenham(w[0], w[1]) {
            plot(p);
        }
    }
    bits
}

/// Set pixels form one 8-connected component (an empty set counts).
pub fn is_8_connected(bits: &[bool], width: u32, height: u32) -> bool {
    let (w, h) = (width as i64, height as i64);
    let Some(start) = bits.iter().position(|&b| b) else {
        return true;
    };
    let mut seen = vec![false; bits.len()];
    let mut stack = vec![start];
    seen[start] = true;
    let mut reached = 0;
    while let Some(i) = stack.pop() {
        reached += 1;
        let (x, y) = (i as i64 % w, i as i64 / w);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w || ny >= h {
                    continue;
                }
                let j = (ny * w + nx) as usize;
                if bits[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    reached == bits.iter().filter(|&&b| b).count()
}

/// Per-pixel definition of dilation by the disk `dx² + dy² <= r²`.
pub fn brute_dilate(bits: &[bool], width: u32, height: u32, radius: u32) -> Vec<bool> {
    let (w, h, r) = (width as i64, height as i64, radius as i64);
    let mut out = vec![false; bits.len()];
    for y in 0..h {
        for x in 0..w {
            'search: for dy in -r..=r {
                for dx in -r..=r {
                    if dx * dx + dy * dy > r * r {
                        continue;
                    }
                    let (sx, sy) = (x - dx, y - dy);
                    if sx >= 0 && sy >= 0 && sx < w && sy < h && bits[(sy * w + sx) as usize] {
                        out[(y * w + x) as usize] = true;
                        break 'search;
                    }
                }
            }
        }
    }
    out
}

pub fn disk_cardinality(radius: u32) -> usize {
    let r = radius as i64;
    (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
        .filter(|(dx, dy)| dx * dx + dy * dy <= r * r)
        .count()
}

/// `(tp, fp, fn, tn)` by looking at every pixel.
pub fn naive_confusion(pred: &[bool], gt: &[bool]) -> (u64, u64, u64, u64) {
    let mut c = (0, 0, 0, 0);
    for (&p, &g) in pred.iter().zip(gt) {
        match (p, g) {
            (true, true) => c.0 += 1,
            (true, false) => c.1 += 1,
            (false, true) => c.2 += 1,
            (false, false) => c.3 += 1,
        }
    }
    c
}

fn point_segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (vx, vy) = (b.0 - a.0, b.1 - a.1);
    let len2 = vx * vx + vy * vy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * vx + (p.1 - a.1) * vy) / len2).clamp(0.0, 1.0)
    };
    (p.0 - a.0 - t * vx).hypot(p.1 - a.1 - t * vy)
}

/// Exact Euclidean distance from every pixel centre to the polyline, for
/// distances up to `reach`; farther pixels get `f64::INFINITY`.
///
/// Every polyline piece updates all pixels in its bounding box grown by
/// `reach`, so any pixel within `reach` sees the piece nearest to it.
pub fn distance_field(polyline: &[(f64, f64)], width: u32, height: u32, reach: f64) -> Vec<f64> {
    let (w, h) = (width as i64, height as i64);
    let mut d = vec![f64::INFINITY; w as usize * h as usize];
    let pieces: Vec<((f64, f64), (f64, f64))> = if polyline.len() == 1 {
        vec![(polyline[0], polyline[0])]
    } else {
        polyline.windows(2).map(|s| (s[0], s[1])).collect()
    };
    for (a, b) in pieces {
        let x0 = ((a.0.min(b.0) - reach).floor() as i64).max(0);
        let x1 = ((a.0.max(b.0) + reach).ceil() as i64).min(w - 1);
        let y0 = ((a.1.min(b.1) - reach).floor() as i64).max(0);
        let y1 = ((a.1.max(b.1) + reach).ceil() as i64).min(h - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let dist = point_segment_distance((x as f64, y as f64), a, b);
                let slot = &mut d[(y * w + x) as usize];
                if dist < *slot {
                    *slot = dist;
                }
            }
        }
    }
    for v in d.iter_mut() {
        if *v > reach {
            *v = f64::INFINITY;
        }
    }
    d
}

pub fn random_mask(rng: &mut impl Rng, width: u32, height: u32, density: f64) -> BinaryMask {
    BinaryMask::from_fn(width, height, |_, _| rng.random_bool(density)).unwrap()
}

pub fn random_points(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    (0..n)
        .map(|_| (rng.random_range(lo..hi), rng.random_range(lo..hi)))
        .collect()
}

pub fn to_points(raw: &[(f64, f64)]) -> Vec<Point2> {
    raw.iter().map(|&(x, y)| Point2::new(x, y).unwrap()).collect()
}

pub fn to_tuples(points: &[Point2]) -> Vec<(f64, f64)> {
    points.iter().map(|p| (p.x(), p.y())).collect()
}
