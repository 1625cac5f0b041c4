//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails.

use std::alloc::{GlobalAlloc, Layout, System};
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::Request;
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stemtrace::request::GenerateRequest;
use stemtrace::service::{router, ServiceConfig};
use stemtrace_core::dataset::{
    parse_annotation, read_mask_png, split_dataset, write_annotation, write_mask_png,
    ControlPointAnnotation,
};
use stemtrace_core::metrics::{confusion, f1, F1Formula};
use stemtrace_core::raster::{dilate, generate_stem_mask, StructuringElement};
use stemtrace_core::spline::{basis, eval_segment, eval_segment_derivative, num_segments, StemCurve};
use stemtrace_core::{BinaryMask, Point2, DEFAULT_TAU};
use stemtrace_oracles::{
    brute_dilate, dense_curve, distance_field, naive_confusion, random_mask, random_points,
    to_points,
};
use tower::ServiceExt;

struct CountingAlloc;

static CURRENT: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);

unsafe impl GlobalAlloc for CountingAlloc {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = unsafe { System.alloc(layout) };
        if !p.is_null() {
            let now = CURRENT.fetch_add(layout.size(), Ordering::Relaxed) + layout.size();
            PEAK.fetch_max(now, Ordering::Relaxed);
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        unsafe { System.dealloc(ptr, layout) };
        CURRENT.fetch_sub(layout.size(), Ordering::Relaxed);
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        let p = unsafe { System.realloc(ptr, layout, new_size) };
        if !p.is_null() {
            if new_size >= layout.size() {
                let now = CURRENT.fetch_add(new_size - layout.size(), Ordering::Relaxed)
                    + (new_size - layout.size());
                PEAK.fetch_max(now, Ordering::Relaxed);
            } else {
                CURRENT.fetch_sub(layout.size() - new_size, Ordering::Relaxed);
            }
        }
        p
    }
}

#[global_allocator]
static GLOBAL: CountingAlloc = CountingAlloc;

/// Peak heap bytes above the level at entry while `f` runs.
fn peak_heap_during<T>(f: impl FnOnce() -> T) -> (T, usize) {
    let base = CURRENT.load(Ordering::Relaxed);
    PEAK.store(base, Ordering::Relaxed);
    let out = f();
    (out, PEAK.load(Ordering::Relaxed).saturating_sub(base))
}

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn pt(x: f64, y: f64) -> Point2 {
    Point2::new(x, y).unwrap()
}

fn secs(d: Duration) -> String {
    format!("{:.3} s", d.as_secs_f64())
}

fn partition_of_unity() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for i in 0..=10_000 {
        let t = i as f64 / 10_000.0;
        let sum: f64 = (0..4).map(|k| basis(k, t).unwrap()).sum();
        worst = worst.max((sum - 1.0).abs());
    }
    let took = start.elapsed();
    let detail = format!("max |sum - 1| = {worst:e} over 10001 t, {}", secs(took));
    if worst <= 1e-12 && took < Duration::from_secs(1) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn constant_curve() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let c = pt(rng.random_range(-1e4..1e4), rng.random_range(-1e4..1e4));
        let t = rng.random_range(0.0..=1.0);
        let p = eval_segment(&[c; 4], t).unwrap();
        worst = worst.max((p.x() - c.x()).abs()).max((p.y() - c.y()).abs());
    }
    let detail = format!("max coordinate error {worst:e} over 1000 t");
    if worst <= 1e-12 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c2_continuity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = [0.0f64; 3];
    for _ in 0..100 {
        let n = rng.random_range(6..=10);
        let pts = to_points(&random_points(&mut rng, n, 0.0, 1000.0));
        let curve = StemCurve::new(pts).unwrap();
        for i in 0..curve.num_segments() - 1 {
            let (a, b) = (curve.segment(i), curve.segment(i + 1));
            let (pa, pb) = (eval_segment(a, 1.0).unwrap(), eval_segment(b, 0.0).unwrap());
            worst[0] = worst[0].max(pa.distance(pb));
            for order in [1u8, 2] {
                let da = eval_segment_derivative(a, 1.0, order).unwrap();
                let db = eval_segment_derivative(b, 0.0, order).unwrap();
                worst[order as usize] = worst[order as usize].max((da.x - db.x).hypot(da.y - db.y));
            }
        }
    }
    let detail = format!(
        "joint mismatch: value {:e}, d1 {:e}, d2 {:e} over 100 curves",
        worst[0], worst[1], worst[2]
    );
    if worst.iter().all(|&w| w <= 1e-9) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn local_control() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let ts: Vec<f64> = (0..=16).map(|i| i as f64 / 16.0).collect();
    let mut checked = 0;
    for trial in 0..100 {
        let n = rng.random_range(6..=12);
        let raw = random_points(&mut rng, n, 0.0, 1000.0);
        let j = rng.random_range(0..n);
        let mut moved = raw.clone();
        moved[j].0 += rng.random_range(-50.0..50.0);
        moved[j].1 += rng.random_range(-50.0..50.0);
        let (a, b) = (
            StemCurve::new(to_points(&raw)).unwrap(),
            StemCurve::new(to_points(&moved)).unwrap(),
        );
        for s in 0..a.num_segments() {
            if s + 3 >= j && s <= j {
                continue;
            }
            for &t in &ts {
                let (p, q) = (a.eval(s, t).unwrap(), b.eval(s, t).unwrap());
                if p.x().to_bits() != q.x().to_bits() || p.y().to_bits() != q.y().to_bits() {
                    return Err(format!("trial {trial}: moving point {j} changed segment {s} at t={t}"));
                }
                checked += 1;
            }
        }
    }
    Ok(format!("100 trials, {checked} samples outside [j-3, j] bit-identical"))
}

fn segment_count() -> Outcome {
    let got = (
        num_segments(4).ok(),
        num_segments(5).ok(),
        StemCurve::new(vec![pt(0.0, 0.0); 4]).map(|c| c.num_segments()).ok(),
        num_segments(3).is_err(),
    );
    let detail = format!("4 -> {:?}, 5 -> {:?}, curve(4) -> {:?}, 3 rejected: {}", got.0, got.1, got.2, got.3);
    if got == (Some(1), Some(2), Some(1), true) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn mask_geometry() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (w, h) = (512u32, 512u32);
    let mut pixels = 0u64;
    for curve_index in 0..50 {
        let n = rng.random_range(4..=8);
        let raw = random_points(&mut rng, n, 0.0, 511.0);
        let curve = StemCurve::new(to_points(&raw)).unwrap();
        let dense = dense_curve(&raw, 4.0);
        for tau in [1u32, 7, 30] {
            let mask = generate_stem_mask(&curve, tau, w, h, None).unwrap();
            let r = (tau / 2) as f64;
            let field = distance_field(&dense, w, h, r + 2.0);
            for y in 0..h {
                for x in 0..w {
                    let d = field[(y * w + x) as usize];
                    let set = mask.get(x, y);
                    if set && d > r + 1.5 {
                        return Err(format!("curve {curve_index} tau {tau}: ({x},{y}) set at distance {d:.3}"));
                    }
                    if !set && d <= r - 1.5 {
                        return Err(format!("curve {curve_index} tau {tau}: ({x},{y}) unset at distance {d:.3}"));
                    }
                }
            }
            pixels += mask.count_ones();
        }
    }
    let took = start.elapsed();
    let detail = format!("50 curves x tau {{1,7,30}} on 512x512, {pixels} set pixels checked, {}", secs(took));
    if took < Duration::from_secs(30) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn dilation_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..100 {
        let m = random_mask(&mut rng, 64, 64, [0.001, 0.01, 0.05, 0.3][trial % 4]);
        let r = [0u32, 1, 3, 7, 15][trial % 5];
        let fast = dilate(&m, &StructuringElement::disk(r));
        if fast.to_bools() != brute_dilate(&m.to_bools(), 64, 64, r) {
            return Err(format!("trial {trial} radius {r} differs from per-pixel dilation"));
        }
    }
    Ok("100 random 64x64 masks equal per-pixel dilation".into())
}

fn metrics_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for trial in 0..100 {
        let density = rng.random_range(0.0..1.0);
        let p = random_mask(&mut rng, 64, 64, density);
        let g = random_mask(&mut rng, 64, 64, 0.3);
        let c = confusion(&p, &g).unwrap();
        if (c.tp, c.fp, c.fn_, c.tn) != naive_confusion(&p.to_bools(), &g.to_bools()) {
            return Err(format!("trial {trial}: counts differ from per-pixel loop"));
        }
    }
    let gt = BinaryMask::from_fn(64, 64, |x, _| x < 16).unwrap();
    let pred = BinaryMask::from_fn(64, 64, |x, _| x < 32).unwrap();
    let c = confusion(&pred, &gt).unwrap();
    let (std, halved) = (f1(&c, F1Formula::Standard), f1(&c, F1Formula::Halved));
    let detail = format!("100 pairs exact; superset F1 standard {std}, PR/(P+R) {halved}");
    if (std - 2.0 / 3.0).abs() <= 1e-12 && (halved - 1.0 / 3.0).abs() <= 1e-12 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn protocol_constants() -> Outcome {
    let ids = |n: usize| (0..n).map(|i| format!("img{i}")).collect::<Vec<_>>();
    let a = split_dataset(&ids(400), 7).map_err(|e| e.to_string())?.sizes();
    let b = split_dataset(&ids(65), 7).map_err(|e| e.to_string())?.sizes();
    let detail = format!("default tau {DEFAULT_TAU}; 400 -> {a:?}; 65 -> {b:?}");
    if DEFAULT_TAU == 30 && a == (320, 40, 40) && b == (53, 6, 6) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_annotation(rng: &mut ChaCha8Rng, i: usize) -> ControlPointAnnotation {
    let (w, h) = (rng.random_range(1..6000u32), rng.random_range(1..4000u32));
    let stems = (0..rng.random_range(1..=4))
        .map(|_| {
            (0..rng.random_range(4..=7))
                .map(|_| pt(rng.random_range(0.0..w as f64), rng.random_range(0.0..h as f64)))
                .collect()
        })
        .collect();
    ControlPointAnnotation {
        image_id: format!("plant_{i:04}"),
        image_width: w,
        image_height: h,
        stems,
        tau: rng.random_range(1..=64),
    }
}

fn round_trips() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for i in 0..200 {
        let a = random_annotation(&mut rng, i);
        let back = parse_annotation(&write_annotation(&a)).map_err(|e| format!("case {i}: {e}"))?;
        if back != a {
            return Err(format!("case {i}: annotation changed on round trip"));
        }
        let (w, h) = (rng.random_range(1..300u32), rng.random_range(1..300u32));
        let density = rng.random_range(0.0..1.0);
        let m = random_mask(&mut rng, w, h, density);
        let png = write_mask_png(&m).map_err(|e| e.to_string())?;
        if read_mask_png(&png).map_err(|e| e.to_string())? != m {
            return Err(format!("case {i}: {w}x{h} mask changed on PNG round trip"));
        }
    }
    Ok("200 annotations and 200 masks equal after write/read".into())
}

fn scale_smoke() -> Outcome {
    let (w, h) = (5496u32, 3670u32);
    let stem = |dx: f64| {
        StemCurve::new(vec![
            pt(2700.0 + dx, 3600.0),
            pt(2650.0 + dx, 2500.0),
            pt(2800.0 + dx, 1400.0),
            pt(2750.0 + dx, 500.0),
            pt(2900.0 + dx, 60.0),
        ])
        .unwrap()
    };
    let start = Instant::now();
    let (mask, peak) = peak_heap_during(|| generate_stem_mask(&stem(0.0), 30, w, h, None).unwrap());
    let gen_time = start.elapsed();

    let other = generate_stem_mask(&stem(12.0), 30, w, h, None).unwrap();
    let (pa, pb) = (write_mask_png(&mask).unwrap(), write_mask_png(&other).unwrap());
    let start = Instant::now();
    let counts = confusion(&read_mask_png(&pa).unwrap(), &read_mask_png(&pb).unwrap()).unwrap();
    let eval_time = start.elapsed();

    let mb = peak as f64 / (1024.0 * 1024.0);
    let detail = format!(
        "generate {} with peak heap {mb:.1} MiB; evaluate {} (tp {})",
        secs(gen_time),
        secs(eval_time),
        counts.tp
    );
    if gen_time < Duration::from_secs(2) && peak < 200 * 1024 * 1024 && eval_time < Duration::from_secs(2) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn cli_http_parity() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| e.to_string())?;
    let app = router(&ServiceConfig::default());
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for i in 0..20 {
        let mut a = random_annotation(&mut rng, i);
        a.image_width = rng.random_range(16..800);
        a.image_height = rng.random_range(16..800);
        for stem in &mut a.stems {
            for p in stem.iter_mut() {
                *p = pt(
                    rng.random_range(0.0..a.image_width as f64),
                    rng.random_range(0.0..a.image_height as f64),
                );
            }
        }
        let path = dir.path().join(format!("{}.json", a.image_id));
        std::fs::write(&path, write_annotation(&a)).map_err(|e| e.to_string())?;

        let clamp = rng.random_bool(0.5);
        let sps = rng.random_bool(0.5).then(|| rng.random_range(2..80usize));
        let tau_override = rng.random_bool(0.5).then(|| rng.random_range(1..40u32));

        let mut args = vec!["preview".to_string(), "--annotation".into(), path.display().to_string()];
        if clamp {
            args.push("--clamp-ends".into());
        }
        if let Some(n) = sps {
            args.extend(["--samples-per-segment".into(), n.to_string()]);
        }
        if let Some(t) = tau_override {
            args.extend(["--tau".into(), t.to_string()]);
        }
        let out = Command::new(env!("CARGO_BIN_EXE_stemtrace"))
            .args(&args)
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("request {i}: preview failed: {}", String::from_utf8_lossy(&out.stderr)));
        }

        let mut req = GenerateRequest::from_annotation(&a, clamp, sps);
        if let Some(t) = tau_override {
            req.tau = t;
        }
        let body = serde_json::to_vec(&req).map_err(|e| e.to_string())?;
        let http = runtime.block_on(async {
            let resp = app
                .clone()
                .oneshot(
                    Request::post("/v1/mask")
                        .header("content-type", "application/json")
                        .body(Body::from(body))
                        .unwrap(),
                )
                .await
                .unwrap();
            (resp.status(), resp.into_body().collect().await.unwrap().to_bytes())
        });
        if !http.0.is_success() {
            return Err(format!("request {i}: HTTP status {}", http.0));
        }
        if http.1.as_ref() != out.stdout.as_slice() {
            return Err(format!("request {i}: preview and HTTP bytes differ"));
        }
    }
    Ok("20 randomized requests byte-identical".into())
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("basis partition of unity", partition_of_unity),
        ("constant-curve exactness", constant_curve),
        ("C2 continuity at joints", c2_continuity),
        ("local control", local_control),
        ("segment count", segment_count),
        ("mask geometry oracle", mask_geometry),
        ("dilation oracle", dilation_oracle),
        ("metrics oracle", metrics_oracle),
        ("protocol constants", protocol_constants),
        ("round-trips", round_trips),
        ("scale smoke test", scale_smoke),
        ("CLI/HTTP parity", cli_http_parity),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("[PASS] {name} ({detail})"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {name} ({detail})");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
