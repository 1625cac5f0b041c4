use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stemtrace_core::metrics::{
    aggregate, confusion, f1, precision, recall, Aggregation, ConfusionCounts, F1Formula,
};
use stemtrace_core::BinaryMask;
use stemtrace_oracles::{naive_confusion, random_mask};

fn crop(m: &BinaryMask, x0: u32, y0: u32, w: u32, h: u32) -> BinaryMask {
    BinaryMask::from_fn(w, h, |x, y| m.get(x0 + x, y0 + y)).unwrap()
}

#[test]
fn confusion_matches_naive_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..100 {
        let density = (i % 10) as f64 / 10.0;
        let pred = random_mask(&mut rng, 64, 64, density);
        let gt = random_mask(&mut rng, 64, 64, 0.3);
        let c = confusion(&pred, &gt).unwrap();
        let (tp, fp, fn_, tn) = naive_confusion(&pred.to_bools(), &gt.to_bools());
        assert_eq!(c, ConfusionCounts { tp, fp, fn_, tn });
    }
}

#[test]
fn superset_prediction() {
    let gt = BinaryMask::from_fn(10, 10, |x, y| y == 4 && x < 10).unwrap();
    let pred = BinaryMask::from_fn(10, 10, |x, y| (y == 4 || y == 5) && x < 10).unwrap();
    let c = confusion(&pred, &gt).unwrap();
    assert_eq!((c.tp, c.fp, c.fn_), (10, 10, 0));
    assert_eq!(precision(&c), 0.5);
    assert_eq!(recall(&c), 1.0);
    assert!((f1(&c, F1Formula::Standard) - 2.0 / 3.0).abs() <= 1e-12);
    assert!((f1(&c, F1Formula::Halved) - 1.0 / 3.0).abs() <= 1e-12);
}

fn any_counts() -> impl Strategy<Value = ConfusionCounts> {
    let n = prop_oneof![Just(0u64), 0u64..5, 0u64..(1 << 40)];
    (n.clone(), n.clone(), n.clone(), n).prop_map(|(tp, fp, fn_, tn)| ConfusionCounts { tp, fp, fn_, tn })
}

proptest! {
    #[test]
    fn swapping_masks_swaps_errors(seed in any::<u64>(), w in 1u32..90, h in 1u32..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_mask(&mut rng, w, h, 0.4);
        let b = random_mask(&mut rng, w, h, 0.4);
        let ab = confusion(&a, &b).unwrap();
        let ba = confusion(&b, &a).unwrap();
        prop_assert_eq!(ab.transposed(), ba);
        prop_assert_eq!(precision(&ab), recall(&ba));
        prop_assert_eq!(ab.total(), w as u64 * h as u64);
    }

    #[test]
    fn tiling_sums_exactly(seed in any::<u64>(), cut_x in 1u32..69, cut_y in 1u32..39) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (w, h) = (70, 40);
        let a = random_mask(&mut rng, w, h, 0.3);
        let b = random_mask(&mut rng, w, h, 0.6);
        let whole = confusion(&a, &b).unwrap();
        let tiles = [
            (0, 0, cut_x, cut_y),
            (cut_x, 0, w - cut_x, cut_y),
            (0, cut_y, cut_x, h - cut_y),
            (cut_x, cut_y, w - cut_x, h - cut_y),
        ];
        let sum: ConfusionCounts = tiles
            .iter()
            .map(|&(x, y, tw, th)| confusion(&crop(&a, x, y, tw, th), &crop(&b, x, y, tw, th)).unwrap())
            .sum();
        prop_assert_eq!(sum, whole);
    }

    #[test]
    fn adding_true_pixel_never_lowers_recall(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gt = random_mask(&mut rng, 30, 30, 0.3);
        let mut pred = random_mask(&mut rng, 30, 30, 0.2);
        let before = recall(&confusion(&pred, &gt).unwrap());
        let missed = gt.iter_ones().find(|&(x, y)| !pred.get(x, y));
        if let Some((x, y)) = missed {
            pred.set(x, y, true);
            prop_assert!(recall(&confusion(&pred, &gt).unwrap()) >= before);
        }
    }

    #[test]
    fn metrics_finite_and_in_range(c in any_counts()) {
        let (p, r) = (precision(&c), recall(&c));
        let (fs, fh) = (f1(&c, F1Formula::Standard), f1(&c, F1Formula::Halved));
        for v in [p, r, fs] {
            prop_assert!(v.is_finite() && (0.0..=1.0).contains(&v));
        }
        prop_assert!(fh.is_finite() && (0.0..=0.5).contains(&fh));
        if p > 0.0 && r > 0.0 {
            prop_assert!((fs - 2.0 / (1.0 / p + 1.0 / r)).abs() < 1e-12);
            prop_assert!(p.min(r) - 1e-12 <= fs && fs <= p.max(r) + 1e-12);
        }
    }

    #[test]
    fn micro_recomputes_from_pooled_counts(list in prop::collection::vec(any_counts(), 1..6)) {
        let micro = aggregate(&list, Aggregation::Micro).unwrap();
        let pooled: ConfusionCounts = list.iter().copied().sum();
        prop_assert_eq!(micro.counts, pooled);
        prop_assert_eq!(micro.scores.precision, precision(&pooled));
        let macro_ = aggregate(&list, Aggregation::Macro).unwrap();
        for v in [macro_.scores.precision, macro_.scores.recall, macro_.scores.f1_standard] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}
