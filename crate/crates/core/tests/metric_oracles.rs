use openset_core::metrics::{
    aupr, auroc, fpr_at_tpr, macro_f1, oscr_ccr_at_fpr, ScoredSample,
};
use proptest::prelude::*;

// Brute-force oracles: every candidate threshold is re-scored from scratch.

fn pairwise_auroc(s: &[ScoredSample]) -> f64 {
    let known: Vec<f64> = s.iter().filter(|x| x.is_known()).map(|x| x.score).collect();
    let unknown: Vec<f64> = s.iter().filter(|x| !x.is_known()).map(|x| x.score).collect();
    let mut doubled = 0u64;
    for &k in &known {
        for &u in &unknown {
            if k > u {
                doubled += 2;
            } else if k == u {
                doubled += 1;
            }
        }
    }
    doubled as f64 / (2 * known.len() * unknown.len()) as f64
}

fn thresholds_desc(s: &[ScoredSample]) -> Vec<f64> {
    let mut t: Vec<f64> = s.iter().map(|x| x.score).collect();
    t.sort_by(|a, b| b.total_cmp(a));
    t.dedup();
    t
}

fn rates_at(s: &[ScoredSample], t: f64) -> (f64, f64, f64, usize) {
    let nk = s.iter().filter(|x| x.is_known()).count() as f64;
    let nu = s.len() as f64 - nk;
    let tp = s.iter().filter(|x| x.is_known() && x.score >= t).count();
    let fp = s.iter().filter(|x| !x.is_known() && x.score >= t).count();
    let cc = s.iter().filter(|x| x.is_correct() && x.score >= t).count();
    (tp as f64 / nk, fp as f64 / nu, cc as f64 / nk, tp + fp)
}

fn brute_aupr(s: &[ScoredSample]) -> f64 {
    let mut prev = 0.0;
    let mut area = 0.0;
    for t in thresholds_desc(s) {
        let (tpr, _, _, accepted) = rates_at(s, t);
        let tp = s.iter().filter(|x| x.is_known() && x.score >= t).count();
        let precision = tp as f64 / accepted as f64;
        area += (tpr - prev) * precision;
        prev = tpr;
    }
    area
}

fn brute_fpr(s: &[ScoredSample], target: f64) -> f64 {
    thresholds_desc(s)
        .into_iter()
        .map(|t| rates_at(s, t))
        .filter(|r| r.0 >= target)
        .map(|r| r.1)
        .fold(f64::INFINITY, f64::min)
}

fn brute_oscr(s: &[ScoredSample], target: f64) -> f64 {
    let mut points = vec![(0.0, 0.0)];
    points.extend(thresholds_desc(s).into_iter().map(|t| {
        let (_, fpr, ccr, _) = rates_at(s, t);
        (fpr, ccr)
    }));
    let last_below = points.iter().rposition(|p| p.0 <= target).unwrap();
    match points.get(last_below + 1) {
        None => points[last_below].1,
        Some(&(f1, c1)) => {
            let (f0, c0) = points[last_below];
            c0 + (target - f0) / (f1 - f0) * (c1 - c0)
        }
    }
}

/// Scores drawn from a small integer grid so ties are common.
fn instance(max_len: usize) -> impl Strategy<Value = Vec<ScoredSample>> {
    (1..max_len, 1..max_len).prop_flat_map(|(k, u)| {
        (
            prop::collection::vec((0..8i32, 0..3usize, 0..3usize), k),
            prop::collection::vec((0..8i32, 0..3usize), u),
        )
            .prop_map(|(ks, us)| {
                let mut v: Vec<ScoredSample> = ks
                    .into_iter()
                    .map(|(s, p, y)| ScoredSample::known(f64::from(s) * 0.25, p, y))
                    .collect();
                v.extend(us.into_iter().map(|(s, p)| ScoredSample::unknown(f64::from(s) * 0.25, p)));
                v
            })
    })
}

proptest! {
    #[test]
    fn sweep_metrics_equal_brute_force(s in instance(25), target in 0.0f64..=1.0) {
        prop_assert_eq!(auroc(&s).unwrap(), pairwise_auroc(&s));
        prop_assert_eq!(aupr(&s).unwrap(), brute_aupr(&s));
        prop_assert_eq!(fpr_at_tpr(&s, 0.95).unwrap(), brute_fpr(&s, 0.95));
        prop_assert_eq!(oscr_ccr_at_fpr(&s, target).unwrap(), brute_oscr(&s, target));
    }

    #[test]
    fn auroc_invariant_under_monotone_maps(s in instance(25), a in 0.1f64..5.0, b in -3.0f64..3.0) {
        let base = auroc(&s).unwrap();
        let affine: Vec<_> = s.iter().map(|x| ScoredSample { score: a * x.score + b, ..*x }).collect();
        let exp: Vec<_> = s.iter().map(|x| ScoredSample { score: x.score.exp(), ..*x }).collect();
        prop_assert_eq!(auroc(&affine).unwrap(), base);
        prop_assert_eq!(auroc(&exp).unwrap(), base);
    }

    #[test]
    fn auroc_flips_with_labels_without_ties(
        known in prop::collection::vec(-1e3f64..1e3, 1..20),
        unknown in prop::collection::vec(-1e3f64..1e3, 1..20),
    ) {
        let mut s: Vec<_> = known.iter().map(|&x| ScoredSample::known(x, 0, 0)).collect();
        s.extend(unknown.iter().map(|&x| ScoredSample::unknown(x, 0)));
        let mut scores: Vec<f64> = s.iter().map(|x| x.score).collect();
        scores.sort_by(f64::total_cmp);
        scores.dedup();
        prop_assume!(scores.len() == s.len());
        let flipped: Vec<_> = s
            .iter()
            .map(|x| match x.label {
                Some(_) => ScoredSample::unknown(x.score, 0),
                None => ScoredSample::known(x.score, 0, 0),
            })
            .collect();
        prop_assert!((auroc(&flipped).unwrap() - (1.0 - auroc(&s).unwrap())).abs() < 1e-12);
    }

    #[test]
    fn oscr_nonincreasing_as_target_decreases(s in instance(25), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(oscr_ccr_at_fpr(&s, lo).unwrap() <= oscr_ccr_at_fpr(&s, hi).unwrap() + 1e-15);
    }

    #[test]
    fn metrics_stay_in_unit_interval(s in instance(25), tau in -1.0f64..3.0) {
        for v in [
            auroc(&s).unwrap(),
            aupr(&s).unwrap(),
            fpr_at_tpr(&s, 0.95).unwrap(),
            oscr_ccr_at_fpr(&s, 0.1).unwrap(),
            macro_f1(&s, tau, 3).unwrap(),
        ] {
            prop_assert!((0.0..=1.0).contains(&v), "{v}");
        }
    }
}

#[test]
fn fpr_on_randomized_ten_by_ten() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let mut s: Vec<_> = (0..10).map(|_| ScoredSample::known(rng.random::<f64>(), 0, 0)).collect();
        s.extend((0..10).map(|_| ScoredSample::unknown(rng.random::<f64>(), 0)));
        assert_eq!(fpr_at_tpr(&s, 0.95).unwrap(), brute_fpr(&s, 0.95));
    }
}

#[test]
fn oscr_five_by_five_constructed() {
    // known scores 9,7,5,3,1 (two misclassified), unknown scores 8,6,4,2,0
    let s = vec![
        ScoredSample::known(9.0, 0, 0),
        ScoredSample::known(7.0, 1, 0),
        ScoredSample::known(5.0, 1, 1),
        ScoredSample::known(3.0, 2, 2),
        ScoredSample::known(1.0, 0, 2),
        ScoredSample::unknown(8.0, 0),
        ScoredSample::unknown(6.0, 0),
        ScoredSample::unknown(4.0, 0),
        ScoredSample::unknown(2.0, 0),
        ScoredSample::unknown(0.0, 0),
    ];
    for target in [0.0, 0.1, 0.2, 0.3, 0.5, 0.9, 1.0] {
        assert_eq!(oscr_ccr_at_fpr(&s, target).unwrap(), brute_oscr(&s, target), "{target}");
    }
    // between (0, 0.2) and (0.2, 0.2): flat
    assert_eq!(oscr_ccr_at_fpr(&s, 0.1).unwrap(), 0.2);
}
