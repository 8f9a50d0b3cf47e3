use openset_core::autodiff::sq_euclidean;
use openset_core::model::{argmax, DistanceHead, OpenSetLabel, SoftmaxHead};
use openset_core::Tensor;
use proptest::prelude::*;

fn anchors_strategy() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
    (1..6usize, 1..5usize).prop_flat_map(|(c, n)| {
        (Just(c), Just(n), prop::collection::vec(-5.0f64..5.0, c * n))
    })
}

proptest! {
    #[test]
    fn distance_argmax_ignores_uniform_shifts(
        (c, n, mu) in anchors_strategy(),
        z in prop::collection::vec(-5.0f64..5.0, 4),
        scale in 0.01f64..100.0,
    ) {
        let head = DistanceHead::new(Tensor::matrix(c, n, mu.clone()).unwrap()).unwrap();
        let z = &z[..n.min(4)];
        prop_assume!(z.len() == n);
        let base = argmax(&head.posterior(z).unwrap());

        // scaling every prior by the same factor leaves the normalized priors unchanged
        let priors = vec![scale / c as f64; c];
        let total: f64 = priors.iter().sum();
        let scaled: Vec<f64> = priors.iter().map(|p| p / total).collect();
        let rescaled = DistanceHead::with_priors(Tensor::matrix(c, n, mu).unwrap(), &scaled).unwrap();
        prop_assert_eq!(argmax(&rescaled.posterior(z).unwrap()), base);

        // a constant added to every squared distance cancels in the softmax
        let d = head.sq_distances(z).unwrap();
        let shifted: Vec<f64> = d.iter().map(|v| -(v + scale)).collect();
        prop_assert_eq!(argmax(&shifted), base);
    }

    #[test]
    fn accepted_points_lie_within_the_threshold_radius(
        (c, n, mu) in anchors_strategy(),
        points in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 4), 1..40),
        radius in 0.0f64..6.0,
    ) {
        let head = DistanceHead::new(Tensor::matrix(c, n, mu).unwrap()).unwrap();
        let tau = -radius * radius;
        for p in &points {
            let z = &p[..n];
            let decision = head.decide(z, tau).unwrap();
            let nearest = (0..c)
                .map(|k| sq_euclidean(z, head.anchor(k)))
                .fold(f64::INFINITY, f64::min);
            if decision.label == OpenSetLabel::Unknown {
                prop_assert!(nearest > radius * radius);
            } else {
                prop_assert!(nearest <= radius * radius);
            }
        }
    }

    #[test]
    fn rejections_grow_with_threshold(
        (c, n, mu) in anchors_strategy(),
        points in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 4), 1..30),
    ) {
        let head = DistanceHead::new(Tensor::matrix(c, n, mu).unwrap()).unwrap();
        let mut prev = 0;
        for step in 0..=40 {
            let tau = -40.0 + f64::from(step);
            let rejected = points
                .iter()
                .filter(|p| head.decide(&p[..n], tau).unwrap().is_rejected())
                .count();
            prop_assert!(rejected >= prev);
            prev = rejected;
        }
    }
}

#[test]
fn softmax_rule_accepts_arbitrarily_distant_points() {
    let w = Tensor::matrix(3, 2, vec![1.0, 0.0, -0.5, 0.8, -0.5, -0.8]).unwrap();
    let head = SoftmaxHead::new(w, Tensor::matrix(1, 3, vec![0.0; 3]).unwrap()).unwrap();
    for alpha in [10.0, 1e3, 1e6, 1e9, 1e12] {
        let z = [alpha, 0.0];
        let d = head.decide(&z, 0.9).unwrap();
        assert_eq!(d.label, OpenSetLabel::Known(0), "alpha = {alpha}");
    }
}

#[test]
fn exact_ties_resolve_to_lowest_index() {
    let head = DistanceHead::new(Tensor::matrix(3, 1, vec![-1.0, 1.0, 1.0]).unwrap()).unwrap();
    for _ in 0..10 {
        assert_eq!(head.decide(&[0.0], 0.0).unwrap().closed_set_class, 0);
        assert_eq!(head.decide(&[1.0], 0.0).unwrap().closed_set_class, 1);
    }
}
