//! Full class-inclusion objective against central finite differences.

use openset_core::losses::{evaluate, BatchPair, LossConfig, LossFamily};
use openset_core::model::{HeadKind, Model};
use openset_core::{Graph, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const STEP: f64 = 1e-6;
const TOL: f64 = 1e-4;
const DENOM_FLOOR: f64 = 1e-5;

struct Problem {
    model: Model,
    known: Tensor,
    labels: Vec<usize>,
    background: Tensor,
}

fn problem(seed: u64, classes: usize, known_rows: usize) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = |n: usize| {
        (0..n)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect::<Vec<_>>()
    };
    let known = Tensor::matrix(known_rows, 2, normal(2 * known_rows)).unwrap();
    let background = Tensor::matrix(4, 2, normal(8)).unwrap();
    let labels = (0..known_rows).map(|i| i % classes).collect();
    Problem {
        model: Model::init(&[2, 4, 3], classes, HeadKind::Distance, seed).unwrap(),
        known,
        labels,
        background,
    }
}

fn loss_and_grads(p: &Problem, model: &Model) -> (f64, Vec<Vec<f64>>) {
    let mut g = Graph::new();
    let vars = model.register(&mut g);
    let pair = BatchPair {
        known: &p.known,
        labels: &p.labels,
        background: Some(&p.background),
    };
    let terms = evaluate(
        &mut g,
        model,
        &vars,
        &pair,
        &LossConfig::new(LossFamily::ClassInclusion, 1.0),
    )
    .unwrap();
    g.backward(terms.total).unwrap();
    let mut leaves: Vec<_> = vars.layers.iter().flat_map(|&(w, b)| [w, b]).collect();
    if let openset_core::model::HeadVars::Distance { anchors, .. } = vars.head {
        leaves.push(anchors);
    }
    let grads = leaves
        .iter()
        .map(|&v| g.grad(v).unwrap().data().to_vec())
        .collect();
    (g.value(terms.total).data()[0], grads)
}

fn loss_at(p: &Problem, model: &Model) -> f64 {
    loss_and_grads(p, model).0
}

/// Checks every parameter entry and returns how many were compared.
fn check(p: &Problem, seed: u64) -> usize {
    let (_, grads) = loss_and_grads(p, &p.model);
    let mut checked = 0;
    for (t, grad) in grads.iter().enumerate() {
        for (i, &analytic) in grad.iter().enumerate() {
            let mut plus = p.model.clone();
            plus.parameters_mut()[t].data_mut()[i] += STEP;
            let mut minus = p.model.clone();
            minus.parameters_mut()[t].data_mut()[i] -= STEP;
            let fd = (loss_at(p, &plus) - loss_at(p, &minus)) / (2.0 * STEP);
            let rel = (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(DENOM_FLOOR);
            assert!(
                rel <= TOL,
                "seed {seed} tensor {t}[{i}]: analytic {analytic}, fd {fd}, rel {rel:e}"
            );
            checked += 1;
        }
    }
    checked
}

#[test]
fn three_anchor_head_over_ten_seeds() {
    for seed in 0..10 {
        // 2·4 + 4 + 4·3 + 3 + 3·3
        assert_eq!(check(&problem(seed, 3, 6), seed), 36);
    }
}

#[test]
fn two_class_four_sample_instance() {
    for seed in 0..10 {
        assert_eq!(check(&problem(seed, 2, 4), seed), 33);
    }
}
