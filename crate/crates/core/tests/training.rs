use openset_core::data::{generate, SampleSet, SyntheticSpec};
use openset_core::losses::{LossConfig, LossFamily};
use openset_core::model::{HeadKind, Model};
use openset_core::trainer::{train, OptimConfig};

fn mean_nearest_sq_distance(model: &Model, set: &SampleSet) -> f64 {
    let head = model.distance_head().unwrap();
    let total: f64 = set
        .rows()
        .map(|x| {
            let z = model.latent(x).unwrap();
            head.sq_distances(&z).unwrap().into_iter().fold(f64::INFINITY, f64::min)
        })
        .sum();
    total / set.len() as f64
}

#[test]
fn class_inclusion_pushes_background_away_from_anchors() {
    let bundle = generate(&SyntheticSpec::default()).unwrap();
    let model = Model::init(&[2, 32, 32, 8], bundle.classes(), HeadKind::Distance, 0).unwrap();
    let before = mean_nearest_sq_distance(&model, &bundle.background);
    let (trained, trace) = train(
        &bundle,
        model,
        &LossConfig::new(LossFamily::ClassInclusion, 1.0),
        &OptimConfig::default(),
    )
    .unwrap();
    let after = mean_nearest_sq_distance(&trained, &bundle.background);
    assert!(after > before, "{before} -> {after}");
    assert_eq!(trace.records.len(), OptimConfig::default().epochs);
}
