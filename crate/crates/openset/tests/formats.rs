use openset::config::ExperimentConfig;
use openset::csv_io::{parse_samples, write_samples, read_samples, write_samples_to, LabelColumn};
use openset::Error;
use openset_core::data::SampleSet;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bits(set: &SampleSet) -> Vec<u64> {
    set.features().iter().map(|x| x.to_bits()).collect()
}

#[test]
fn thousand_rows_round_trip_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let features: Vec<f64> = (0..3000)
        .map(|i| match i % 5 {
            0 => rng.random::<f64>(),
            1 => -rng.random::<f64>() * 1e300,
            2 => rng.random::<f64>() * 1e-300,
            3 => f64::from(rng.random::<i32>()),
            _ => 0.1 + rng.random::<f64>(),
        })
        .collect();
    let labels: Vec<usize> = (0..1000).map(|i| i % 7).collect();
    let set = SampleSet::new(3, features, Some(labels)).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rows.csv");
    write_samples(&path, &set).unwrap();
    let back = read_samples(&path, Some(3), LabelColumn::Required).unwrap();
    assert_eq!(back.len(), 1000);
    assert_eq!(bits(&back), bits(&set));
    assert_eq!(back.labels(), set.labels());
}

#[test]
fn unlabeled_files_round_trip() {
    let set = SampleSet::new(2, vec![1.5, -2.0, 0.0, 3.25], None).unwrap();
    let mut out = Vec::new();
    write_samples_to(&mut out, &set).unwrap();
    assert_eq!(String::from_utf8(out.clone()).unwrap(), "f0,f1\n1.5,-2\n0,3.25\n");
    let back = parse_samples(out.as_slice(), None, LabelColumn::Forbidden).unwrap();
    assert_eq!(back, set);
}

proptest! {
    #[test]
    fn any_finite_table_round_trips(
        dim in 1usize..5,
        rows in prop::collection::vec(prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO, 5), 1..40),
        labelled in any::<bool>(),
    ) {
        let features: Vec<f64> = rows.iter().flat_map(|r| r[..dim].to_vec()).collect();
        let labels = labelled.then(|| (0..rows.len()).map(|i| i % 3).collect());
        let set = SampleSet::new(dim, features, labels).unwrap();
        let mut out = Vec::new();
        write_samples_to(&mut out, &set).unwrap();
        let back = parse_samples(out.as_slice(), Some(dim), LabelColumn::Optional).unwrap();
        prop_assert_eq!(bits(&back), bits(&set));
        prop_assert_eq!(back.labels(), set.labels());
    }
}

/// Every mutation breaks exactly one invariant of the default config; the
/// error must be a config error naming that key.
const MUTATIONS: &[(&str, &str)] = &[
    ("data.input_dim", "[data]\ninput_dim = 0"),
    ("data.kkc_count", "[data]\nkkc_count = 0"),
    ("data.uuc_count", "[data]\nuuc_count = 0"),
    ("data.total_classes", "[data]\ntotal_classes = 9"),
    ("data.kuc_mode", "[data]\nkuc_mode = \"held_out_blobs\""),
    ("data.kuc_mode", "[data]\nkuc_mode = \"spiral\""),
    ("data.samples_per_class", "[data]\nsamples_per_class = 1"),
    ("data.class_center_scale", "[data]\nclass_center_scale = -1.0"),
    ("data.class_center_scale", "[data]\nclass_center_scale = inf"),
    ("data.cluster_std", "[data]\ncluster_std = -0.5"),
    ("data.cluster_std", "[data]\ncluster_std = nan"),
    ("data.train_known", "[data]\nsource = \"csv\""),
    ("model.latent_dim", "[model]\nlatent_dim = 0"),
    ("model.hidden", "[model]\nhidden = [32, 0]"),
    ("model.head", "[model]\nhead = \"cosine\""),
    ("model.head", "[model]\nhead = \"softmax\""),
    ("loss.family", "[loss]\nfamily = \"arcface\""),
    ("loss.lambda", "[loss]\nlambda = -0.1"),
    ("loss.lambda", "[loss]\nlambda = nan"),
    ("loss.triplet_margin", "[loss]\ntriplet_margin = inf"),
    ("loss.xi", "[loss]\nxi = 0.0"),
    ("loss.energy_m_in", "[loss]\nenergy_m_in = -inf"),
    ("loss.energy_m_out", "[loss]\nenergy_m_out = nan"),
    ("optim.epochs", "[optim]\nepochs = 0"),
    ("optim.batch_size_known", "[optim]\nbatch_size_known = 0"),
    ("optim.batch_size_background", "[optim]\nbatch_size_background = 0"),
    ("optim.lr_init", "[optim]\nlr_init = 0.0"),
    ("optim.lr_init", "[optim]\nlr_init = -0.01"),
    ("optim.warmup_epochs", "[optim]\nwarmup_epochs = 300"),
    ("optim.momentum", "[optim]\nmomentum = 1.0"),
    ("optim.momentum", "[optim]\nmomentum = -0.1"),
    ("eval.fpr_target", "[eval]\nfpr_target = 1.5"),
    ("eval.tpr_target", "[eval]\ntpr_target = 0.0"),
    ("eval.f1_acceptance_rate", "[eval]\nf1_acceptance_rate = 0.0"),
    ("eval.f1_threshold", "[eval]\nf1_threshold = nan"),
];

#[test]
fn every_invalid_field_mutation_is_rejected_by_name() {
    assert!(ExperimentConfig::from_toml("").is_ok());
    for &(field, text) in MUTATIONS {
        match ExperimentConfig::from_toml(text) {
            Err(Error::Config { field: got, .. }) => assert_eq!(got, field, "{text}"),
            other => panic!("{text}: expected a config error on {field}, got {other:?}"),
        }
    }
}

#[test]
fn type_errors_and_unknown_keys_are_config_errors() {
    for text in ["seed = -1", "seed = \"zero\"", "[data]\ninput_dim = 2.5", "[optim]\nlearning_rate = 0.1", "[loss]\nfamily = 3"] {
        let err = ExperimentConfig::from_toml(text).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{text}: {err}");
    }
}

proptest! {
    /// Random valid edits stay valid and survive a TOML round trip.
    #[test]
    fn valid_configs_round_trip(
        seed in any::<u64>(),
        lambda in 0.0f64..20.0,
        epochs in 1usize..500,
        momentum in 0.0f64..0.99,
        family in prop::sample::select(vec!["class_inclusion", "hsc", "triplet", "objectosphere", "uniformity", "energy", "none"]),
    ) {
        let mut cfg = ExperimentConfig::default();
        cfg.seed = seed;
        cfg.loss.lambda = lambda;
        cfg.loss.family = family.into();
        cfg.optim.epochs = epochs;
        cfg.optim.warmup_epochs = epochs / 10;
        cfg.optim.momentum = momentum;
        cfg.validate().unwrap();
        prop_assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }
}
