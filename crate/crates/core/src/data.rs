//! Synthetic open-set benchmark and mini-batching.
//!
//! The generator draws `total_classes` Gaussian blobs. A seeded random
//! subset of `kkc_count` classes becomes the known classes, a disjoint
//! subset of `uuc_count` classes becomes the test-time unknowns, and the
//! background set comes from a separate process selected by [`KucMode`].

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Row-major feature matrix with optional 0-based labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    dim: usize,
    features: Vec<f64>,
    labels: Option<Vec<usize>>,
}

impl SampleSet {
    pub fn new(dim: usize, features: Vec<f64>, labels: Option<Vec<usize>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "feature dimension must be positive"));
        }
        if features.len() % dim != 0 {
            return Err(Error::invalid(
                "features",
                format!("{} values do not split into rows of {dim}", features.len()),
            ));
        }
        if let Some(l) = &labels {
            if l.len() != features.len() / dim {
                return Err(Error::invalid(
                    "labels",
                    format!("{} labels for {} rows", l.len(), features.len() / dim),
                ));
            }
        }
        Ok(SampleSet { dim, features, labels })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.features.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> Option<usize> {
        self.labels.as_ref().map(|l| l[i])
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.dim)
    }

    /// Stacks the selected rows into a `k × d` tensor.
    pub fn gather(&self, indices: &[usize]) -> Result<Tensor> {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Tensor::matrix(indices.len(), self.dim, data)
    }

    pub fn gather_labels(&self, indices: &[usize]) -> Option<Vec<usize>> {
        self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect())
    }
}

/// How background (known-unknown) samples are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KucMode {
    /// Annulus enclosing all known-class blobs.
    Ring,
    /// Extra Gaussian classes, disjoint from both known and unknown classes.
    HeldOutBlobs,
    /// Uniform over the center range `[-scale, scale]^d` padded by three
    /// standard deviations, excluding points within three standard
    /// deviations of a known-class center.
    UniformBox,
}

impl KucMode {
    pub fn name(self) -> &'static str {
        match self {
            KucMode::Ring => "ring",
            KucMode::HeldOutBlobs => "held_out_blobs",
            KucMode::UniformBox => "uniform_box",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [KucMode::Ring, KucMode::HeldOutBlobs, KucMode::UniformBox]
            .into_iter()
            .find(|m| m.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub input_dim: usize,
    pub total_classes: usize,
    pub kkc_count: usize,
    pub uuc_count: usize,
    pub samples_per_class: usize,
    pub class_center_scale: f64,
    pub cluster_std: f64,
    pub kuc_mode: KucMode,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            input_dim: 2,
            total_classes: 10,
            kkc_count: 6,
            uuc_count: 4,
            samples_per_class: 200,
            class_center_scale: 2.0,
            cluster_std: 0.2,
            kuc_mode: KucMode::UniformBox,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::invalid("data.input_dim", "must be at least 1"));
        }
        if self.kkc_count == 0 {
            return Err(Error::invalid("data.kkc_count", "must be at least 1"));
        }
        if self.uuc_count == 0 {
            return Err(Error::invalid("data.uuc_count", "must be at least 1"));
        }
        if self.kkc_count + self.uuc_count > self.total_classes {
            return Err(Error::invalid(
                "data.total_classes",
                format!(
                    "{} cannot hold {} known + {} unknown classes",
                    self.total_classes, self.kkc_count, self.uuc_count
                ),
            ));
        }
        if self.kuc_mode == KucMode::HeldOutBlobs && self.kkc_count + self.uuc_count == self.total_classes {
            return Err(Error::invalid(
                "data.kuc_mode",
                "held_out_blobs needs total_classes > kkc_count + uuc_count",
            ));
        }
        if self.samples_per_class < 2 {
            return Err(Error::invalid("data.samples_per_class", "must be at least 2 (train and test halves)"));
        }
        if !(self.class_center_scale >= 0.0) || !self.class_center_scale.is_finite() {
            return Err(Error::invalid("data.class_center_scale", "must be finite and ≥ 0"));
        }
        if !(self.cluster_std >= 0.0) || !self.cluster_std.is_finite() {
            return Err(Error::invalid("data.cluster_std", "must be finite and ≥ 0"));
        }
        Ok(())
    }
}

/// Known training set, background set and the two test sets.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub train_known: SampleSet,
    pub background: SampleSet,
    pub test_known: SampleSet,
    pub test_unknown: SampleSet,
}

impl DatasetBundle {
    pub fn classes(&self) -> usize {
        self.train_known
            .labels()
            .and_then(|l| l.iter().max())
            .map_or(0, |m| m + 1)
    }

    pub fn input_dim(&self) -> usize {
        self.train_known.dim()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.input_dim();
        for (name, set) in [
            ("background", &self.background),
            ("test_known", &self.test_known),
            ("test_unknown", &self.test_unknown),
        ] {
            if set.dim() != d {
                return Err(Error::invalid("bundle", format!("{name} has dimension {} but train_known has {d}", set.dim())));
            }
        }
        if self.train_known.labels().is_none() || self.test_known.labels().is_none() {
            return Err(Error::invalid("bundle", "known sets need labels"));
        }
        if self.train_known.is_empty() {
            return Err(Error::invalid("bundle", "train_known is empty"));
        }
        let c = self.classes();
        if let Some(l) = self.test_known.labels() {
            if l.iter().any(|&y| y >= c) {
                return Err(Error::invalid("bundle", "test_known has labels unseen in training"));
            }
        }
        Ok(())
    }
}

/// Class structure picked by [`generate`], useful for inspection and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassLayout {
    pub centers: Vec<Vec<f64>>,
    /// Source class of each known label, in label order.
    pub known_classes: Vec<usize>,
    pub unknown_classes: Vec<usize>,
    /// Classes used as background blobs (only for `HeldOutBlobs`).
    pub background_classes: Vec<usize>,
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Picks the class centers and the known/unknown/background class split.
pub fn layout(spec: &SyntheticSpec) -> Result<ClassLayout> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centers: Vec<Vec<f64>> = (0..spec.total_classes)
        .map(|_| {
            (0..spec.input_dim)
                .map(|_| rng.random_range(-1.0..=1.0) * spec.class_center_scale)
                .collect()
        })
        .collect();
    let mut order: Vec<usize> = (0..spec.total_classes).collect();
    order.shuffle(&mut rng);
    let known_classes = order[..spec.kkc_count].to_vec();
    let unknown_classes = order[spec.kkc_count..spec.kkc_count + spec.uuc_count].to_vec();
    let background_classes = match spec.kuc_mode {
        KucMode::HeldOutBlobs => order[spec.kkc_count + spec.uuc_count..].to_vec(),
        _ => Vec::new(),
    };
    Ok(ClassLayout {
        centers,
        known_classes,
        unknown_classes,
        background_classes,
    })
}

/// Deterministic synthetic bundle.
///
/// Each class draws `samples_per_class` points; the first half goes to the
/// training side and the second half to the test side, so train and test
/// indices within a class never overlap. Unknown classes contribute only
/// their test half. The background set has as many samples as `train_known`.
pub fn generate(spec: &SyntheticSpec) -> Result<DatasetBundle> {
    let lay = layout(spec)?;
    let d = spec.input_dim;
    // independent stream for samples so layout and samples do not interact
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5EED_DA7A_0000_0001);
    let n_train = spec.samples_per_class / 2;
    let n_test = spec.samples_per_class - n_train;

    let blob = |rng: &mut ChaCha8Rng, center: &[f64], count: usize| -> Vec<f64> {
        let mut out = Vec::with_capacity(count * d);
        for _ in 0..count {
            for &c in center {
                out.push(c + spec.cluster_std * gaussian(rng));
            }
        }
        out
    };

    let mut train_x = Vec::new();
    let mut train_y = Vec::new();
    let mut test_x = Vec::new();
    let mut test_y = Vec::new();
    for (label, &class) in lay.known_classes.iter().enumerate() {
        let pts = blob(&mut rng, &lay.centers[class], spec.samples_per_class);
        train_x.extend_from_slice(&pts[..n_train * d]);
        train_y.extend(core::iter::repeat_n(label, n_train));
        test_x.extend_from_slice(&pts[n_train * d..]);
        test_y.extend(core::iter::repeat_n(label, n_test));
    }
    let mut unknown_x = Vec::new();
    for &class in &lay.unknown_classes {
        let pts = blob(&mut rng, &lay.centers[class], spec.samples_per_class);
        unknown_x.extend_from_slice(&pts[n_train * d..]);
    }

    let n_background = train_y.len();
    let known_centers: Vec<&[f64]> = lay.known_classes.iter().map(|&c| lay.centers[c].as_slice()).collect();
    let background = match spec.kuc_mode {
        KucMode::Ring => ring(&mut rng, &known_centers, spec, n_background),
        KucMode::HeldOutBlobs => {
            let k = lay.background_classes.len();
            let mut out = Vec::with_capacity(n_background * d);
            for i in 0..n_background {
                let center = &lay.centers[lay.background_classes[i % k]];
                for &c in center {
                    out.push(c + spec.cluster_std * gaussian(&mut rng));
                }
            }
            out
        }
        KucMode::UniformBox => uniform_box(&mut rng, &known_centers, spec, n_background),
    };

    Ok(DatasetBundle {
        train_known: SampleSet::new(d, train_x, Some(train_y))?,
        background: SampleSet::new(d, background, None)?,
        test_known: SampleSet::new(d, test_x, Some(test_y))?,
        test_unknown: SampleSet::new(d, unknown_x, None)?,
    })
}

fn centroid(points: &[&[f64]], d: usize) -> Vec<f64> {
    let mut c = alloc::vec![0.0; d];
    for p in points {
        for (ci, &pi) in c.iter_mut().zip(p.iter()) {
            *ci += pi / points.len() as f64;
        }
    }
    c
}

/// Points on a shell around the known centroid whose inner radius clears
/// every known blob by three standard deviations; width is one more
/// three-sigma band.
fn ring(rng: &mut ChaCha8Rng, known: &[&[f64]], spec: &SyntheticSpec, count: usize) -> Vec<f64> {
    let d = spec.input_dim;
    let mid = centroid(known, d);
    let reach = known
        .iter()
        .map(|c| libm::sqrt(crate::autodiff::sq_euclidean(c, &mid)))
        .fold(0.0, f64::max);
    let inner = reach + 3.0 * spec.cluster_std + 1e-9;
    let outer = inner + 3.0 * spec.cluster_std.max(0.1);
    let mut out = Vec::with_capacity(count * d);
    for _ in 0..count {
        let dir: Vec<f64> = loop {
            let v: Vec<f64> = (0..d).map(|_| gaussian(rng)).collect();
            let norm = libm::sqrt(v.iter().map(|x| x * x).sum());
            if norm > 1e-12 {
                break v.iter().map(|x| x / norm).collect();
            }
        };
        let r = rng.random_range(inner..=outer);
        for (m, u) in mid.iter().zip(&dir) {
            out.push(m + r * u);
        }
    }
    out
}

fn uniform_box(
    rng: &mut ChaCha8Rng,
    known: &[&[f64]],
    spec: &SyntheticSpec,
    count: usize,
) -> Vec<f64> {
    let d = spec.input_dim;
    let pad = 3.0 * spec.cluster_std;
    let lo = alloc::vec![-spec.class_center_scale - pad; d];
    let hi = alloc::vec![spec.class_center_scale + pad; d];
    let exclusion = pad * pad;
    let mut out = Vec::with_capacity(count * d);
    let mut produced = 0;
    // bounded rejection sampling; the exclusion zone is a small fraction of the box
    let mut attempts = 0usize;
    while produced < count {
        attempts += 1;
        let p: Vec<f64> = lo
            .iter()
            .zip(&hi)
            .map(|(&l, &h)| if h > l { rng.random_range(l..=h) } else { l })
            .collect();
        let inside = known.iter().any(|c| crate::autodiff::sq_euclidean(c, &p) < exclusion);
        if inside && attempts < 1000 * count {
            continue;
        }
        out.extend_from_slice(&p);
        produced += 1;
    }
    out
}

/// Mixes a base seed with an epoch and stream number into a fresh seed.
pub fn derive_seed(seed: u64, epoch: u64, stream: u64) -> u64 {
    // splitmix64 finalizer over the combined input
    let mut z = seed
        .wrapping_add(epoch.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Index permutation for one epoch; identity when `shuffle` is off.
pub fn epoch_order(len: usize, seed: u64, epoch: u64, shuffle: bool) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..len).collect();
    if shuffle {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, epoch, 0));
        idx.shuffle(&mut rng);
    }
    idx
}

/// Splits one epoch of `len` samples into index batches of `batch_size`;
/// the last partial batch is kept.
pub fn batch_iter(len: usize, batch_size: usize, seed: u64, epoch: u64, shuffle: bool) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::invalid("batch_size", "must be positive"));
    }
    Ok(epoch_order(len, seed, epoch, shuffle)
        .chunks(batch_size)
        .map(<[usize]>::to_vec)
        .collect())
}

/// Endless shuffled stream over `len` indices, reshuffled on every pass.
#[derive(Debug, Clone)]
pub struct CyclingSampler {
    len: usize,
    seed: u64,
    pass: u64,
    order: Vec<usize>,
    pos: usize,
}

impl CyclingSampler {
    pub fn new(len: usize, seed: u64) -> Self {
        CyclingSampler {
            len,
            seed,
            pass: 0,
            order: epoch_order(len, seed, 0, true),
            pos: 0,
        }
    }

    pub fn next_batch(&mut self, size: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(size);
        if self.len == 0 {
            return out;
        }
        while out.len() < size {
            if self.pos == self.len {
                self.pass += 1;
                self.order = epoch_order(self.len, self.seed, self.pass, true);
                self.pos = 0;
            }
            out.push(self.order[self.pos]);
            self.pos += 1;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn degenerate_single_class_has_identical_samples() {
        let spec = SyntheticSpec {
            total_classes: 2,
            kkc_count: 1,
            uuc_count: 1,
            cluster_std: 0.0,
            samples_per_class: 20,
            ..SyntheticSpec::default()
        };
        let b = generate(&spec).unwrap();
        let lay = layout(&spec).unwrap();
        let center = &lay.centers[lay.known_classes[0]];
        for r in b.train_known.rows() {
            assert_eq!(r, center.as_slice());
        }
    }

    #[test]
    fn same_seed_gives_identical_bundle() {
        for mode in [KucMode::Ring, KucMode::UniformBox] {
            let spec = SyntheticSpec { seed: 42, kuc_mode: mode, ..SyntheticSpec::default() };
            assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        }
        let spec = SyntheticSpec { seed: 42, total_classes: 12, kuc_mode: KucMode::HeldOutBlobs, ..SyntheticSpec::default() };
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
    }

    #[test]
    fn known_unknown_and_background_classes_are_disjoint() {
        for seed in 0..100 {
            let spec = SyntheticSpec { seed, total_classes: 12, kuc_mode: KucMode::HeldOutBlobs, ..SyntheticSpec::default() };
            let lay = layout(&spec).unwrap();
            for k in &lay.known_classes {
                assert!(!lay.unknown_classes.contains(k));
                assert!(!lay.background_classes.contains(k));
            }
            for u in &lay.unknown_classes {
                assert!(!lay.background_classes.contains(u));
            }
            assert_eq!(lay.known_classes.len(), 6);
            assert_eq!(lay.unknown_classes.len(), 4);
        }
    }

    #[test]
    fn bundle_shapes_match_the_generator_settings() {
        let b = generate(&SyntheticSpec::default()).unwrap();
        assert_eq!(b.train_known.len(), 600);
        assert_eq!(b.test_known.len(), 600);
        assert_eq!(b.test_unknown.len(), 400);
        assert_eq!(b.background.len(), 600);
        assert_eq!(b.classes(), 6);
        assert!(b.background.labels().is_none() && b.test_unknown.labels().is_none());
        b.validate().unwrap();
    }

    #[test]
    fn ring_background_clears_known_blobs() {
        let spec = SyntheticSpec { seed: 3, ..SyntheticSpec::default() };
        let b = generate(&spec).unwrap();
        let lay = layout(&spec).unwrap();
        for p in b.background.rows() {
            for &k in &lay.known_classes {
                let d = libm::sqrt(crate::autodiff::sq_euclidean(p, &lay.centers[k]));
                assert!(d >= 3.0 * spec.cluster_std - 1e-9);
            }
        }
    }

    #[test]
    fn infeasible_specs_are_rejected() {
        let bad = [
            SyntheticSpec { kkc_count: 8, ..SyntheticSpec::default() },
            SyntheticSpec { kkc_count: 0, ..SyntheticSpec::default() },
            SyntheticSpec { uuc_count: 0, ..SyntheticSpec::default() },
            SyntheticSpec { input_dim: 0, ..SyntheticSpec::default() },
            SyntheticSpec { samples_per_class: 1, ..SyntheticSpec::default() },
            SyntheticSpec { cluster_std: -1.0, ..SyntheticSpec::default() },
            SyntheticSpec { kuc_mode: KucMode::HeldOutBlobs, ..SyntheticSpec::default() },
        ];
        for spec in bad {
            assert!(matches!(generate(&spec), Err(Error::Invalid { .. })), "{spec:?}");
        }
    }

    #[test]
    fn batch_sizes_keep_last_partial_batch() {
        let b = batch_iter(10, 4, 1, 0, true).unwrap();
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 4, 2]);
        let plain = batch_iter(10, 4, 1, 0, false).unwrap();
        assert_eq!(plain.concat(), (0..10).collect::<Vec<_>>());
        assert!(batch_iter(10, 0, 1, 0, true).is_err());
    }

    #[test]
    fn different_seeds_give_different_permutations() {
        let a = epoch_order(50, 7, 0, true);
        let b = epoch_order(50, 8, 0, true);
        assert_ne!(a, b);
        assert_ne!(epoch_order(50, 7, 0, true), epoch_order(50, 7, 1, true));
        assert_eq!(a, epoch_order(50, 7, 0, true));
    }

    #[test]
    fn cycling_sampler_visits_everything_each_pass() {
        let mut s = CyclingSampler::new(7, 3);
        let mut first = s.next_batch(7);
        first.sort_unstable();
        assert_eq!(first, (0..7).collect::<Vec<_>>());
        let mut seen = s.next_batch(5);
        seen.extend(s.next_batch(2));
        seen.sort_unstable();
        assert_eq!(seen, (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn sample_set_validation() {
        assert!(SampleSet::new(2, vec![1.0, 2.0, 3.0], None).is_err());
        assert!(SampleSet::new(2, vec![1.0, 2.0], Some(vec![0, 1])).is_err());
        assert!(SampleSet::new(0, vec![], None).is_err());
        let s = SampleSet::new(2, vec![1.0, 2.0, 3.0, 4.0], Some(vec![1, 0])).unwrap();
        assert_eq!(s.gather(&[1]).unwrap().data(), &[3.0, 4.0]);
        assert_eq!(s.gather_labels(&[1, 0]), Some(vec![0, 1]));
    }
}
