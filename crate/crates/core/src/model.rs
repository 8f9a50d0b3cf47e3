//! Feature extractor, classification heads and open-set decision rules.
//!
//! Class indices are 0-based throughout the crate; the unknown class is
//! represented by [`OpenSetLabel::Unknown`] rather than by index `C`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::autodiff::{logsumexp_slice, sq_euclidean, Graph, Tensor, Var};
use crate::error::{Error, Result};

/// Fully connected layer, `y = x·W + b` with `W: in × out`, `b: 1 × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Dense {
    pub fn input_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.cols()
    }
}

/// Multi-layer perceptron with ReLU between layers and a linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
}

impl Mlp {
    /// He-normal weights, zero biases. `sizes = [d, h1, ..., n]`.
    pub fn init(sizes: &[usize], rng: &mut impl Rng) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(Error::invalid(
                "layer sizes",
                format!("{sizes:?}: need at least input and latent sizes, all positive"),
            ));
        }
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let std = libm::sqrt(2.0 / fan_in as f64);
                let weight = (0..fan_in * fan_out)
                    .map(|_| std * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                Dense {
                    weight: Tensor::matrix(fan_in, fan_out, weight).expect("sizes checked"),
                    bias: Tensor::zeros(vec![1, fan_out]),
                }
            })
            .collect();
        Ok(Mlp { layers })
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("layers", "an extractor needs at least one layer"));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.weight.shape().len() != 2 || l.bias.shape() != [1, l.output_dim()] {
                return Err(Error::shape("Mlp::from_layers", l.weight.shape(), l.bias.shape()));
            }
            if i > 0 && layers[i - 1].output_dim() != l.input_dim() {
                return Err(Error::shape(
                    "Mlp::from_layers",
                    layers[i - 1].weight.shape(),
                    l.weight.shape(),
                ));
            }
        }
        Ok(Mlp { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    /// Layer sizes `[d, h1, ..., n]`.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim()];
        s.extend(self.layers.iter().map(Dense::output_dim));
        s
    }

    /// Forward pass of a single input vector.
    pub fn latent(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::shape("latent", &[x.len()], &[self.input_dim()]));
        }
        let mut h = x.to_vec();
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            let out_dim = layer.output_dim();
            let mut next = vec![0.0; out_dim];
            for (t, &hv) in h.iter().enumerate() {
                if hv == 0.0 {
                    continue;
                }
                for (o, &w) in next.iter_mut().zip(layer.weight.row_slice(t)) {
                    *o += hv * w;
                }
            }
            for (o, &b) in next.iter_mut().zip(layer.bias.data()) {
                *o += b;
                if li < last && *o < 0.0 {
                    *o = 0.0;
                }
            }
            h = next;
        }
        Ok(h)
    }
}

/// Trainable class anchors `μ_c` with fixed class priors.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceHead {
    anchors: Tensor,
    log_priors: Vec<f64>,
}

impl DistanceHead {
    /// Anchors drawn from the standard Gaussian, uniform priors.
    pub fn init(classes: usize, latent_dim: usize, rng: &mut impl Rng) -> Result<Self> {
        if classes == 0 || latent_dim == 0 {
            return Err(Error::invalid("distance head", "classes and latent_dim must be positive"));
        }
        let data = (0..classes * latent_dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        DistanceHead::new(Tensor::matrix(classes, latent_dim, data)?)
    }

    /// Head with the given `C × n` anchors and uniform priors.
    pub fn new(anchors: Tensor) -> Result<Self> {
        if anchors.shape().len() != 2 {
            return Err(Error::shape("DistanceHead::new", anchors.shape(), &[0, 0]));
        }
        let c = anchors.rows();
        Ok(DistanceHead {
            anchors,
            log_priors: vec![-libm::log(c as f64); c],
        })
    }

    pub fn with_priors(anchors: Tensor, priors: &[f64]) -> Result<Self> {
        let mut head = DistanceHead::new(anchors)?;
        if priors.len() != head.classes() {
            return Err(Error::shape("DistanceHead::with_priors", &[priors.len()], &[head.classes()]));
        }
        let total: f64 = priors.iter().sum();
        if priors.iter().any(|&p| !(p > 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("priors", "must be positive and sum to 1"));
        }
        head.log_priors = priors.iter().map(|&p| libm::log(p)).collect();
        Ok(head)
    }

    /// Restores a head from stored log-priors without re-rounding them.
    pub fn with_log_priors(anchors: Tensor, log_priors: Vec<f64>) -> Result<Self> {
        let mut head = DistanceHead::new(anchors)?;
        if log_priors.len() != head.classes() {
            return Err(Error::shape("DistanceHead::with_log_priors", &[log_priors.len()], &[head.classes()]));
        }
        if log_priors.iter().any(|p| !p.is_finite()) || (logsumexp_slice(&log_priors)).abs() > 1e-9 {
            return Err(Error::invalid("priors", "log-priors must be finite and normalized"));
        }
        head.log_priors = log_priors;
        Ok(head)
    }

    pub fn anchors(&self) -> &Tensor {
        &self.anchors
    }

    pub fn anchors_mut(&mut self) -> &mut Tensor {
        &mut self.anchors
    }

    pub fn anchor(&self, class: usize) -> &[f64] {
        self.anchors.row_slice(class)
    }

    pub fn log_priors(&self) -> &[f64] {
        &self.log_priors
    }

    pub fn classes(&self) -> usize {
        self.anchors.rows()
    }

    pub fn latent_dim(&self) -> usize {
        self.anchors.cols()
    }

    /// `‖z − μ_c‖²` for every class.
    pub fn sq_distances(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.latent_dim() {
            return Err(Error::shape("sq_distances", &[z.len()], &[self.latent_dim()]));
        }
        Ok((0..self.classes()).map(|c| sq_euclidean(z, self.anchor(c))).collect())
    }

    /// `P_d(y=c|x) ∝ P_c · exp(−‖z − μ_c‖²)`, normalized through logsumexp.
    pub fn posterior(&self, z: &[f64]) -> Result<Vec<f64>> {
        let logits: Vec<f64> = self
            .sq_distances(z)?
            .iter()
            .zip(&self.log_priors)
            .map(|(d, lp)| lp - d)
            .collect();
        Ok(softmax(&logits))
    }

    /// Open-set rule with score `max_c −‖z − μ_c‖²`; rejected when the
    /// score falls below `tau`. Accepted points lie within `sqrt(−tau)` of
    /// an anchor.
    pub fn decide(&self, z: &[f64], tau: f64) -> Result<OpenSetDecision> {
        let d = self.sq_distances(z)?;
        let class = argmin(&d);
        Ok(OpenSetDecision::new(class, -d[class], tau))
    }
}

/// Affine logits `w_cᵀ z + b_c` followed by a softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxHead {
    /// `C × n`, row `c` is `w_c`.
    pub weight: Tensor,
    /// `1 × C`
    pub bias: Tensor,
}

impl SoftmaxHead {
    pub fn init(classes: usize, latent_dim: usize, rng: &mut impl Rng) -> Result<Self> {
        if classes == 0 || latent_dim == 0 {
            return Err(Error::invalid("softmax head", "classes and latent_dim must be positive"));
        }
        let std = libm::sqrt(1.0 / latent_dim as f64);
        let data = (0..classes * latent_dim)
            .map(|_| std * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Ok(SoftmaxHead {
            weight: Tensor::matrix(classes, latent_dim, data)?,
            bias: Tensor::zeros(vec![1, classes]),
        })
    }

    pub fn new(weight: Tensor, bias: Tensor) -> Result<Self> {
        if weight.shape().len() != 2 || bias.shape() != [1, weight.rows()] {
            return Err(Error::shape("SoftmaxHead::new", weight.shape(), bias.shape()));
        }
        Ok(SoftmaxHead { weight, bias })
    }

    pub fn classes(&self) -> usize {
        self.weight.rows()
    }

    pub fn latent_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn logits(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.latent_dim() {
            return Err(Error::shape("softmax logits", &[z.len()], &[self.latent_dim()]));
        }
        Ok((0..self.classes())
            .map(|c| {
                let dot: f64 = self.weight.row_slice(c).iter().zip(z).map(|(w, x)| w * x).sum();
                dot + self.bias.data()[c]
            })
            .collect())
    }

    pub fn posterior(&self, z: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(z)?))
    }

    /// Baseline rule: accept when the maximum posterior reaches `tau ∈ (0, 1]`.
    pub fn decide(&self, z: &[f64], tau: f64) -> Result<OpenSetDecision> {
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(Error::invalid("tau", format!("{tau} is outside (0, 1]")));
        }
        let p = self.posterior(z)?;
        let class = argmax(&p);
        Ok(OpenSetDecision::new(class, p[class], tau))
    }

    /// Free energy `−ln Σ_c exp(logit_c)`.
    pub fn energy(&self, z: &[f64]) -> Result<f64> {
        Ok(-logsumexp_slice(&self.logits(z)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpenSetLabel {
    Known(usize),
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpenSetDecision {
    pub label: OpenSetLabel,
    /// Closed-set prediction, populated even when rejected.
    pub closed_set_class: usize,
    /// Acceptance score compared against `tau`.
    pub score: f64,
}

impl OpenSetDecision {
    fn new(class: usize, score: f64, tau: f64) -> Self {
        let label = if score >= tau {
            OpenSetLabel::Known(class)
        } else {
            OpenSetLabel::Unknown
        };
        OpenSetDecision {
            label,
            closed_set_class: class,
            score,
        }
    }

    pub fn is_rejected(&self) -> bool {
        self.label == OpenSetLabel::Unknown
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Head {
    Distance(DistanceHead),
    Softmax(SoftmaxHead),
}

impl Head {
    pub fn classes(&self) -> usize {
        match self {
            Head::Distance(h) => h.classes(),
            Head::Softmax(h) => h.classes(),
        }
    }

    pub fn latent_dim(&self) -> usize {
        match self {
            Head::Distance(h) => h.latent_dim(),
            Head::Softmax(h) => h.latent_dim(),
        }
    }
}

/// Which head to attach when building a [`Model`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadKind {
    Distance,
    Softmax,
}

/// Feature extractor plus classification head.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    extractor: Mlp,
    head: Head,
    /// Anchors are excluded from updates when set.
    pub freeze_anchors: bool,
    /// Seed that produced the initial parameters.
    pub init_seed: u64,
}

/// Graph handles for every parameter of a [`Model`], in [`Model::parameters`] order.
#[derive(Debug, Clone)]
pub struct ModelVars {
    pub layers: Vec<(Var, Var)>,
    pub head: HeadVars,
}

#[derive(Debug, Clone, Copy)]
pub enum HeadVars {
    Distance { anchors: Var, log_priors: Var },
    Softmax { weight: Var, bias: Var },
}

impl Model {
    /// `sizes = [d, h1, ..., n]`; parameters drawn from a ChaCha stream seeded with `seed`.
    pub fn init(sizes: &[usize], classes: usize, kind: HeadKind, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let extractor = Mlp::init(sizes, &mut rng)?;
        let n = extractor.latent_dim();
        let head = match kind {
            HeadKind::Distance => Head::Distance(DistanceHead::init(classes, n, &mut rng)?),
            HeadKind::Softmax => Head::Softmax(SoftmaxHead::init(classes, n, &mut rng)?),
        };
        Ok(Model {
            extractor,
            head,
            freeze_anchors: false,
            init_seed: seed,
        })
    }

    pub fn new(extractor: Mlp, head: Head) -> Result<Self> {
        if extractor.latent_dim() != head.latent_dim() {
            return Err(Error::shape(
                "Model::new",
                &[extractor.latent_dim()],
                &[head.latent_dim()],
            ));
        }
        Ok(Model {
            extractor,
            head,
            freeze_anchors: false,
            init_seed: 0,
        })
    }

    pub fn extractor(&self) -> &Mlp {
        &self.extractor
    }

    pub fn head(&self) -> &Head {
        &self.head
    }

    pub fn head_kind(&self) -> HeadKind {
        match self.head {
            Head::Distance(_) => HeadKind::Distance,
            Head::Softmax(_) => HeadKind::Softmax,
        }
    }

    pub fn classes(&self) -> usize {
        self.head.classes()
    }

    pub fn input_dim(&self) -> usize {
        self.extractor.input_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.extractor.latent_dim()
    }

    pub fn distance_head(&self) -> Option<&DistanceHead> {
        match &self.head {
            Head::Distance(h) => Some(h),
            Head::Softmax(_) => None,
        }
    }

    pub fn softmax_head(&self) -> Option<&SoftmaxHead> {
        match &self.head {
            Head::Softmax(h) => Some(h),
            Head::Distance(_) => None,
        }
    }

    /// Trainable tensors in a fixed order: `W_1, b_1, ..., W_L, b_L`, then
    /// the anchors, or the softmax weight and bias.
    pub fn parameters(&self) -> Vec<&Tensor> {
        let mut out: Vec<&Tensor> = Vec::new();
        for l in self.extractor.layers() {
            out.push(&l.weight);
            out.push(&l.bias);
        }
        match &self.head {
            Head::Distance(h) => out.push(h.anchors()),
            Head::Softmax(h) => {
                out.push(&h.weight);
                out.push(&h.bias);
            }
        }
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = Vec::new();
        for l in self.extractor.layers_mut() {
            out.push(&mut l.weight);
            out.push(&mut l.bias);
        }
        match &mut self.head {
            Head::Distance(h) => out.push(h.anchors_mut()),
            Head::Softmax(h) => {
                out.push(&mut h.weight);
                out.push(&mut h.bias);
            }
        }
        out
    }

    /// Whether the parameter at `index` (see [`Model::parameters`]) is updated by training.
    pub fn is_trainable(&self, index: usize) -> bool {
        let anchor_index = 2 * self.extractor.layers().len();
        !(self.freeze_anchors && matches!(self.head, Head::Distance(_)) && index == anchor_index)
    }

    /// Registers every parameter as a graph leaf.
    pub fn register(&self, g: &mut Graph) -> ModelVars {
        let layers = self
            .extractor
            .layers()
            .iter()
            .map(|l| (g.param(l.weight.clone()), g.param(l.bias.clone())))
            .collect();
        let head = match &self.head {
            Head::Distance(h) => HeadVars::Distance {
                anchors: g.leaf(h.anchors().clone(), !self.freeze_anchors),
                log_priors: g.constant(
                    Tensor::row(h.log_priors().to_vec()).expect("at least one class"),
                ),
            },
            Head::Softmax(h) => HeadVars::Softmax {
                weight: g.param(h.weight.clone()),
                bias: g.param(h.bias.clone()),
            },
        };
        ModelVars { layers, head }
    }

    /// Latent features `f(x)` for a batch `x: m × d`, as `m × n`.
    pub fn forward_latent(&self, g: &mut Graph, vars: &ModelVars, x: Var) -> Result<Var> {
        let mut h = x;
        let last = vars.layers.len() - 1;
        for (i, &(w, b)) in vars.layers.iter().enumerate() {
            h = g.matmul(h, w)?;
            h = g.add_bias(h, b)?;
            if i < last {
                h = g.relu(h);
            }
        }
        Ok(h)
    }

    pub fn latent(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.extractor.latent(x)
    }

    /// Closed-set posterior of the attached head.
    pub fn posterior(&self, x: &[f64]) -> Result<Vec<f64>> {
        let z = self.latent(x)?;
        match &self.head {
            Head::Distance(h) => h.posterior(&z),
            Head::Softmax(h) => h.posterior(&z),
        }
    }

    /// Applies the head's own open-set rule.
    pub fn decide(&self, x: &[f64], tau: f64) -> Result<OpenSetDecision> {
        let z = self.latent(x)?;
        match &self.head {
            Head::Distance(h) => h.decide(&z, tau),
            Head::Softmax(h) => h.decide(&z, tau),
        }
    }
}

/// Softmax of a logit vector.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let lse = logsumexp_slice(logits);
    logits.iter().map(|&l| libm::exp(l - lse)).collect()
}

/// Index of the smallest value; ties go to the lowest index.
pub fn argmin(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x < xs[best] {
            best = i;
        }
    }
    best
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
