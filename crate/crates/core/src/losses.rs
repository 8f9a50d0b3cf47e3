//! Training objectives.
//!
//! Every objective has the shape `L = L_cf + λ · L_bg`. `L_cf` is the
//! closed-set cross-entropy of the attached head and `L_bg` is the
//! family-specific background regularizer:
//!
//! | family            | head     | `L_bg`                                              |
//! |-------------------|----------|-----------------------------------------------------|
//! | `ClassInclusion`  | distance | `L_bg,k + L_bg,u` built on the probability of inclusion |
//! | `Hsc`             | distance | class-wise hypersphere classifier loss              |
//! | `Triplet`         | distance | anchor/known/background hinge                       |
//! | `Objectosphere`   | softmax  | uniform-target CE on background + feature magnitude |
//! | `Uniformity`      | softmax  | cross-entropy to the uniform posterior on background |
//! | `Energy`          | softmax  | squared hinges on the free energy                   |
//! | `None`            | either   | nothing                                             |
//!
//! The regularizer is reported in two parts, the known-sample part and the
//! background part, which land in the `L_bg,k` / `L_bg,u` trace columns.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::autodiff::{Graph, Tensor, Var};
use crate::error::{Error, Result};
use crate::model::{argmin, HeadKind, HeadVars, Model, ModelVars};
use crate::special::PROB_FLOOR;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossFamily {
    ClassInclusion,
    Hsc,
    Triplet,
    Objectosphere,
    Uniformity,
    Energy,
    None,
}

impl LossFamily {
    pub const ALL: [LossFamily; 7] = [
        LossFamily::ClassInclusion,
        LossFamily::Hsc,
        LossFamily::Triplet,
        LossFamily::Objectosphere,
        LossFamily::Uniformity,
        LossFamily::Energy,
        LossFamily::None,
    ];

    /// Head the family is defined for; `None` works with either.
    pub fn head_kind(self) -> Option<HeadKind> {
        match self {
            LossFamily::ClassInclusion | LossFamily::Hsc | LossFamily::Triplet => {
                Some(HeadKind::Distance)
            }
            LossFamily::Objectosphere | LossFamily::Uniformity | LossFamily::Energy => {
                Some(HeadKind::Softmax)
            }
            LossFamily::None => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LossFamily::ClassInclusion => "class_inclusion",
            LossFamily::Hsc => "hsc",
            LossFamily::Triplet => "triplet",
            LossFamily::Objectosphere => "objectosphere",
            LossFamily::Uniformity => "uniformity",
            LossFamily::Energy => "energy",
            LossFamily::None => "none",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        LossFamily::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossConfig {
    pub family: LossFamily,
    pub lambda: f64,
    pub triplet_margin: f64,
    /// Objectosphere radius; `None` means `sqrt(n)`.
    pub xi: Option<f64>,
    pub energy_m_in: f64,
    pub energy_m_out: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            family: LossFamily::ClassInclusion,
            lambda: 1.0,
            triplet_margin: 1.0,
            xi: None,
            energy_m_in: -7.0,
            energy_m_out: -1.0,
        }
    }
}

impl LossConfig {
    pub fn new(family: LossFamily, lambda: f64) -> Self {
        LossConfig {
            family,
            lambda,
            ..LossConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::invalid("loss.lambda", format!("{} must be finite and ≥ 0", self.lambda)));
        }
        if !self.triplet_margin.is_finite() {
            return Err(Error::invalid("loss.triplet_margin", "must be finite"));
        }
        if let Some(xi) = self.xi {
            if !(xi > 0.0) || !xi.is_finite() {
                return Err(Error::invalid("loss.xi", format!("{xi} must be positive")));
            }
        }
        if !self.energy_m_in.is_finite() {
            return Err(Error::invalid("loss.energy_m_in", "must be finite"));
        }
        if !self.energy_m_out.is_finite() {
            return Err(Error::invalid("loss.energy_m_out", "must be finite"));
        }
        Ok(())
    }

    pub fn xi_for(&self, latent_dim: usize) -> f64 {
        self.xi.unwrap_or_else(|| libm::sqrt(latent_dim as f64))
    }
}

/// Paired known and background mini-batches.
#[derive(Debug, Clone, Copy)]
pub struct BatchPair<'a> {
    /// `m × d` known-class inputs.
    pub known: &'a Tensor,
    /// 0-based labels of the known inputs.
    pub labels: &'a [usize],
    /// `b × d` background inputs.
    pub background: Option<&'a Tensor>,
}

/// Graph handles of the loss and its parts.
#[derive(Debug, Clone, Copy)]
pub struct LossTerms {
    pub total: Var,
    pub cf: Var,
    pub bg_known: Option<Var>,
    pub bg_background: Option<Var>,
}

/// Scalar values of [`LossTerms`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossValues {
    pub total: f64,
    pub cf: f64,
    pub bg_known: f64,
    pub bg_background: f64,
}

impl LossTerms {
    pub fn values(&self, g: &Graph) -> LossValues {
        let v = |x: Option<Var>| x.map_or(0.0, |x| g.value(x).data()[0]);
        LossValues {
            total: v(Some(self.total)),
            cf: v(Some(self.cf)),
            bg_known: v(self.bg_known),
            bg_background: v(self.bg_background),
        }
    }
}

fn check_labels(labels: &[usize], rows: usize, classes: usize) -> Result<()> {
    if rows == 0 {
        return Err(Error::contract("empty known batch"));
    }
    if labels.len() != rows {
        return Err(Error::shape("labels", &[labels.len()], &[rows]));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::contract(format!("label {bad} out of range for {classes} classes")));
    }
    Ok(())
}

fn anchors_of(vars: &ModelVars) -> Result<(Var, Var)> {
    match vars.head {
        HeadVars::Distance { anchors, log_priors } => Ok((anchors, log_priors)),
        HeadVars::Softmax { .. } => Err(Error::contract("loss requires a distance head")),
    }
}

fn softmax_params(vars: &ModelVars) -> Result<(Var, Var)> {
    match vars.head {
        HeadVars::Softmax { weight, bias } => Ok((weight, bias)),
        HeadVars::Distance { .. } => Err(Error::contract("loss requires a softmax head")),
    }
}

/// Logits of the attached head: `log P_c − ‖z − μ_c‖²` or `zWᵀ + b`.
pub fn head_logits(g: &mut Graph, vars: &ModelVars, z: Var) -> Result<Var> {
    match vars.head {
        HeadVars::Distance { anchors, log_priors } => {
            let d = g.sq_dist(z, anchors)?;
            let neg = g.neg(d);
            g.add_bias(neg, log_priors)
        }
        HeadVars::Softmax { weight, bias } => {
            let wt = g.transpose(weight)?;
            let l = g.matmul(z, wt)?;
            g.add_bias(l, bias)
        }
    }
}

/// Mean cross-entropy `E[−log P(y | x)]` over a batch of logits.
pub fn cross_entropy(g: &mut Graph, logits: Var, labels: &[usize]) -> Result<Var> {
    let t = g.value(logits);
    check_labels(labels, t.rows(), t.cols())?;
    let lse = g.logsumexp(logits)?;
    let picked = g.gather(logits, labels)?;
    let nll = g.sub(lse, picked)?;
    Ok(g.mean(nll))
}

/// Closed-set loss `L_cf` for latent features `z` of known samples.
pub fn loss_cf(g: &mut Graph, vars: &ModelVars, z: Var, labels: &[usize]) -> Result<Var> {
    let logits = head_logits(g, vars, z)?;
    cross_entropy(g, logits, labels)
}

/// Row-wise argmin of a distance matrix, lowest index on ties.
fn nearest(d: &Tensor) -> Vec<usize> {
    (0..d.rows()).map(|r| argmin(d.row_slice(r))).collect()
}

/// `L_bg,u = E[−log(1 − max_i P_I(x^b, i))]`.
///
/// The maximum probability of inclusion is the one of the nearest anchor.
pub fn loss_bg_u(g: &mut Graph, anchors: Var, z_bg: Var, n: u32) -> Result<Var> {
    if g.value(z_bg).rows() == 0 {
        return Err(Error::contract("empty background batch"));
    }
    let d = g.sq_dist(z_bg, anchors)?;
    let idx = nearest(g.value(d));
    let d_min = g.gather(d, &idx)?;
    let p = g.prob_inclusion(d_min, n)?;
    let neg_p = g.neg(p);
    let outside = g.add_scalar(neg_p, 1.0);
    let outside = g.clamp_min(outside, PROB_FLOOR);
    let log = g.log(outside);
    let loss = g.mean(log);
    Ok(g.neg(loss))
}

/// `L_bg,k = E[−1(y = ĉ) log P_I(x^k, ĉ)]` with `ĉ` the class of highest
/// probability of inclusion (nearest anchor). The indicator is a constant
/// gate: misclassified samples contribute exactly zero and no gradient.
pub fn loss_bg_k(g: &mut Graph, anchors: Var, z: Var, labels: &[usize], n: u32) -> Result<Var> {
    let d = g.sq_dist(z, anchors)?;
    let t = g.value(d);
    check_labels(labels, t.rows(), t.cols())?;
    let idx = nearest(t);
    let gate: Vec<f64> = idx
        .iter()
        .zip(labels)
        .map(|(c, y)| if c == y { 1.0 } else { 0.0 })
        .collect();
    let d_min = g.gather(d, &idx)?;
    let p = g.prob_inclusion(d_min, n)?;
    let p = g.clamp_min(p, PROB_FLOOR);
    let log = g.log(p);
    let gate = g.constant(Tensor::column(gate)?);
    let gated = g.mul(log, gate)?;
    let loss = g.mean(gated);
    Ok(g.neg(loss))
}

/// `L_cf + λ(L_bg,k + L_bg,u)`.
pub fn loss_class_inclusion(g: &mut Graph, model: &Model, pair: &BatchPair<'_>, lambda: f64) -> Result<Var> {
    let cfg = LossConfig::new(LossFamily::ClassInclusion, lambda);
    let vars = model.register(g);
    Ok(evaluate(g, model, &vars, pair, &cfg)?.total)
}

/// `h(d²) = sqrt(d² + 1) − 1` on a graph node.
fn h_node(g: &mut Graph, d: Var) -> Var {
    let shifted = g.add_scalar(d, 1.0);
    let root = g.sqrt(shifted);
    g.add_scalar(root, -1.0)
}

/// Class-wise hypersphere-classifier terms: `E[h(‖f(x^k) − μ_y‖²)]` and
/// `−E[log(1 − exp(−h(min_c ‖f(x^b) − μ_c‖²)))]`.
pub fn loss_hsc(g: &mut Graph, anchors: Var, z: Var, labels: &[usize], z_bg: Var) -> Result<(Var, Var)> {
    let d = g.sq_dist(z, anchors)?;
    let t = g.value(d);
    check_labels(labels, t.rows(), t.cols())?;
    let d_true = g.gather(d, labels)?;
    let h_known = h_node(g, d_true);
    let known = g.mean(h_known);

    let db = g.sq_dist(z_bg, anchors)?;
    let idx = nearest(g.value(db));
    let d_min = g.gather(db, &idx)?;
    let h_bg = h_node(g, d_min);
    let neg_h = g.neg(h_bg);
    let p_h = g.exp(neg_h);
    let neg_p = g.neg(p_h);
    let outside = g.add_scalar(neg_p, 1.0);
    let outside = g.clamp_min(outside, PROB_FLOOR);
    let log = g.log(outside);
    let bg = g.mean(log);
    let bg = g.neg(bg);
    Ok((known, bg))
}

/// One-hot `m × b` matrix mapping known sample `i` to background `i mod b`.
fn round_robin(m: usize, b: usize) -> Result<Tensor> {
    let mut sel = vec![0.0; m * b];
    for i in 0..m {
        sel[i * b + i % b] = 1.0;
    }
    Tensor::matrix(m, b, sel)
}

/// Mean of `max(0, ‖f(x^k) − μ_y‖² − ‖f(x^b) − μ_y‖² + margin)` with
/// background samples matched to known samples round-robin.
pub fn loss_triplet(
    g: &mut Graph,
    anchors: Var,
    z: Var,
    labels: &[usize],
    z_bg: Var,
    margin: f64,
) -> Result<Var> {
    let d = g.sq_dist(z, anchors)?;
    let t = g.value(d);
    check_labels(labels, t.rows(), t.cols())?;
    let m = t.rows();
    let b = g.value(z_bg).rows();
    let d_pos = g.gather(d, labels)?;
    let sel = g.constant(round_robin(m, b)?);
    let z_neg = g.matmul(sel, z_bg)?;
    let dn = g.sq_dist(z_neg, anchors)?;
    let d_neg = g.gather(dn, labels)?;
    let gap = g.sub(d_pos, d_neg)?;
    let gap = g.add_scalar(gap, margin);
    let hinge = g.relu(gap);
    Ok(g.mean(hinge))
}

/// Row-wise `−(1/C) Σ_c log P_s(c | x)`, the cross-entropy to the uniform target.
fn uniform_ce(g: &mut Graph, logits: Var) -> Result<Var> {
    let c = g.value(logits).cols() as f64;
    let lse = g.logsumexp(logits)?;
    let total = g.sum_axis(logits, 1)?;
    let avg = g.scalar_mul(total, 1.0 / c);
    let per_row = g.sub(lse, avg)?;
    Ok(g.mean(per_row))
}

/// Row-wise squared norm `‖z‖²` as an `m × 1` column.
fn sq_norm(g: &mut Graph, z: Var) -> Result<Var> {
    let sq = g.square(z);
    g.sum_axis(sq, 1)
}

/// Objectosphere regularizer parts: `E[max(0, ξ − ‖f(x^k)‖)²]` and
/// `E[−(1/C)Σ log P_s(c|x^b)] + E[‖f(x^b)‖²]`.
pub fn loss_objectosphere(g: &mut Graph, vars: &ModelVars, z: Var, z_bg: Var, xi: f64) -> Result<(Var, Var)> {
    softmax_params(vars)?;
    let norm_sq = sq_norm(g, z)?;
    let norm_sq = g.add_scalar(norm_sq, 1e-12);
    let norm = g.sqrt(norm_sq);
    let neg = g.neg(norm);
    let short = g.add_scalar(neg, xi);
    let short = g.relu(short);
    let short = g.square(short);
    let known = g.mean(short);

    let logits = head_logits(g, vars, z_bg)?;
    let ce = uniform_ce(g, logits)?;
    let mag = sq_norm(g, z_bg)?;
    let mag = g.mean(mag);
    let bg = g.add(ce, mag)?;
    Ok((known, bg))
}

/// `E[−(1/C) Σ_c log P_s(c | x^b)]`.
pub fn loss_uniformity(g: &mut Graph, vars: &ModelVars, z_bg: Var) -> Result<Var> {
    softmax_params(vars)?;
    let logits = head_logits(g, vars, z_bg)?;
    uniform_ce(g, logits)
}

/// Row-wise free energy `E(x) = −logsumexp(logits)` as an `m × 1` column.
pub fn energy(g: &mut Graph, vars: &ModelVars, z: Var) -> Result<Var> {
    softmax_params(vars)?;
    let logits = head_logits(g, vars, z)?;
    let lse = g.logsumexp(logits)?;
    Ok(g.neg(lse))
}

/// Energy regularizer parts: `E[max(0, E(x^k) − m_in)²]` and `E[max(0, m_out − E(x^b))²]`.
pub fn loss_energy(g: &mut Graph, vars: &ModelVars, z: Var, z_bg: Var, m_in: f64, m_out: f64) -> Result<(Var, Var)> {
    let e_known = energy(g, vars, z)?;
    let over = g.add_scalar(e_known, -m_in);
    let over = g.relu(over);
    let over = g.square(over);
    let known = g.mean(over);

    let e_bg = energy(g, vars, z_bg)?;
    let neg = g.neg(e_bg);
    let under = g.add_scalar(neg, m_out);
    let under = g.relu(under);
    let under = g.square(under);
    let bg = g.mean(under);
    Ok((known, bg))
}

/// Builds the full objective selected by `cfg` on an already-registered model.
pub fn evaluate(
    g: &mut Graph,
    model: &Model,
    vars: &ModelVars,
    pair: &BatchPair<'_>,
    cfg: &LossConfig,
) -> Result<LossTerms> {
    if let Some(kind) = cfg.family.head_kind() {
        if kind != model.head_kind() {
            return Err(Error::contract(format!(
                "loss family {} needs a {:?} head, model has {:?}",
                cfg.family.name(),
                kind,
                model.head_kind()
            )));
        }
    }
    let x = g.constant(pair.known.clone());
    let z = model.forward_latent(g, vars, x)?;
    let cf = loss_cf(g, vars, z, pair.labels)?;
    if cfg.family == LossFamily::None {
        return Ok(LossTerms {
            total: cf,
            cf,
            bg_known: None,
            bg_background: None,
        });
    }
    let background = pair
        .background
        .ok_or_else(|| Error::contract("background batch required for a regularized loss"))?;
    if background.rows() == 0 {
        return Err(Error::contract("empty background batch"));
    }
    let xb = g.constant(background.clone());
    let zb = model.forward_latent(g, vars, xb)?;
    let n = model.latent_dim() as u32;

    let (known, bg) = match cfg.family {
        LossFamily::ClassInclusion => {
            let (anchors, _) = anchors_of(vars)?;
            let k = loss_bg_k(g, anchors, z, pair.labels, n)?;
            let u = loss_bg_u(g, anchors, zb, n)?;
            (Some(k), Some(u))
        }
        LossFamily::Hsc => {
            let (anchors, _) = anchors_of(vars)?;
            let (k, u) = loss_hsc(g, anchors, z, pair.labels, zb)?;
            (Some(k), Some(u))
        }
        LossFamily::Triplet => {
            let (anchors, _) = anchors_of(vars)?;
            let t = loss_triplet(g, anchors, z, pair.labels, zb, cfg.triplet_margin)?;
            (None, Some(t))
        }
        LossFamily::Objectosphere => {
            let (k, u) = loss_objectosphere(g, vars, z, zb, cfg.xi_for(model.latent_dim()))?;
            (Some(k), Some(u))
        }
        LossFamily::Uniformity => (None, Some(loss_uniformity(g, vars, zb)?)),
        LossFamily::Energy => {
            let (k, u) = loss_energy(g, vars, z, zb, cfg.energy_m_in, cfg.energy_m_out)?;
            (Some(k), Some(u))
        }
        LossFamily::None => unreachable!(),
    };
    let reg = match (known, bg) {
        (Some(k), Some(u)) => g.add(k, u)?,
        (Some(k), None) => k,
        (None, Some(u)) => u,
        (None, None) => unreachable!(),
    };
    let scaled = g.scalar_mul(reg, cfg.lambda);
    let total = g.add(cf, scaled)?;
    Ok(LossTerms {
        total,
        cf,
        bg_known: known,
        bg_background: bg,
    })
}
