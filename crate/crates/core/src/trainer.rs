//! SGD with momentum, linear warm-up and cosine learning-rate decay.
//!
//! Every source of randomness is derived from `(seed, epoch)`, so a run can
//! be stopped after any epoch and resumed from a [`TrainState`] alone.

use alloc::format;
use alloc::vec::Vec;

use crate::autodiff::{Graph, Tensor, Var};
use crate::data::{batch_iter, derive_seed, CyclingSampler, DatasetBundle};
use crate::error::{Error, Result};
use crate::losses::{evaluate, BatchPair, LossConfig, LossFamily, LossValues};
use crate::model::{argmax, HeadVars, Model, ModelVars};

/// Sampler stream reserved for background batches.
const BACKGROUND_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimConfig {
    pub epochs: usize,
    pub batch_size_known: usize,
    pub batch_size_background: usize,
    pub lr_init: f64,
    pub warmup_epochs: usize,
    pub momentum: f64,
    pub seed: u64,
    /// Checkpoint period in epochs; 0 disables checkpoints.
    pub checkpoint_every: usize,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            epochs: 300,
            batch_size_known: 64,
            batch_size_background: 64,
            lr_init: 0.01,
            warmup_epochs: 5,
            momentum: 0.9,
            seed: 0,
            checkpoint_every: 0,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("optim.epochs", "must be at least 1"));
        }
        if self.batch_size_known == 0 {
            return Err(Error::invalid("optim.batch_size_known", "must be positive"));
        }
        if self.batch_size_background == 0 {
            return Err(Error::invalid("optim.batch_size_background", "must be positive"));
        }
        if !(self.lr_init.is_finite() && self.lr_init > 0.0) {
            return Err(Error::invalid("optim.lr_init", format!("{} is not a positive number", self.lr_init)));
        }
        if self.warmup_epochs >= self.epochs {
            return Err(Error::invalid(
                "optim.warmup_epochs",
                format!("{} is not below epochs = {}", self.warmup_epochs, self.epochs),
            ));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("optim.momentum", format!("{} is outside [0, 1)", self.momentum)));
        }
        Ok(())
    }
}

/// Learning rate for `epoch` (0-based).
///
/// Warm-up ramps `lr_init · epoch / W` for `epoch < W`; afterwards the rate
/// follows `lr_init · ½(1 + cos(π · (epoch − W) / (E − 1 − W)))`.
pub fn lr_schedule(epoch: usize, cfg: &OptimConfig) -> f64 {
    let w = cfg.warmup_epochs;
    if epoch < w {
        return cfg.lr_init * epoch as f64 / w as f64;
    }
    let span = cfg.epochs.saturating_sub(1 + w);
    let progress = if span == 0 {
        0.0
    } else {
        ((epoch - w) as f64 / span as f64).min(1.0)
    };
    cfg.lr_init * 0.5 * (1.0 + libm::cos(core::f64::consts::PI * progress))
}

/// Per-epoch means of the loss parts over all steps of the epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainRecord {
    pub epoch: usize,
    pub lr: f64,
    pub loss_cf: f64,
    pub loss_bg_known: f64,
    pub loss_bg_background: f64,
    pub loss_total: f64,
    /// Closed-set accuracy on the training knowns after the epoch.
    pub train_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainTrace {
    pub records: Vec<TrainRecord>,
}

/// Everything needed to continue a run: parameters, momentum buffers and
/// the number of completed epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub model: Model,
    /// One buffer per entry of [`Model::parameters`].
    pub velocity: Vec<Tensor>,
    pub epochs_done: usize,
}

impl TrainState {
    pub fn new(model: Model) -> Self {
        let velocity = model
            .parameters()
            .iter()
            .map(|p| Tensor::zeros(p.shape().to_vec()))
            .collect();
        TrainState {
            model,
            velocity,
            epochs_done: 0,
        }
    }

    fn check(&self) -> Result<()> {
        let params = self.model.parameters();
        if params.len() != self.velocity.len()
            || params.iter().zip(&self.velocity).any(|(p, v)| p.shape() != v.shape())
        {
            return Err(Error::contract("velocity buffers do not match the model parameters"));
        }
        Ok(())
    }
}

fn vars_in_order(vars: &ModelVars) -> Vec<Var> {
    let mut out: Vec<Var> = vars.layers.iter().flat_map(|&(w, b)| [w, b]).collect();
    match vars.head {
        HeadVars::Distance { anchors, .. } => out.push(anchors),
        HeadVars::Softmax { weight, bias } => {
            out.push(weight);
            out.push(bias);
        }
    }
    out
}

fn check_compatible(bundle: &DatasetBundle, model: &Model, loss: &LossConfig) -> Result<()> {
    bundle.validate()?;
    if bundle.input_dim() != model.input_dim() {
        return Err(Error::shape("train", &[bundle.input_dim()], &[model.input_dim()]));
    }
    if bundle.classes() > model.classes() {
        return Err(Error::contract(format!(
            "data has {} classes, model has {}",
            bundle.classes(),
            model.classes()
        )));
    }
    if loss.family != LossFamily::None && bundle.background.is_empty() {
        return Err(Error::contract("regularized training needs background samples"));
    }
    loss.validate()
}

/// Closed-set accuracy of `model` on the training knowns.
pub fn train_accuracy(model: &Model, bundle: &DatasetBundle) -> Result<f64> {
    let set = &bundle.train_known;
    let labels = set.labels().ok_or_else(|| Error::contract("training knowns need labels"))?;
    let mut correct = 0usize;
    for (x, &y) in set.rows().zip(labels) {
        if argmax(&model.posterior(x)?) == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / set.len() as f64)
}

/// One SGD-with-momentum step on one batch pair: `v ← μv + g`, `p ← p − lr·v`.
/// Returns the loss values before the update.
pub fn sgd_step(
    state: &mut TrainState,
    pair: &BatchPair<'_>,
    loss: &LossConfig,
    lr: f64,
    momentum: f64,
) -> Result<LossValues> {
    let mut g = Graph::new();
    let vars = state.model.register(&mut g);
    let terms = evaluate(&mut g, &state.model, &vars, pair, loss)?;
    let values = terms.values(&g);
    if !values.total.is_finite() {
        return Err(Error::Diverged { epoch: state.epochs_done, step: 0 });
    }
    g.backward(terms.total)?;
    let order = vars_in_order(&vars);
    let trainable: Vec<bool> = (0..order.len()).map(|i| state.model.is_trainable(i)).collect();
    for (i, param) in state.model.parameters_mut().into_iter().enumerate() {
        if !trainable[i] {
            continue;
        }
        let Some(grad) = g.grad(order[i]) else { continue };
        let velocity = state.velocity[i].data_mut();
        for ((p, v), &d) in param.data_mut().iter_mut().zip(velocity.iter_mut()).zip(grad.data()) {
            *v = momentum * *v + d;
            *p -= lr * *v;
        }
    }
    Ok(values)
}

/// Runs one epoch (`state.epochs_done`) and advances the epoch counter.
pub fn run_epoch(
    state: &mut TrainState,
    bundle: &DatasetBundle,
    loss: &LossConfig,
    optim: &OptimConfig,
) -> Result<TrainRecord> {
    let epoch = state.epochs_done;
    let lr = lr_schedule(epoch, optim);
    let known = &bundle.train_known;
    let labels = known.labels().ok_or_else(|| Error::contract("training knowns need labels"))?;
    let batches = batch_iter(known.len(), optim.batch_size_known, optim.seed, epoch as u64, true)?;
    let regularized = loss.family != LossFamily::None;
    let mut background = CyclingSampler::new(
        bundle.background.len(),
        derive_seed(optim.seed, epoch as u64, BACKGROUND_STREAM),
    );

    let mut sums = LossValues::default();
    for (step, idx) in batches.iter().enumerate() {
        let x = known.gather(idx)?;
        let y: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
        let bg = if regularized {
            let bidx = background.next_batch(optim.batch_size_background);
            Some(bundle.background.gather(&bidx)?)
        } else {
            None
        };
        let pair = BatchPair {
            known: &x,
            labels: &y,
            background: bg.as_ref(),
        };
        let v = sgd_step(state, &pair, loss, lr, optim.momentum).map_err(|e| match e {
            Error::Diverged { .. } => Error::Diverged { epoch, step },
            other => other,
        })?;
        sums.total += v.total;
        sums.cf += v.cf;
        sums.bg_known += v.bg_known;
        sums.bg_background += v.bg_background;
    }
    if state.model.parameters().iter().any(|p| p.data().iter().any(|x| !x.is_finite())) {
        return Err(Error::Diverged { epoch, step: batches.len() });
    }
    state.epochs_done += 1;
    let steps = batches.len() as f64;
    Ok(TrainRecord {
        epoch,
        lr,
        loss_cf: sums.cf / steps,
        loss_bg_known: sums.bg_known / steps,
        loss_bg_background: sums.bg_background / steps,
        loss_total: sums.total / steps,
        train_accuracy: train_accuracy(&state.model, bundle)?,
    })
}

/// Continues `state` until `stop_epoch` epochs are complete (capped at
/// `optim.epochs`), calling `on_epoch` after each one.
pub fn train_until<F>(
    state: &mut TrainState,
    bundle: &DatasetBundle,
    loss: &LossConfig,
    optim: &OptimConfig,
    stop_epoch: usize,
    mut on_epoch: F,
) -> Result<TrainTrace>
where
    F: FnMut(&TrainState, &TrainRecord) -> Result<()>,
{
    optim.validate()?;
    state.check()?;
    check_compatible(bundle, &state.model, loss)?;
    let mut trace = TrainTrace::default();
    while state.epochs_done < stop_epoch.min(optim.epochs) {
        let record = run_epoch(state, bundle, loss, optim)?;
        on_epoch(state, &record)?;
        trace.records.push(record);
    }
    Ok(trace)
}

/// Trains `model` from scratch for `optim.epochs` epochs.
pub fn train(
    bundle: &DatasetBundle,
    model: Model,
    loss: &LossConfig,
    optim: &OptimConfig,
) -> Result<(Model, TrainTrace)> {
    let mut state = TrainState::new(model);
    let trace = train_until(&mut state, bundle, loss, optim, optim.epochs, |_, _| Ok(()))?;
    Ok((state.model, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate, SampleSet, SyntheticSpec};
    use crate::model::{Dense, DistanceHead, Head, HeadKind, Mlp};
    use alloc::vec;

    fn small_bundle() -> DatasetBundle {
        generate(&SyntheticSpec {
            total_classes: 5,
            kkc_count: 3,
            uuc_count: 1,
            samples_per_class: 40,
            ..SyntheticSpec::default()
        })
        .unwrap()
    }

    fn small_optim(epochs: usize) -> OptimConfig {
        OptimConfig {
            epochs,
            warmup_epochs: 1,
            batch_size_known: 16,
            batch_size_background: 16,
            ..OptimConfig::default()
        }
    }

    #[test]
    fn schedule_examples() {
        let cfg = OptimConfig { epochs: 100, ..OptimConfig::default() };
        assert_eq!(lr_schedule(0, &cfg), 0.0);
        assert_eq!(lr_schedule(2, &cfg), 0.004);
        assert_eq!(lr_schedule(5, &cfg), 0.01);
        assert!(lr_schedule(99, &cfg).abs() < 1e-18);
        for e in 5..100 {
            // independent oracle: half-cosine over the 94 post-warm-up steps
            let t = (e - 5) as f64 / 94.0;
            let expected = 0.005 * (1.0 + (core::f64::consts::PI * t).cos());
            assert!((lr_schedule(e, &cfg) - expected).abs() < 1e-16);
            assert!(lr_schedule(e + 1, &cfg) <= lr_schedule(e, &cfg));
        }
    }

    #[test]
    fn optim_validation() {
        assert!(OptimConfig::default().validate().is_ok());
        let bad = [
            OptimConfig { epochs: 0, ..OptimConfig::default() },
            OptimConfig { lr_init: 0.0, ..OptimConfig::default() },
            OptimConfig { warmup_epochs: 300, ..OptimConfig::default() },
            OptimConfig { momentum: 1.0, ..OptimConfig::default() },
            OptimConfig { batch_size_known: 0, ..OptimConfig::default() },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(Error::Invalid { .. })), "{cfg:?}");
        }
    }

    #[test]
    fn hand_computed_sgd_step() {
        // f(x) = w·x + b, anchors frozen at -1 and +1, one sample x = 1, y = 1
        let layer = Dense {
            weight: Tensor::matrix(1, 1, vec![0.5]).unwrap(),
            bias: Tensor::matrix(1, 1, vec![0.2]).unwrap(),
        };
        let head = DistanceHead::new(Tensor::matrix(2, 1, vec![-1.0, 1.0]).unwrap()).unwrap();
        let mut model = Model::new(Mlp::from_layers(vec![layer]).unwrap(), Head::Distance(head)).unwrap();
        model.freeze_anchors = true;
        let mut state = TrainState::new(model);

        let x = Tensor::matrix(1, 1, vec![1.0]).unwrap();
        let pair = BatchPair { known: &x, labels: &[1], background: None };
        let cfg = LossConfig::new(LossFamily::None, 0.0);

        // z = 0.7, L = -log softmax(-(z+1)², -(z-1)²)[1]
        // dL/dz = -(dlogit1/dz - Σ p_c dlogit_c/dz), dlogit_c/dz = -2(z - μ_c)
        let z: f64 = 0.7;
        let l0 = -(z + 1.0) * (z + 1.0);
        let l1 = -(z - 1.0) * (z - 1.0);
        let p0 = l0.exp() / (l0.exp() + l1.exp());
        let p1 = 1.0 - p0;
        let dz = -(-2.0 * (z - 1.0) - (p0 * -2.0 * (z + 1.0) + p1 * -2.0 * (z - 1.0)));
        let (lr, mu) = (0.1, 0.9);

        let v = sgd_step(&mut state, &pair, &cfg, lr, mu).unwrap();
        assert!((v.total - (-p1.ln())).abs() < 1e-14);
        let w = state.model.extractor().layers()[0].weight.data()[0];
        let b = state.model.extractor().layers()[0].bias.data()[0];
        assert!((w - (0.5 - lr * dz)).abs() < 1e-14);
        assert!((b - (0.2 - lr * dz)).abs() < 1e-14);
        assert_eq!(state.model.distance_head().unwrap().anchors().data(), &[-1.0, 1.0]);

        // second step carries momentum: v = μ·dz + dz'
        let z2 = w + b;
        let l0 = -(z2 + 1.0) * (z2 + 1.0);
        let l1 = -(z2 - 1.0) * (z2 - 1.0);
        let p0 = l0.exp() / (l0.exp() + l1.exp());
        let p1 = 1.0 - p0;
        let dz2 = -(-2.0 * (z2 - 1.0) - (p0 * -2.0 * (z2 + 1.0) + p1 * -2.0 * (z2 - 1.0)));
        sgd_step(&mut state, &pair, &cfg, lr, mu).unwrap();
        let w2 = state.model.extractor().layers()[0].weight.data()[0];
        assert!((w2 - (w - lr * (mu * dz + dz2))).abs() < 1e-14);
    }

    #[test]
    fn zero_epochs_leave_model_untouched() {
        let bundle = small_bundle();
        let model = Model::init(&[2, 8, 4], 3, HeadKind::Distance, 1).unwrap();
        let mut state = TrainState::new(model.clone());
        let trace = train_until(
            &mut state,
            &bundle,
            &LossConfig::new(LossFamily::ClassInclusion, 1.0),
            &small_optim(3),
            0,
            |_, _| Ok(()),
        )
        .unwrap();
        assert!(trace.records.is_empty());
        assert_eq!(state.model, model);
    }

    #[test]
    fn lambda_zero_matches_unregularized_bitwise() {
        let bundle = small_bundle();
        let model = Model::init(&[2, 8, 4], 3, HeadKind::Distance, 3).unwrap();
        let optim = small_optim(3);
        let (a, _) = train(&bundle, model.clone(), &LossConfig::new(LossFamily::ClassInclusion, 0.0), &optim).unwrap();
        let (b, _) = train(&bundle, model, &LossConfig::new(LossFamily::None, 0.0), &optim).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn training_is_deterministic_and_resumable() {
        let bundle = small_bundle();
        let model = Model::init(&[2, 8, 4], 3, HeadKind::Distance, 5).unwrap();
        let loss = LossConfig::new(LossFamily::ClassInclusion, 1.0);
        let optim = small_optim(4);
        let (a, trace_a) = train(&bundle, model.clone(), &loss, &optim).unwrap();
        let (b, trace_b) = train(&bundle, model.clone(), &loss, &optim).unwrap();
        assert_eq!(a, b);
        assert_eq!(trace_a, trace_b);
        assert_eq!(trace_a.records.len(), 4);

        let mut state = TrainState::new(model);
        train_until(&mut state, &bundle, &loss, &optim, 2, |_, _| Ok(())).unwrap();
        let snapshot = state.clone();
        let mut resumed = snapshot;
        let rest = train_until(&mut resumed, &bundle, &loss, &optim, 4, |_, _| Ok(())).unwrap();
        assert_eq!(resumed.model, a);
        assert_eq!(rest.records, trace_a.records[2..]);
    }

    #[test]
    fn training_reduces_closed_set_loss() {
        let bundle = small_bundle();
        let model = Model::init(&[2, 8, 4], 3, HeadKind::Distance, 7).unwrap();
        let (_, trace) = train(&bundle, model, &LossConfig::new(LossFamily::None, 0.0), &small_optim(10)).unwrap();
        let first = trace.records[1].loss_cf;
        let last = trace.records.last().unwrap().loss_cf;
        assert!(last < first, "{first} -> {last}");
    }

    #[test]
    fn divergence_is_reported_with_position() {
        let bundle = small_bundle();
        let model = Model::init(&[2, 8, 4], 3, HeadKind::Distance, 7).unwrap();
        let optim = OptimConfig { lr_init: 1e12, ..small_optim(5) };
        let err = train(&bundle, model, &LossConfig::new(LossFamily::None, 0.0), &optim).unwrap_err();
        assert!(matches!(err, Error::Diverged { epoch, .. } if epoch >= 1), "{err:?}");
    }

    #[test]
    fn incompatible_inputs_are_rejected() {
        let bundle = small_bundle();
        let wrong_dim = Model::init(&[3, 4], 3, HeadKind::Distance, 0).unwrap();
        assert!(train(&bundle, wrong_dim, &LossConfig::default(), &small_optim(1)).is_err());
        let softmax = Model::init(&[2, 4], 3, HeadKind::Softmax, 0).unwrap();
        assert!(train(&bundle, softmax, &LossConfig::new(LossFamily::ClassInclusion, 1.0), &small_optim(1)).is_err());
        let mut no_bg = bundle.clone();
        no_bg.background = SampleSet::new(2, vec![], None).unwrap();
        let model = Model::init(&[2, 4], 3, HeadKind::Distance, 0).unwrap();
        assert!(train(&no_bg, model, &LossConfig::new(LossFamily::ClassInclusion, 1.0), &small_optim(1)).is_err());
    }
}
