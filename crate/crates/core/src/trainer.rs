//! Candidate training: a joint phase over weights and a sigmoid-relaxed
//! feature mask under an L1 penalty, hard thresholding, then weight-only
//! training under a cyclic cosine learning rate whose cycle ends feed a
//! snapshot ensemble.

use crate::data::{DataError, LoadDataset};
use crate::genotype::{build_network, Genotype, GenotypeError, Network};
use crate::layers::Mode;
use crate::tensor::{sigmoid, Adam, AdamConfig, StepOutcome, Tape, Tensor, TensorError, Var};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::time::{Duration, Instant};
use thiserror::Error;

/// Batch loss on standardized targets above which training counts as diverged.
pub const DIVERGENCE_LOSS: f64 = 1e8;

fn diverged(loss: f64) -> bool {
    !loss.is_finite() || loss > DIVERGENCE_LOSS
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WInit {
    /// Uniform on `[-1, 1]`.
    Uniform,
    Zeros,
    Ones,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Joint feature/weight epochs.
    pub e_w: usize,
    /// Weight-only epochs.
    pub e_theta: usize,
    /// L1 coefficient on the relaxed mask.
    pub epsilon: f64,
    /// Base learning rate.
    pub lr: f64,
    /// Learning rate of the mask logits during the joint phase.
    pub mask_lr: f64,
    /// L2 coefficient on the network weights during the joint phase.
    pub weight_decay: f64,
    pub cycles: usize,
    /// Snapshots kept in the ensemble.
    pub snapshots: usize,
    /// Wall-clock budget per candidate, seconds.
    pub time_budget: f64,
    pub w_init: WInit,
    pub batch_size: usize,
    pub seed: u64,
    /// Candidates above this per-sample multiply-accumulate estimate are
    /// rejected without training.
    pub max_macs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            e_w: 20,
            e_theta: 40,
            epsilon: 1e-3,
            lr: 1e-2,
            mask_lr: 1e-2,
            weight_decay: 0.1,
            cycles: 5,
            snapshots: 5,
            time_budget: 120.0,
            w_init: WInit::Zeros,
            batch_size: 32,
            seed: 0,
            max_macs: 200_000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), String> {
        let bad = |m: &str| Err(m.to_string());
        if self.e_theta < 1 {
            return bad("e_theta must be >= 1");
        }
        if !(self.epsilon >= 0.0) {
            return bad("epsilon must be >= 0");
        }
        if !(self.lr > 0.0) || !(self.mask_lr > 0.0) {
            return bad("lr and mask_lr must be > 0");
        }
        if self.cycles < 1 || self.snapshots < 1 || self.batch_size < 1 {
            return bad("cycles, snapshots and batch_size must be >= 1");
        }
        if !(self.time_budget > 0.0) {
            return bad("time_budget must be > 0");
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("non-finite or diverged loss in phase {phase}, epoch {epoch}")]
    NonFinite { phase: u8, epoch: usize },
    #[error("estimated cost {macs} MAC/sample exceeds the cap {max}")]
    TooCostly { macs: usize, max: usize },
    #[error(transparent)]
    Genotype(#[from] GenotypeError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("{0}")]
    Contract(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl From<DataError> for TrainError {
    fn from(e: DataError) -> Self {
        TrainError::Contract(e.to_string())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("series lengths differ ({0} vs {1})")]
    Length(usize, usize),
    #[error("MAPE undefined: target is zero at index {0}")]
    ZeroTarget(usize),
    #[error("empty series")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    /// Fraction, not percent.
    pub mape: f64,
    pub rmse: f64,
}

pub fn compute_metrics(y: &[f64], yhat: &[f64]) -> Result<Metrics, MetricsError> {
    if y.len() != yhat.len() {
        return Err(MetricsError::Length(y.len(), yhat.len()));
    }
    if y.is_empty() {
        return Err(MetricsError::Empty);
    }
    if let Some(i) = y.iter().position(|&v| v == 0.0) {
        return Err(MetricsError::ZeroTarget(i));
    }
    let n = y.len() as f64;
    let mut se = 0.0;
    let mut ape = 0.0;
    for (a, b) in y.iter().zip(yhat) {
        se += (a - b) * (a - b);
        ape += ((a - b) / a).abs();
    }
    let mse = se / n;
    Ok(Metrics {
        mse,
        mape: ape / n,
        rmse: mse.sqrt(),
    })
}

/// Cosine schedule restarting every `ceil(e_theta / cycles)` epochs; `t` is 1-based.
pub fn cyclic_lr(t: usize, e_theta: usize, cycles: usize, lr0: f64) -> f64 {
    let len = cycle_len(e_theta, cycles);
    let pos = ((t - 1) % len) as f64;
    lr0 / 2.0 * ((std::f64::consts::PI * pos / len as f64).cos() + 1.0)
}

pub fn cycle_len(e_theta: usize, cycles: usize) -> usize {
    e_theta.div_ceil(cycles).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskPhase {
    Joint,
    Frozen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMask {
    pub w_raw: Vec<f64>,
    pub p: Vec<bool>,
    pub phase: MaskPhase,
}

impl FeatureMask {
    pub fn new(f: usize, init: WInit, rng: &mut impl Rng) -> Self {
        let w_raw = (0..f)
            .map(|_| match init {
                WInit::Uniform => rng.random_range(-1.0..=1.0),
                WInit::Zeros => 0.0,
                WInit::Ones => 1.0,
            })
            .collect();
        FeatureMask {
            w_raw,
            p: vec![true; f],
            phase: MaskPhase::Joint,
        }
    }

    pub fn relaxed(&self) -> Vec<f64> {
        self.w_raw.iter().map(|&w| sigmoid(w)).collect()
    }

    pub fn selected(&self) -> Vec<usize> {
        (0..self.p.len()).filter(|&j| self.p[j]).collect()
    }

    /// `x (n, H, F)` with unselected feature columns zeroed.
    pub fn apply_frozen(&self, x: &Tensor) -> Tensor {
        let f = self.p.len();
        let mut out = x.clone();
        for (i, v) in out.data_mut().iter_mut().enumerate() {
            if !self.p[i % f] {
                *v = 0.0;
            }
        }
        out
    }
}

/// `p_j = [w_j > 0]`; when nothing survives, keeps the argmax feature.
pub fn threshold_mask(mask: &FeatureMask) -> FeatureMask {
    let mut p: Vec<bool> = mask.w_raw.iter().map(|&w| w > 0.0).collect();
    if !p.iter().any(|&b| b) {
        let best = (0..p.len())
            .max_by(|&a, &b| mask.w_raw[a].total_cmp(&mask.w_raw[b]).then(b.cmp(&a)))
            .expect("at least one feature");
        p[best] = true;
    }
    FeatureMask {
        w_raw: mask.w_raw.clone(),
        p,
        phase: MaskPhase::Frozen,
    }
}

/// Affine target scaling fitted on the train block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetScale {
    pub mean: f64,
    pub std: f64,
}

impl TargetScale {
    pub fn fit(y: &[f64]) -> Self {
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        TargetScale {
            mean,
            std: var.sqrt().max(1e-8),
        }
    }

    pub fn forward(&self, y: &Tensor) -> Tensor {
        y.map(|v| (v - self.mean) / self.std)
    }

    pub fn inverse(&self, y: &Tensor) -> Tensor {
        y.map(|v| v * self.std + self.mean)
    }
}

/// Wall-clock cutoff for one candidate.
#[derive(Debug, Clone, Copy)]
pub struct Deadline {
    start: Instant,
    budget: Duration,
}

impl Deadline {
    pub fn new(seconds: f64) -> Self {
        Deadline {
            start: Instant::now(),
            budget: Duration::from_secs_f64(seconds.min(1e9)),
        }
    }

    pub fn expired(&self) -> bool {
        self.start.elapsed() >= self.budget
    }

    pub fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }
}

fn gather(t: &Tensor, rows: &[usize]) -> Tensor {
    let per: usize = t.shape()[1..].iter().product();
    let mut data = Vec::with_capacity(rows.len() * per);
    for &r in rows {
        data.extend_from_slice(&t.data()[r * per..(r + 1) * per]);
    }
    let mut shape = t.shape().to_vec();
    shape[0] = rows.len();
    Tensor::new(shape, data).expect("gathered shape")
}

fn batches(n: usize, size: usize, rng: &mut impl Rng) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.chunks(size).map(<[usize]>::to_vec).collect()
}

/// Records `x ⊙ sigmoid(w)` with the mask broadcast over batch and time.
pub fn masked_input(tape: &mut Tape, x: Var, w: Var) -> Result<Var, TensorError> {
    let shape = tape.shape(x).to_vec();
    let f = shape[2];
    let s = tape.sigmoid(w);
    let s = tape.reshape(s, &[1, 1, f])?;
    let s = tape.broadcast_to(s, &shape)?;
    tape.mul(x, s)
}

/// Joint loss `MSE + eps * sum(sigmoid(w))` and its gradients with respect
/// to the network weights and `w_raw`, on one batch.
pub fn joint_gradients(
    net: &mut Network,
    w_raw: &[f64],
    x: &Tensor,
    y: &Tensor,
    epsilon: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, Vec<Vec<f64>>, Vec<f64>), TrainError> {
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let wv = tape.param(Tensor::from_vec(w_raw.to_vec()));
    let xm = masked_input(&mut tape, xv, wv)?;
    let (pred, pvars) = net.forward(&mut tape, xm, Mode::Train, rng)?;
    let yv = tape.constant(y.clone());
    let mse = tape.mse(pred, yv)?;
    let s = tape.sigmoid(wv);
    let l1 = tape.sum(s);
    let pen = tape.scale(l1, epsilon);
    let loss = tape.add(mse, pen)?;
    let value = tape.value(loss).data()[0];
    let grads = tape.backward(loss)?;
    let gp = pvars.iter().map(|&v| grads.wrt(v)).collect();
    Ok((value, gp, grads.wrt(wv)))
}

/// MSE loss and weight gradients on one batch of already-masked inputs.
pub fn weight_gradients(
    net: &mut Network,
    x: &Tensor,
    y: &Tensor,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, Vec<Vec<f64>>), TrainError> {
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let (pred, pvars) = net.forward(&mut tape, xv, Mode::Train, rng)?;
    let yv = tape.constant(y.clone());
    let loss = tape.mse(pred, yv)?;
    let value = tape.value(loss).data()[0];
    let grads = tape.backward(loss)?;
    Ok((value, pvars.iter().map(|&v| grads.wrt(v)).collect()))
}

/// Phase 1: `e_w` epochs over weights and mask. Returns whether the
/// deadline cut it short.
pub fn phase1_train(
    net: &mut Network,
    mask: &mut FeatureMask,
    x: &Tensor,
    y: &Tensor,
    cfg: &TrainConfig,
    deadline: &Deadline,
    rng: &mut ChaCha8Rng,
) -> Result<bool, TrainError> {
    if mask.phase != MaskPhase::Joint {
        return Err(TrainError::Contract("phase 1 needs a joint-phase mask".into()));
    }
    let mut opt_theta = Adam::new(&net.params, AdamConfig::default());
    let mut w = vec![Tensor::from_vec(mask.w_raw.clone())];
    let mut opt_w = Adam::new(&w, AdamConfig::default());
    for epoch in 1..=cfg.e_w {
        for rows in batches(x.shape()[0], cfg.batch_size, rng) {
            if deadline.expired() {
                mask.w_raw = w[0].data().to_vec();
                return Ok(true);
            }
            let (xb, yb) = (gather(x, &rows), gather(y, &rows));
            let (loss, mut gp, gw) = joint_gradients(net, w[0].data(), &xb, &yb, cfg.epsilon, rng)?;
            if cfg.weight_decay > 0.0 {
                for (g, p) in gp.iter_mut().zip(&net.params) {
                    g.iter_mut()
                        .zip(p.data())
                        .for_each(|(g, p)| *g += 2.0 * cfg.weight_decay * p);
                }
            }
            let fail = TrainError::NonFinite { phase: 1, epoch };
            if diverged(loss) {
                return Err(fail);
            }
            if opt_theta.step(&mut net.params, &gp, cfg.lr)? == StepOutcome::SkippedNonFinite
                || opt_w.step(&mut w, &[gw], cfg.mask_lr)? == StepOutcome::SkippedNonFinite
                || !net.params.iter().all(Tensor::is_finite)
            {
                return Err(fail);
            }
        }
    }
    mask.w_raw = w.swap_remove(0).into_data();
    Ok(false)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub params: Vec<Tensor>,
    pub buffers: Vec<Tensor>,
    /// Validation MSE in target units.
    pub valid_mse: f64,
    pub epoch: usize,
}

/// At most `capacity` snapshots, sorted by validation MSE ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotEnsemble {
    pub members: Vec<Snapshot>,
    pub capacity: usize,
    /// Every snapshot scored, kept or not.
    pub scored: usize,
}

impl SnapshotEnsemble {
    pub fn new(capacity: usize) -> Self {
        SnapshotEnsemble {
            members: Vec::new(),
            capacity,
            scored: 0,
        }
    }

    pub fn insert(&mut self, s: Snapshot) {
        self.scored += 1;
        let at = self.members.partition_point(|m| m.valid_mse <= s.valid_mse);
        self.members.insert(at, s);
        self.members.truncate(self.capacity);
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Natural-unit predictions of one parameter set.
fn predict_with(
    net: &mut Network,
    params: &[Tensor],
    buffers: &[Tensor],
    x: &Tensor,
    scale: &TargetScale,
) -> Result<Tensor, TrainError> {
    let saved = (std::mem::take(&mut net.params), std::mem::take(&mut net.buffers));
    net.params = params.to_vec();
    net.buffers = buffers.to_vec();
    let out = net.predict(x);
    net.params = saved.0;
    net.buffers = saved.1;
    Ok(scale.inverse(&out?))
}

/// Mean of the member forecasts, in target units.
pub fn ensemble_predict(
    e: &SnapshotEnsemble,
    net: &mut Network,
    x: &Tensor,
    scale: &TargetScale,
) -> Result<Tensor, TrainError> {
    if e.is_empty() {
        return Err(TrainError::Contract("empty snapshot ensemble".into()));
    }
    let mut acc: Option<Tensor> = None;
    for m in &e.members {
        let p = predict_with(net, &m.params, &m.buffers, x, scale)?;
        acc = Some(match acc {
            None => p,
            Some(mut a) => {
                a.data_mut().iter_mut().zip(p.data()).for_each(|(s, v)| *s += v);
                a
            }
        });
    }
    let n = e.members.len() as f64;
    Ok(acc.unwrap().map(|v| v / n))
}

/// Per-member forecasts in target units.
pub fn member_predictions(
    e: &SnapshotEnsemble,
    net: &mut Network,
    x: &Tensor,
    scale: &TargetScale,
) -> Result<Vec<Tensor>, TrainError> {
    e.members
        .iter()
        .map(|m| predict_with(net, &m.params, &m.buffers, x, scale))
        .collect()
}

/// Phase 2 data: masked inputs plus targets, the train targets scaled.
pub struct Phase2Data<'a> {
    pub x_train: &'a Tensor,
    pub y_train: &'a Tensor,
    pub x_valid: &'a Tensor,
    /// Natural units.
    pub y_valid: &'a Tensor,
    pub scale: TargetScale,
}

/// Phase 2: `e_theta` epochs of weight training on frozen-masked inputs
/// with the cyclic rate; a snapshot is scored at each cycle end and at a
/// deadline stop.
pub fn phase2_train(
    net: &mut Network,
    mask: &FeatureMask,
    data: &Phase2Data<'_>,
    cfg: &TrainConfig,
    deadline: &Deadline,
    rng: &mut ChaCha8Rng,
) -> Result<(SnapshotEnsemble, bool), TrainError> {
    if mask.phase != MaskPhase::Frozen {
        return Err(TrainError::Contract("phase 2 needs a frozen mask".into()));
    }
    let mut ens = SnapshotEnsemble::new(cfg.snapshots);
    let len = cycle_len(cfg.e_theta, cfg.cycles);
    let mut opt = Adam::new(&net.params, AdamConfig::default());
    let snapshot = |net: &mut Network, ens: &mut SnapshotEnsemble, epoch| -> Result<(), TrainError> {
        let pred = predict_with(
            net,
            &net.params.clone(),
            &net.buffers.clone(),
            data.x_valid,
            &data.scale,
        )?;
        let valid_mse = compute_metrics(data.y_valid.data(), pred.data())?.mse;
        if !valid_mse.is_finite() {
            return Err(TrainError::NonFinite { phase: 2, epoch });
        }
        ens.insert(Snapshot {
            params: net.params.clone(),
            buffers: net.buffers.clone(),
            valid_mse,
            epoch,
        });
        Ok(())
    };
    for epoch in 1..=cfg.e_theta {
        let lr = cyclic_lr(epoch, cfg.e_theta, cfg.cycles, cfg.lr);
        for rows in batches(data.x_train.shape()[0], cfg.batch_size, rng) {
            if deadline.expired() {
                snapshot(net, &mut ens, epoch)?;
                return Ok((ens, true));
            }
            let (xb, yb) = (gather(data.x_train, &rows), gather(data.y_train, &rows));
            let (loss, gp) = weight_gradients(net, &xb, &yb, rng)?;
            let fail = TrainError::NonFinite { phase: 2, epoch };
            if diverged(loss) {
                return Err(fail);
            }
            if opt.step(&mut net.params, &gp, lr)? == StepOutcome::SkippedNonFinite
                || !net.params.iter().all(Tensor::is_finite)
            {
                return Err(fail);
            }
        }
        if epoch % len == 0 || epoch == cfg.e_theta {
            snapshot(net, &mut ens, epoch)?;
        }
    }
    Ok((ens, false))
}

/// A fully trained candidate.
pub struct TrainedModel {
    pub network: Network,
    pub mask: FeatureMask,
    pub ensemble: SnapshotEnsemble,
    pub scale: TargetScale,
    pub truncated: bool,
}

impl TrainedModel {
    /// Ensemble forecast in target units for raw (unmasked) inputs.
    pub fn predict(&mut self, x: &Tensor) -> Result<Tensor, TrainError> {
        let xm = self.mask.apply_frozen(x);
        ensemble_predict(&self.ensemble, &mut self.network, &xm, &self.scale)
    }

    pub fn predict_members(&mut self, x: &Tensor) -> Result<Vec<Tensor>, TrainError> {
        let xm = self.mask.apply_frozen(x);
        member_predictions(&self.ensemble, &mut self.network, &xm, &self.scale)
    }
}

/// Builds and trains `g` on the dataset's train block, scoring snapshots on
/// the valid block. Expects standardized features.
pub fn train_candidate(g: &Genotype, d: &LoadDataset, cfg: &TrainConfig) -> Result<TrainedModel, TrainError> {
    cfg.validate().map_err(TrainError::Contract)?;
    let split = d.split()?.clone();
    if g.h != d.h {
        return Err(TrainError::Contract(format!(
            "genotype output width {} does not match dataset H={}",
            g.h, d.h
        )));
    }
    let macs = g.macs(d.f)?;
    if macs > cfg.max_macs {
        return Err(TrainError::TooCostly {
            macs,
            max: cfg.max_macs,
        });
    }
    let deadline = Deadline::new(cfg.time_budget);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_7a1e);
    let mut network = build_network(g, d.f, cfg.seed)?;
    let x_train = d.x_days(split.train.clone());
    let y_train_raw = d.y_days(split.train.clone());
    let scale = TargetScale::fit(y_train_raw.data());
    let y_train = scale.forward(&y_train_raw);
    let mut mask = FeatureMask::new(d.f, cfg.w_init, &mut rng);
    let t1 = phase1_train(&mut network, &mut mask, &x_train, &y_train, cfg, &deadline, &mut rng)?;
    let mask = threshold_mask(&mask);
    let data = Phase2Data {
        x_train: &mask.apply_frozen(&x_train),
        y_train: &y_train,
        x_valid: &mask.apply_frozen(&d.x_days(split.valid.clone())),
        y_valid: &d.y_days(split.valid.clone()),
        scale,
    };
    let (ensemble, t2) = phase2_train(&mut network, &mask, &data, cfg, &deadline, &mut rng)?;
    Ok(TrainedModel {
        network,
        mask,
        ensemble,
        scale,
        truncated: t1 || t2,
    })
}

/// Outcome of one candidate evaluation. Failures carry `fitness = +inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// Validation MAPE of the ensemble.
    pub fitness: f64,
    pub valid_mse: f64,
    pub selected: Vec<usize>,
    pub mask_weights: Vec<f64>,
    /// Validation MSE of each kept snapshot.
    pub member_mse: Vec<f64>,
    pub member_mape: Vec<f64>,
    pub truncated: bool,
    pub seconds: f64,
    pub failure: Option<String>,
}

impl Evaluation {
    pub fn failed(reason: String, seconds: f64) -> Self {
        Evaluation {
            fitness: f64::INFINITY,
            valid_mse: f64::INFINITY,
            selected: Vec::new(),
            mask_weights: Vec::new(),
            member_mse: Vec::new(),
            member_mape: Vec::new(),
            truncated: false,
            seconds,
            failure: Some(reason),
        }
    }

    /// `candidate-id,fitness-mape,valid-mse,n-selected-features,wall-seconds,truncated`
    pub fn csv_line(&self, id: u64) -> String {
        format!(
            "{id},{},{},{},{:.3},{}",
            self.fitness,
            self.valid_mse,
            self.selected.len(),
            self.seconds,
            u8::from(self.truncated)
        )
    }
}

pub const EVALUATION_CSV_HEADER: &str = "candidate_id,fitness_mape,valid_mse,n_selected,wall_seconds,truncated";

/// Trains `g` and scores the ensemble on the valid block; any failure maps
/// to the `+inf` sentinel.
pub fn evaluate_candidate(g: &Genotype, d: &LoadDataset, cfg: &TrainConfig) -> Evaluation {
    let start = Instant::now();
    let run = || -> Result<Evaluation, TrainError> {
        let mut model = train_candidate(g, d, cfg)?;
        let split = d.split()?;
        let xv = d.x_days(split.valid.clone());
        let yv = d.y_days(split.valid.clone());
        let members = model.predict_members(&xv)?;
        let pred = model.predict(&xv)?;
        let m = compute_metrics(yv.data(), pred.data())?;
        let member_metrics = members
            .iter()
            .map(|p| compute_metrics(yv.data(), p.data()))
            .collect::<Result<Vec<_>, _>>()?;
        if !m.mape.is_finite() {
            return Err(TrainError::NonFinite { phase: 2, epoch: 0 });
        }
        Ok(Evaluation {
            fitness: m.mape,
            valid_mse: m.mse,
            selected: model.mask.selected(),
            mask_weights: model.mask.w_raw.clone(),
            member_mse: member_metrics.iter().map(|m| m.mse).collect(),
            member_mape: member_metrics.iter().map(|m| m.mape).collect(),
            truncated: model.truncated,
            seconds: 0.0,
            failure: None,
        })
    };
    let mut e = run().unwrap_or_else(|err| Evaluation::failed(err.to_string(), 0.0));
    e.seconds = start.elapsed().as_secs_f64();
    e
}
