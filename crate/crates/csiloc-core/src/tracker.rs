//! Sequential tracker: bounded-step trajectory generation over the
//! reference-point grid, an unrolled LSTM over quantifier features with a
//! shared per-step location head, and an online sliding-window predictor.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::csi::{CsiImage, Database};
use crate::error::{Error, Result};
use crate::math;
use crate::nn::adam::Adam;
use crate::nn::dense::Dense;
use crate::nn::dropout::DropoutMask;
use crate::nn::loss;
use crate::nn::lstm::{LstmParams, StepCache};
use crate::quantifier::{extract_features_all, CnnModel, EpochStats};
use crate::rng::{self, role};
use crate::tensor::Tensor;

/// Trajectory generation parameters: window length, step bound, and set sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryConfig {
    /// Steps per trajectory (the tracker's memory length).
    pub memory_length: usize,
    /// Upper bound on the distance between consecutive locations, meters.
    pub step_bound: f64,
    /// Seconds between consecutive captures.
    pub sample_interval: f64,
    pub train_count: usize,
    pub validation_count: usize,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        TrajectoryConfig {
            memory_length: 5,
            step_bound: 2.0,
            sample_interval: 1.0,
            train_count: 30_000,
            validation_count: 15_000,
        }
    }
}

impl TrajectoryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.memory_length == 0 {
            return Err(Error::Config("memory length must be at least 1".into()));
        }
        if !(self.step_bound > 0.0 && self.step_bound.is_finite()) {
            return Err(Error::Config(format!(
                "step bound must be positive and finite, got {}",
                self.step_bound
            )));
        }
        if !(self.sample_interval > 0.0 && self.sample_interval.is_finite()) {
            return Err(Error::Config(format!(
                "sample interval must be positive and finite, got {}",
                self.sample_interval
            )));
        }
        Ok(())
    }
}

/// Feature vectors of every grid snapshot, stored as one matrix with a
/// per-reference-point row index. Trajectories reference rows here instead
/// of copying vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStore {
    dim: usize,
    rows: Vec<f64>,
    by_rp: Vec<Vec<usize>>,
    pub rp_locations: Vec<(f64, f64)>,
}

impl FeatureStore {
    pub fn new(dim: usize, rp_locations: Vec<(f64, f64)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("feature dimension must be positive".into()));
        }
        if rp_locations.is_empty() {
            return Err(Error::Config("a feature store needs reference points".into()));
        }
        let by_rp = vec![Vec::new(); rp_locations.len()];
        Ok(FeatureStore {
            dim,
            rows: Vec::new(),
            by_rp,
            rp_locations,
        })
    }

    /// Embed every on-grid record of a preprocessed database.
    pub fn from_database(db: &Database, model: &CnnModel, batch: usize) -> Result<Self> {
        let mut store = FeatureStore::new(model.config.fc2, db.rp_locations.clone())?;
        let features = extract_features_all(model, db, batch)?;
        for (record, feature) in db.records.iter().zip(features) {
            if let Some(rp) = record.rp_index {
                store.push(rp, &feature)?;
            }
        }
        Ok(store)
    }

    /// Append one feature row under a reference point; returns its row id.
    pub fn push(&mut self, rp: u32, feature: &[f64]) -> Result<usize> {
        if feature.len() != self.dim {
            return Err(Error::Shape(format!(
                "feature of length {} in a store of width {}",
                feature.len(),
                self.dim
            )));
        }
        let Some(slot) = self.by_rp.get_mut(rp as usize) else {
            return Err(Error::Inconsistent(format!(
                "feature references reference point {rp} of {}",
                self.rp_locations.len()
            )));
        };
        let id = self.rows.len() / self.dim;
        self.rows.extend_from_slice(feature);
        slot.push(id);
        Ok(id)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row_count(&self) -> usize {
        self.rows.len() / self.dim
    }

    pub fn rp_count(&self) -> usize {
        self.rp_locations.len()
    }

    pub fn row(&self, id: usize) -> &[f64] {
        &self.rows[id * self.dim..][..self.dim]
    }

    /// Row ids stored under one reference point, in insertion order.
    pub fn rows_of(&self, rp: u32) -> &[usize] {
        &self.by_rp[rp as usize]
    }

    pub fn location_of(&self, rp: u32) -> (f64, f64) {
        self.rp_locations[rp as usize]
    }

    fn bbox(&self) -> (f64, f64, f64, f64) {
        let mut b = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &(x, y) in &self.rp_locations {
            b.0 = b.0.min(x);
            b.1 = b.1.min(y);
            b.2 = b.2.max(x);
            b.3 = b.3.max(y);
        }
        b
    }
}

/// One trajectory step: which reference point the user stands on and which
/// stored snapshot represents the capture there.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrajectoryStep {
    pub rp: u32,
    pub row: usize,
}

/// A bounded-step walk over the grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub steps: Vec<TrajectoryStep>,
}

impl Trajectory {
    /// Check every consecutive pair against the step bound.
    pub fn check_bound(&self, store: &FeatureStore, bound: f64) -> Result<()> {
        for pair in self.steps.windows(2) {
            let a = store.location_of(pair[0].rp);
            let b = store.location_of(pair[1].rp);
            let d = math::distance(a, b);
            if d > bound {
                return Err(Error::Inconsistent(format!(
                    "step of {d} m exceeds the {bound} m bound"
                )));
            }
        }
        Ok(())
    }
}

/// Random bounded-step walks: a uniform start among reference points with
/// stored snapshots, each next point uniform over the step-bound
/// neighborhood (self included), and each step's feature drawn uniformly
/// from that point's snapshots. Exactly `count` trajectories, each from
/// its own seed stream, so generation order never changes the result.
pub fn generate_trajectories(
    store: &FeatureStore,
    config: &TrajectoryConfig,
    count: usize,
    seed: u64,
) -> Result<Vec<Trajectory>> {
    config.validate()?;
    let usable: Vec<u32> = (0..store.rp_count() as u32)
        .filter(|&rp| !store.rows_of(rp).is_empty())
        .collect();
    if usable.is_empty() {
        return Err(Error::Usage("no reference point has stored snapshots".into()));
    }
    // neighbors[i] lists usable RPs within the bound of usable[i]
    let mut neighbors: Vec<Vec<u32>> = Vec::with_capacity(usable.len());
    let mut slot_of = vec![usize::MAX; store.rp_count()];
    for (i, &rp) in usable.iter().enumerate() {
        slot_of[rp as usize] = i;
        let here = store.location_of(rp);
        neighbors.push(
            usable
                .iter()
                .copied()
                .filter(|&other| math::distance(here, store.location_of(other)) <= config.step_bound)
                .collect(),
        );
    }
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let mut rng = rng::stream(seed, &[role::TRAJECTORY, i as u64]);
        let mut current = usable[rng.random_range(0..usable.len())];
        let mut steps = Vec::with_capacity(config.memory_length);
        for t in 0..config.memory_length {
            let rows = store.rows_of(current);
            steps.push(TrajectoryStep {
                rp: current,
                row: rows[rng.random_range(0..rows.len())],
            });
            if t + 1 < config.memory_length {
                let near = &neighbors[slot_of[current as usize]];
                current = near[rng.random_range(0..near.len())];
            }
        }
        out.push(Trajectory { steps });
    }
    Ok(out)
}

/// Tracker network hyperparameters. The hidden width must equal the
/// feature dimension of the paired quantifier.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmConfig {
    pub hidden: usize,
    pub dropout: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl LstmConfig {
    pub fn for_feature_dim(dim: usize) -> Self {
        LstmConfig {
            hidden: dim,
            dropout: 0.2,
            learning_rate: 1e-3,
            epochs: 100,
            batch_size: 32,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 {
            return Err(Error::Config("hidden width must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout rate must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch size must be positive".into()));
        }
        Ok(())
    }
}

/// The trained tracker: one LSTM cell unrolled over the memory length and
/// a shared linear head emitting a location at every step. Predictions
/// clamp to `bbox` at inference, like the quantifier's.
#[derive(Debug, Clone)]
pub struct LstmModel {
    pub config: LstmConfig,
    pub cell: LstmParams,
    pub head: Dense,
    pub bbox: (f64, f64, f64, f64),
}

impl LstmModel {
    pub fn new(config: LstmConfig, bbox: (f64, f64, f64, f64), seed: u64) -> Result<Self> {
        config.validate()?;
        let mut cell = LstmParams::new(config.hidden, config.hidden)?;
        let mut head = Dense::new(config.hidden, 2)?;
        let mut rng = rng::stream(seed, &[role::LSTM_INIT]);
        cell.init(&mut rng);
        head.init_scaled(&mut rng);
        Ok(LstmModel {
            config,
            cell,
            head,
            bbox,
        })
    }

    /// Parameter tensors in the fixed checkpoint order.
    pub fn param_tensors(&self) -> [&Tensor; 5] {
        [
            &self.cell.wx,
            &self.cell.wh,
            &self.cell.bias,
            &self.head.weights,
            &self.head.bias,
        ]
    }

    /// Mutable view of [`Self::param_tensors`], same order.
    pub fn param_tensors_mut(&mut self) -> [&mut Tensor; 5] {
        [
            &mut self.cell.wx,
            &mut self.cell.wh,
            &mut self.cell.bias,
            &mut self.head.weights,
            &mut self.head.bias,
        ]
    }

    /// Drop every gradient buffer, e.g. after training finishes.
    pub fn clear_grads(&mut self) {
        for t in self.param_tensors_mut() {
            t.clear_grad();
        }
    }

    fn clamp_predictions(&self, pred: &mut Tensor) {
        let (x0, y0, x1, y1) = self.bbox;
        for row in pred.data_mut().chunks_exact_mut(2) {
            row[0] = row[0].clamp(x0, x1);
            row[1] = row[1].clamp(y0, y1);
        }
    }

    /// Run the unrolled cell over `steps[t] = [batch, dim]` inputs from a
    /// zero state and emit the head's output at every step: the full
    /// multi-output contract, one `[batch, 2]` tensor per step.
    pub fn forward_sequence(&self, steps: &[Tensor], clamp: bool) -> Result<Vec<Tensor>> {
        if steps.is_empty() {
            return Err(Error::Usage("empty input sequence".into()));
        }
        let b = steps[0].dims()[0];
        let mut h = Tensor::zeros(&[b, self.config.hidden]);
        let mut c = Tensor::zeros(&[b, self.config.hidden]);
        let mut out = Vec::with_capacity(steps.len());
        for x in steps {
            let (nh, nc) = self.cell.forward(x, &h, &c, None)?;
            h = nh;
            c = nc;
            let mut pred = self.head.forward(&h)?;
            if clamp {
                self.clamp_predictions(&mut pred);
            }
            out.push(pred);
        }
        Ok(out)
    }
}

fn check_trajectories(
    store: &FeatureStore,
    trajectories: &[Trajectory],
    what: &str,
) -> Result<usize> {
    let Some(first) = trajectories.first() else {
        return Err(Error::Usage(format!("{what}: no trajectories")));
    };
    let t = first.steps.len();
    if t == 0 {
        return Err(Error::Usage(format!("{what}: empty trajectory")));
    }
    for traj in trajectories {
        if traj.steps.len() != t {
            return Err(Error::Inconsistent(format!(
                "{what}: trajectory of {} steps in a set of {t}-step trajectories",
                traj.steps.len()
            )));
        }
        for step in &traj.steps {
            if step.rp as usize >= store.rp_count() || step.row >= store.row_count() {
                return Err(Error::Inconsistent(format!(
                    "{what}: step references row {} / point {} outside the store",
                    step.row, step.rp
                )));
            }
        }
    }
    Ok(t)
}

/// Step tensors and flat per-step targets for a batch of trajectories.
fn gather_steps(
    store: &FeatureStore,
    trajectories: &[Trajectory],
    batch: &[usize],
    t_len: usize,
) -> (Vec<Tensor>, Vec<Vec<f64>>) {
    let dim = store.dim();
    let mut xs = Vec::with_capacity(t_len);
    let mut targets = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let mut x = Tensor::zeros(&[batch.len(), dim]);
        let mut tg = Vec::with_capacity(batch.len() * 2);
        for (slot, &ti) in batch.iter().enumerate() {
            let step = trajectories[ti].steps[t];
            x.data_mut()[slot * dim..][..dim].copy_from_slice(store.row(step.row));
            let (lx, ly) = store.location_of(step.rp);
            tg.push(lx);
            tg.push(ly);
        }
        xs.push(x);
        targets.push(tg);
    }
    (xs, targets)
}

/// Mean distance between clamped per-step predictions and true locations
/// over every step of every trajectory, evaluated in batches.
pub fn mean_sequence_error(
    model: &LstmModel,
    store: &FeatureStore,
    trajectories: &[Trajectory],
    batch: usize,
) -> Result<f64> {
    let t_len = check_trajectories(store, trajectories, "evaluation")?;
    if batch == 0 {
        return Err(Error::Config("evaluation batch size must be positive".into()));
    }
    if store.dim() != model.cell.in_dim() {
        return Err(Error::Shape(format!(
            "store width {} against a cell expecting {}",
            store.dim(),
            model.cell.in_dim()
        )));
    }
    let all: Vec<usize> = (0..trajectories.len()).collect();
    let mut total = 0.0;
    for chunk in all.chunks(batch) {
        let (xs, targets) = gather_steps(store, trajectories, chunk, t_len);
        let preds = model.forward_sequence(&xs, true)?;
        for (pred, tg) in preds.iter().zip(&targets) {
            for (p, t) in pred.data().chunks_exact(2).zip(tg.chunks_exact(2)) {
                total += math::distance((p[0], p[1]), (t[0], t[1]));
            }
        }
    }
    Ok(total / (trajectories.len() * t_len) as f64)
}

/// Train the tracker on generated trajectories.
///
/// Unrolls the cell over each trajectory, applies the shared head at every
/// step, and minimizes the mean per-step location distance with Adam.
/// During training a fresh dropout mask thins the hidden output feeding
/// the head at each step. Records one [`EpochStats`] row per epoch and
/// returns the parameters of the epoch with the lowest validation error
/// (the earliest such epoch on ties).
pub fn train_lstm(
    store: &FeatureStore,
    train: &[Trajectory],
    val: &[Trajectory],
    config: &LstmConfig,
    seed: u64,
) -> Result<(LstmModel, Vec<EpochStats>)> {
    config.validate()?;
    if config.hidden != store.dim() {
        return Err(Error::Config(format!(
            "hidden width {} must match the feature dimension {}",
            config.hidden,
            store.dim()
        )));
    }
    let t_train = check_trajectories(store, train, "training")?;
    let t_val = check_trajectories(store, val, "validation")?;
    if t_train != t_val {
        return Err(Error::Inconsistent(format!(
            "training trajectories have {t_train} steps, validation {t_val}"
        )));
    }
    let mut model = LstmModel::new(config.clone(), store.bbox(), seed)?;
    let mut adams: Vec<Adam> = Vec::new();
    for t in model.param_tensors() {
        adams.push(Adam::new(t.len(), config.learning_rate)?);
    }

    let mut stats = Vec::with_capacity(config.epochs);
    let mut best_error = f64::INFINITY;
    let mut best_params: Vec<Vec<f64>> = Vec::new();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let base_order = order.clone();
    for epoch in 1..=config.epochs {
        let mut shuffle_rng = rng::stream(seed, &[role::LSTM_SHUFFLE, epoch as u64]);
        order.copy_from_slice(&base_order);
        for i in (1..order.len()).rev() {
            let j = shuffle_rng.random_range(0..=i);
            order.swap(i, j);
        }
        let mut drop_rng = rng::stream(seed, &[role::DROPOUT, epoch as u64]);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let (xs, targets) = gather_steps(store, train, chunk, t_train);
            let b = chunk.len();
            let hidden = config.hidden;
            // forward, keeping every step's state for backprop
            let mut hs: Vec<Tensor> = Vec::with_capacity(t_train);
            let mut cs: Vec<Tensor> = Vec::with_capacity(t_train);
            let mut caches: Vec<StepCache> = Vec::with_capacity(t_train);
            let mut masks: Vec<DropoutMask> = Vec::with_capacity(t_train);
            let mut dropped: Vec<Tensor> = Vec::with_capacity(t_train);
            let mut dpreds: Vec<Tensor> = Vec::with_capacity(t_train);
            let mut h = Tensor::zeros(&[b, hidden]);
            let mut c = Tensor::zeros(&[b, hidden]);
            let mut batch_total = 0.0;
            for t in 0..t_train {
                let mut cache = StepCache::default();
                let (nh, nc) = model.cell.forward(&xs[t], &h, &c, Some(&mut cache))?;
                let mask = DropoutMask::sample(b * hidden, config.dropout, &mut drop_rng)?;
                let mut thinned = nh.clone();
                mask.apply(thinned.data_mut());
                let pred = model.head.forward(&thinned)?;
                let step_loss = loss::batch_loss(&pred, &targets[t])?;
                if !step_loss.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "training loss diverged at epoch {epoch}: {step_loss}"
                    )));
                }
                batch_total += step_loss;
                let mut dpred = Tensor::zeros(&[b, 2]);
                loss::batch_loss_grad(&pred, &targets[t], &mut dpred)?;
                // the loss averages over steps as well as the batch
                for v in dpred.data_mut() {
                    *v /= t_train as f64;
                }
                hs.push(nh);
                cs.push(nc);
                caches.push(cache);
                masks.push(mask);
                dropped.push(thinned);
                dpreds.push(dpred);
                h = hs[t].clone();
                c = cs[t].clone();
            }
            loss_sum += batch_total / t_train as f64 * b as f64;

            for t in model.param_tensors_mut() {
                t.zero_grad();
            }
            let zero = Tensor::zeros(&[b, hidden]);
            let mut dh_carry = Tensor::zeros(&[b, hidden]);
            let mut dc_carry = Tensor::zeros(&[b, hidden]);
            for t in (0..t_train).rev() {
                let mut dh = model
                    .head
                    .backward(&dropped[t], &dpreds[t], true)?
                    .ok_or_else(|| Error::Usage("head backward returned no input gradient".into()))?;
                masks[t].apply(dh.data_mut());
                for (a, bv) in dh.data_mut().iter_mut().zip(dh_carry.data()) {
                    *a += bv;
                }
                let (h_prev, c_prev) = if t == 0 {
                    (&zero, &zero)
                } else {
                    (&hs[t - 1], &cs[t - 1])
                };
                let (_dx, nh, nc) =
                    model
                        .cell
                        .backward(&xs[t], h_prev, c_prev, &caches[t], &dh, &dc_carry)?;
                dh_carry = nh;
                dc_carry = nc;
            }
            for (t, opt) in model.param_tensors_mut().into_iter().zip(adams.iter_mut()) {
                let (data, grad) = t.data_and_grad()?;
                opt.step(data, grad)?;
            }
        }
        let val_error = mean_sequence_error(&model, store, val, config.batch_size)?;
        stats.push(EpochStats {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            val_error,
        });
        if val_error < best_error {
            best_error = val_error;
            best_params = model.param_tensors().iter().map(|t| t.data().to_vec()).collect();
        }
    }
    for (t, saved) in model.param_tensors_mut().into_iter().zip(best_params.iter()) {
        t.data_mut().copy_from_slice(saved);
    }
    model.clear_grads();
    for t in model.param_tensors() {
        t.check_finite("trained parameter")?;
    }
    Ok((model, stats))
}

/// How the tracker predicts before its window holds a full memory length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WarmupRule {
    /// Pad the window by repeating its oldest feature.
    RepeatOldest,
    /// Fall back to the quantifier head until the window fills.
    CnnOnly,
}

/// Online sequential predictor: holds the sliding window of the last
/// `memory_length` features for one tracked device. Feed captures in time
/// order; each push returns the current location. Instances are
/// independent; use one per device.
#[derive(Debug, Clone)]
pub struct Tracker<'a> {
    quantifier: &'a CnnModel,
    model: &'a LstmModel,
    warmup: WarmupRule,
    memory_length: usize,
    window: Vec<Vec<f64>>,
}

impl<'a> Tracker<'a> {
    pub fn new(
        quantifier: &'a CnnModel,
        model: &'a LstmModel,
        memory_length: usize,
        warmup: WarmupRule,
    ) -> Result<Self> {
        if memory_length == 0 {
            return Err(Error::Config("memory length must be at least 1".into()));
        }
        if quantifier.config.fc2 != model.cell.in_dim() {
            return Err(Error::Shape(format!(
                "quantifier features of width {} against a cell expecting {}",
                quantifier.config.fc2,
                model.cell.in_dim()
            )));
        }
        Ok(Tracker {
            quantifier,
            model,
            warmup,
            memory_length,
            window: Vec::new(),
        })
    }

    /// Forget the window, e.g. when the tracked device goes silent.
    pub fn reset(&mut self) {
        self.window.clear();
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    /// Feed one preprocessed capture, in time order.
    pub fn push(&mut self, image: &CsiImage) -> Result<(f64, f64)> {
        let feature = crate::quantifier::extract_features(self.quantifier, image)?;
        self.push_feature(feature)
    }

    /// Feed one already-extracted feature vector, in time order.
    pub fn push_feature(&mut self, feature: Vec<f64>) -> Result<(f64, f64)> {
        let dim = self.model.cell.in_dim();
        if feature.len() != dim {
            return Err(Error::Shape(format!(
                "feature of length {} against a cell expecting {dim}",
                feature.len()
            )));
        }
        self.window.push(feature);
        if self.window.len() > self.memory_length {
            self.window.remove(0);
        }
        if self.window.len() < self.memory_length {
            if self.warmup == WarmupRule::CnnOnly {
                return self
                    .quantifier
                    .predict_from_features(self.window.last().expect("window is nonempty"));
            }
            // repeat-padding: the oldest feature fills the missing front
        }
        let mut steps = Vec::with_capacity(self.memory_length);
        let pad = self.memory_length - self.window.len();
        for t in 0..self.memory_length {
            let feature = if t < pad { &self.window[0] } else { &self.window[t - pad] };
            steps.push(Tensor::from_vec(&[1, dim], feature.clone())?);
        }
        let preds = self.model.forward_sequence(&steps, true)?;
        let last = preds.last().expect("sequence output is nonempty");
        Ok((last.data()[0], last.data()[1]))
    }
}

/// Convenience pass over a whole preprocessed capture sequence: one
/// prediction per image, in order.
pub fn track(
    images: &[CsiImage],
    quantifier: &CnnModel,
    model: &LstmModel,
    memory_length: usize,
    warmup: WarmupRule,
) -> Result<Vec<(f64, f64)>> {
    if images.is_empty() {
        return Err(Error::Usage("empty capture sequence".into()));
    }
    let mut tracker = Tracker::new(quantifier, model, memory_length, warmup)?;
    let mut out = Vec::with_capacity(images.len());
    for image in images {
        out.push(tracker.push(image)?);
    }
    Ok(out)
}
