//! Position quantifier: three same-padding convolutions feeding two wide
//! dense layers and a linear location head, trained to regress capture
//! coordinates in meters. The second dense layer's post-activation vector
//! doubles as the spatial feature embedding consumed by the tracker.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::csi::{CsiImage, Database, NormalizationContext};
use crate::error::{Error, Result};
use crate::math;
use crate::nn::activation;
use crate::nn::adam::Adam;
use crate::nn::conv::{Conv2d, Conv2dCache};
use crate::nn::dense::Dense;
use crate::nn::loss;
use crate::rng::{self, role};
use crate::tensor::Tensor;

/// Architecture and training hyperparameters for the quantifier network.
///
/// The stack is fixed at three convolutions; everything else is sized here.
/// `fc1` must equal the flattened convolution output
/// (`scans * subcarriers * filters`), which also pins the first dense
/// layer to be square at the standard sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnConfig {
    pub scans: usize,
    pub subcarriers: usize,
    pub antennae: usize,
    /// Square kernel side; must be odd so same padding is symmetric.
    pub kernel: usize,
    /// Filters per convolution layer.
    pub filters: usize,
    /// First dense layer width.
    pub fc1: usize,
    /// Second dense layer width; also the feature vector length.
    pub fc2: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Cap on training images per reference point, spread evenly over each
    /// point's records. `None` uses every record.
    pub images_per_rp: Option<usize>,
}

impl CnnConfig {
    /// Laptop NIC capture geometry: 30x30x3 images, 9000/900 dense sizes.
    pub fn nic() -> Self {
        CnnConfig {
            scans: 30,
            subcarriers: 30,
            antennae: 3,
            kernel: 5,
            filters: 10,
            fc1: 9000,
            fc2: 900,
            epochs: 100,
            batch_size: 32,
            learning_rate: 1e-3,
            images_per_rp: None,
        }
    }

    /// Smartphone capture geometry: 10x47x1 images, 4700/470 dense sizes.
    pub fn phone() -> Self {
        CnnConfig {
            scans: 10,
            subcarriers: 47,
            antennae: 1,
            kernel: 5,
            filters: 10,
            fc1: 4700,
            fc2: 470,
            epochs: 300,
            batch_size: 32,
            learning_rate: 1e-3,
            images_per_rp: None,
        }
    }

    /// Flattened convolution output length.
    pub fn flat_len(&self) -> usize {
        self.scans * self.subcarriers * self.filters
    }

    pub fn input_len(&self) -> usize {
        self.scans * self.subcarriers * self.antennae
    }

    pub fn validate(&self) -> Result<()> {
        if self.scans == 0 || self.subcarriers == 0 || self.antennae == 0 {
            return Err(Error::Config(format!(
                "input dimensions must be positive, got {}x{}x{}",
                self.scans, self.subcarriers, self.antennae
            )));
        }
        if self.kernel % 2 == 0 || self.kernel == 0 {
            return Err(Error::Config(format!(
                "kernel side must be odd and positive, got {}",
                self.kernel
            )));
        }
        if self.filters == 0 || self.fc2 == 0 {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        if self.fc1 != self.flat_len() {
            return Err(Error::Config(format!(
                "first dense width {} must match the flattened convolution output {}",
                self.fc1,
                self.flat_len()
            )));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        if self.images_per_rp == Some(0) {
            return Err(Error::Config("images per reference point must be positive".into()));
        }
        Ok(())
    }
}

/// The quantifier network with its inference clamp box
/// `(min_x, min_y, max_x, max_y)` in meters.
#[derive(Debug, Clone)]
pub struct CnnModel {
    pub config: CnnConfig,
    pub conv1: Conv2d,
    pub conv2: Conv2d,
    pub conv3: Conv2d,
    pub fc1: Dense,
    pub fc2: Dense,
    pub head: Dense,
    pub bbox: (f64, f64, f64, f64),
}

/// Activations and unfolded patches one training forward pass produces,
/// kept for the matching backward pass.
struct ForwardState {
    c1: Conv2dCache,
    a1: Tensor,
    c2: Conv2dCache,
    a2: Tensor,
    c3: Conv2dCache,
    /// Third convolution output, already flattened to `[batch, fc1]`.
    a3: Tensor,
    h1: Tensor,
    h2: Tensor,
}

impl CnnModel {
    /// Build a freshly initialized network. The clamp box bounds every
    /// prediction the model will emit.
    pub fn new(config: CnnConfig, bbox: (f64, f64, f64, f64), seed: u64) -> Result<Self> {
        config.validate()?;
        check_bbox(bbox)?;
        let k = config.kernel;
        let mut conv1 = Conv2d::new(k, k, config.antennae, config.filters)?;
        let mut conv2 = Conv2d::new(k, k, config.filters, config.filters)?;
        let mut conv3 = Conv2d::new(k, k, config.filters, config.filters)?;
        let mut fc1 = Dense::new(config.flat_len(), config.fc1)?;
        let mut fc2 = Dense::new(config.fc1, config.fc2)?;
        let mut head = Dense::new(config.fc2, 2)?;
        let mut rng = rng::stream(seed, &[role::CNN_INIT]);
        conv1.init_kaiming(&mut rng);
        conv2.init_kaiming(&mut rng);
        conv3.init_kaiming(&mut rng);
        fc1.init_kaiming(&mut rng);
        fc2.init_kaiming(&mut rng);
        head.init_scaled(&mut rng);
        Ok(CnnModel {
            config,
            conv1,
            conv2,
            conv3,
            fc1,
            fc2,
            head,
            bbox,
        })
    }

    /// Every parameter tensor in the fixed checkpoint order: convolution
    /// kernels and biases front to back, then dense weights and biases,
    /// then the head.
    pub fn param_tensors(&self) -> [&Tensor; 12] {
        [
            &self.conv1.kernels,
            &self.conv1.bias,
            &self.conv2.kernels,
            &self.conv2.bias,
            &self.conv3.kernels,
            &self.conv3.bias,
            &self.fc1.weights,
            &self.fc1.bias,
            &self.fc2.weights,
            &self.fc2.bias,
            &self.head.weights,
            &self.head.bias,
        ]
    }

    /// Mutable view of [`Self::param_tensors`], same order.
    pub fn param_tensors_mut(&mut self) -> [&mut Tensor; 12] {
        [
            &mut self.conv1.kernels,
            &mut self.conv1.bias,
            &mut self.conv2.kernels,
            &mut self.conv2.bias,
            &mut self.conv3.kernels,
            &mut self.conv3.bias,
            &mut self.fc1.weights,
            &mut self.fc1.bias,
            &mut self.fc2.weights,
            &mut self.fc2.bias,
            &mut self.head.weights,
            &mut self.head.bias,
        ]
    }

    pub fn param_count(&self) -> usize {
        self.param_tensors().iter().map(|t| t.len()).sum()
    }

    fn zero_grads(&mut self) {
        for t in self.param_tensors_mut() {
            t.zero_grad();
        }
    }

    /// Drop every gradient buffer, e.g. after training finishes.
    pub fn clear_grads(&mut self) {
        for t in self.param_tensors_mut() {
            t.clear_grad();
        }
    }

    fn check_input(&self, x: &Tensor) -> Result<usize> {
        let d = x.dims();
        let c = &self.config;
        if d.len() != 4 || d[1] != c.scans || d[2] != c.subcarriers || d[3] != c.antennae {
            return Err(Error::Shape(format!(
                "network input: expected [batch, {}, {}, {}], got {d:?}",
                c.scans, c.subcarriers, c.antennae
            )));
        }
        Ok(d[0])
    }

    /// Training forward pass, recording the state backprop needs.
    fn forward_train(&self, x: &Tensor) -> Result<(Tensor, ForwardState)> {
        let b = self.check_input(x)?;
        let mut c1 = Conv2dCache::default();
        let mut a1 = self.conv1.forward(x, Some(&mut c1))?;
        activation::relu_in_place(a1.data_mut());
        let mut c2 = Conv2dCache::default();
        let mut a2 = self.conv2.forward(&a1, Some(&mut c2))?;
        activation::relu_in_place(a2.data_mut());
        let mut c3 = Conv2dCache::default();
        let mut a3 = self.conv3.forward(&a2, Some(&mut c3))?;
        activation::relu_in_place(a3.data_mut());
        a3.reshape(&[b, self.config.flat_len()])?;
        let mut h1 = self.fc1.forward(&a3)?;
        activation::relu_in_place(h1.data_mut());
        let mut h2 = self.fc2.forward(&h1)?;
        activation::relu_in_place(h2.data_mut());
        let pred = self.head.forward(&h2)?;
        Ok((pred, ForwardState {
            c1,
            a1,
            c2,
            a2,
            c3,
            a3,
            h1,
            h2,
        }))
    }

    /// Backward pass against [`Self::forward_train`] state; gradients
    /// accumulate into the parameter tensors.
    fn backward(&mut self, st: &ForwardState, dpred: &Tensor) -> Result<()> {
        let mut dh2 = self
            .head
            .backward(&st.h2, dpred, true)?
            .ok_or_else(|| Error::Usage("head backward returned no input gradient".into()))?;
        activation::relu_backward(dh2.data_mut(), st.h2.data());
        let mut dh1 = self
            .fc2
            .backward(&st.h1, &dh2, true)?
            .ok_or_else(|| Error::Usage("dense backward returned no input gradient".into()))?;
        activation::relu_backward(dh1.data_mut(), st.h1.data());
        let mut dflat = self
            .fc1
            .backward(&st.a3, &dh1, true)?
            .ok_or_else(|| Error::Usage("dense backward returned no input gradient".into()))?;
        activation::relu_backward(dflat.data_mut(), st.a3.data());
        let c = &self.config;
        let b = st.a3.dims()[0];
        dflat.reshape(&[b, c.scans, c.subcarriers, c.filters])?;
        let mut d3 = self
            .conv3
            .backward(&dflat, &st.c3, true)?
            .ok_or_else(|| Error::Usage("conv backward returned no input gradient".into()))?;
        activation::relu_backward(d3.data_mut(), st.a2.data());
        let mut d2 = self
            .conv2
            .backward(&d3, &st.c2, true)?
            .ok_or_else(|| Error::Usage("conv backward returned no input gradient".into()))?;
        activation::relu_backward(d2.data_mut(), st.a1.data());
        self.conv1.backward(&d2, &st.c1, false)?;
        Ok(())
    }

    /// Feature embedding of a `[batch, scans, subcarriers, antennae]`
    /// tensor: the second dense layer's post-activation rows. Allocates
    /// all state locally, so shared references may run it concurrently.
    pub fn forward_features(&self, x: &Tensor) -> Result<Tensor> {
        let b = self.check_input(x)?;
        let mut a = self.conv1.forward(x, None)?;
        activation::relu_in_place(a.data_mut());
        let mut a = self.conv2.forward(&a, None)?;
        activation::relu_in_place(a.data_mut());
        let mut a = self.conv3.forward(&a, None)?;
        activation::relu_in_place(a.data_mut());
        a.reshape(&[b, self.config.flat_len()])?;
        let mut h1 = self.fc1.forward(&a)?;
        activation::relu_in_place(h1.data_mut());
        let mut h2 = self.fc2.forward(&h1)?;
        activation::relu_in_place(h2.data_mut());
        Ok(h2)
    }

    /// Clamped location predictions for a batch tensor, one `(x, y)` row
    /// per image.
    pub fn forward_predict(&self, x: &Tensor) -> Result<Tensor> {
        let h2 = self.forward_features(x)?;
        let mut pred = self.head.forward(&h2)?;
        let (x0, y0, x1, y1) = self.bbox;
        for row in pred.data_mut().chunks_exact_mut(2) {
            row[0] = row[0].clamp(x0, x1);
            row[1] = row[1].clamp(y0, y1);
        }
        Ok(pred)
    }

    /// Location from an already-extracted feature vector: the regression
    /// head alone, clamped to the box.
    pub fn predict_from_features(&self, feature: &[f64]) -> Result<(f64, f64)> {
        if feature.len() != self.config.fc2 {
            return Err(Error::Shape(format!(
                "feature vector of length {} against a head expecting {}",
                feature.len(),
                self.config.fc2
            )));
        }
        let out = crate::nn::dense::dense_apply(feature, &self.head.weights, self.head.bias.data())?;
        let (x0, y0, x1, y1) = self.bbox;
        Ok((out[0].clamp(x0, x1), out[1].clamp(y0, y1)))
    }

    /// Shapes a forward pass actually produces at the given batch size:
    /// input, the three convolution outputs, the flattened vector, both
    /// dense activations, and the head output.
    pub fn trace_shapes(&self, batch: usize) -> Result<Vec<Vec<usize>>> {
        let c = &self.config;
        let x = Tensor::zeros(&[batch, c.scans, c.subcarriers, c.antennae]);
        let (pred, st) = self.forward_train(&x)?;
        Ok(vec![
            x.dims().to_vec(),
            st.a1.dims().to_vec(),
            st.a2.dims().to_vec(),
            vec![batch, c.scans, c.subcarriers, c.filters],
            st.a3.dims().to_vec(),
            st.h1.dims().to_vec(),
            st.h2.dims().to_vec(),
            pred.dims().to_vec(),
        ])
    }
}

fn check_bbox(bbox: (f64, f64, f64, f64)) -> Result<()> {
    let (x0, y0, x1, y1) = bbox;
    let all_finite = x0.is_finite() && y0.is_finite() && x1.is_finite() && y1.is_finite();
    if !all_finite || x0 > x1 || y0 > y1 {
        return Err(Error::Config(format!(
            "clamp box must be finite and ordered, got ({x0}, {y0}, {x1}, {y1})"
        )));
    }
    Ok(())
}

/// One learning-curve row: mean per-sample training loss and mean clamped
/// validation error, both in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_error: f64,
}

/// A trained quantifier bundled with the normalization state raw captures
/// must pass through before inference.
#[derive(Debug, Clone)]
pub struct TrainedQuantifier {
    pub model: CnnModel,
    pub context: NormalizationContext,
}

impl TrainedQuantifier {
    pub fn feature_dim(&self) -> usize {
        self.model.config.fc2
    }

    pub fn validate(&self) -> Result<()> {
        self.model.config.validate()?;
        self.context.validate()
    }

    /// Normalize a raw capture and predict its location.
    pub fn predict_raw(&self, raw: &CsiImage) -> Result<(f64, f64)> {
        let image = crate::csi::preprocess(raw, &self.context, None)?;
        predict_cnn_only(&self.model, &image)
    }

    /// Normalize a raw capture and embed it.
    pub fn features_raw(&self, raw: &CsiImage) -> Result<Vec<f64>> {
        let image = crate::csi::preprocess(raw, &self.context, None)?;
        extract_features(&self.model, &image)
    }
}

fn check_db_profile(db: &Database, config: &CnnConfig, what: &str) -> Result<()> {
    if (db.scans, db.subcarriers, db.antennae) != (config.scans, config.subcarriers, config.antennae)
    {
        return Err(Error::Shape(format!(
            "{what}: database profile {}x{}x{} does not match the network input {}x{}x{}",
            db.scans, db.subcarriers, db.antennae, config.scans, config.subcarriers, config.antennae
        )));
    }
    Ok(())
}

/// Evenly spread `take` indices over `0..len` (all of them when
/// `take >= len`).
fn spread_indices(len: usize, take: usize) -> Vec<usize> {
    let take = take.min(len);
    (0..take).map(|i| i * len / take).collect()
}

/// Records used for training: capped per reference point when the config
/// asks for it, everything otherwise.
fn training_records(db: &Database, config: &CnnConfig) -> Vec<usize> {
    match config.images_per_rp {
        Some(cap) if db.rp_count() > 0 => {
            let mut picked = Vec::new();
            for rp in 0..db.rp_count() as u32 {
                let of_rp = db.records_of(rp);
                for i in spread_indices(of_rp.len(), cap) {
                    picked.push(of_rp[i]);
                }
            }
            // stray records outside the grid still train on their raw location
            for (i, r) in db.records.iter().enumerate() {
                if r.rp_index.is_none() {
                    picked.push(i);
                }
            }
            picked.sort_unstable();
            picked
        }
        _ => (0..db.records.len()).collect(),
    }
}

/// Copy the chosen records into a batch tensor and its flat target list.
fn gather_batch(db: &Database, indices: &[usize]) -> (Tensor, Vec<f64>) {
    let row = db.scans * db.subcarriers * db.antennae;
    let mut x = Tensor::zeros(&[indices.len(), db.scans, db.subcarriers, db.antennae]);
    let mut targets = Vec::with_capacity(indices.len() * 2);
    for (slot, &i) in indices.iter().enumerate() {
        let img = &db.records[i].image;
        x.data_mut()[slot * row..][..row].copy_from_slice(&img.amplitudes);
        targets.push(img.location.0);
        targets.push(img.location.1);
    }
    (x, targets)
}

/// Mean distance between clamped predictions and true locations over every
/// record of `db`, evaluated in batches.
pub fn mean_prediction_error(model: &CnnModel, db: &Database, batch: usize) -> Result<f64> {
    check_db_profile(db, &model.config, "evaluation")?;
    if db.records.is_empty() {
        return Err(Error::Usage("evaluation database is empty".into()));
    }
    if batch == 0 {
        return Err(Error::Config("evaluation batch size must be positive".into()));
    }
    let all: Vec<usize> = (0..db.records.len()).collect();
    let mut total = 0.0;
    for chunk in all.chunks(batch) {
        let (x, targets) = gather_batch(db, chunk);
        let pred = model.forward_predict(&x)?;
        for (p, t) in pred.data().chunks_exact(2).zip(targets.chunks_exact(2)) {
            total += math::distance((p[0], p[1]), (t[0], t[1]));
        }
    }
    Ok(total / db.records.len() as f64)
}

fn fisher_yates(indices: &mut [usize], rng: &mut rand_chacha::ChaCha8Rng) {
    use rand::Rng;
    for i in (1..indices.len()).rev() {
        let j = rng.random_range(0..=i);
        indices.swap(i, j);
    }
}

/// Clamp box spanning the training geometry: the reference-point hull when
/// the database has a grid, the record hull otherwise.
fn training_bbox(db: &Database) -> Result<(f64, f64, f64, f64)> {
    let points: Vec<(f64, f64)> = if db.rp_count() > 0 {
        db.rp_locations.clone()
    } else {
        db.records.iter().map(|r| r.image.location).collect()
    };
    let mut bbox = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (x, y) in points {
        bbox.0 = bbox.0.min(x);
        bbox.1 = bbox.1.min(y);
        bbox.2 = bbox.2.max(x);
        bbox.3 = bbox.3.max(y);
    }
    check_bbox(bbox)?;
    Ok(bbox)
}

/// Train the quantifier on a preprocessed database against a later-time
/// validation set of the same profile.
///
/// Minimizes the mean per-sample location distance over shuffled
/// mini-batches with one Adam state per parameter tensor, records one
/// [`EpochStats`] row per epoch, and returns the parameters of the epoch
/// with the lowest validation error (the earliest such epoch on ties).
pub fn train_cnn(
    train: &Database,
    val: &Database,
    config: &CnnConfig,
    seed: u64,
) -> Result<(CnnModel, Vec<EpochStats>)> {
    config.validate()?;
    check_db_profile(train, config, "training")?;
    check_db_profile(val, config, "validation")?;
    if train.records.is_empty() {
        return Err(Error::Usage("training database is empty".into()));
    }
    if val.records.is_empty() {
        return Err(Error::Usage("validation database is empty".into()));
    }
    let selected = training_records(train, config);
    let mut model = CnnModel::new(config.clone(), training_bbox(train)?, seed)?;
    let mut adams: Vec<Adam> = Vec::new();
    for t in model.param_tensors() {
        adams.push(Adam::new(t.len(), config.learning_rate)?);
    }

    let mut stats = Vec::with_capacity(config.epochs);
    let mut best_error = f64::INFINITY;
    let mut best_params: Vec<Vec<f64>> = Vec::new();
    let mut order = selected.clone();
    for epoch in 1..=config.epochs {
        let mut rng = rng::stream(seed, &[role::CNN_SHUFFLE, epoch as u64]);
        order.copy_from_slice(&selected);
        fisher_yates(&mut order, &mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let (x, targets) = gather_batch(train, chunk);
            let (pred, state) = model.forward_train(&x)?;
            let loss = loss::batch_loss(&pred, &targets)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "training loss diverged at epoch {epoch}: {loss}"
                )));
            }
            loss_sum += loss * chunk.len() as f64;
            let mut dpred = Tensor::zeros(&[chunk.len(), 2]);
            loss::batch_loss_grad(&pred, &targets, &mut dpred)?;
            model.zero_grads();
            model.backward(&state, &dpred)?;
            for (t, opt) in model.param_tensors_mut().into_iter().zip(adams.iter_mut()) {
                let (data, grad) = t.data_and_grad()?;
                opt.step(data, grad)?;
            }
        }
        let val_error = mean_prediction_error(&model, val, config.batch_size)?;
        stats.push(EpochStats {
            epoch,
            train_loss: loss_sum / selected.len() as f64,
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

fn image_tensor(model: &CnnModel, image: &CsiImage) -> Result<Tensor> {
    let c = &model.config;
    if (image.scans(), image.subcarriers(), image.antennae())
        != (c.scans, c.subcarriers, c.antennae)
    {
        return Err(Error::Shape(format!(
            "image {}x{}x{} does not match the network input {}x{}x{}",
            image.scans(),
            image.subcarriers(),
            image.antennae(),
            c.scans,
            c.subcarriers,
            c.antennae
        )));
    }
    Tensor::from_vec(
        &[1, c.scans, c.subcarriers, c.antennae],
        image.amplitudes.clone(),
    )
}

/// Feature vector of one preprocessed image: the second dense layer's
/// post-activation values. Deterministic, and reentrant on a shared model.
pub fn extract_features(model: &CnnModel, image: &CsiImage) -> Result<Vec<f64>> {
    let x = image_tensor(model, image)?;
    Ok(model.forward_features(&x)?.into_data())
}

/// Feature vectors for every record of a preprocessed database, computed
/// in batches, in record order.
pub fn extract_features_all(
    model: &CnnModel,
    db: &Database,
    batch: usize,
) -> Result<Vec<Vec<f64>>> {
    check_db_profile(db, &model.config, "feature extraction")?;
    if batch == 0 {
        return Err(Error::Config("feature batch size must be positive".into()));
    }
    let all: Vec<usize> = (0..db.records.len()).collect();
    let mut out = Vec::with_capacity(all.len());
    let width = model.config.fc2;
    for chunk in all.chunks(batch) {
        let (x, _) = gather_batch(db, chunk);
        let h2 = model.forward_features(&x)?;
        for row in h2.data().chunks_exact(width) {
            out.push(row.to_vec());
        }
    }
    Ok(out)
}

/// Predict one preprocessed image's location, clamped to the model's box.
pub fn predict_cnn_only(model: &CnnModel, image: &CsiImage) -> Result<(f64, f64)> {
    let x = image_tensor(model, image)?;
    let pred = model.forward_predict(&x)?;
    Ok((pred.data()[0], pred.data()[1]))
}
