use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::sample_loss;
use super::model::{CnnModel, Grads, Workspace};
use super::{NnError, Real};
use crate::dsp::{standardize_f32, FeatureMap};
use crate::eval::topk_accuracy;
use crate::exec::Exec;

/// Optimizer and schedule settings. Defaults: Adam at lr 1e-3, batch 32,
/// 40 epochs, lr multiplied by 0.1 every 10 epochs, 5 seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr_decay_gamma: f64,
    pub lr_decay_every_epochs: usize,
    pub n_seeds: usize,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            batch_size: 32,
            epochs: 40,
            lr_decay_gamma: 0.1,
            lr_decay_every_epochs: 10,
            n_seeds: 5,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        let ok = self.lr > 0.0
            && self.batch_size > 0
            && self.epochs > 0
            && self.lr_decay_gamma > 0.0
            && self.lr_decay_every_epochs > 0
            && self.n_seeds > 0
            && (0.0..1.0).contains(&self.adam_beta1)
            && (0.0..1.0).contains(&self.adam_beta2)
            && self.adam_eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(NnError::InvalidConfig(format!("{self:?}")))
        }
    }

    /// Learning rate used during 1-based `epoch`.
    pub fn lr_at_epoch(&self, epoch: usize) -> f64 {
        let steps = (epoch.max(1) - 1) / self.lr_decay_every_epochs;
        self.lr * self.lr_decay_gamma.powi(steps as i32)
    }
}

/// Stacked network inputs with their beam labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTensors<T> {
    pub sample_shape: [usize; 3],
    pub data: Vec<T>,
    pub labels: Vec<usize>,
}

impl<T: Real> LabeledTensors<T> {
    pub fn new(sample_shape: [usize; 3], data: Vec<T>, labels: Vec<usize>) -> Result<Self, NnError> {
        let len: usize = sample_shape.iter().product();
        if data.len() != len * labels.len() {
            return Err(NnError::ShapeMismatch(format!(
                "{} values for {} samples of shape {sample_shape:?}",
                data.len(),
                labels.len()
            )));
        }
        Ok(LabeledTensors { sample_shape, data, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[T] {
        let len: usize = self.sample_shape.iter().product();
        &self.data[i * len..(i + 1) * len]
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.sample_shape.iter().product::<usize>());
        for &i in indices {
            data.extend_from_slice(self.sample(i));
        }
        LabeledTensors {
            sample_shape: self.sample_shape,
            data,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_top1: f64,
    pub val_top3: f64,
    pub val_top5: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    /// Parameters of the epoch with the best validation top-1 accuracy
    /// (earliest on ties).
    pub model: CnnModel<T>,
    pub best_epoch: usize,
    pub metrics: Vec<EpochMetrics>,
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    m: Grads<T>,
    v: Grads<T>,
    step: i32,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl<T: Real> Adam<T> {
    pub fn new(model: &CnnModel<T>, beta1: f64, beta2: f64, eps: f64) -> Self {
        Adam { m: model.zero_grads(), v: model.zero_grads(), step: 0, beta1, beta2, eps }
    }

    pub fn step(&mut self, model: &mut CnnModel<T>, grads: &Grads<T>, lr: f64) {
        self.step += 1;
        let (b1, b2) = (T::from_f64_lossy(self.beta1), T::from_f64_lossy(self.beta2));
        let (one_b1, one_b2) = (T::from_f64_lossy(1.0 - self.beta1), T::from_f64_lossy(1.0 - self.beta2));
        let corr1 = T::from_f64_lossy(1.0 - self.beta1.powi(self.step));
        let corr2 = T::from_f64_lossy(1.0 - self.beta2.powi(self.step));
        let lr = T::from_f64_lossy(lr);
        let eps = T::from_f64_lossy(self.eps);
        for (((param, g), m), v) in model.params_mut().into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..param.len() {
                m[i] = b1 * m[i] + one_b1 * g[i];
                v[i] = b2 * v[i] + one_b2 * g[i] * g[i];
                let m_hat = m[i] / corr1;
                let v_hat = v[i] / corr2;
                param[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

/// Samples per gradient work unit. Fixed so that the reduction order (and
/// therefore every bit of the result) does not depend on the thread count.
const GRAD_CHUNK: usize = 4;

/// Mean loss and mean gradient over `indices`.
pub fn batch_gradients<T: Real>(
    model: &CnnModel<T>,
    data: &LabeledTensors<T>,
    indices: &[usize],
    exec: Exec,
) -> Result<(f64, Grads<T>), NnError> {
    let n_out = model.n_outputs();
    let scale = 1.0 / indices.len() as f64;
    let chunks: Vec<&[usize]> = indices.chunks(GRAD_CHUNK).collect();
    let partials = exec.try_map_range(chunks.len(), |c| {
        let mut ws = Workspace::default();
        let mut grads = model.zero_grads();
        let mut dlogits = vec![T::zero(); n_out];
        let mut loss = 0.0;
        for &i in chunks[c] {
            let logits = model.forward_sample(data.sample(i), &mut ws)?;
            loss += sample_loss(logits, data.labels[i], scale, &mut dlogits);
            model.backward_sample(&dlogits, &mut grads, &mut ws);
        }
        Ok::<_, NnError>((loss, grads))
    })?;
    let mut iter = partials.into_iter();
    let (mut loss, mut total) = iter.next().ok_or(NnError::EmptyDataset)?;
    for (l, g) in iter {
        loss += l;
        for (t, p) in total.iter_mut().zip(&g) {
            for (a, &b) in t.iter_mut().zip(p) {
                *a += b;
            }
        }
    }
    Ok((loss * scale, total))
}

/// Logits of every sample.
pub fn predict_scores<T: Real>(
    model: &CnnModel<T>,
    data: &LabeledTensors<T>,
    exec: Exec,
) -> Result<Vec<Vec<T>>, NnError> {
    exec.try_map_range(data.len(), |i| model.logits(data.sample(i)))
}

/// Indices of the `k` largest scores, descending, ties to the lower index.
pub fn topk_indices<T: Real>(scores: &[T], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Top-k beams for one feature map. Unstandardized maps are rounded to f32
/// and standardized first, exactly as stored datasets are fed in training.
pub fn predict_topk<T: Real>(model: &CnnModel<T>, map: &FeatureMap, k: usize) -> Result<Vec<usize>, NnError> {
    let n = model.n_outputs();
    if k < 1 || k > n {
        return Err(NnError::KOutOfRange { k, n });
    }
    let input: Vec<T> = if map.standardized {
        map.data.iter().map(|&x| T::from_f64_lossy(x)).collect()
    } else {
        let mut values = map.to_f32();
        standardize_f32(&mut values);
        values.into_iter().map(|x| T::from_f64_lossy(x as f64)).collect()
    };
    Ok(topk_indices(&model.logits(&input)?, k))
}

fn evaluate<T: Real>(model: &CnnModel<T>, data: &LabeledTensors<T>, exec: Exec) -> Result<(f64, [f64; 3]), NnError> {
    let scores = predict_scores(model, data, exec)?;
    let mut scratch = vec![T::zero(); model.n_outputs()];
    let loss = scores.iter().zip(&data.labels).map(|(s, &l)| sample_loss(s, l, 1.0, &mut scratch)).sum::<f64>()
        / data.len().max(1) as f64;
    let preds: Vec<Vec<usize>> = scores.iter().map(|s| topk_indices(s, 5)).collect();
    let acc = topk_accuracy(&preds, &data.labels, &[1, 3, 5]).map_err(|e| NnError::InvalidConfig(e.to_string()))?;
    Ok((loss, [acc[0], acc[1], acc[2]]))
}

fn check_data<T: Real>(model: &CnnModel<T>, data: &LabeledTensors<T>) -> Result<(), NnError> {
    if data.sample_shape != model.input_shape() {
        return Err(NnError::ShapeMismatch(format!(
            "samples {:?}, model expects {:?}",
            data.sample_shape,
            model.input_shape()
        )));
    }
    let n = model.n_outputs();
    if let Some(&label) = data.labels.iter().find(|&&l| l >= n) {
        return Err(NnError::LabelOutOfRange { label, n_classes: n });
    }
    Ok(())
}

/// Trains with Adam and step decay, keeping the parameters of the epoch
/// with the best validation top-1 accuracy. Deterministic given
/// `config.seed` regardless of `exec`.
pub fn train<T: Real>(
    model: CnnModel<T>,
    train_set: &LabeledTensors<T>,
    val_set: &LabeledTensors<T>,
    config: &TrainConfig,
    exec: Exec,
) -> Result<TrainOutcome<T>, NnError> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    check_data(&model, train_set)?;
    check_data(&model, val_set)?;

    let mut model = model;
    let mut adam = Adam::new(&model, config.adam_beta1, config.adam_beta2, config.adam_eps);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(0x5348_5546); // shuffle stream, distinct from init
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut metrics = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, CnnModel<T>)> = None;

    for epoch in 1..=config.epochs {
        let lr = config.lr_at_epoch(epoch);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let (loss, grads) = batch_gradients(&model, train_set, batch, exec)?;
            loss_sum += loss * batch.len() as f64;
            adam.step(&mut model, &grads, lr);
        }
        let train_loss = loss_sum / train_set.len() as f64;
        let (val_loss, [top1, top3, top5]) =
            if val_set.is_empty() { (f64::NAN, [f64::NAN; 3]) } else { evaluate(&model, val_set, exec)? };
        metrics.push(EpochMetrics { epoch, lr, train_loss, val_loss, val_top1: top1, val_top3: top3, val_top5: top5 });
        let score = if val_set.is_empty() { epoch as f64 } else { top1 };
        if best.as_ref().is_none_or(|(b, _, _)| score > *b) {
            best = Some((score, epoch, model.clone()));
        }
    }
    let (_, best_epoch, model) = best.expect("at least one epoch");
    Ok(TrainOutcome { model, best_epoch, metrics })
}
