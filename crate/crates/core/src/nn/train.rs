use rand::seq::SliceRandom;
use rand::RngCore;

use super::{clamp, encode, AdamState, MlpModel, Mode, INPUT_WIDTH};
use crate::error::{DdfError, Result};
use crate::sampler::FieldSample;
use crate::util::stream_rng;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub delta: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub iterations: usize,
    pub dropout: bool,
    /// Probability used when `dropout` is on.
    pub dropout_p: f64,
    pub hidden: Vec<usize>,
    pub seed: u64,
    /// Log the running loss every this many iterations (0 = never).
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            delta: 0.1,
            lr: 1e-4,
            batch_size: 128,
            iterations: 2000,
            dropout: false,
            dropout_p: 0.5,
            hidden: vec![128; 4],
            seed: 0,
            log_every: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(DdfError::InvalidArgument(format!("delta must be positive, got {}", self.delta)));
        }
        if self.batch_size == 0 {
            return Err(DdfError::InvalidArgument("batch size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(DdfError::InvalidArgument(format!("dropout p must be in [0, 1), got {}", self.dropout_p)));
        }
        Ok(())
    }
}

pub struct TrainOutcome {
    pub model: MlpModel,
    /// `(iteration, batch loss)` for every iteration, starting at 1.
    pub losses: Vec<(usize, f64)>,
}

/// Mean clamp loss `|clamp(y, δ) − clamp(ỹ, δ)|` over `batch` and its
/// gradient with respect to the model parameters. Misses are `y = +∞`.
pub fn batch_loss(
    model: &MlpModel,
    batch: &[&FieldSample],
    delta: f64,
    mode: Mode,
    rng: &mut dyn RngCore,
) -> (f64, Vec<f64>) {
    let mut inputs = Vec::with_capacity(batch.len() * INPUT_WIDTH);
    for s in batch {
        inputs.extend_from_slice(&encode(&s.position, &s.direction));
    }
    let (pred, cache) = model.forward_cached(&inputs, mode, rng);
    let n = batch.len() as f64;
    let mut loss = 0.0;
    let mut d_out = vec![0.0; batch.len()];
    for (i, (s, &p)) in batch.iter().zip(&pred).enumerate() {
        let target = clamp(s.target.or_infinity(), delta);
        let diff = clamp(p, delta) - target;
        loss += diff.abs();
        // Zero outside the band and at the kink.
        if p.abs() < delta && diff != 0.0 {
            d_out[i] = diff.signum() / n;
        }
    }
    let (grads, _) = model.backward(&cache, &d_out);
    (loss / n, grads)
}

fn batch_stats(model: &MlpModel, batch: &[&FieldSample]) -> String {
    let mut inputs = Vec::new();
    for s in batch {
        inputs.extend_from_slice(&encode(&s.position, &s.direction));
    }
    let pred = model.predict_batch(&inputs);
    let finite = pred.iter().filter(|p| p.is_finite()).count();
    let misses = batch.iter().filter(|s| !s.target.is_hit()).count();
    let bad_inputs = inputs.iter().filter(|v| !v.is_finite()).count();
    format!(
        "batch of {} ({} misses), {} finite predictions, {} non-finite inputs",
        batch.len(),
        misses,
        finite,
        bad_inputs
    )
}

/// Trains a fresh model on `dataset`. Mini-batches are drawn from a seeded
/// per-epoch shuffle; the run is a pure function of the config.
pub fn train(dataset: &[FieldSample], config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(DdfError::InvalidArgument("training dataset is empty".into()));
    }
    let mut init_rng = stream_rng(config.seed, 0);
    let mut shuffle_rng = stream_rng(config.seed, 1);
    let mut dropout_rng = stream_rng(config.seed, 2);
    let p = if config.dropout { config.dropout_p } else { 0.0 };
    let mut model = MlpModel::new(&config.hidden, p, config.delta, &mut init_rng);
    let mut adam = AdamState::new(model.param_count(), config.lr);

    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut cursor = order.len();
    let batch_size = config.batch_size.min(dataset.len());
    let mut losses = Vec::with_capacity(config.iterations);
    let mut window = 0.0;

    for iteration in 1..=config.iterations {
        if cursor + batch_size > order.len() {
            order.shuffle(&mut shuffle_rng);
            cursor = 0;
        }
        let batch: Vec<&FieldSample> = order[cursor..cursor + batch_size].iter().map(|&i| &dataset[i]).collect();
        cursor += batch_size;

        let (loss, grads) = batch_loss(&model, &batch, config.delta, Mode::Train, &mut dropout_rng);
        if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
            return Err(DdfError::Numeric {
                iteration,
                message: format!("loss {loss}; {}", batch_stats(&model, &batch)),
            });
        }
        adam.step(model.params_mut(), &grads)?;
        losses.push((iteration, loss));

        window += loss;
        if config.log_every > 0 && iteration % config.log_every == 0 {
            log::info!("iteration {iteration}: mean loss {:.6}", window / config.log_every as f64);
            window = 0.0;
        }
    }
    Ok(TrainOutcome { model, losses })
}
