//! From-scratch 2-16-3 feed-forward classifier.
//!
//! Forward pass with ReLU hidden units and a max-stabilized softmax, mean
//! categorical cross-entropy, analytic backpropagation, ADAM with bias
//! correction, and a mini-batch training loop. No tensor library: shapes are
//! fixed arrays checked by the compiler.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datagen::Dataset;
use crate::dmvn::Rng;
use crate::error::{LcError, Result};

pub const INPUTS: usize = 2;
pub const HIDDEN: usize = 16;
pub const OUTPUTS: usize = 3;

/// Logs in cross-entropy clamp their argument to at least this value.
const LOG_CLAMP: f64 = 1e-12;

/// The model's weights and biases. The same shape doubles as the container
/// for parameter-shaped tensors: gradients and ADAM moment estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FfnParameters {
    pub w1: [[f64; INPUTS]; HIDDEN],
    pub b1: [f64; HIDDEN],
    pub w2: [[f64; HIDDEN]; OUTPUTS],
    pub b2: [f64; OUTPUTS],
}

impl FfnParameters {
    pub fn zeros() -> Self {
        Self {
            w1: [[0.0; INPUTS]; HIDDEN],
            b1: [0.0; HIDDEN],
            w2: [[0.0; HIDDEN]; OUTPUTS],
            b2: [0.0; OUTPUTS],
        }
    }

    /// Seeded uniform Glorot-style initialization: weights in
    /// +-sqrt(6/(fan_in+fan_out)) per layer, biases zero.
    pub fn glorot(rng: &mut Rng) -> Self {
        let mut params = Self::zeros();
        let limit1 = (6.0 / (INPUTS + HIDDEN) as f64).sqrt();
        for row in params.w1.iter_mut() {
            for w in row.iter_mut() {
                *w = (2.0 * rng.next_f64() - 1.0) * limit1;
            }
        }
        let limit2 = (6.0 / (HIDDEN + OUTPUTS) as f64).sqrt();
        for row in params.w2.iter_mut() {
            for w in row.iter_mut() {
                *w = (2.0 * rng.next_f64() - 1.0) * limit2;
            }
        }
        params
    }

    pub fn all_finite(&self) -> bool {
        self.flat().iter().all(|v| v.is_finite())
    }

    /// Flattened copy in a fixed order (w1 rows, b1, w2 rows, b2); used by
    /// the elementwise ADAM update and by tests that probe single entries.
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(Self::LEN);
        out.extend(self.w1.iter().flatten());
        out.extend(self.b1);
        out.extend(self.w2.iter().flatten());
        out.extend(self.b2);
        out
    }

    /// Inverse of [`flat`](Self::flat).
    pub fn from_flat(values: &[f64]) -> Result<Self> {
        if values.len() != Self::LEN {
            return Err(LcError::DimensionMismatch {
                expected: Self::LEN,
                got: values.len(),
            });
        }
        let mut params = Self::zeros();
        let mut it = values.iter();
        for row in params.w1.iter_mut() {
            for w in row.iter_mut() {
                *w = *it.next().unwrap();
            }
        }
        for b in params.b1.iter_mut() {
            *b = *it.next().unwrap();
        }
        for row in params.w2.iter_mut() {
            for w in row.iter_mut() {
                *w = *it.next().unwrap();
            }
        }
        for b in params.b2.iter_mut() {
            *b = *it.next().unwrap();
        }
        Ok(params)
    }

    /// Total parameter count: 16*2 + 16 + 3*16 + 3.
    pub const LEN: usize = HIDDEN * INPUTS + HIDDEN + OUTPUTS * HIDDEN + OUTPUTS;
}

/// Every intermediate of one forward evaluation.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub hidden_pre: [f64; HIDDEN],
    pub hidden_post: [f64; HIDDEN],
    /// The logits feeding softmax (the penultimate output).
    pub penultimate: [f64; OUTPUTS],
    pub softmax: [f64; OUTPUTS],
}

/// Training hyperparameters. Defaults follow stock ADAM.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: u32,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 40,
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 32,
            shuffle_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.epsilon > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && self.beta1 > 0.0
            && (0.0..1.0).contains(&self.beta2)
            && self.beta2 > 0.0
            && self.batch_size > 0;
        if !ok {
            return Err(LcError::InvalidScenario(
                "train config out of range: need lr > 0, eps > 0, 0 < beta < 1, batch > 0".into(),
            ));
        }
        Ok(())
    }
}

/// ADAM moment accumulators; `t` counts completed steps.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: FfnParameters,
    pub v: FfnParameters,
    pub t: u64,
}

impl AdamState {
    pub fn new() -> Self {
        Self {
            m: FfnParameters::zeros(),
            v: FfnParameters::zeros(),
            t: 0,
        }
    }
}

impl Default for AdamState {
    fn default() -> Self {
        Self::new()
    }
}

/// Numerically stable softmax: the max logit is subtracted before
/// exponentiation, which leaves the result unchanged in exact arithmetic.
fn softmax(logits: &[f64; OUTPUTS]) -> [f64; OUTPUTS] {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out = [0.0; OUTPUTS];
    let mut denom = 0.0;
    for (o, l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        denom += *o;
    }
    for o in out.iter_mut() {
        *o /= denom;
    }
    out
}

/// Full forward evaluation at one input point.
pub fn forward(params: &FfnParameters, x: [i64; INPUTS]) -> Result<ForwardTrace> {
    let xf = [x[0] as f64, x[1] as f64];
    let mut hidden_pre = [0.0; HIDDEN];
    let mut hidden_post = [0.0; HIDDEN];
    for h in 0..HIDDEN {
        let mut a = params.b1[h];
        for i in 0..INPUTS {
            a += params.w1[h][i] * xf[i];
        }
        hidden_pre[h] = a;
        hidden_post[h] = a.max(0.0);
    }
    let mut penultimate = [0.0; OUTPUTS];
    for k in 0..OUTPUTS {
        let mut a = params.b2[k];
        for h in 0..HIDDEN {
            a += params.w2[k][h] * hidden_post[h];
        }
        penultimate[k] = a;
    }
    if penultimate.iter().any(|v| !v.is_finite()) {
        return Err(LcError::NonFinite("forward logits"));
    }
    Ok(ForwardTrace {
        hidden_pre,
        hidden_post,
        softmax: softmax(&penultimate),
        penultimate,
    })
}

/// One-hot target row for an output index.
pub fn onehot(index: usize) -> [f64; OUTPUTS] {
    let mut row = [0.0; OUTPUTS];
    row[index] = 1.0;
    row
}

/// Mean categorical cross-entropy of a batch.
///
/// Callers guarantee each prediction row is a probability vector and each
/// target row is one-hot; predicted probabilities are clamped to 1e-12
/// before the log.
pub fn cross_entropy(softmax_batch: &[[f64; OUTPUTS]], onehot_batch: &[[f64; OUTPUTS]]) -> Result<f64> {
    if softmax_batch.is_empty() || softmax_batch.len() != onehot_batch.len() {
        return Err(LcError::Empty("cross-entropy batch"));
    }
    let mut total = 0.0;
    for (p, t) in softmax_batch.iter().zip(onehot_batch) {
        for (pk, tk) in p.iter().zip(t) {
            if *tk != 0.0 {
                total -= tk * pk.max(LOG_CLAMP).ln();
            }
        }
    }
    Ok(total / softmax_batch.len() as f64)
}

/// One training example: an input point and its output index in `0..3`.
pub type Example = ([i64; INPUTS], usize);

/// Mean loss and its gradient over a batch.
///
/// The output-layer gradient of softmax with cross-entropy is
/// `(softmax - onehot) / N`, pushed back through the second layer and the
/// ReLU masks.
pub fn backward(params: &FfnParameters, batch: &[Example]) -> Result<(f64, FfnParameters)> {
    if batch.is_empty() {
        return Err(LcError::Empty("gradient batch"));
    }
    let n = batch.len() as f64;
    let mut grads = FfnParameters::zeros();
    let mut loss = 0.0;
    for &(x, label) in batch {
        let trace = forward(params, x)?;
        loss -= trace.softmax[label].max(LOG_CLAMP).ln();

        let mut delta_out = trace.softmax;
        delta_out[label] -= 1.0;
        for d in delta_out.iter_mut() {
            *d /= n;
        }

        for k in 0..OUTPUTS {
            grads.b2[k] += delta_out[k];
            for h in 0..HIDDEN {
                grads.w2[k][h] += delta_out[k] * trace.hidden_post[h];
            }
        }

        let xf = [x[0] as f64, x[1] as f64];
        for h in 0..HIDDEN {
            if trace.hidden_pre[h] <= 0.0 {
                continue; // ReLU gate closed; no gradient flows.
            }
            let mut delta_h = 0.0;
            for k in 0..OUTPUTS {
                delta_h += delta_out[k] * params.w2[k][h];
            }
            grads.b1[h] += delta_h;
            for i in 0..INPUTS {
                grads.w1[h][i] += delta_h * xf[i];
            }
        }
    }
    if !grads.all_finite() {
        return Err(LcError::NonFinite("gradient"));
    }
    Ok((loss / n, grads))
}

/// One ADAM update in place: moment accumulation, bias correction, and the
/// scaled step `theta -= lr * m_hat / (sqrt(v_hat) + eps)`.
pub fn adam_step(
    params: &mut FfnParameters,
    grads: &FfnParameters,
    state: &mut AdamState,
    config: &TrainConfig,
) {
    state.t += 1;
    let m_corr = 1.0 - config.beta1.powi(state.t as i32);
    let v_corr = 1.0 - config.beta2.powi(state.t as i32);

    let mut p = params.flat();
    let g = grads.flat();
    let mut m = state.m.flat();
    let mut v = state.v.flat();
    for i in 0..FfnParameters::LEN {
        m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
        v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
        let m_hat = m[i] / m_corr;
        let v_hat = v[i] / v_corr;
        p[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
    }
    *params = FfnParameters::from_flat(&p).expect("same length");
    state.m = FfnParameters::from_flat(&m).expect("same length");
    state.v = FfnParameters::from_flat(&v).expect("same length");
}

/// Loss and accuracy of one completed epoch.
#[derive(Debug, Clone, Serialize)]
pub struct EpochStats {
    pub epoch: u32,
    pub mean_loss: f64,
    pub train_accuracy: f64,
}

/// Converts a dataset to training examples, requiring labels in `0..3`
/// (seen labels map identically to output indices).
fn to_examples(dataset: &Dataset) -> Result<Vec<Example>> {
    dataset
        .points
        .iter()
        .map(|p| {
            if p.label >= OUTPUTS {
                return Err(LcError::UnknownLabel(p.label));
            }
            let coords: [i64; INPUTS] = p
                .coordinates
                .as_slice()
                .try_into()
                .map_err(|_| LcError::DimensionMismatch {
                    expected: INPUTS,
                    got: p.coordinates.len(),
                })?;
            Ok((coords, p.label))
        })
        .collect()
}

/// Mini-batch ADAM training: per-epoch reshuffle, final short batch kept.
///
/// Deterministic given the initial parameters, the data order, and
/// `shuffle_seed`. The per-epoch mean loss is the size-weighted mean of the
/// batch losses as they were seen during the epoch.
pub fn train(
    params_init: FfnParameters,
    train_set: &Dataset,
    config: &TrainConfig,
) -> Result<(FfnParameters, Vec<EpochStats>)> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(LcError::Empty("training set"));
    }
    let examples = to_examples(train_set)?;
    let mut params = params_init;
    let mut state = AdamState::new();
    let mut shuffle_rng = Rng::seeded(config.shuffle_seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut history = Vec::with_capacity(config.epochs as usize);

    for epoch in 1..=config.epochs {
        shuffle_rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for (batch_idx, batch_ids) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<Example> = batch_ids.iter().map(|&i| examples[i]).collect();
            let (loss, grads) = backward(&params, &batch)?;
            if !loss.is_finite() {
                return Err(LcError::Diverged {
                    epoch,
                    batch: batch_idx,
                });
            }
            loss_sum += loss * batch.len() as f64;
            adam_step(&mut params, &grads, &mut state, config);
        }
        history.push(EpochStats {
            epoch,
            mean_loss: loss_sum / examples.len() as f64,
            train_accuracy: accuracy(&params, train_set)?,
        });
    }
    Ok((params, history))
}

/// Fraction of points whose argmax softmax index equals the label.
/// Ties break toward the lowest index, keeping the result deterministic.
pub fn accuracy(params: &FfnParameters, dataset: &Dataset) -> Result<f64> {
    if dataset.is_empty() {
        return Err(LcError::Empty("accuracy dataset"));
    }
    let examples = to_examples(dataset)?;
    let mut correct = 0usize;
    for (x, label) in examples {
        let trace = forward(params, x)?;
        let mut best = 0usize;
        for k in 1..OUTPUTS {
            if trace.softmax[k] > trace.softmax[best] {
                best = k;
            }
        }
        if best == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / dataset.len() as f64)
}

/// On-disk model: weights plus the training config and seed that made them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub w1: [[f64; INPUTS]; HIDDEN],
    pub b1: [f64; HIDDEN],
    pub w2: [[f64; HIDDEN]; OUTPUTS],
    pub b2: [f64; OUTPUTS],
    pub config: TrainConfig,
    pub seed: u64,
}

impl ModelFile {
    pub fn new(params: &FfnParameters, config: &TrainConfig, seed: u64) -> Self {
        Self {
            w1: params.w1,
            b1: params.b1,
            w2: params.w2,
            b2: params.b2,
            config: config.clone(),
            seed,
        }
    }

    pub fn params(&self) -> FfnParameters {
        FfnParameters {
            w1: self.w1,
            b1: self.b1,
            w2: self.w2,
            b2: self.b2,
        }
    }
}

pub fn write_model(model: &ModelFile, path: &Path) -> Result<()> {
    let out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(out, model)?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<ModelFile> {
    let input = BufReader::new(File::open(path)?);
    Ok(serde_json::from_reader(input)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_scenario, LabeledPoint, Split};
    use crate::oracle::{CaseId, ScenarioConfig};

    fn seeded_params(seed: u64) -> FfnParameters {
        FfnParameters::glorot(&mut Rng::seeded(seed))
    }

    fn random_batch(rng: &mut Rng, size: usize) -> Vec<Example> {
        (0..size)
            .map(|_| {
                let x = [rng.below(35) as i64 - 12, rng.below(35) as i64 - 12];
                (x, rng.below(OUTPUTS))
            })
            .collect()
    }

    #[test]
    fn flat_round_trip() {
        let params = seeded_params(1);
        assert_eq!(params.flat().len(), 99);
        let back = FfnParameters::from_flat(&params.flat()).unwrap();
        assert_eq!(params, back);
        assert!(FfnParameters::from_flat(&[0.0; 98]).is_err());
    }

    #[test]
    fn zero_parameters_give_uniform_softmax() {
        let trace = forward(&FfnParameters::zeros(), [7, -3]).unwrap();
        for p in trace.softmax {
            assert!((p - 1.0 / 3.0).abs() <= 1e-15);
        }
    }

    #[test]
    fn softmax_of_log_integers_is_proportional() {
        // Logits ln(1), ln(2), ln(3) forced through the output biases.
        let mut params = FfnParameters::zeros();
        params.b2 = [0.0, 2.0f64.ln(), 3.0f64.ln()];
        let trace = forward(&params, [0, 0]).unwrap();
        let want = [1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0];
        for (got, want) in trace.softmax.iter().zip(want) {
            assert!((got - want).abs() <= 1e-15);
        }
    }

    #[test]
    fn softmax_is_shift_invariant() {
        let mut rng = Rng::seeded(2);
        for _ in 0..100 {
            let logits = [
                100.0 * rng.next_f64() - 50.0,
                100.0 * rng.next_f64() - 50.0,
                100.0 * rng.next_f64() - 50.0,
            ];
            let c = 100.0 * rng.next_f64() - 50.0;
            let shifted = [logits[0] + c, logits[1] + c, logits[2] + c];
            let a = softmax(&logits);
            let b = softmax(&shifted);
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() <= 1e-12);
            }
            let sum: f64 = a.iter().sum();
            assert!((sum - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn relu_gates_are_exact() {
        let params = seeded_params(3);
        let trace = forward(&params, [5, -9]).unwrap();
        for (pre, post) in trace.hidden_pre.iter().zip(trace.hidden_post) {
            if *pre < 0.0 {
                assert_eq!(post, 0.0);
            } else {
                assert_eq!(post, *pre);
            }
        }
    }

    #[test]
    fn cross_entropy_closed_forms() {
        let perfect = cross_entropy(&[[1.0, 0.0, 0.0]], &[[1.0, 0.0, 0.0]]).unwrap();
        assert_eq!(perfect, 0.0);

        let uniform = [1.0 / 3.0; 3];
        let got = cross_entropy(&[uniform], &[[0.0, 1.0, 0.0]]).unwrap();
        assert!((got - 3.0f64.ln()).abs() <= 1e-15);

        // Batch mean of two examples equals the average of their losses.
        let l1 = cross_entropy(&[[0.5, 0.25, 0.25]], &[[1.0, 0.0, 0.0]]).unwrap();
        let l2 = cross_entropy(&[uniform], &[[0.0, 0.0, 1.0]]).unwrap();
        let both = cross_entropy(
            &[[0.5, 0.25, 0.25], uniform],
            &[[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]],
        )
        .unwrap();
        assert!((both - 0.5 * (l1 + l2)).abs() <= 1e-15);
    }

    #[test]
    fn cross_entropy_clamps_zero_probability() {
        let loss = cross_entropy(&[[0.0, 1.0, 0.0]], &[[1.0, 0.0, 0.0]]).unwrap();
        assert!((loss - (-(1e-12f64).ln())).abs() <= 1e-9);
    }

    #[test]
    fn gradient_is_zero_for_perfect_predictions() {
        // Output bias 800 with zero weights drives softmax to exactly
        // [1, 0, 0]: the other logits underflow entirely.
        let mut params = FfnParameters::zeros();
        params.b2 = [800.0, 0.0, 0.0];
        let batch: Vec<Example> = vec![([3, 4], 0), ([-2, 7], 0)];
        let (_, grads) = backward(&params, &batch).unwrap();
        assert!(grads.flat().iter().all(|&g| g == 0.0));
    }

    /// Central finite-difference gradient of the mean batch loss with
    /// respect to one flattened parameter.
    fn fd_gradient(params: &FfnParameters, batch: &[Example], index: usize, step: f64) -> f64 {
        let mut flat = params.flat();
        flat[index] += step;
        let up = batch_loss(&FfnParameters::from_flat(&flat).unwrap(), batch);
        flat[index] -= 2.0 * step;
        let down = batch_loss(&FfnParameters::from_flat(&flat).unwrap(), batch);
        (up - down) / (2.0 * step)
    }

    fn batch_loss(params: &FfnParameters, batch: &[Example]) -> f64 {
        let softmaxes: Vec<[f64; OUTPUTS]> = batch
            .iter()
            .map(|&(x, _)| forward(params, x).unwrap().softmax)
            .collect();
        let onehots: Vec<[f64; OUTPUTS]> = batch.iter().map(|&(_, l)| onehot(l)).collect();
        cross_entropy(&softmaxes, &onehots).unwrap()
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = Rng::seeded(77);
        for model in 0..10 {
            let params = seeded_params(1000 + model);
            let batch = random_batch(&mut rng, 8);
            let (loss, grads) = backward(&params, &batch).unwrap();
            assert!((loss - batch_loss(&params, &batch)).abs() <= 1e-12);
            let flat = grads.flat();
            for _ in 0..5 {
                let index = rng.below(FfnParameters::LEN);
                let fd = fd_gradient(&params, &batch, index, 1e-4);
                let analytic = flat[index];
                let rel = (analytic - fd).abs() / (analytic.abs() + fd.abs()).max(1e-8);
                assert!(
                    rel <= 1e-5,
                    "model {model} param {index}: analytic {analytic:e}, fd {fd:e}, rel {rel:e}"
                );
            }
        }
    }

    #[test]
    fn backward_is_batch_linear() {
        let params = seeded_params(5);
        let mut rng = Rng::seeded(6);
        let a = random_batch(&mut rng, 6);
        let b = random_batch(&mut rng, 10);
        let mut joined = a.clone();
        joined.extend(&b);
        let (_, ga) = backward(&params, &a).unwrap();
        let (_, gb) = backward(&params, &b).unwrap();
        let (_, gj) = backward(&params, &joined).unwrap();
        let (na, nb) = (a.len() as f64, b.len() as f64);
        for ((ja, ea), eb) in gj.flat().iter().zip(ga.flat()).zip(gb.flat()) {
            let want = (ea * na + eb * nb) / (na + nb);
            assert!((ja - want).abs() <= 1e-12);
        }
    }

    #[test]
    fn adam_ignores_zero_gradient() {
        let mut params = seeded_params(8);
        let before = params.clone();
        let mut state = AdamState::new();
        adam_step(
            &mut params,
            &FfnParameters::zeros(),
            &mut state,
            &TrainConfig::default(),
        );
        assert_eq!(params, before);
        assert_eq!(state.t, 1);
    }

    #[test]
    fn adam_first_step_magnitude_is_the_learning_rate() {
        // At t=1 the bias-corrected update is lr * g / (|g| + eps), which is
        // lr to within eps/|g| for any sizable gradient.
        let mut params = FfnParameters::zeros();
        let mut grads = FfnParameters::zeros();
        grads.b2[1] = 0.25;
        let config = TrainConfig::default();
        let mut state = AdamState::new();
        adam_step(&mut params, &grads, &mut state, &config);
        let step1 = params.b2[1].abs();
        assert!((step1 - config.learning_rate).abs() <= 1e-7, "step {step1:e}");
        assert_eq!(params.b2[0], 0.0);

        // A second identical step cannot grow: moments accumulate.
        let before = params.b2[1];
        adam_step(&mut params, &grads, &mut state, &config);
        let step2 = (params.b2[1] - before).abs();
        assert!(step2 <= step1 + 1e-12, "step1 {step1:e}, step2 {step2:e}");
    }

    fn small_train_set(seed: u64) -> Dataset {
        let mut config = ScenarioConfig::builtin(CaseId::I, seed);
        config.train_size = 300;
        config.test_size = 100;
        generate_scenario(&config).unwrap().0
    }

    #[test]
    fn training_is_deterministic_and_loss_decreases() {
        let data = small_train_set(31);
        let config = TrainConfig {
            epochs: 8,
            shuffle_seed: 5,
            ..TrainConfig::default()
        };
        let (pa, ha) = train(seeded_params(9), &data, &config).unwrap();
        let (pb, hb) = train(seeded_params(9), &data, &config).unwrap();
        assert_eq!(pa, pb);
        assert_eq!(ha.len(), 8);
        assert!(hb.last().unwrap().mean_loss < hb[0].mean_loss);

        let (pc, _) = train(seeded_params(10), &data, &config).unwrap();
        assert_ne!(pa, pc);
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let data = small_train_set(32);
        let config = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let init = seeded_params(11);
        let (trained, history) = train(init.clone(), &data, &config).unwrap();
        assert_eq!(trained, init);
        assert!(history.is_empty());
    }

    #[test]
    fn train_rejects_out_of_range_labels() {
        let mut data = small_train_set(33);
        data.points.push(LabeledPoint {
            coordinates: vec![0, 0],
            label: 3,
        });
        assert!(matches!(
            train(seeded_params(1), &data, &TrainConfig::default()),
            Err(LcError::UnknownLabel(3))
        ));
    }

    #[test]
    fn accuracy_counts_argmax_with_low_index_ties() {
        let mut data = Dataset {
            points: vec![
                LabeledPoint { coordinates: vec![0, 0], label: 0 },
                LabeledPoint { coordinates: vec![1, 1], label: 1 },
                LabeledPoint { coordinates: vec![2, 2], label: 2 },
            ],
            scenario_id: "t".into(),
            split: Split::Test,
        };
        // All-zero parameters tie every softmax at 1/3; argmax breaks to
        // index 0, so only the label-0 point counts.
        let got = accuracy(&FfnParameters::zeros(), &data).unwrap();
        assert!((got - 1.0 / 3.0).abs() <= 1e-15);

        data.points.truncate(0);
        assert!(accuracy(&FfnParameters::zeros(), &data).is_err());
    }

    #[test]
    fn model_file_round_trips() {
        let params = seeded_params(12);
        let config = TrainConfig::default();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        write_model(&ModelFile::new(&params, &config, 12), &path).unwrap();
        let back = read_model(&path).unwrap();
        assert_eq!(back.params(), params);
        assert_eq!(back.seed, 12);
        assert_eq!(back.config.epochs, config.epochs);
    }

    #[test]
    fn train_config_validation() {
        let mut config = TrainConfig::default();
        config.learning_rate = 0.0;
        assert!(config.validate().is_err());
        let mut config = TrainConfig::default();
        config.beta1 = 1.0;
        assert!(config.validate().is_err());
        let mut config = TrainConfig::default();
        config.batch_size = 0;
        assert!(config.validate().is_err());
        assert!(TrainConfig::default().validate().is_ok());
    }
}
