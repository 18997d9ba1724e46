//! Linear probes (softmax or sigmoid) trained by mini-batch gradient descent.

mod metrics;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use metrics::{evaluate, f1_from_counts, MetricsReport};

use crate::error::{Error, Result};
use crate::model::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum ProbeTask {
    /// Softmax over `classes >= 2` outputs.
    Multiclass { classes: usize },
    /// One sigmoid output; labels are 0 or 1.
    Binary,
}

impl ProbeTask {
    /// Rows of the weight matrix.
    pub fn outputs(self) -> usize {
        match self {
            ProbeTask::Multiclass { classes } => classes,
            ProbeTask::Binary => 1,
        }
    }

    /// Distinct label values.
    pub fn classes(self) -> usize {
        match self {
            ProbeTask::Multiclass { classes } => classes,
            ProbeTask::Binary => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"), try_from = "ProbeRepr<S>")]
pub struct LinearProbe<S> {
    task: ProbeTask,
    weights: Matrix<S>,
    bias: Vec<S>,
}

#[derive(Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
struct ProbeRepr<S> {
    task: ProbeTask,
    weights: Matrix<S>,
    bias: Vec<S>,
}

impl<S: Scalar> TryFrom<ProbeRepr<S>> for LinearProbe<S> {
    type Error = Error;

    fn try_from(r: ProbeRepr<S>) -> Result<Self> {
        LinearProbe::new(r.task, r.weights, r.bias)
    }
}

impl<S: Scalar> LinearProbe<S> {
    pub fn new(task: ProbeTask, weights: Matrix<S>, bias: Vec<S>) -> Result<Self> {
        if let ProbeTask::Multiclass { classes } = task {
            if classes < 2 {
                return Err(Error::invalid("linear probe", "multiclass needs at least 2 classes"));
            }
        }
        if weights.rows() != task.outputs() || bias.len() != task.outputs() {
            return Err(Error::invalid(
                "linear probe",
                format!(
                    "{} outputs expected, weights have {} rows and bias {} entries",
                    task.outputs(),
                    weights.rows(),
                    bias.len()
                ),
            ));
        }
        if weights.cols() == 0 {
            return Err(Error::invalid("linear probe", "input dim must be at least 1"));
        }
        if !weights.all_finite() || !bias.iter().all(|b| b.is_finite()) {
            return Err(Error::NonFinite("probe parameters"));
        }
        Ok(LinearProbe { task, weights, bias })
    }

    pub fn zeros(task: ProbeTask, dim: usize) -> Result<Self> {
        LinearProbe::new(task, Matrix::zeros(task.outputs(), dim), vec![S::zero(); task.outputs()])
    }

    pub fn task(&self) -> ProbeTask {
        self.task
    }

    pub fn dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn weights(&self) -> &Matrix<S> {
        &self.weights
    }

    pub fn bias(&self) -> &[S] {
        &self.bias
    }

    fn params(&self) -> Params {
        Params {
            task: self.task,
            dim: self.dim(),
            w: self.weights.as_slice().iter().map(|v| v.as_f64()).collect(),
            b: self.bias.iter().map(|v| v.as_f64()).collect(),
        }
    }

    pub fn logits(&self, x: &[S]) -> Vec<f64> {
        self.params().logits(x)
    }

    /// Class probabilities. For the binary task this is `[1 - p, p]`.
    pub fn predict_proba(&self, x: &[S]) -> Vec<f64> {
        let z = self.logits(x);
        match self.task {
            ProbeTask::Multiclass { .. } => softmax(&z),
            ProbeTask::Binary => {
                let p = sigmoid(z[0]);
                vec![1.0 - p, p]
            }
        }
    }

    /// Argmax class; binary thresholds the sigmoid at 0.5.
    pub fn predict(&self, x: &[S]) -> usize {
        let z = self.logits(x);
        match self.task {
            ProbeTask::Multiclass { .. } => argmax(&z),
            ProbeTask::Binary => usize::from(sigmoid(z[0]) >= 0.5),
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// First index of the maximum.
pub fn argmax(z: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in z.iter().enumerate() {
        if v > z[best] {
            best = i;
        }
    }
    best
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Inputs and integer labels. Binary labels are 0 or 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeDataset<S> {
    inputs: Matrix<S>,
    labels: Vec<usize>,
}

impl<S: Scalar> ProbeDataset<S> {
    pub fn new(inputs: Matrix<S>, labels: Vec<usize>) -> Result<Self> {
        if inputs.rows() == 0 {
            return Err(Error::EmptyInput("probe dataset"));
        }
        if labels.len() != inputs.rows() {
            return Err(Error::DimensionMismatch {
                context: "probe dataset labels",
                expected: inputs.rows(),
                found: labels.len(),
            });
        }
        if !inputs.all_finite() {
            return Err(Error::NonFinite("probe inputs"));
        }
        Ok(ProbeDataset { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn inputs(&self) -> &Matrix<S> {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub(crate) fn check_for(&self, task: ProbeTask, dim: usize, context: &'static str) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::DimensionMismatch {
                context,
                expected: dim,
                found: self.dim(),
            });
        }
        if let Some(&label) = self.labels.iter().find(|&&l| l >= task.classes()) {
            return Err(Error::LabelOutOfRange {
                label,
                classes: task.classes(),
            });
        }
        Ok(())
    }
}

/// Working copy of the parameters in f64.
#[derive(Clone)]
struct Params {
    task: ProbeTask,
    dim: usize,
    w: Vec<f64>,
    b: Vec<f64>,
}

impl Params {
    fn logits<S: Scalar>(&self, x: &[S]) -> Vec<f64> {
        self.b
            .iter()
            .enumerate()
            .map(|(c, &b)| {
                let row = &self.w[c * self.dim..(c + 1) * self.dim];
                b + row.iter().zip(x).map(|(w, v)| w * v.as_f64()).sum::<f64>()
            })
            .collect()
    }

    /// Loss of one example and `dL/dz` for its logits.
    fn example<S: Scalar>(&self, x: &[S], y: usize) -> (f64, Vec<f64>) {
        let z = self.logits(x);
        match self.task {
            ProbeTask::Multiclass { .. } => {
                let mut g = softmax(&z);
                g[y] -= 1.0;
                (log_sum_exp(&z) - z[y], g)
            }
            ProbeTask::Binary => {
                let t = y as f64;
                (softplus(z[0]) - t * z[0], vec![sigmoid(z[0]) - t])
            }
        }
    }

    /// Mean (weighted) loss over `idx`, and its gradient when `grad` is set.
    fn loss_grad<S: Scalar>(
        &self,
        data: &ProbeDataset<S>,
        idx: &[usize],
        class_weights: Option<&[f64]>,
        grad: bool,
    ) -> (f64, Vec<f64>, Vec<f64>) {
        let mut gw = if grad { vec![0.0; self.w.len()] } else { Vec::new() };
        let mut gb = if grad { vec![0.0; self.b.len()] } else { Vec::new() };
        let mut loss = 0.0;
        for &i in idx {
            let x = data.inputs.row(i);
            let y = data.labels[i];
            let weight = class_weights.map_or(1.0, |cw| cw[y]);
            let (l, dz) = self.example(x, y);
            loss += weight * l;
            if grad {
                for (c, d) in dz.iter().enumerate() {
                    let d = weight * d;
                    gb[c] += d;
                    for (g, v) in gw[c * self.dim..(c + 1) * self.dim].iter_mut().zip(x) {
                        *g += d * v.as_f64();
                    }
                }
            }
        }
        let n = idx.len() as f64;
        gw.iter_mut().chain(gb.iter_mut()).for_each(|g| *g /= n);
        (loss / n, gw, gb)
    }

    fn into_probe<S: Scalar>(self) -> Result<LinearProbe<S>> {
        let rows = self.b.len();
        LinearProbe::new(
            self.task,
            Matrix::from_vec(rows, self.dim, self.w.into_iter().map(S::cast_f64).collect())?,
            self.b.into_iter().map(S::cast_f64).collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeHyper {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Stop after this many epochs without a lower validation loss.
    pub patience: usize,
    /// Per-class loss weights, indexed by label.
    #[serde(default)]
    pub class_weights: Option<Vec<f64>>,
}

impl Default for ProbeHyper {
    fn default() -> Self {
        ProbeHyper {
            learning_rate: 0.05,
            epochs: 100,
            batch_size: 64,
            seed: 0,
            patience: 10,
            class_weights: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_loss: f64,
    pub valid_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
    /// Epoch whose parameters were returned.
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

/// Train from zero initialization and return the parameters with the lowest
/// validation loss.
pub fn train_probe<S: Scalar>(
    train: &ProbeDataset<S>,
    valid: &ProbeDataset<S>,
    task: ProbeTask,
    hyper: &ProbeHyper,
) -> Result<(LinearProbe<S>, TrainingLog)> {
    let dim = train.dim();
    train.check_for(task, dim, "probe train set")?;
    valid.check_for(task, dim, "probe validation set")?;
    if !(hyper.learning_rate.is_finite() && hyper.learning_rate > 0.0) {
        return Err(Error::Config("learning rate must be positive".into()));
    }
    if hyper.batch_size == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    let class_weights = match &hyper.class_weights {
        Some(cw) if cw.len() != task.classes() => {
            return Err(Error::Config(format!(
                "{} class weights given for {} classes",
                cw.len(),
                task.classes()
            )))
        }
        Some(cw) if cw.iter().any(|w| !(w.is_finite() && *w >= 0.0)) => {
            return Err(Error::Config("class weights must be finite and non-negative".into()))
        }
        cw => cw.as_deref(),
    };

    let mut params = LinearProbe::<S>::zeros(task, dim)?.params();
    let mut best = params.clone();
    let mut best_loss = f64::INFINITY;
    let mut log = TrainingLog::default();
    let mut since_best = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let all_train: Vec<usize> = (0..train.len()).collect();
    let all_valid: Vec<usize> = (0..valid.len()).collect();

    for epoch in 1..=hyper.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(hyper.batch_size) {
            let (_, gw, gb) = params.loss_grad(train, batch, class_weights, true);
            for (p, g) in params.w.iter_mut().zip(&gw).chain(params.b.iter_mut().zip(&gb)) {
                *p -= hyper.learning_rate * g;
            }
        }
        let (train_loss, ..) = params.loss_grad(train, &all_train, class_weights, false);
        let (valid_loss, ..) = params.loss_grad(valid, &all_valid, None, false);
        if !(train_loss.is_finite() && valid_loss.is_finite()) {
            return Err(Error::NonFinite("probe loss; lower the learning rate"));
        }
        let correct = (0..valid.len())
            .filter(|&i| predict_params(&params, valid.inputs.row(i)) == valid.labels[i])
            .count();
        log.epochs.push(EpochLog {
            epoch,
            train_loss,
            valid_loss,
            valid_accuracy: correct as f64 / valid.len() as f64,
        });
        if valid_loss < best_loss {
            best_loss = valid_loss;
            best = params.clone();
            log.best_epoch = Some(epoch);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= hyper.patience {
                log.stopped_early = epoch < hyper.epochs;
                break;
            }
        }
    }
    Ok((best.into_probe()?, log))
}

fn predict_params<S: Scalar>(p: &Params, x: &[S]) -> usize {
    let z = p.logits(x);
    match p.task {
        ProbeTask::Multiclass { .. } => argmax(&z),
        ProbeTask::Binary => usize::from(z[0] >= 0.0),
    }
}

/// Mean loss of `probe` over the whole dataset.
pub fn probe_loss<S: Scalar>(probe: &LinearProbe<S>, data: &ProbeDataset<S>) -> Result<f64> {
    data.check_for(probe.task, probe.dim(), "probe loss")?;
    let idx: Vec<usize> = (0..data.len()).collect();
    Ok(probe.params().loss_grad(data, &idx, None, false).0)
}

/// Analytic gradient of the mean loss as `(dW row-major, db)`.
pub fn probe_gradient<S: Scalar>(probe: &LinearProbe<S>, data: &ProbeDataset<S>) -> Result<(Vec<f64>, Vec<f64>)> {
    data.check_for(probe.task, probe.dim(), "probe gradient")?;
    let idx: Vec<usize> = (0..data.len()).collect();
    let (_, gw, gb) = probe.params().loss_grad(data, &idx, None, true);
    Ok((gw, gb))
}

/// Largest relative difference between the analytic gradient and central finite
/// differences with step `1e-5`. Denominators are floored at `1e-4` so that
/// parameters with a near-zero gradient are judged on absolute error.
pub fn gradient_check(probe: &LinearProbe<f64>, batch: &ProbeDataset<f64>) -> Result<f64> {
    const H: f64 = 1e-5;
    const FLOOR: f64 = 1e-4;
    batch.check_for(probe.task, probe.dim(), "gradient check")?;
    let base = probe.params();
    let idx: Vec<usize> = (0..batch.len()).collect();
    let (_, gw, gb) = base.loss_grad(batch, &idx, None, true);
    let analytic: Vec<f64> = gw.into_iter().chain(gb).collect();
    let n_w = base.w.len();
    let errors: Vec<f64> = (0..analytic.len())
        .into_par_iter()
        .map(|j| {
            let shifted = |delta: f64| {
                let mut p = base.clone();
                if j < n_w {
                    p.w[j] += delta;
                } else {
                    p.b[j - n_w] += delta;
                }
                p.loss_grad(batch, &idx, None, false).0
            };
            let numeric = (shifted(H) - shifted(-H)) / (2.0 * H);
            let a = analytic[j];
            (a - numeric).abs() / a.abs().max(numeric.abs()).max(FLOOR)
        })
        .collect();
    Ok(errors.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn separable_1d(n: usize) -> ProbeDataset<f64> {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..2 * n {
            let label = i % 2;
            x.push(if label == 1 { 1.0 } else { -1.0 });
            y.push(label);
        }
        ProbeDataset::new(Matrix::from_vec(2 * n, 1, x).unwrap(), y).unwrap()
    }

    fn blobs(n_per: usize, classes: usize, dim: usize, seed: u64) -> ProbeDataset<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.5).unwrap();
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n_per * classes {
            let c = i % classes;
            for d in 0..dim {
                let centre = if d == c { 3.0 } else { 0.0 };
                data.push(centre + noise.sample(&mut rng));
            }
            labels.push(c);
        }
        ProbeDataset::new(Matrix::from_vec(n_per * classes, dim, data).unwrap(), labels).unwrap()
    }

    #[test]
    fn probe_invariants() {
        assert!(LinearProbe::<f32>::zeros(ProbeTask::Multiclass { classes: 1 }, 3).is_err());
        assert!(LinearProbe::<f32>::new(ProbeTask::Binary, Matrix::zeros(2, 3), vec![0.0; 2]).is_err());
        assert!(LinearProbe::<f32>::new(ProbeTask::Binary, Matrix::zeros(1, 3), vec![f32::NAN]).is_err());
        assert!(LinearProbe::<f32>::zeros(ProbeTask::Binary, 3).is_ok());
    }

    #[test]
    fn separable_binary() {
        let d = separable_1d(100);
        let (probe, log) = train_probe(&d, &d, ProbeTask::Binary, &ProbeHyper::default()).unwrap();
        let m = evaluate(&probe, &d).unwrap();
        assert!(m.accuracy >= 0.99, "{m:?}");
        assert!(log.best_epoch.is_some());
        let losses: Vec<f64> = log.epochs.iter().map(|e| e.train_loss).collect();
        assert!(losses.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{losses:?}");
    }

    #[test]
    fn blobs_multiclass() {
        let train = blobs(50, 4, 8, 1);
        let valid = blobs(50, 4, 8, 2);
        let task = ProbeTask::Multiclass { classes: 4 };
        let (probe, _) = train_probe(&train, &valid, task, &ProbeHyper::default()).unwrap();
        assert!(evaluate(&probe, &valid).unwrap().accuracy >= 0.95);
    }

    #[test]
    fn zero_epochs_returns_init() {
        let d = separable_1d(5);
        let hyper = ProbeHyper {
            epochs: 0,
            ..ProbeHyper::default()
        };
        let (probe, log) = train_probe(&d, &d, ProbeTask::Binary, &hyper).unwrap();
        assert_eq!(probe, LinearProbe::zeros(ProbeTask::Binary, 1).unwrap());
        assert!(log.epochs.is_empty());
    }

    #[test]
    fn train_is_deterministic() {
        let train = blobs(30, 3, 4, 5);
        let task = ProbeTask::Multiclass { classes: 3 };
        let hyper = ProbeHyper {
            batch_size: 7,
            epochs: 5,
            ..ProbeHyper::default()
        };
        let a = train_probe(&train, &train, task, &hyper).unwrap();
        let b = train_probe(&train, &train, task, &hyper).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn label_and_dim_errors() {
        let d = separable_1d(3);
        let task = ProbeTask::Multiclass { classes: 2 };
        let bad = ProbeDataset::new(Matrix::from_vec(1, 1, vec![0.0]).unwrap(), vec![2]).unwrap();
        assert!(matches!(train_probe(&bad, &d, task, &ProbeHyper::default()), Err(Error::LabelOutOfRange { .. })));
        let wide = ProbeDataset::new(Matrix::from_vec(1, 2, vec![0.0, 0.0]).unwrap(), vec![0]).unwrap();
        assert!(matches!(train_probe(&d, &wide, task, &ProbeHyper::default()), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut rand_mat = |r, c| {
            Matrix::from_vec(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
        };
        let task = ProbeTask::Multiclass { classes: 3 };
        let probe = LinearProbe::new(task, rand_mat(3, 4), vec![0.1, -0.2, 0.3]).unwrap();
        let batch = ProbeDataset::new(rand_mat(4, 4), vec![0, 2, 1, 2]).unwrap();
        assert!(gradient_check(&probe, &batch).unwrap() < 1e-5);

        let probe = LinearProbe::new(ProbeTask::Binary, rand_mat(1, 5), vec![0.2]).unwrap();
        let batch = ProbeDataset::new(rand_mat(6, 5), vec![0, 1, 1, 0, 1, 0]).unwrap();
        assert!(gradient_check(&probe, &batch).unwrap() < 1e-5);
    }

    #[test]
    fn balanced_binary_bias_gradient_is_zero() {
        let probe = LinearProbe::<f64>::zeros(ProbeTask::Binary, 2).unwrap();
        let batch = ProbeDataset::new(Matrix::from_vec(4, 2, vec![1.0, 2.0, -1.0, 0.5, 3.0, 1.0, 0.0, -2.0]).unwrap(), vec![0, 1, 1, 0]).unwrap();
        let (_, gb) = probe_gradient(&probe, &batch).unwrap();
        assert_eq!(gb, vec![0.0]);
    }

    #[test]
    fn softmax_and_sigmoid_ranges() {
        let p = softmax(&[1000.0, -1000.0, 3.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        assert!((softplus(-800.0)).abs() < 1e-300 && (softplus(800.0) - 800.0).abs() < 1e-9);
    }
}
