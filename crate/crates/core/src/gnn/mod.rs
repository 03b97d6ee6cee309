//! Graph autoencoders (GAE and VGAE) with a dot-product decoder.
//!
//! Each layer computes `H' = ReLU(P · dropout(H) · W)`; the last layer is
//! linear, and for VGAE it is split into mean and log-variance heads. `P` is
//! the GCN propagation matrix of the training graph. Gradients are written
//! out by hand and checked against finite differences in the tests.

mod sparse;

use std::fs;
use std::path::Path;

use ndarray::{Array2, Zip};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::graph::{masked_adjacency, Dyad, EdgeSplit, Graph, Phase};
use crate::matrix_io::{read_matrix_csv, write_matrix_csv};
use crate::rng::{derive_seed, rng_from_seed, BenchRng};

pub use sparse::Csr;

const PROB_CLIP: f64 = 1e-7;

fn default_epochs() -> usize {
    200
}
fn default_patience() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnnConfig {
    pub learning_rate: f64,
    /// Coupled L2: `2·weight_decay·W` is added to every gradient.
    pub weight_decay: f64,
    pub dropout: f64,
    pub hidden_dim: usize,
    pub n_layers: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_patience")]
    pub patience: usize,
    pub variational: bool,
    #[serde(default)]
    pub seed: u64,
    /// Draw fresh training negatives every epoch instead of reusing `train_neg`.
    #[serde(default)]
    pub resample_negatives: bool,
}

impl GnnConfig {
    pub fn new(hidden_dim: usize, n_layers: usize, variational: bool, seed: u64) -> Self {
        Self {
            learning_rate: 0.01,
            weight_decay: 0.0,
            dropout: 0.0,
            hidden_dim,
            n_layers,
            epochs: default_epochs(),
            patience: default_patience(),
            variational,
            seed,
            resample_negatives: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!("dropout must lie in [0, 1), got {}", self.dropout)));
        }
        if !(1..=2).contains(&self.n_layers) {
            return Err(Error::InvalidArgument(format!("n_layers must be 1 or 2, got {}", self.n_layers)));
        }
        if self.hidden_dim == 0 {
            return Err(Error::InvalidArgument("hidden_dim must be positive".into()));
        }
        if !(self.learning_rate > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::InvalidArgument("learning_rate must be > 0 and weight_decay >= 0".into()));
        }
        Ok(())
    }
}

/// Bias-corrected Adam moments.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AdamState {
    pub m: Vec<Array2<f64>>,
    pub v: Vec<Array2<f64>>,
    pub t: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GnnModel {
    /// Hidden layers first, then the output head (GAE) or the mean and
    /// log-variance heads (VGAE).
    pub weights: Vec<Array2<f64>>,
    pub variational: bool,
    pub adam: AdamState,
}

impl GnnModel {
    /// Glorot-uniform initialization.
    pub fn init(n_features: usize, cfg: &GnnConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = rng_from_seed(derive_seed(cfg.seed, 0));
        let h = cfg.hidden_dim;
        let mut shapes = vec![(n_features, h)];
        shapes.extend((1..cfg.n_layers).map(|_| (h, h)));
        if cfg.variational {
            shapes.push(*shapes.last().unwrap());
        }
        let weights = shapes
            .into_iter()
            .map(|(r, c)| {
                let a = (6.0 / (r + c) as f64).sqrt();
                Array2::from_shape_fn((r, c), |_| rng.random_range(-a..=a))
            })
            .collect();
        Ok(Self::from_weights(weights, cfg.variational))
    }

    pub fn from_weights(weights: Vec<Array2<f64>>, variational: bool) -> Self {
        Self {
            adam: AdamState {
                m: weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
                v: weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
                t: 0,
            },
            weights,
            variational,
        }
    }

    fn n_hidden(&self) -> usize {
        self.weights.len() - if self.variational { 2 } else { 1 }
    }

    pub fn n_parameters(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().flat_map(|w| w.iter()).all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    pub z: Array2<f64>,
    pub mu: Option<Array2<f64>>,
    pub logvar: Option<Array2<f64>>,
}

/// Random draws of one training pass, kept explicit so gradients can be
/// checked against a fixed realisation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Noise {
    /// Inverted-dropout factors on the stored entries of the input features.
    pub input: Option<Vec<f64>>,
    /// Inverted-dropout factors on each hidden layer's input.
    pub hidden: Vec<Option<Array2<f64>>>,
    /// Standard normal draws of the VGAE reparameterization.
    pub xi: Option<Array2<f64>>,
}

impl Noise {
    pub fn sample(model: &GnnModel, x: &Csr, dropout: f64, rng: &mut BenchRng) -> Self {
        let keep = 1.0 - dropout;
        let factor = |rng: &mut BenchRng| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 };
        let input = (dropout > 0.0).then(|| (0..x.nnz()).map(|_| factor(rng)).collect());
        let n = x.n_rows();
        let hidden = (0..model.n_hidden() + 1)
            .skip(1)
            .map(|l| {
                (dropout > 0.0).then(|| Array2::from_shape_simple_fn((n, model.weights[l].nrows()), || factor(rng)))
            })
            .collect();
        let xi = model.variational.then(|| {
            let d = model.weights.last().unwrap().ncols();
            Array2::from_shape_simple_fn((n, d), || rng.sample(StandardNormal))
        });
        Self { input, hidden, xi }
    }
}

/// `D^{-1/2}(A + I)D^{-1/2}` over the symmetrized training edges.
pub fn normalize_adjacency(g: &Graph, split: &EdgeSplit) -> Csr {
    propagation_matrix(g.n_nodes(), split.train_pos.iter().copied())
}

/// Propagation matrix of an arbitrary dyad list (symmetrized, self-loops added).
pub fn propagation_matrix(n: usize, dyads: impl Iterator<Item = Dyad>) -> Csr {
    let mut pairs: Vec<Dyad> = dyads.flat_map(|(i, j)| [(i, j), (j, i)]).filter(|(i, j)| i != j).collect();
    pairs.sort_unstable();
    pairs.dedup();
    pairs.extend((0..n).map(|i| (i, i)));
    let mut degree = vec![0.0f64; n];
    for &(i, _) in &pairs {
        degree[i] += 1.0;
    }
    let triplets = pairs
        .into_iter()
        .map(|(i, j)| (i, j, 1.0 / (degree[i] * degree[j]).sqrt()))
        .collect();
    Csr::from_triplets(n, n, triplets)
}

/// Intermediate values of a forward pass, as needed by [`backward`].
struct Tape {
    /// Dropped-out input of each hidden layer after the first.
    hidden_inputs: Vec<Array2<f64>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Array2<f64>>,
    head_input: HeadInput,
    emb: Embeddings,
}

enum HeadInput {
    Sparse(Csr),
    Dense(Array2<f64>),
}

impl HeadInput {
    fn dot(&self, w: &Array2<f64>) -> Array2<f64> {
        match self {
            Self::Sparse(x) => x.dot(w),
            Self::Dense(h) => h.dot(w),
        }
    }

    fn t_dot(&self, d: &Array2<f64>) -> Array2<f64> {
        match self {
            Self::Sparse(x) => x.t_dot(d),
            Self::Dense(h) => h.t().dot(d),
        }
    }
}

fn apply_mask(h: Array2<f64>, mask: Option<&Array2<f64>>) -> Array2<f64> {
    match mask {
        Some(m) => h * m,
        None => h,
    }
}

fn forward_tape(model: &GnnModel, x: &Csr, p: &Csr, noise: &Noise) -> Tape {
    let mut input = HeadInput::Sparse(match &noise.input {
        Some(f) => x.scaled(f),
        None => x.clone(),
    });
    let mut pre = Vec::new();
    let mut hidden_inputs = Vec::new();
    for l in 0..model.n_hidden() {
        let s = p.dot(&input.dot(&model.weights[l]));
        let h = s.mapv(|v| v.max(0.0));
        pre.push(s);
        let dropped = apply_mask(h, noise.hidden.get(l).and_then(Option::as_ref));
        hidden_inputs.push(dropped.clone());
        input = HeadInput::Dense(dropped);
    }
    hidden_inputs.pop(); // the last one is the head input
    let head = model.n_hidden();
    let emb = if model.variational {
        let mu = p.dot(&input.dot(&model.weights[head]));
        let logvar = p.dot(&input.dot(&model.weights[head + 1]));
        let z = match &noise.xi {
            Some(xi) => &mu + &(logvar.mapv(|v| (0.5 * v).exp()) * xi),
            None => mu.clone(),
        };
        Embeddings { z, mu: Some(mu), logvar: Some(logvar) }
    } else {
        let z = p.dot(&input.dot(&model.weights[head]));
        Embeddings { z, mu: None, logvar: None }
    };
    Tape { hidden_inputs, pre, head_input: input, emb }
}

/// Forward pass. `noise = None` is evaluation mode: no dropout and `Z = mu`.
pub fn forward(model: &GnnModel, x: &Csr, p: &Csr, noise: Option<&Noise>) -> Embeddings {
    forward_tape(model, x, p, noise.unwrap_or(&Noise::default())).emb
}

fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// `σ(z_i · z_j)`.
pub fn gnn_score(emb: &Embeddings, i: usize, j: usize) -> f64 {
    sigmoid(emb.z.row(i).dot(&emb.z.row(j)))
}

pub fn score_dyads(emb: &Embeddings, dyads: &[Dyad]) -> Vec<f64> {
    dyads.iter().map(|&(i, j)| gnn_score(emb, i, j)).collect()
}

/// Mean BCE of the decoder over `pos ∪ neg`, plus `KL/N` for VGAE, with the
/// gradients with respect to `Z`, `mu` and `logvar` (the latter two only
/// through the KL term).
fn loss_and_grad(emb: &Embeddings, pos: &[Dyad], neg: &[Dyad]) -> (f64, Array2<f64>) {
    let z = &emb.z;
    let mut dz = Array2::zeros(z.raw_dim());
    let count = pos.len() + neg.len();
    let mut total = 0.0;
    if count > 0 {
        let scale = 1.0 / count as f64;
        for (dyads, y) in [(pos, 1.0), (neg, 0.0)] {
            for &(i, j) in dyads {
                let raw = sigmoid(z.row(i).dot(&z.row(j)));
                let prob = raw.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
                total -= y * prob.ln() + (1.0 - y) * (1.0 - prob).ln();
                if prob == raw {
                    let g = (raw - y) * scale;
                    let zj = z.row(j).to_owned();
                    let zi = z.row(i).to_owned();
                    dz.row_mut(i).scaled_add(g, &zj);
                    dz.row_mut(j).scaled_add(g, &zi);
                }
            }
        }
        total *= scale;
    }
    (total + kl_term(emb), dz)
}

fn kl_term(emb: &Embeddings) -> f64 {
    match (&emb.mu, &emb.logvar) {
        (Some(mu), Some(lv)) => {
            let n = mu.nrows().max(1) as f64;
            let kl: f64 = Zip::from(mu)
                .and(lv)
                .fold(0.0, |acc, &m, &l| acc - 0.5 * (1.0 + l - m * m - l.exp()));
            kl / n
        }
        _ => 0.0,
    }
}

/// Training objective without the weight-decay penalty.
pub fn loss(emb: &Embeddings, pos: &[Dyad], neg: &[Dyad]) -> f64 {
    loss_and_grad(emb, pos, neg).0
}

/// `weight_decay · Σ‖W‖²`, whose gradient is the decay term of [`backward`].
pub fn decay_penalty(model: &GnnModel, weight_decay: f64) -> f64 {
    weight_decay * model.weights.iter().flat_map(|w| w.iter()).map(|x| x * x).sum::<f64>()
}

/// Loss of one pass and the exact gradient of `loss + decay_penalty` with
/// respect to every weight matrix.
pub fn backward(
    model: &GnnModel,
    x: &Csr,
    p: &Csr,
    pos: &[Dyad],
    neg: &[Dyad],
    noise: &Noise,
    weight_decay: f64,
) -> (f64, Vec<Array2<f64>>) {
    let tape = forward_tape(model, x, p, noise);
    let (value, dz) = loss_and_grad(&tape.emb, pos, neg);
    let head = model.n_hidden();
    let mut grads: Vec<Array2<f64>> = model.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect();

    // d(loss)/d(input of the head)
    let mut d_input = if model.variational {
        let mu = tape.emb.mu.as_ref().unwrap();
        let lv = tape.emb.logvar.as_ref().unwrap();
        let n = mu.nrows().max(1) as f64;
        let d_mu = &dz + &(mu / n);
        let mut d_lv = lv.mapv(|l| 0.5 * (l.exp() - 1.0) / n);
        if let Some(xi) = &noise.xi {
            Zip::from(&mut d_lv)
                .and(&dz)
                .and(lv)
                .and(xi)
                .for_each(|d, &g, &l, &e| *d += g * 0.5 * (0.5 * l).exp() * e);
        }
        let t_mu = p.t_dot(&d_mu);
        let t_lv = p.t_dot(&d_lv);
        grads[head] = tape.head_input.t_dot(&t_mu);
        grads[head + 1] = tape.head_input.t_dot(&t_lv);
        t_mu.dot(&model.weights[head].t()) + t_lv.dot(&model.weights[head + 1].t())
    } else {
        let t = p.t_dot(&dz);
        grads[head] = tape.head_input.t_dot(&t);
        t.dot(&model.weights[head].t())
    };

    for l in (0..head).rev() {
        let d_h = apply_mask(d_input, noise.hidden.get(l).and_then(Option::as_ref));
        let mut d_s = d_h;
        Zip::from(&mut d_s).and(&tape.pre[l]).for_each(|d, &s| {
            if s <= 0.0 {
                *d = 0.0
            }
        });
        let t = p.t_dot(&d_s);
        grads[l] = if l == 0 {
            let x_in = match &noise.input {
                Some(f) => x.scaled(f),
                None => x.clone(),
            };
            x_in.t_dot(&t)
        } else {
            tape.hidden_inputs[l - 1].t().dot(&t)
        };
        d_input = t.dot(&model.weights[l].t());
    }

    if weight_decay > 0.0 {
        for (g, w) in grads.iter_mut().zip(&model.weights) {
            g.scaled_add(2.0 * weight_decay, w);
        }
    }
    (value, grads)
}

/// One bias-corrected Adam step applied in place.
pub fn adam_step(model: &mut GnnModel, grads: &[Array2<f64>], lr: f64, beta1: f64, beta2: f64, eps: f64) {
    let state = &mut model.adam;
    state.t += 1;
    let c1 = 1.0 - beta1.powi(state.t as i32);
    let c2 = 1.0 - beta2.powi(state.t as i32);
    for (((w, g), m), v) in model.weights.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        Zip::from(w).and(g).and(m).and(v).for_each(|w, &g, m, v| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *w -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        });
    }
}

/// Node features per phase. Structure features differ by phase (the
/// adjacency rows visible at that point); all other kinds are shared.
#[derive(Debug, Clone)]
pub struct PhaseFeatures {
    train: Csr,
    val: Option<Csr>,
    test: Option<Csr>,
}

impl PhaseFeatures {
    pub fn fixed(x: &FeatureMatrix) -> Self {
        Self {
            train: Csr::from_dense(x.values.view()),
            val: None,
            test: None,
        }
    }

    /// Masked adjacency rows of `split` for each phase.
    pub fn structure(g: &Graph, split: &EdgeSplit) -> Self {
        let phase = |ph| Csr::from_dense(masked_adjacency(g, split, ph).values.view());
        Self {
            train: phase(Phase::Train),
            val: Some(phase(Phase::Val)),
            test: Some(phase(Phase::Test)),
        }
    }

    /// One-hot node identities (featureless autoencoder).
    pub fn identity(n: usize) -> Self {
        Self {
            train: Csr::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)).collect()),
            val: None,
            test: None,
        }
    }

    pub fn get(&self, phase: Phase) -> &Csr {
        let specific = match phase {
            Phase::Train => None,
            Phase::Val => self.val.as_ref(),
            Phase::Test => self.test.as_ref(),
        };
        specific.unwrap_or(&self.train)
    }

    pub fn n_features(&self) -> usize {
        self.train.n_cols()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

fn sample_negatives(split: &EdgeSplit, n: usize, directed: bool, count: usize, rng: &mut BenchRng) -> Vec<Dyad> {
    use std::collections::HashSet;
    let canon = |(i, j): Dyad| if directed || i < j { (i, j) } else { (j, i) };
    let taken: HashSet<Dyad> = split.train_pos.iter().copied().chain(split.held_out()).map(canon).collect();
    let free = if directed { n * (n - 1) } else { n * (n - 1) / 2 } - taken.len().min(n * n);
    let count = count.min(free);
    let mut out = HashSet::with_capacity(count);
    while out.len() < count {
        let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
        if i != j && !taken.contains(&canon((i, j))) {
            out.insert(canon((i, j)));
        }
    }
    let mut out: Vec<Dyad> = out.into_iter().collect();
    out.sort_unstable();
    out.shuffle(rng);
    out
}

/// Trains with early stopping on the validation loss and returns the model
/// restored to its best epoch.
///
/// Validation loss is computed in evaluation mode on `val_pos`/`val_neg`
/// with the validation-phase features; a fold without validation dyads
/// falls back to the training dyads.
pub fn train(g: &Graph, split: &EdgeSplit, feats: &PhaseFeatures, cfg: &GnnConfig) -> Result<(GnnModel, TrainReport)> {
    cfg.validate()?;
    if feats.get(Phase::Train).n_rows() != g.n_nodes() {
        return Err(Error::DimensionMismatch(format!(
            "{} feature rows for {} nodes",
            feats.get(Phase::Train).n_rows(),
            g.n_nodes()
        )));
    }
    let p = normalize_adjacency(g, split);
    let mut model = GnnModel::init(feats.n_features(), cfg)?;
    let mut noise_rng = rng_from_seed(derive_seed(cfg.seed, 1));
    let mut neg_rng = rng_from_seed(derive_seed(cfg.seed, 2));
    let (val_pos, val_neg) = if split.val_pos.is_empty() && split.val_neg.is_empty() {
        (&split.train_pos, &split.train_neg)
    } else {
        (&split.val_pos, &split.val_neg)
    };
    let x_train = feats.get(Phase::Train);
    let x_val = feats.get(Phase::Val);

    let mut best = (f64::INFINITY, 0, model.weights.clone());
    let mut history = Vec::new();
    let mut stale = 0;
    for epoch in 1..=cfg.epochs {
        let resampled;
        let neg: &[Dyad] = if cfg.resample_negatives {
            resampled = sample_negatives(split, g.n_nodes(), g.is_directed(), split.train_neg.len(), &mut neg_rng);
            &resampled
        } else {
            &split.train_neg
        };
        let noise = Noise::sample(&model, x_train, cfg.dropout, &mut noise_rng);
        let (train_loss, grads) = backward(&model, x_train, &p, &split.train_pos, neg, &noise, cfg.weight_decay);
        adam_step(&mut model, &grads, cfg.learning_rate, 0.9, 0.999, 1e-8);
        if !model.is_finite() {
            log::warn!("GNN training diverged at epoch {epoch}");
            break;
        }
        let val_loss = loss(&forward(&model, x_val, &p, None), val_pos, val_neg);
        history.push(EpochRecord { epoch, train_loss, val_loss });
        if val_loss < best.0 {
            best = (val_loss, epoch, model.weights.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale > cfg.patience {
                break;
            }
        }
    }
    if history.is_empty() || best.1 == 0 {
        return Err(Error::Diverged { restarts: 1 });
    }
    model.weights = best.2;
    Ok((model, TrainReport { history, best_epoch: best.1, best_val_loss: best.0 }))
}

/// Evaluation-mode embeddings for scoring in `phase`.
pub fn embed(model: &GnnModel, g: &Graph, split: &EdgeSplit, feats: &PhaseFeatures, phase: Phase) -> Embeddings {
    forward(model, feats.get(phase), &normalize_adjacency(g, split), None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CheckpointMeta {
    config: GnnConfig,
    n_features: usize,
    n_matrices: usize,
    weight_decay_convention: String,
    best_epoch: Option<usize>,
}

/// Writes `W{l}.csv` per weight matrix, `model.json`, and `history.csv`.
pub fn write_checkpoint(dir: impl AsRef<Path>, model: &GnnModel, cfg: &GnnConfig, report: Option<&TrainReport>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (l, w) in model.weights.iter().enumerate() {
        write_matrix_csv(dir.join(format!("W{l}.csv")), w.view())?;
    }
    let meta = CheckpointMeta {
        config: cfg.clone(),
        n_features: model.weights[0].nrows(),
        n_matrices: model.weights.len(),
        weight_decay_convention: "coupled L2 (2*lambda*W added to gradient)".into(),
        best_epoch: report.map(|r| r.best_epoch),
    };
    let path = dir.join("model.json");
    fs::write(&path, serde_json::to_string_pretty(&meta)?).map_err(|e| Error::io(&path, e))?;
    if let Some(report) = report {
        write_history(dir.join("history.csv"), &report.history)?;
    }
    Ok(())
}

pub fn read_checkpoint(dir: impl AsRef<Path>) -> Result<(GnnModel, GnnConfig)> {
    let dir = dir.as_ref();
    let path = dir.join("model.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let meta: CheckpointMeta = serde_json::from_str(&text)?;
    let weights = (0..meta.n_matrices)
        .map(|l| read_matrix_csv(dir.join(format!("W{l}.csv"))))
        .collect::<Result<Vec<_>>>()?;
    Ok((GnnModel::from_weights(weights, meta.config.variational), meta.config))
}

pub fn write_history(path: impl AsRef<Path>, history: &[EpochRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    for rec in history {
        w.serialize(rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests;
