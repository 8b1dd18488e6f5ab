//! Training harness: splits, the training loop with early stopping, seeded
//! multi-run evaluation, and depth / train-size sweeps.
//!
//! Everything is deterministic given the configured seeds. Run `r` of a
//! multi-run uses seed `cfg.seed + r`; random splits, parameter
//! initialization, and per-epoch dropout all derive their streams from that
//! run seed through the shared seed mixer, so results are independent of
//! thread count and run order.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::DatasetBundle;
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::models::checkpoint::{load_checkpoint, save_checkpoint, ModelHyper};
use crate::models::{
    dagnn_backward, dagnn_forward, decoupled_backward, decoupled_forward, gcn_backward,
    gcn_forward, mlp_backward, mlp_forward, DagnnCache, DagnnParams, DecoupledCache, GcnCache,
    GcnParams, MlpCache, MlpParams,
};
use crate::nn::adam::{AdamConfig, AdamState};
use crate::nn::kernels::{accuracy, cross_entropy, cross_entropy_softmax_backward, softmax_rows};
use crate::nn::ParamTensors;
use crate::propagation::{normalize, OperatorKind, PropagationOperator};
use crate::seed;
use crate::smoothness::{graph_smoothness, SmoothnessMode, EXACT_NODE_CAP};

const SALT_INIT: u64 = 0x7061_7261_6d73;
const SALT_DROPOUT: u64 = 0x6472_0000_0000_0000;
const SALT_SPLIT: u64 = 0x7370_6c69_7400_0000;

/// Sampled-pair budget used for smoothness columns when a graph is too
/// large for the exact all-pairs computation.
const SWEEP_SMOOTHNESS_PAIRS: usize = 100_000;

/// Node index sets for training, model selection, and final evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Checks that all indices are in range, the three sets are disjoint,
    /// and none of them is empty.
    pub fn validate(&self, n: usize) -> Result<()> {
        let sets = [
            ("train", &self.train),
            ("val", &self.val),
            ("test", &self.test),
        ];
        let mut seen = vec![false; n];
        for (name, ids) in sets {
            if ids.is_empty() {
                return Err(Error::InvalidArgument(format!("{name} set is empty")));
            }
            for &i in ids {
                if i >= n {
                    return Err(Error::InvalidArgument(format!(
                        "{name} index {i} out of range for {n} nodes"
                    )));
                }
                if seen[i] {
                    return Err(Error::InvalidArgument(format!(
                        "node {i} appears in more than one split set"
                    )));
                }
                seen[i] = true;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitKind {
    /// Use the dataset's bundled split files.
    Fixed,
    /// Draw a fresh split from the given seed.
    Random { seed: u64 },
}

/// Recipe for building a [`Split`]: a per-class training quota, then a
/// validation pool, then either a fixed-size or take-the-rest test pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub kind: SplitKind,
    pub train_per_class: usize,
    pub val_count: usize,
    /// `None` assigns every remaining node to the test set.
    pub test_count: Option<usize>,
}

impl SplitSpec {
    pub fn standard(kind: SplitKind) -> Self {
        SplitSpec {
            kind,
            train_per_class: 20,
            val_count: 500,
            test_count: Some(1000),
        }
    }
}

/// Builds a split. `Fixed` returns a copy of `fixed`; `Random` shuffles the
/// nodes, fills the per-class training quota in shuffle order, then takes
/// validation and test nodes from the remaining pool.
pub fn make_split(
    labels: &[usize],
    class_count: usize,
    spec: &SplitSpec,
    fixed: Option<&Split>,
) -> Result<Split> {
    let n = labels.len();
    let rng_seed = match spec.kind {
        SplitKind::Fixed => {
            let split = fixed.ok_or_else(|| {
                Error::InvalidArgument("fixed split requested but the dataset has none".into())
            })?;
            split.validate(n)?;
            return Ok(split.clone());
        }
        SplitKind::Random { seed } => seed,
    };
    if spec.train_per_class == 0 || spec.val_count == 0 {
        return Err(Error::InvalidArgument(
            "train_per_class and val_count must be positive".into(),
        ));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    order.shuffle(&mut rng);

    let mut counts = vec![0usize; class_count];
    let mut train = Vec::with_capacity(spec.train_per_class * class_count);
    let mut pool = Vec::new();
    for &i in &order {
        let cls = labels[i];
        if counts[cls] < spec.train_per_class {
            counts[cls] += 1;
            train.push(i);
        } else {
            pool.push(i);
        }
    }
    for (class, &available) in counts.iter().enumerate() {
        if available < spec.train_per_class {
            return Err(Error::ClassTooSmall {
                class,
                available,
                needed: spec.train_per_class,
            });
        }
    }

    let test_count = spec
        .test_count
        .unwrap_or_else(|| pool.len().saturating_sub(spec.val_count));
    if pool.len() < spec.val_count + test_count || test_count == 0 {
        return Err(Error::InvalidArgument(format!(
            "{} nodes remain after training quota; need {} for val and {} for test",
            pool.len(),
            spec.val_count,
            test_count.max(1)
        )));
    }
    let mut val: Vec<usize> = pool[..spec.val_count].to_vec();
    let mut test: Vec<usize> = pool[spec.val_count..spec.val_count + test_count].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, val, test })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Mlp,
    Gcn,
    Decoupled,
    Dagnn,
}

impl ModelKind {
    pub fn parse(text: &str) -> Result<Self> {
        match text.to_ascii_lowercase().as_str() {
            "mlp" => Ok(ModelKind::Mlp),
            "gcn" => Ok(ModelKind::Gcn),
            "decoupled" => Ok(ModelKind::Decoupled),
            "dagnn" => Ok(ModelKind::Dagnn),
            other => Err(Error::InvalidArgument(format!(
                "unknown model '{other}' (expected mlp, gcn, decoupled, or dagnn)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Mlp => "mlp",
            ModelKind::Gcn => "gcn",
            ModelKind::Decoupled => "decoupled",
            ModelKind::Dagnn => "dagnn",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ModelKind::parse(s)
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelKind,
    /// Layer count for the entangled stack; ignored by the other models.
    pub depth: usize,
    /// Propagation steps for the decoupled and adaptive models.
    pub k: usize,
    pub hidden: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl TrainConfig {
    /// Defaults per model family. The deeper-propagating models train with
    /// heavier dropout and weight decay than the two-layer baselines.
    pub fn for_model(model: ModelKind) -> Self {
        let (dropout, weight_decay) = match model {
            ModelKind::Mlp | ModelKind::Gcn => (0.5, 5e-4),
            ModelKind::Decoupled | ModelKind::Dagnn => (0.8, 5e-3),
        };
        TrainConfig {
            model,
            depth: 2,
            k: 10,
            hidden: 64,
            lr: 0.01,
            weight_decay,
            dropout,
            max_epochs: 1500,
            patience: 100,
            seed: 0,
        }
    }

    pub fn hyper(&self) -> ModelHyper {
        ModelHyper {
            hidden: self.hidden,
            depth: self.depth,
            k: self.k,
            dropout: self.dropout,
            lr: self.lr,
            weight_decay: self.weight_decay,
        }
    }

    fn validate(&self) -> Result<()> {
        if !self.lr.is_finite() || self.lr <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        if !self.weight_decay.is_finite() || self.weight_decay < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "weight decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidArgument("max_epochs must be positive".into()));
        }
        if self.patience == 0 {
            return Err(Error::InvalidArgument("patience must be positive".into()));
        }
        Ok(())
    }
}

/// A dataset prepared for training: symmetric propagation operator,
/// features, labels, and the bundled split if the dataset ships one.
#[derive(Debug, Clone)]
pub struct TaskData {
    pub name: String,
    pub op: PropagationOperator,
    pub features: DenseMatrix,
    pub labels: Vec<usize>,
    pub class_count: usize,
    pub fixed_split: Option<Split>,
}

impl TaskData {
    pub fn from_bundle(bundle: &DatasetBundle) -> TaskData {
        TaskData {
            name: bundle.name.clone(),
            op: normalize(&bundle.graph, OperatorKind::Symmetric),
            features: bundle.features.clone(),
            labels: bundle.labels.clone(),
            class_count: bundle.class_count,
            fixed_split: bundle.fixed_split.clone(),
        }
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }
}

/// Typed parameter storage for a trained model. The decoupled model shares
/// the MLP's parameters; only the forward pass differs.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams {
    Mlp(MlpParams),
    Gcn(GcnParams),
    Dagnn(DagnnParams),
}

impl ParamTensors for ModelParams {
    fn tensor_names(&self) -> Vec<String> {
        match self {
            ModelParams::Mlp(p) => p.tensor_names(),
            ModelParams::Gcn(p) => p.tensor_names(),
            ModelParams::Dagnn(p) => p.tensor_names(),
        }
    }
    fn tensors(&self) -> Vec<&DenseMatrix> {
        match self {
            ModelParams::Mlp(p) => p.tensors(),
            ModelParams::Gcn(p) => p.tensors(),
            ModelParams::Dagnn(p) => p.tensors(),
        }
    }
    fn tensors_mut(&mut self) -> Vec<&mut DenseMatrix> {
        match self {
            ModelParams::Mlp(p) => p.tensors_mut(),
            ModelParams::Gcn(p) => p.tensors_mut(),
            ModelParams::Dagnn(p) => p.tensors_mut(),
        }
    }
}

enum Cache {
    Mlp(MlpCache),
    Gcn(GcnCache),
    Decoupled(DecoupledCache),
    Dagnn(DagnnCache),
}

fn init_params(cfg: &TrainConfig, input_dim: usize, classes: usize) -> Result<ModelParams> {
    let init_seed = seed::mix(cfg.seed, SALT_INIT);
    Ok(match cfg.model {
        ModelKind::Mlp | ModelKind::Decoupled => {
            ModelParams::Mlp(MlpParams::new(input_dim, cfg.hidden, classes, init_seed)?)
        }
        ModelKind::Gcn => ModelParams::Gcn(GcnParams::new(
            input_dim, cfg.hidden, classes, cfg.depth, init_seed,
        )?),
        ModelKind::Dagnn => {
            ModelParams::Dagnn(DagnnParams::new(input_dim, cfg.hidden, classes, init_seed)?)
        }
    })
}

fn forward(
    kind: ModelKind,
    params: &ModelParams,
    op: &PropagationOperator,
    x: &DenseMatrix,
    k: usize,
    dropout: f64,
    training: bool,
    dropout_seed: u64,
) -> Result<(DenseMatrix, Cache)> {
    match (kind, params) {
        (ModelKind::Mlp, ModelParams::Mlp(p)) => {
            let (logits, cache) = mlp_forward(p, x, dropout, training, dropout_seed)?;
            Ok((logits, Cache::Mlp(cache)))
        }
        (ModelKind::Decoupled, ModelParams::Mlp(p)) => {
            let (logits, cache) = decoupled_forward(p, op, x, k, dropout, training, dropout_seed)?;
            Ok((logits, Cache::Decoupled(cache)))
        }
        (ModelKind::Gcn, ModelParams::Gcn(p)) => {
            let (logits, cache) = gcn_forward(p, op, x, dropout, training, dropout_seed)?;
            Ok((logits, Cache::Gcn(cache)))
        }
        (ModelKind::Dagnn, ModelParams::Dagnn(p)) => {
            let (logits, cache) = dagnn_forward(p, op, x, k, dropout, training, dropout_seed)?;
            Ok((logits, Cache::Dagnn(cache)))
        }
        _ => Err(Error::InvalidArgument(
            "model kind does not match stored parameters".into(),
        )),
    }
}

fn backward(
    params: &ModelParams,
    op: &PropagationOperator,
    cache: &Cache,
    d_logits: &DenseMatrix,
) -> Result<Vec<DenseMatrix>> {
    match (params, cache) {
        (ModelParams::Mlp(p), Cache::Mlp(c)) => mlp_backward(p, c, d_logits),
        (ModelParams::Mlp(p), Cache::Decoupled(c)) => decoupled_backward(p, op, c, d_logits),
        (ModelParams::Gcn(p), Cache::Gcn(c)) => gcn_backward(p, op, c, d_logits),
        (ModelParams::Dagnn(p), Cache::Dagnn(c)) => dagnn_backward(p, op, c, d_logits),
        _ => Err(Error::InvalidArgument(
            "cache does not match stored parameters".into(),
        )),
    }
}

/// A trained model with everything needed to rebuild and rerun it.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub kind: ModelKind,
    pub params: ModelParams,
    pub hyper: ModelHyper,
    pub seed: u64,
}

impl TrainedModel {
    /// Evaluation-mode logits on the full node set.
    pub fn logits(&self, data: &TaskData) -> Result<DenseMatrix> {
        let (logits, _) = forward(
            self.kind,
            &self.params,
            &data.op,
            &data.features,
            self.hyper.k,
            0.0,
            false,
            0,
        )?;
        Ok(logits)
    }

    pub fn parameter_count(&self) -> usize {
        crate::models::count_parameters(&self.params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_checkpoint(path, self.kind.name(), &self.hyper, self.seed, &self.params)
    }

    pub fn load(path: &Path) -> Result<TrainedModel> {
        let (header, tensors) = load_checkpoint(path)?;
        let kind = ModelKind::parse(&header.model)?;
        let shape_of = |idx: usize| -> Result<(usize, usize)> {
            header
                .tensors
                .get(idx)
                .map(|t| (t.rows, t.cols))
                .ok_or_else(|| {
                    Error::Checkpoint(format!("checkpoint lists only {} tensors", tensors.len()))
                })
        };
        let mut params = match kind {
            ModelKind::Mlp | ModelKind::Decoupled | ModelKind::Dagnn => {
                let (input_dim, hidden) = shape_of(0)?;
                let (_, classes) = shape_of(2)?;
                if kind == ModelKind::Dagnn {
                    ModelParams::Dagnn(DagnnParams::new(input_dim, hidden, classes, 0)?)
                } else {
                    ModelParams::Mlp(MlpParams::new(input_dim, hidden, classes, 0)?)
                }
            }
            ModelKind::Gcn => {
                let (input_dim, first_cols) = shape_of(0)?;
                let depth = header.tensors.len();
                let (_, classes) = shape_of(depth - 1)?;
                let hidden = if depth > 1 { first_cols } else { header.hyper.hidden };
                ModelParams::Gcn(GcnParams::new(input_dim, hidden, classes, depth, 0)?)
            }
        };
        let expected_names = params.tensor_names();
        let stored_names: Vec<&str> = header.tensors.iter().map(|t| t.name.as_str()).collect();
        if expected_names != stored_names {
            return Err(Error::Checkpoint(format!(
                "tensor names {stored_names:?} do not match a {kind} model"
            )));
        }
        let mut slots = params.tensors_mut();
        if slots.len() != tensors.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, checkpoint has {}",
                slots.len(),
                tensors.len()
            )));
        }
        for ((slot, tensor), meta) in slots.iter_mut().zip(tensors).zip(&header.tensors) {
            if slot.shape() != tensor.shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor {} has shape {:?}, expected {:?}",
                    meta.name,
                    tensor.shape(),
                    slot.shape()
                )));
            }
            **slot = tensor;
        }
        Ok(TrainedModel {
            kind,
            params,
            hyper: header.hyper,
            seed: header.seed,
        })
    }
}

/// Outcome of a single training run. Accuracies are fractions in `[0, 1]`;
/// the loss curves hold one entry per epoch actually run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub seed: u64,
    pub test_accuracy: f64,
    pub val_accuracy: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
}

fn snapshot(params: &ModelParams) -> Vec<DenseMatrix> {
    params.tensors().into_iter().cloned().collect()
}

fn restore(params: &mut ModelParams, snap: &[DenseMatrix]) {
    for (slot, saved) in params.tensors_mut().into_iter().zip(snap) {
        *slot = saved.clone();
    }
}

/// Trains one model. Training loss is the summed cross entropy over the
/// training nodes before each optimizer step. The kept parameters are the
/// ones with the best validation accuracy (ties broken by lower validation
/// loss, then by earlier epoch); training stops once `patience` epochs pass
/// without improvement. Test accuracy is measured once, at the kept
/// parameters.
pub fn train(cfg: &TrainConfig, data: &TaskData, split: &Split) -> Result<(RunEntry, TrainedModel)> {
    cfg.validate()?;
    split.validate(data.n())?;
    let mut params = init_params(cfg, data.features.cols(), data.class_count)?;
    let mut opt = AdamState::new(
        AdamConfig {
            lr: cfg.lr,
            weight_decay: cfg.weight_decay,
            ..AdamConfig::default()
        },
        &params,
    );

    let mut best_val_acc = f64::NEG_INFINITY;
    let mut best_val_loss = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut best_snap = snapshot(&params);
    let mut train_curve = Vec::new();
    let mut val_curve = Vec::new();
    let mut epochs_run = 0usize;

    for epoch in 0..cfg.max_epochs {
        let dropout_seed = seed::mix(cfg.seed, SALT_DROPOUT | epoch as u64);
        let (logits, cache) = forward(
            cfg.model,
            &params,
            &data.op,
            &data.features,
            cfg.k,
            cfg.dropout,
            true,
            dropout_seed,
        )?;
        let probs = softmax_rows(&logits);
        let (train_loss, _) = cross_entropy(&probs, &data.labels, &split.train)?;
        if !train_loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        let d_logits = cross_entropy_softmax_backward(&probs, &data.labels, &split.train)?;
        let grads = backward(&params, &data.op, &cache, &d_logits)?;
        opt.step(&mut params, &grads)?;

        let (eval_logits, _) = forward(
            cfg.model,
            &params,
            &data.op,
            &data.features,
            cfg.k,
            0.0,
            false,
            0,
        )?;
        let eval_probs = softmax_rows(&eval_logits);
        let val_acc = accuracy(&eval_probs, &data.labels, &split.val)?;
        let (val_loss, _) = cross_entropy(&eval_probs, &data.labels, &split.val)?;
        if !val_loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        train_curve.push(train_loss);
        val_curve.push(val_loss);
        epochs_run = epoch + 1;

        if val_acc > best_val_acc || (val_acc == best_val_acc && val_loss < best_val_loss) {
            best_val_acc = val_acc;
            best_val_loss = val_loss;
            best_epoch = epoch;
            best_snap = snapshot(&params);
        }
        if epoch - best_epoch >= cfg.patience {
            break;
        }
    }

    restore(&mut params, &best_snap);
    let model = TrainedModel {
        kind: cfg.model,
        params,
        hyper: cfg.hyper(),
        seed: cfg.seed,
    };
    let probs = softmax_rows(&model.logits(data)?);
    let test_accuracy = accuracy(&probs, &data.labels, &split.test)?;
    Ok((
        RunEntry {
            seed: cfg.seed,
            test_accuracy,
            val_accuracy: best_val_acc,
            best_epoch,
            epochs_run,
            train_loss: train_curve,
            val_loss: val_curve,
        },
        model,
    ))
}

/// Aggregate of repeated runs; accuracy statistics are over test accuracy,
/// with the sample standard deviation (zero for a single run).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub model: ModelKind,
    pub dataset: String,
    pub n_runs: usize,
    pub runs: Vec<RunEntry>,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
}

/// The split used by run `run_index` of a multi-run: the fixed split when
/// `split_spec` asks for it, otherwise a fresh random split derived from
/// the split seed and the run index.
pub fn run_split(data: &TaskData, split_spec: &SplitSpec, run_index: usize) -> Result<Split> {
    let spec = match split_spec.kind {
        SplitKind::Fixed => split_spec.clone(),
        SplitKind::Random { seed } => SplitSpec {
            kind: SplitKind::Random {
                seed: seed::mix(seed, SALT_SPLIT.wrapping_add(run_index as u64)),
            },
            ..split_spec.clone()
        },
    };
    make_split(
        &data.labels,
        data.class_count,
        &spec,
        data.fixed_split.as_ref(),
    )
}

fn run_indexed(
    cfg: &TrainConfig,
    data: &TaskData,
    split_spec: &SplitSpec,
    run_index: usize,
) -> Result<RunEntry> {
    let split = run_split(data, split_spec, run_index)?;
    let run_cfg = TrainConfig {
        seed: cfg.seed + run_index as u64,
        ..cfg.clone()
    };
    train(&run_cfg, data, &split).map(|(entry, _)| entry)
}

/// Runs `n_runs` independent trainings and aggregates test accuracy.
/// `threads <= 1` runs serially; more threads spread the runs over a local
/// pool. Results are identical either way.
pub fn multi_run(
    cfg: &TrainConfig,
    data: &TaskData,
    split_spec: &SplitSpec,
    n_runs: usize,
    threads: usize,
) -> Result<RunReport> {
    if n_runs == 0 {
        return Err(Error::InvalidArgument("n_runs must be positive".into()));
    }
    let results: Vec<Result<RunEntry>> = if threads <= 1 {
        (0..n_runs)
            .map(|r| run_indexed(cfg, data, split_spec, r))
            .collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        pool.install(|| {
            (0..n_runs)
                .into_par_iter()
                .map(|r| run_indexed(cfg, data, split_spec, r))
                .collect()
        })
    };
    let mut runs = Vec::with_capacity(n_runs);
    for result in results {
        runs.push(result?);
    }
    let accs: Vec<f64> = runs.iter().map(|r| r.test_accuracy).collect();
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    let std = if accs.len() < 2 {
        0.0
    } else {
        let var = accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (accs.len() - 1) as f64;
        var.sqrt()
    };
    Ok(RunReport {
        model: cfg.model,
        dataset: data.name.clone(),
        n_runs,
        runs,
        accuracy_mean: mean,
        accuracy_std: std,
    })
}

/// One sweep point: the swept value, accuracy statistics over the repeated
/// runs, and the smoothness of the run-0 model's output representations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub key: usize,
    pub acc_mean: f64,
    pub acc_std: f64,
    pub smv_g: f64,
}

fn smoothness_of_run_zero(
    cfg: &TrainConfig,
    data: &TaskData,
    split_spec: &SplitSpec,
) -> Result<f64> {
    let split = run_split(data, split_spec, 0)?;
    let (_, model) = train(cfg, data, &split)?;
    let logits = model.logits(data)?;
    let mode = if data.n() <= EXACT_NODE_CAP {
        SmoothnessMode::Exact
    } else {
        SmoothnessMode::Sampled {
            pairs: SWEEP_SMOOTHNESS_PAIRS,
            seed: 0,
        }
    };
    Ok(graph_smoothness(&logits, mode)?.graph_value)
}

/// Sweeps model depth. For the entangled stack the key is the layer count;
/// for the decoupled and adaptive models it is the propagation depth `k`.
/// A key of `0` trains the plain MLP as the no-propagation baseline.
pub fn depth_sweep(
    depths: &[usize],
    base_cfg: &TrainConfig,
    data: &TaskData,
    split_spec: &SplitSpec,
    n_runs: usize,
    threads: usize,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(depths.len());
    for &depth in depths {
        let mut cfg = base_cfg.clone();
        if depth == 0 {
            cfg.model = ModelKind::Mlp;
        } else {
            match base_cfg.model {
                ModelKind::Gcn => cfg.depth = depth,
                ModelKind::Decoupled | ModelKind::Dagnn => cfg.k = depth,
                ModelKind::Mlp => {
                    return Err(Error::InvalidArgument(
                        "the mlp has no propagation depth to sweep".into(),
                    ))
                }
            }
        }
        let report = multi_run(&cfg, data, split_spec, n_runs, threads)?;
        let smv_g = smoothness_of_run_zero(&cfg, data, split_spec)?;
        rows.push(SweepRow {
            key: depth,
            acc_mean: report.accuracy_mean,
            acc_std: report.accuracy_std,
            smv_g,
        });
    }
    Ok(rows)
}

/// Sweeps the number of training nodes per class over random splits.
pub fn train_size_sweep(
    sizes: &[usize],
    base_cfg: &TrainConfig,
    data: &TaskData,
    split_spec: &SplitSpec,
    n_runs: usize,
    threads: usize,
) -> Result<Vec<SweepRow>> {
    if matches!(split_spec.kind, SplitKind::Fixed) {
        return Err(Error::InvalidArgument(
            "a train-size sweep needs random splits".into(),
        ));
    }
    let mut rows = Vec::with_capacity(sizes.len());
    for &size in sizes {
        if size == 0 {
            return Err(Error::InvalidArgument(
                "train size per class must be positive".into(),
            ));
        }
        let spec = SplitSpec {
            train_per_class: size,
            ..split_spec.clone()
        };
        let report = multi_run(base_cfg, data, &spec, n_runs, threads)?;
        let smv_g = smoothness_of_run_zero(base_cfg, data, &spec)?;
        rows.push(SweepRow {
            key: size,
            acc_mean: report.accuracy_mean,
            acc_std: report.accuracy_std,
            smv_g,
        });
    }
    Ok(rows)
}

/// The canonical hyperparameter grid for model selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperGrid {
    pub ks: Vec<usize>,
    pub weight_decays: Vec<f64>,
    pub dropouts: Vec<f64>,
}

pub fn hyper_grid(model: ModelKind) -> HyperGrid {
    let ks = match model {
        ModelKind::Mlp => vec![],
        ModelKind::Gcn => vec![1, 2, 3, 4],
        ModelKind::Decoupled | ModelKind::Dagnn => vec![5, 10, 20],
    };
    HyperGrid {
        ks,
        weight_decays: vec![0.0, 2e-2, 5e-3, 5e-4, 5e-5],
        dropouts: vec![0.5, 0.8],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synth_task, SbmSpec};

    fn toy_task() -> TaskData {
        let bundle = synth_task(
            &SbmSpec {
                sizes: vec![20, 20],
                p_in: 0.5,
                p_out: 0.05,
                seed: 7,
            },
            8,
            0.4,
            7,
        )
        .unwrap();
        TaskData::from_bundle(&bundle)
    }

    fn toy_spec(seed: u64) -> SplitSpec {
        SplitSpec {
            kind: SplitKind::Random { seed },
            train_per_class: 5,
            val_count: 10,
            test_count: Some(10),
        }
    }

    fn quick_cfg(model: ModelKind) -> TrainConfig {
        TrainConfig {
            hidden: 16,
            max_epochs: 60,
            patience: 60,
            seed: 3,
            k: 4,
            ..TrainConfig::for_model(model)
        }
    }

    #[test]
    fn random_split_fills_quotas_and_is_disjoint() {
        let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let spec = SplitSpec {
            kind: SplitKind::Random { seed: 11 },
            train_per_class: 4,
            val_count: 9,
            test_count: Some(6),
        };
        let split = make_split(&labels, 3, &spec, None).unwrap();
        assert_eq!(split.train.len(), 12);
        assert_eq!(split.val.len(), 9);
        assert_eq!(split.test.len(), 6);
        split.validate(30).unwrap();
        for class in 0..3 {
            let count = split.train.iter().filter(|&&i| labels[i] == class).count();
            assert_eq!(count, 4);
        }
        let again = make_split(&labels, 3, &spec, None).unwrap();
        assert_eq!(split, again);
        let other = make_split(
            &labels,
            3,
            &SplitSpec {
                kind: SplitKind::Random { seed: 12 },
                ..spec
            },
            None,
        )
        .unwrap();
        assert_ne!(split, other);
    }

    #[test]
    fn take_the_rest_test_pool() {
        let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let spec = SplitSpec {
            kind: SplitKind::Random { seed: 11 },
            train_per_class: 4,
            val_count: 9,
            test_count: None,
        };
        let split = make_split(&labels, 3, &spec, None).unwrap();
        assert_eq!(split.test.len(), 30 - 12 - 9);
    }

    #[test]
    fn small_class_is_reported() {
        let labels = vec![0, 0, 0, 1, 1, 1, 2];
        let spec = SplitSpec {
            kind: SplitKind::Random { seed: 1 },
            train_per_class: 2,
            val_count: 1,
            test_count: Some(1),
        };
        match make_split(&labels, 3, &spec, None) {
            Err(Error::ClassTooSmall {
                class,
                available,
                needed,
            }) => {
                assert_eq!((class, available, needed), (2, 1, 2));
            }
            other => panic!("expected ClassTooSmall, got {other:?}"),
        }
    }

    #[test]
    fn exhausted_pool_is_reported() {
        let labels: Vec<usize> = (0..12).map(|i| i % 3).collect();
        let spec = SplitSpec {
            kind: SplitKind::Random { seed: 1 },
            train_per_class: 3,
            val_count: 2,
            test_count: Some(5),
        };
        assert!(matches!(
            make_split(&labels, 3, &spec, None),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn fixed_split_is_returned_verbatim() {
        let labels = vec![0, 1, 0, 1, 0, 1];
        let fixed = Split {
            train: vec![0, 1],
            val: vec![2, 3],
            test: vec![4, 5],
        };
        let spec = SplitSpec::standard(SplitKind::Fixed);
        let split = make_split(&labels, 2, &spec, Some(&fixed)).unwrap();
        assert_eq!(split, fixed);
        assert!(matches!(
            make_split(&labels, 2, &spec, None),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn split_validation_rejects_overlap_and_range() {
        let overlapping = Split {
            train: vec![0, 1],
            val: vec![1],
            test: vec![2],
        };
        assert!(overlapping.validate(3).is_err());
        let out_of_range = Split {
            train: vec![0],
            val: vec![1],
            test: vec![5],
        };
        assert!(out_of_range.validate(3).is_err());
        let empty = Split {
            train: vec![],
            val: vec![1],
            test: vec![2],
        };
        assert!(empty.validate(3).is_err());
    }

    #[test]
    fn training_learns_the_separable_task() {
        let data = toy_task();
        let split = run_split(&data, &toy_spec(5), 0).unwrap();
        let cfg = quick_cfg(ModelKind::Gcn);
        let (entry, _) = train(&cfg, &data, &split).unwrap();
        assert!(entry.train_loss.first().unwrap() > entry.train_loss.last().unwrap());
        assert!(
            entry.test_accuracy > 0.6,
            "test accuracy {}",
            entry.test_accuracy
        );
        assert_eq!(entry.train_loss.len(), entry.epochs_run);
        assert!(entry.best_epoch < entry.epochs_run);
    }

    #[test]
    fn training_is_deterministic() {
        let data = toy_task();
        let split = run_split(&data, &toy_spec(5), 0).unwrap();
        let cfg = quick_cfg(ModelKind::Dagnn);
        let (a, model_a) = train(&cfg, &data, &split).unwrap();
        let (b, model_b) = train(&cfg, &data, &split).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            model_a.logits(&data).unwrap(),
            model_b.logits(&data).unwrap()
        );
    }

    #[test]
    fn patience_stops_early() {
        let data = toy_task();
        let split = run_split(&data, &toy_spec(5), 0).unwrap();
        let cfg = TrainConfig {
            max_epochs: 400,
            patience: 10,
            ..quick_cfg(ModelKind::Mlp)
        };
        let (entry, _) = train(&cfg, &data, &split).unwrap();
        assert!(entry.epochs_run < 400, "ran {} epochs", entry.epochs_run);
        assert!(entry.epochs_run >= entry.best_epoch + 10);
    }

    #[test]
    fn multi_run_aggregates_and_parallel_matches_serial() {
        let data = toy_task();
        let cfg = TrainConfig {
            max_epochs: 30,
            ..quick_cfg(ModelKind::Decoupled)
        };
        let serial = multi_run(&cfg, &data, &toy_spec(5), 3, 1).unwrap();
        let parallel = multi_run(&cfg, &data, &toy_spec(5), 3, 3).unwrap();
        assert_eq!(serial, parallel);
        assert_eq!(serial.runs.len(), 3);
        let mean = serial.runs.iter().map(|r| r.test_accuracy).sum::<f64>() / 3.0;
        assert!((serial.accuracy_mean - mean).abs() < 1e-15);
        assert_eq!(serial.runs[0].seed, cfg.seed);
        assert_eq!(serial.runs[2].seed, cfg.seed + 2);
        // Distinct run seeds must give distinct splits under the random kind.
        let s0 = run_split(&data, &toy_spec(5), 0).unwrap();
        let s1 = run_split(&data, &toy_spec(5), 1).unwrap();
        assert_ne!(s0, s1);
    }

    #[test]
    fn single_run_has_zero_std() {
        let data = toy_task();
        let cfg = TrainConfig {
            max_epochs: 10,
            ..quick_cfg(ModelKind::Mlp)
        };
        let report = multi_run(&cfg, &data, &toy_spec(5), 1, 1).unwrap();
        assert_eq!(report.accuracy_std, 0.0);
    }

    #[test]
    fn trained_model_round_trips_through_checkpoint() {
        let data = toy_task();
        let split = run_split(&data, &toy_spec(5), 0).unwrap();
        let cfg = TrainConfig {
            max_epochs: 15,
            ..quick_cfg(ModelKind::Dagnn)
        };
        let (_, model) = train(&cfg, &data, &split).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        model.save(&path).unwrap();
        let loaded = TrainedModel::load(&path).unwrap();
        assert_eq!(loaded.kind, ModelKind::Dagnn);
        assert_eq!(loaded.hyper, model.hyper);
        assert_eq!(loaded.logits(&data).unwrap(), model.logits(&data).unwrap());
    }

    #[test]
    fn checkpoint_round_trips_every_kind() {
        let data = toy_task();
        let split = run_split(&data, &toy_spec(5), 0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        for kind in [ModelKind::Mlp, ModelKind::Gcn, ModelKind::Decoupled] {
            let cfg = TrainConfig {
                max_epochs: 5,
                ..quick_cfg(kind)
            };
            let (_, model) = train(&cfg, &data, &split).unwrap();
            let path = dir.path().join(format!("{kind}.ckpt"));
            model.save(&path).unwrap();
            let loaded = TrainedModel::load(&path).unwrap();
            assert_eq!(loaded.kind, kind);
            assert_eq!(loaded.logits(&data).unwrap(), model.logits(&data).unwrap());
        }
    }

    #[test]
    fn depth_sweep_produces_a_row_per_depth() {
        let data = toy_task();
        let cfg = TrainConfig {
            max_epochs: 15,
            ..quick_cfg(ModelKind::Decoupled)
        };
        let rows = depth_sweep(&[0, 2], &cfg, &data, &toy_spec(5), 2, 1).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].key, 0);
        assert_eq!(rows[1].key, 2);
        for row in &rows {
            assert!(row.smv_g >= 0.0 && row.smv_g <= 1.0, "smv {}", row.smv_g);
            assert!(row.acc_mean >= 0.0 && row.acc_mean <= 1.0);
        }
    }

    #[test]
    fn train_size_sweep_needs_random_splits() {
        let data = toy_task();
        let cfg = TrainConfig {
            max_epochs: 5,
            ..quick_cfg(ModelKind::Mlp)
        };
        let spec = SplitSpec::standard(SplitKind::Fixed);
        assert!(matches!(
            train_size_sweep(&[1], &cfg, &data, &spec, 1, 1),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn train_size_sweep_varies_quota() {
        let data = toy_task();
        let cfg = TrainConfig {
            max_epochs: 10,
            ..quick_cfg(ModelKind::Mlp)
        };
        let rows = train_size_sweep(&[2, 6], &cfg, &data, &toy_spec(9), 2, 1).unwrap();
        assert_eq!(rows.iter().map(|r| r.key).collect::<Vec<_>>(), [2, 6]);
    }

    #[test]
    fn per_model_defaults() {
        let dagnn = TrainConfig::for_model(ModelKind::Dagnn);
        assert_eq!(dagnn.dropout, 0.8);
        assert_eq!(dagnn.weight_decay, 5e-3);
        let gcn = TrainConfig::for_model(ModelKind::Gcn);
        assert_eq!(gcn.dropout, 0.5);
        assert_eq!(gcn.weight_decay, 5e-4);
        assert_eq!(gcn.hidden, 64);
        assert_eq!(gcn.max_epochs, 1500);
    }

    #[test]
    fn model_kind_parses() {
        assert_eq!(ModelKind::parse("DAGNN").unwrap(), ModelKind::Dagnn);
        assert_eq!(ModelKind::parse("gcn").unwrap(), ModelKind::Gcn);
        assert!(ModelKind::parse("transformer").is_err());
        assert_eq!(ModelKind::Dagnn.to_string(), "dagnn");
    }

    #[test]
    fn grid_is_model_aware() {
        assert!(hyper_grid(ModelKind::Mlp).ks.is_empty());
        assert_eq!(hyper_grid(ModelKind::Dagnn).ks, [5, 10, 20]);
        assert_eq!(hyper_grid(ModelKind::Dagnn).dropouts, [0.5, 0.8]);
    }
}
