//! Command-line front end for the graph-model library.
//!
//! Every command is deterministic given its `--seed`: reports carry no
//! timestamps, floats print in shortest round-trip form, and rerunning a
//! command with the same arguments reproduces the output byte for byte.
//!
//! Exit codes: 0 success, 1 usage errors, 2 data errors (missing or
//! malformed datasets and checkpoints), 3 failed numeric verification
//! (divergence, non-convergence, gradient mismatch).

use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::error::ErrorKind as ClapErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use deepgnn_core::dataset::{largest_connected_component, resolve_dataset_dir};
use deepgnn_core::models::{dagnn_backward, dagnn_forward, decoupled_backward, decoupled_forward,
    gcn_backward, gcn_forward, mlp_backward, mlp_forward, DagnnParams, GcnParams, MlpParams,
};
use deepgnn_core::nn::gradcheck::{finite_diff_check, GradCheck};
use deepgnn_core::nn::kernels::{accuracy, cross_entropy, cross_entropy_softmax_backward, softmax_rows};
use deepgnn_core::smoothness::EXACT_NODE_CAP;
use deepgnn_core::spectral::{limit_of, power_converge};
use deepgnn_core::synth::{synth_task, GraphSpec, SbmSpec};
use deepgnn_core::train::{depth_sweep, train_size_sweep, ModelParams, SweepRow};
use deepgnn_core::{
    graph_smoothness, load_dataset, multi_run, normalize, run_split, train, DenseMatrix, Error,
    Graph, ModelKind, OperatorKind, SmoothnessMode, SplitKind, SplitSpec, TaskData, TrainConfig,
    TrainedModel,
};

#[derive(Parser, Debug)]
#[command(
    name = "deepgnn",
    version,
    about = "Train and analyze graph models with decoupled, depth-adaptive propagation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model over one or more seeded runs and report accuracy
    Train(TrainArgs),
    /// Sweep propagation depth (or layer count) against accuracy and smoothness
    SweepDepth(SweepDepthArgs),
    /// Sweep the number of training nodes per class over random splits
    SweepTrainsize(SweepTrainsizeArgs),
    /// Track how fast repeated propagation approaches its infinite-depth limit
    Converge(ConvergeArgs),
    /// Measure representation smoothness hop by hop
    Smoothness(SmoothnessArgs),
    /// Check analytic gradients against finite differences for every model
    Gradcheck(GradcheckArgs),
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Dataset directory, or a name looked up under the data root
    #[arg(long)]
    dataset: String,

    /// Root directory for datasets; defaults to $DEEPGNN_DATA_ROOT, then ./datasets
    #[arg(long)]
    data_root: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Write the report to this file instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct HyperArgs {
    /// Model: mlp, gcn, decoupled, or dagnn
    #[arg(long, default_value = "dagnn")]
    model: String,

    /// Propagation steps for the decoupled and dagnn models
    #[arg(long)]
    k: Option<usize>,

    /// Layer count for the gcn model
    #[arg(long)]
    depth: Option<usize>,

    /// Hidden width of the feature transform
    #[arg(long)]
    hidden: Option<usize>,

    #[arg(long)]
    lr: Option<f64>,

    #[arg(long)]
    weight_decay: Option<f64>,

    #[arg(long)]
    dropout: Option<f64>,

    #[arg(long)]
    max_epochs: Option<usize>,

    /// Epochs without validation improvement before stopping
    #[arg(long)]
    patience: Option<usize>,
}

impl HyperArgs {
    fn to_config(&self, seed: u64) -> Result<TrainConfig> {
        let kind = ModelKind::parse(&self.model)?;
        let mut cfg = TrainConfig::for_model(kind);
        cfg.seed = seed;
        if let Some(k) = self.k {
            cfg.k = k;
        }
        if let Some(depth) = self.depth {
            cfg.depth = depth;
        }
        if let Some(hidden) = self.hidden {
            cfg.hidden = hidden;
        }
        if let Some(lr) = self.lr {
            cfg.lr = lr;
        }
        if let Some(wd) = self.weight_decay {
            cfg.weight_decay = wd;
        }
        if let Some(dropout) = self.dropout {
            cfg.dropout = dropout;
        }
        if let Some(max_epochs) = self.max_epochs {
            cfg.max_epochs = max_epochs;
        }
        if let Some(patience) = self.patience {
            cfg.patience = patience;
        }
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct SplitArgs {
    /// Split policy: auto (fixed when the dataset ships one), fixed, or random
    #[arg(long, default_value = "auto")]
    split: String,

    #[arg(long, default_value_t = 20)]
    train_per_class: usize,

    #[arg(long, default_value_t = 500)]
    val_count: usize,

    /// Test node count, or "rest" to assign every remaining node
    #[arg(long, default_value = "1000")]
    test_count: String,
}

impl SplitArgs {
    fn to_spec(&self, data: &TaskData, seed: u64) -> Result<SplitSpec> {
        let kind = match self.split.as_str() {
            "auto" => {
                if data.fixed_split.is_some() {
                    SplitKind::Fixed
                } else {
                    SplitKind::Random { seed }
                }
            }
            "fixed" => SplitKind::Fixed,
            "random" => SplitKind::Random { seed },
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown split policy '{other}' (expected auto, fixed, or random)"
                ))
                .into())
            }
        };
        let test_count = match self.test_count.as_str() {
            "rest" => None,
            text => Some(text.parse::<usize>().map_err(|_| {
                Error::InvalidArgument(format!(
                    "test count must be a number or \"rest\", got '{text}'"
                ))
            })?),
        };
        Ok(SplitSpec {
            kind,
            train_per_class: self.train_per_class,
            val_count: self.val_count,
            test_count,
        })
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,

    #[command(flatten)]
    hyper: HyperArgs,

    #[command(flatten)]
    split: SplitArgs,

    /// Independent seeded runs to aggregate (run r uses seed + r)
    #[arg(long, default_value_t = 1)]
    runs: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[arg(long, default_value_t = 1)]
    threads: usize,

    /// Save the run-0 model here as a binary checkpoint (retrains run 0)
    #[arg(long)]
    save_model: Option<PathBuf>,

    /// Keep the per-epoch loss curves in the report
    #[arg(long)]
    curves: bool,

    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct SweepDepthArgs {
    #[command(flatten)]
    data: DataArgs,

    #[command(flatten)]
    hyper: HyperArgs,

    #[command(flatten)]
    split: SplitArgs,

    /// Depths to sweep; 0 trains the plain MLP baseline
    #[arg(long, value_delimiter = ',', required = true)]
    depths: Vec<usize>,

    #[arg(long, default_value_t = 3)]
    runs: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[arg(long, default_value_t = 1)]
    threads: usize,

    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct SweepTrainsizeArgs {
    #[command(flatten)]
    data: DataArgs,

    #[command(flatten)]
    hyper: HyperArgs,

    /// Training nodes per class to sweep
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,

    #[arg(long, default_value_t = 500)]
    val_count: usize,

    /// Test node count, or "rest"
    #[arg(long, default_value = "1000")]
    test_count: String,

    #[arg(long, default_value_t = 3)]
    runs: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[arg(long, default_value_t = 1)]
    threads: usize,

    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct ConvergeArgs {
    /// Synthetic graph spec: path:N, cycle:N, complete:N, or sbm:S1,S2[,..],P_IN,P_OUT,SEED
    #[arg(long, conflicts_with = "dataset")]
    graph: Option<String>,

    /// Dataset whose graph to use instead of a synthetic one
    #[arg(long)]
    dataset: Option<String>,

    #[arg(long)]
    data_root: Option<PathBuf>,

    /// Restrict a dataset graph to its largest connected component
    #[arg(long)]
    lcc: bool,

    /// Operator: symmetric or rowavg
    #[arg(long, default_value = "symmetric")]
    kind: String,

    #[arg(long, default_value_t = 1e-6)]
    tol: f64,

    #[arg(long, default_value_t = 5000)]
    max_k: usize,

    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct SmoothnessArgs {
    #[command(flatten)]
    data: DataArgs,

    /// Largest hop to measure (rows cover hops 0..=k)
    #[arg(long, default_value_t = 20)]
    k: usize,

    /// Measure a trained model's representations instead of raw features
    #[arg(long)]
    checkpoint: Option<PathBuf>,

    /// Pair sample budget when the graph is too large for exact smoothness
    #[arg(long, default_value_t = 100_000)]
    sample_pairs: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[arg(long, default_value_t = 1e-5)]
    epsilon: f64,

    /// Coordinates sampled per tensor
    #[arg(long, default_value_t = 40)]
    samples: usize,

    /// Largest acceptable relative error
    #[arg(long, default_value_t = 1e-4)]
    threshold: f64,

    #[command(flatten)]
    output: OutputArgs,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ClapErrorKind::DisplayHelp | ClapErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(exit_code(&err));
    }
}

fn exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<Error>() {
        Some(e) => match e {
            Error::InvalidArgument(_)
            | Error::ShapeMismatch(_)
            | Error::EmptyMask
            | Error::TooFewPairs { .. }
            | Error::EmptyGraph
            | Error::EdgeOutOfRange { .. } => 1,
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::MetaMismatch { .. }
            | Error::InvalidDataset(_)
            | Error::ClassTooSmall { .. }
            | Error::Disconnected { .. }
            | Error::Checkpoint(_) => 2,
            Error::NonFinite { .. }
            | Error::IterationCap { .. }
            | Error::VerificationFailed(_)
            | Error::Diverged { .. } => 3,
        },
        None => 1,
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::SweepDepth(args) => cmd_sweep_depth(args),
        Command::SweepTrainsize(args) => cmd_sweep_trainsize(args),
        Command::Converge(args) => cmd_converge(args),
        Command::Smoothness(args) => cmd_smoothness(args),
        Command::Gradcheck(args) => cmd_gradcheck(args),
    }
}

fn locate_dataset(name: &str, flag_root: Option<&Path>) -> Result<PathBuf> {
    let env_root = std::env::var_os("DEEPGNN_DATA_ROOT").map(PathBuf::from);
    let root = flag_root.map(Path::to_path_buf).or(env_root);
    resolve_dataset_dir(name, root.as_deref())
        .or_else(|| resolve_dataset_dir(name, Some(Path::new("datasets"))))
        .ok_or_else(|| {
            Error::InvalidDataset(format!(
                "dataset '{name}' not found (tried the path itself, the data root, and ./datasets)"
            ))
            .into()
        })
}

fn load_task(data: &DataArgs) -> Result<TaskData> {
    let dir = locate_dataset(&data.dataset, data.data_root.as_deref())?;
    let bundle = load_dataset(&dir)?;
    Ok(TaskData::from_bundle(&bundle))
}

fn emit(output: &OutputArgs, content: &str) -> Result<()> {
    match &output.output {
        Some(path) => {
            std::fs::write(path, content).map_err(|e| Error::io(path, e))?;
        }
        None => {
            std::io::stdout()
                .write_all(content.as_bytes())
                .map_err(|e| Error::io(Path::new("<stdout>"), e))?;
        }
    }
    Ok(())
}

fn csv(header: &str, rows: &[Vec<String>]) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn sweep_csv(rows: &[SweepRow]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.key.to_string(),
                r.acc_mean.to_string(),
                r.acc_std.to_string(),
                r.smv_g.to_string(),
            ]
        })
        .collect();
    csv("key,acc_mean,acc_std,smv_g", &body)
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let data = load_task(&args.data)?;
    let cfg = args.hyper.to_config(args.seed)?;
    let spec = args.split.to_spec(&data, args.seed)?;
    let mut report = multi_run(&cfg, &data, &spec, args.runs, args.threads)?;
    if !args.curves {
        for run in &mut report.runs {
            run.train_loss.clear();
            run.val_loss.clear();
        }
    }
    if let Some(path) = &args.save_model {
        let split = run_split(&data, &spec, 0)?;
        let (_, model) = train(&cfg, &data, &split)?;
        model.save(path)?;
    }
    let mut body = serde_json::to_string_pretty(&report)?;
    body.push('\n');
    emit(&args.output, &body)
}

fn cmd_sweep_depth(args: SweepDepthArgs) -> Result<()> {
    let data = load_task(&args.data)?;
    let cfg = args.hyper.to_config(args.seed)?;
    let spec = args.split.to_spec(&data, args.seed)?;
    let rows = depth_sweep(&args.depths, &cfg, &data, &spec, args.runs, args.threads)?;
    emit(&args.output, &sweep_csv(&rows))
}

fn cmd_sweep_trainsize(args: SweepTrainsizeArgs) -> Result<()> {
    let data = load_task(&args.data)?;
    let cfg = args.hyper.to_config(args.seed)?;
    let split_args = SplitArgs {
        split: "random".into(),
        train_per_class: 1,
        val_count: args.val_count,
        test_count: args.test_count.clone(),
    };
    let spec = split_args.to_spec(&data, args.seed)?;
    let rows = train_size_sweep(&args.sizes, &cfg, &data, &spec, args.runs, args.threads)?;
    emit(&args.output, &sweep_csv(&rows))
}

fn cmd_converge(args: ConvergeArgs) -> Result<()> {
    let kind = OperatorKind::parse(&args.kind)?;
    let graph: Graph = match (&args.graph, &args.dataset) {
        (Some(spec_text), None) => {
            let spec = GraphSpec::parse(spec_text)?;
            deepgnn_core::synth::synth_graph(&spec)?
        }
        (None, Some(name)) => {
            let dir = locate_dataset(name, args.data_root.as_deref())?;
            let bundle = load_dataset(&dir)?;
            if args.lcc {
                largest_connected_component(&bundle)?.graph
            } else {
                bundle.graph
            }
        }
        _ => {
            return Err(Error::InvalidArgument(
                "pass exactly one of --graph or --dataset".into(),
            )
            .into())
        }
    };
    let op = normalize(&graph, kind);
    let limit = limit_of(&graph, kind)?;
    let report = power_converge(&op, &limit, args.tol, args.max_k)?;
    let body: Vec<Vec<String>> = report
        .residuals
        .iter()
        .enumerate()
        .map(|(i, r)| vec![(i + 1).to_string(), r.to_string()])
        .collect();
    emit(&args.output, &csv("k,frobenius_residual", &body))?;
    match report.k_converge {
        Some(_) => Ok(()),
        None => Err(Error::IterationCap {
            cap: args.max_k,
            residual: report.residuals.last().copied().unwrap_or(f64::NAN),
        }
        .into()),
    }
}

fn mlp_part(model: &TrainedModel) -> Result<&MlpParams> {
    match &model.params {
        ModelParams::Mlp(p) => Ok(p),
        ModelParams::Dagnn(p) => Ok(&p.mlp),
        ModelParams::Gcn(_) => Err(Error::InvalidArgument(
            "the gcn entangles transformation and propagation; its hops start from the logits"
                .into(),
        )
        .into()),
    }
}

fn cmd_smoothness(args: SmoothnessArgs) -> Result<()> {
    let data = load_task(&args.data)?;
    let mode = if data.n() <= EXACT_NODE_CAP {
        SmoothnessMode::Exact
    } else {
        SmoothnessMode::Sampled {
            pairs: args.sample_pairs,
            seed: args.seed,
        }
    };
    let model = args
        .checkpoint
        .as_deref()
        .map(TrainedModel::load)
        .transpose()?;
    let mut rep: DenseMatrix = match &model {
        None => data.features.clone(),
        Some(m) => match m.kind {
            ModelKind::Gcn => m.logits(&data)?,
            _ => mlp_forward(mlp_part(m)?, &data.features, 0.0, false, 0)?.0,
        },
    };
    let eval_mask: Vec<usize> = match &data.fixed_split {
        Some(split) => split.test.clone(),
        None => (0..data.n()).collect(),
    };

    let mut body = Vec::with_capacity(args.k + 1);
    for hop in 0..=args.k {
        if hop > 0 {
            rep = data.op.propagate(&rep)?;
        }
        let smv = graph_smoothness(&rep, mode)?.graph_value;
        let acc = match &model {
            Some(_) => accuracy(&softmax_rows(&rep), &data.labels, &eval_mask)?.to_string(),
            None => String::new(),
        };
        body.push(vec![hop.to_string(), smv.to_string(), acc]);
    }
    emit(&args.output, &csv("layer_or_hop,smv_g,accuracy", &body))
}

#[derive(Serialize)]
struct NamedCheck {
    model: String,
    #[serde(flatten)]
    report: GradCheck,
}

#[derive(Serialize)]
struct GradcheckReport {
    seed: u64,
    epsilon: f64,
    samples_per_tensor: usize,
    threshold: f64,
    checks: Vec<NamedCheck>,
    pass: bool,
}

fn cmd_gradcheck(args: GradcheckArgs) -> Result<()> {
    let bundle = synth_task(
        &SbmSpec {
            sizes: vec![12, 12, 12],
            p_in: 0.5,
            p_out: 0.1,
            seed: args.seed,
        },
        10,
        0.3,
        args.seed,
    )?;
    let data = TaskData::from_bundle(&bundle);
    let x = &data.features;
    let op = &data.op;
    let labels = &data.labels;
    let mask: Vec<usize> = (0..data.n()).collect();
    let loss_of = |logits: &DenseMatrix| -> deepgnn_core::Result<f64> {
        let (loss, _) = cross_entropy(&softmax_rows(logits), labels, &mask)?;
        Ok(loss)
    };

    let mut checks = Vec::with_capacity(4);

    let mut mlp = MlpParams::new(x.cols(), 16, data.class_count, args.seed)?;
    let (logits, cache) = mlp_forward(&mlp, x, 0.0, false, 0)?;
    let d_logits = cross_entropy_softmax_backward(&softmax_rows(&logits), labels, &mask)?;
    let grads = mlp_backward(&mlp, &cache, &d_logits)?;
    checks.push(NamedCheck {
        model: "mlp".into(),
        report: finite_diff_check(
            &mut mlp,
            &grads,
            |p| loss_of(&mlp_forward(p, x, 0.0, false, 0)?.0),
            args.epsilon,
            args.samples,
            args.seed,
        )?,
    });

    let mut gcn = GcnParams::new(x.cols(), 16, data.class_count, 3, args.seed)?;
    let (logits, cache) = gcn_forward(&gcn, op, x, 0.0, false, 0)?;
    let d_logits = cross_entropy_softmax_backward(&softmax_rows(&logits), labels, &mask)?;
    let grads = gcn_backward(&gcn, op, &cache, &d_logits)?;
    checks.push(NamedCheck {
        model: "gcn_depth3".into(),
        report: finite_diff_check(
            &mut gcn,
            &grads,
            |p| loss_of(&gcn_forward(p, op, x, 0.0, false, 0)?.0),
            args.epsilon,
            args.samples,
            args.seed,
        )?,
    });

    let mut dec = MlpParams::new(x.cols(), 16, data.class_count, args.seed.wrapping_add(1))?;
    let (logits, cache) = decoupled_forward(&dec, op, x, 5, 0.0, false, 0)?;
    let d_logits = cross_entropy_softmax_backward(&softmax_rows(&logits), labels, &mask)?;
    let grads = decoupled_backward(&dec, op, &cache, &d_logits)?;
    checks.push(NamedCheck {
        model: "decoupled_k5".into(),
        report: finite_diff_check(
            &mut dec,
            &grads,
            |p| loss_of(&decoupled_forward(p, op, x, 5, 0.0, false, 0)?.0),
            args.epsilon,
            args.samples,
            args.seed,
        )?,
    });

    let mut dagnn = DagnnParams::new(x.cols(), 16, data.class_count, args.seed)?;
    let (logits, cache) = dagnn_forward(&dagnn, op, x, 5, 0.0, false, 0)?;
    let d_logits = cross_entropy_softmax_backward(&softmax_rows(&logits), labels, &mask)?;
    let grads = dagnn_backward(&dagnn, op, &cache, &d_logits)?;
    checks.push(NamedCheck {
        model: "dagnn_k5".into(),
        report: finite_diff_check(
            &mut dagnn,
            &grads,
            |p| loss_of(&dagnn_forward(p, op, x, 5, 0.0, false, 0)?.0),
            args.epsilon,
            args.samples,
            args.seed,
        )?,
    });

    let pass = checks
        .iter()
        .all(|c| c.report.max_rel_error < args.threshold);
    let report = GradcheckReport {
        seed: args.seed,
        epsilon: args.epsilon,
        samples_per_tensor: args.samples,
        threshold: args.threshold,
        checks,
        pass,
    };
    let mut body = serde_json::to_string_pretty(&report)?;
    body.push('\n');
    emit(&args.output, &body)?;
    if pass {
        Ok(())
    } else {
        Err(Error::VerificationFailed(format!(
            "a gradient check exceeded the relative error threshold {}",
            args.threshold
        ))
        .into())
    }
}
