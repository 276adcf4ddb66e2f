//! Command-line interface: `test` (the coverage-guided loop), `fuzz`,
//! `dbnabstr create/show`, `gen-model`, and a small `eval` utility.

use crate::bn;
use crate::data::{self, Dataset, DatasetKind, Normalize};
use crate::engines::fuzz::{fuzz, FuzzConfig};
use crate::engines::EngineConfig;
use crate::error::{Error, Result};
use crate::model;
use crate::oracle::{Norm, OracleConfig};
use crate::rng::Rng;
use crate::runner::{self, suite::TestEntry, suite::TestSuite, Criterion, RunConfig};
use clap::{Args, Parser, Subcommand};
use std::io::Write;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "concov",
    version,
    about = "Coverage-guided test generation for feed-forward neural-network classifiers"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the coverage-guided testing loop
    Test(TestArgs),
    /// Randomly mutate seed inputs in search of adversarial examples
    Fuzz(FuzzArgs),
    /// Create or inspect a Bayesian-network abstraction
    Dbnabstr(DbnabstrArgs),
    /// Generate a deterministic random model
    GenModel(GenModelArgs),
    /// Report classifier accuracy on the test split
    Eval(EvalArgs),
}

#[derive(Args)]
struct DataOpts {
    /// Dataset: csv:PATH[,TEST], idx:IMAGES,LABELS[,TI,TL], or an IDX directory
    #[arg(long)]
    dataset: String,
    /// Model file (concov-model-v1 JSON)
    #[arg(long)]
    model: PathBuf,
    /// Feature normalization for CSV data
    #[arg(long, default_value = "none")]
    normalize: String,
    /// Label column name for CSV data
    #[arg(long, default_value = "class")]
    label_column: String,
}

impl DataOpts {
    fn load(&self, seed: u64) -> Result<(model::Network, Dataset)> {
        let net = model::load_model(&self.model)?;
        let normalize: Normalize = self.normalize.parse()?;
        let ds = data::load_dataset(&self.dataset, normalize, &self.label_column, seed)?;
        if ds.input_shape != net.input_shape() {
            return Err(Error::Data(format!(
                "dataset inputs {:?} do not match model inputs {:?}",
                ds.input_shape,
                net.input_shape()
            )));
        }
        Ok((net, ds))
    }
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    data: DataOpts,
    /// Output directory for reports and generated tests
    #[arg(long)]
    outputs: PathBuf,
    /// Coverage criterion: nc, ssclp, bfc or bfdc
    #[arg(long)]
    criterion: String,
    /// Norm for the oracle and search engine: l0 or linf
    #[arg(long)]
    norm: String,
    /// Covered layers (structural) or decision layers (ssclp)
    #[arg(long, num_args = 1..)]
    layers: Vec<String>,
    /// Size of the initial test suite
    #[arg(long, default_value_t = 1)]
    init: usize,
    #[arg(long, default_value_t = 100)]
    max_iterations: usize,
    /// Oracle distance threshold (defaults to 1/4 for linf, |features|/4 for l0)
    #[arg(long)]
    norm_factor: Option<f64>,
    /// Hard lower bound on generated L-infinity distances
    #[arg(long)]
    lb_hard: Option<f64>,
    /// Uniform noise over the lower bound
    #[arg(long)]
    lb_noise: Option<f64>,
    /// Oracle post-filters (only LOF is available)
    #[arg(long, num_args = 1..)]
    filters: Vec<String>,
    /// Condition ratio for relaxed sign-sign accounting
    #[arg(long, default_value_t = 0.01)]
    mcdc_cond_ratio: f64,
    /// Abstraction file for bfc/bfdc
    #[arg(long)]
    bn_abstr: Option<PathBuf>,
    /// Save every generated test (default: adversarial examples only)
    #[arg(long)]
    save_all_tests: bool,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
}

#[derive(Args)]
struct FuzzArgs {
    #[command(flatten)]
    data: DataOpts,
    #[arg(long)]
    outputs: PathBuf,
    /// Number of seed inputs drawn from the test split
    #[arg(long, default_value_t = 1)]
    sample: usize,
    /// Mutants attempted per process
    #[arg(short = 'N', long = "num-tests", default_value_t = 1000)]
    num_tests: usize,
    /// Logical worker processes
    #[arg(long, default_value_t = 1)]
    processes: usize,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
}

#[derive(Args)]
struct DbnabstrArgs {
    #[command(subcommand)]
    action: DbnAction,
}

#[derive(Subcommand)]
enum DbnAction {
    /// Fit an abstraction and save it
    Create(DbnCreateArgs),
    /// Print the feature/interval table of a saved abstraction
    Show(DbnShowArgs),
}

#[derive(Args)]
struct DbnCreateArgs {
    /// Abstraction file to write
    file: PathBuf,
    #[command(flatten)]
    data: DataOpts,
    /// Layers to abstract (default: every ReLU layer)
    #[arg(long, num_args = 1..)]
    layers: Vec<String>,
    /// Dimensionality reduction technique (only pca is available)
    #[arg(long, default_value = "pca")]
    feature_extraction: String,
    #[arg(long, default_value_t = 2)]
    num_features: usize,
    #[arg(long, default_value_t = 2)]
    num_intervals: usize,
    /// uniform or quantile
    #[arg(long, default_value = "uniform")]
    discr_strategy: String,
    /// Partition the whole real line with open outer intervals
    #[arg(long)]
    extended_discr: bool,
    /// Training samples used for fitting (default: all)
    #[arg(long)]
    train_size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
}

#[derive(Args)]
struct DbnShowArgs {
    /// Abstraction file to read
    file: PathBuf,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Args)]
struct GenModelArgs {
    /// Architecture, e.g. "conv:3x3x32,relu,maxpool:2x2,flatten,dense:10,softmax"
    #[arg(long)]
    spec: String,
    /// Input shape, e.g. "28x28x1" or "561"
    #[arg(long)]
    input_shape: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Model file to write
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    data: DataOpts,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
}

/// Parses arguments and dispatches; returns the process exit code.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own message; usage errors exit with 2
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Test(args) => cmd_test(args, out),
        Command::Fuzz(args) => cmd_fuzz(args, out),
        Command::Dbnabstr(args) => match args.action {
            DbnAction::Create(c) => cmd_dbn_create(c, out),
            DbnAction::Show(s) => cmd_dbn_show(s, out),
        },
        Command::GenModel(args) => cmd_gen_model(args, out),
        Command::Eval(args) => cmd_eval(args, out),
    }
}

fn parse_input_shape(s: &str) -> Result<Vec<usize>> {
    s.split('x')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| Error::Input(format!("bad input shape `{s}`")))
        })
        .collect()
}

fn cmd_test(args: TestArgs, out: &mut dyn Write) -> Result<()> {
    let _ = writeln!(out, "RNG seed: {}", args.rng_seed);
    let criterion = Criterion::parse(&args.criterion)?;
    let norm: Norm = args.norm.parse()?;
    let (net, dataset) = args.data.load(args.rng_seed)?;

    let mut engine = EngineConfig::new(norm, dataset.kind == DatasetKind::Image);
    if let Some(h) = args.lb_hard {
        engine.dmin_hard = h;
    }
    if let Some(z) = args.lb_noise {
        engine.dmin_noise = z;
    }
    let mut oracle = OracleConfig::new(norm, dataset.n_features);
    if let Some(d) = args.norm_factor {
        oracle.dthr = d;
    }
    for f in &args.filters {
        if f == "LOF" {
            oracle.lof_enabled = true;
        } else {
            return Err(Error::Input(format!("unknown post-filter `{f}` (only LOF exists)")));
        }
    }

    let cfg = RunConfig {
        criterion,
        norm,
        init_size: args.init,
        max_iterations: args.max_iterations,
        save_all_tests: args.save_all_tests,
        rng_seed: args.rng_seed,
        outputs: args.outputs,
        layers: args.layers,
        bn_abstr: args.bn_abstr,
        mcdc_cond_ratio: args.mcdc_cond_ratio,
        engine,
        oracle,
    };
    runner::run(&net, &dataset, &cfg, out)?;
    Ok(())
}

fn cmd_fuzz(args: FuzzArgs, out: &mut dyn Write) -> Result<()> {
    let _ = writeln!(out, "RNG seed: {}", args.rng_seed);
    let (net, dataset) = args.data.load(args.rng_seed)?;
    let mut rng = Rng::new(args.rng_seed);
    let seeds = TestSuite::init(&dataset, &net, args.sample, &mut rng)?;
    let seed_inputs: Vec<_> = seeds.entries.iter().map(|e| e.input.clone()).collect();
    let seed_labels: Vec<_> = seeds.entries.iter().map(|e| e.label).collect();
    let oracle = OracleConfig::new(Norm::L0, dataset.n_features);
    let cfg = FuzzConfig {
        n_streams: args.processes.max(1),
        iterations: args.num_tests,
        rng_seed: args.rng_seed,
    };
    let mut lines = vec![format!(
        "Fuzzing with {} seed inputs ({} processes, {} iterations each).",
        seed_inputs.len(),
        cfg.n_streams,
        cfg.iterations
    )];
    let _ = writeln!(out, "{}", lines[0]);

    let outcomes = fuzz(&net, &seed_inputs, &seed_labels, &dataset.bounds, &oracle, None, &cfg)?;
    let mut suite = seeds;
    for o in &outcomes {
        if o.verdict.accepted {
            suite.push(TestEntry {
                input: o.input.clone(),
                label: o.label,
                parent: Some(o.seed_index),
                distance: o.verdict.distance,
                adversarial: o.verdict.adversarial,
                target_desc: format!("fuzz stream {} iteration {}", o.stream, o.iteration),
            });
        }
    }
    let generated = suite.generated().count();
    let adversarial = suite.generated().filter(|(_, e)| e.adversarial).count();
    let term = runner::termination_line(cfg.iterations, generated, adversarial);
    let _ = writeln!(out, "{term}");
    lines.push(term);
    runner::report::persist(&args.outputs, "FUZZ_report.txt", &lines, &suite, dataset.kind, false)?;
    Ok(())
}

fn cmd_dbn_create(args: DbnCreateArgs, out: &mut dyn Write) -> Result<()> {
    let _ = writeln!(out, "RNG seed: {}", args.rng_seed);
    if args.feature_extraction != "pca" {
        return Err(Error::Input(format!(
            "feature extraction `{}` is not available (use pca)",
            args.feature_extraction
        )));
    }
    let strategy: bn::discr::DiscrStrategy = args.discr_strategy.parse()?;
    let (net, dataset) = args.data.load(args.rng_seed)?;
    let layers: Vec<String> = if args.layers.is_empty() {
        net.layers()
            .iter()
            .filter(|l| matches!(l.kind, crate::model::LayerKind::Relu))
            .map(|l| l.name.clone())
            .collect()
    } else {
        args.layers.clone()
    };
    for name in &layers {
        let _ = writeln!(
            out,
            "Using {}{}-bin discretizer with {} strategy for layer {}",
            if args.extended_discr { "extended " } else { "" },
            args.num_intervals,
            args.discr_strategy,
            name
        );
    }
    let _ = writeln!(out);

    // correctly classified training samples, shuffled, truncated
    let labels = crate::model::batch_labels(&net, &dataset.train_x)?;
    let mut idx: Vec<usize> = (0..dataset.train_x.len())
        .filter(|&i| labels[i] == dataset.train_y[i])
        .collect();
    Rng::new(args.rng_seed).shuffle(&mut idx);
    if let Some(t) = args.train_size {
        idx.truncate(t);
    }
    let train: Vec<crate::tensor::Tensor> =
        idx.iter().map(|&i| dataset.train_x[i].clone()).collect();
    let _ = writeln!(out, "| Given {} classified training sample", train.len());

    let mut log = |line: &str| {
        let _ = writeln!(out, "{line}");
    };
    let abstr = bn::fit_abstraction(
        &net,
        &train,
        &layers,
        args.num_features,
        args.num_intervals,
        strategy,
        args.extended_discr,
        &mut log,
    )?;
    let _ = writeln!(
        out,
        "| Created Bayesian Network of {} nodes and {} edges.",
        abstr.node_count(),
        abstr.edge_count()
    );
    bn::save_abstraction(&abstr, &args.file)?;
    let _ = writeln!(out, "Dumping abstraction into `{}'... done", args.file.display());
    Ok(())
}

fn cmd_dbn_show(args: DbnShowArgs, out: &mut dyn Write) -> Result<()> {
    let abstr = bn::load_abstraction(&args.file)?;
    let _ = writeln!(out, "Loading abstraction from `{}'... done", args.file.display());
    bn::show(&abstr, out).map_err(|e| Error::io(args.file.display().to_string(), e))?;
    Ok(())
}

fn cmd_gen_model(args: GenModelArgs, out: &mut dyn Write) -> Result<()> {
    let shape = parse_input_shape(&args.input_shape)?;
    let net = model::generate_model(&args.spec, &shape, args.seed)?;
    model::save_model(&net, &args.out)?;
    let _ = writeln!(out, "Saved model into `{}'", args.out.display());
    let _ = writeln!(out, "{}", model::describe(&net));
    Ok(())
}

fn cmd_eval(args: EvalArgs, out: &mut dyn Write) -> Result<()> {
    let (net, dataset) = args.data.load(args.rng_seed)?;
    let labels = crate::model::batch_labels(&net, &dataset.test_x)?;
    let correct = labels
        .iter()
        .zip(&dataset.test_y)
        .filter(|(a, b)| a == b)
        .count();
    let _ = writeln!(
        out,
        "Accuracy on test data: {:.2}% ({correct}/{} correctly classified)",
        100.0 * correct as f64 / dataset.test_y.len().max(1) as f64,
        dataset.test_y.len()
    );
    Ok(())
}
