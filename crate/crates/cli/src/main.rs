//! Command-line front end: rank features, sweep top-k subsets, audit for
//! hidden-label features, generate synthetic data, and re-render saved
//! sweep results. Progress goes to stderr, results to the output directory.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use flowrank_core::harness::{
    self, EvalMode, ExperimentPlan, SweepResult, SyntheticSpec,
};
use flowrank_core::{ClassifierKind, DatasetProfile, Error, FeatureTable, LabelVector};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(
    name = "flowrank",
    version,
    about = "Feature ranking, subset sweeps, and hidden-label audits for binary flow datasets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank features with each selection algorithm
    Rank(RunArgs),
    /// Evaluate classifiers over incremental top-k feature subsets
    Sweep(RunArgs),
    /// Flag features that alone match full-model AUC (hidden labels)
    Audit(AuditArgs),
    /// Generate a synthetic dataset with an optional planted leak
    Synth(SynthArgs),
    /// Re-render a saved sweep_result.json into CSV and curve files
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Plan file with key = value settings; flags override it
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Dataset CSV
    #[arg(long)]
    data: Option<PathBuf>,
    /// Dataset profile (label column, attack values, identifiers)
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    jobs: Option<usize>,
    /// Evaluation protocol
    #[arg(long, value_parser = ["kfold", "holdout"])]
    mode: Option<String>,
    /// Fold count for kfold mode
    #[arg(long)]
    k: Option<usize>,
    /// Train fraction for holdout mode
    #[arg(long)]
    ratio: Option<f64>,
    /// Largest top-k subset to evaluate
    #[arg(long)]
    max_subset: Option<usize>,
    /// Comma-separated: chi_square, information_gain, correlation
    #[arg(long, value_delimiter = ',')]
    algorithms: Option<Vec<String>>,
    /// Comma-separated: dff, rf
    #[arg(long, value_delimiter = ',')]
    classifiers: Option<Vec<String>>,
    /// Features to drop before running
    #[arg(long, value_delimiter = ',')]
    remove: Option<Vec<String>>,
    /// Audit flag margin
    #[arg(long)]
    delta: Option<f64>,
    /// Skip prediction timing so repeated runs emit identical bytes
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct AuditArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Classifier used for the audit
    #[arg(long, default_value = "rf")]
    classifier: String,
}

#[derive(Args)]
struct SynthArgs {
    /// Rows to generate
    #[arg(long, default_value_t = 1000)]
    rows: usize,
    /// Feature columns (the leak, if any, is the last one)
    #[arg(long, default_value_t = 10)]
    cols: usize,
    /// Leak strength in [0,1]; 0 disables the planted leak
    #[arg(long, default_value_t = 1.0)]
    leak: f64,
    /// Positive-class fraction
    #[arg(long, default_value_t = 0.5)]
    balance: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV file to write; a matching .profile file is written next to it
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// A sweep_result.json produced by the sweep subcommand
    #[arg(long)]
    data: PathBuf,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) => EXIT_USAGE,
        Error::Io { .. }
        | Error::Csv { .. }
        | Error::RaggedRow { .. }
        | Error::SchemaMismatch(_)
        | Error::LabelColumn(_)
        | Error::BadNumber { .. }
        | Error::BadLabel { .. }
        | Error::Empty(_)
        | Error::SingleClass
        | Error::ClassTooSmall { .. }
        | Error::NegativeFeature { .. }
        | Error::UnknownFeature(_) => EXIT_DATA,
        _ => EXIT_RUNTIME,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            eprint!("{e}");
            return ExitCode::from(EXIT_USAGE);
        }
        Err(e) => {
            // --help and --version land here
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn run(cli: Cli) -> flowrank_core::Result<()> {
    match cli.command {
        Command::Rank(args) => {
            let (plan, out) = resolve_plan(&args)?;
            let (x, y, name) = load_inputs(&plan)?;
            eprintln!("ranking {} features of {name} with {} algorithms", x.n_features(), plan.algorithms.len());
            let rankings = harness::run_rankings(&x, &y, &plan)?;
            let written = harness::write_rankings(&out, &rankings)?;
            harness::write_manifest(&out, &plan)?;
            eprintln!("wrote {} ranking files to {}", written.len(), out.display());
            Ok(())
        }
        Command::Sweep(args) => {
            let (plan, out) = resolve_plan(&args)?;
            let (x, y, name) = load_inputs(&plan)?;
            eprintln!(
                "sweeping top-k subsets up to k = {} on {name}",
                plan.resolved_max_subset(x.n_features())
            );
            let rankings = harness::run_rankings(&x, &y, &plan)?;
            harness::write_rankings(&out, &rankings)?;
            let sweep = harness::sweep_subsets(&x, &y, &plan, &name)?;
            let failed = sweep.cells.iter().filter(|c| c.error.is_some()).count();
            if failed > 0 {
                eprintln!("warning: {failed} sweep cells failed; see the CSV output");
            }
            harness::write_sweep(&out, &sweep)?;
            harness::write_manifest(&out, &plan)?;
            eprintln!("wrote sweep results to {}", out.display());
            Ok(())
        }
        Command::Audit(args) => {
            let classifier: ClassifierKind = args.classifier.parse()?;
            let (plan, out) = resolve_plan(&args.run)?;
            let (x, y, name) = load_inputs(&plan)?;
            eprintln!(
                "auditing {} features of {name} with {} (delta = {})",
                x.n_features(),
                classifier.tag(),
                plan.delta
            );
            let report =
                harness::audit_hidden_labels(&x, &y, &plan, classifier, plan.delta, &name)?;
            let flagged = report.flagged_features();
            if flagged.is_empty() {
                eprintln!("no feature reaches full-model AUC on its own");
            } else {
                eprintln!("flagged as likely hidden labels: {}", flagged.join(", "));
            }
            harness::write_audit(&out, &report)?;
            harness::write_manifest(&out, &plan)?;
            eprintln!("wrote audit report to {}", out.display());
            Ok(())
        }
        Command::Synth(args) => {
            let spec = SyntheticSpec {
                n: args.rows,
                d: args.cols,
                leak_strength: args.leak,
                class_balance: args.balance,
                seed: args.seed,
            };
            let (x, y) = harness::generate_synthetic(&spec)?;
            harness::write_synthetic_csv(&args.out, &x, &y)?;
            let profile_path = args.out.with_extension("profile");
            write_profile(&profile_path)?;
            eprintln!(
                "wrote {} rows x {} features to {} (profile: {})",
                args.rows,
                args.cols,
                args.out.display(),
                profile_path.display()
            );
            Ok(())
        }
        Command::Report(args) => {
            let text = std::fs::read_to_string(&args.data).map_err(|source| Error::Io {
                path: args.data.clone(),
                source,
            })?;
            let sweep: SweepResult = serde_json::from_str(&text)?;
            let written = harness::write_sweep(&args.out, &sweep)?;
            eprintln!("re-rendered {} files to {}", written.len(), args.out.display());
            Ok(())
        }
    }
}

/// Plan file first, then flag overrides.
fn resolve_plan(args: &RunArgs) -> flowrank_core::Result<(ExperimentPlan, PathBuf)> {
    let mut plan = match &args.plan {
        Some(path) => ExperimentPlan::load(path)?,
        None => ExperimentPlan::default(),
    };
    if let Some(data) = &args.data {
        plan.dataset = Some(data.clone());
    }
    if let Some(profile) = &args.profile {
        plan.profile = Some(profile.clone());
    }
    if let Some(seed) = args.seed {
        plan.seed = seed;
    }
    match args.mode.as_deref() {
        Some("holdout") => plan.evaluation = EvalMode::Holdout { ratio: args.ratio.unwrap_or(0.7) },
        Some("kfold") => plan.evaluation = EvalMode::Kfold { k: args.k.unwrap_or(5) },
        _ => {
            // no mode flag: --k / --ratio still refine the planned mode
            match (&mut plan.evaluation, args.k, args.ratio) {
                (EvalMode::Kfold { k }, Some(new_k), _) => *k = new_k,
                (EvalMode::Holdout { ratio }, _, Some(new_ratio)) => *ratio = new_ratio,
                _ => {}
            }
        }
    }
    if let Some(max) = args.max_subset {
        plan.max_subset_size = Some(max);
    }
    if let Some(algorithms) = &args.algorithms {
        plan.algorithms = algorithms.iter().map(|a| a.parse()).collect::<flowrank_core::Result<_>>()?;
    }
    if let Some(classifiers) = &args.classifiers {
        plan.classifiers = classifiers.iter().map(|c| c.parse()).collect::<flowrank_core::Result<_>>()?;
    }
    if let Some(remove) = &args.remove {
        plan.removed_features = remove.clone();
    }
    if let Some(delta) = args.delta {
        plan.delta = delta;
    }
    if args.no_timing {
        plan.measure_timing = false;
    }
    if let Some(out) = &args.out {
        plan.out_dir = Some(out.clone());
    }
    if let Some(jobs) = args.jobs {
        if jobs == 0 {
            return Err(Error::Config("--jobs must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::Config(format!("could not size the thread pool: {e}")))?;
    }
    let out = plan
        .out_dir
        .clone()
        .ok_or_else(|| Error::Config("no output directory: pass --out or set output in the plan".into()))?;
    Ok((plan, out))
}

fn load_inputs(plan: &ExperimentPlan) -> flowrank_core::Result<(FeatureTable, LabelVector, String)> {
    let dataset = plan
        .dataset
        .as_ref()
        .ok_or_else(|| Error::Config("no dataset: pass --data or set dataset in the plan".into()))?;
    let profile = match &plan.profile {
        Some(path) => DatasetProfile::load(path)?,
        None => DatasetProfile::default(),
    };
    let (x, y, name, warnings) = harness::load_prepared(dataset, &profile)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    eprintln!("loaded {}: {} rows, {} features", name, x.n_rows(), x.n_features());
    if plan.removed_features.is_empty() {
        return Ok((x, y, name));
    }
    let (x, removed) = harness::remove_features(&x, &plan.removed_features)?;
    eprintln!("removed features: {}", removed.join(", "));
    Ok((x, y, name))
}

fn write_profile(path: &Path) -> flowrank_core::Result<()> {
    std::fs::write(path, "label_column = Label\nattack_values = 1\n").map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
