use std::f64::consts::LN_2;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use fbde::data::{
    encode_table, generate_mixture, write_mixture_csv, ColumnKind, CsvSpec, MixtureParams, RawTable,
};
use fbde::engine::{
    replay_trace, FitConfig, KlEval, LeveragingScheme, NegativeSampling, SchemeKind, Trace,
};
use fbde::error::{FbdeError, Result};
use fbde::guarantees::GuaranteeReport;
use fbde::manifest::RunManifest;
use fbde::model::Model;
use fbde::pipeline::{fold_seed, run, shuffle_seed, RunConfig};
use fbde::tabular::{
    representation_rate_of, statistical_rate, AttributeKind, Dataset, TabularDensity,
};
use fbde::weak_learner::{LeafValue, TreeConfig};

#[derive(Parser)]
#[command(name = "fbde", version, about = "Fair boosted density estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a fair density to a CSV file.
    Fit(FitArgs),
    /// Report fairness and divergence metrics of a model on data.
    Eval(EvalArgs),
    /// Write a two-group Gaussian mixture sample as CSV.
    Synth(SynthArgs),
    /// Compare a model and its trace with the closed-form bounds.
    Guarantees(GuaranteeArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum LeafArg {
    Sign,
    LogRatio,
    Proportion,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum NegativesArg {
    Fresh,
    Pool,
}

#[derive(Args, Serialize)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    sensitive: String,
    #[arg(long)]
    target: Option<String>,
    /// Columns to drop.
    #[arg(long)]
    ignore: Vec<String>,
    /// Force a column to be binned: `name` or `name:bins`.
    #[arg(long)]
    continuous: Vec<String>,
    /// Force a column to be categorical.
    #[arg(long)]
    categorical: Vec<String>,
    /// Target representation rate; required by the exact and relative schemes.
    #[arg(long)]
    tau: Option<f64>,
    /// exact, relative or const:<theta>.
    #[arg(long, default_value = "exact")]
    scheme: String,
    #[arg(long, default_value_t = 10)]
    rounds: usize,
    #[arg(long, default_value_t = 50)]
    bins: usize,
    #[arg(long, default_value_t = 8)]
    max_depth: usize,
    #[arg(long, default_value_t = 5)]
    min_leaf: usize,
    #[arg(long, default_value_t = LN_2)]
    c_bound: f64,
    /// Laplace smoothing of the initial per-group conditionals.
    #[arg(long, default_value_t = 1.0)]
    smoothing: f64,
    /// Laplace smoothing of the empirical target used for margins and KL.
    #[arg(long, default_value_t = 0.0)]
    p_smoothing: f64,
    #[arg(long, value_enum, default_value_t = LeafArg::Sign)]
    leaf: LeafArg,
    #[arg(long, default_value_t = 1.0)]
    leaf_smoothing: f64,
    #[arg(long, value_enum, default_value_t = NegativesArg::Fresh)]
    negatives: NegativesArg,
    #[arg(long, default_value_t = 2.0)]
    negatives_multiplier: f64,
    /// Run k-fold cross validation; outputs get a `.fold<i>` suffix.
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Model file.
    #[arg(long)]
    out: PathBuf,
    /// Trace CSV; defaults to the model path with a `.trace.csv` extension.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    /// Data the train-side KL is measured against.
    #[arg(long)]
    data: PathBuf,
    /// Held-out data.
    #[arg(long)]
    test: Option<PathBuf>,
    /// Class level whose statistical rate is reported.
    #[arg(long, default_value = "1")]
    positive: String,
    #[arg(long, default_value_t = 0.0)]
    p_smoothing: f64,
    /// Report KL in bits instead of nats.
    #[arg(long)]
    bits: bool,
    /// Metrics JSON; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SynthArgs {
    #[arg(long, default_value_t = 5000)]
    n: usize,
    /// Probability of a = 1.
    #[arg(long, default_value_t = 0.9)]
    s: f64,
    #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
    mu0: f64,
    #[arg(long, default_value_t = 0.7, allow_hyphen_values = true)]
    mu1: f64,
    #[arg(long, default_value_t = 0.4)]
    sigma0: f64,
    #[arg(long, default_value_t = 0.2)]
    sigma1: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GuaranteeArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    trace: PathBuf,
    /// Recompute margins and divergences exactly against this data.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    p_smoothing: f64,
    /// Report JSON; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit with status 1 when any asserted bound fails.
    #[arg(long)]
    strict: bool,
}

/// `dir/name.ext` → `dir/name.<suffix>.ext`.
fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{suffix}"),
    };
    path.with_file_name(name)
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn csv_spec(args: &FitArgs) -> Result<CsvSpec> {
    let mut spec = CsvSpec::new(&args.data, &args.sensitive);
    spec.target = args.target.clone();
    spec.ignore = args.ignore.clone();
    spec.default_bins = args.bins;
    for c in &args.continuous {
        let (name, bins) = match c.split_once(':') {
            Some((n, b)) => (
                n.to_string(),
                b.parse()
                    .map_err(|_| FbdeError::InvalidArgument(format!("bad bin count in {c:?}")))?,
            ),
            None => (c.clone(), args.bins),
        };
        spec.kinds.insert(name, ColumnKind::Continuous { bins });
    }
    for c in &args.categorical {
        spec.kinds.insert(c.clone(), ColumnKind::Categorical);
    }
    Ok(spec)
}

fn scheme(args: &FitArgs) -> Result<LeveragingScheme> {
    let kind: SchemeKind = args.scheme.parse()?;
    let tau = match (kind, args.tau) {
        (_, Some(t)) => t,
        (SchemeKind::Constant { .. }, None) => 1.0,
        (_, None) => {
            return Err(FbdeError::InvalidArgument(format!(
                "--tau is required by the {kind} scheme"
            )))
        }
    };
    LeveragingScheme::new(kind, tau, args.c_bound)
}

fn cmd_fit(args: &FitArgs) -> Result<()> {
    let spec = csv_spec(args)?;
    let scheme = scheme(args)?;
    let mut fit = FitConfig::new(args.rounds, scheme, args.seed);
    fit.tree = TreeConfig {
        max_depth: args.max_depth,
        min_leaf_count: args.min_leaf,
        c_bound: args.c_bound,
        leaf_smoothing: args.leaf_smoothing,
        leaf_value: match args.leaf {
            LeafArg::Sign => LeafValue::Sign,
            LeafArg::LogRatio => LeafValue::LogRatio,
            LeafArg::Proportion => LeafValue::Proportion,
        },
        balance_classes: true,
    };
    fit.negatives = match args.negatives {
        NegativesArg::Fresh => NegativeSampling::Fresh,
        NegativesArg::Pool => NegativeSampling::ReweightedPool,
    };
    fit.negatives_multiplier = args.negatives_multiplier;
    fit.p_smoothing = args.p_smoothing;
    fit.kl_eval = KlEval::Train;
    let cfg = RunConfig {
        fit,
        q0_smoothing: args.smoothing,
        folds: args.folds,
    };

    let mut manifest = RunManifest::new(
        "fit",
        json!({ "flags": args, "fit": &cfg.fit, "q0_smoothing": cfg.q0_smoothing }),
    );
    manifest.seed("root", args.seed);
    if args.folds.is_some() {
        manifest.seed("fold-shuffle", shuffle_seed(args.seed));
    }
    manifest.input(&args.data)?;
    let table = manifest.time("load", || RawTable::from_path(&args.data))?;
    let outcomes = manifest.time("fit", || run(&table, &spec, &cfg))?;

    let manifest_path = args.out.with_extension("manifest.json");
    let manifest_name = manifest_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned());
    let trace_base = args
        .trace
        .clone()
        .unwrap_or_else(|| args.out.with_extension("trace.csv"));
    for o in &outcomes {
        let (model_path, trace_path) = match args.folds {
            Some(_) => {
                let tag = format!("fold{}", o.fold);
                (with_suffix(&args.out, &tag), with_suffix(&trace_base, &tag))
            }
            None => (args.out.clone(), trace_base.clone()),
        };
        manifest.seed(format!("fit-{}", o.fold), fold_seed(args.seed, o.fold));
        let model = Model {
            density: o.result.density.clone(),
            scheme: Some(scheme),
            manifest: manifest_name.clone(),
        };
        model.save(&model_path)?;
        std::fs::write(&trace_path, o.result.trace.to_csv_string()?)?;
        manifest.output(&model_path)?;
        manifest.output(&trace_path)?;
        let last = o.result.trace.final_row();
        println!(
            "fold {}: rounds {}, rr {}, kl_train {}, kl_test {}",
            o.fold,
            o.result.density.num_rounds(),
            o.result.density.representation_rate_via_normalizers()?,
            fmt_kl(
                last.and_then(|r| r.kl_train)
                    .or(o.result.trace.kl_train_initial)
            ),
            fmt_kl(
                last.and_then(|r| r.kl_test)
                    .or(o.result.trace.kl_test_initial)
            ),
        );
    }
    manifest.save(&manifest_path)?;
    log::info!("wrote {}", manifest_path.display());
    Ok(())
}

fn fmt_kl(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "-".into())
}

fn encode_for(model: &Model, path: &Path) -> Result<Dataset> {
    let table = RawTable::from_path(path)?;
    encode_table(&table, model.density.schema())
}

#[derive(Serialize)]
struct Metrics {
    rounds: usize,
    rr_table: f64,
    rr_normalizers: f64,
    rr_difference: f64,
    sensitive_marginal: Vec<f64>,
    data_rr: f64,
    statistical_rate: Option<f64>,
    data_statistical_rate: Option<f64>,
    kl_unit: &'static str,
    kl_train: f64,
    kl_train_initial: f64,
    kl_test: Option<f64>,
    kl_test_initial: Option<f64>,
}

fn kl_or_inf(p: &TabularDensity, q: &TabularDensity) -> Result<f64> {
    fbde::engine::kl_or_infinite(p, q)
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let model = Model::load(&args.model)?;
    let bd = &model.density;
    let joint = bd.joint();
    let q0 = bd.initial().joint();
    let train = encode_for(&model, &args.data)?;
    let p_hat = TabularDensity::fit_empirical(&train, args.p_smoothing)?;
    let scale = if args.bits { 1.0 / LN_2 } else { 1.0 };

    let rr_table = representation_rate_of(&joint.sensitive_marginal())?;
    let rr_normalizers = bd.representation_rate_via_normalizers()?;
    let (sr, data_sr) = match bd.schema().target_index() {
        Some(y) => {
            let attr = bd.schema().attribute(y);
            let code = match &attr.kind {
                AttributeKind::Categorical { levels } => levels
                    .iter()
                    .position(|l| l == &args.positive)
                    .ok_or_else(|| FbdeError::UnseenCategory {
                        column: attr.name.clone(),
                        value: args.positive.clone(),
                    })?,
                AttributeKind::Binned { .. } => {
                    return Err(FbdeError::InvalidArgument(
                        "target must be categorical".into(),
                    ))
                }
            };
            (
                Some(statistical_rate(&joint, code)?),
                statistical_rate(&p_hat, code).ok(),
            )
        }
        None => (None, None),
    };
    let (kl_test, kl_test_initial) = match &args.test {
        Some(path) => {
            let test = encode_for(&model, path)?;
            let t_hat = TabularDensity::fit_empirical(&test, args.p_smoothing)?;
            (
                Some(kl_or_inf(&t_hat, &joint)? * scale),
                Some(kl_or_inf(&t_hat, &q0)? * scale),
            )
        }
        None => (None, None),
    };
    let metrics = Metrics {
        rounds: bd.num_rounds(),
        rr_table,
        rr_normalizers,
        rr_difference: (rr_table - rr_normalizers).abs(),
        sensitive_marginal: bd.sensitive_marginal(),
        data_rr: representation_rate_of(&p_hat.sensitive_marginal())?,
        statistical_rate: sr,
        data_statistical_rate: data_sr,
        kl_unit: if args.bits { "bits" } else { "nats" },
        kl_train: kl_or_inf(&p_hat, &joint)? * scale,
        kl_train_initial: kl_or_inf(&p_hat, &q0)? * scale,
        kl_test,
        kl_test_initial,
    };
    write_json(&metrics, args.out.as_deref())
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let params = MixtureParams {
        mu: [args.mu0, args.mu1],
        sigma: [args.sigma0, args.sigma1],
        s: args.s,
        n: args.n,
        seed: args.seed,
    };
    let points = generate_mixture(&params)?;
    let mut buf = Vec::new();
    write_mixture_csv(&points, &mut buf)?;
    std::fs::write(&args.out, buf)?;
    log::info!("wrote {} rows to {}", points.len(), args.out.display());
    Ok(())
}

fn cmd_guarantees(args: &GuaranteeArgs) -> Result<()> {
    let model = Model::load(&args.model)?;
    let scheme = model
        .scheme
        .ok_or_else(|| FbdeError::InvalidArgument("model file records no scheme".into()))?;
    let mut trace = Trace::read_csv(std::fs::File::open(&args.trace)?)?;
    if let Some(path) = &args.data {
        let data = encode_for(&model, path)?;
        let p_hat = TabularDensity::fit_empirical(&data, args.p_smoothing)?;
        trace = replay_trace(&model.density, &scheme, &p_hat, None)?;
    }
    let report = GuaranteeReport::build(&model.density, &scheme, &trace)?;
    write_json(&report, args.out.as_deref())?;
    if !report.all_ok {
        log::warn!("at least one asserted bound failed");
        if args.strict {
            return Err(FbdeError::InvalidArgument("guarantee check failed".into()));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FBDE_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Guarantees(a) => cmd_guarantees(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
