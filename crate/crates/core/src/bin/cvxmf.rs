//! Command-line front end: generate synthetic data, fit any of the four
//! methods, evaluate a saved model, and run the scaling benchmark.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 resource guard.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use cvxmf_core::baselines::{batch_cvxmf, online_mf_fit};
use cvxmf_core::config::{ModelConfig, Variant};
use cvxmf_core::data::{
    gen_mixture, read_csv, stream, write_csv, CsvOptions, Dataset, MixtureSpec, Provenance,
    StreamOrder,
};
use cvxmf_core::error::Error;
use cvxmf_core::metrics::{approx_error, basis_recovery, clustering_accuracy, predict_clusters};
use cvxmf_core::model::MatrixData;
use cvxmf_core::online;
use cvxmf_core::report::{records_to_jsonl, trace_to_jsonl, MetricsReport};

#[derive(Parser)]
#[command(
    name = "cvxmf",
    version,
    about = "Streaming convex matrix factorization with representative regions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a truncated-Gaussian-mixture dataset (CSV plus a
    /// `<out>.spec.json` sidecar recording the generator).
    Gen(GenArgs),
    /// Fit a method to a CSV dataset; writes model JSON, a JSONL step trace
    /// and a metrics JSON.
    Fit(FitArgs),
    /// Evaluate a saved model against a CSV dataset.
    Eval(EvalArgs),
    /// Run a (method x size) benchmark grid and append rows to a CSV.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Mixture components.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Sample dimension.
    #[arg(long, default_value_t = 10)]
    m: usize,
    /// Number of samples.
    #[arg(long, default_value_t = 2500)]
    n: usize,
    /// Covariance scale (covariance is cov * I). 1.0 gives well-separated
    /// clusters, 2.5 overlapping ones.
    #[arg(long, default_value_t = 1.0)]
    cov: f64,
    /// Rejection radius in standard deviations.
    #[arg(long, default_value_t = 3.0)]
    truncation: f64,
    /// RNG seed (means and draws).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path. Rows are samples; the final column is the component
    /// label.
    #[arg(long)]
    out: PathBuf,
    /// Skip the header line.
    #[arg(long)]
    no_header: bool,
}

#[derive(Args)]
struct FitArgs {
    /// Input dataset CSV (rows are samples).
    #[arg(long = "in")]
    input: PathBuf,
    /// online-cvxmf-rr | online-cvxmf-ru | online-cvxmf | online-mf |
    /// batch-cvxmf
    #[arg(long, default_value = "online-cvxmf-rr")]
    method: String,
    /// Representative-region variant for plain `online-cvxmf`.
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    k: Option<usize>,
    /// Sparsity constant; lambda = c / sqrt(m).
    #[arg(long = "lambda-c")]
    lambda_c: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Initialization buffer size.
    #[arg(long = "init-n")]
    init_n: Option<usize>,
    /// Online steps after initialization (batch: alternations). Defaults to
    /// one pass over the remaining samples (batch: 50 alternations).
    #[arg(long)]
    iters: Option<usize>,
    /// The input has a header line.
    #[arg(long)]
    header: bool,
    /// The final input column holds integer labels.
    #[arg(long)]
    labels: bool,
    /// Stream the dataset in seeded shuffled order instead of file order.
    #[arg(long)]
    shuffle: bool,
    /// JSON config file; flags override it, it overrides built-in defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Generator sidecar for basis-recovery evaluation; defaults to
    /// `<in>.spec.json` when present.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Model JSON output.
    #[arg(long)]
    out: PathBuf,
    /// Step-trace JSONL output.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Metrics JSON output; defaults to `<out>.metrics.json`.
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Input dataset CSV.
    #[arg(long = "in")]
    input: PathBuf,
    /// Model JSON produced by `fit`.
    #[arg(long)]
    model: PathBuf,
    /// Metrics JSON output.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    header: bool,
    #[arg(long)]
    labels: bool,
    /// Generator sidecar for basis recovery; defaults to `<in>.spec.json`.
    #[arg(long)]
    spec: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated dataset sizes.
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<usize>,
    /// Comma-separated methods.
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 10)]
    m: usize,
    #[arg(long, default_value_t = 1.0)]
    cov: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cap on online steps / batch alternations per cell (default: one pass
    /// for online methods, 50 alternations for batch).
    #[arg(long)]
    iters: Option<usize>,
    /// Output CSV; rows are appended after a header.
    #[arg(long)]
    out: PathBuf,
}

/// Partial configuration accepted via --config; flags win over these.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    k: Option<usize>,
    lambda_c: Option<f64>,
    elastic_kappa: Option<f64>,
    ridge_kappa1: Option<f64>,
    init_n: Option<usize>,
    seed: Option<u64>,
    variant: Option<Variant>,
    iters: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::ResourceGuard { .. } => ExitCode::from(3),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn cmd_gen(args: GenArgs) -> Result<(), Error> {
    let mut spec = MixtureSpec::with_random_means(args.k, args.m, args.cov, 0.0, 20.0, args.seed);
    spec.truncation = args.truncation;
    let ds = gen_mixture(&spec, args.n, args.seed)?;
    write_csv(&ds, &args.out, !args.no_header)?;
    let sidecar = sidecar_path(&args.out);
    let provenance = Provenance::Mixture {
        spec,
        seed: args.seed,
    };
    std::fs::write(&sidecar, serde_json::to_string_pretty(&provenance)?)?;
    println!(
        "wrote {} samples to {} (sidecar {})",
        ds.n(),
        args.out.display(),
        sidecar.display()
    );
    Ok(())
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_os_string();
    name.push(".spec.json");
    PathBuf::from(name)
}

fn sibling_path(base: &Path, suffix: &str) -> PathBuf {
    let mut name = base.as_os_str().to_os_string();
    name.push(suffix);
    PathBuf::from(name)
}

/// Means recorded in a generator sidecar, if one is available.
fn load_means(explicit: Option<&Path>, input: &Path) -> Option<Array2<f64>> {
    let path = match explicit {
        Some(p) => p.to_path_buf(),
        None => sidecar_path(input),
    };
    let text = std::fs::read_to_string(path).ok()?;
    let provenance: Provenance = serde_json::from_str(&text).ok()?;
    match provenance {
        Provenance::Mixture { spec, .. } => Some(means_matrix(&spec)),
        _ => None,
    }
}

fn means_matrix(spec: &MixtureSpec) -> Array2<f64> {
    let mut means = Array2::<f64>::zeros((spec.m, spec.k));
    for (j, mu) in spec.means.iter().enumerate() {
        for (i, &v) in mu.iter().enumerate() {
            means[[i, j]] = v;
        }
    }
    means
}

fn load_file_config(path: Option<&Path>) -> Result<FileConfig, Error> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            Ok(serde_json::from_str(&text)?)
        }
    }
}

struct ResolvedFit {
    config: ModelConfig,
    iters: Option<usize>,
}

/// Flags > config file > built-in defaults.
#[allow(clippy::too_many_arguments)]
fn resolve_config(
    m: usize,
    k: Option<usize>,
    lambda_c: Option<f64>,
    seed: Option<u64>,
    init_n: Option<usize>,
    variant: Option<Variant>,
    iters: Option<usize>,
    file: &FileConfig,
) -> ResolvedFit {
    let mut config = ModelConfig::new(k.or(file.k).unwrap_or(5), m);
    config = config.with_lambda_c(lambda_c.or(file.lambda_c).unwrap_or(0.2));
    if let Some(kappa) = file.elastic_kappa {
        config.elastic_kappa = kappa;
    }
    if let Some(kappa1) = file.ridge_kappa1 {
        config.ridge_kappa1 = kappa1;
    }
    config.init_sample_count = init_n.or(file.init_n).unwrap_or(150);
    config.seed = seed.or(file.seed).unwrap_or(0);
    config.variant = variant.or(file.variant).unwrap_or(Variant::Restricted);
    ResolvedFit {
        config,
        iters: iters.or(file.iters),
    }
}

/// A method name as accepted by --method / --methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Method {
    OnlineCvxmf(Option<Variant>),
    OnlineMf,
    BatchCvxmf,
}

impl Method {
    fn parse(name: &str) -> Result<Self, Error> {
        match name {
            "online-cvxmf" => Ok(Method::OnlineCvxmf(None)),
            "online-cvxmf-ru" => Ok(Method::OnlineCvxmf(Some(Variant::Unrestricted))),
            "online-cvxmf-rr" => Ok(Method::OnlineCvxmf(Some(Variant::Restricted))),
            "online-mf" => Ok(Method::OnlineMf),
            "batch-cvxmf" => Ok(Method::BatchCvxmf),
            other => Err(Error::InvalidConfig(format!(
                "unknown method {other:?}; expected online-cvxmf[-ru|-rr], online-mf or batch-cvxmf"
            ))),
        }
    }

    fn variant(&self) -> Option<Variant> {
        match self {
            Method::OnlineCvxmf(v) => *v,
            _ => None,
        }
    }
}

const DEFAULT_BATCH_ALTERNATIONS: usize = 50;

/// Everything a finished fit hands to the reporting stage.
struct FitOutcome {
    label: String,
    dictionary: Array2<f64>,
    model_json: String,
    trace_jsonl: String,
}

fn run_method(
    method: Method,
    ds: &Dataset,
    config: &ModelConfig,
    iters: Option<usize>,
    shuffle: bool,
) -> Result<FitOutcome, Error> {
    let order = if shuffle {
        StreamOrder::Shuffled
    } else {
        StreamOrder::AsIs
    };
    let online_steps = iters.unwrap_or_else(|| ds.n().saturating_sub(config.init_sample_count));
    match method {
        Method::OnlineCvxmf(_) => {
            let label = format!("online-cvxmf-{}", config.variant);
            let samples = stream(ds, order, config.seed);
            let (model, reports) = online::fit(samples, config, online_steps)?;
            Ok(FitOutcome {
                dictionary: model.dict.columns().clone(),
                model_json: model.to_json()?,
                trace_jsonl: trace_to_jsonl(&reports, &label)?,
                label,
            })
        }
        Method::OnlineMf => {
            let samples = stream(ds, order, config.seed);
            let (model, reports) = online_mf_fit(samples, config, online_steps)?;
            let doc = BaselineModelDoc::new(config, &model.d, &model.stats);
            Ok(FitOutcome {
                label: "online-mf".to_string(),
                model_json: serde_json::to_string_pretty(&doc)?,
                trace_jsonl: trace_to_jsonl(&reports, "online-mf")?,
                dictionary: model.d,
            })
        }
        Method::BatchCvxmf => {
            let alternations = iters.unwrap_or(DEFAULT_BATCH_ALTERNATIONS);
            let result = batch_cvxmf(&ds.x.view(), config, alternations)?;
            let doc = BaselineModelDoc::new(config, result.dictionary.columns(), &result.stats);
            Ok(FitOutcome {
                label: "batch-cvxmf".to_string(),
                dictionary: result.dictionary.columns().clone(),
                model_json: serde_json::to_string_pretty(&doc)?,
                trace_jsonl: records_to_jsonl(&result.trace)?,
            })
        }
    }
}

/// Model file for the baselines: same top-level keys as the convex model;
/// the hull fields stay empty because these methods keep none.
#[derive(Serialize, Deserialize)]
struct BaselineModelDoc {
    config: ModelConfig,
    #[serde(rename = "D")]
    d: MatrixData,
    weights: Vec<Vec<f64>>,
    rep_sets: Vec<MatrixData>,
    #[serde(rename = "A")]
    a: MatrixData,
    #[serde(rename = "B")]
    b: MatrixData,
    t: u64,
    loss_const: f64,
}

impl BaselineModelDoc {
    fn new(config: &ModelConfig, d: &Array2<f64>, stats: &cvxmf_core::SufficientStats) -> Self {
        Self {
            config: config.clone(),
            d: MatrixData::from_array(d),
            weights: Vec::new(),
            rep_sets: Vec::new(),
            a: MatrixData::from_array(&stats.a),
            b: MatrixData::from_array(&stats.b),
            t: stats.t,
            loss_const: stats.loss_const,
        }
    }
}

/// The fields eval needs from any model file.
#[derive(Deserialize)]
struct ModelHeader {
    config: ModelConfig,
    #[serde(rename = "D")]
    d: MatrixData,
}

fn evaluate(
    ds: &Dataset,
    dictionary: &Array2<f64>,
    config: &ModelConfig,
    means: Option<&Array2<f64>>,
) -> Result<MetricsReport, Error> {
    let started = Instant::now();
    let l2 = approx_error(
        &ds.x.view(),
        &dictionary.view(),
        config.lambda,
        config.elastic_kappa,
        &config.lasso,
    )?;
    let accuracy = match &ds.labels {
        Some(truth) => {
            let pred = predict_clusters(
                &ds.x.view(),
                &dictionary.view(),
                config.lambda,
                config.elastic_kappa,
                &config.lasso,
            )?;
            Some(clustering_accuracy(&pred, truth)?)
        }
        None => None,
    };
    let recovery = match means {
        Some(mu) if mu.dim() == dictionary.dim() => {
            Some(basis_recovery(&dictionary.view(), &mu.view())?)
        }
        _ => None,
    };
    Ok(MetricsReport {
        l2,
        accuracy,
        basis_recovery: recovery,
        delta: None,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

fn cmd_fit(args: FitArgs) -> Result<(), Error> {
    let method = Method::parse(&args.method)?;
    let ds = read_csv(
        &args.input,
        &CsvOptions {
            header: args.header,
            label_column: args.labels,
        },
    )?;
    ds.validate()?;
    let file_config = load_file_config(args.config.as_deref())?;
    let resolved = resolve_config(
        ds.m(),
        args.k,
        args.lambda_c,
        args.seed,
        args.init_n,
        method.variant().or(args.variant),
        args.iters,
        &file_config,
    );
    let config = resolved.config;
    config.validate()?;

    let outcome = run_method(method, &ds, &config, resolved.iters, args.shuffle)?;
    std::fs::write(&args.out, &outcome.model_json)?;
    if let Some(trace_path) = &args.trace {
        std::fs::write(trace_path, &outcome.trace_jsonl)?;
    }

    let means = load_means(args.spec.as_deref(), &args.input);
    let metrics = evaluate(&ds, &outcome.dictionary, &config, means.as_ref())?;
    let metrics_path = args
        .metrics
        .unwrap_or_else(|| sibling_path(&args.out, ".metrics.json"));
    std::fs::write(&metrics_path, serde_json::to_string_pretty(&metrics)?)?;
    println!(
        "fit {} on {}: l2 = {:.6}, model {}",
        outcome.label,
        args.input.display(),
        metrics.l2,
        args.out.display()
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), Error> {
    let ds = read_csv(
        &args.input,
        &CsvOptions {
            header: args.header,
            label_column: args.labels,
        },
    )?;
    ds.validate()?;
    let text = std::fs::read_to_string(&args.model)?;
    let header: ModelHeader = serde_json::from_str(&text)?;
    let dictionary = header.d.into_array()?;
    if dictionary.nrows() != ds.m() {
        return Err(Error::DimensionMismatch(format!(
            "model dimension {} vs dataset dimension {}",
            dictionary.nrows(),
            ds.m()
        )));
    }
    let means = load_means(args.spec.as_deref(), &args.input);
    let metrics = evaluate(&ds, &dictionary, &header.config, means.as_ref())?;
    std::fs::write(&args.out, serde_json::to_string_pretty(&metrics)?)?;
    println!(
        "eval {} on {}: l2 = {:.6}",
        args.model.display(),
        args.input.display(),
        metrics.l2
    );
    Ok(())
}

#[derive(Serialize)]
struct BenchRow {
    method: String,
    n: usize,
    seed: u64,
    wall_time_s: String,
    l2: String,
    accuracy: String,
    status: String,
}

fn csv_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Csv {
        path: path.display().to_string(),
        kind: cvxmf_core::error::CsvErrorKind::Other(e.to_string()),
    }
}

fn cmd_bench(args: BenchArgs) -> Result<(), Error> {
    if args.sizes.is_empty() || args.methods.is_empty() {
        return Err(Error::InvalidConfig(
            "--sizes and --methods must be non-empty".into(),
        ));
    }
    let methods: Vec<(String, Method)> = args
        .methods
        .iter()
        .map(|name| Method::parse(name).map(|m| (name.clone(), m)))
        .collect::<Result<_, _>>()?;

    let mut writer = csv::Writer::from_path(&args.out).map_err(|e| csv_error(&args.out, e))?;
    // One mixture spec for the whole grid so methods and sizes stay
    // comparable; draws are re-seeded per size.
    let spec = MixtureSpec::with_random_means(args.k, args.m, args.cov, 0.0, 20.0, args.seed);
    let means = means_matrix(&spec);
    for &n in &args.sizes {
        let data_seed = args.seed.wrapping_add(n as u64);
        let ds = gen_mixture(&spec, n, data_seed)?;
        for (name, method) in &methods {
            let resolved = resolve_config(
                ds.m(),
                Some(args.k),
                None,
                Some(args.seed),
                None,
                method.variant(),
                args.iters,
                &FileConfig::default(),
            );
            let config = resolved.config;
            let started = Instant::now();
            let row = match run_method(*method, &ds, &config, resolved.iters, false) {
                Ok(outcome) => {
                    let wall = started.elapsed().as_secs_f64();
                    let metrics = evaluate(&ds, &outcome.dictionary, &config, Some(&means))?;
                    BenchRow {
                        method: name.clone(),
                        n,
                        seed: args.seed,
                        wall_time_s: format!("{wall}"),
                        l2: format!("{}", metrics.l2),
                        accuracy: metrics.accuracy.map(|a| format!("{a}")).unwrap_or_default(),
                        status: "ok".to_string(),
                    }
                }
                Err(e) => BenchRow {
                    method: name.clone(),
                    n,
                    seed: args.seed,
                    wall_time_s: String::new(),
                    l2: String::new(),
                    accuracy: String::new(),
                    status: format!("error: {e}"),
                },
            };
            writer.serialize(&row).map_err(|e| csv_error(&args.out, e))?;
            writer.flush()?;
        }
    }
    println!(
        "bench wrote {} rows to {}",
        args.sizes.len() * methods.len(),
        args.out.display()
    );
    Ok(())
}
