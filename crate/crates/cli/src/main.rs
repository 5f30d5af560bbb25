//! Command-line front end for the spatial regression toolkit.
//!
//! Subcommands cover the full workflow: `simulate` writes one synthetic
//! dataset, `benchmark` runs the replicated method comparison, `rates`
//! tabulates the convergence-rate bound along the tuned architecture
//! schedule, `housing` runs the cross-validated comparison on the California
//! housing data, and `fit` trains a single network on a user CSV.
//!
//! Exit codes: 0 on success (including `--help`/`--version`), 1 for
//! command-line usage errors, 2 for runtime failures (bad data, failed
//! generation, I/O).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use spatialdnn::csvio::{self, fmt_f64};
use spatialdnn::housing::{self, HousingOptions};
use spatialdnn::linalg::Mat;
use spatialdnn::netcore::{self, NetworkShape, TrainConfig};
use spatialdnn::simbench::{self, BenchmarkOptions, DesignSpec, DomainMode, Method, SplitData};
use spatialdnn::theory::{self, BoundInputs};
use spatialdnn::{Error, Result};

#[derive(Parser)]
#[command(
    name = "spatialdnn",
    version,
    about = "Semiparametric spatial regression with sparse deep networks",
    arg_required_else_help = true
)]
struct Cli {
    /// Read flag defaults from a `key = value` file; explicit flags win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads (env: SPATIALDNN_THREADS). Defaults to all cores.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one synthetic dataset and write train/test CSV files.
    Simulate(SimulateArgs),
    /// Run R seeded replicates of each scenario and compare methods.
    Benchmark(BenchmarkArgs),
    /// Tabulate the error-rate bound along the tuned depth/width schedule.
    Rates(RatesArgs),
    /// Cross-validated method comparison on the California housing data.
    Housing(HousingArgs),
    /// Train one sparse ReLU network on a numeric CSV and save its weights.
    Fit(FitArgs),
}

impl Command {
    fn stage(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Benchmark(_) => "benchmark",
            Command::Rates(_) => "rates",
            Command::Housing(_) => "housing",
            Command::Fit(_) => "fit",
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum DomainArg {
    /// Unit domain; locations densify as n grows.
    Fixed,
    /// Domain size D grows with n; sampling density stays constant.
    Expanding,
}

#[derive(clap::Args)]
struct SimulateArgs {
    /// 1 = line locations with deterministic covariates; 2 = planar grid
    /// with correlated random covariates.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    design: u8,

    #[arg(long, value_enum, default_value_t = DomainArg::Fixed)]
    domain: DomainArg,

    /// Training size; a held-out split of n/10 points is written alongside.
    #[arg(long)]
    n: usize,

    /// Domain size for the expanding mode (the fixed mode pins it to 1).
    #[arg(long = "D", value_name = "SIZE")]
    domain_size: Option<f64>,

    /// Range parameter of the exponential field covariance.
    #[arg(long, default_value_t = 0.5)]
    rho: f64,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Nugget standard deviation (0 disables measurement noise).
    #[arg(long, default_value_t = 1.0)]
    noise_sd: f64,

    /// Field variance (0 disables the spatially correlated error).
    #[arg(long, default_value_t = 1.0)]
    field_variance: f64,

    /// Pin the second design's mean coefficients to a separate seed.
    #[arg(long)]
    beta_seed: Option<u64>,

    /// Output directory for train.csv and test.csv.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(clap::Args)]
struct BenchmarkArgs {
    /// 1 = line locations with deterministic covariates; 2 = planar grid
    /// with correlated random covariates.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    design: u8,

    #[arg(long, value_enum, default_value_t = DomainArg::Fixed)]
    domain: DomainArg,

    /// Training sizes; repeat the flag (--n 100 --n 300) for several
    /// scenarios, or comma-join the values in a config file.
    #[arg(long, required = true)]
    n: Vec<usize>,

    /// Domain sizes paired positionally with --n in the expanding mode
    /// (either one per size or a single shared value).
    #[arg(long = "D", value_name = "SIZE")]
    domain_size: Vec<f64>,

    /// Range parameter of the exponential field covariance.
    #[arg(long, default_value_t = 0.5)]
    rho: f64,

    #[arg(long, default_value_t = 20)]
    replicates: usize,

    /// Comma-separated subset of dnn,nw,gam.
    #[arg(long, default_value = "dnn,nw,gam")]
    methods: String,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Nugget standard deviation (0 disables measurement noise).
    #[arg(long, default_value_t = 1.0)]
    noise_sd: f64,

    /// Field variance (0 disables the spatially correlated error).
    #[arg(long, default_value_t = 1.0)]
    field_variance: f64,

    /// Pin the second design's mean coefficients across replicates.
    #[arg(long)]
    beta_seed: Option<u64>,

    /// Skip the per-design architecture search; use the default network.
    #[arg(long)]
    no_select: bool,

    /// Epoch budget for the final per-replicate network fits. The default
    /// stays deliberately short — with a correlated spatial error the early
    /// stop keeps the network from absorbing the field realisation — but a
    /// larger budget pays off when the mean function dominates the error.
    #[arg(long)]
    dnn_epochs: Option<usize>,

    /// Output directory for summary.csv, replicates.csv and (when the run
    /// produces envelope bands) bands.csv.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(clap::Args)]
struct RatesArgs {
    /// Smoothness of the additive component functions.
    #[arg(long, default_value_t = 2.0)]
    beta_h: f64,

    /// Smoothness of the scalar link applied to their sum.
    #[arg(long, default_value_t = 1.0)]
    beta_phi: f64,

    /// Covariate dimension.
    #[arg(long, default_value_t = 5)]
    dim: usize,

    #[arg(long, default_value_t = 100)]
    n_min: usize,

    #[arg(long, default_value_t = 1_000_000)]
    n_max: usize,

    /// Number of sample sizes, geometrically spaced over [n-min, n-max].
    #[arg(long, default_value_t = 17)]
    points: usize,

    /// Sparsity budget entering the estimation-error term.
    #[arg(long, default_value_t = 1.0)]
    tau: f64,

    /// Nugget standard deviation entering the bound.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,

    /// Additive stand-in for the network approximation gap.
    #[arg(long, default_value_t = 0.0)]
    delta_proxy: f64,

    /// Output directory for rates.csv; omit to print the table instead.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct HousingArgs {
    /// CSV with columns longitude, latitude, median_age (alias
    /// housing_median_age), total_rooms, total_bedrooms, population,
    /// households, median_income, median_house_value (any order).
    #[arg(long, value_name = "FILE")]
    data: PathBuf,

    /// Comma-separated subset of dnn,nw,gam.
    #[arg(long, default_value = "dnn,nw,gam")]
    methods: String,

    #[arg(long, default_value_t = 10)]
    folds: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Skip the per-fold architecture search; use the default network.
    #[arg(long)]
    no_select: bool,

    /// Row cap for the tuning subsample (final fits use the full fold).
    #[arg(long, default_value_t = 1000)]
    tune_cap: usize,

    /// Epoch budget for the final per-fold network fits.
    #[arg(long)]
    dnn_epochs: Option<usize>,

    /// Output directory for folds.csv, summary.csv and predictions.csv.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(clap::Args)]
struct FitArgs {
    /// Headered numeric CSV; rows are observations.
    #[arg(long, value_name = "FILE")]
    data: PathBuf,

    /// Response column name; defaults to the last column. All other columns
    /// are covariates, used exactly as given (no internal rescaling).
    #[arg(long)]
    response: Option<String>,

    #[arg(long, default_value_t = 3)]
    depth: usize,

    #[arg(long, default_value_t = 32)]
    width: usize,

    #[arg(long, default_value_t = 500)]
    epochs: usize,

    #[arg(long, default_value_t = 1e-3)]
    learning_rate: f64,

    /// L1 penalty weight (0 disables the sparsity penalty).
    #[arg(long, default_value_t = 0.0)]
    l1: f64,

    #[arg(long, default_value_t = 32)]
    batch_size: usize,

    /// Independent restarts; the lowest-loss network is kept.
    #[arg(long, default_value_t = 3)]
    restarts: usize,

    /// Prediction-time output bound.
    #[arg(long, default_value_t = 1000.0)]
    clamp: f64,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Output directory for model.json.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let raw: Vec<String> = std::env::args().collect();
    let args = match augment_with_config(raw) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error[config]: {msg}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    init_threads(cli.threads);
    let stage = cli.command.stage();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{stage}]: {e}");
            ExitCode::from(2)
        }
    }
}

/// Keys whose comma-separated config values expand to repeated flags.
const REPEATABLE_KEYS: &[&str] = &["n", "D"];

/// Locates `--config <file>` / `--config=<file>` in the raw arguments.
fn find_config_path(args: &[String]) -> Option<PathBuf> {
    for (i, arg) in args.iter().enumerate() {
        if arg == "--config" {
            return args.get(i + 1).map(PathBuf::from);
        }
        if let Some(rest) = arg.strip_prefix("--config=") {
            return Some(PathBuf::from(rest));
        }
    }
    None
}

/// Appends flags from the config file for every key the command line does
/// not already set. `key = true` becomes a bare switch, `key = false` is
/// dropped, and comma-separated values of repeatable keys (`n`, `D`) expand
/// to one flag per item. Unknown keys surface as ordinary usage errors.
fn augment_with_config(mut args: Vec<String>) -> std::result::Result<Vec<String>, String> {
    let Some(path) = find_config_path(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!(
                "{}:{}: expected `key = value`, got `{line}`",
                path.display(),
                idx + 1
            ));
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key.is_empty() {
            return Err(format!("{}:{}: empty key", path.display(), idx + 1));
        }
        let flag = format!("--{key}");
        let prefixed = format!("{flag}=");
        if args.iter().any(|a| *a == flag || a.starts_with(&prefixed)) {
            continue;
        }
        match value {
            "true" => args.push(flag),
            "false" => {}
            _ if REPEATABLE_KEYS.contains(&key.as_str()) => {
                for piece in value.split(',') {
                    let piece = piece.trim();
                    if piece.is_empty() {
                        continue;
                    }
                    args.push(flag.clone());
                    args.push(piece.to_string());
                }
            }
            _ => {
                args.push(flag);
                args.push(value.to_string());
            }
        }
    }
    Ok(args)
}

#[cfg(feature = "parallel")]
fn init_threads(flag: Option<usize>) {
    let from_env = std::env::var("SPATIALDNN_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    if let Some(n) = flag.or(from_env) {
        if n >= 1 {
            // Ignore the error if a global pool already exists.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn init_threads(_flag: Option<usize>) {}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate(a) => run_simulate(a),
        Command::Benchmark(a) => run_benchmark_cmd(a),
        Command::Rates(a) => run_rates(a),
        Command::Housing(a) => run_housing(a),
        Command::Fit(a) => run_fit(a),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    csvio::write_atomic(&path, contents)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn build_spec(
    design: u8,
    domain: DomainArg,
    n: usize,
    size: Option<f64>,
    rho: f64,
    seed: u64,
    noise_sd: f64,
    field_variance: f64,
    beta_seed: Option<u64>,
) -> Result<DesignSpec> {
    let (mode, d) = match domain {
        DomainArg::Fixed => {
            if size.is_some() {
                return Err(Error::invalid("--D applies only to --domain expanding"));
            }
            (DomainMode::Fixed, 1.0)
        }
        DomainArg::Expanding => {
            let d = size.ok_or_else(|| Error::invalid("--domain expanding requires --D"))?;
            (DomainMode::Expanding, d)
        }
    };
    let mut spec = DesignSpec::new(design, mode, n, d, rho, seed)?;
    spec.noise_sd = noise_sd;
    spec.field_variance = field_variance;
    spec.beta_seed = beta_seed;
    spec.validate()?;
    Ok(spec)
}

fn parse_method_list(s: &str) -> Result<Vec<Method>> {
    let mut out = Vec::new();
    for piece in s.split(',') {
        let piece = piece.trim();
        if piece.is_empty() {
            continue;
        }
        out.push(Method::parse(piece)?);
    }
    if out.is_empty() {
        return Err(Error::invalid("at least one method is required"));
    }
    Ok(out)
}

/// Renders a split as CSV: location coordinates, covariates, the observed
/// response, and the noise-free mean.
fn split_csv(split: &SplitData) -> String {
    let k = split.covariates.n_cols();
    let mut header: Vec<String> = vec!["s1".into(), "s2".into()];
    for j in 1..=k {
        header.push(format!("x{j}"));
    }
    header.push("y".into());
    header.push("f0".into());
    let mut out = header.join(",");
    out.push('\n');
    for i in 0..split.len() {
        let p = split.locations.point(i);
        let mut fields = vec![fmt_f64(p[0]), fmt_f64(p[1])];
        for j in 0..k {
            fields.push(fmt_f64(split.covariates.get(i, j)));
        }
        fields.push(fmt_f64(split.responses[i]));
        match &split.truth {
            Some(t) => fields.push(fmt_f64(t[i])),
            None => fields.push(String::new()),
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

fn run_simulate(a: SimulateArgs) -> Result<()> {
    let spec = build_spec(
        a.design,
        a.domain,
        a.n,
        a.domain_size,
        a.rho,
        a.seed,
        a.noise_sd,
        a.field_variance,
        a.beta_seed,
    )?;
    let data = simbench::generate(&spec)?;
    ensure_dir(&a.out)?;
    write_out(&a.out, "train.csv", &split_csv(&data.train))?;
    write_out(&a.out, "test.csv", &split_csv(&data.test))?;
    if data.regenerated > 0 {
        println!("redrew {} covariate rows near the guarded singularity", data.regenerated);
    }
    Ok(())
}

fn run_benchmark_cmd(a: BenchmarkArgs) -> Result<()> {
    let methods = parse_method_list(&a.methods)?;
    let sizes: Vec<Option<f64>> = match a.domain {
        DomainArg::Fixed => {
            if !a.domain_size.is_empty() {
                return Err(Error::invalid("--D applies only to --domain expanding"));
            }
            vec![None; a.n.len()]
        }
        DomainArg::Expanding => match a.domain_size.len() {
            0 => return Err(Error::invalid("--domain expanding requires --D")),
            1 => vec![Some(a.domain_size[0]); a.n.len()],
            l if l == a.n.len() => a.domain_size.iter().copied().map(Some).collect(),
            l => {
                return Err(Error::invalid(format!(
                    "--D given {l} times but --n {} times; give one --D per --n or a single shared value",
                    a.n.len()
                )));
            }
        },
    };
    let mut specs = Vec::with_capacity(a.n.len());
    for (&n, &size) in a.n.iter().zip(&sizes) {
        specs.push(build_spec(
            a.design,
            a.domain,
            n,
            size,
            a.rho,
            a.seed,
            a.noise_sd,
            a.field_variance,
            a.beta_seed,
        )?);
    }
    let mut options = BenchmarkOptions {
        dnn_select: !a.no_select,
        ..BenchmarkOptions::default()
    };
    if let Some(epochs) = a.dnn_epochs {
        options.dnn_config.epochs = epochs;
    }
    let result = simbench::run_benchmark(&specs, &methods, a.replicates, a.seed, &options)?;
    ensure_dir(&a.out)?;
    write_out(&a.out, "summary.csv", &simbench::summary_csv(&result))?;
    write_out(&a.out, "replicates.csv", &simbench::replicates_csv(&result))?;
    if !result.bands.is_empty() {
        write_out(&a.out, "bands.csv", &simbench::bands_csv(&result))?;
    }
    for row in &result.summary.rows {
        println!(
            "scenario {} (design {}, {} domain, n={}) {}: mean estimation mse {:.4}, \
             mean prediction mse {:.4} ({}/{} ok)",
            row.design_index,
            row.spec.design,
            row.spec.domain_mode.as_str(),
            row.spec.n,
            row.method.as_str(),
            row.mean_msee,
            row.mean_mspe,
            row.replicates_ok,
            row.replicates_total
        );
    }
    Ok(())
}

fn run_rates(a: RatesArgs) -> Result<()> {
    if a.points < 2 {
        return Err(Error::invalid("--points must be at least 2"));
    }
    if a.n_min < 2 || a.n_max < a.n_min {
        return Err(Error::invalid("need 2 <= n-min <= n-max"));
    }
    let spec = theory::gam_composition_spec(a.dim, a.beta_h, a.beta_phi)?;
    let summary = theory::intrinsic(&spec);
    let ln_min = (a.n_min as f64).ln();
    let ln_max = (a.n_max as f64).ln();
    let mut ns: Vec<usize> = (0..a.points)
        .map(|k| {
            let t = k as f64 / (a.points - 1) as f64;
            (ln_min + t * (ln_max - ln_min)).exp().round() as usize
        })
        .collect();
    ns.dedup();
    let mut out =
        String::from("n,L,N,depth_term,width_term,estimation_term,proxy_term,total\n");
    for n in ns {
        let (l, n_width) = theory::rate_schedule(n, &summary)?;
        let inputs = BoundInputs {
            n,
            tau: a.tau,
            l,
            n_width,
            d: a.dim,
            delta: 1.0,
            epsilon: 1.0,
            sigma: a.sigma,
            tr_gamma: n as f64,
            tr_gamma_sq: n as f64,
        };
        let terms = theory::varsigma_rate(&inputs, &summary, a.delta_proxy)?;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            n,
            l,
            n_width,
            fmt_f64(terms.depth_term),
            fmt_f64(terms.width_term),
            fmt_f64(terms.estimation_term),
            fmt_f64(terms.proxy_term),
            fmt_f64(terms.total())
        ));
    }
    match &a.out {
        Some(dir) => {
            ensure_dir(dir)?;
            write_out(dir, "rates.csv", &out)?;
        }
        None => print!("{out}"),
    }
    Ok(())
}

fn run_housing(a: HousingArgs) -> Result<()> {
    let methods = parse_method_list(&a.methods)?;
    if a.folds < 2 {
        return Err(Error::invalid("--folds must be at least 2"));
    }
    let loaded = housing::load_csv(&a.data)?;
    println!(
        "loaded {} records ({} dropped) from {}",
        loaded.records.len(),
        loaded.dropped,
        a.data.display()
    );
    let mut options = HousingOptions {
        select: !a.no_select,
        tune_cap: a.tune_cap,
        ..HousingOptions::default()
    };
    if let Some(epochs) = a.dnn_epochs {
        options.dnn_config.epochs = epochs;
    }
    let mut reports = Vec::with_capacity(methods.len());
    for &method in &methods {
        let report = housing::kfold_mspe(&loaded.records, method, a.folds, a.seed, &options)?;
        println!(
            "{}: mean out-of-fold mse {:.6} over {} folds ({} failed)",
            method.as_str(),
            report.mean_mspe,
            report.k,
            report.failures
        );
        reports.push(report);
    }
    ensure_dir(&a.out)?;
    write_out(&a.out, "folds.csv", &housing::folds_csv(&reports))?;
    write_out(&a.out, "summary.csv", &housing::housing_summary_csv(&reports))?;
    let featured = reports
        .iter()
        .find(|r| r.method == Method::Dnn)
        .or_else(|| reports.first());
    if let Some(report) = featured {
        write_out(
            &a.out,
            "predictions.csv",
            &housing::predictions_csv(&loaded.records, report),
        )?;
    }
    Ok(())
}

fn run_fit(a: FitArgs) -> Result<()> {
    let table = csvio::read_numeric_csv(&a.data)?;
    if table.columns.len() < 2 {
        return Err(Error::invalid(
            "need at least one covariate column plus a response column",
        ));
    }
    let resp_idx = match &a.response {
        Some(name) => table
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::invalid(format!("response column '{name}' not found")))?,
        None => table.columns.len() - 1,
    };
    let mut x_rows = Vec::with_capacity(table.rows.len());
    let mut y = Vec::with_capacity(table.rows.len());
    for row in &table.rows {
        let mut xr = Vec::with_capacity(row.len() - 1);
        for (j, v) in row.iter().enumerate() {
            if j != resp_idx {
                xr.push(*v);
            }
        }
        x_rows.push(xr);
        y.push(row[resp_idx]);
    }
    let x = Mat::from_rows(&x_rows)?;
    let shape = NetworkShape::rectangular(x.n_cols(), a.depth, a.width)?;
    let cfg = TrainConfig {
        learning_rate: a.learning_rate,
        l1_lambda: a.l1,
        epochs: a.epochs,
        batch_size: a.batch_size,
        restarts: a.restarts,
        clamp: a.clamp,
        seed: a.seed,
        ..TrainConfig::default()
    };
    let fitted = netcore::fit(&x, &y, &shape, &cfg)?;
    let json = netcore::params_to_json(&fitted.params)?;
    ensure_dir(&a.out)?;
    write_out(&a.out, "model.json", &json)?;
    println!(
        "training mse {:.6}; {} nonzero parameters",
        fitted.final_mse, fitted.tau_hat
    );
    Ok(())
}
