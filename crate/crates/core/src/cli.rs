//! The `analyze`, `simulate` and `diagnose` commands.
//!
//! Exit codes: `0` success, `1` user or configuration error (a JSON object
//! `{"error": kind, "message": ...}` is written to stderr), `2` computational
//! failure.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::data::{load_csv, ColumnMapping, Dataset, OutcomeKind};
use crate::diagnostics::{balance_report, DEFAULT_BINS};
use crate::estimators::{catalog, estimate_all, CatalogOptions, EstimandSpec, Measure};
use crate::inference::{bootstrap_many, BootstrapConfig, CiMethod, EffectEstimate, PsMode};
use crate::psmodel::{fit_logistic, resolve_ps, FitOptions, ResolvedPs};
use crate::simulation::{
    run_monte_carlo, DgpConfig, MonteCarloConfig, PsModelSpec, DEFAULT_SUPER_N,
};
use crate::stats::format_sig;
use crate::tilting::{EstimandClass, Scheme, WeightScheme, DEFAULT_SMOOTH_EPSILON};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USER: i32 = 1;
pub const EXIT_COMPUTE: i32 = 2;

/// Column order of the analyze table.
pub const TABLE_HEADER: [&str; 9] = [
    "label",
    "Est",
    "Std.Err",
    "Upr",
    "Lwr",
    "estimand",
    "measure",
    "ci_method",
    "error",
];

#[derive(Debug, Parser)]
#[command(
    name = "psweight",
    version,
    about = "Propensity-score weighting estimators and diagnostics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Point estimates (and optional bootstrap intervals) for each estimand class.
    Analyze(AnalyzeArgs),
    /// Monte Carlo study driven by a TOML config.
    Simulate(SimulateArgs),
    /// ESS, ASMD and overlap diagnostics.
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub treatment_col: String,
    #[arg(long)]
    pub outcome_col: String,
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub covariate_cols: Vec<String>,
    /// Column with user-supplied propensity scores; disables model fitting.
    #[arg(long)]
    pub ps_col: Option<String>,
    #[arg(long)]
    pub id_col: Option<String>,
    #[arg(long, default_value = "continuous")]
    pub outcome_kind: OutcomeKind,
}

impl InputArgs {
    fn mapping(&self) -> ColumnMapping {
        ColumnMapping {
            treatment: self.treatment_col.clone(),
            outcome: self.outcome_col.clone(),
            covariates: self.covariate_cols.clone(),
            ps: self.ps_col.clone(),
            id: self.id_col.clone(),
            outcome_kind: self.outcome_kind,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_delimiter = ',', default_value = "RD")]
    pub measure: Vec<Measure>,
    #[arg(long, value_delimiter = ',', default_value = "wate")]
    pub class: Vec<EstimandClass>,
    #[arg(long, value_delimiter = ',')]
    pub trim_alpha: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub trunc_alpha: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub beta_nu: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub smooth_trim_alpha: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_SMOOTH_EPSILON)]
    pub smooth_trim_eps: f64,
    /// Trapezoid slopes K (WATE only).
    #[arg(long, value_delimiter = ',')]
    pub tw_k: Vec<f64>,
    #[arg(long)]
    pub boot: bool,
    #[arg(long, default_value_t = crate::inference::DEFAULT_REPLICATES)]
    pub n_boot: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Significance level; intervals have confidence `1 − alpha`.
    #[arg(long, default_value_t = 0.05)]
    pub alpha_level: f64,
    #[arg(long, default_value = "normal")]
    pub ci_method: CiMethod,
    /// Output directory; tables go to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: OutputFormat,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Also write the bootstrap replicate estimates.
    #[arg(long)]
    pub dump_replicates: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_delimiter = ',', default_value = "wate")]
    pub class: Vec<EstimandClass>,
    /// Scheme tokens such as `ipw,ow,trim:0.05,bw:3`.
    #[arg(long, value_delimiter = ',', default_value = "ipw,ow")]
    pub schemes: Vec<Scheme>,
    #[arg(long, value_delimiter = ',')]
    pub alpha_list: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return EXIT_OK;
            }
            report(&Error::Config(e.to_string().trim().to_string()));
            return EXIT_USER;
        }
    };
    let outcome = match cli.command {
        Command::Analyze(a) => cmd_analyze(&a),
        Command::Simulate(s) => cmd_simulate(&s),
        Command::Diagnose(d) => cmd_diagnose(&d),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            report(&e);
            if e.is_user_error() {
                EXIT_USER
            } else {
                EXIT_COMPUTE
            }
        }
    }
}

fn report(e: &Error) {
    let body = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
    eprintln!("{body}");
}

fn load_and_resolve(input: &InputArgs, opts: &FitOptions) -> Result<(Dataset, ResolvedPs)> {
    let data = load_csv(&input.input, &input.mapping())?;
    let ps = if data.provided_ps().is_some() {
        resolve_ps(&data, None, opts)?
    } else {
        let fit = fit_logistic(&data, opts)?;
        resolve_ps(&data, Some(&fit), opts)?
    };
    Ok((data, ps))
}

/// One row of an analyze table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub label: String,
    #[serde(rename = "Est")]
    pub estimate: Option<f64>,
    #[serde(rename = "Std.Err")]
    pub std_err: Option<f64>,
    #[serde(rename = "Upr")]
    pub upper: Option<f64>,
    #[serde(rename = "Lwr")]
    pub lower: Option<f64>,
    pub estimand: String,
    pub measure: Measure,
    pub ci_method: Option<CiMethod>,
    pub error: Option<String>,
    #[serde(skip)]
    pub replicates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassTable {
    pub class: EstimandClass,
    pub ps_source: String,
    pub clamped_count: usize,
    pub bootstrap: Option<BootstrapConfig>,
    pub warnings: Vec<String>,
    pub rows: Vec<TableRow>,
}

impl ClassTable {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(TABLE_HEADER)?;
        let num = |x: Option<f64>| x.map(|v| format_sig(v, 6)).unwrap_or_default();
        for r in &self.rows {
            out.write_record([
                r.label.clone(),
                num(r.estimate),
                num(r.std_err),
                num(r.upper),
                num(r.lower),
                r.estimand.clone(),
                r.measure.to_string(),
                r.ci_method.map(|m| m.to_string()).unwrap_or_default(),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn analyze_class(
    data: &Dataset,
    ps: &ResolvedPs,
    class: EstimandClass,
    args: &AnalyzeArgs,
    opts: &FitOptions,
) -> Result<ClassTable> {
    let catalog_opts = CatalogOptions {
        beta_nus: args.beta_nu.clone(),
        trim_alphas: args.trim_alpha.clone(),
        trunc_alphas: args.trunc_alpha.clone(),
        smooth_trim: args
            .smooth_trim_alpha
            .iter()
            .map(|&a| (a, args.smooth_trim_eps))
            .collect(),
        trapezoid_ks: if class == EstimandClass::Wate {
            args.tw_k.clone()
        } else {
            Vec::new()
        },
    };
    let schemes = catalog(class, &catalog_opts)?;
    let specs: Vec<EstimandSpec> = schemes
        .iter()
        .flat_map(|&s| args.measure.iter().map(move |&m| EstimandSpec::new(s, m)))
        .collect();
    if data.outcome_kind() != OutcomeKind::Binary && args.measure.iter().any(Measure::is_ratio) {
        return Err(Error::InvalidEstimand(
            "RR and OR require --outcome-kind binary".into(),
        ));
    }

    let points = estimate_all(data, &ps.values, &specs);
    let mut rows: Vec<TableRow> = points
        .into_iter()
        .map(|p| TableRow {
            label: p.label,
            estimate: p.result.as_ref().ok().map(|r| r.estimate),
            std_err: None,
            upper: None,
            lower: None,
            estimand: p.spec.scheme.estimand_name(),
            measure: p.spec.measure,
            ci_method: None,
            error: p.result.err(),
            replicates: Vec::new(),
        })
        .collect();

    let mut warnings = Vec::new();
    let boot_cfg = args.boot.then(|| BootstrapConfig {
        replicates: args.n_boot,
        seed: args.seed,
        ci_method: args.ci_method,
        conf_level: 1.0 - args.alpha_level,
        threads: args.threads,
        ..BootstrapConfig::default()
    });
    if let Some(cfg) = &boot_cfg {
        let mode = PsMode::for_dataset(data, *opts);
        let results = bootstrap_many(data, &specs, &mode, cfg)?;
        for (row, res) in rows.iter_mut().zip(results) {
            match res {
                Ok(est) => {
                    fill_interval(row, &est);
                    for w in est.warnings {
                        if !warnings.contains(&w) {
                            warnings.push(w);
                        }
                    }
                }
                Err(e) if row.error.is_none() => row.error = Some(e.to_string()),
                Err(_) => {}
            }
        }
    }
    Ok(ClassTable {
        class,
        ps_source: ps.source.to_string(),
        clamped_count: ps.clamped_count,
        bootstrap: boot_cfg,
        warnings,
        rows,
    })
}

fn fill_interval(row: &mut TableRow, est: &EffectEstimate) {
    row.std_err = est.se;
    row.upper = Some(est.ci_upper);
    row.lower = Some(est.ci_lower);
    row.ci_method = Some(est.ci_method);
    row.replicates = est.replicate_estimates.clone();
}

fn validate_analyze(args: &AnalyzeArgs) -> Result<()> {
    if !(args.alpha_level > 0.0 && args.alpha_level < 1.0) {
        return Err(Error::Config(format!(
            "--alpha-level {} outside (0,1)",
            args.alpha_level
        )));
    }
    if args.boot && args.n_boot < 2 {
        return Err(Error::Config("--n-boot must be at least 2".into()));
    }
    if args.threads == Some(0) {
        return Err(Error::Config("--threads must be positive".into()));
    }
    if args.class.is_empty() || args.measure.is_empty() {
        return Err(Error::Config(
            "--class and --measure need at least one value".into(),
        ));
    }
    if args.ci_method == CiMethod::LogNormal && !args.measure.iter().any(Measure::is_ratio) {
        return Err(Error::Config(
            "lognormal intervals need --measure RR or OR".into(),
        ));
    }
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<i32> {
    validate_analyze(args)?;
    let opts = FitOptions::default();
    let (data, ps) = load_and_resolve(&args.input, &opts)?;
    let tables: Vec<ClassTable> = args
        .class
        .iter()
        .map(|&c| analyze_class(&data, &ps, c, args, &opts))
        .collect::<Result<_>>()?;

    match &args.out {
        Some(dir) => {
            create_dir(dir)?;
            for t in &tables {
                let stem = t.class.as_str();
                match args.format {
                    OutputFormat::Csv => {
                        t.write_csv(File::create(dir.join(format!("{stem}.csv")))?)?
                    }
                    OutputFormat::Json => serde_json::to_writer_pretty(
                        File::create(dir.join(format!("{stem}.json")))?,
                        t,
                    )?,
                }
                if args.dump_replicates && args.boot {
                    write_replicates(t, File::create(dir.join(format!("{stem}_replicates.csv")))?)?;
                }
            }
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            match args.format {
                OutputFormat::Csv => {
                    for t in &tables {
                        writeln!(lock, "# {}", t.class)?;
                        t.write_csv(&mut lock)?;
                    }
                }
                OutputFormat::Json => {
                    serde_json::to_writer_pretty(&mut lock, &tables)?;
                    writeln!(lock)?;
                }
            }
        }
    }

    let failures: Vec<serde_json::Value> = tables
        .iter()
        .flat_map(|t| {
            t.rows.iter().filter_map(move |r| {
                r.error.as_ref().map(|e| serde_json::json!({ "class": t.class, "label": r.label, "measure": r.measure, "message": e }))
            })
        })
        .collect();
    if failures.is_empty() {
        Ok(EXIT_OK)
    } else {
        eprintln!(
            "{}",
            serde_json::json!({ "error": "estimation_failed", "rows": failures })
        );
        Ok(EXIT_COMPUTE)
    }
}

fn write_replicates<W: Write>(t: &ClassTable, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["label", "measure", "replicate", "estimate"])?;
    for r in &t.rows {
        for (b, v) in r.replicates.iter().enumerate() {
            out.write_record([
                r.label.clone(),
                r.measure.to_string(),
                b.to_string(),
                v.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Schema of the `simulate` config file (TOML).
///
/// ```toml
/// gamma = 0.5
/// alpha0 = 0.407
/// n = 2000
/// replications = 300
/// bootstrap = 200
/// seed = 1
/// schemes = ["wate:ow", "wate:mw", "wate:ew", "watt:ipw"]
/// ```
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub gamma: f64,
    pub alpha0: f64,
    pub n: usize,
    pub replications: usize,
    #[serde(default)]
    pub bootstrap: usize,
    #[serde(default)]
    pub seed: u64,
    /// Seed of the super-population; defaults to `seed`.
    #[serde(default)]
    pub truth_seed: Option<u64>,
    #[serde(default = "default_super_n")]
    pub super_n: usize,
    #[serde(default = "default_ps_model")]
    pub ps_model: PsModelSpec,
    #[serde(default = "default_ci_method")]
    pub ci_method: CiMethod,
    #[serde(default = "default_alpha_level")]
    pub alpha_level: f64,
    /// `class:scheme` tokens.
    pub schemes: Vec<String>,
}

fn default_super_n() -> usize {
    DEFAULT_SUPER_N
}

fn default_ps_model() -> PsModelSpec {
    PsModelSpec::Correct
}

fn default_ci_method() -> CiMethod {
    CiMethod::Normal
}

fn default_alpha_level() -> f64 {
    0.05
}

impl SimulateConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_monte_carlo(&self) -> Result<MonteCarloConfig> {
        let schemes = self
            .schemes
            .iter()
            .map(|s| s.parse::<WeightScheme>())
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::Config(e.to_string()))?;
        let dgp = DgpConfig {
            gamma: self.gamma,
            alpha0: self.alpha0,
            n: self.n,
            seed: self.truth_seed.unwrap_or(self.seed),
            ps_model: self.ps_model,
        };
        let cfg = MonteCarloConfig {
            super_n: self.super_n,
            ci_method: self.ci_method,
            conf_level: 1.0 - self.alpha_level,
            ..MonteCarloConfig::new(dgp, self.replications, self.bootstrap, schemes, self.seed)
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(0) => Err(Error::Config("--threads must be positive".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(e.to_string()))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<i32> {
    let text = fs::read_to_string(&args.config)?;
    let cfg = SimulateConfig::from_toml(&text)?.to_monte_carlo()?;
    let result = with_threads(args.threads, || run_monte_carlo(&cfg))??;
    create_dir(&args.out)?;
    result.write_summary_csv(File::create(args.out.join("summary.csv"))?)?;
    result.write_replicates_csv(File::create(args.out.join("replicates.csv"))?)?;
    result.write_heatmap_csv(File::create(args.out.join("heatmap.csv"))?)?;
    serde_json::to_writer_pretty(File::create(args.out.join("result.json"))?, &result)?;
    Ok(EXIT_OK)
}

pub fn cmd_diagnose(args: &DiagnoseArgs) -> Result<i32> {
    if args.bins == 0 {
        return Err(Error::Config("--bins must be positive".into()));
    }
    if let Some(a) = args.alpha_list.iter().find(|a| !(**a > 0.0 && **a < 0.5)) {
        return Err(Error::Config(format!(
            "--alpha-list value {a} outside (0, 0.5)"
        )));
    }
    let opts = FitOptions::default();
    let (data, ps) = load_and_resolve(&args.input, &opts)?;
    let schemes: Vec<WeightScheme> = args
        .class
        .iter()
        .flat_map(|&c| args.schemes.iter().map(move |&s| WeightScheme::new(c, s)))
        .collect::<Result<_>>()?;
    let report = balance_report(
        &data,
        &ps.values,
        &schemes,
        &args.alpha_list,
        args.bins,
        ps.clamped_count,
    )?;
    match &args.out {
        Some(dir) => {
            create_dir(dir)?;
            report.write_ess_csv(File::create(dir.join("ess.csv"))?)?;
            report.write_asmd_csv(File::create(dir.join("asmd.csv"))?)?;
            report.write_overlap_csv(File::create(dir.join("overlap.csv"))?)?;
            report.write_histogram_csv(File::create(dir.join("histogram.csv"))?)?;
            serde_json::to_writer_pretty(File::create(dir.join("diagnostics.json"))?, &report)?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            serde_json::to_writer_pretty(&mut lock, &report)?;
            writeln!(lock)?;
        }
    }
    Ok(EXIT_OK)
}
