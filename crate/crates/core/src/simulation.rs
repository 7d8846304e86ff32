//! Monte Carlo harness with a known data-generating process.
//!
//! Covariates: `X1 ~ Bern(0.5)`, `X2 ~ Bern(0.4 + 0.2 X1)`, `(X3, X4)`
//! bivariate normal with a mean and covariance that depend on `(X1, X2)`, and
//! the second-order terms `X5 = X3²`, `X6 = X3 X4`, `X7 = X4²`. Treatment is
//! `Bern(e(X))` with `logit e(X) = γ·(linear index) − α₀`; `γ` controls overlap.
//! Outcomes are linear in the covariates with heterogeneous effects and
//! `N(0, 4)` noise.
//!
//! True estimand values come from a large super-population, evaluated with
//! the noiseless conditional means.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, OutcomeKind, RawDataset};
use crate::estimators::{estimate_point, EstimandSpec};
use crate::inference::{bootstrap_many, BootstrapConfig, CiMethod, PsMode};
use crate::psmodel::{fit_logistic, FitOptions};
use crate::stats::{expit, mix_seed, quantile};
use crate::tilting::{EstimandClass, WeightScheme};
use crate::{Error, Result};

/// Critical value of the coverage acceptance band `nominal ± 1.96·√(nominal(1−nominal)/M)`.
pub const CP_BAND_Z: f64 = 1.96;
/// Smallest super-population accepted for truth computation.
pub const MIN_SUPER_N: usize = 100_000;
/// Super-population size used when none is configured.
pub const DEFAULT_SUPER_N: usize = 1_000_000;
const SUPER_CHUNK: usize = 1 << 16;

pub const COVARIATE_NAMES: [&str; 7] = ["X1", "X2", "X3", "X4", "X5", "X6", "X7"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PsModelSpec {
    /// Logistic model on X1..X7.
    Correct,
    /// Logistic model on the main terms X1..X4 only.
    Misspecified,
}

impl PsModelSpec {
    pub fn covariates(&self) -> &'static [&'static str] {
        match self {
            PsModelSpec::Correct => &COVARIATE_NAMES,
            PsModelSpec::Misspecified => &COVARIATE_NAMES[..4],
        }
    }
}

impl fmt::Display for PsModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PsModelSpec::Correct => "correct",
            PsModelSpec::Misspecified => "misspecified",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgpConfig {
    pub gamma: f64,
    pub alpha0: f64,
    /// Observed sample size per replicate.
    pub n: usize,
    /// Seed of the super-population draw.
    pub seed: u64,
    pub ps_model: PsModelSpec,
}

impl DgpConfig {
    pub fn good_overlap(n: usize, seed: u64) -> Self {
        DgpConfig {
            gamma: 0.5,
            alpha0: 0.407,
            n,
            seed,
            ps_model: PsModelSpec::Correct,
        }
    }

    pub fn poor_overlap(n: usize, seed: u64) -> Self {
        DgpConfig {
            gamma: 2.5,
            alpha0: 2.074,
            n,
            seed,
            ps_model: PsModelSpec::Correct,
        }
    }

    /// `good`, `poor`, or `custom` for any other `(γ, α₀)`.
    pub fn overlap_label(&self) -> &'static str {
        match (self.gamma, self.alpha0) {
            (g, a) if g == 0.5 && a == 0.407 => "good",
            (g, a) if g == 2.5 && a == 2.074 => "poor",
            _ => "custom",
        }
    }
}

/// One simulated unit with both potential outcomes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unit {
    pub x: [f64; 7],
    pub e: f64,
    pub y0: f64,
    pub y1: f64,
    pub treated: bool,
    pub y: f64,
}

/// Mean and covariance of `(X3, X4)` given `(X1, X2)`.
pub fn x34_moments(x1: f64, x2: f64) -> ([f64; 2], [[f64; 2]; 2]) {
    let mu = [x1 - 0.25 * x2 + x1 * x2, -0.25 * x1 + x2 + x1 * x2];
    let sigma = [
        [x2 * 1.0 + (1.0 - x2) * 2.0, x2 * 0.5 + (1.0 - x2) * 0.25],
        [x2 * 0.5 + (1.0 - x2) * 0.25, x2 * 1.0 + (1.0 - x2) * 2.0],
    ];
    (mu, sigma)
}

pub fn draw_covariates<R: Rng + ?Sized>(rng: &mut R) -> [f64; 7] {
    let x1 = f64::from(u8::from(rng.gen::<f64>() < 0.5));
    let x2 = f64::from(u8::from(rng.gen::<f64>() < 0.4 + 0.2 * x1));
    let (mu, s) = x34_moments(x1, x2);
    let l11 = s[0][0].sqrt();
    let l21 = s[1][0] / l11;
    let l22 = (s[1][1] - l21 * l21).sqrt();
    let z1: f64 = rng.sample(StandardNormal);
    let z2: f64 = rng.sample(StandardNormal);
    let x3 = mu[0] + l11 * z1;
    let x4 = mu[1] + l21 * z1 + l22 * z2;
    [x1, x2, x3, x4, x3 * x3, x3 * x4, x4 * x4]
}

pub fn true_ps(x: &[f64; 7], gamma: f64, alpha0: f64) -> f64 {
    let index =
        -0.4 * x[0] - 0.4 * x[1] - 0.4 * x[2] - 0.4 * x[3] - 0.1 * x[4] + 0.1 * x[5] + 0.1 * x[6];
    expit(index * gamma - alpha0)
}

/// `E[Y(0) | X]`.
pub fn control_mean(x: &[f64; 7]) -> f64 {
    0.5 - 1.2 * x[0] + 2.2 * x[1] + x[2] + 0.6 * x[3] + x[4] + 2.0 * x[5] + x[6]
}

/// `E[Y(1) − Y(0) | X]`.
pub fn cate(x: &[f64; 7]) -> f64 {
    4.0 + x[1] * x[2] + 3.0 * x[4] + 6.0 * x[5] + 3.0 * x[6]
}

pub fn gen_unit<R: Rng + ?Sized>(rng: &mut R, gamma: f64, alpha0: f64) -> Unit {
    let x = draw_covariates(rng);
    let e = true_ps(&x, gamma, alpha0);
    let noise: f64 = rng.sample::<f64, _>(StandardNormal) * 2.0;
    let y0 = control_mean(&x) + noise;
    let y1 = y0 + cate(&x);
    let treated = rng.gen::<f64>() < e;
    Unit {
        x,
        e,
        y0,
        y1,
        treated,
        y: if treated { y1 } else { y0 },
    }
}

/// Observed sample of size `cfg.n` for replicate `replicate`, keeping the
/// covariates of the configured PS model.
pub fn generate_sample(cfg: &DgpConfig, seed: u64, replicate: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    let units: Vec<Unit> = (0..cfg.n)
        .map(|_| gen_unit(&mut rng, cfg.gamma, cfg.alpha0))
        .collect();
    let keep = cfg.ps_model.covariates();
    let raw = RawDataset {
        treatment: units
            .iter()
            .map(|u| f64::from(u8::from(u.treated)))
            .collect(),
        outcome: units.iter().map(|u| u.y).collect(),
        outcome_kind: OutcomeKind::Continuous,
        covariate_names: keep.iter().map(|s| s.to_string()).collect(),
        covariates: (0..keep.len())
            .map(|j| units.iter().map(|u| u.x[j]).collect())
            .collect(),
        provided_ps: None,
        unit_ids: None,
    };
    Dataset::try_from(raw)
}

/// Large simulated population: true scores and noiseless conditional means.
#[derive(Debug, Clone)]
pub struct SuperPopulation {
    pub ps: Vec<f64>,
    pub mu0: Vec<f64>,
    pub tau: Vec<f64>,
    /// Realized treatment count.
    pub n_treated: usize,
}

/// Estimand value with its Monte Carlo standard error (linearization of the
/// ratio-of-sums form).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Truth {
    pub value: f64,
    pub se: f64,
}

// ps, mu0, tau, treated count
type Chunk = (Vec<f64>, Vec<f64>, Vec<f64>, usize);

impl SuperPopulation {
    /// Draws `size` units in chunks, each from its own ChaCha stream, so the
    /// draw does not depend on the number of threads.
    pub fn draw(cfg: &DgpConfig, size: usize, seed: u64) -> Self {
        let chunks: Vec<Chunk> = (0..size.div_ceil(SUPER_CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(c as u64);
                let len = SUPER_CHUNK.min(size - c * SUPER_CHUNK);
                let (mut ps, mut mu0, mut tau) = (
                    Vec::with_capacity(len),
                    Vec::with_capacity(len),
                    Vec::with_capacity(len),
                );
                let mut treated = 0;
                for _ in 0..len {
                    let u = gen_unit(&mut rng, cfg.gamma, cfg.alpha0);
                    ps.push(u.e);
                    mu0.push(control_mean(&u.x));
                    tau.push(cate(&u.x));
                    treated += usize::from(u.treated);
                }
                (ps, mu0, tau, treated)
            })
            .collect();
        let mut pop = SuperPopulation {
            ps: Vec::with_capacity(size),
            mu0: Vec::with_capacity(size),
            tau: Vec::with_capacity(size),
            n_treated: 0,
        };
        for (ps, mu0, tau, t) in chunks {
            pop.ps.extend(ps);
            pop.mu0.extend(mu0);
            pop.tau.extend(tau);
            pop.n_treated += t;
        }
        pop
    }

    pub fn len(&self) -> usize {
        self.ps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ps.is_empty()
    }

    pub fn treated_fraction(&self) -> f64 {
        self.n_treated as f64 / self.len() as f64
    }

    /// Fraction of units whose true score lies outside `[lo, hi]`.
    pub fn fraction_outside(&self, lo: f64, hi: f64) -> f64 {
        self.ps.iter().filter(|&&e| e < lo || e > hi).count() as f64 / self.len() as f64
    }

    /// WATE: `Σ h τ / Σ h`;
    /// WATT: `Σ e μ₁ / Σ e − Σ g e μ₀ / Σ g e`;
    /// WATC: `Σ g (1−e) μ₁ / Σ g (1−e) − Σ (1−e) μ₀ / Σ (1−e)`.
    pub fn truth(&self, scheme: &WeightScheme) -> Result<Truth> {
        let n = self.len();
        // weights on the treated-side mean (u) and the control-side mean (v)
        let mut u = Vec::with_capacity(n);
        let mut v = Vec::with_capacity(n);
        for &e in &self.ps {
            let e = e.clamp(1e-15, 1.0 - 1e-15);
            let t = scheme.tilt(e)?;
            let (ui, vi) = match scheme.class() {
                EstimandClass::Wate => (t, t),
                EstimandClass::Watt => (e, t * e),
                EstimandClass::Watc => (t * (1.0 - e), 1.0 - e),
            };
            u.push(ui);
            v.push(vi);
        }
        let su: f64 = u.iter().sum();
        let sv: f64 = v.iter().sum();
        if !(su > 0.0 && sv > 0.0) {
            return Err(Error::DegenerateArm(if su > 0.0 {
                "control"
            } else {
                "treated"
            }));
        }
        let mu1 = |i: usize| self.mu0[i] + self.tau[i];
        let r1 = (0..n).map(|i| u[i] * mu1(i)).sum::<f64>() / su;
        let r0 = (0..n).map(|i| v[i] * self.mu0[i]).sum::<f64>() / sv;
        let var: f64 = (0..n)
            .map(|i| {
                let inf = u[i] * (mu1(i) - r1) / su - v[i] * (self.mu0[i] - r0) / sv;
                inf * inf
            })
            .sum();
        Ok(Truth {
            value: r1 - r0,
            se: var.sqrt(),
        })
    }
}

/// Truth of one estimand from a fresh super-population of `super_n` units.
pub fn compute_truth(
    scheme: &WeightScheme,
    super_n: usize,
    cfg: &DgpConfig,
    seed: u64,
) -> Result<f64> {
    if super_n < MIN_SUPER_N {
        return Err(Error::Config(format!(
            "super-population needs at least {MIN_SUPER_N} units, got {super_n}"
        )));
    }
    Ok(SuperPopulation::draw(cfg, super_n, seed)
        .truth(scheme)?
        .value)
}

/// `nominal ± 1.96·√(nominal(1−nominal)/M)`.
pub fn coverage_band(nominal: f64, m: usize) -> (f64, f64) {
    let half = CP_BAND_Z * (nominal * (1.0 - nominal) / m as f64).sqrt();
    (nominal - half, nominal + half)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloConfig {
    pub dgp: DgpConfig,
    /// Monte Carlo replicates `M`.
    pub replications: usize,
    /// Bootstrap replicates per Monte Carlo replicate; 0 skips intervals.
    pub bootstrap: usize,
    pub schemes: Vec<WeightScheme>,
    pub super_n: usize,
    pub seed: u64,
    pub ci_method: CiMethod,
    pub conf_level: f64,
    pub fit: FitOptions,
}

impl MonteCarloConfig {
    pub fn new(
        dgp: DgpConfig,
        replications: usize,
        bootstrap: usize,
        schemes: Vec<WeightScheme>,
        seed: u64,
    ) -> Self {
        MonteCarloConfig {
            dgp,
            replications,
            bootstrap,
            schemes,
            super_n: DEFAULT_SUPER_N,
            seed,
            ci_method: CiMethod::Normal,
            conf_level: 0.95,
            fit: FitOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.replications < 1 {
            return bad("replications (M) must be at least 1".into());
        }
        if self.dgp.n < 10 {
            return bad(format!(
                "sample size N must be at least 10, got {}",
                self.dgp.n
            ));
        }
        if self.bootstrap == 1 {
            return bad("bootstrap (B) must be 0 (no intervals) or at least 2".into());
        }
        if self.schemes.is_empty() {
            return bad("at least one scheme is required".into());
        }
        if self.super_n < MIN_SUPER_N {
            return bad(format!("super_n must be at least {MIN_SUPER_N}"));
        }
        if !(self.conf_level > 0.0 && self.conf_level < 1.0) {
            return bad(format!(
                "confidence level {} outside (0,1)",
                self.conf_level
            ));
        }
        if self.ci_method == CiMethod::LogNormal {
            return bad(
                "log-normal intervals apply to ratio measures; the simulated outcome is continuous"
                    .into(),
            );
        }
        if !(self.dgp.gamma.is_finite() && self.dgp.alpha0.is_finite()) {
            return bad("gamma and alpha0 must be finite".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spread {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub mean: f64,
}

impl Spread {
    fn of(xs: &[f64]) -> Option<Spread> {
        if xs.is_empty() {
            return None;
        }
        Some(Spread {
            median: quantile(xs, 0.5),
            q1: quantile(xs, 0.25),
            q3: quantile(xs, 0.75),
            mean: xs.iter().sum::<f64>() / xs.len() as f64,
        })
    }

    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

/// Outcome of one scheme in one Monte Carlo replicate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub estimate: Option<f64>,
    pub ci: Option<(f64, f64)>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeSummary {
    pub scheme: String,
    pub class: String,
    pub label: String,
    pub estimand: String,
    pub truth: f64,
    pub truth_se: f64,
    /// Absolute relative bias in percent, per successful replicate.
    #[serde(skip)]
    pub rbias: Vec<f64>,
    pub rbias_summary: Option<Spread>,
    pub estimate_summary: Option<Spread>,
    pub coverage: Option<f64>,
    pub mean_ci_width: Option<f64>,
    /// Replicates with an estimate.
    pub n_estimates: usize,
    /// Replicates with an interval.
    pub n_intervals: usize,
    pub n_failed: usize,
    #[serde(skip)]
    pub records: Vec<ReplicateRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimMetadata {
    pub gamma: f64,
    pub alpha0: f64,
    pub overlap: String,
    pub ps_model: String,
    pub replications: usize,
    pub n: usize,
    pub bootstrap: usize,
    pub super_n: usize,
    pub seed: u64,
    pub truth_seed: u64,
    pub ci_method: String,
    pub conf_level: f64,
    /// Mean treated share over the observed samples.
    pub realized_treated_fraction: f64,
    /// Treated share in the super-population.
    pub super_treated_fraction: f64,
    pub coverage_band: (f64, f64),
    pub failed_ps_fits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub metadata: SimMetadata,
    pub schemes: Vec<SchemeSummary>,
}

impl SimResult {
    pub fn scheme(&self, estimand: &str) -> Option<&SchemeSummary> {
        self.schemes.iter().find(|s| s.estimand == estimand)
    }
}

/// Estimate, interval and error message of one scheme.
type Slot = (Option<f64>, Option<(f64, f64)>, Option<String>);

struct ReplicateOutcome {
    treated_fraction: f64,
    fit_failed: bool,
    per_scheme: Vec<Slot>,
}

fn run_replicate(cfg: &MonteCarloConfig, r: usize) -> ReplicateOutcome {
    let k = cfg.schemes.len();
    let fail_all = |msg: String, treated_fraction: f64| ReplicateOutcome {
        treated_fraction,
        fit_failed: true,
        per_scheme: vec![(None, None, Some(msg)); k],
    };
    let data = match generate_sample(&cfg.dgp, cfg.seed, r as u64) {
        Ok(d) => d,
        Err(e) => return fail_all(e.to_string(), f64::NAN),
    };
    let treated_fraction = data.n_treated() as f64 / data.len() as f64;
    let fit = match fit_logistic(&data, &cfg.fit) {
        Ok(f) => f,
        Err(e) => return fail_all(e.to_string(), treated_fraction),
    };
    let specs: Vec<EstimandSpec> = cfg
        .schemes
        .iter()
        .map(|&s| EstimandSpec::difference(s))
        .collect();
    let mut per_scheme: Vec<Slot> = specs
        .iter()
        .map(|s| match estimate_point(&data, &fit.fitted_ps, s) {
            Ok(p) => (Some(p.estimate), None, None),
            Err(e) => (None, None, Some(e.to_string())),
        })
        .collect();

    if cfg.bootstrap >= 2 {
        let boot = BootstrapConfig {
            replicates: cfg.bootstrap,
            seed: mix_seed(cfg.seed, r as u64),
            ci_method: cfg.ci_method,
            conf_level: cfg.conf_level,
            threads: None,
            ..BootstrapConfig::default()
        };
        match bootstrap_many(&data, &specs, &PsMode::Refit(cfg.fit), &boot) {
            Ok(results) => {
                for (slot, res) in per_scheme.iter_mut().zip(results) {
                    match res {
                        Ok(est) => slot.1 = Some((est.ci_lower, est.ci_upper)),
                        Err(e) if slot.2.is_none() => slot.2 = Some(e.to_string()),
                        Err(_) => {}
                    }
                }
            }
            Err(e) => {
                for slot in per_scheme.iter_mut().filter(|s| s.2.is_none()) {
                    slot.2 = Some(e.to_string());
                }
            }
        }
    }
    ReplicateOutcome {
        treated_fraction,
        fit_failed: false,
        per_scheme,
    }
}

/// Runs `M` replicates: generate, fit the PS model, estimate every scheme and
/// (for `B ≥ 2`) bootstrap intervals; then aggregate relative bias and
/// coverage against super-population truths.
pub fn run_monte_carlo(cfg: &MonteCarloConfig) -> Result<SimResult> {
    cfg.validate()?;
    let pop = SuperPopulation::draw(&cfg.dgp, cfg.super_n, cfg.dgp.seed);
    let truths: Vec<Truth> = cfg
        .schemes
        .iter()
        .map(|s| pop.truth(s))
        .collect::<Result<_>>()?;
    let super_treated_fraction = pop.treated_fraction();
    drop(pop);

    let outcomes: Vec<ReplicateOutcome> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| run_replicate(cfg, r))
        .collect();

    let band = coverage_band(cfg.conf_level, cfg.replications);
    let fractions: Vec<f64> = outcomes
        .iter()
        .map(|o| o.treated_fraction)
        .filter(|f| f.is_finite())
        .collect();
    let metadata = SimMetadata {
        gamma: cfg.dgp.gamma,
        alpha0: cfg.dgp.alpha0,
        overlap: cfg.dgp.overlap_label().into(),
        ps_model: cfg.dgp.ps_model.to_string(),
        replications: cfg.replications,
        n: cfg.dgp.n,
        bootstrap: cfg.bootstrap,
        super_n: cfg.super_n,
        seed: cfg.seed,
        truth_seed: cfg.dgp.seed,
        ci_method: cfg.ci_method.to_string(),
        conf_level: cfg.conf_level,
        realized_treated_fraction: fractions.iter().sum::<f64>() / fractions.len().max(1) as f64,
        super_treated_fraction,
        coverage_band: band,
        failed_ps_fits: outcomes.iter().filter(|o| o.fit_failed).count(),
    };

    let schemes = cfg
        .schemes
        .iter()
        .zip(&truths)
        .enumerate()
        .map(|(j, (scheme, truth))| {
            let records: Vec<ReplicateRecord> = outcomes
                .iter()
                .enumerate()
                .map(|(r, o)| {
                    let (estimate, ci, error) = o.per_scheme[j].clone();
                    ReplicateRecord {
                        replicate: r,
                        estimate,
                        ci,
                        error,
                    }
                })
                .collect();
            summarize_scheme(scheme, *truth, records)
        })
        .collect();

    Ok(SimResult { metadata, schemes })
}

fn summarize_scheme(
    scheme: &WeightScheme,
    truth: Truth,
    records: Vec<ReplicateRecord>,
) -> SchemeSummary {
    let estimates: Vec<f64> = records.iter().filter_map(|r| r.estimate).collect();
    let rbias: Vec<f64> = estimates
        .iter()
        .map(|e| (100.0 * (e - truth.value) / truth.value).abs())
        .collect();
    let intervals: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.estimate.is_some())
        .filter_map(|r| r.ci)
        .collect();
    let coverage = (!intervals.is_empty()).then(|| {
        intervals
            .iter()
            .filter(|(lo, hi)| *lo <= truth.value && truth.value <= *hi)
            .count() as f64
            / intervals.len() as f64
    });
    let mean_ci_width = (!intervals.is_empty())
        .then(|| intervals.iter().map(|(lo, hi)| hi - lo).sum::<f64>() / intervals.len() as f64);
    SchemeSummary {
        scheme: scheme.scheme().to_string(),
        class: scheme.class().to_string(),
        label: scheme.label(),
        estimand: scheme.estimand_name(),
        truth: truth.value,
        truth_se: truth.se,
        rbias_summary: Spread::of(&rbias),
        estimate_summary: Spread::of(&estimates),
        coverage,
        mean_ci_width,
        n_estimates: estimates.len(),
        n_intervals: intervals.len(),
        n_failed: records.iter().filter(|r| r.error.is_some()).count(),
        rbias,
        records,
    }
}

impl SimResult {
    /// Long format: `class,scheme,label,estimand,metric,value`.
    pub fn write_summary_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["class", "scheme", "label", "estimand", "metric", "value"])?;
        for s in &self.schemes {
            let mut metrics: Vec<(&str, Option<f64>)> =
                vec![("truth", Some(s.truth)), ("truth_se", Some(s.truth_se))];
            if let Some(r) = &s.rbias_summary {
                metrics.extend([
                    ("rbias_median", Some(r.median)),
                    ("rbias_q1", Some(r.q1)),
                    ("rbias_q3", Some(r.q3)),
                    ("rbias_mean", Some(r.mean)),
                ]);
            }
            if let Some(e) = &s.estimate_summary {
                metrics.push(("estimate_mean", Some(e.mean)));
            }
            metrics.extend([
                ("coverage", s.coverage),
                ("cp_band_lower", Some(self.metadata.coverage_band.0)),
                ("cp_band_upper", Some(self.metadata.coverage_band.1)),
                ("mean_ci_width", s.mean_ci_width),
                ("n_estimates", Some(s.n_estimates as f64)),
                ("n_intervals", Some(s.n_intervals as f64)),
                ("n_failed", Some(s.n_failed as f64)),
            ]);
            for (metric, value) in metrics {
                let value = value.map_or_else(|| "NA".to_string(), |v| v.to_string());
                out.write_record([&s.class, &s.scheme, &s.label, &s.estimand, metric, &value])?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// One row per scheme and replicate, for violin plots of relative bias.
    pub fn write_replicates_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "class",
            "scheme",
            "estimand",
            "replicate",
            "estimate",
            "rbias",
            "ci_lower",
            "ci_upper",
            "covered",
            "error",
        ])?;
        let na = || "NA".to_string();
        for s in &self.schemes {
            for r in &s.records {
                let rbias = r.estimate.map(|e| (100.0 * (e - s.truth) / s.truth).abs());
                let covered = r.ci.map(|(lo, hi)| lo <= s.truth && s.truth <= hi);
                out.write_record([
                    s.class.clone(),
                    s.scheme.clone(),
                    s.estimand.clone(),
                    r.replicate.to_string(),
                    r.estimate.map_or_else(na, |v| v.to_string()),
                    rbias.map_or_else(na, |v| v.to_string()),
                    r.ci.map_or_else(na, |c| c.0.to_string()),
                    r.ci.map_or_else(na, |c| c.1.to_string()),
                    covered.map_or_else(na, |c| c.to_string()),
                    r.error.clone().unwrap_or_default(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// One row per scheme, for coverage heat maps.
    pub fn write_heatmap_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "overlap",
            "ps_model",
            "class",
            "estimand",
            "coverage",
            "cp_band_lower",
            "cp_band_upper",
            "within_band",
        ])?;
        let (lo, hi) = self.metadata.coverage_band;
        for s in &self.schemes {
            out.write_record([
                self.metadata.overlap.clone(),
                self.metadata.ps_model.clone(),
                s.class.clone(),
                s.estimand.clone(),
                s.coverage.map_or_else(|| "NA".into(), |c| c.to_string()),
                lo.to_string(),
                hi.to_string(),
                s.coverage
                    .map_or_else(|| "NA".into(), |c| (lo <= c && c <= hi).to_string()),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}
