//! Nonparametric bootstrap inference.
//!
//! Each replicate resamples rows with replacement, refits the propensity
//! model (so both the PS estimation and the weighting step contribute to the
//! variance) and recomputes the estimate. Replicate `b` on attempt `r` draws
//! its indices from the ChaCha stream `r·B + b` of the configured seed, so the
//! result does not depend on thread count or scheduling.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::estimators::{estimate_point, EstimandSpec};
use crate::psmodel::{fit_logistic, fit_logistic_from, resolve_ps, FitOptions};
use crate::stats::{mean, quantile_sorted, z_for_level};
use crate::{Error, Result};

/// Replicate count used when none is given.
pub const DEFAULT_REPLICATES: usize = 200;
/// Below this many replicates quantile intervals come with a warning.
pub const MIN_QUANTILE_REPLICATES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CiMethod {
    /// `τ̂ ± z·√V`, with `V` the bootstrap variance (divisor `B`).
    Normal,
    /// Type-7 sample quantiles of the replicate estimates.
    Quantile,
    /// `τ̂·exp(±z·√V_log)` with `V_log` the variance of `log τ̂_b`; ratio measures only.
    #[serde(rename = "lognormal")]
    LogNormal,
}

impl fmt::Display for CiMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CiMethod::Normal => "normal",
            CiMethod::Quantile => "quantile",
            CiMethod::LogNormal => "lognormal",
        })
    }
}

impl FromStr for CiMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" => Ok(CiMethod::Normal),
            "quantile" => Ok(CiMethod::Quantile),
            "lognormal" | "log" => Ok(CiMethod::LogNormal),
            other => Err(Error::Config(format!("unknown CI method `{other}`"))),
        }
    }
}

/// Where propensity scores come from inside each replicate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PsMode {
    /// Refit the logistic model on every resample.
    Refit(FitOptions),
    /// Reuse the dataset's provided scores for the resampled rows. PS
    /// estimation uncertainty is then not reflected in the intervals.
    Provided(FitOptions),
}

impl PsMode {
    /// `Provided` when the dataset carries a PS column, `Refit` otherwise.
    pub fn for_dataset(d: &Dataset, opts: FitOptions) -> Self {
        if d.provided_ps().is_some() {
            PsMode::Provided(opts)
        } else {
            PsMode::Refit(opts)
        }
    }

    fn options(&self) -> &FitOptions {
        match self {
            PsMode::Refit(o) | PsMode::Provided(o) => o,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub seed: u64,
    pub ci_method: CiMethod,
    pub conf_level: f64,
    /// Worker cap; `None` runs on the ambient rayon pool.
    pub threads: Option<usize>,
    /// Total draws (including redraws of degenerate replicates) may not
    /// exceed `max_draw_factor · replicates`.
    pub max_draw_factor: usize,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            replicates: DEFAULT_REPLICATES,
            seed: 0,
            ci_method: CiMethod::Normal,
            conf_level: 0.95,
            threads: None,
            max_draw_factor: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectEstimate {
    pub point: f64,
    /// Bootstrap standard error of the estimate; absent for quantile intervals.
    pub se: Option<f64>,
    /// Bootstrap standard error of `log τ̂` (log-normal intervals only).
    pub log_se: Option<f64>,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub ci_method: CiMethod,
    pub replicates: usize,
    pub degenerate_redraws: usize,
    pub conf_level: f64,
    /// False when provided scores were reused instead of refitting.
    pub ps_uncertainty_included: bool,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub replicate_estimates: Vec<f64>,
}

/// Bootstrap inference for a single estimand.
pub fn bootstrap(
    d: &Dataset,
    spec: &EstimandSpec,
    mode: &PsMode,
    cfg: &BootstrapConfig,
) -> Result<EffectEstimate> {
    bootstrap_many(d, std::slice::from_ref(spec), mode, cfg)?
        .pop()
        .expect("one spec in, one result out")
}

/// Bootstrap inference for several estimands sharing the same resamples and
/// PS refits. A replicate is redrawn if any estimand with a defined
/// full-sample estimate fails on it.
pub fn bootstrap_many(
    d: &Dataset,
    specs: &[EstimandSpec],
    mode: &PsMode,
    cfg: &BootstrapConfig,
) -> Result<Vec<Result<EffectEstimate>>> {
    if cfg.replicates < 2 {
        return Err(Error::Bootstrap(format!(
            "need at least 2 replicates, got {}",
            cfg.replicates
        )));
    }
    if !(cfg.conf_level > 0.0 && cfg.conf_level < 1.0) {
        return Err(Error::Bootstrap(format!(
            "confidence level {} outside (0,1)",
            cfg.conf_level
        )));
    }
    match cfg.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Bootstrap(e.to_string()))?;
            pool.install(|| run(d, specs, mode, cfg))
        }
        None => run(d, specs, mode, cfg),
    }
}

/// Per-spec estimates and the refitted coefficients, if any.
type Replicate = (Vec<Result<f64>>, Option<Vec<f64>>);

fn point_estimates(
    d: &Dataset,
    specs: &[EstimandSpec],
    mode: &PsMode,
    start: Option<&[f64]>,
) -> Result<Replicate> {
    let opts = mode.options();
    let (ps, coefficients) = match mode {
        PsMode::Refit(_) => {
            let fit = match start {
                Some(s) => fit_logistic_from(d, opts, Some(s))?,
                None => fit_logistic(d, opts)?,
            };
            let coefficients = fit.coefficients.clone();
            (resolve_ps(d, Some(&fit), opts)?.values, Some(coefficients))
        }
        PsMode::Provided(_) => (resolve_ps(d, None, opts)?.values, None),
    };
    let points = specs
        .iter()
        .map(|s| estimate_point(d, &ps, s).map(|r| r.estimate))
        .collect();
    Ok((points, coefficients))
}

fn run(
    d: &Dataset,
    specs: &[EstimandSpec],
    mode: &PsMode,
    cfg: &BootstrapConfig,
) -> Result<Vec<Result<EffectEstimate>>> {
    if matches!(mode, PsMode::Refit(_)) && d.provided_ps().is_some() {
        return Err(Error::AmbiguousPsSource);
    }
    let (points, coefficients) = point_estimates(d, specs, mode, None)?;

    // estimands that can be bootstrapped at all
    let active: Vec<usize> = (0..specs.len())
        .filter(|&j| match &points[j] {
            Ok(p) => {
                cfg.ci_method != CiMethod::LogNormal || (specs[j].measure.is_ratio() && *p > 0.0)
            }
            Err(_) => false,
        })
        .collect();

    let b_total = cfg.replicates;
    let n = d.len();
    let max_draws = cfg.max_draw_factor.saturating_mul(b_total);
    let mut draws: Vec<Option<Vec<f64>>> = vec![None; b_total];
    let mut pending: Vec<usize> = (0..b_total).collect();
    let mut total_draws = 0usize;
    let mut round = 0u64;

    let replicate = |stream: u64| -> Option<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(stream);
        let indices: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        let resample = d.select_rows(&indices).ok()?;
        let (estimates, _) =
            point_estimates(&resample, specs, mode, coefficients.as_deref()).ok()?;
        active
            .iter()
            .map(|&j| match &estimates[j] {
                Ok(v) if cfg.ci_method == CiMethod::LogNormal && *v <= 0.0 => None,
                Ok(v) if v.is_finite() => Some(*v),
                _ => None,
            })
            .collect()
    };

    if !active.is_empty() {
        while !pending.is_empty() {
            if total_draws + pending.len() > max_draws {
                return Err(Error::Bootstrap(format!(
                    "more than {max_draws} draws needed: {} of {b_total} replicates still degenerate",
                    pending.len()
                )));
            }
            total_draws += pending.len();
            let results: Vec<Option<Vec<f64>>> = pending
                .par_iter()
                .map(|&b| replicate(round * b_total as u64 + b as u64))
                .collect();
            let mut still = Vec::new();
            for (&b, r) in pending.iter().zip(results) {
                match r {
                    Some(v) => draws[b] = Some(v),
                    None => still.push(b),
                }
            }
            pending = still;
            round += 1;
        }
    }
    let degenerate_redraws = total_draws.saturating_sub(b_total);

    let z = z_for_level(cfg.conf_level);
    let mut out = Vec::with_capacity(specs.len());
    for (j, point) in points.into_iter().enumerate() {
        let point = match point {
            Ok(p) => p,
            Err(e) => {
                out.push(Err(Error::Bootstrap(format!(
                    "point estimate undefined on the full sample: {e}"
                ))));
                continue;
            }
        };
        let Some(slot) = active.iter().position(|&a| a == j) else {
            out.push(Err(Error::Bootstrap(format!(
                "log-normal interval needs a positive ratio-measure estimate, got {} = {point}",
                specs[j].measure
            ))));
            continue;
        };
        let reps: Vec<f64> = draws
            .iter()
            .map(|v| v.as_ref().expect("all replicates drawn")[slot])
            .collect();
        out.push(Ok(summarize(point, reps, degenerate_redraws, z, mode, cfg)));
    }
    Ok(out)
}

fn summarize(
    point: f64,
    reps: Vec<f64>,
    degenerate_redraws: usize,
    z: f64,
    mode: &PsMode,
    cfg: &BootstrapConfig,
) -> EffectEstimate {
    let var = |xs: &[f64]| {
        let m = mean(xs);
        xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
    };
    let mut warnings = Vec::new();
    let sd = var(&reps).sqrt();
    let (se, log_se, lo, hi) = match cfg.ci_method {
        CiMethod::Normal => (Some(sd), None, point - z * sd, point + z * sd),
        CiMethod::Quantile => {
            if reps.len() < MIN_QUANTILE_REPLICATES {
                warnings.push(format!(
                    "quantile interval from {} replicates; at least {MIN_QUANTILE_REPLICATES} recommended",
                    reps.len()
                ));
            }
            let mut sorted = reps.clone();
            sorted.sort_by(f64::total_cmp);
            let tail = (1.0 - cfg.conf_level) / 2.0;
            (
                None,
                None,
                quantile_sorted(&sorted, tail),
                quantile_sorted(&sorted, 1.0 - tail),
            )
        }
        CiMethod::LogNormal => {
            let logs: Vec<f64> = reps.iter().map(|r| r.ln()).collect();
            let log_sd = var(&logs).sqrt();
            (
                Some(sd),
                Some(log_sd),
                point * (-z * log_sd).exp(),
                point * (z * log_sd).exp(),
            )
        }
    };
    let ps_uncertainty_included = matches!(mode, PsMode::Refit(_));
    if !ps_uncertainty_included {
        warnings.push("provided propensity scores reused in every replicate; PS estimation uncertainty not reflected".into());
    }
    EffectEstimate {
        point,
        se,
        log_se,
        ci_lower: lo,
        ci_upper: hi,
        ci_method: cfg.ci_method,
        replicates: reps.len(),
        degenerate_redraws,
        conf_level: cfg.conf_level,
        ps_uncertainty_included,
        warnings,
        replicate_estimates: reps,
    }
}
