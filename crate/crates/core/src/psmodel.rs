//! Propensity scores `e(X) = P(A = 1 | X)`.
//!
//! Logistic regression is fitted by iteratively reweighted least squares
//! (Newton-Raphson on the Bernoulli log-likelihood) with step halving.
//! Scores estimated elsewhere can be passed through instead.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::stats::{expit, logit, softplus};
use crate::{Error, Result};

/// Eigenvalue ratio of the column-normalized Gram matrix below which the
/// design is treated as rank deficient.
const RANK_TOLERANCE: f64 = 1e-12;
/// Consecutive iterations with a vanishing score but a non-vanishing Newton
/// step before the fit is declared separated.
const FLAT_DIRECTION_PATIENCE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    /// Convergence threshold on the sup-norm of the score vector.
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Lower clamp applied to every propensity score.
    pub clamp_lo: f64,
    /// Upper clamp applied to every propensity score.
    pub clamp_hi: f64,
    /// `‖β‖∞` beyond which a non-converged fit is reported as separated.
    pub separation_bound: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tol: 1e-8,
            max_iter: 100,
            max_halvings: 20,
            clamp_lo: 1e-6,
            clamp_hi: 1.0 - 1e-6,
            separation_bound: 1e3,
        }
    }
}

impl FitOptions {
    pub fn clamp(&self, e: f64) -> f64 {
        e.clamp(self.clamp_lo, self.clamp_hi)
    }
}

/// A fitted logistic propensity model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsFit {
    /// Intercept first, then one coefficient per covariate.
    pub coefficients: Vec<f64>,
    pub fitted_ps: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Sup-norm of the score at the returned coefficients.
    pub max_abs_score: f64,
    /// Number of fitted values moved onto a clamp bound.
    pub clamped_count: usize,
    /// Log-likelihood after each accepted iterate, starting value first.
    pub log_likelihood_trace: Vec<f64>,
}

impl PsFit {
    pub fn log_likelihood(&self) -> f64 {
        *self
            .log_likelihood_trace
            .last()
            .expect("trace holds the starting value")
    }
}

/// Intercept-augmented design, stored row-major.
struct Design {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl Design {
    fn new(columns: &[Vec<f64>], n: usize) -> Self {
        let cols = columns.len() + 1;
        let mut values = Vec::with_capacity(n * cols);
        for i in 0..n {
            values.push(1.0);
            values.extend(columns.iter().map(|c| c[i]));
        }
        Design {
            rows: n,
            cols,
            values,
        }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    fn linear_predictor(&self, beta: &[f64], out: &mut [f64]) {
        for (i, eta) in out.iter_mut().enumerate() {
            *eta = self.row(i).iter().zip(beta).map(|(x, b)| x * b).sum();
        }
    }

    fn is_rank_deficient(&self) -> bool {
        let k = self.cols;
        let mut gram = DMatrix::<f64>::zeros(k, k);
        for i in 0..self.rows {
            let r = self.row(i);
            for a in 0..k {
                for b in 0..=a {
                    gram[(a, b)] += r[a] * r[b];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                gram[(b, a)] = gram[(a, b)];
            }
        }
        let norms: Vec<f64> = (0..k).map(|a| gram[(a, a)].sqrt()).collect();
        if norms.contains(&0.0) {
            return true;
        }
        for a in 0..k {
            for b in 0..k {
                gram[(a, b)] /= norms[a] * norms[b];
            }
        }
        let eig = gram.symmetric_eigenvalues();
        let max = eig.iter().cloned().fold(f64::MIN, f64::max);
        let min = eig.iter().cloned().fold(f64::MAX, f64::min);
        min <= RANK_TOLERANCE * max
    }
}

fn log_likelihood(eta: &[f64], a: &[bool]) -> f64 {
    eta.iter()
        .zip(a)
        .map(|(&u, &t)| if t { u - softplus(u) } else { -softplus(u) })
        .sum()
}

/// Fits `logit e(X) = β₀ + X'β` on all covariates of `d`.
pub fn fit_logistic(d: &Dataset, opts: &FitOptions) -> Result<PsFit> {
    fit_logistic_from(d, opts, None)
}

/// As [`fit_logistic`], starting Newton's method from `start` when given.
pub fn fit_logistic_from(d: &Dataset, opts: &FitOptions, start: Option<&[f64]>) -> Result<PsFit> {
    fit_logistic_columns(d.covariates(), d.treatment(), opts, start)
}

/// Logistic fit on explicit covariate columns.
pub fn fit_logistic_columns(
    columns: &[Vec<f64>],
    treatment: &[bool],
    opts: &FitOptions,
    start: Option<&[f64]>,
) -> Result<PsFit> {
    let n = treatment.len();
    let k = columns.len() + 1;
    if let Some(c) = columns.iter().find(|c| c.len() != n) {
        return Err(Error::LengthMismatch {
            expected: n,
            found: c.len(),
        });
    }
    if n <= k {
        return Err(Error::InvalidEstimand(format!(
            "logistic model needs more units ({n}) than parameters ({k})"
        )));
    }
    let design = Design::new(columns, n);
    if design.is_rank_deficient() {
        return Err(Error::Collinear);
    }

    let mut beta = match start {
        Some(s) if s.len() == k => s.to_vec(),
        Some(s) => {
            return Err(Error::LengthMismatch {
                expected: k,
                found: s.len(),
            })
        }
        None => {
            let share = treatment.iter().filter(|&&t| t).count() as f64 / n as f64;
            let mut b = vec![0.0; k];
            b[0] = logit(share);
            b
        }
    };

    let mut eta = vec![0.0; n];
    let mut trial_eta = vec![0.0; n];
    let mut trial = vec![0.0; k];
    design.linear_predictor(&beta, &mut eta);
    let mut ll = log_likelihood(&eta, treatment);
    let mut trace = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    let mut score_norm;
    let mut flat_streak = 0;

    loop {
        // score X'(A - p) and information X'WX
        let mut score = DVector::<f64>::zeros(k);
        let mut info = DMatrix::<f64>::zeros(k, k);
        for i in 0..n {
            let p = expit(eta[i]);
            let resid = if treatment[i] { 1.0 - p } else { -p };
            let w = p * (1.0 - p);
            let r = design.row(i);
            for a in 0..k {
                score[a] += resid * r[a];
                let wa = w * r[a];
                for b in 0..=a {
                    info[(a, b)] += wa * r[b];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                info[(b, a)] = info[(a, b)];
            }
        }
        score_norm = score.amax();
        let beta_norm = beta.iter().fold(0.0f64, |m, b| m.max(b.abs()));

        if score_norm > opts.tol && beta_norm > opts.separation_bound {
            return Err(Error::Separation);
        }
        if iterations >= opts.max_iter {
            break;
        }

        let step = match info.clone().cholesky() {
            Some(chol) => chol.solve(&score),
            // information matrix loses definiteness only when the weights
            // p(1-p) underflow, i.e. fitted probabilities are numerically 0 or 1
            None => return Err(Error::Separation),
        };
        let step_norm = step.amax();
        let small_step = step_norm <= 1e-6 * (1.0 + beta_norm);
        if score_norm <= opts.tol {
            if small_step {
                converged = true;
                break;
            }
            flat_streak += 1;
            if flat_streak >= FLAT_DIRECTION_PATIENCE {
                return Err(Error::Separation);
            }
        } else {
            flat_streak = 0;
        }

        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            for a in 0..k {
                trial[a] = beta[a] + scale * step[a];
            }
            design.linear_predictor(&trial, &mut trial_eta);
            let trial_ll = log_likelihood(&trial_eta, treatment);
            if trial_ll >= ll - 8.0 * f64::EPSILON * ll.abs() {
                beta.copy_from_slice(&trial);
                std::mem::swap(&mut eta, &mut trial_eta);
                ll = trial_ll.max(ll);
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        iterations += 1;
        if !accepted {
            // no ascent direction left at working precision
            break;
        }
        trace.push(ll);
        if score_norm <= opts.tol && small_step {
            converged = true;
            break;
        }
    }

    // recompute the score at the final coefficients
    let mut final_score = vec![0.0; k];
    for i in 0..n {
        let p = expit(eta[i]);
        let resid = if treatment[i] { 1.0 - p } else { -p };
        for (s, x) in final_score.iter_mut().zip(design.row(i)) {
            *s += resid * x;
        }
    }
    let max_abs_score = final_score.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let beta_norm = beta.iter().fold(0.0f64, |m, b| m.max(b.abs()));
    if !converged && beta_norm > opts.separation_bound {
        return Err(Error::Separation);
    }

    let mut clamped_count = 0;
    let fitted_ps = eta
        .iter()
        .map(|&u| {
            let p = expit(u);
            let c = opts.clamp(p);
            if c != p {
                clamped_count += 1;
            }
            c
        })
        .collect();

    Ok(PsFit {
        coefficients: beta,
        fitted_ps,
        converged,
        iterations,
        max_abs_score,
        clamped_count,
        log_likelihood_trace: trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PsSource {
    Fitted,
    Provided,
}

impl std::fmt::Display for PsSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PsSource::Fitted => "fitted",
            PsSource::Provided => "provided",
        })
    }
}

/// Propensity scores ready for weighting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedPs {
    pub values: Vec<f64>,
    pub source: PsSource,
    pub clamped_count: usize,
}

/// Picks the single available PS source: the dataset's provided column or a
/// fitted model. Values are clamped to `[clamp_lo, clamp_hi]`.
pub fn resolve_ps(d: &Dataset, fit: Option<&PsFit>, opts: &FitOptions) -> Result<ResolvedPs> {
    match (d.provided_ps(), fit) {
        (Some(_), Some(_)) => Err(Error::AmbiguousPsSource),
        (None, None) => Err(Error::MissingPsSource),
        (Some(ps), None) => {
            let mut clamped_count = 0;
            let values = ps
                .iter()
                .map(|&e| {
                    let c = opts.clamp(e);
                    if c != e {
                        clamped_count += 1;
                    }
                    c
                })
                .collect();
            Ok(ResolvedPs {
                values,
                source: PsSource::Provided,
                clamped_count,
            })
        }
        (None, Some(f)) => {
            if f.fitted_ps.len() != d.len() {
                return Err(Error::LengthMismatch {
                    expected: d.len(),
                    found: f.fitted_ps.len(),
                });
            }
            Ok(ResolvedPs {
                values: f.fitted_ps.clone(),
                source: PsSource::Fitted,
                clamped_count: f.clamped_count,
            })
        }
    }
}
