//! Normalized (ratio-form) weighted estimators.
//!
//! Each estimand contrasts a weighted treated-arm mean with a weighted
//! control-arm mean, using the unit weights from [`crate::tilting`]. For
//! binary outcomes the two means are weighted proportions and can be
//! contrasted as a risk difference, risk ratio or odds ratio.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, OutcomeKind};
use crate::tilting::{unit_weights, EstimandClass, Scheme, WeightScheme};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Measure {
    #[serde(rename = "RD")]
    Rd,
    #[serde(rename = "RR")]
    Rr,
    #[serde(rename = "OR")]
    Or,
}

impl Measure {
    pub fn as_str(&self) -> &'static str {
        match self {
            Measure::Rd => "RD",
            Measure::Rr => "RR",
            Measure::Or => "OR",
        }
    }

    pub fn is_ratio(&self) -> bool {
        !matches!(self, Measure::Rd)
    }

    /// Contrast of two arm means under this measure.
    pub fn contrast(&self, treated_mean: f64, control_mean: f64) -> Result<f64> {
        match self {
            Measure::Rd => Ok(treated_mean - control_mean),
            Measure::Rr => {
                if control_mean == 0.0 {
                    Err(Error::UndefinedRatio)
                } else {
                    Ok(treated_mean / control_mean)
                }
            }
            Measure::Or => {
                if control_mean == 0.0 || treated_mean == 1.0 {
                    Err(Error::UndefinedRatio)
                } else {
                    Ok(treated_mean * (1.0 - control_mean) / (control_mean * (1.0 - treated_mean)))
                }
            }
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rd" => Ok(Measure::Rd),
            "rr" => Ok(Measure::Rr),
            "or" => Ok(Measure::Or),
            other => Err(Error::InvalidEstimand(format!(
                "unknown effect measure `{other}`"
            ))),
        }
    }
}

/// A weighting scheme together with the effect measure to report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimandSpec {
    pub scheme: WeightScheme,
    pub measure: Measure,
}

impl EstimandSpec {
    pub fn new(scheme: WeightScheme, measure: Measure) -> Self {
        EstimandSpec { scheme, measure }
    }

    pub fn difference(scheme: WeightScheme) -> Self {
        EstimandSpec {
            scheme,
            measure: Measure::Rd,
        }
    }

    pub fn label(&self) -> String {
        self.scheme.label()
    }

    fn check_outcome(&self, kind: OutcomeKind) -> Result<()> {
        if self.measure.is_ratio() && kind != OutcomeKind::Binary {
            return Err(Error::InvalidEstimand(format!(
                "{} requires a binary outcome",
                self.measure
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointResult {
    pub estimate: f64,
    pub treated_mean: f64,
    pub control_mean: f64,
    pub treated_weight_sum: f64,
    pub control_weight_sum: f64,
    /// Units of each arm that received zero weight (e.g. trimmed away).
    pub zero_weight_treated: usize,
    pub zero_weight_control: usize,
}

/// Contrasts weighted arm means given precomputed unit weights.
pub fn estimate_from_weights(
    outcome: &[f64],
    treated: &[bool],
    weights: &[f64],
    measure: Measure,
) -> Result<PointResult> {
    let n = treated.len();
    if outcome.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: outcome.len(),
        });
    }
    if weights.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: weights.len(),
        });
    }
    let (mut sw1, mut swy1, mut sw0, mut swy0) = (0.0, 0.0, 0.0, 0.0);
    let (mut z1, mut z0) = (0, 0);
    for i in 0..n {
        let (w, y) = (weights[i], outcome[i]);
        if treated[i] {
            sw1 += w;
            swy1 += w * y;
            z1 += usize::from(w == 0.0);
        } else {
            sw0 += w;
            swy0 += w * y;
            z0 += usize::from(w == 0.0);
        }
    }
    if !(sw1 > 0.0) {
        return Err(Error::DegenerateArm("treated"));
    }
    if !(sw0 > 0.0) {
        return Err(Error::DegenerateArm("control"));
    }
    let treated_mean = swy1 / sw1;
    let control_mean = swy0 / sw0;
    Ok(PointResult {
        estimate: measure.contrast(treated_mean, control_mean)?,
        treated_mean,
        control_mean,
        treated_weight_sum: sw1,
        control_weight_sum: sw0,
        zero_weight_treated: z1,
        zero_weight_control: z0,
    })
}

/// Point estimate of one estimand.
pub fn estimate_point(d: &Dataset, ps: &[f64], spec: &EstimandSpec) -> Result<PointResult> {
    spec.check_outcome(d.outcome_kind())?;
    if ps.len() != d.len() {
        return Err(Error::LengthMismatch {
            expected: d.len(),
            found: ps.len(),
        });
    }
    let weights = unit_weights(&spec.scheme, ps, d.treatment())?;
    estimate_from_weights(d.outcome(), d.treatment(), &weights, spec.measure)
}

/// One row of a result table. Failures are kept in the row.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRow {
    pub label: String,
    pub spec: EstimandSpec,
    pub result: std::result::Result<PointResult, String>,
}

/// Maps [`estimate_point`] over `specs`, recording per-row failures.
pub fn estimate_all(d: &Dataset, ps: &[f64], specs: &[EstimandSpec]) -> Vec<EstimateRow> {
    specs
        .iter()
        .map(|spec| EstimateRow {
            label: spec.label(),
            spec: *spec,
            result: estimate_point(d, ps, spec).map_err(|e| e.to_string()),
        })
        .collect()
}

/// Optional rows added to the default catalog of a class.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CatalogOptions {
    pub beta_nus: Vec<f64>,
    pub trim_alphas: Vec<f64>,
    pub trunc_alphas: Vec<f64>,
    /// `(alpha, epsilon)` pairs.
    pub smooth_trim: Vec<(f64, f64)>,
    /// Trapezoid slopes; WATE only.
    pub trapezoid_ks: Vec<f64>,
}

/// Default schemes of a class followed by the requested beta, trimming and
/// truncation variants.
///
/// WATE: overall, treated, control, overlap, matching, entropy.
/// WATT / WATC: overall, overlap, matching, entropy.
pub fn catalog(class: EstimandClass, opts: &CatalogOptions) -> Result<Vec<WeightScheme>> {
    let mut schemes = vec![Scheme::Ipw];
    if class == EstimandClass::Wate {
        schemes.extend([Scheme::IpwTreated, Scheme::IpwControls]);
    }
    schemes.extend([Scheme::Overlap, Scheme::Matching, Scheme::Entropy]);
    schemes.extend(opts.beta_nus.iter().map(|&nu| Scheme::beta(nu)));
    schemes.extend(opts.trim_alphas.iter().map(|&alpha| Scheme::Trim { alpha }));
    schemes.extend(
        opts.trunc_alphas
            .iter()
            .map(|&alpha| Scheme::Trunc { alpha }),
    );
    schemes.extend(
        opts.smooth_trim
            .iter()
            .map(|&(alpha, epsilon)| Scheme::SmoothTrim { alpha, epsilon }),
    );
    if class == EstimandClass::Wate {
        schemes.extend(opts.trapezoid_ks.iter().map(|&k| Scheme::Trapezoidal { k }));
    }
    schemes
        .into_iter()
        .map(|s| WeightScheme::new(class, s))
        .collect()
}
