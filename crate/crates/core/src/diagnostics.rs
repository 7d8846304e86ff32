//! Post-weighting diagnostics: effective sample size, covariate balance and
//! propensity-score overlap.
//!
//! ASMD denominators use the *unweighted* per-arm sample variances (divisor
//! `n - 1`), so weighted and unweighted ASMDs share the same scale.

use serde::Serialize;

use crate::data::Dataset;
use crate::stats::{quantile_sorted, sample_variance};
use crate::tilting::{unit_weights, WeightScheme};
use crate::{Error, Result};

/// Histogram bins used when none are requested.
pub const DEFAULT_BINS: usize = 30;

/// `(Σw)² / Σw²`.
pub fn ess(w: &[f64]) -> Result<f64> {
    let sum: f64 = w.iter().sum();
    let sum_sq: f64 = w.iter().map(|x| x * x).sum();
    if !(sum_sq > 0.0) {
        return Err(Error::ZeroWeights);
    }
    Ok(sum * sum / sum_sq)
}

fn weighted_mean(x: &[f64], w: &[f64]) -> f64 {
    let sw: f64 = w.iter().sum();
    x.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() / sw
}

/// Absolute standardized mean difference of one covariate column.
///
/// Returns `Ok(None)` when the pooled standard deviation is zero or an arm
/// has fewer than two units.
pub fn asmd_column(x: &[f64], treated: &[bool], w: &[f64]) -> Result<Option<f64>> {
    if x.len() != treated.len() {
        return Err(Error::LengthMismatch {
            expected: treated.len(),
            found: x.len(),
        });
    }
    if w.len() != treated.len() {
        return Err(Error::LengthMismatch {
            expected: treated.len(),
            found: w.len(),
        });
    }
    let split = |arm: bool| -> (Vec<f64>, Vec<f64>) {
        x.iter()
            .zip(w)
            .zip(treated)
            .filter(|(_, &t)| t == arm)
            .map(|((&x, &w), _)| (x, w))
            .unzip()
    };
    let (x1, w1) = split(true);
    let (x0, w0) = split(false);
    if !(w1.iter().sum::<f64>() > 0.0) {
        return Err(Error::DegenerateArm("treated"));
    }
    if !(w0.iter().sum::<f64>() > 0.0) {
        return Err(Error::DegenerateArm("control"));
    }
    let (Some(s1), Some(s0)) = (sample_variance(&x1), sample_variance(&x0)) else {
        return Ok(None);
    };
    let pooled = ((s1 + s0) / 2.0).sqrt();
    if !(pooled > 0.0) {
        return Ok(None);
    }
    Ok(Some(
        (weighted_mean(&x1, &w1) - weighted_mean(&x0, &w0)).abs() / pooled,
    ))
}

/// ASMD of the named covariate under unit weights `w`.
pub fn asmd(d: &Dataset, w: &[f64], covariate: &str) -> Result<Option<f64>> {
    let x = d
        .covariate(covariate)
        .ok_or_else(|| Error::MissingColumn(covariate.to_string()))?;
    asmd_column(x, d.treatment(), w)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmSummary {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    /// Fraction of the arm with `e < α` or `e > 1 - α`, one per requested α.
    pub extreme_fraction: Vec<f64>,
    /// Counts per histogram bin.
    pub histogram: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapSummary {
    pub alphas: Vec<f64>,
    /// `bins + 1` equally spaced edges over `[0, 1]`.
    pub bin_edges: Vec<f64>,
    pub treated: Option<ArmSummary>,
    pub control: Option<ArmSummary>,
}

fn arm_summary(ps: &[f64], alphas: &[f64], bins: usize) -> Option<ArmSummary> {
    if ps.is_empty() {
        return None;
    }
    let mut sorted = ps.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = ps.len();
    let extreme_fraction = alphas
        .iter()
        .map(|&a| ps.iter().filter(|&&e| e < a || e > 1.0 - a).count() as f64 / n as f64)
        .collect();
    let mut histogram = vec![0usize; bins];
    for &e in ps {
        let idx = ((e * bins as f64).floor() as usize).min(bins - 1);
        histogram[idx] += 1;
    }
    Some(ArmSummary {
        n,
        min: sorted[0],
        q1: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        q3: quantile_sorted(&sorted, 0.75),
        max: sorted[n - 1],
        extreme_fraction,
        histogram,
    })
}

/// Per-arm quantiles, extreme-score fractions and a fixed-width histogram of
/// propensity scores.
pub fn overlap_summary(
    ps: &[f64],
    treated: &[bool],
    alphas: &[f64],
    bins: usize,
) -> Result<OverlapSummary> {
    if ps.len() != treated.len() {
        return Err(Error::LengthMismatch {
            expected: treated.len(),
            found: ps.len(),
        });
    }
    let bins = bins.max(1);
    let pick = |arm: bool| -> Vec<f64> {
        ps.iter()
            .zip(treated)
            .filter(|(_, &t)| t == arm)
            .map(|(&e, _)| e)
            .collect()
    };
    Ok(OverlapSummary {
        alphas: alphas.to_vec(),
        bin_edges: (0..=bins).map(|i| i as f64 / bins as f64).collect(),
        treated: arm_summary(&pick(true), alphas, bins),
        control: arm_summary(&pick(false), alphas, bins),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EssRow {
    pub treated: f64,
    pub control: f64,
    /// Sum of the two arm values.
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovariateBalance {
    pub covariate: String,
    pub unweighted: Option<f64>,
    pub weighted: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeBalance {
    pub scheme: String,
    pub class: String,
    pub label: String,
    pub estimand: String,
    pub ess: EssRow,
    pub asmd: Vec<CovariateBalance>,
    /// Largest defined weighted ASMD.
    pub max_asmd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceReport {
    pub n_treated: usize,
    pub n_control: usize,
    pub schemes: Vec<SchemeBalance>,
    pub overlap: OverlapSummary,
    pub clamped_count: usize,
}

/// ESS of each arm under unit weights `w`.
pub fn arm_ess(treated: &[bool], w: &[f64]) -> Result<EssRow> {
    let arm = |side: bool| -> Vec<f64> {
        w.iter()
            .zip(treated)
            .filter(|p| *p.1 == side)
            .map(|p| *p.0)
            .collect()
    };
    let e1 = ess(&arm(true))?;
    let e0 = ess(&arm(false))?;
    Ok(EssRow {
        treated: e1,
        control: e0,
        total: e1 + e0,
    })
}

/// Balance and overlap diagnostics for each requested scheme.
pub fn balance_report(
    d: &Dataset,
    ps: &[f64],
    schemes: &[WeightScheme],
    alphas: &[f64],
    bins: usize,
    clamped_count: usize,
) -> Result<BalanceReport> {
    let a = d.treatment();
    let ones = vec![1.0; d.len()];
    let baseline: Vec<Option<f64>> = d
        .covariates()
        .iter()
        .map(|x| asmd_column(x, a, &ones))
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(schemes.len());
    for s in schemes {
        let w = unit_weights(s, ps, a)?;
        let ess = arm_ess(a, &w)?;
        let mut balance = Vec::with_capacity(d.n_covariates());
        for (j, x) in d.covariates().iter().enumerate() {
            balance.push(CovariateBalance {
                covariate: d.covariate_names()[j].clone(),
                unweighted: baseline[j],
                weighted: asmd_column(x, a, &w)?,
            });
        }
        let max_asmd = balance
            .iter()
            .filter_map(|b| b.weighted)
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
        rows.push(SchemeBalance {
            scheme: s.scheme().to_string(),
            class: s.class().to_string(),
            label: s.label(),
            estimand: s.estimand_name(),
            ess,
            asmd: balance,
            max_asmd,
        });
    }

    Ok(BalanceReport {
        n_treated: d.n_treated(),
        n_control: d.n_control(),
        schemes: rows,
        overlap: overlap_summary(ps, a, alphas, bins)?,
        clamped_count,
    })
}

impl BalanceReport {
    /// Long-format ASMD table: `class,scheme,label,covariate,asmd_unweighted,asmd_weighted`.
    pub fn write_asmd_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "class",
            "scheme",
            "label",
            "covariate",
            "asmd_unweighted",
            "asmd_weighted",
        ])?;
        let fmt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| x.to_string());
        for s in &self.schemes {
            for b in &s.asmd {
                out.write_record([
                    s.class.as_str(),
                    s.scheme.as_str(),
                    s.label.as_str(),
                    b.covariate.as_str(),
                    &fmt(b.unweighted),
                    &fmt(b.weighted),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// `class,scheme,label,estimand,n_treated,n_control,ess_treated,ess_control,ess_total`.
    pub fn write_ess_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "class",
            "scheme",
            "label",
            "estimand",
            "n_treated",
            "n_control",
            "ess_treated",
            "ess_control",
            "ess_total",
        ])?;
        for s in &self.schemes {
            out.write_record([
                s.class.clone(),
                s.scheme.clone(),
                s.label.clone(),
                s.estimand.clone(),
                self.n_treated.to_string(),
                self.n_control.to_string(),
                s.ess.treated.to_string(),
                s.ess.control.to_string(),
                s.ess.total.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// One row per arm: quantiles, then one `extreme_<alpha>` column per α.
    pub fn write_overlap_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = ["arm", "n", "min", "q1", "median", "q3", "max"]
            .map(String::from)
            .to_vec();
        header.extend(self.overlap.alphas.iter().map(|a| format!("extreme_{a}")));
        out.write_record(&header)?;
        for (arm, s) in [
            ("treated", &self.overlap.treated),
            ("control", &self.overlap.control),
        ] {
            if let Some(s) = s {
                let mut rec = vec![arm.to_string(), s.n.to_string()];
                rec.extend(
                    [s.min, s.q1, s.median, s.q3, s.max]
                        .iter()
                        .map(|v| v.to_string()),
                );
                rec.extend(s.extreme_fraction.iter().map(|v| v.to_string()));
                out.write_record(&rec)?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// `arm,bin_lower,bin_upper,count`.
    pub fn write_histogram_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["arm", "bin_lower", "bin_upper", "count"])?;
        let edges = &self.overlap.bin_edges;
        for (arm, s) in [
            ("treated", &self.overlap.treated),
            ("control", &self.overlap.control),
        ] {
            if let Some(s) = s {
                for (i, c) in s.histogram.iter().enumerate() {
                    out.write_record([
                        arm.to_string(),
                        edges[i].to_string(),
                        edges[i + 1].to_string(),
                        c.to_string(),
                    ])?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ess_examples() {
        assert_eq!(ess(&[1.0; 7]).unwrap(), 7.0);
        assert!((ess(&[1.0, 1.0, 2.0]).unwrap() - 16.0 / 6.0).abs() < 1e-15);
        assert_eq!(ess(&[0.0, 0.0, 5.0]).unwrap(), 1.0);
        assert!(matches!(ess(&[0.0, 0.0]), Err(Error::ZeroWeights)));
    }

    #[test]
    fn asmd_by_hand() {
        // treated x = {1, 3}, controls x = {2, 6}; weights (1,3) and (1,1)
        let x = [1.0, 3.0, 2.0, 6.0];
        let a = [true, true, false, false];
        let w = [1.0, 3.0, 1.0, 1.0];
        // weighted means 2.5 and 4; variances 2 and 8; pooled sd sqrt(5)
        let expected = 1.5 / 5f64.sqrt();
        assert!((asmd_column(&x, &a, &w).unwrap().unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn asmd_zero_when_means_match() {
        let x = [1.0, 3.0, 0.0, 4.0];
        let a = [true, true, false, false];
        assert_eq!(asmd_column(&x, &a, &[1.0; 4]).unwrap(), Some(0.0));
    }

    #[test]
    fn asmd_undefined_for_constant_covariate() {
        let a = [true, true, false, false];
        assert_eq!(asmd_column(&[2.0; 4], &a, &[1.0; 4]).unwrap(), None);
    }

    #[test]
    fn constant_ps_overlap() {
        let ps = [0.5; 6];
        let a = [true, false, true, false, true, false];
        let s = overlap_summary(&ps, &a, &[0.05, 0.1], DEFAULT_BINS).unwrap();
        let t = s.treated.unwrap();
        assert_eq!([t.min, t.q1, t.median, t.q3, t.max], [0.5; 5]);
        assert_eq!(t.extreme_fraction, vec![0.0, 0.0]);
        assert_eq!(t.histogram.iter().sum::<usize>(), 3);
        assert_eq!(t.histogram[15], 3);
        assert_eq!(s.bin_edges.len(), DEFAULT_BINS + 1);
    }

    #[test]
    fn two_point_ps_is_fully_extreme() {
        let ps = [0.1, 0.1, 0.9, 0.9];
        let a = [false, false, true, true];
        let s = overlap_summary(&ps, &a, &[0.15], 10).unwrap();
        assert_eq!(s.treated.unwrap().extreme_fraction, vec![1.0]);
        assert_eq!(s.control.unwrap().extreme_fraction, vec![1.0]);
    }
}
