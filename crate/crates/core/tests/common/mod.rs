#![allow(dead_code)]

use psweight::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::function::erf::erfc;

/// Logistic-treatment dataset with standard normal covariates.
pub fn random_dataset(seed: u64, n: usize, p: usize, binary: bool) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta: Vec<f64> = (0..p).map(|_| rng.gen_range(-0.8..0.8)).collect();
    loop {
        let x: Vec<Vec<f64>> = (0..p)
            .map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let mut a = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let eta: f64 = -0.2 + (0..p).map(|j| beta[j] * x[j][i]).sum::<f64>();
            let e = 1.0 / (1.0 + (-eta).exp());
            let ai = rng.gen::<f64>() < e;
            let mu = 1.0 + (0..p).map(|j| x[j][i]).sum::<f64>() + if ai { 2.0 } else { 0.0 };
            let yi = if binary {
                f64::from(u8::from(
                    rng.gen::<f64>() < 1.0 / (1.0 + (-(mu - 2.0) / 2.0).exp()),
                ))
            } else {
                mu + rng.sample::<f64, _>(StandardNormal)
            };
            a.push(f64::from(u8::from(ai)));
            y.push(yi);
        }
        let raw = RawDataset {
            treatment: a,
            outcome: y,
            outcome_kind: if binary {
                OutcomeKind::Binary
            } else {
                OutcomeKind::Continuous
            },
            covariate_names: (1..=p).map(|j| format!("x{j}")).collect(),
            covariates: x,
            provided_ps: None,
            unit_ids: None,
        };
        if let Ok(d) = Dataset::try_from(raw) {
            if d.n_treated() >= 3 && d.n_control() >= 3 {
                return d;
            }
        }
    }
}

/// Twelve units with fixed scores spanning both tails.
pub fn twelve_units() -> (Vec<bool>, Vec<f64>, Vec<f64>) {
    let a = [
        true, false, true, false, true, false, true, false, true, false, true, false,
    ];
    let y = [3.2, 1.1, 4.5, 2.0, 2.8, 0.7, 5.1, 1.9, 3.9, 2.4, 4.2, 1.5];
    let e = [
        0.04, 0.03, 0.12, 0.08, 0.35, 0.45, 0.55, 0.62, 0.91, 0.88, 0.97, 0.5,
    ];
    (a.to_vec(), y.to_vec(), e.to_vec())
}

pub fn dataset_with_ps(a: &[bool], y: &[f64], e: &[f64]) -> Dataset {
    Dataset::try_from(RawDataset {
        treatment: a.iter().map(|&t| if t { 1.0 } else { 0.0 }).collect(),
        outcome: y.to_vec(),
        outcome_kind: OutcomeKind::Continuous,
        covariate_names: vec![],
        covariates: vec![],
        provided_ps: Some(e.to_vec()),
        unit_ids: None,
    })
    .unwrap()
}

fn phi(x: f64, eps: f64) -> f64 {
    0.5 * erfc(-x / (eps * std::f64::consts::SQRT_2))
}

/// Tilting function written out from the closed forms, independent of the
/// library.
pub fn oracle_tilt(class: EstimandClass, scheme: Scheme, e: f64) -> f64 {
    let ind = |b: bool| if b { 1.0 } else { 0.0 };
    match scheme {
        Scheme::Matching => return e.min(1.0 - e),
        Scheme::Overlap => return e * (1.0 - e),
        Scheme::Entropy => return -e * (e / (1.0 - e)).ln() - (1.0 - e).ln(),
        Scheme::Beta { nu1, nu2 } => return e.powf(nu1 - 1.0) * (1.0 - e).powf(nu2 - 1.0),
        Scheme::Ipw => return 1.0,
        _ => {}
    }
    match (class, scheme) {
        (EstimandClass::Wate, Scheme::IpwTreated) => e,
        (EstimandClass::Wate, Scheme::IpwControls) => 1.0 - e,
        (EstimandClass::Wate, Scheme::Trim { alpha }) => ind(alpha < e && e < 1.0 - alpha),
        (EstimandClass::Wate, Scheme::SmoothTrim { alpha, epsilon }) => {
            phi(e - alpha, epsilon) * phi(1.0 - alpha - e, epsilon)
        }
        (EstimandClass::Wate, Scheme::Trunc { alpha }) => {
            ind(alpha < e && e < 1.0 - alpha)
                + ind(e <= alpha) * e / alpha
                + ind(e >= 1.0 - alpha) * (1.0 - e) / (1.0 - alpha)
        }
        (EstimandClass::Wate, Scheme::Trapezoidal { k }) => f64::min(1.0, k * e.min(1.0 - e)),
        (EstimandClass::Watt, Scheme::Trim { alpha }) => ind(e < 1.0 - alpha),
        (EstimandClass::Watt, Scheme::SmoothTrim { alpha, epsilon }) => {
            phi(1.0 - alpha - e, epsilon)
        }
        (EstimandClass::Watt, Scheme::Trunc { alpha }) => {
            ind(e < 1.0 - alpha) + ind(e >= 1.0 - alpha) * (1.0 - e) * alpha / ((1.0 - alpha) * e)
        }
        (EstimandClass::Watc, Scheme::Trim { alpha }) => ind(e > alpha),
        (EstimandClass::Watc, Scheme::SmoothTrim { alpha, epsilon }) => phi(e - alpha, epsilon),
        (EstimandClass::Watc, Scheme::Trunc { alpha }) => {
            ind(e > alpha) + ind(e <= alpha) * e * (1.0 - alpha) / (alpha * (1.0 - e))
        }
        _ => panic!("no oracle for {class:?} {scheme:?}"),
    }
}

/// Difference in weighted means by explicit summation.
pub fn oracle_estimate(
    class: EstimandClass,
    scheme: Scheme,
    a: &[bool],
    y: &[f64],
    e: &[f64],
) -> f64 {
    let (mut n1, mut d1, mut n0, mut d0) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..a.len() {
        let t = oracle_tilt(class, scheme, e[i]);
        let (w1, w0) = match class {
            EstimandClass::Wate => (t / e[i], t / (1.0 - e[i])),
            EstimandClass::Watt => (1.0, t * e[i] / (1.0 - e[i])),
            EstimandClass::Watc => (t * (1.0 - e[i]) / e[i], 1.0),
        };
        if a[i] {
            n1 += w1 * y[i];
            d1 += w1;
        } else {
            n0 += w0 * y[i];
            d0 += w0;
        }
    }
    n1 / d1 - n0 / d0
}

/// Every scheme accepted by `class`, with parameters chosen so that each
/// arm keeps positive weight on [`twelve_units`].
pub fn all_schemes(class: EstimandClass) -> Vec<Scheme> {
    let mut v = vec![
        Scheme::Ipw,
        Scheme::Trim { alpha: 0.1 },
        Scheme::SmoothTrim {
            alpha: 0.1,
            epsilon: 0.01,
        },
        Scheme::SmoothTrim {
            alpha: 0.05,
            epsilon: 0.2,
        },
        Scheme::Trunc { alpha: 0.1 },
        Scheme::Trunc { alpha: 0.05 },
        Scheme::Matching,
        Scheme::Overlap,
        Scheme::Entropy,
        Scheme::beta(3.0),
        Scheme::Beta { nu1: 2.0, nu2: 4.0 },
    ];
    if class == EstimandClass::Wate {
        v.extend([
            Scheme::IpwTreated,
            Scheme::IpwControls,
            Scheme::Trapezoidal { k: 3.0 },
        ]);
    }
    v
}

/// Relative agreement `|x − y| ≤ tol·max(1, |y|)`.
pub fn close(x: f64, y: f64, tol: f64) -> bool {
    (x - y).abs() <= tol * y.abs().max(1.0)
}
