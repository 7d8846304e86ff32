// Risk difference, risk ratio and odds ratio for a binary outcome, with
// log-normal bootstrap intervals for the ratio measures.

use psweight::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn simulate(n: usize) -> RawDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut a, mut y, mut x) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..n {
        let xi: f64 = rng.gen_range(-2.0..2.0);
        let e = 1.0 / (1.0 + (-0.8 * xi).exp());
        let ai = rng.gen::<f64>() < e;
        let p = 1.0 / (1.0 + (-(-1.0 + 0.5 * xi + if ai { 0.7 } else { 0.0 })).exp());
        a.push(f64::from(u8::from(ai)));
        y.push(f64::from(u8::from(rng.gen::<f64>() < p)));
        x.push(xi);
    }
    RawDataset {
        treatment: a,
        outcome: y,
        outcome_kind: OutcomeKind::Binary,
        covariate_names: vec!["x".into()],
        covariates: vec![x],
        provided_ps: None,
        unit_ids: None,
    }
}

pub fn run_example() -> psweight::Result<()> {
    let data = Dataset::try_from(simulate(600))?;
    let fit = fit_logistic(&data, &FitOptions::default())?;
    let ps = resolve_ps(&data, Some(&fit), &FitOptions::default())?;
    let mode = PsMode::for_dataset(&data, FitOptions::default());

    for scheme in [Scheme::Ipw, Scheme::Overlap] {
        let ws = WeightScheme::new(EstimandClass::Wate, scheme)?;
        for measure in [Measure::Rd, Measure::Rr, Measure::Or] {
            let spec = EstimandSpec::new(ws, measure);
            let p = estimate_point(&data, &ps.values, &spec)?;
            let ci_method = if measure.is_ratio() {
                CiMethod::LogNormal
            } else {
                CiMethod::Normal
            };
            let cfg = BootstrapConfig {
                replicates: 40,
                seed: 5,
                ci_method,
                ..Default::default()
            };
            let est = bootstrap(&data, &spec, &mode, &cfg)?;
            println!(
                "{:<4} {}  p1={:.3} p0={:.3}  est={:.4}  [{:.4}, {:.4}] ({})",
                ws.estimand_name(),
                measure,
                p.treated_mean,
                p.control_mean,
                p.estimate,
                est.ci_lower,
                est.ci_upper,
                est.ci_method
            );
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> psweight::Result<()> {
    run_example()
}
