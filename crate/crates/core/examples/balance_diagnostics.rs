// Effective sample size, covariate balance and PS overlap under several
// weighting schemes, with the CSV exports used for plotting.

use psweight::prelude::*;
use psweight::simulation::{generate_sample, DgpConfig};

pub fn run_example() -> psweight::Result<()> {
    let data = generate_sample(&DgpConfig::poor_overlap(1500, 1), 8, 0)?;
    let fit = fit_logistic(&data, &FitOptions::default())?;
    let ps = resolve_ps(&data, Some(&fit), &FitOptions::default())?;

    let schemes: Vec<WeightScheme> = [
        (EstimandClass::Wate, Scheme::Ipw),
        (EstimandClass::Wate, Scheme::Overlap),
        (EstimandClass::Wate, Scheme::Trim { alpha: 0.05 }),
        (EstimandClass::Watt, Scheme::Ipw),
        (EstimandClass::Watt, Scheme::Overlap),
    ]
    .iter()
    .map(|&(c, s)| WeightScheme::new(c, s))
    .collect::<Result<_>>()?;

    let report = balance_report(
        &data,
        &ps.values,
        &schemes,
        &[0.05, 0.1],
        20,
        ps.clamped_count,
    )?;
    println!("n1={} n0={}", report.n_treated, report.n_control);
    for s in &report.schemes {
        println!(
            "{:<5} {:<7} ESS treated {:>8.1} control {:>8.1}  max ASMD {}",
            s.class,
            s.estimand,
            s.ess.treated,
            s.ess.control,
            s.max_asmd.map_or("NA".into(), |m| format!("{m:.4}"))
        );
    }
    for (arm, summary) in [
        ("treated", &report.overlap.treated),
        ("control", &report.overlap.control),
    ] {
        if let Some(a) = summary {
            println!(
                "{arm}: median PS {:.3}, outside [0.05,0.95] {:.1}%",
                a.median,
                100.0 * a.extreme_fraction[0]
            );
        }
    }

    let mut ess_csv = Vec::new();
    report.write_ess_csv(&mut ess_csv)?;
    print!("{}", String::from_utf8_lossy(&ess_csv));
    Ok(())
}

#[allow(dead_code)]
fn main() -> psweight::Result<()> {
    run_example()
}
