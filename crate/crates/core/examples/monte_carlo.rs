// A small Monte Carlo study: super-population truths, relative bias and
// bootstrap coverage under good and poor overlap.

use psweight::prelude::*;

pub fn run_example() -> psweight::Result<()> {
    let schemes: Vec<WeightScheme> = [
        Scheme::Ipw,
        Scheme::Overlap,
        Scheme::Matching,
        Scheme::Entropy,
    ]
    .iter()
    .map(|&s| WeightScheme::new(EstimandClass::Wate, s))
    .collect::<Result<_>>()?;

    for dgp in [
        DgpConfig::good_overlap(500, 2024),
        DgpConfig::poor_overlap(500, 2024),
    ] {
        let cfg = MonteCarloConfig {
            super_n: 200_000,
            ..MonteCarloConfig::new(dgp, 12, 30, schemes.clone(), 99)
        };
        let res = run_monte_carlo(&cfg)?;
        let m = &res.metadata;
        println!(
            "{} overlap: treated share {:.3}, CP band [{:.3}, {:.3}]",
            m.overlap, m.realized_treated_fraction, m.coverage_band.0, m.coverage_band.1
        );
        for s in &res.schemes {
            let rb = s.rbias_summary.as_ref().expect("estimates available");
            println!(
                "  {:<5} truth {:>8.3}  RBias% median {:>6.2} IQR [{:.2}, {:.2}]  coverage {}",
                s.estimand,
                s.truth,
                rb.median,
                rb.q1,
                rb.q3,
                s.coverage.map_or("NA".into(), |c| format!("{c:.2}"))
            );
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> psweight::Result<()> {
    run_example()
}
