// Weighting with propensity scores estimated elsewhere. Bootstrap intervals
// then reuse the supplied scores and say so.

use psweight::prelude::*;

pub fn run_example() -> psweight::Result<()> {
    let csv = "\
id,treat,outcome,score
u1,1,3.1,0.62
u2,0,1.2,0.41
u3,1,4.0,0.70
u4,0,1.4,0.33
u5,1,2.6,0.55
u6,0,0.9,0.48
u7,1,3.3,0.66
u8,0,1.8,0.52
";
    let mut mapping = ColumnMapping::new("treat", "outcome", &[]).with_ps("score");
    mapping.id = Some("id".into());
    let data = psweight::data::read_csv(csv.as_bytes(), &mapping)?;
    let ps = resolve_ps(&data, None, &FitOptions::default())?;
    println!("source: {}, clamped: {}", ps.source, ps.clamped_count);

    let specs: Vec<EstimandSpec> = [Scheme::Ipw, Scheme::Overlap, Scheme::Matching]
        .iter()
        .map(|&s| WeightScheme::new(EstimandClass::Watt, s).map(EstimandSpec::difference))
        .collect::<Result<_>>()?;
    let cfg = BootstrapConfig {
        replicates: 100,
        seed: 1,
        ci_method: CiMethod::Quantile,
        ..Default::default()
    };
    let mode = PsMode::for_dataset(&data, FitOptions::default());
    for (spec, res) in specs.iter().zip(psweight::inference::bootstrap_many(
        &data, &specs, &mode, &cfg,
    )?) {
        let est = res?;
        println!(
            "{:<6} {:>7.3}  [{:.3}, {:.3}]  redraws={}",
            spec.scheme.estimand_name(),
            est.point,
            est.ci_lower,
            est.ci_upper,
            est.degenerate_redraws
        );
        for w in &est.warnings {
            println!("  note: {w}");
        }
    }

    // fitting a model on top of provided scores is ambiguous
    let fit = fit_logistic(&data, &FitOptions::default());
    assert!(fit.is_err() || resolve_ps(&data, fit.as_ref().ok(), &FitOptions::default()).is_err());
    Ok(())
}

#[allow(dead_code)]
fn main() -> psweight::Result<()> {
    run_example()
}
