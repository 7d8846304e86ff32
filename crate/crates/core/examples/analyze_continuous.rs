// End-to-end analysis of a continuous outcome read from CSV: fit the PS
// model, estimate every scheme of the WATE catalog, bootstrap the overlap
// weights estimate.

use psweight::estimators::{catalog, CatalogOptions};
use psweight::prelude::*;
use psweight::simulation::generate_sample;

pub fn run_example() -> psweight::Result<()> {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("study.csv");
    let mapping = ColumnMapping::new("A", "Y", &["X1", "X2", "X3", "X4", "X5", "X6", "X7"]);
    let sample = generate_sample(&DgpConfig::good_overlap(800, 1), 42, 0)?;
    sample.write_csv(std::fs::File::create(&path)?, &mapping)?;

    let data = load_csv(&path, &mapping)?;
    println!("{} units, {} treated", data.len(), data.n_treated());

    let fit = fit_logistic(&data, &FitOptions::default())?;
    println!(
        "IRLS converged={} in {} iterations",
        fit.converged, fit.iterations
    );
    let ps = resolve_ps(&data, Some(&fit), &FitOptions::default())?;

    let opts = CatalogOptions {
        trim_alphas: vec![0.05, 0.1],
        beta_nus: vec![3.0],
        ..Default::default()
    };
    let specs: Vec<EstimandSpec> = catalog(EstimandClass::Wate, &opts)?
        .into_iter()
        .map(EstimandSpec::difference)
        .collect();
    for row in estimate_all(&data, &ps.values, &specs) {
        match row.result {
            Ok(p) => println!("{:<24} {:>10.4}", row.label, p.estimate),
            Err(e) => println!("{:<24} failed: {e}", row.label),
        }
    }

    let ow = EstimandSpec::difference(WeightScheme::new(EstimandClass::Wate, Scheme::Overlap)?);
    let cfg = BootstrapConfig {
        replicates: 50,
        seed: 11,
        ..Default::default()
    };
    let est = bootstrap(
        &data,
        &ow,
        &PsMode::for_dataset(&data, FitOptions::default()),
        &cfg,
    )?;
    println!(
        "ATO {:.4} (se {:.4}) {:.0}% CI [{:.4}, {:.4}]",
        est.point,
        est.se.unwrap_or(f64::NAN),
        100.0 * est.conf_level,
        est.ci_lower,
        est.ci_upper
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> psweight::Result<()> {
    run_example()
}
