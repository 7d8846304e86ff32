// Tilting functions across the propensity-score range, and the beta family
// special cases.

use psweight::prelude::*;
use psweight::tilting::beta_tilt;

pub fn run_example() -> psweight::Result<()> {
    let schemes = [
        Scheme::Ipw,
        Scheme::IpwTreated,
        Scheme::IpwControls,
        Scheme::Overlap,
        Scheme::Matching,
        Scheme::Entropy,
        Scheme::beta(4.0),
        Scheme::Trim { alpha: 0.1 },
        Scheme::SmoothTrim {
            alpha: 0.1,
            epsilon: 0.01,
        },
        Scheme::Trapezoidal { k: 4.0 },
    ];
    let ws: Vec<WeightScheme> = schemes
        .iter()
        .map(|&s| WeightScheme::new(EstimandClass::Wate, s))
        .collect::<Result<_>>()?;

    print!("{:>6}", "e");
    for w in &ws {
        print!(" {:>8}", w.estimand_name());
    }
    println!();
    for e in [0.01, 0.05, 0.1, 0.3, 0.5, 0.7, 0.9, 0.95, 0.99] {
        print!("{e:>6}");
        for w in &ws {
            print!(" {:>8.4}", w.tilt(e)?);
        }
        println!();
    }

    // BW(2,2) is OW; BW(1,1), BW(2,1), BW(1,2) are the IPW family.
    let ow = WeightScheme::new(EstimandClass::Wate, Scheme::Overlap)?;
    for i in 1..1000 {
        let e = i as f64 / 1000.0;
        assert_eq!(beta_tilt(e, 2.0, 2.0), ow.tilt(e)?);
        assert_eq!(beta_tilt(e, 1.0, 1.0), 1.0);
        assert_eq!(beta_tilt(e, 2.0, 1.0), e);
        assert_eq!(beta_tilt(e, 1.0, 2.0), 1.0 - e);
    }

    // the same tilting function yields different unit weights per class
    for class in EstimandClass::ALL {
        let w = WeightScheme::new(class, Scheme::Overlap)?;
        println!(
            "{:<5} {:<8} treated w(0.2) = {:.4}  control w(0.2) = {:.4}",
            class,
            w.estimand_name(),
            w.unit_weight(0.2, true)?,
            w.unit_weight(0.2, false)?
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> psweight::Result<()> {
    run_example()
}
