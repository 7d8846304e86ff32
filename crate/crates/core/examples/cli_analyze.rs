// Driving the command-line front end in-process.

use psweight::prelude::*;
use psweight::simulation::generate_sample;

pub fn run_example() -> psweight::Result<()> {
    let dir = tempfile::tempdir()?;
    let input = dir.path().join("data.csv");
    let sample = generate_sample(&DgpConfig::good_overlap(400, 1), 3, 0)?;
    sample.write_csv(
        std::fs::File::create(&input)?,
        &ColumnMapping::new("A", "Y", &["X1", "X2", "X3", "X4"]),
    )?;

    let out = dir.path().join("out");
    let code = psweight::cli::run([
        "psweight",
        "analyze",
        "--input",
        input.to_str().unwrap(),
        "--treatment-col",
        "A",
        "--outcome-col",
        "Y",
        "--covariate-cols",
        "X1,X2,X3,X4",
        "--class",
        "wate,watt",
        "--trim-alpha",
        "0.05,0.1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, psweight::cli::EXIT_OK);
    print!("{}", std::fs::read_to_string(out.join("wate.csv"))?);
    print!("{}", std::fs::read_to_string(out.join("watt.csv"))?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> psweight::Result<()> {
    run_example()
}
