//! L^1 to L^p smoothing in physical variables: |v(t)|_inf ~ t^-1, |v(t)|_2 ~ t^-1/2.

use vche2d::harness::{run_experiment, Config};

fn main() -> vche2d::Result<()> {
    let mut config = Config::for_experiment("smoothing-L1Lp")?;
    if std::env::args().any(|a| a == "--quick") {
        config.apply_text("n_points = 128\nt_end = 40\nfit_end = 40\ncadence = 5\n")?;
    }
    let report = run_experiment("smoothing-L1Lp", &config)?;
    print!("{}", report.summary());
    Ok(())
}
