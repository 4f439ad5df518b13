//! Convergence to the vortex profile a Gamma at rate e^(-tau/2).
//! Pass `--quick` for a coarse run.

use vche2d::harness::{run_experiment, Config};

fn main() -> vche2d::Result<()> {
    let mut config = Config::for_experiment("first-order-decay")?;
    if std::env::args().any(|a| a == "--quick") {
        config.apply_text("n_points = 128\ndt = 0.02\nspread = 1.0\n")?;
    }
    let report = run_experiment("first-order-decay", &config)?;
    print!("{}", report.summary());
    Ok(())
}
