//! Picard iteration of the Duhamel formula, compared with the time stepper.

use vche2d::evolution::{picard_mild_solve, SimConfig, Simulation};
use vche2d::norms::{weighted_norm, WeightExponent};
use vche2d::sampling::two_blob;
use vche2d::Frame;

fn main() -> vche2d::Result<()> {
    let mut config = SimConfig::physical();
    config.n_points = 128;
    config.half_width = 16.0;
    config.dt = 0.005;
    let grid = config.grid()?;
    let v0 = two_blob(grid, Frame::Physical, 1.0, WeightExponent::ZERO, 0.01);

    let (mild, distances) = picard_mild_solve(&v0, 0.1, Some(config.alpha), 8, 8)?;
    for (k, d) in distances.iter().enumerate() {
        println!("iterate {:>2}: distance {d:.3e}", k + 1);
    }
    let mut sim = Simulation::new(config, &v0)?;
    sim.run_to(0.1, &mut |_| {})?;
    let diff = weighted_norm(&mild.sub(&sim.state().w)?, WeightExponent::ZERO);
    let (linear, _) = picard_mild_solve(&v0, 0.1, None, 1, 8)?;
    let nonlinear = weighted_norm(&mild.sub(&linear)?, WeightExponent::ZERO);
    println!("nonlinear contribution ||mild - heat flow||_L2: {nonlinear:.3e}");
    println!("||mild - stepper||_L2 at t = 0.1: {diff:.3e}");

    let big = two_blob(grid, Frame::Physical, 0.5, WeightExponent::ZERO, 400.0);
    match picard_mild_solve(&big, 2.0, Some(0.0), 12, 8) {
        Ok(_) => println!("large data: iteration converged"),
        Err(e) => println!("large data: {e}"),
    }
    Ok(())
}
