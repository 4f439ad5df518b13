//! Save a simulation state, read it back and resume.

use vche2d::evolution::{SimConfig, Simulation, SystemKind};
use vche2d::harness::Snapshot;
use vche2d::norms::WeightExponent;
use vche2d::sampling::two_blob;
use vche2d::Frame;

fn main() -> vche2d::Result<()> {
    let mut config = SimConfig::scaled(SystemKind::Full);
    config.n_points = 128;
    config.dt = 0.02;
    let grid = config.grid()?;
    let w0 = two_blob(grid, Frame::Scaled, 1.0, WeightExponent::TWO, 0.05);

    let mut sim = Simulation::new(config.clone(), &w0)?;
    sim.run_to(1.0, &mut |_| {})?;
    let snap = Snapshot { field: sim.state().w.clone(), alpha: config.alpha, time: sim.time() };
    let path = std::env::temp_dir().join("vche2d-example.vche");
    snap.write(&path)?;
    let back = Snapshot::read(&path)?;
    print!("{}", back.describe());

    let mut resumed = Simulation::starting_at(config, &back.field, back.time)?;
    resumed.run_to(2.0, &mut |_| {})?;
    sim.run_to(2.0, &mut |_| {})?;
    println!("resumed vs uninterrupted: {:.3e}", resumed.state().w.sub(&sim.state().w)?.max_abs());
    std::fs::remove_file(path)?;
    Ok(())
}
