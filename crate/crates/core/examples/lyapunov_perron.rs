//! Unit-time step flows around the vortex profile, the semiorbit they
//! generate and a self-consistency check of the discrete fixed-point equation.

use vche2d::lyapunov_perron::{
    emu_norm, estimate_lipschitz, lp_residual, max_leading_mass, semiorbit, stepping_tolerance,
    LPContext, RemainderSource,
};
use vche2d::norms::{weighted_norm, WeightExponent};
use vche2d::sampling::two_blob;
use vche2d::{Frame, Grid};

fn main() -> vche2d::Result<()> {
    let grid = Grid::new(128, 12.0)?;
    let (r0, steps) = (0.01, 4);
    let w0 = two_blob(grid, Frame::Scaled, 1.0, WeightExponent::TWO, r0);
    let ctx = LPContext::new(2, 0.25, 0.1, &w0, r0, 0.02, steps + 3)?;

    let seq = semiorbit(&ctx, &ctx.initial_perturbation(), steps)?;
    let norms: Vec<f64> = seq.entries.iter().map(|f| weighted_norm(f, WeightExponent::TWO)).collect();
    for (n, w) in norms.iter().enumerate() {
        let ratio = if n > 0 { w / norms[n - 1] } else { f64::NAN };
        println!("n = {n}: ||f_n||_2 = {w:.4e}, ratio {ratio:.4}");
    }
    println!("sup_n e^(mu n) ||f_n|| = {:.4e}", emu_norm(&seq));
    println!("max leading mass = {:.2e}", max_leading_mass(&seq));

    let res = lp_residual(&seq, &ctx, steps + 2, RemainderSource::Telescoped)?;
    let tol = stepping_tolerance(&ctx, &seq)?;
    println!("residual {:.3e}, tail bound {:.3e}, stepping tolerance {tol:.3e}", res.residual, res.tail_bound);

    let lip = estimate_lipschitz(&ctx, 4, 7)?;
    println!(
        "Lipschitz estimate {:.3e}, C1 = {:.3}, C2 = {:.3}, contraction sum {:.2}, ok = {}",
        lip.lip_r, lip.constants.c1, lip.constants.c2, lip.lhs, lip.contraction_ok
    );
    Ok(())
}
