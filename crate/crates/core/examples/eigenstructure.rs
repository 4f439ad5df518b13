//! The filtered vortex profile Gamma, its dipole partners Lambda_i and the
//! projection onto them.

use vche2d::eigenbasis::{eigen_fields, gamma_field, gaussian_g, project};
use vche2d::norms::{weighted_norm, WeightExponent};
use vche2d::operators::{helmholtz_filter, FilterParams};
use vche2d::sampling::two_blob;
use vche2d::{Frame, Grid};

fn main() -> vche2d::Result<()> {
    let grid = Grid::new(128, 12.0)?;
    let alpha = 0.3;
    let ef = eigen_fields(grid);
    for tau in [0.0, 1.0, 3.0, 6.0] {
        let gamma = gamma_field(grid, tau, alpha)?;
        let c = alpha * alpha * (-tau as f64).exp();
        let (gx, gy) = ef.grad_gamma(c);
        let adv = ef.vg.x.mul(&gx)?.add(&ef.vg.y.mul(&gy)?)?.max_abs();
        let filt = helmholtz_filter(&gamma, FilterParams::scaled(alpha, tau)?).sub(&gaussian_g(grid))?.max_abs();
        println!(
            "tau = {tau}: ||Gamma - G||_2 = {:.3e}, max |v^G.grad Gamma| = {adv:.1e}, |H Gamma - G| = {filt:.1e}",
            weighted_norm(&gamma.sub(&ef.g)?, WeightExponent::TWO)
        );
    }

    let w = two_blob(grid, Frame::Scaled, 1.0, WeightExponent::THREE, 0.05);
    let (c, rest) = project(&w, 3)?;
    println!("projection: a = {:.6e}, c1 = {:.6e}, c2 = {:.6e}", c.a, c.c1, c.c2);
    println!("remainder has moments {:?}", vche2d::norms::moments(&rest));
    Ok(())
}
