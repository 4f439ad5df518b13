//! The Oseen vortex in physical and self-similar variables.

use vche2d::eigenbasis::{gaussian_g, oseen_vortex};
use vche2d::norms::{lp_norm, to_scaled};
use vche2d::operators::heat_semigroup;
use vche2d::Grid;

fn main() -> vche2d::Result<()> {
    let physical = Grid::new(256, 40.0)?;
    let scaled = Grid::new(128, 12.0)?;
    let o0 = oseen_vortex(physical, 0.0)?;
    let g = gaussian_g(scaled);
    println!("{:>6} {:>12} {:>14} {:>16}", "t", "|O(t)|_inf", "heat-flow err", "scaled - G");
    for t in [0.0, 1.0, 3.0, 10.0] {
        let ot = oseen_vortex(physical, t)?;
        let heat = heat_semigroup(&o0, t)?.sub(&ot)?.max_abs();
        let (w, tau) = to_scaled(&ot, t, scaled)?;
        println!(
            "{t:>6} {:>12.4e} {heat:>14.2e} {:>16.2e}   (tau = {tau:.3})",
            lp_norm(&ot, f64::INFINITY)?,
            w.sub(&g)?.max_abs()
        );
    }
    Ok(())
}
