//! Biot-Savart velocity, Helmholtz filter, heat kernel and the scaled semigroup.

use vche2d::eigenbasis::{gaussian_g, hermite_f};
use vche2d::harness::energy_identity_defect;
use vche2d::norms::{lp_norm, weighted_norm, WeightExponent};
use vche2d::operators::{
    biot_savart, biot_savart_periodic, heat_kernel, heat_kernel_lp_norm, helmholtz_filter,
    semigroup_l, FilterParams, SemigroupTime,
};
use vche2d::sampling::{random_localized, rng};
use vche2d::Grid;

fn main() -> vche2d::Result<()> {
    let grid = Grid::new(128, 16.0)?;
    let g = gaussian_g(grid);

    // Far field of a unit vortex is 1/(2 pi r); only the whole-plane inversion sees it.
    let i = (0..grid.n()).find(|&i| (grid.point(i) - 9.0).abs() < 1e-9).expect("grid point at 9");
    let c = grid.n() / 2;
    println!("velocity at r = 9: hybrid {:.6e}, periodic {:.6e}, exact {:.6e}",
        biot_savart(&g).velocity.y.at(i, c),
        biot_savart_periodic(&g).velocity.y.at(i, c),
        1.0 / (2.0 * std::f64::consts::PI * 9.0));

    let fp = FilterParams::physical(0.2)?;
    let w = random_localized(Grid::new(128, 12.0)?, &mut rng(1));
    println!("filter: ||Hw||_2 / ||w||_2 = {:.4}, energy identity defect {:.2e}",
        weighted_norm(&helmholtz_filter(&w, fp), WeightExponent::TWO) / weighted_norm(&w, WeightExponent::TWO),
        energy_identity_defect(&w, fp));

    let k = heat_kernel(Grid::new(256, 12.0)?, 1.0)?;
    for p in [1.0, 2.0, 4.0] {
        println!("|Phi(1)|_{p}: numeric {:.10}, closed form {:.10}", lp_norm(&k, p)?, heat_kernel_lp_norm(p, 1.0));
    }

    let grid = Grid::new(128, 12.0)?;
    let (g, f1) = (gaussian_g(grid), hermite_f(grid, 1)?);
    for tau in [0.5, 1.0, 2.0] {
        let st = SemigroupTime::new(tau)?;
        let rg = weighted_norm(&semigroup_l(&g, st), WeightExponent::TWO) / weighted_norm(&g, WeightExponent::TWO);
        let rf = weighted_norm(&semigroup_l(&f1, st), WeightExponent::TWO) / weighted_norm(&f1, WeightExponent::TWO);
        println!("tau = {tau}: |e^(tau L) G| / |G| = {rg:.8}, |e^(tau L) F1| / |F1| = {rf:.8} (e^(-tau/2) = {:.8})", (-tau / 2.0f64).exp());
    }
    Ok(())
}
