//! Grids, spectral derivatives, quadrature and weighted norms.

use vche2d::norms::{lp_norm, moments, weighted_norm, WeightExponent};
use vche2d::spectral::{gradient, integrate, laplacian};
use vche2d::{Frame, Grid, ScalarField};

fn main() -> vche2d::Result<()> {
    let grid = Grid::new(128, 12.0)?;
    let f = ScalarField::from_fn(grid, Frame::Scaled, |x, y| (-((x - 0.5).powi(2) + y * y) / 2.0).exp());

    println!("grid: n = {}, half width = {}, spacing = {}", grid.n(), grid.half_width(), grid.spacing());
    println!("integral            {:.12} (exact 2 pi = {:.12})", integrate(&f), 2.0 * std::f64::consts::PI);

    let exact_lap = ScalarField::from_fn(grid, Frame::Scaled, |x, y| {
        let r2 = (x - 0.5).powi(2) + y * y;
        (r2 - 2.0) * (-r2 / 2.0).exp()
    });
    println!("laplacian error     {:.3e}", laplacian(&f).sub(&exact_lap)?.max_abs());
    let g = gradient(&f);
    println!("int of d/dx f       {:.3e}", integrate(&g.x));

    let m = moments(&f);
    println!("moments (a, b1, b2) {:.6} {:.6} {:.6}", m.a, m.b1, m.b2);
    for p in [1.0, 2.0, f64::INFINITY] {
        println!("|f|_{p:<4}            {:.6}", lp_norm(&f, p)?);
    }
    for m in [WeightExponent::ZERO, WeightExponent::TWO, WeightExponent::THREE] {
        println!("||f||_L2({})          {:.6}", m.value(), weighted_norm(&f, m));
    }
    Ok(())
}
