use std::f64::consts::PI;

use approx::assert_relative_eq;
use proptest::prelude::*;
use vche2d::norms::{from_scaled, lp_norm, moments, to_scaled, weighted_norm, WeightExponent};
use vche2d::spectral::{
    boundary_tail, curl, dealias, divergence, evaluate_dilated, gradient, integrate, laplacian,
};
use vche2d::{Error, Frame, Grid, ScalarField, VectorField};

fn gauss(grid: Grid, cx: f64, cy: f64, s: f64) -> ScalarField {
    ScalarField::from_fn(grid, Frame::Scaled, move |x, y| {
        (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * s * s)).exp()
    })
}

#[test]
fn grid_rejects_bad_sizes() {
    assert!(matches!(Grid::new(48, 8.0), Err(Error::InvalidGrid(_))));
    assert!(matches!(Grid::new(8, 8.0), Err(Error::InvalidGrid(_))));
    assert!(Grid::new(64, 0.0).is_err());
    assert!(Grid::new(64, -1.0).is_err());
    let g = Grid::new(64, 8.0).unwrap();
    assert_eq!(g.len(), 64 * 64);
    assert_relative_eq!(g.spacing(), 0.25);
    assert_relative_eq!(g.point(0), -8.0);
    assert_eq!(g.mode(32), -32);
    assert_relative_eq!(g.dk(), PI / 8.0);
}

#[test]
fn gradient_of_gaussian_matches_closed_form() {
    let grid = Grid::new(64, 8.0).unwrap();
    let f = gauss(grid, 0.3, -0.2, 1.0);
    let g = gradient(&f);
    let ex = ScalarField::from_fn(grid, Frame::Scaled, |x, y| {
        -(x - 0.3) * (-((x - 0.3).powi(2) + (y + 0.2).powi(2)) / 2.0).exp()
    });
    assert!(g.x.sub(&ex).unwrap().max_abs() < 1e-10);
}

#[test]
fn laplacian_of_gaussian_matches_closed_form() {
    let grid = Grid::new(64, 8.0).unwrap();
    let f = gauss(grid, 0.0, 0.0, 1.0);
    let ex = ScalarField::from_fn(grid, Frame::Scaled, |x, y| {
        let r2 = x * x + y * y;
        (r2 - 2.0) * (-r2 / 2.0).exp()
    });
    assert!(laplacian(&f).sub(&ex).unwrap().max_abs() < 1e-9);
}

#[test]
fn integrate_gaussian_is_two_pi() {
    let grid = Grid::new(64, 8.0).unwrap();
    assert_relative_eq!(integrate(&gauss(grid, 0.5, 0.5, 1.0)), 2.0 * PI, max_relative = 1e-12);
}

#[test]
fn dealias_is_idempotent_and_kills_high_modes() {
    let grid = Grid::new(32, 4.0).unwrap();
    let f = ScalarField::from_fn(grid, Frame::Scaled, |x, y| (3.0 * x).sin() + (11.0 * y).cos());
    let once = dealias(&f.spectrum());
    let twice = dealias(&once);
    assert_eq!(once.coeffs(), twice.coeffs());
    let cut = grid.dealias_mode();
    for m2 in 0..32 {
        for m1 in 0..32 {
            if grid.mode(m1).abs() > cut || grid.mode(m2).abs() > cut {
                assert_eq!(once.coeffs()[m2 * 32 + m1].norm(), 0.0);
            }
        }
    }
}

#[test]
fn curl_and_divergence_of_gradient() {
    let grid = Grid::new(64, 8.0).unwrap();
    let f = gauss(grid, 0.1, 0.4, 0.8);
    let g = gradient(&f);
    assert!(curl(&g).max_abs() < 1e-10);
    let lap = laplacian(&f);
    assert!(divergence(&g).sub(&lap).unwrap().max_abs() < 1e-10);
}

#[test]
fn boundary_tail_detects_wide_fields() {
    let grid = Grid::new(64, 8.0).unwrap();
    assert!(boundary_tail(&gauss(grid, 0.0, 0.0, 1.0)) < 1e-12);
    assert!(boundary_tail(&gauss(grid, 0.0, 0.0, 5.0)) > 1e-3);
    assert_eq!(boundary_tail(&ScalarField::zeros(grid, Frame::Scaled)), 0.0);
}

#[test]
fn dilated_evaluation_rejects_points_outside_box() {
    let grid = Grid::new(64, 8.0).unwrap();
    let f = gauss(grid, 0.0, 0.0, 1.0);
    assert!(matches!(evaluate_dilated(&f, 2.0, grid), Err(Error::OutsideBox { .. })));
    let half = evaluate_dilated(&f, 0.5, grid).unwrap();
    let ex = ScalarField::from_fn(grid, Frame::Scaled, |x, y| (-(x * x + y * y) / 8.0).exp());
    assert!(half.sub(&ex).unwrap().max_abs() < 1e-10);
}

#[test]
fn weighted_norm_of_g_has_closed_form() {
    // int (1 + r^2)^2 e^{-r^2/2} = 26 pi, so ||G||_2^2 = 13 / (8 pi).
    let grid = Grid::new(128, 12.0).unwrap();
    let g = ScalarField::from_fn(grid, Frame::Scaled, |x, y| (-(x * x + y * y) / 4.0).exp() / (4.0 * PI));
    assert_relative_eq!(
        weighted_norm(&g, WeightExponent::TWO),
        (13.0 / (8.0 * PI)).sqrt(),
        max_relative = 1e-10
    );
    // Plain L^2: int e^{-r^2/2} / (16 pi^2) = 1 / (8 pi).
    assert_relative_eq!(
        weighted_norm(&g, WeightExponent::ZERO),
        (1.0 / (8.0 * PI)).sqrt(),
        max_relative = 1e-10
    );
}

#[test]
fn lp_norm_rejects_p_below_one() {
    let grid = Grid::new(16, 2.0).unwrap();
    let f = ScalarField::zeros(grid, Frame::Scaled);
    assert!(lp_norm(&f, 0.5).is_err());
    assert_eq!(lp_norm(&f, f64::INFINITY).unwrap(), 0.0);
    assert!(WeightExponent::new(-1.0).is_err());
}

#[test]
fn moments_of_shifted_gaussian() {
    let grid = Grid::new(64, 10.0).unwrap();
    let f = gauss(grid, 0.7, -0.4, 1.0);
    let m = moments(&f);
    assert_relative_eq!(m.a, 2.0 * PI, max_relative = 1e-12);
    assert_relative_eq!(m.b1, 0.7 * 2.0 * PI, max_relative = 1e-12);
    assert_relative_eq!(m.b2, -0.4 * 2.0 * PI, max_relative = 1e-12);
}

#[test]
fn scaled_frame_roundtrip_and_mass() {
    // At t = 3 physical points are twice the scaled ones, so the boxes differ.
    let physical = Grid::new(128, 24.0).unwrap();
    let scaled = Grid::new(128, 11.5).unwrap();
    let back_grid = Grid::new(128, 20.0).unwrap();
    let gauss = |x: f64, y: f64| (-(x * x + y * y) / 4.0).exp();
    let v = ScalarField::from_fn(physical, Frame::Physical, gauss);
    let t = 3.0;
    let (w, tau) = to_scaled(&v, t, scaled).unwrap();
    assert_relative_eq!(tau, 4.0f64.ln());
    assert_relative_eq!(integrate(&w), integrate(&v), max_relative = 1e-10);
    let (back, t2) = from_scaled(&w, tau, back_grid).unwrap();
    assert_relative_eq!(t2, t, max_relative = 1e-14);
    let expect = ScalarField::from_fn(back_grid, Frame::Physical, gauss);
    assert!(back.sub(&expect).unwrap().max_abs() < 1e-10);
    assert!(to_scaled(&v, t, physical).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gradient_integrates_to_zero(cx in -1.0f64..1.0, cy in -1.0f64..1.0, s in 0.5f64..1.2) {
        let grid = Grid::new(64, 10.0).unwrap();
        let g = gradient(&gauss(grid, cx, cy, s));
        prop_assert!(integrate(&g.x).abs() < 1e-10);
        prop_assert!(integrate(&g.y).abs() < 1e-10);
    }

    #[test]
    fn spectrum_roundtrip(cx in -1.0f64..1.0, cy in -1.0f64..1.0, amp in -3.0f64..3.0) {
        let grid = Grid::new(32, 8.0).unwrap();
        let f = gauss(grid, cx, cy, 1.0).scale(amp);
        let back = f.spectrum().to_field();
        prop_assert!(back.sub(&f).unwrap().max_abs() < 1e-13 * amp.abs().max(1.0));
    }

    #[test]
    fn weighted_norms_are_monotone_in_m(cx in -2.0f64..2.0, s in 0.4f64..1.2) {
        let grid = Grid::new(64, 12.0).unwrap();
        let f = gauss(grid, cx, 0.0, s);
        let n0 = weighted_norm(&f, WeightExponent::ZERO);
        let n2 = weighted_norm(&f, WeightExponent::TWO);
        let n3 = weighted_norm(&f, WeightExponent::THREE);
        prop_assert!(n0 <= n2 && n2 <= n3);
    }

    #[test]
    fn norms_are_homogeneous(amp in -5.0f64..5.0, p in 1.0f64..6.0) {
        let grid = Grid::new(32, 8.0).unwrap();
        let f = gauss(grid, 0.0, 0.0, 1.0);
        let g = f.scale(amp);
        let lhs = lp_norm(&g, p).unwrap();
        let rhs = amp.abs() * lp_norm(&f, p).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300));
        let wl = weighted_norm(&g, WeightExponent::TWO);
        let wr = amp.abs() * weighted_norm(&f, WeightExponent::TWO);
        prop_assert!((wl - wr).abs() <= 1e-12 * wr.max(1e-300));
    }

    #[test]
    fn vector_axpy_is_linear(s in -2.0f64..2.0) {
        let grid = Grid::new(16, 4.0).unwrap();
        let u = VectorField::new(gauss(grid, 0.0, 0.0, 1.0), gauss(grid, 0.5, 0.0, 1.0)).unwrap();
        let v = u.axpy(s, &u).unwrap();
        prop_assert!((v.max_norm() - (1.0 + s).abs() * u.max_norm()).abs() < 1e-12);
    }
}
