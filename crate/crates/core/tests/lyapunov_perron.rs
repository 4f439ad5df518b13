use std::sync::OnceLock;

use proptest::prelude::*;
use vche2d::eigenbasis::{eigen_fields, project};
use vche2d::evolution::{SimConfig, Simulation, SystemKind};
use vche2d::lyapunov_perron::{
    emu_norm, estimate_lipschitz, forcing_s, lp_residual, projection_constants, psi_flow,
    remainder_r, semiorbit, theta_flow, LPContext, RemainderSource, SemiorbitSequence,
};
use vche2d::norms::{weighted_norm, WeightExponent};
use vche2d::operators::{semigroup_l, SemigroupTime};
use vche2d::sampling::{random_in_x2, random_localized, rng, two_blob};
use vche2d::spectral::integrate;
use vche2d::{Error, Frame, Grid, ScalarField};

const W2: WeightExponent = WeightExponent::TWO;

fn grid() -> Grid {
    Grid::new(128, 12.0).unwrap()
}

fn base(m: u32, norm: f64) -> ScalarField {
    two_blob(grid(), Frame::Scaled, 1.0, WeightExponent::new(m as f64).unwrap(), norm)
}

fn ctx2() -> &'static LPContext {
    static CTX: OnceLock<LPContext> = OnceLock::new();
    CTX.get_or_init(|| LPContext::new(2, 0.25, 0.1, &base(2, 0.01), 0.01, 0.02, 3).unwrap())
}

fn ctx3() -> &'static LPContext {
    static CTX: OnceLock<LPContext> = OnceLock::new();
    CTX.get_or_init(|| LPContext::new(3, 0.75, 0.1, &base(3, 0.01), 0.01, 0.02, 6).unwrap())
}

fn zero_ctx(m: u32) -> LPContext {
    let mu = if m == 2 { 0.25 } else { 0.75 };
    LPContext::new(m, mu, 0.1, &ScalarField::zeros(grid(), Frame::Scaled), 0.01, 0.02, 2).unwrap()
}

#[test]
fn context_validates_parameters() {
    let w0 = base(2, 0.01);
    assert!(LPContext::new(2, 0.6, 0.1, &w0, 0.01, 0.02, 1).is_err());
    assert!(LPContext::new(3, 0.4, 0.1, &w0, 0.01, 0.02, 1).is_err());
    assert!(LPContext::new(4, 0.4, 0.1, &w0, 0.01, 0.02, 1).is_err());
    assert!(LPContext::new(2, 0.25, 0.1, &w0, 0.001, 0.02, 1).is_err());
    assert!(LPContext::new(2, 0.25, 0.1, &w0, 0.01, 0.0, 1).is_err());
}

#[test]
fn zero_data_gives_zero_flows() {
    for m in [2, 3] {
        let ctx = zero_ctx(m);
        let z = ScalarField::zeros(grid(), Frame::Scaled);
        assert_eq!(theta_flow(&ctx, &z, 0, 0.7).unwrap().max_abs(), 0.0);
        assert_eq!(psi_flow(&ctx, &z, 1, 1.0).unwrap().max_abs(), 0.0);
        assert_eq!(remainder_r(&ctx, &z, 0).unwrap().max_abs(), 0.0);
        assert_eq!(forcing_s(&ctx, 1).unwrap().max_abs(), 0.0);
        let seq = semiorbit(&ctx, &z, 2).unwrap();
        assert_eq!(emu_norm(&seq), 0.0);
        let r = lp_residual(&seq, &ctx, 2, RemainderSource::Telescoped).unwrap();
        assert_eq!(r.residual, 0.0);
    }
}

#[test]
fn flows_reject_massive_input_and_bad_times() {
    let ctx = ctx2();
    let g = eigen_fields(grid()).g.clone();
    assert!(matches!(theta_flow(ctx, &g, 0, 0.5), Err(Error::InvalidParameter { .. })));
    let z = ScalarField::zeros(grid(), Frame::Scaled);
    assert!(theta_flow(ctx, &z, 0, 1.5).is_err());
    assert!(theta_flow(ctx, &z, 99, 0.5).is_err());
}

#[test]
fn theta_flow_reproduces_full_minus_gamma() {
    let ctx = ctx2();
    let f0 = ctx.initial_perturbation();
    let a = ctx.coefficients().a;
    let mut c = SimConfig::scaled(SystemKind::Full);
    c.n_points = 128;
    c.dt = 0.02;
    let mut sim = Simulation::new(c, &base(2, 0.01)).unwrap();
    sim.run_to(1.0, &mut |_| {}).unwrap();
    let expect = sim.state().w.sub(&ctx.profile(1.0)).unwrap();
    let got = theta_flow(ctx, &f0, 0, 1.0).unwrap();
    assert!(weighted_norm(&got.sub(&expect).unwrap(), W2) < 1e-7);
    assert!(a > 0.0);
}

#[test]
fn theta_flow_composes_like_the_difference_system() {
    let ctx = ctx2();
    let f0 = ctx.initial_perturbation();
    let a = ctx.coefficients().a;
    let step1 = theta_flow(ctx, &f0, 0, 1.0).unwrap();
    let composed = theta_flow(ctx, &step1, 1, 0.5).unwrap();
    let mut c = SimConfig::scaled(SystemKind::Difference1 { a });
    c.n_points = 128;
    c.dt = 0.02;
    let mut sim = Simulation::new(c, &f0).unwrap();
    sim.run_to(1.5, &mut |_| {}).unwrap();
    assert!(weighted_norm(&composed.sub(&sim.state().w).unwrap(), W2) < 1e-8);
}

#[test]
fn remainder_has_zero_mass_and_is_linear_in_the_data() {
    let ctx = ctx2();
    let mut r = rng(5);
    let f = random_in_x2(grid(), 2, 0.005, &mut r).unwrap();
    let rf = remainder_r(ctx, &f, 1).unwrap();
    assert!(integrate(&rf).abs() < 1e-9);
    let r2 = remainder_r(ctx, &f.scale(2.0), 1).unwrap();
    assert!(weighted_norm(&r2.axpy(-2.0, &rf).unwrap(), W2) < 1e-12 * weighted_norm(&rf, W2).max(1e-300) + 1e-18);
}

#[test]
fn forcing_vanishes_without_first_moments_and_decays_like_e_minus_n() {
    let ctx = ctx3();
    let s: Vec<f64> = (0..6)
        .map(|n| weighted_norm(&forcing_s(ctx, n).unwrap(), WeightExponent::THREE))
        .collect();
    for n in 0..5 {
        assert!(s[n + 1] / s[n] <= (-1.0f64).exp() * 1.05);
    }
    // Symmetric base data has no first moments and therefore no forcing.
    let sym = ScalarField::from_fn(grid(), Frame::Scaled, |x, y| 0.01 * (-(x * x + y * y)).exp());
    let ctx = LPContext::new(3, 0.75, 0.1, &sym, 0.1, 0.02, 1).unwrap();
    assert!(forcing_s(&ctx, 0).unwrap().max_abs() < 1e-18);
    let f = random_in_x2(grid(), 3, 0.001, &mut rng(2)).unwrap();
    let ctx2 = LPContext::new(2, 0.25, 0.1, &sym, 0.1, 0.02, 1).unwrap();
    let p = psi_flow(&ctx, &f, 0, 1.0).unwrap();
    let t = theta_flow(&ctx2, &f, 0, 1.0).unwrap();
    assert!(p.sub(&t).unwrap().max_abs() < 1e-14);
}

#[test]
fn semiorbit_keeps_zero_mass_and_decays() {
    let ctx = ctx2();
    let seq = semiorbit(ctx, &ctx.initial_perturbation(), 3).unwrap();
    let norms: Vec<f64> = seq.entries.iter().map(|f| weighted_norm(f, W2)).collect();
    for f in &seq.entries {
        assert!(integrate(f).abs() <= 1e-9);
    }
    assert!(norms[3] / norms[2] <= (-0.4f64).exp());
    let res = lp_residual(&seq, ctx, 3, RemainderSource::Recomputed).unwrap();
    assert!(res.residual < 1e-10, "{res:?}");
}

#[test]
fn linear_world_has_no_remainder() {
    // Zero base data: the flows are the linear semigroup up to time stepping.
    let ctx = zero_ctx(2);
    let (_, f0) = project(&base(2, 0.01), 2).unwrap();
    let entries: Vec<ScalarField> = (0..3)
        .map(|n| semigroup_l(&f0, SemigroupTime::new(n as f64).unwrap()))
        .collect();
    let seq = SemiorbitSequence { entries, mu: 0.25, m: 2 };
    let r = lp_residual(&seq, &ctx, 2, RemainderSource::Zero).unwrap();
    assert!(r.residual <= 1e-7, "{r:?}");
    let flowed = semiorbit(&ctx, &f0, 2).unwrap();
    for (a, b) in flowed.entries.iter().zip(&seq.entries) {
        assert!(weighted_norm(&a.sub(b).unwrap(), W2) < 1e-7);
    }
}

#[test]
fn projection_bounds() {
    // Mass-free fields decay like e^{-j/2}, fields without first moments like e^{-j},
    // up to a moderate constant.
    let grid = grid();
    let mut r = rng(21);
    let mut worst = [0.0f64; 2];
    for _ in 0..5 {
        let f = random_localized(grid, &mut r);
        for (k, (m, rate)) in [(2u32, 0.5), (3, 1.0)].into_iter().enumerate() {
            let (_, g) = project(&f, m).unwrap();
            let wm = WeightExponent::new(m as f64).unwrap();
            let n0 = weighted_norm(&g, wm);
            for j in 1..=5 {
                let nj = weighted_norm(&semigroup_l(&g, SemigroupTime::new(j as f64).unwrap()), wm);
                worst[k] = worst[k].max(nj / n0 * (rate * j as f64).exp());
            }
        }
    }
    assert!(worst[0] < 2.0 && worst[1] < 3.0, "{worst:?}");
    let pc = projection_constants(ctx2(), 10, 1).unwrap();
    assert!(pc.c1 >= 1.0 && pc.c2 >= 1.0, "{pc:?}");
}

#[test]
fn lipschitz_constant_shrinks_with_data_size() {
    let big = ctx2();
    let small = LPContext::new(2, 0.25, 0.1, &base(2, 1e-4), 1e-4, 0.02, 4).unwrap();
    let lb = estimate_lipschitz(big, 6, 3).unwrap();
    let ls = estimate_lipschitz(&small, 6, 3).unwrap();
    let zero = estimate_lipschitz(&zero_ctx(2), 6, 3).unwrap();
    assert!(lb.contraction_ok);
    assert_eq!(lb.table.len(), 6 * 4);
    // Without background the quotient only sees time-stepping error; small data sits on
    // that floor and larger data clearly above it.
    assert!(zero.lip_r < 5e-5, "{}", zero.lip_r);
    assert!(ls.lip_r <= zero.lip_r * 1.01, "{} vs {}", ls.lip_r, zero.lip_r);
    assert!(lb.lip_r > 2.0 * zero.lip_r, "{} vs {}", lb.lip_r, zero.lip_r);
}

fn geometric(c: f64, mu: f64, n: usize) -> SemiorbitSequence {
    let g = eigen_fields(grid()).g.clone();
    let unit = g.scale(1.0 / weighted_norm(&g, W2));
    SemiorbitSequence {
        entries: (0..=n).map(|k| unit.scale(c * (-mu * k as f64).exp())).collect(),
        mu: 0.25,
        m: 2,
    }
}

#[test]
fn emu_norm_examples() {
    let g = eigen_fields(grid()).g.clone();
    let unit = g.scale(1.0 / weighted_norm(&g, W2));
    let constant = SemiorbitSequence {
        entries: vec![unit.scale(2.0); 5],
        mu: 0.25,
        m: 2,
    };
    assert!((emu_norm(&constant) - 2.0 * (0.25f64 * 4.0).exp()).abs() < 1e-12);
    assert!((emu_norm(&geometric(1.0, 0.25, 6)) - 1.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn emu_norm_of_geometric_sequences(c in 0.1f64..10.0, decay in 0.0f64..1.0, n in 1usize..8) {
        let seq = geometric(c, decay, n);
        let expect = if decay >= 0.25 { c } else { c * ((0.25 - decay) * n as f64).exp() };
        prop_assert!((emu_norm(&seq) - expect).abs() <= 1e-12 * expect);
    }
}

#[test]
fn projection_bounds_on_difference_fields() {
    // ||e^{jL} g||_m <= e^{-j/2} ||g||_2 (m = 2) and e^{-j} ||g||_3 (m = 3) for the semiorbit fields.
    for (ctx, rate) in [(ctx2(), 0.5), (ctx3(), 1.0)] {
        let wm = ctx.weight();
        let seq = semiorbit(ctx, &ctx.initial_perturbation(), 2).unwrap();
        let mut worst: f64 = 0.0;
        for f in &seq.entries {
            let (_, g) = project(f, ctx.m()).unwrap();
            let n0 = weighted_norm(&g, wm);
            for j in 1..=5 {
                let nj = weighted_norm(&semigroup_l(&g, SemigroupTime::new(j as f64).unwrap()), wm);
                worst = worst.max(nj / n0 * (rate * j as f64).exp());
            }
        }
        assert!(worst <= 1.0 + 1e-6, "m = {}: {worst}", ctx.m());
    }
}
