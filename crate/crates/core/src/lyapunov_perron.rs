//! Unit-time flows of the difference systems, their decomposition into the
//! linear semigroup plus a remainder, and numerical checks of the discrete
//! Lyapunov-Perron equation built from them.
//!
//! The flows `Theta_n` and `Psi_n` advect the perturbation with the velocity of
//! one fixed full solution `w(tau)` started from the context's base data. That
//! background is stepped alongside the perturbations from cached snapshots at
//! integer times, so `Theta_n` is linear and `Psi_n` affine in their argument.

use rand::Rng;

use crate::eigenbasis::{eigen_fields, project, EigenCoefficients};
use crate::error::{Error, Result};
use crate::evolution::{
    eval_field, filter_at, filtered_velocity_of, gauss_legendre, profile_gradient,
    quadratic_forcing, substeps, Accum, Dynamics, ForcingForm, Lawson, SingleSystem, SystemKind,
};
use crate::norms::{moments, weighted_norm, WeightExponent};
use crate::operators::{semigroup_l, SemigroupTime};
use crate::sampling::{random_in_x2, random_localized, rng};
use crate::spectral::{integrate, Frame, Grid, ScalarField, Spectrum};


/// Everything the shifted flows need: the base data, its leading-mode
/// coefficients and the cached background trajectory.
#[derive(Debug)]
pub struct LPContext {
    m: u32,
    mu: f64,
    alpha: f64,
    r0: f64,
    dt: f64,
    grid: Grid,
    w0: ScalarField,
    coeffs: EigenCoefficients,
    background: Vec<Spectrum>,
    forcing: Option<(ScalarField, ScalarField)>,
}

impl LPContext {
    /// Validates `mu` against `m`, checks `||w0||_m <= r0`, and steps the
    /// background to integer times `0..=n_max`.
    pub fn new(m: u32, mu: f64, alpha: f64, w0: &ScalarField, r0: f64, dt: f64, n_max: usize) -> Result<Self> {
        let ok = match m {
            2 => mu > 0.0 && mu < 0.5,
            3 => mu > 0.5 && mu < 1.0,
            _ => {
                return Err(Error::InvalidParameter {
                    name: "m",
                    reason: format!("must be 2 or 3, got {m}"),
                })
            }
        };
        if !ok {
            return Err(Error::InvalidParameter {
                name: "mu",
                reason: format!("mu = {mu} is outside the interval allowed for m = {m}"),
            });
        }
        if !(alpha >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                reason: format!("must be >= 0, got {alpha}"),
            });
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!("must be positive, got {dt}"),
            });
        }
        let norm = weighted_norm(w0, WeightExponent::new(m as f64)?);
        if norm > r0 * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter {
                name: "r0",
                reason: format!("base data has ||w0||_{m} = {norm:.6e} > r0 = {r0:.6e}"),
            });
        }
        let grid = w0.grid();
        let w0 = w0.clone().with_frame(Frame::Scaled);
        let (coeffs, _) = project(&w0, m)?;
        let forcing = if m == 3 {
            Some(quadratic_forcing(grid, [coeffs.c1, coeffs.c2], ForcingForm::Full))
        } else {
            None
        };
        let mut ctx = Self {
            m,
            mu,
            alpha,
            r0,
            dt,
            grid,
            w0: w0.clone(),
            coeffs,
            background: vec![w0.spectrum()],
            forcing,
        };
        ctx.extend_background(n_max)?;
        Ok(ctx)
    }

    fn extend_background(&mut self, n_max: usize) -> Result<()> {
        let sys = SingleSystem::new(self.grid, SystemKind::Full, self.alpha, true);
        let (count, h) = substeps(1.0, self.dt);
        let lw = Lawson::new(self.grid, 1.0, h);
        while self.background.len() <= n_max {
            let n = self.background.len() - 1;
            let mut state = vec![self.background[n].clone()];
            for k in 0..count {
                state = lw.step(&sys, n as f64 + k as f64 * h, &state)?.0;
            }
            self.background.push(state.pop().expect("one field"));
        }
        Ok(())
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn coefficients(&self) -> EigenCoefficients {
        self.coeffs
    }

    pub fn weight(&self) -> WeightExponent {
        WeightExponent::new(self.m as f64).expect("2 or 3")
    }

    /// Largest integer time with a cached background snapshot.
    pub fn n_max(&self) -> usize {
        self.background.len() - 1
    }

    /// Background full solution at integer time `n`.
    pub fn background_at(&self, n: usize) -> Result<ScalarField> {
        self.background
            .get(n)
            .map(|s| s.to_field())
            .ok_or_else(|| Error::InvalidParameter {
                name: "n",
                reason: format!("background cached only up to n = {}", self.n_max()),
            })
    }

    /// Leading-order profile `a Gamma(tau)` (plus `e^{-tau/2} sum c_i Lambda_i(tau)` for `m = 3`).
    pub fn profile(&self, tau: f64) -> ScalarField {
        let ef = eigen_fields(self.grid);
        let c = self.alpha * self.alpha * (-tau).exp();
        let mut p = ef.gamma(c).scale(self.coeffs.a);
        if self.m == 3 {
            let d = (-0.5 * tau).exp();
            p = p
                .axpy(d * self.coeffs.c1, &ef.lambda(1, c))
                .and_then(|p| p.axpy(d * self.coeffs.c2, &ef.lambda(2, c)))
                .expect("same grid");
        }
        p
    }

    /// Deviation of the base data from the profile at `tau = 0`.
    pub fn initial_perturbation(&self) -> ScalarField {
        self.w0.sub(&self.profile(0.0)).expect("same grid")
    }
}

/// Which shifted flow to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowKind {
    /// `f_tau = L f - omega(n+s).grad f - a phi.grad Gamma(n+s)`.
    Theta,
    /// `f_tau = L f - omega(n+s).grad f - phi.grad psi(n+s) - e^{-(n+s)} Q(n+s)`.
    Psi,
}

/// Background (field 0) stepped with the full equation and perturbations
/// (fields 1..) with the chosen shifted flow.
struct Driven<'a> {
    ctx: &'a LPContext,
    kind: FlowKind,
    background: SingleSystem,
}

impl Dynamics for Driven<'_> {
    fn grid(&self) -> Grid {
        self.ctx.grid
    }

    fn frame(&self) -> Frame {
        Frame::Scaled
    }

    fn explicit(&self, time: f64, fields: &[Spectrum]) -> Result<(Vec<Spectrum>, f64, f64)> {
        let grid = self.ctx.grid;
        let (bg, speed, removed) = self.background.explicit_one(time, &fields[0]);
        let fp = filter_at(self.ctx.alpha, Frame::Scaled, time);
        let coef = fp.effective_coefficient();
        let bg_eval = eval_field(&fields[0]);
        let omega = filtered_velocity_of(&fields[0], bg_eval.mom, fp).velocity;
        let ef = eigen_fields(grid);
        let cf = self.ctx.coeffs;
        let (px, py) = match self.kind {
            FlowKind::Theta => {
                let (gx, gy) = ef.grad_gamma(coef);
                (gx.scale(cf.a), gy.scale(cf.a))
            }
            FlowKind::Psi => profile_gradient(&ef, cf.a, [cf.c1, cf.c2], coef, time),
        };
        let mut out = Vec::with_capacity(fields.len());
        out.push(bg);
        for s in &fields[1..] {
            let ev = eval_field(s);
            let phi = filtered_velocity_of(s, ev.mom, fp).velocity;
            let mut acc = Accum::zeros(grid);
            acc.add_drift(grid, &ev.gx, &ev.gy);
            acc.add_dot(-1.0, &omega, &ev.gx, &ev.gy);
            acc.add_dot(-1.0, &phi, &px, &py);
            if self.kind == FlowKind::Psi {
                if let Some((q0, q1)) = &self.ctx.forcing {
                    let e = (-time).exp();
                    acc.add(-e, q0);
                    acc.add(e * coef, q1);
                }
            }
            out.push(acc.into_spectrum(grid, Frame::Scaled, true));
        }
        Ok((out, speed, removed))
    }
}

fn check_mass(f0: &ScalarField) -> Result<()> {
    let mass = integrate(f0);
    if mass.abs() > 1e-10 {
        return Err(Error::InvalidParameter {
            name: "f0",
            reason: format!("perturbation must have zero mass, found {mass:.3e}"),
        });
    }
    Ok(())
}

/// Runs several perturbations through the shifted flow from `tau = n` to
/// `tau = n + sigma`, sharing one background.
pub fn shifted_flow_many(
    ctx: &LPContext,
    kind: FlowKind,
    f0s: &[ScalarField],
    n: usize,
    sigma: f64,
) -> Result<Vec<ScalarField>> {
    if !(0.0..=1.0).contains(&sigma) {
        return Err(Error::InvalidParameter {
            name: "sigma",
            reason: format!("must lie in [0, 1], got {sigma}"),
        });
    }
    if n > ctx.n_max() {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: format!("background cached only up to n = {}", ctx.n_max()),
        });
    }
    for f in f0s {
        if f.grid() != ctx.grid {
            return Err(Error::GridMismatch);
        }
        check_mass(f)?;
    }
    let dyn_ = Driven {
        ctx,
        kind,
        background: SingleSystem::new(ctx.grid, SystemKind::Full, ctx.alpha, true),
    };
    let mut state: Vec<Spectrum> = Vec::with_capacity(f0s.len() + 1);
    state.push(ctx.background[n].clone());
    state.extend(f0s.iter().map(|f| f.clone().with_frame(Frame::Scaled).spectrum()));
    // Steps of the same size as the background cache, so the background
    // reproduces its snapshots exactly.
    let (per_unit, h) = substeps(1.0, ctx.dt);
    let count = ((sigma * per_unit as f64) + 1e-9).floor() as usize;
    let lw = Lawson::new(ctx.grid, 1.0, h);
    let mut time = n as f64;
    for k in 0..count {
        state = lw.step(&dyn_, n as f64 + k as f64 * h, &state)?.0;
        time = n as f64 + (k + 1) as f64 * h;
    }
    let rest = n as f64 + sigma - time;
    if rest > 1e-12 {
        let lw = Lawson::new(ctx.grid, 1.0, rest);
        state = lw.step(&dyn_, time, &state)?.0;
    }
    Ok(state[1..].iter().map(|s| s.to_field()).collect())
}

/// `Theta_n(f0)(sigma)`.
pub fn theta_flow(ctx: &LPContext, f0: &ScalarField, n: usize, sigma: f64) -> Result<ScalarField> {
    Ok(shifted_flow_many(ctx, FlowKind::Theta, std::slice::from_ref(f0), n, sigma)?
        .pop()
        .expect("one field"))
}

/// `Psi_n(f0)(sigma)`.
pub fn psi_flow(ctx: &LPContext, f0: &ScalarField, n: usize, sigma: f64) -> Result<ScalarField> {
    Ok(shifted_flow_many(ctx, FlowKind::Psi, std::slice::from_ref(f0), n, sigma)?
        .pop()
        .expect("one field"))
}

fn flow_kind(ctx: &LPContext) -> FlowKind {
    if ctx.m == 3 {
        FlowKind::Psi
    } else {
        FlowKind::Theta
    }
}

/// `S_n = -int_0^1 e^{(1-s) L} e^{-(n+s)} Q(n+s) ds` by Gauss-Legendre
/// quadrature (zero for `m = 2`).
pub fn forcing_s(ctx: &LPContext, n: usize) -> Result<ScalarField> {
    let Some((q0, q1)) = &ctx.forcing else {
        return Ok(ScalarField::zeros(ctx.grid, Frame::Scaled));
    };
    let (x, w) = gauss_legendre(12);
    let mut acc = ScalarField::zeros(ctx.grid, Frame::Scaled);
    for (&z, &wz) in x.iter().zip(&w) {
        let s = 0.5 * (z + 1.0);
        let tau = n as f64 + s;
        let coef = ctx.alpha * ctx.alpha * (-tau).exp();
        let q = q0.axpy(-coef, q1)?.scale((-tau).exp());
        let prop = semigroup_l(&q, SemigroupTime::new(1.0 - s)?);
        acc = acc.axpy(-0.5 * wz, &prop)?;
    }
    Ok(acc)
}

/// `R_n(f0) = Theta_n(f0)(1) - e^L f0` (for `m = 3`, `Psi_n(f0)(1) - e^L f0 - S_n`).
pub fn remainder_r(ctx: &LPContext, f0: &ScalarField, n: usize) -> Result<ScalarField> {
    remainders_many(ctx, std::slice::from_ref(f0), n).map(|mut v| v.pop().expect("one field"))
}

fn remainders_many(ctx: &LPContext, f0s: &[ScalarField], n: usize) -> Result<Vec<ScalarField>> {
    let kind = flow_kind(ctx);
    let flowed = shifted_flow_many(ctx, kind, f0s, n, 1.0)?;
    let s_n = if kind == FlowKind::Psi {
        Some(forcing_s(ctx, n)?)
    } else {
        None
    };
    let one = SemigroupTime::new(1.0)?;
    flowed
        .into_iter()
        .zip(f0s)
        .map(|(out, f0)| {
            let mut r = out.sub(&semigroup_l(f0, one))?;
            if let Some(s) = &s_n {
                r = r.sub(s)?;
            }
            Ok(r)
        })
        .collect()
}

/// Integer-time samples `f_0, f_1, ...` of a positive semiorbit.
#[derive(Debug, Clone)]
pub struct SemiorbitSequence {
    pub entries: Vec<ScalarField>,
    pub mu: f64,
    pub m: u32,
}

/// `f_{n+1} = Theta_n(f_n)(1)` (or `Psi_n`), for `n < steps`.
pub fn semiorbit(ctx: &LPContext, f0: &ScalarField, steps: usize) -> Result<SemiorbitSequence> {
    let kind = flow_kind(ctx);
    let mut entries = vec![f0.clone().with_frame(Frame::Scaled)];
    for n in 0..steps {
        let next = shifted_flow_many(ctx, kind, std::slice::from_ref(&entries[n]), n, 1.0)?
            .pop()
            .expect("one field");
        entries.push(next);
    }
    Ok(SemiorbitSequence {
        entries,
        mu: ctx.mu,
        m: ctx.m,
    })
}

/// `sup_n e^{mu n} ||f_n||_m`.
pub fn emu_norm(seq: &SemiorbitSequence) -> f64 {
    let wm = WeightExponent::new(seq.m as f64).expect("nonnegative");
    seq.entries
        .iter()
        .enumerate()
        .map(|(n, f)| (seq.mu * n as f64).exp() * weighted_norm(f, wm))
        .fold(0.0, f64::max)
}

/// Where the remainders `R_j(f_j)` in the Lyapunov-Perron sums come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RemainderSource {
    /// `R_j = f_{j+1} - e^L f_j - S_j` from consecutive entries.
    Telescoped,
    /// `R_j` recomputed by a fresh unit-time flow from `f_j`.
    Recomputed,
    /// `R_j = 0` (the sequence is expected to follow the linear semigroup).
    Zero,
}

/// Outcome of [`lp_residual`].
#[derive(Debug, Clone)]
pub struct LpResidual {
    /// `max_n ||lhs_n - rhs_n||_m`.
    pub residual: f64,
    pub per_n: Vec<f64>,
    /// Estimated size of the truncated part of the backward sum.
    pub tail_bound: f64,
    /// Observed decay ratio of `||R_j||` used for the tail.
    pub tail_ratio: f64,
}

/// Leading-mode part `P_1 f` as coefficients `(a, c_1, c_2)`.
fn p1_coeffs(f: &ScalarField, m: u32) -> [f64; 3] {
    let mom = moments(f);
    if m == 3 {
        [mom.a, -mom.b1, -mom.b2]
    } else {
        [mom.a, 0.0, 0.0]
    }
}

/// `e^{k L} P_1` applied through the eigenvalues `1` and `e^{-1/2}`; `k` may be negative.
fn p1_propagate(ctx: &LPContext, c: [f64; 3], k: f64) -> ScalarField {
    let ef = eigen_fields(ctx.grid);
    let d = (-0.5 * k).exp();
    ef.g
        .scale(c[0])
        .axpy(d * c[1], &ef.f[0])
        .and_then(|f| f.axpy(d * c[2], &ef.f[1]))
        .expect("same grid")
}

/// Residual of the discrete Lyapunov-Perron equation
/// `f_n = e^{nL} P_2 f_0 - sum_{j >= n} e^{(n-j-1)L} P_1 (R_j + S_j) + sum_{j < n} e^{(n-j-1)L} P_2 (R_j + S_j)`
/// along `seq`. The backward sum runs to `truncation` (at least the sequence
/// length) and the rest is estimated from the geometric decay of `||R_j||`.
pub fn lp_residual(
    seq: &SemiorbitSequence,
    ctx: &LPContext,
    truncation: usize,
    source: RemainderSource,
) -> Result<LpResidual> {
    let len = seq.entries.len();
    if len < 2 {
        return Err(Error::InvalidParameter {
            name: "seq",
            reason: "need at least two entries".into(),
        });
    }
    let m = seq.m;
    let wm = WeightExponent::new(m as f64)?;
    let one = SemigroupTime::new(1.0)?;
    // Total remainder T_j = R_j + S_j for j < len - 1, extended past the
    // sequence end by continuing the flow when the truncation asks for it.
    let mut entries = seq.entries.clone();
    let j_max = truncation.max(len - 1);
    if source != RemainderSource::Zero {
        let kind = flow_kind(ctx);
        while entries.len() <= j_max {
            let n = entries.len() - 1;
            if n > ctx.n_max() {
                break;
            }
            let next = shifted_flow_many(ctx, kind, std::slice::from_ref(&entries[n]), n, 1.0)?
                .pop()
                .expect("one field");
            entries.push(next);
        }
    }
    let j_end = entries.len() - 1;
    let mut totals: Vec<ScalarField> = Vec::with_capacity(j_end);
    for j in 0..j_end {
        let t = match source {
            RemainderSource::Zero => ScalarField::zeros(ctx.grid, Frame::Scaled),
            RemainderSource::Telescoped => entries[j + 1].sub(&semigroup_l(&entries[j], one))?,
            RemainderSource::Recomputed => {
                let r = remainder_r(ctx, &entries[j], j)?;
                r.add(&forcing_s(ctx, j)?)?
            }
        };
        totals.push(t);
    }
    let r_norms: Vec<f64> = totals.iter().map(|t| weighted_norm(t, wm)).collect();
    let p1: Vec<[f64; 3]> = totals.iter().map(|t| p1_coeffs(t, m)).collect();

    // Geometric tail beyond the last available remainder.
    let (tail_ratio, last_p1) = if totals.len() >= 2 && r_norms[totals.len() - 2] > 0.0 {
        let k = totals.len();
        (r_norms[k - 1] / r_norms[k - 2], p1[k - 1])
    } else {
        (0.0, [0.0; 3])
    };

    let f0 = &seq.entries[0];
    let (_, p2_f0) = project(f0, m)?;
    let mut per_n = Vec::with_capacity(len);
    let mut tail_bound: f64 = 0.0;
    for n in 0..len {
        let mut rhs = if n == 0 {
            p2_f0.clone()
        } else {
            semigroup_l(&p2_f0, SemigroupTime::new(n as f64)?)
        };
        // Backward sum over j >= n of the leading-mode parts.
        let mut back = [0.0f64; 3];
        for (j, c) in p1.iter().enumerate().skip(n) {
            let k = n as f64 - j as f64 - 1.0;
            let grow = (-0.5 * k).exp();
            back[0] += c[0];
            back[1] += grow * c[1];
            back[2] += grow * c[2];
        }
        rhs = rhs.sub(&p1_propagate(ctx, back, 0.0))?;
        // Forward sum over j < n of the remainder parts.
        for (j, t) in totals.iter().enumerate().take(n) {
            let (_, p2t) = project(t, m)?;
            let k = n as f64 - j as f64 - 1.0;
            let prop = if k == 0.0 {
                p2t
            } else {
                semigroup_l(&p2t, SemigroupTime::new(k)?)
            };
            rhs = rhs.add(&prop)?;
        }
        let lhs = &seq.entries[n];
        per_n.push(weighted_norm(&lhs.sub(&rhs)?, wm));

        // Tail from j = j_end onward: |P_1 T_j| ~ |P_1 T_{j_end-1}| rho^{j-j_end+1},
        // with the F-part amplified by e^{(j+1-n)/2}.
        if tail_ratio > 0.0 {
            let ef = eigen_fields(ctx.grid);
            let g_norm = weighted_norm(&ef.g, wm);
            let f_norm = weighted_norm(&ef.f[0], wm);
            let cg = last_p1[0].abs() * g_norm;
            let cf = (last_p1[1].abs() + last_p1[2].abs()) * f_norm;
            let rho = tail_ratio;
            let mut t = if cg == 0.0 {
                0.0
            } else if rho < 1.0 {
                cg * rho / (1.0 - rho)
            } else {
                f64::INFINITY
            };
            if cf > 0.0 {
                let growth = 0.5f64.exp();
                let q = rho * growth;
                let first = (0.5 * (j_end as f64 + 1.0 - n as f64)).exp();
                t += if q < 1.0 { cf * rho * first / (1.0 - q) } else { f64::INFINITY };
            }
            tail_bound = tail_bound.max(t);
        }
    }
    let residual = per_n.iter().cloned().fold(0.0, f64::max);
    Ok(LpResidual {
        residual,
        per_n,
        tail_bound,
        tail_ratio,
    })
}

/// Richardson-style estimate of the time-stepping error of the semiorbit:
/// `max_n ||f_n(dt) - f_n(dt/2)||_m`.
pub fn stepping_tolerance(ctx: &LPContext, seq: &SemiorbitSequence) -> Result<f64> {
    let fine = LPContext::new(
        ctx.m,
        ctx.mu,
        ctx.alpha,
        &ctx.w0,
        ctx.r0,
        0.5 * ctx.dt,
        ctx.n_max(),
    )?;
    let steps = seq.entries.len() - 1;
    let other = semiorbit(&fine, &seq.entries[0], steps)?;
    let wm = ctx.weight();
    let mut worst: f64 = 0.0;
    for (a, b) in seq.entries.iter().zip(&other.entries) {
        worst = worst.max(weighted_norm(&a.sub(b)?, wm));
    }
    Ok(worst)
}

/// Projection constants `C_1`, `C_2` for the contraction inequality.
#[derive(Debug, Clone, Copy)]
pub struct ProjectionConstants {
    /// `max_{k <= 5} e^{-k kappa} ||e^{-kL} P_1||`, exact finite-rank norm.
    pub c1: f64,
    /// `max` over sampled fields and `k <= 5` of `e^{k delta} ||e^{kL} P_2 f|| / ||f||`, inflated 10%.
    pub c2: f64,
}

fn sym3_max_eig(a: [[f64; 3]; 3]) -> f64 {
    // Power iteration on a positive semidefinite 3x3 matrix.
    let mut v = [1.0, 0.7, 0.3];
    let mut lam = 0.0;
    for _ in 0..500 {
        let w = [
            a[0][0] * v[0] + a[0][1] * v[1] + a[0][2] * v[2],
            a[1][0] * v[0] + a[1][1] * v[1] + a[1][2] * v[2],
            a[2][0] * v[0] + a[2][1] * v[1] + a[2][2] * v[2],
        ];
        let norm = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm / (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        v = [w[0] / norm, w[1] / norm, w[2] / norm];
        if (next - lam).abs() < 1e-15 * next {
            lam = next;
            break;
        }
        lam = next;
    }
    lam
}

fn inner_m(f: &ScalarField, g: &ScalarField, m: f64) -> f64 {
    let grid = f.grid();
    let h = grid.spacing();
    let pts = grid.points();
    let n = grid.n();
    let mut acc = 0.0;
    for (i2, &y) in pts.iter().enumerate() {
        for (i1, &x) in pts.iter().enumerate() {
            let idx = i2 * n + i1;
            acc += (1.0 + x * x + y * y).powf(m) * f.values()[idx] * g.values()[idx];
        }
    }
    h * h * acc
}

/// Measures `C_1` and `C_2` on the context's grid.
pub fn projection_constants(ctx: &LPContext, samples: usize, seed: u64) -> Result<ProjectionConstants> {
    let grid = ctx.grid;
    let m = ctx.m;
    let mf = m as f64;
    let ef = eigen_fields(grid);
    let rank = if m == 3 { 3 } else { 1 };
    // P_1 f = sum_k <f, g_k>_m e_k with g_0 = b^{-2m}, g_i = -xi_i b^{-2m}.
    let g0 = ScalarField::from_fn(grid, Frame::Scaled, |x, y| (1.0 + x * x + y * y).powf(-mf));
    let g1 = g0.mul_fn(|x, _| -x);
    let g2 = g0.mul_fn(|_, y| -y);
    let gs = [g0, g1, g2];
    let es = [ef.g.clone(), ef.f[0].clone(), ef.f[1].clone()];
    let mut ag = [[0.0; 3]; 3];
    let mut ae = [[0.0; 3]; 3];
    for i in 0..rank {
        for j in 0..rank {
            ag[i][j] = inner_m(&gs[i], &gs[j], mf);
            ae[i][j] = inner_m(&es[i], &es[j], mf);
        }
    }
    // Cholesky of A_g (at most 3x3).
    let mut l = [[0.0; 3]; 3];
    for i in 0..rank {
        for j in 0..=i {
            let mut s = ag[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            l[i][j] = if i == j { s.max(0.0).sqrt() } else { s / l[j][j] };
        }
    }
    let kappa = if m == 3 { 0.5 } else { 0.0 };
    let mut c1: f64 = 0.0;
    for k in 0..=5 {
        let kf = k as f64;
        // e^{-k kappa} e^{-kL} scales e_0 by e^{-k kappa} and e_i by e^{k/2 - k kappa}.
        let sc = [(-kf * kappa).exp(), (0.5 * kf - kf * kappa).exp(), (0.5 * kf - kf * kappa).exp()];
        let mut s = [[0.0; 3]; 3];
        for i in 0..rank {
            for j in 0..rank {
                let mut acc = 0.0;
                for p in 0..rank {
                    for q in 0..rank {
                        acc += l[p][i] * sc[p] * ae[p][q] * sc[q] * l[q][j];
                    }
                }
                s[i][j] = acc;
            }
        }
        c1 = c1.max(sym3_max_eig(s).sqrt());
    }

    let delta = if m == 3 { 1.0 } else { 0.5 };
    let wm = ctx.weight();
    let mut r = rng(seed);
    let mut c2: f64 = 0.0;
    for _ in 0..samples {
        let f = random_localized(grid, &mut r);
        let nf = weighted_norm(&f, wm);
        let (_, p2) = project(&f, m)?;
        c2 = c2.max(weighted_norm(&p2, wm) / nf);
        for k in 1..=5 {
            let kf = k as f64;
            let prop = semigroup_l(&p2, SemigroupTime::new(kf)?);
            c2 = c2.max((kf * delta).exp() * weighted_norm(&prop, wm) / nf);
        }
    }
    Ok(ProjectionConstants { c1, c2: 1.1 * c2 })
}

/// One sampled Lipschitz quotient.
#[derive(Debug, Clone, Copy)]
pub struct LipschitzSample {
    pub pair: usize,
    pub n: usize,
    pub quotient: f64,
}

/// Outcome of [`estimate_lipschitz`].
#[derive(Debug, Clone)]
pub struct LipschitzEstimate {
    pub lip_r: f64,
    pub constants: ProjectionConstants,
    /// Left side of the contraction inequality; must be below `1 / lip_r`.
    pub lhs: f64,
    pub contraction_ok: bool,
    pub table: Vec<LipschitzSample>,
}

/// Samples `||R_n(f) - R_n(g)||_m / ||f - g||_m` over random pairs in `X_2`
/// with norms at most `r0` and `n = 0..=4`, then evaluates the contraction
/// inequality with measured projection constants.
pub fn estimate_lipschitz(ctx: &LPContext, samples: usize, seed: u64) -> Result<LipschitzEstimate> {
    if samples < 1 {
        return Err(Error::InvalidParameter {
            name: "samples",
            reason: "need at least one pair".into(),
        });
    }
    let grid = ctx.grid;
    let wm = ctx.weight();
    let mut r = rng(seed);
    let mut fs = Vec::with_capacity(2 * samples);
    for _ in 0..2 * samples {
        let size = ctx.r0 * r.gen_range(0.2..1.0);
        fs.push(random_in_x2(grid, ctx.m, size, &mut r)?);
    }
    let n_top = 4.min(ctx.n_max());
    let mut table = Vec::new();
    let mut lip_r: f64 = 0.0;
    for n in 0..=n_top {
        let rs = remainders_many(ctx, &fs, n)?;
        for p in 0..samples {
            let num = weighted_norm(&rs[2 * p].sub(&rs[2 * p + 1])?, wm);
            let den = weighted_norm(&fs[2 * p].sub(&fs[2 * p + 1])?, wm);
            let quotient = num / den;
            lip_r = lip_r.max(quotient);
            table.push(LipschitzSample { pair: p, n, quotient });
        }
    }
    let constants = projection_constants(ctx, 50, seed ^ 0x9e37_79b9)?;
    let mu = ctx.mu;
    let lhs = if ctx.m == 3 {
        constants.c1 / ((-0.5f64).exp() - (-mu).exp()) + constants.c2 / ((-mu).exp() - (-1.0f64).exp())
    } else {
        constants.c1 / (1.0 - (-mu).exp()) + constants.c2 / ((-mu).exp() - (-0.5f64).exp())
    };
    let contraction_ok = lhs * lip_r < 1.0;
    Ok(LipschitzEstimate {
        lip_r,
        constants,
        lhs,
        contraction_ok,
        table,
    })
}

/// Largest `|int f|` over the entries, the size of `P_1 f_n` for `m = 2`.
pub fn max_leading_mass(seq: &SemiorbitSequence) -> f64 {
    seq.entries
        .iter()
        .map(|f| integrate(f).abs())
        .fold(0.0, f64::max)
}
