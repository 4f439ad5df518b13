//! Time integration of the vorticity equations in the physical and scaled
//! frames, of the equation linearized about `a Gamma`, and of the difference
//! systems for the deviation from the leading-order asymptotic profile.
//!
//! Stepping uses the Lawson (integrating-factor) fourth-order Runge-Kutta
//! scheme: the constant-coefficient part (`Delta + I` in the scaled frame,
//! `Delta` in the physical frame) is propagated exactly in Fourier space and
//! everything else, including the drift `xi.grad/2`, is explicit and dealiased.

use std::collections::HashMap;

use num_complex::Complex64;

use crate::eigenbasis::eigen_fields;
use crate::error::{Error, Result};
use crate::norms::{moments, MomentSet};
use crate::operators::{
    helmholtz_filter_spectrum, velocity_from_spectrum, BiotSavart, FilterParams,
};
use crate::spectral::{dealias_in_place, fft_for, Frame, Grid, ScalarField, Spectrum, VectorField};

/// How the quadratic `F`-`Lambda` forcing of the second-order difference
/// system is assembled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForcingForm {
    /// `sum_{i,j} c_i c_j v^{F_i} . grad Lambda_j`, which is what substituting
    /// the second-order profile into the equation produces.
    Full,
    /// Diagonal terms only, `c_1^2 v^{F_1}.grad Lambda_1 + sign * c_2^2 v^{F_2}.grad Lambda_2`.
    /// Kept to demonstrate that dropping the cross terms leaves a residual.
    Diagonal { sign: f64 },
}

/// Which equation is integrated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SystemKind {
    /// `w_tau = L w - omega . grad w`, `omega = B(H_tau w)`.
    Full,
    /// `psi_tau = L psi - a eta . grad Gamma - a v^G . grad psi`, `eta = B(H_tau psi)`.
    Linearized { a: f64 },
    /// `f_tau = L f - omega . grad f - a phi . grad Gamma`, with
    /// `phi = B(H_tau f)` and `omega = a v^G + phi`.
    Difference1 { a: f64 },
    /// Deviation from `a Gamma + e^{-tau/2} (c_1 Lambda_1 + c_2 Lambda_2)`:
    /// `f_tau = L f - omega . grad f - phi . grad psi - e^{-tau} Q(tau)`.
    Difference2 {
        a: f64,
        c1: f64,
        c2: f64,
        forcing: ForcingForm,
    },
    /// Physical frame `v_t = Delta v - u . grad v`, `u = B(H_alpha v)`.
    Physical,
}

impl SystemKind {
    pub fn frame(&self) -> Frame {
        match self {
            SystemKind::Physical => Frame::Physical,
            _ => Frame::Scaled,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SystemKind::Full => "full",
            SystemKind::Linearized { .. } => "linearized",
            SystemKind::Difference1 { .. } => "difference1",
            SystemKind::Difference2 { .. } => "difference2",
            SystemKind::Physical => "physical",
        }
    }
}

/// Run parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_points: usize,
    pub half_width: f64,
    pub alpha: f64,
    pub system: SystemKind,
    pub dt: f64,
    pub t_end: f64,
    pub dealias: bool,
    /// Observers fire every `cadence` accepted steps.
    pub cadence: usize,
}

impl SimConfig {
    pub fn scaled(system: SystemKind) -> Self {
        Self {
            n_points: 256,
            half_width: 12.0,
            alpha: 0.1,
            system,
            dt: 0.01,
            t_end: 8.0,
            dealias: true,
            cadence: 10,
        }
    }

    pub fn physical() -> Self {
        Self {
            n_points: 256,
            half_width: 48.0,
            alpha: 0.1,
            system: SystemKind::Physical,
            dt: 0.1,
            t_end: 100.0,
            dealias: true,
            cadence: 10,
        }
    }

    pub fn frame(&self) -> Frame {
        self.system.frame()
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.n_points, self.half_width)
    }

    pub fn validate(&self) -> Result<Grid> {
        let grid = self.grid()?;
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!("must be positive, got {}", self.dt),
            });
        }
        if !(self.t_end >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "t_end",
                reason: format!("must be >= 0, got {}", self.t_end),
            });
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                reason: format!("must be >= 0, got {}", self.alpha),
            });
        }
        if self.cadence == 0 {
            return Err(Error::InvalidParameter {
                name: "cadence",
                reason: "must be at least 1".into(),
            });
        }
        Ok(grid)
    }
}

/// Snapshot of a run handed to observers.
#[derive(Debug, Clone)]
pub struct SimState {
    pub frame: Frame,
    /// `t` in the physical frame, `tau` in the scaled frame.
    pub time: f64,
    pub w: ScalarField,
    /// `(time, moments)` after every accepted step, starting with the initial data.
    pub moment_history: Vec<(f64, MomentSet)>,
    /// Largest advecting speed seen in the last step.
    pub max_speed: f64,
    /// Mean discarded by the last periodic velocity inversion.
    pub removed_mean: f64,
    pub steps: usize,
}

/// Physical-space view of one evolved field.
pub(crate) struct Eval {
    pub gx: ScalarField,
    pub gy: ScalarField,
    pub mom: MomentSet,
}

pub(crate) fn eval_field(s: &Spectrum) -> Eval {
    let w = s.to_field();
    let gx = s.derivative(0).to_field();
    let gy = s.derivative(1).to_field();
    let mom = match s.frame() {
        Frame::Scaled => moments(&w),
        Frame::Physical => MomentSet::default(),
    };
    Eval { gx, gy, mom }
}

/// `B(H w)` for a field whose spectrum and moments are known.
pub(crate) fn filtered_velocity_of(s: &Spectrum, mom: MomentSet, fp: FilterParams) -> BiotSavart {
    velocity_from_spectrum(&helmholtz_filter_spectrum(s, fp), mom)
}

/// Effective filter coefficient at time `time` for `frame`.
pub(crate) fn filter_at(alpha: f64, frame: Frame, time: f64) -> FilterParams {
    let c = match frame {
        Frame::Physical => alpha * alpha,
        Frame::Scaled => alpha * alpha * (-time).exp(),
    };
    FilterParams::with_coefficient(alpha, c).expect("validated alpha")
}

/// Accumulates explicit terms in physical space.
pub(crate) struct Accum {
    pub values: Vec<f64>,
}

impl Accum {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            values: vec![0.0; grid.len()],
        }
    }

    /// `values += s * (u . (gx, gy))`.
    pub fn add_dot(&mut self, s: f64, u: &VectorField, gx: &ScalarField, gy: &ScalarField) {
        for ((((v, ux), uy), a), b) in self
            .values
            .iter_mut()
            .zip(u.x.values())
            .zip(u.y.values())
            .zip(gx.values())
            .zip(gy.values())
        {
            *v += s * (ux * a + uy * b);
        }
    }

    /// `values += s * f`.
    pub fn add(&mut self, s: f64, f: &ScalarField) {
        for (v, x) in self.values.iter_mut().zip(f.values()) {
            *v += s * x;
        }
    }

    /// `values += xi . grad w / 2`.
    pub fn add_drift(&mut self, grid: Grid, gx: &ScalarField, gy: &ScalarField) {
        let pts = grid.points();
        let n = grid.n();
        for (i2, &y) in pts.iter().enumerate() {
            for (i1, &x) in pts.iter().enumerate() {
                let idx = i2 * n + i1;
                self.values[idx] += 0.5 * (x * gx.values()[idx] + y * gy.values()[idx]);
            }
        }
    }

    pub fn into_spectrum(self, grid: Grid, frame: Frame, dealias: bool) -> Spectrum {
        let mut data: Vec<Complex64> = self
            .values
            .into_iter()
            .map(|v| Complex64::new(v, 0.0))
            .collect();
        fft_for(grid.n()).forward(&mut data);
        let mut s = Spectrum::from_coeffs(grid, frame, data);
        if dealias {
            dealias_in_place(&mut s);
        }
        s
    }
}

/// Precomputed `Q0 = sum c_i c_j v^{F_i}.grad F_j` and `Q1 = sum c_i c_j v^{F_i}.grad Delta F_j`,
/// so that `Q(tau) = Q0 - alpha^2 e^{-tau} Q1`.
pub(crate) fn quadratic_forcing(grid: Grid, c: [f64; 2], form: ForcingForm) -> (ScalarField, ScalarField) {
    let ef = eigen_fields(grid);
    let mut q0 = Accum::zeros(grid);
    let mut q1 = Accum::zeros(grid);
    for i in 1..=2 {
        for j in 1..=2 {
            let weight = match form {
                ForcingForm::Full => c[i - 1] * c[j - 1],
                ForcingForm::Diagonal { sign } => {
                    if i != j {
                        continue;
                    }
                    let s = if i == 2 { sign } else { 1.0 };
                    s * c[i - 1] * c[i - 1]
                }
            };
            let (g0x, g0y) = ef.grad_lambda(j, 0.0);
            // grad Delta F_j from the Hessian of Delta G
            let (hx, hy) = {
                let k1 = if j == 1 { 0 } else { 1 };
                let k2 = if j == 1 { 1 } else { 2 };
                (ef.hess_lap_g[k1].clone(), ef.hess_lap_g[k2].clone())
            };
            q0.add_dot(weight, &ef.vf[i - 1], &g0x, &g0y);
            q1.add_dot(weight, &ef.vf[i - 1], &hx, &hy);
        }
    }
    (
        ScalarField::from_values(grid, Frame::Scaled, q0.values).expect("sized"),
        ScalarField::from_values(grid, Frame::Scaled, q1.values).expect("sized"),
    )
}

/// Right-hand side of an evolution equation split as `l(k) u^ + N(t, u)`.
pub(crate) trait Dynamics {
    fn grid(&self) -> Grid;
    fn frame(&self) -> Frame;
    /// Constant added to `-|k|^2` in the exactly integrated part.
    fn shift(&self) -> f64 {
        match self.frame() {
            Frame::Scaled => 1.0,
            Frame::Physical => 0.0,
        }
    }
    /// Explicit part for every field, plus the largest advecting speed and the
    /// mean removed by the velocity inversion.
    fn explicit(&self, time: f64, fields: &[Spectrum]) -> Result<(Vec<Spectrum>, f64, f64)>;
}

/// One equation from [`SystemKind`].
pub(crate) struct SingleSystem {
    pub grid: Grid,
    pub kind: SystemKind,
    pub alpha: f64,
    pub dealias: bool,
    forcing: Option<(ScalarField, ScalarField)>,
}

impl SingleSystem {
    pub fn new(grid: Grid, kind: SystemKind, alpha: f64, dealias: bool) -> Self {
        let forcing = match kind {
            SystemKind::Difference2 { c1, c2, forcing, .. } => {
                Some(quadratic_forcing(grid, [c1, c2], forcing))
            }
            _ => None,
        };
        Self {
            grid,
            kind,
            alpha,
            dealias,
            forcing,
        }
    }

    pub fn explicit_one(&self, time: f64, s: &Spectrum) -> (Spectrum, f64, f64) {
        let grid = self.grid;
        let frame = self.kind.frame();
        let fp = filter_at(self.alpha, frame, time);
        let ev = eval_field(s);
        let mut acc = Accum::zeros(grid);
        if frame == Frame::Scaled {
            acc.add_drift(grid, &ev.gx, &ev.gy);
        }
        let coef = fp.effective_coefficient();
        let ef = if frame == Frame::Scaled {
            Some(eigen_fields(grid))
        } else {
            None
        };
        let (speed, removed) = match self.kind {
            SystemKind::Physical | SystemKind::Full => {
                let bs = filtered_velocity_of(s, ev.mom, fp);
                acc.add_dot(-1.0, &bs.velocity, &ev.gx, &ev.gy);
                (bs.velocity.max_norm(), bs.removed_mean)
            }
            SystemKind::Linearized { a } => {
                let ef = ef.expect("scaled");
                let eta = filtered_velocity_of(s, ev.mom, fp);
                let (gx, gy) = ef.grad_gamma(coef);
                acc.add_dot(-a, &eta.velocity, &gx, &gy);
                acc.add_dot(-a, &ef.vg, &ev.gx, &ev.gy);
                (a.abs() * ef.vg.max_norm(), eta.removed_mean)
            }
            SystemKind::Difference1 { a } => {
                let ef = ef.expect("scaled");
                let phi = filtered_velocity_of(s, ev.mom, fp);
                let omega = phi.velocity.axpy(a, &ef.vg).expect("same grid");
                acc.add_dot(-1.0, &omega, &ev.gx, &ev.gy);
                let (gx, gy) = ef.grad_gamma(coef);
                acc.add_dot(-a, &phi.velocity, &gx, &gy);
                (omega.max_norm(), phi.removed_mean)
            }
            SystemKind::Difference2 { a, c1, c2, .. } => {
                let ef = ef.expect("scaled");
                let phi = filtered_velocity_of(s, ev.mom, fp);
                let decay = (-0.5 * time).exp();
                let omega = phi
                    .velocity
                    .axpy(a, &ef.vg)
                    .and_then(|v| v.axpy(decay * c1, &ef.vf[0]))
                    .and_then(|v| v.axpy(decay * c2, &ef.vf[1]))
                    .expect("same grid");
                acc.add_dot(-1.0, &omega, &ev.gx, &ev.gy);
                let (px, py) = profile_gradient(&ef, a, [c1, c2], coef, time);
                acc.add_dot(-1.0, &phi.velocity, &px, &py);
                let (q0, q1) = self.forcing.as_ref().expect("built with system");
                let e = (-time).exp();
                acc.add(-e, q0);
                acc.add(e * coef, q1);
                (omega.max_norm(), phi.removed_mean)
            }
        };
        (acc.into_spectrum(grid, frame, self.dealias), speed, removed)
    }
}

/// `grad psi` for `psi = a Gamma + e^{-tau/2} (c_1 Lambda_1 + c_2 Lambda_2)`.
pub(crate) fn profile_gradient(
    ef: &crate::eigenbasis::EigenFields,
    a: f64,
    c: [f64; 2],
    coef: f64,
    time: f64,
) -> (ScalarField, ScalarField) {
    let (mut px, mut py) = ef.grad_gamma(coef);
    px = px.scale(a);
    py = py.scale(a);
    let decay = (-0.5 * time).exp();
    for j in 1..=2 {
        if c[j - 1] == 0.0 {
            continue;
        }
        let (lx, ly) = ef.grad_lambda(j, coef);
        px = px.axpy(decay * c[j - 1], &lx).expect("same grid");
        py = py.axpy(decay * c[j - 1], &ly).expect("same grid");
    }
    (px, py)
}

impl Dynamics for SingleSystem {
    fn grid(&self) -> Grid {
        self.grid
    }

    fn frame(&self) -> Frame {
        self.kind.frame()
    }

    fn explicit(&self, time: f64, fields: &[Spectrum]) -> Result<(Vec<Spectrum>, f64, f64)> {
        let (s, speed, removed) = self.explicit_one(time, &fields[0]);
        Ok((vec![s], speed, removed))
    }
}

/// Integrating-factor multipliers `e^{l h/2}`, `e^{l h}` for one step size.
pub(crate) struct Lawson {
    pub h: f64,
    half: Vec<f64>,
    full: Vec<f64>,
}

impl Lawson {
    pub fn new(grid: Grid, shift: f64, h: f64) -> Self {
        let k2 = grid.k_squared();
        let half = k2.iter().map(|&k| ((shift - k) * 0.5 * h).exp()).collect();
        let full = k2.iter().map(|&k| ((shift - k) * h).exp()).collect();
        Self { h, half, full }
    }

    fn apply(mult: &[f64], s: &Spectrum) -> Spectrum {
        let mut out = s.clone();
        for (c, m) in out.coeffs_mut().iter_mut().zip(mult) {
            *c *= m;
        }
        out
    }

    /// One Lawson RK4 step; returns the new fields and the stage-1 speed and
    /// removed mean.
    pub fn step(
        &self,
        dynamics: &dyn Dynamics,
        time: f64,
        u: &[Spectrum],
    ) -> Result<(Vec<Spectrum>, f64, f64)> {
        let h = self.h;
        let (k1, speed, removed) = dynamics.explicit(time, u)?;
        let bound = 0.5 * dynamics.grid().spacing() / speed.max(f64::MIN_POSITIVE);
        if h > bound {
            return Err(Error::Cfl {
                time,
                dt: h,
                bound,
            });
        }
        let combine = |base: &[Spectrum], s: f64, k: &[Spectrum]| -> Vec<Spectrum> {
            base.iter()
                .zip(k)
                .map(|(b, kk)| {
                    let mut o = b.clone();
                    o.add_scaled(s, kk);
                    o
                })
                .collect()
        };
        let u2: Vec<Spectrum> = combine(u, 0.5 * h, &k1)
            .iter()
            .map(|x| Self::apply(&self.half, x))
            .collect();
        let (k2, _, _) = dynamics.explicit(time + 0.5 * h, &u2)?;
        let eu: Vec<Spectrum> = u.iter().map(|x| Self::apply(&self.half, x)).collect();
        let u3 = combine(&eu, 0.5 * h, &k2);
        let (k3, _, _) = dynamics.explicit(time + 0.5 * h, &u3)?;
        let ek3: Vec<Spectrum> = k3.iter().map(|x| Self::apply(&self.half, x)).collect();
        let efu: Vec<Spectrum> = u.iter().map(|x| Self::apply(&self.full, x)).collect();
        let u4 = combine(&efu, h, &ek3);
        let (k4, _, _) = dynamics.explicit(time + h, &u4)?;

        let mut out = Vec::with_capacity(u.len());
        for idx in 0..u.len() {
            let mut acc = Self::apply(&self.full, &k1[idx]);
            let mut mid = k2[idx].clone();
            mid.add_scaled(1.0, &k3[idx]);
            acc.add_scaled(2.0, &Self::apply(&self.half, &mid));
            acc.add_scaled(1.0, &k4[idx]);
            let mut next = efu[idx].clone();
            next.add_scaled(h / 6.0, &acc);
            if next.coeffs().iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                return Err(Error::NonFinite {
                    time: time + h,
                    what: format!("field {idx} after step"),
                });
            }
            out.push(next);
        }
        Ok((out, speed, removed))
    }
}

/// Number of uniform substeps of size at most `dt` covering `span`.
pub(crate) fn substeps(span: f64, dt: f64) -> (usize, f64) {
    if span <= 0.0 {
        return (0, dt);
    }
    let ratio = span / dt;
    let n = if (ratio - ratio.round()).abs() < 1e-9 {
        ratio.round() as usize
    } else {
        ratio.ceil() as usize
    };
    let n = n.max(1);
    (n, span / n as f64)
}

/// A single-field run of one [`SystemKind`].
pub struct Simulation {
    config: SimConfig,
    system: SingleSystem,
    spectrum: Spectrum,
    state: SimState,
    integrators: HashMap<u64, Lawson>,
}

impl Simulation {
    /// Starts at time 0.
    pub fn new(config: SimConfig, w0: &ScalarField) -> Result<Self> {
        Self::starting_at(config, w0, 0.0)
    }

    /// Starts at `time` (coefficients of the scaled systems depend on it).
    pub fn starting_at(config: SimConfig, w0: &ScalarField, time: f64) -> Result<Self> {
        let grid = config.validate()?;
        if w0.grid() != grid {
            return Err(Error::GridMismatch);
        }
        let frame = config.frame();
        let w = w0.clone().with_frame(frame);
        let spectrum = w.spectrum();
        let system = SingleSystem::new(grid, config.system, config.alpha, config.dealias);
        let state = SimState {
            frame,
            time,
            moment_history: vec![(time, moments(&w))],
            w,
            max_speed: 0.0,
            removed_mean: 0.0,
            steps: 0,
        };
        Ok(Self {
            config,
            system,
            spectrum,
            state,
            integrators: HashMap::new(),
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.state.time
    }

    /// Filtered velocity of the current state (for the difference systems,
    /// the full advecting velocity).
    pub fn velocity(&self) -> VectorField {
        let frame = self.config.frame();
        let fp = filter_at(self.config.alpha, frame, self.state.time);
        let mom = match frame {
            Frame::Scaled => moments(&self.state.w),
            Frame::Physical => MomentSet::default(),
        };
        let phi = filtered_velocity_of(&self.spectrum, mom, fp).velocity;
        let grid = self.system.grid;
        match self.config.system {
            SystemKind::Full | SystemKind::Physical => phi,
            SystemKind::Linearized { a } => eigen_fields(grid).vg.scale(a),
            SystemKind::Difference1 { a } => phi.axpy(a, &eigen_fields(grid).vg).expect("same grid"),
            SystemKind::Difference2 { a, c1, c2, .. } => {
                let ef = eigen_fields(grid);
                let d = (-0.5 * self.state.time).exp();
                phi.axpy(a, &ef.vg)
                    .and_then(|v| v.axpy(d * c1, &ef.vf[0]))
                    .and_then(|v| v.axpy(d * c2, &ef.vf[1]))
                    .expect("same grid")
            }
        }
    }

    /// Advances by one step of size `h`.
    pub fn step_by(&mut self, h: f64) -> Result<()> {
        let key = h.to_bits();
        let shift = self.system.shift();
        let grid = self.system.grid;
        let lw = self
            .integrators
            .entry(key)
            .or_insert_with(|| Lawson::new(grid, shift, h));
        let (mut next, speed, removed) =
            lw.step(&self.system, self.state.time, std::slice::from_ref(&self.spectrum))?;
        self.spectrum = next.pop().expect("one field");
        self.state.time += h;
        self.state.w = self.spectrum.to_field();
        self.state.max_speed = speed;
        self.state.removed_mean = removed;
        self.state.steps += 1;
        let mom = moments(&self.state.w);
        self.state.moment_history.push((self.state.time, mom));
        Ok(())
    }

    /// Advances by the configured `dt`.
    pub fn step(&mut self) -> Result<()> {
        self.step_by(self.config.dt)
    }

    /// Steps to `t_end` with uniform steps no larger than `dt`, calling
    /// `observer` on the initial state and after every `cadence` steps (and at
    /// the end). Returns the number of steps taken.
    pub fn run_to(&mut self, t_end: f64, observer: &mut dyn FnMut(&SimState)) -> Result<usize> {
        let (count, h) = substeps(t_end - self.state.time, self.config.dt);
        observer(&self.state);
        for k in 0..count {
            self.step_by(h)?;
            if (k + 1) % self.config.cadence == 0 || k + 1 == count {
                observer(&self.state);
            }
        }
        Ok(count)
    }
}

/// Full right-hand side `L w + N(w)` of a scaled-frame system at time `tau`.
pub fn rhs_scaled(w: &ScalarField, tau: f64, alpha: f64, kind: SystemKind) -> Result<ScalarField> {
    if kind.frame() != Frame::Scaled {
        return Err(Error::InvalidParameter {
            name: "kind",
            reason: "rhs_scaled needs a scaled-frame system".into(),
        });
    }
    let grid = w.grid();
    let sys = SingleSystem::new(grid, kind, alpha, true);
    let s = w.clone().with_frame(Frame::Scaled).spectrum();
    let (mut nl, _, _) = sys.explicit_one(tau, &s);
    let lin = s.apply_radial(|k2| 1.0 - k2);
    nl.add_scaled(1.0, &lin);
    Ok(nl.to_field())
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; q];
    let mut w = vec![0.0; q];
    for i in 0..q {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(q, z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(q, z);
        x[q - 1 - i] = z;
        w[q - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

fn legendre(q: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for k in 2..=q {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if q == 0 {
        return (1.0, 0.0);
    }
    let dp = q as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, dp)
}

/// Lagrange basis polynomials on `nodes` evaluated at `s`.
fn lagrange_at(nodes: &[f64], s: f64, out: &mut [f64]) {
    for (r, o) in out.iter_mut().enumerate() {
        let mut v = 1.0;
        for (q, &xq) in nodes.iter().enumerate() {
            if q != r {
                v *= (s - xq) / (nodes[r] - xq);
            }
        }
        *o = v;
    }
}

/// Duhamel weights `W[q][r] = int_0^{ends[q]} e^{-lambda (ends[q] - s)} l_r(s) ds`.
fn duhamel_weights(lambda: f64, nodes: &[f64], ends: &[f64], panel: &(Vec<f64>, Vec<f64>)) -> Vec<f64> {
    let nq = nodes.len();
    let mut out = vec![0.0; ends.len() * nq];
    let mut basis = vec![0.0; nq];
    for (qi, &end) in ends.iter().enumerate() {
        // The kernel is negligible more than 50/lambda before `end`.
        let start = if lambda > 0.0 { (end - 50.0 / lambda).max(0.0) } else { 0.0 };
        let span = end - start;
        let width = if lambda > 0.0 { 1.0 / lambda } else { span };
        let panels = ((span / width).ceil() as usize).max(1);
        let pw = span / panels as f64;
        for p in 0..panels {
            let a = start + p as f64 * pw;
            for (&z, &wz) in panel.0.iter().zip(&panel.1) {
                let s = a + 0.5 * pw * (z + 1.0);
                let weight = 0.5 * pw * wz * (-lambda * (end - s)).exp();
                lagrange_at(nodes, s, &mut basis);
                for r in 0..nq {
                    out[qi * nq + r] += weight * basis[r];
                }
            }
        }
    }
    out
}

/// Fixed point of the Duhamel formula
/// `v(t) = e^{t Delta} v0 - int_0^t div e^{(t-s) Delta} (u v)(s) ds`, `u = B(H_alpha v)`,
/// collocated at `nodes` Gauss-Legendre points in time. `alpha = None` switches
/// the nonlinearity off. Returns the solution at `t` and the successive
/// iterate distances.
pub fn picard_mild_solve(
    v0: &ScalarField,
    t: f64,
    alpha: Option<f64>,
    iterations: usize,
    nodes: usize,
) -> Result<(ScalarField, Vec<f64>)> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "t",
            reason: format!("must be >= 0, got {t}"),
        });
    }
    let grid = v0.grid();
    let n = grid.n();
    let v0 = v0.clone().with_frame(Frame::Physical);
    let v0_hat = v0.spectrum();
    let heat = |s: f64| v0_hat.apply_radial(|k2| (-k2 * s).exp());
    let Some(alpha) = alpha else {
        return Ok((heat(t).to_field(), Vec::new()));
    };
    if t == 0.0 {
        return Ok((v0, Vec::new()));
    }
    let fp = FilterParams::physical(alpha)?;
    let (gx, _) = gauss_legendre(nodes);
    let s_nodes: Vec<f64> = gx.iter().map(|z| 0.5 * t * (z + 1.0)).collect();
    let mut ends = s_nodes.clone();
    ends.push(t);
    let panel = gauss_legendre(16);

    // Weights keyed by the integer |m|^2.
    let modes: Vec<i64> = (0..n).map(|m| grid.mode(m)).collect();
    let dk2 = grid.dk() * grid.dk();
    let mut weights: HashMap<i64, Vec<f64>> = HashMap::new();
    let mask = grid.dealias_mask();
    for m2 in 0..n {
        for m1 in 0..n {
            if !(mask[m1] && mask[m2]) {
                continue;
            }
            let key = modes[m1] * modes[m1] + modes[m2] * modes[m2];
            weights
                .entry(key)
                .or_insert_with(|| duhamel_weights(key as f64 * dk2, &s_nodes, &ends, &panel));
        }
    }

    let nq = nodes;
    let free: Vec<Spectrum> = ends.iter().map(|&s| heat(s)).collect();
    let mut iterate: Vec<Spectrum> = free[..nq].to_vec();
    let mut distances = Vec::new();
    let mut result = free[nq].clone();
    for it in 0..iterations {
        // Nonlinearity div(u v) at each node, dealiased.
        let nonlin: Vec<Spectrum> = iterate
            .iter()
            .map(|s| {
                let v = s.to_field();
                let u = filtered_velocity_of(s, MomentSet::default(), fp).velocity;
                let mut fx = Accum::zeros(grid);
                let mut fy = Accum::zeros(grid);
                fx.values = u.x.values().iter().zip(v.values()).map(|(a, b)| a * b).collect();
                fy.values = u.y.values().iter().zip(v.values()).map(|(a, b)| a * b).collect();
                let sx = fx.into_spectrum(grid, Frame::Physical, true);
                let sy = fy.into_spectrum(grid, Frame::Physical, true);
                let mut d = sx.derivative(0);
                d.add_scaled(1.0, &sy.derivative(1));
                d
            })
            .collect();
        let mut next: Vec<Spectrum> = free.clone();
        for m2 in 0..n {
            for m1 in 0..n {
                if !(mask[m1] && mask[m2]) {
                    continue;
                }
                let idx = m2 * n + m1;
                let key = modes[m1] * modes[m1] + modes[m2] * modes[m2];
                let w = &weights[&key];
                for (qi, target) in next.iter_mut().enumerate() {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for r in 0..nq {
                        acc += nonlin[r].coeffs()[idx] * w[qi * nq + r];
                    }
                    target.coeffs_mut()[idx] -= acc;
                }
            }
        }
        let dist = next[..nq]
            .iter()
            .zip(&iterate)
            .map(|(a, b)| {
                a.coeffs()
                    .iter()
                    .zip(b.coeffs())
                    .map(|(x, y)| (x - y).norm_sqr())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
            .sqrt()
            * grid.spacing()
            / n as f64;
        distances.push(dist);
        result = next.pop().expect("end value");
        iterate = next;
        if it >= 2 && dist > distances[it - 1] && dist > 1e-13 {
            return Err(Error::PicardDiverged { distances });
        }
        if dist < 1e-15 {
            break;
        }
    }
    Ok((result.to_field(), distances))
}
