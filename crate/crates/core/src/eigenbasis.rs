//! Closed-form special fields: the Gaussian eigenfunction `G`, its derivatives
//! `F_i`, their un-filtered counterparts `Gamma` and `Lambda_i`, the induced
//! velocities, the Oseen vortex, and the projection onto the leading modes.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::norms::moments;
use crate::spectral::{Frame, Grid, ScalarField, Spectrum, VectorField};

const INV_4PI: f64 = 1.0 / (4.0 * PI);

/// Coefficients of the leading-mode part of a field,
/// `f = a G + c1 F_1 + c2 F_2 + g`.
///
/// `c_i` are expansion coefficients, not first moments: since
/// `int xi_i F_j = -delta_ij`, the moment `b_i = int xi_i f` equals `-c_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenCoefficients {
    pub a: f64,
    pub c1: f64,
    pub c2: f64,
    /// Weight exponent of the space the projection is taken in (2 or 3).
    pub m: u32,
}

/// `G(xi) = e^{-|xi|^2/4} / (4 pi)` at a point.
#[inline]
pub fn g_at(x: f64, y: f64) -> f64 {
    INV_4PI * (-(x * x + y * y) / 4.0).exp()
}

/// `Delta G = (|xi|^2/4 - 1) G`.
#[inline]
pub fn lap_g_at(x: f64, y: f64) -> f64 {
    ((x * x + y * y) / 4.0 - 1.0) * g_at(x, y)
}

/// `F_i = d_i G = -(xi_i / 2) G`, with `i` in `{1, 2}`.
#[inline]
pub fn f_at(i: usize, x: f64, y: f64) -> f64 {
    let xi = if i == 1 { x } else { y };
    -0.5 * xi * g_at(x, y)
}

/// `Delta F_i = (|xi|^2/4 - 2) F_i`.
#[inline]
pub fn lap_f_at(i: usize, x: f64, y: f64) -> f64 {
    ((x * x + y * y) / 4.0 - 2.0) * f_at(i, x, y)
}

/// Second derivative `d_i d_j G = (xi_i xi_j / 4 - delta_ij / 2) G`.
#[inline]
pub fn hess_g_at(i: usize, j: usize, x: f64, y: f64) -> f64 {
    let (xi, xj) = (coord(i, x, y), coord(j, x, y));
    let d = if i == j { 0.5 } else { 0.0 };
    (xi * xj / 4.0 - d) * g_at(x, y)
}

/// `d_i d_j Delta G = ((delta_ij / 2)(2 - s/4) - (xi_i xi_j / 4)(3 - s/4)) G`, `s = |xi|^2`.
#[inline]
pub fn hess_lap_g_at(i: usize, j: usize, x: f64, y: f64) -> f64 {
    let s = x * x + y * y;
    let (xi, xj) = (coord(i, x, y), coord(j, x, y));
    let d = if i == j { 0.5 } else { 0.0 };
    (d * (2.0 - s / 4.0) - xi * xj / 4.0 * (3.0 - s / 4.0)) * g_at(x, y)
}

#[inline]
fn coord(i: usize, x: f64, y: f64) -> f64 {
    if i == 1 {
        x
    } else {
        y
    }
}

/// Radial profile `phi(s) = (1 - e^{-s/4}) / (2 pi s)` of `v^G` and its
/// derivative in `s = |xi|^2`.
fn vg_profile(s: f64) -> (f64, f64) {
    let c = 1.0 / (2.0 * PI);
    if s < 1e-3 {
        let p = 0.25 * (1.0 - s / 8.0 + s * s / 96.0 - s * s * s / 1536.0);
        let dp = 0.25 * (-1.0 / 8.0 + s / 48.0 - s * s / 512.0);
        (c * p, c * dp)
    } else {
        let one_minus = -(-s / 4.0).exp_m1();
        let p = one_minus / s;
        let dp = (-s / 4.0).exp() / (4.0 * s) - one_minus / (s * s);
        (c * p, c * dp)
    }
}

/// `v^G(xi) = phi(|xi|^2) (-xi_2, xi_1)`.
#[inline]
pub fn vg_at(x: f64, y: f64) -> (f64, f64) {
    let (p, _) = vg_profile(x * x + y * y);
    (-p * y, p * x)
}

/// `v^{F_i} = d_i v^G`, the velocity induced by `F_i`.
#[inline]
pub fn vf_at(i: usize, x: f64, y: f64) -> (f64, f64) {
    let (p, dp) = vg_profile(x * x + y * y);
    if i == 1 {
        (-2.0 * x * y * dp, p + 2.0 * x * x * dp)
    } else {
        (-p - 2.0 * y * y * dp, 2.0 * x * y * dp)
    }
}

fn check_index(i: usize) -> Result<()> {
    if i == 1 || i == 2 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "i",
            reason: format!("component index must be 1 or 2, got {i}"),
        })
    }
}

fn filter_coefficient(tau: f64, alpha: f64) -> Result<f64> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "tau",
            reason: format!("must be >= 0, got {tau}"),
        });
    }
    if !(alpha >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "alpha",
            reason: format!("must be >= 0, got {alpha}"),
        });
    }
    Ok(alpha * alpha * (-tau).exp())
}

pub fn gaussian_g(grid: Grid) -> ScalarField {
    ScalarField::from_fn(grid, Frame::Scaled, g_at)
}

pub fn hermite_f(grid: Grid, i: usize) -> Result<ScalarField> {
    check_index(i)?;
    Ok(ScalarField::from_fn(grid, Frame::Scaled, |x, y| f_at(i, x, y)))
}

/// `Gamma(xi, tau) = G - alpha^2 e^{-tau} Delta G`.
pub fn gamma_field(grid: Grid, tau: f64, alpha: f64) -> Result<ScalarField> {
    let c = filter_coefficient(tau, alpha)?;
    Ok(ScalarField::from_fn(grid, Frame::Scaled, |x, y| {
        g_at(x, y) - c * lap_g_at(x, y)
    }))
}

/// `Lambda_i(xi, tau) = F_i - alpha^2 e^{-tau} Delta F_i`.
pub fn lambda_field(grid: Grid, i: usize, tau: f64, alpha: f64) -> Result<ScalarField> {
    check_index(i)?;
    let c = filter_coefficient(tau, alpha)?;
    Ok(ScalarField::from_fn(grid, Frame::Scaled, |x, y| {
        f_at(i, x, y) - c * lap_f_at(i, x, y)
    }))
}

fn vector_from_fn(grid: Grid, frame: Frame, f: impl Fn(f64, f64) -> (f64, f64)) -> VectorField {
    let pts = grid.points();
    let mut ux = Vec::with_capacity(grid.len());
    let mut uy = Vec::with_capacity(grid.len());
    for &y in &pts {
        for &x in &pts {
            let (a, b) = f(x, y);
            ux.push(a);
            uy.push(b);
        }
    }
    VectorField {
        x: ScalarField::from_values(grid, frame, ux).expect("sized"),
        y: ScalarField::from_values(grid, frame, uy).expect("sized"),
    }
}

pub fn velocity_vg(grid: Grid) -> VectorField {
    vector_from_fn(grid, Frame::Scaled, vg_at)
}

pub fn velocity_vf(grid: Grid, i: usize) -> Result<VectorField> {
    check_index(i)?;
    Ok(vector_from_fn(grid, Frame::Scaled, |x, y| vf_at(i, x, y)))
}

/// Oseen vortex `Omega(x, t) = e^{-|x|^2 / (4(1+t))} / (4 pi (1+t))` on a physical grid.
pub fn oseen_vortex(grid: Grid, t: f64) -> Result<ScalarField> {
    if !(t > -1.0) {
        return Err(Error::InvalidParameter {
            name: "t",
            reason: format!("Oseen vortex needs t > -1, got {t}"),
        });
    }
    let s = 1.0 + t;
    Ok(ScalarField::from_fn(grid, Frame::Physical, |x, y| {
        (-(x * x + y * y) / (4.0 * s)).exp() / (4.0 * PI * s)
    }))
}

/// Precomputed closed-form fields on one grid.
#[derive(Debug)]
pub struct EigenFields {
    pub g: ScalarField,
    pub lap_g: ScalarField,
    pub f: [ScalarField; 2],
    pub lap_f: [ScalarField; 2],
    pub vg: VectorField,
    pub vf: [VectorField; 2],
    pub g_hat: Spectrum,
    pub f_hat: [Spectrum; 2],
    /// `d_1 d_1 G`, `d_1 d_2 G`, `d_2 d_2 G`.
    pub hess_g: [ScalarField; 3],
    /// The same second derivatives of `Delta G`.
    pub hess_lap_g: [ScalarField; 3],
}

impl EigenFields {
    fn build(grid: Grid) -> Self {
        let g = gaussian_g(grid);
        let f1 = hermite_f(grid, 1).expect("valid index");
        let f2 = hermite_f(grid, 2).expect("valid index");
        let lap_g = ScalarField::from_fn(grid, Frame::Scaled, lap_g_at);
        let lap_f1 = ScalarField::from_fn(grid, Frame::Scaled, |x, y| lap_f_at(1, x, y));
        let lap_f2 = ScalarField::from_fn(grid, Frame::Scaled, |x, y| lap_f_at(2, x, y));
        let g_hat = g.spectrum();
        let f_hat = [f1.spectrum(), f2.spectrum()];
        let pairs = [(1, 1), (1, 2), (2, 2)];
        let hess_g = pairs.map(|(i, j)| {
            ScalarField::from_fn(grid, Frame::Scaled, move |x, y| hess_g_at(i, j, x, y))
        });
        let hess_lap_g = pairs.map(|(i, j)| {
            ScalarField::from_fn(grid, Frame::Scaled, move |x, y| hess_lap_g_at(i, j, x, y))
        });
        Self {
            hess_g,
            hess_lap_g,
            vg: velocity_vg(grid),
            vf: [
                velocity_vf(grid, 1).expect("valid index"),
                velocity_vf(grid, 2).expect("valid index"),
            ],
            g,
            lap_g,
            f: [f1, f2],
            lap_f: [lap_f1, lap_f2],
            g_hat,
            f_hat,
        }
    }

    /// `Gamma(tau)` assembled from the cached pieces.
    pub fn gamma(&self, coefficient: f64) -> ScalarField {
        self.g.axpy(-coefficient, &self.lap_g).expect("same grid")
    }

    /// `Lambda_i(tau)` assembled from the cached pieces, `i` in `{1, 2}`.
    pub fn lambda(&self, i: usize, coefficient: f64) -> ScalarField {
        self.f[i - 1]
            .axpy(-coefficient, &self.lap_f[i - 1])
            .expect("same grid")
    }
}

impl EigenFields {
    fn hess_index(i: usize, j: usize) -> usize {
        match (i.min(j), i.max(j)) {
            (1, 1) => 0,
            (1, 2) => 1,
            _ => 2,
        }
    }

    /// `grad F_j - coefficient * grad Delta F_j`, i.e. `grad Lambda_j`.
    pub fn grad_lambda(&self, j: usize, coefficient: f64) -> (ScalarField, ScalarField) {
        let comp = |i: usize| {
            let k = Self::hess_index(i, j);
            self.hess_g[k]
                .axpy(-coefficient, &self.hess_lap_g[k])
                .expect("same grid")
        };
        (comp(1), comp(2))
    }

    /// `grad Gamma = (Lambda_1, Lambda_2)`.
    pub fn grad_gamma(&self, coefficient: f64) -> (ScalarField, ScalarField) {
        (self.lambda(1, coefficient), self.lambda(2, coefficient))
    }
}

/// Shared closed-form fields for `grid`, built on first use.
pub fn eigen_fields(grid: Grid) -> Arc<EigenFields> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, u64), Arc<EigenFields>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (grid.n(), grid.half_width().to_bits());
    if let Some(hit) = cache.lock().expect("eigen cache poisoned").get(&key) {
        return hit.clone();
    }
    let built = Arc::new(EigenFields::build(grid));
    cache
        .lock()
        .expect("eigen cache poisoned")
        .entry(key)
        .or_insert(built)
        .clone()
}

/// Splits `f` into its leading modes and a remainder with vanishing mass
/// (and, for `m = 3`, vanishing first moments).
pub fn project(f: &ScalarField, m: u32) -> Result<(EigenCoefficients, ScalarField)> {
    if m != 2 && m != 3 {
        return Err(Error::InvalidParameter {
            name: "m",
            reason: format!("projection is defined for m = 2 or 3, got {m}"),
        });
    }
    let ef = eigen_fields(f.grid());
    let mom = moments(f);
    let f = f.clone().with_frame(Frame::Scaled);
    let mut g = f.axpy(-mom.a, &ef.g)?;
    let (c1, c2) = if m == 3 {
        let (c1, c2) = (-mom.b1, -mom.b2);
        g = g.axpy(-c1, &ef.f[0])?.axpy(-c2, &ef.f[1])?;
        (c1, c2)
    } else {
        (0.0, 0.0)
    };
    Ok((
        EigenCoefficients { a: mom.a, c1, c2, m },
        g,
    ))
}
