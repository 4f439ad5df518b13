//! Biot-Savart inversion, the Helmholtz filter, the heat semigroup and the
//! semigroup generated by `L = Delta + xi.grad/2 + I`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::eigenbasis::eigen_fields;
use crate::error::{Error, Result};
use crate::norms::{moments, MomentSet};
use crate::spectral::{
    field_from_continuous_transform, transform_at_scaled_wavenumbers, Frame, ScalarField,
    Spectrum, VectorField,
};

pub use crate::spectral::{curl, divergence};

/// Filter strength: `u - c Delta u = v` with `c = alpha^2` (physical frame) or
/// `c = alpha^2 e^{-tau}` (scaled frame at time `tau`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterParams {
    alpha: f64,
    effective_coefficient: f64,
}

impl FilterParams {
    pub fn physical(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self {
            alpha,
            effective_coefficient: alpha * alpha,
        })
    }

    pub fn scaled(alpha: f64, tau: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(tau >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "tau",
                reason: format!("must be >= 0, got {tau}"),
            });
        }
        Ok(Self {
            alpha,
            effective_coefficient: alpha * alpha * (-tau).exp(),
        })
    }

    /// Filter with an explicit coefficient (used for the identity `c = 0`).
    pub fn with_coefficient(alpha: f64, coefficient: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(coefficient >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "effective_coefficient",
                reason: format!("must be >= 0, got {coefficient}"),
            });
        }
        Ok(Self {
            alpha,
            effective_coefficient: coefficient,
        })
    }

    #[inline]
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    #[inline]
    pub fn effective_coefficient(&self) -> f64 {
        self.effective_coefficient
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter {
            name: "alpha",
            reason: format!("must be finite and >= 0, got {alpha}"),
        });
    }
    Ok(())
}

/// Scaled time together with `a(tau) = 1 - e^{-tau}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemigroupTime {
    tau: f64,
    a_of_tau: f64,
}

impl SemigroupTime {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau >= 0.0) || !tau.is_finite() {
            return Err(Error::InvalidParameter {
                name: "tau",
                reason: format!("semigroup time must be finite and >= 0, got {tau}"),
            });
        }
        Ok(Self {
            tau,
            a_of_tau: -(-tau).exp_m1(),
        })
    }

    #[inline]
    pub fn tau(&self) -> f64 {
        self.tau
    }

    #[inline]
    pub fn a_of_tau(&self) -> f64 {
        self.a_of_tau
    }
}

/// Velocity recovered from a vorticity together with the mean that had to be
/// discarded by the periodic inversion.
#[derive(Debug, Clone, PartialEq)]
pub struct BiotSavart {
    pub velocity: VectorField,
    pub removed_mean: f64,
}

/// Applies `(ik_2, -ik_1) / |k|^2` with the zero mode dropped. Returns the
/// velocity and the mean of the input.
fn periodic_inversion(w_hat: &Spectrum) -> (VectorField, f64) {
    let grid = w_hat.grid();
    let n = grid.n();
    let k = grid.derivative_wavenumbers();
    let kk = grid.wavenumbers();
    let mut ux = w_hat.clone();
    let mut uy = w_hat.clone();
    {
        let cx = ux.coeffs_mut();
        for m2 in 0..n {
            for m1 in 0..n {
                let idx = m2 * n + m1;
                let k2 = kk[m1] * kk[m1] + kk[m2] * kk[m2];
                if idx == 0 {
                    cx[idx] = Complex64::new(0.0, 0.0);
                } else {
                    cx[idx] *= Complex64::new(0.0, k[m2] / k2);
                }
            }
        }
    }
    {
        let cy = uy.coeffs_mut();
        for m2 in 0..n {
            for m1 in 0..n {
                let idx = m2 * n + m1;
                let k2 = kk[m1] * kk[m1] + kk[m2] * kk[m2];
                if idx == 0 {
                    cy[idx] = Complex64::new(0.0, 0.0);
                } else {
                    cy[idx] *= Complex64::new(0.0, -k[m1] / k2);
                }
            }
        }
    }
    let mean = w_hat.mean_mode().re / grid.len() as f64;
    if mean.abs() > 1e-14 {
        log::debug!("periodic Biot-Savart discarded mean {mean:.3e}");
    }
    (
        VectorField {
            x: ux.to_field(),
            y: uy.to_field(),
        },
        mean,
    )
}

/// Periodic-box inversion of the curl, mean projected out.
pub fn biot_savart_periodic(w: &ScalarField) -> BiotSavart {
    let (velocity, removed_mean) = periodic_inversion(&w.spectrum());
    BiotSavart {
        velocity,
        removed_mean,
    }
}

/// Velocity from a spectrum whose field has the given mass and first moments.
///
/// Physical frame: periodic inversion. Scaled frame: the part
/// `a G + c_1 F_1 + c_2 F_2` carrying the mass and first moments is inverted
/// in closed form and only the moment-free remainder goes through the
/// periodic inversion, which avoids the image vortices of the periodic box.
pub(crate) fn velocity_from_spectrum(w_hat: &Spectrum, mom: MomentSet) -> BiotSavart {
    match w_hat.frame() {
        Frame::Physical => {
            let (velocity, removed_mean) = periodic_inversion(w_hat);
            BiotSavart {
                velocity,
                removed_mean,
            }
        }
        Frame::Scaled => {
            let ef = eigen_fields(w_hat.grid());
            let (c1, c2) = (-mom.b1, -mom.b2);
            let mut rest = w_hat.clone();
            rest.add_scaled(-mom.a, &ef.g_hat);
            rest.add_scaled(-c1, &ef.f_hat[0]);
            rest.add_scaled(-c2, &ef.f_hat[1]);
            let (periodic, removed_mean) = periodic_inversion(&rest);
            let velocity = periodic
                .axpy(mom.a, &ef.vg)
                .and_then(|v| v.axpy(c1, &ef.vf[0]))
                .and_then(|v| v.axpy(c2, &ef.vf[1]))
                .expect("same grid");
            BiotSavart {
                velocity,
                removed_mean,
            }
        }
    }
}

/// Whole-plane Biot-Savart velocity of `w`; see [`velocity_from_spectrum`].
pub fn biot_savart(w: &ScalarField) -> BiotSavart {
    let mom = match w.frame() {
        Frame::Scaled => moments(w),
        Frame::Physical => MomentSet::default(),
    };
    velocity_from_spectrum(&w.spectrum(), mom)
}

/// `1 / (1 + c |k|^2)` applied to a spectrum.
pub fn helmholtz_filter_spectrum(s: &Spectrum, fp: FilterParams) -> Spectrum {
    let c = fp.effective_coefficient();
    if c == 0.0 {
        return s.clone();
    }
    s.apply_radial(|k2| 1.0 / (1.0 + c * k2))
}

/// Solves `u - c Delta u = v` on the grid.
pub fn helmholtz_filter(v: &ScalarField, fp: FilterParams) -> ScalarField {
    if fp.effective_coefficient() == 0.0 {
        return v.clone();
    }
    helmholtz_filter_spectrum(&v.spectrum(), fp).to_field()
}

/// Componentwise [`helmholtz_filter`].
pub fn helmholtz_filter_vector(v: &VectorField, fp: FilterParams) -> VectorField {
    VectorField {
        x: helmholtz_filter(&v.x, fp),
        y: helmholtz_filter(&v.y, fp),
    }
}

/// Filtered velocity `B(H(w))`.
pub fn filtered_velocity(w: &ScalarField, fp: FilterParams) -> BiotSavart {
    let mom = match w.frame() {
        Frame::Scaled => moments(w),
        Frame::Physical => MomentSet::default(),
    };
    let filtered = helmholtz_filter_spectrum(&w.spectrum(), fp);
    velocity_from_spectrum(&filtered, mom)
}

/// Heat flow `e^{t Delta}` as the multiplier `e^{-|k|^2 t}`.
pub fn heat_semigroup(f: &ScalarField, t: f64) -> Result<ScalarField> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "t",
            reason: format!("heat flow time must be >= 0, got {t}"),
        });
    }
    if t == 0.0 {
        return Ok(f.clone());
    }
    Ok(f.spectrum().apply_radial(|k2| (-k2 * t).exp()).to_field())
}

/// Heat kernel `Phi(x, t) = e^{-|x|^2/(4t)} / (4 pi t)` sampled on `f`'s grid.
pub fn heat_kernel(grid: crate::spectral::Grid, t: f64) -> Result<ScalarField> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter {
            name: "t",
            reason: format!("heat kernel needs t > 0, got {t}"),
        });
    }
    Ok(ScalarField::from_fn(grid, Frame::Physical, |x, y| {
        (-(x * x + y * y) / (4.0 * t)).exp() / (4.0 * PI * t)
    }))
}

/// Closed form `|Phi(t)|_p = (p^{-d/2} (4 pi t)^{-(p-1)d/2})^{1/p}` in `d = 2`.
pub fn heat_kernel_lp_norm(p: f64, t: f64) -> f64 {
    let d = 2.0;
    let pp = 1.0 / (p.powf(d / 2.0) * (4.0 * PI * t).powf((p - 1.0) * d / 2.0));
    pp.powf(1.0 / p)
}

/// `e^{tau L} f`.
///
/// Uses the identity `(e^{tau L} f)^(k) = f^(k e^{-tau/2}) e^{-|k|^2 a(tau)}`,
/// where `f^` is the continuous transform of the lattice data evaluated off the
/// grid by separable sums. Equivalent to rescaling, heat flow for time
/// `e^tau - 1`, and rescaling back, but never needs the heat-flowed field to
/// fit inside the box.
pub fn semigroup_l(f: &ScalarField, st: SemigroupTime) -> ScalarField {
    if st.tau() == 0.0 {
        return f.clone();
    }
    let grid = f.grid();
    let scale = (-0.5 * st.tau()).exp();
    let a = st.a_of_tau();
    let mut hat = transform_at_scaled_wavenumbers(f, scale);
    let n = grid.n();
    let k = grid.wavenumbers();
    for m2 in 0..n {
        for m1 in 0..n {
            hat[m2 * n + m1] *= (-(k[m1] * k[m1] + k[m2] * k[m2]) * a).exp();
        }
    }
    field_from_continuous_transform(grid, f.frame(), hat)
}

/// Reference evaluation of `e^{tau L} f` by direct quadrature of the kernel
/// `e^{-|xi - eta e^{-tau/2}|^2 / (4 a)} / (4 pi a)`. Costs `O(n^4)`.
pub fn semigroup_l_direct(f: &ScalarField, st: SemigroupTime) -> ScalarField {
    if st.tau() == 0.0 {
        return f.clone();
    }
    let grid = f.grid();
    let n = grid.n();
    let h = grid.spacing();
    let pts = grid.points();
    let a = st.a_of_tau();
    let s = (-0.5 * st.tau()).exp();
    let norm = h * h / (4.0 * PI * a);
    // The kernel factors over the axes.
    let mut kern = vec![0.0; n * n];
    for (i, &xi) in pts.iter().enumerate() {
        for (j, &eta) in pts.iter().enumerate() {
            let d = xi - eta * s;
            kern[i * n + j] = (-d * d / (4.0 * a)).exp();
        }
    }
    let vals = f.values();
    let mut tmp = vec![0.0; n * n];
    for j2 in 0..n {
        for i1 in 0..n {
            let mut acc = 0.0;
            for j1 in 0..n {
                acc += kern[i1 * n + j1] * vals[j2 * n + j1];
            }
            tmp[j2 * n + i1] = acc;
        }
    }
    let mut out = vec![0.0; n * n];
    for i2 in 0..n {
        for i1 in 0..n {
            let mut acc = 0.0;
            for j2 in 0..n {
                acc += kern[i2 * n + j2] * tmp[j2 * n + i1];
            }
            out[i2 * n + i1] = norm * acc;
        }
    }
    ScalarField::from_values(grid, f.frame(), out).expect("sized")
}
