//! Weighted and Lebesgue norms, low-order moments, and the map between the
//! physical and self-similar frames.

use crate::error::{Error, Result};
use crate::spectral::{evaluate_dilated, integrate, Frame, Grid, ScalarField};

/// Exponent `m` of the polynomial weight `b(xi)^{2m}`, `b = (1 + |xi|^2)^{1/2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightExponent(f64);

impl WeightExponent {
    pub fn new(m: f64) -> Result<Self> {
        if !(m >= 0.0) || !m.is_finite() {
            return Err(Error::InvalidParameter {
                name: "m",
                reason: format!("weight exponent must be a finite m >= 0, got {m}"),
            });
        }
        Ok(Self(m))
    }

    pub const ZERO: WeightExponent = WeightExponent(0.0);
    pub const TWO: WeightExponent = WeightExponent(2.0);
    pub const THREE: WeightExponent = WeightExponent(3.0);

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Mass and first moments of a field.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MomentSet {
    pub a: f64,
    pub b1: f64,
    pub b2: f64,
}

impl MomentSet {
    pub fn new(a: f64, b1: f64, b2: f64) -> Self {
        Self { a, b1, b2 }
    }

    pub fn max_abs(&self) -> f64 {
        self.a.abs().max(self.b1.abs()).max(self.b2.abs())
    }
}

/// The weight `b^{2m}` sampled on the grid.
pub fn weight(grid: Grid, m: WeightExponent) -> ScalarField {
    let m = m.value();
    ScalarField::from_fn(grid, Frame::Scaled, |x, y| (1.0 + x * x + y * y).powf(m))
}

/// `||f||_m = (int b^{2m} f^2)^{1/2}` by lattice quadrature.
pub fn weighted_norm(f: &ScalarField, m: WeightExponent) -> f64 {
    let grid = f.grid();
    let h = grid.spacing();
    let pts = grid.points();
    let n = grid.n();
    let mm = m.value();
    let vals = f.values();
    let mut acc = 0.0;
    for (i2, &y) in pts.iter().enumerate() {
        for (i1, &x) in pts.iter().enumerate() {
            let v = vals[i2 * n + i1];
            if v != 0.0 {
                let w = if mm == 0.0 {
                    1.0
                } else {
                    (1.0 + x * x + y * y).powf(mm)
                };
                acc += w * v * v;
            }
        }
    }
    (h * h * acc).sqrt()
}

/// Lattice `L^p` norm; `p = f64::INFINITY` gives the maximum norm.
pub fn lp_norm(f: &ScalarField, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter {
            name: "p",
            reason: format!("L^p norm needs p >= 1, got {p}"),
        });
    }
    if p.is_infinite() {
        return Ok(f.max_abs());
    }
    let h = f.grid().spacing();
    let sum: f64 = if p == 1.0 {
        f.values().iter().map(|v| v.abs()).sum()
    } else if p == 2.0 {
        f.values().iter().map(|v| v * v).sum()
    } else {
        f.values().iter().map(|v| v.abs().powf(p)).sum()
    };
    Ok((h * h * sum).powf(1.0 / p))
}

/// Mass `a = int f` and first moments `b_i = int xi_i f`.
pub fn moments(f: &ScalarField) -> MomentSet {
    let grid = f.grid();
    let h = grid.spacing();
    let pts = grid.points();
    let n = grid.n();
    let vals = f.values();
    let (mut a, mut b1, mut b2) = (0.0, 0.0, 0.0);
    for (i2, &y) in pts.iter().enumerate() {
        let row = &vals[i2 * n..(i2 + 1) * n];
        let mut ra = 0.0;
        let mut rb1 = 0.0;
        for (&x, &v) in pts.iter().zip(row) {
            ra += v;
            rb1 += x * v;
        }
        a += ra;
        b1 += rb1;
        b2 += y * ra;
    }
    let w = h * h;
    MomentSet::new(w * a, w * b1, w * b2)
}

/// Scaled time `tau = ln(1 + t)`.
pub fn scaled_time(t: f64) -> f64 {
    t.ln_1p()
}

/// Physical time `t = e^tau - 1`.
pub fn physical_time(tau: f64) -> f64 {
    tau.exp_m1()
}

/// Maps a physical vorticity at time `t` to the scaled frame on `target`:
/// `w(xi) = (1 + t) v(sqrt(1 + t) xi)`, `tau = ln(1 + t)`.
pub fn to_scaled(v: &ScalarField, t: f64, target: Grid) -> Result<(ScalarField, f64)> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "t",
            reason: format!("physical time must be >= 0, got {t}"),
        });
    }
    let s = (1.0 + t).sqrt();
    let w = evaluate_dilated(v, s, target)?
        .scale(1.0 + t)
        .with_frame(Frame::Scaled);
    Ok((w, scaled_time(t)))
}

/// Inverse of [`to_scaled`]: `v(x) = e^{-tau} w(e^{-tau/2} x)` on `target`.
pub fn from_scaled(w: &ScalarField, tau: f64, target: Grid) -> Result<(ScalarField, f64)> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "tau",
            reason: format!("scaled time must be >= 0, got {tau}"),
        });
    }
    let v = evaluate_dilated(w, (-0.5 * tau).exp(), target)?
        .scale((-tau).exp())
        .with_frame(Frame::Physical);
    Ok((v, physical_time(tau)))
}

/// Embedding constant `(int b^{-2m})^{1/2}` on the grid, so `|f|_1 <= C ||f||_m`.
pub fn embedding_constant(grid: Grid, m: WeightExponent) -> f64 {
    let inv = weight(grid, m).map(|w| 1.0 / w);
    integrate(&inv).sqrt()
}
