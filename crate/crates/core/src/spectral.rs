//! Uniform periodic collocation grid and the Fourier machinery built on it.
//!
//! The plane is truncated to the periodic box `[-H, H)^2` sampled at `n` points
//! per axis. Field values are stored row-major with `x2` as the outer index, so
//! `values[i2 * n + i1]` is the sample at `(x_{i1}, x_{i2})`.
//!
//! Spectral coefficients follow the plain DFT convention on the sample index,
//! `c_m = sum_j f_j exp(-2 pi i m j / n)`. Derivatives only need the signed
//! wavenumber `k_m = m pi / H`; anything that evaluates a transform away from
//! the grid accounts for the `x_0 = -H` offset explicitly.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Coordinate frame a field is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Frame {
    /// Original variables `(x, t)`.
    Physical,
    /// Self-similar variables `(xi, tau)`.
    Scaled,
}

impl Frame {
    pub fn as_u8(self) -> u8 {
        match self {
            Frame::Physical => 0,
            Frame::Scaled => 1,
        }
    }

    pub fn from_u8(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Frame::Physical),
            1 => Some(Frame::Scaled),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Frame::Physical => "physical",
            Frame::Scaled => "scaled",
        }
    }
}

/// Uniform periodic grid on `[-H, H)^2` with `n` points per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n: usize,
    half_width: f64,
}

impl Grid {
    /// Builds a grid; `n` must be a power of two no smaller than 16.
    pub fn new(n: usize, half_width: f64) -> Result<Self> {
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n_points = {n} is not a power of two >= 16"
            )));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "half_width = {half_width} must be positive"
            )));
        }
        Ok(Self { n, half_width })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    /// Number of samples, `n^2`.
    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Collocation coordinate `x_j = -H + j h`.
    #[inline]
    pub fn point(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.spacing()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.point(j)).collect()
    }

    /// Signed integer mode for storage index `m`; the Nyquist index maps to `-n/2`.
    #[inline]
    pub fn mode(&self, m: usize) -> i64 {
        if m < self.n / 2 {
            m as i64
        } else {
            m as i64 - self.n as i64
        }
    }

    #[inline]
    pub fn nyquist_index(&self) -> usize {
        self.n / 2
    }

    /// Fundamental wavenumber `pi / H`.
    #[inline]
    pub fn dk(&self) -> f64 {
        PI / self.half_width
    }

    /// Signed wavenumber for storage index `m`.
    #[inline]
    pub fn wavenumber(&self, m: usize) -> f64 {
        self.mode(m) as f64 * self.dk()
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.n).map(|m| self.wavenumber(m)).collect()
    }

    /// Wavenumbers used for first derivatives: the Nyquist entry is zero so the
    /// derivative of a real field stays real.
    pub fn derivative_wavenumbers(&self) -> Vec<f64> {
        let mut k = self.wavenumbers();
        k[self.nyquist_index()] = 0.0;
        k
    }

    /// Largest retained integer mode under the 2/3 rule.
    #[inline]
    pub fn dealias_mode(&self) -> i64 {
        (self.n / 3) as i64
    }

    /// Retention mask of the 2/3 rule, one entry per axis index.
    pub fn dealias_mask(&self) -> Vec<bool> {
        let cut = self.dealias_mode();
        (0..self.n).map(|m| self.mode(m).abs() <= cut).collect()
    }

    /// `|k|^2` for every storage index pair.
    pub fn k_squared(&self) -> Vec<f64> {
        let k = self.wavenumbers();
        let mut out = Vec::with_capacity(self.len());
        for &k2 in &k {
            for &k1 in &k {
                out.push(k1 * k1 + k2 * k2);
            }
        }
        out
    }
}

/// Scalar field sampled on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    frame: Frame,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid, frame: Frame) -> Self {
        Self {
            grid,
            frame,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_values(grid: Grid, frame: Frame, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter {
                name: "values",
                reason: format!("expected {} samples, got {}", grid.len(), values.len()),
            });
        }
        Ok(Self {
            grid,
            frame,
            values,
        })
    }

    /// Samples `f(x1, x2)` at every collocation point.
    pub fn from_fn(grid: Grid, frame: Frame, f: impl Fn(f64, f64) -> f64) -> Self {
        let pts = grid.points();
        let mut values = Vec::with_capacity(grid.len());
        for &x2 in &pts {
            for &x1 in &pts {
                values.push(f(x1, x2));
            }
        }
        Self {
            grid,
            frame,
            values,
        }
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    #[inline]
    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn with_frame(mut self, frame: Frame) -> Self {
        self.frame = frame;
        self
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i1: usize, i2: usize) -> f64 {
        self.values[i2 * self.grid.n + i1]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    fn check_compatible(&self, other: &ScalarField) -> Result<()> {
        if self.grid != other.grid || self.frame != other.frame {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &ScalarField) -> Result<ScalarField> {
        self.check_compatible(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + s * b)
            .collect();
        Ok(Self {
            grid: self.grid,
            frame: self.frame,
            values,
        })
    }

    pub fn sub(&self, other: &ScalarField) -> Result<ScalarField> {
        self.axpy(-1.0, other)
    }

    pub fn add(&self, other: &ScalarField) -> Result<ScalarField> {
        self.axpy(1.0, other)
    }

    pub fn scale(&self, s: f64) -> ScalarField {
        self.map(|v| s * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        Self {
            grid: self.grid,
            frame: self.frame,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise product.
    pub fn mul(&self, other: &ScalarField) -> Result<ScalarField> {
        self.check_compatible(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .collect();
        Ok(Self {
            grid: self.grid,
            frame: self.frame,
            values,
        })
    }

    /// Pointwise product with a function of position.
    pub fn mul_fn(&self, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        let pts = self.grid.points();
        let n = self.grid.n;
        let mut values = self.values.clone();
        for (i2, &x2) in pts.iter().enumerate() {
            for (i1, &x1) in pts.iter().enumerate() {
                values[i2 * n + i1] *= f(x1, x2);
            }
        }
        Self {
            grid: self.grid,
            frame: self.frame,
            values,
        }
    }

    pub fn spectrum(&self) -> Spectrum {
        let mut coeffs: Vec<Complex64> =
            self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft_for(self.grid.n).forward(&mut coeffs);
        Spectrum {
            grid: self.grid,
            frame: self.frame,
            coeffs,
        }
    }
}

/// Velocity-type field with two components on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub x: ScalarField,
    pub y: ScalarField,
}

impl VectorField {
    pub fn new(x: ScalarField, y: ScalarField) -> Result<Self> {
        x.check_compatible(&y)?;
        Ok(Self { x, y })
    }

    pub fn zeros(grid: Grid, frame: Frame) -> Self {
        Self {
            x: ScalarField::zeros(grid, frame),
            y: ScalarField::zeros(grid, frame),
        }
    }

    pub fn grid(&self) -> Grid {
        self.x.grid()
    }

    pub fn frame(&self) -> Frame {
        self.x.frame()
    }

    pub fn scale(&self, s: f64) -> VectorField {
        Self {
            x: self.x.scale(s),
            y: self.y.scale(s),
        }
    }

    pub fn axpy(&self, s: f64, other: &VectorField) -> Result<VectorField> {
        Ok(Self {
            x: self.x.axpy(s, &other.x)?,
            y: self.y.axpy(s, &other.y)?,
        })
    }

    /// Pointwise `|u|` maximum.
    pub fn max_norm(&self) -> f64 {
        self.x
            .values()
            .iter()
            .zip(self.y.values())
            .fold(0.0, |m, (a, b)| m.max(a.hypot(*b)))
    }

    /// Pointwise `u . grad f` for a precomputed gradient.
    pub fn dot(&self, other: &VectorField) -> Result<ScalarField> {
        let a = self.x.mul(&other.x)?;
        let b = self.y.mul(&other.y)?;
        a.add(&b)
    }
}

/// Spectral coefficients of a real field (DFT convention on the sample index).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: Grid,
    frame: Frame,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn zeros(grid: Grid, frame: Frame) -> Self {
        Self {
            grid,
            frame,
            coeffs: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_coeffs(grid: Grid, frame: Frame, coeffs: Vec<Complex64>) -> Self {
        assert_eq!(coeffs.len(), grid.len());
        Self {
            grid,
            frame,
            coeffs,
        }
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    #[inline]
    pub fn frame(&self) -> Frame {
        self.frame
    }

    #[inline]
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    #[inline]
    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Real part of the inverse transform.
    pub fn to_field(&self) -> ScalarField {
        let mut data = self.coeffs.clone();
        fft_for(self.grid.n).inverse(&mut data);
        ScalarField {
            grid: self.grid,
            frame: self.frame,
            values: data.into_iter().map(|c| c.re).collect(),
        }
    }

    /// Multiplies each coefficient by `mult(k1, k2)`.
    pub fn apply(&self, mult: impl Fn(f64, f64) -> Complex64) -> Spectrum {
        let k = self.grid.wavenumbers();
        let n = self.grid.n;
        let mut coeffs = self.coeffs.clone();
        for (m2, &k2) in k.iter().enumerate() {
            for (m1, &k1) in k.iter().enumerate() {
                coeffs[m2 * n + m1] *= mult(k1, k2);
            }
        }
        Self {
            grid: self.grid,
            frame: self.frame,
            coeffs,
        }
    }

    /// Multiplies by a real radial symbol `mult(|k|^2)`.
    pub fn apply_radial(&self, mult: impl Fn(f64) -> f64) -> Spectrum {
        self.apply(|k1, k2| Complex64::new(mult(k1 * k1 + k2 * k2), 0.0))
    }

    /// Spectral partial derivative along `axis` (0 for `x1`, 1 for `x2`).
    pub fn derivative(&self, axis: usize) -> Spectrum {
        let k = self.grid.derivative_wavenumbers();
        let n = self.grid.n;
        let mut coeffs = self.coeffs.clone();
        for m2 in 0..n {
            for m1 in 0..n {
                let kk = if axis == 0 { k[m1] } else { k[m2] };
                coeffs[m2 * n + m1] *= Complex64::new(0.0, kk);
            }
        }
        Self {
            grid: self.grid,
            frame: self.frame,
            coeffs,
        }
    }

    pub fn add_scaled(&mut self, s: f64, other: &Spectrum) {
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b * s;
        }
    }

    pub fn scale(&self, s: f64) -> Spectrum {
        Self {
            grid: self.grid,
            frame: self.frame,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// Coefficient of the zero mode; `h^2` times it is the lattice integral.
    pub fn mean_mode(&self) -> Complex64 {
        self.coeffs[0]
    }

    /// Sum of `|c|^2 / n^2`, the spectral side of Parseval's identity.
    pub fn energy_sum(&self) -> f64 {
        let n2 = self.grid.len() as f64;
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() / n2
    }
}

/// Batched 2-D complex FFT of a fixed size.
pub(crate) struct Fft2 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    pub(crate) fn forward(&self, data: &mut [Complex64]) {
        self.fwd.process(data);
        transpose_square(data, self.n);
        self.fwd.process(data);
        transpose_square(data, self.n);
    }

    /// Normalized inverse (includes the `1/n^2` factor).
    pub(crate) fn inverse(&self, data: &mut [Complex64]) {
        self.inv.process(data);
        transpose_square(data, self.n);
        self.inv.process(data);
        transpose_square(data, self.n);
        let s = 1.0 / (self.n * self.n) as f64;
        for c in data.iter_mut() {
            *c *= s;
        }
    }
}

fn transpose_square(data: &mut [Complex64], n: usize) {
    const BLOCK: usize = 32;
    for ib in (0..n).step_by(BLOCK) {
        for jb in (ib..n).step_by(BLOCK) {
            for i in ib..(ib + BLOCK).min(n) {
                let j0 = if ib == jb { i + 1 } else { jb };
                for j in j0..(jb + BLOCK).min(n) {
                    data.swap(i * n + j, j * n + i);
                }
            }
        }
    }
}

pub(crate) fn fft_for(n: usize) -> Arc<Fft2> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Fft2>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| Arc::new(Fft2::new(n)))
        .clone()
}

/// Spectral gradient.
pub fn gradient(f: &ScalarField) -> VectorField {
    let s = f.spectrum();
    VectorField {
        x: s.derivative(0).to_field(),
        y: s.derivative(1).to_field(),
    }
}

/// Spectral Laplacian, symbol `-|k|^2`.
pub fn laplacian(f: &ScalarField) -> ScalarField {
    f.spectrum().apply_radial(|k2| -k2).to_field()
}

/// Spectral divergence of a vector field.
pub fn divergence(u: &VectorField) -> ScalarField {
    let mut d = u.x.spectrum().derivative(0);
    d.add_scaled(1.0, &u.y.spectrum().derivative(1));
    d.to_field()
}

/// Spectral curl `d1 u2 - d2 u1`.
pub fn curl(u: &VectorField) -> ScalarField {
    let mut c = u.y.spectrum().derivative(0);
    c.add_scaled(-1.0, &u.x.spectrum().derivative(1));
    c.to_field()
}

/// Zeroes every mode with `|m_i| > floor(n/3)` on either axis (includes Nyquist).
pub fn dealias(s: &Spectrum) -> Spectrum {
    let mut out = s.clone();
    dealias_in_place(&mut out);
    out
}

pub fn dealias_in_place(s: &mut Spectrum) {
    let n = s.grid.n;
    let mask = s.grid.dealias_mask();
    for m2 in 0..n {
        let row = &mut s.coeffs[m2 * n..(m2 + 1) * n];
        if !mask[m2] {
            row.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
            continue;
        }
        for (c, keep) in row.iter_mut().zip(&mask) {
            if !keep {
                *c = Complex64::new(0.0, 0.0);
            }
        }
    }
}

/// Lattice quadrature `h^2 * sum(values)`.
pub fn integrate(f: &ScalarField) -> f64 {
    let h = f.grid.spacing();
    h * h * f.values.iter().sum::<f64>()
}

/// Largest magnitude on the outermost ring of samples, relative to `max|f|`
/// (0 for the zero field). Quadrature and moments assume this is tiny.
pub fn boundary_tail(f: &ScalarField) -> f64 {
    let n = f.grid.n;
    let peak = f.max_abs();
    if peak == 0.0 {
        return 0.0;
    }
    let mut edge = 0.0f64;
    for j in 0..n {
        edge = edge
            .max(f.at(j, 0).abs())
            .max(f.at(0, j).abs())
            .max(f.at(j, n - 1).abs())
            .max(f.at(n - 1, j).abs());
    }
    edge / peak
}

/// `out = A X A^T` for a `p x n` matrix `A` and an `n x n` matrix `X`, all
/// row-major. Used by the off-grid transforms, which factor over the axes.
pub(crate) fn separable_transform(a: &[Complex64], p: usize, n: usize, x: &[Complex64]) -> Vec<Complex64> {
    debug_assert_eq!(a.len(), p * n);
    debug_assert_eq!(x.len(), n * n);
    let zero = Complex64::new(0.0, 0.0);
    // T[r][q] = sum_s X[r][s] A[q][s]
    let mut t = vec![zero; n * p];
    for r in 0..n {
        let xr = &x[r * n..(r + 1) * n];
        let tr = &mut t[r * p..(r + 1) * p];
        for (q, tq) in tr.iter_mut().enumerate() {
            let aq = &a[q * n..(q + 1) * n];
            let mut acc = zero;
            for (xv, av) in xr.iter().zip(aq) {
                acc += xv * av;
            }
            *tq = acc;
        }
    }
    // out[p'][q] = sum_r A[p'][r] T[r][q]
    let mut out = vec![zero; p * p];
    for pp in 0..p {
        let orow = &mut out[pp * p..(pp + 1) * p];
        for r in 0..n {
            let coef = a[pp * n + r];
            let tr = &t[r * p..(r + 1) * p];
            for (o, tv) in orow.iter_mut().zip(tr) {
                *o += coef * tv;
            }
        }
    }
    out
}

/// Continuous Fourier transform `h^2 sum_j f_j exp(-i kappa . x_j)` evaluated at
/// `kappa = scale * k_m` for every storage index pair of the field's grid.
pub(crate) fn transform_at_scaled_wavenumbers(f: &ScalarField, scale: f64) -> Vec<Complex64> {
    let grid = f.grid();
    let n = grid.n();
    let h = grid.spacing();
    let pts = grid.points();
    let mut a = Vec::with_capacity(n * n);
    for m in 0..n {
        let kappa = scale * grid.wavenumber(m);
        for &x in &pts {
            a.push(Complex64::from_polar(1.0, -kappa * x));
        }
    }
    let x: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut out = separable_transform(&a, n, n, &x);
    let w = h * h;
    for c in out.iter_mut() {
        *c *= w;
    }
    out
}

/// Converts continuous-transform samples at the grid wavenumbers back to
/// point values (drops the Nyquist row and column).
pub(crate) fn field_from_continuous_transform(
    grid: Grid,
    frame: Frame,
    mut hat: Vec<Complex64>,
) -> ScalarField {
    let n = grid.n();
    let h = grid.spacing();
    let nyq = grid.nyquist_index();
    for m2 in 0..n {
        for m1 in 0..n {
            let idx = m2 * n + m1;
            if m1 == nyq || m2 == nyq {
                hat[idx] = Complex64::new(0.0, 0.0);
                continue;
            }
            // exp(i k_m x_0) = (-1)^m for x_0 = -H
            let sign = if (grid.mode(m1) + grid.mode(m2)).rem_euclid(2) == 0 {
                1.0
            } else {
                -1.0
            };
            hat[idx] *= sign / (h * h);
        }
    }
    Spectrum::from_coeffs(grid, frame, hat).to_field()
}

/// Evaluates the trigonometric interpolant of `f` at the tensor points
/// `(scale * y_a, scale * y_b)` where `y` are the collocation points of `target`.
/// Every mapped point must lie within the sampled extent `[-H, H - h]` of the
/// source grid.
pub fn evaluate_dilated(f: &ScalarField, scale: f64, target: Grid) -> Result<ScalarField> {
    let src = f.grid();
    let n = src.n();
    let hw = src.half_width();
    let limit = hw - src.spacing();
    let slack = 1e-12 * hw;
    let mapped: Vec<f64> = target.points().iter().map(|&y| scale * y).collect();
    for &p in &mapped {
        if p < -hw - slack || p > limit + slack {
            return Err(Error::OutsideBox {
                point: p,
                half_width: hw,
                limit,
            });
        }
    }
    let nyq = src.nyquist_index();
    let p = target.n();
    let mut a = Vec::with_capacity(p * n);
    for &y in &mapped {
        for m in 0..n {
            let phase = src.wavenumber(m) * (y + hw);
            if m == nyq {
                a.push(Complex64::new(phase.cos(), 0.0));
            } else {
                a.push(Complex64::from_polar(1.0, phase));
            }
        }
    }
    let spec = f.spectrum();
    let out = separable_transform(&a, p, n, spec.coeffs());
    let norm = 1.0 / (n * n) as f64;
    let values = out.into_iter().map(|c| c.re * norm).collect();
    ScalarField::from_values(target, f.frame(), values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(grid: Grid) -> ScalarField {
        ScalarField::from_fn(grid, Frame::Scaled, |x, y| {
            (-(x * x + y * y) / 4.0).exp() / (4.0 * PI)
        })
    }

    #[test]
    fn grid_examples() {
        let g = Grid::new(16, 8.0).unwrap();
        assert_eq!(g.spacing(), 1.0);
        let pts = g.points();
        assert_eq!(pts[0], -8.0);
        assert_eq!(pts[15], 7.0);
        assert_eq!(Grid::new(256, 12.0).unwrap().spacing(), 0.09375);
        assert!(Grid::new(100, 8.0).is_err());
        assert!(Grid::new(8, 8.0).is_err());
        assert!(Grid::new(64, 0.0).is_err());
        assert!(Grid::new(64, -1.0).is_err());
    }

    #[test]
    fn spacing_times_points_is_box_width() {
        for &(n, h) in &[(16, 8.0), (64, 3.3), (256, 12.0), (512, 48.0)] {
            let g = Grid::new(n, h).unwrap();
            assert_eq!(g.spacing() * n as f64, 2.0 * h);
        }
    }

    #[test]
    fn nyquist_is_counted_once() {
        let g = Grid::new(16, 8.0).unwrap();
        let modes: Vec<i64> = (0..16).map(|m| g.mode(m)).collect();
        assert_eq!(modes.iter().filter(|&&m| m.abs() == 8).count(), 1);
        assert_eq!(g.mode(8), -8);
        assert_eq!(g.derivative_wavenumbers()[8], 0.0);
    }

    #[test]
    fn gradient_of_constant_and_sine() {
        let g = Grid::new(32, 4.0).unwrap();
        let c = ScalarField::from_fn(g, Frame::Physical, |_, _| 3.5);
        let grad = gradient(&c);
        assert!(grad.x.max_abs() < 1e-13 && grad.y.max_abs() < 1e-13);

        let k1 = 3.0 * g.dk();
        let f = ScalarField::from_fn(g, Frame::Physical, |x, _| (k1 * x).sin());
        let grad = gradient(&f);
        let expect = ScalarField::from_fn(g, Frame::Physical, |x, _| k1 * (k1 * x).cos());
        assert!(grad.x.sub(&expect).unwrap().max_abs() < 1e-12);
        assert!(grad.y.max_abs() < 1e-12);
    }

    #[test]
    fn gradient_and_laplacian_of_gaussian() {
        let g = Grid::new(256, 12.0).unwrap();
        let gg = gaussian(g);
        let grad = gradient(&gg);
        let ex = gg.mul_fn(|x, _| -x / 2.0);
        let ey = gg.mul_fn(|_, y| -y / 2.0);
        assert!(grad.x.sub(&ex).unwrap().max_abs() < 1e-8);
        assert!(grad.y.sub(&ey).unwrap().max_abs() < 1e-8);
        let lap = laplacian(&gg);
        let el = gg.mul_fn(|x, y| (x * x + y * y) / 4.0 - 1.0);
        assert!(lap.sub(&el).unwrap().max_abs() < 1e-8);
    }

    #[test]
    fn laplacian_of_single_mode() {
        let g = Grid::new(32, PI).unwrap();
        // |k|^2 = 4 with k = (2, 0) on a box of width 2 pi
        let f = ScalarField::from_fn(g, Frame::Physical, |x, _| (2.0 * x).cos());
        let lap = laplacian(&f);
        assert!(lap.axpy(4.0, &f).unwrap().max_abs() < 1e-12);
        let c = ScalarField::from_fn(g, Frame::Physical, |_, _| 1.0);
        assert!(laplacian(&c).max_abs() < 1e-13);
    }

    #[test]
    fn dealias_band_limited_and_nyquist() {
        let g = Grid::new(32, PI).unwrap();
        let f = ScalarField::from_fn(g, Frame::Physical, |x, y| (3.0 * x).sin() * (2.0 * y).cos());
        let s = f.spectrum();
        let d = dealias(&s);
        let diff = d.coeffs().iter().zip(s.coeffs()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-12);
        // Nyquist in x1: cos(16 x) on 32 points
        let nyq = ScalarField::from_fn(g, Frame::Physical, |x, _| (16.0 * x).cos());
        let d = dealias(&nyq.spectrum());
        assert!(d.coeffs().iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn dealias_is_idempotent() {
        let g = Grid::new(32, 5.0).unwrap();
        let f = ScalarField::from_fn(g, Frame::Physical, |x, y| (x * 1.7 + y).sin().powi(3) + x.cos());
        let once = dealias(&f.spectrum());
        assert_eq!(dealias(&once), once);
    }

    #[test]
    fn product_dealias_matches_direct_convolution() {
        // Brute-force oracle: full (non-periodic) convolution of the retained
        // spectra, truncated back to the 2/3 band.
        let n = 16usize;
        let g = Grid::new(n, PI).unwrap();
        let cut = g.dealias_mode();
        let a = ScalarField::from_fn(g, Frame::Physical, |x, y| (cut as f64 * x).cos() + 0.3 * (y * 2.0).sin());
        let b = ScalarField::from_fn(g, Frame::Physical, |x, y| (cut as f64 * x).sin() * (y).cos() + 0.5);
        let sa = dealias(&a.spectrum());
        let sb = dealias(&b.spectrum());
        let prod = a.mul(&b).unwrap();
        let sp = dealias(&prod.spectrum());

        let nn = n as i64;
        let idx = |m1: i64, m2: i64| -> usize {
            (m2.rem_euclid(nn) as usize) * n + m1.rem_euclid(nn) as usize
        };
        for m2 in -cut..=cut {
            for m1 in -cut..=cut {
                let mut acc = Complex64::new(0.0, 0.0);
                for p2 in -cut..=cut {
                    for p1 in -cut..=cut {
                        let (q1, q2) = (m1 - p1, m2 - p2);
                        if q1.abs() > cut || q2.abs() > cut {
                            continue;
                        }
                        acc += sa.coeffs()[idx(p1, p2)] * sb.coeffs()[idx(q1, q2)];
                    }
                }
                acc /= (n * n) as f64;
                let got = sp.coeffs()[idx(m1, m2)];
                assert!((got - acc).norm() < 1e-12, "mode ({m1},{m2}): {got} vs {acc}");
            }
        }
    }

    #[test]
    fn integrate_examples() {
        let g = Grid::new(256, 12.0).unwrap();
        let gg = gaussian(g);
        assert!((integrate(&gg) - 1.0).abs() < 1e-10);
        assert_eq!(integrate(&ScalarField::zeros(g, Frame::Scaled)), 0.0);
        let d1 = gradient(&gg).x;
        assert!(integrate(&d1).abs() < 1e-10);
        assert!(boundary_tail(&gg) < 1e-12);
    }

    #[test]
    fn dilated_evaluation_identity_and_rejection() {
        let g = Grid::new(64, 8.0).unwrap();
        let f = ScalarField::from_fn(g, Frame::Scaled, |x, y| (-(x * x + 0.5 * y * y)).exp());
        let same = evaluate_dilated(&f, 1.0, g).unwrap();
        assert!(same.sub(&f).unwrap().max_abs() < 1e-13);
        let half = evaluate_dilated(&f, 0.5, g).unwrap();
        let expect = ScalarField::from_fn(g, Frame::Scaled, |x, y| {
            (-(0.25 * x * x + 0.125 * y * y)).exp()
        });
        assert!(half.sub(&expect).unwrap().max_abs() < 1e-10);
        assert!(matches!(
            evaluate_dilated(&f, 1.5, g),
            Err(Error::OutsideBox { .. })
        ));
    }

    #[test]
    fn continuous_transform_at_grid_wavenumbers_roundtrips() {
        let g = Grid::new(64, 8.0).unwrap();
        let f = ScalarField::from_fn(g, Frame::Scaled, |x, y| ((x - 0.5).powi(2) * -0.7 - y * y * 0.4).exp());
        let hat = transform_at_scaled_wavenumbers(&f, 1.0);
        let back = field_from_continuous_transform(g, Frame::Scaled, hat);
        assert!(back.sub(&f).unwrap().max_abs() < 1e-12);
    }
}
