//! Deterministic test data: localized initial vorticities and random fields.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::eigenbasis::project;
use crate::error::Result;
use crate::norms::{weighted_norm, WeightExponent};
use crate::spectral::{Frame, Grid, ScalarField};

/// Seeded generator used throughout the crate.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Two off-center Gaussian blobs, so mass, first moments and higher moments
/// are all nonzero. Normalized to `||w||_m = target`.
pub fn two_blob(grid: Grid, frame: Frame, spread: f64, m: WeightExponent, target: f64) -> ScalarField {
    let s1 = spread;
    let s2 = 0.7 * spread;
    let raw = ScalarField::from_fn(grid, frame, |x, y| {
        let g1 = (-((x - 0.5).powi(2) + (y - 0.2).powi(2)) / (2.0 * s1 * s1)).exp();
        let g2 = (-((x + 0.8).powi(2) + (y - 0.6).powi(2)) / (2.0 * s2 * s2)).exp();
        g1 + 0.6 * g2
    });
    let norm = weighted_norm(&raw, m);
    raw.scale(target / norm)
}

/// Sum of a few Gaussians with centers in the disc of radius 1.5, widths in
/// `[0.35, 0.9]` and amplitudes in `[-1, 1]`.
pub fn random_localized(grid: Grid, rng: &mut impl Rng) -> ScalarField {
    let bumps = rng.gen_range(2..=4);
    let params: Vec<(f64, f64, f64, f64)> = (0..bumps)
        .map(|_| {
            let r = 1.5 * rng.gen::<f64>().sqrt();
            let th = rng.gen_range(0.0..std::f64::consts::TAU);
            let width = rng.gen_range(0.35..0.9);
            let amp = rng.gen_range(-1.0..1.0);
            (r * th.cos(), r * th.sin(), width, amp)
        })
        .collect();
    ScalarField::from_fn(grid, Frame::Scaled, |x, y| {
        params
            .iter()
            .map(|&(cx, cy, s, a)| a * (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * s * s)).exp())
            .sum()
    })
}

/// Random localized field with the leading modes removed (zero mass, and for
/// `m = 3` zero first moments), scaled to `||f||_m = norm`.
pub fn random_in_x2(grid: Grid, m: u32, norm: f64, rng: &mut impl Rng) -> Result<ScalarField> {
    let raw = random_localized(grid, rng);
    let (_, g) = project(&raw, m)?;
    let nm = weighted_norm(&g, WeightExponent::new(m as f64)?);
    Ok(g.scale(norm / nm))
}
