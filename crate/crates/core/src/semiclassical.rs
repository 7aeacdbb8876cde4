//! Mean-field description of the displaced-frame cavity: the amplitude
//! equation of motion, its fixed points and their linear stability.
//!
//! `alpha` in this module is the mean field `<a>` in the displaced frame. It is
//! unrelated to the frame displacement stored in [`crate::model::DisplacedParams`].

use num_complex::Complex64 as c64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::BlockadeSpec;

const NEWTON_MAX_ITER: usize = 200;
/// Fixed points closer than this (relative to `max(1, |α|)`) are merged.
pub const MERGE_DISTANCE: f64 = 1e-8;
/// Random Newton seeds drawn in the disk `|α| ≤ 2|α_ha|`.
pub const RANDOM_SEEDS: usize = 8;
const SEED: u64 = 0x5eed_f1c5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FixedPoint {
    /// Mean-field amplitude.
    pub alpha: c64,
    /// Eigenvalues of the linearization in `(δα, δα*)`.
    pub jacobian_eigs: [c64; 2],
    pub stable: bool,
    /// `|dα/dt|` at `alpha`.
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeedFailure {
    pub seed: c64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FixedPointSearch {
    /// Sorted by `|α|`.
    pub fixed_points: Vec<FixedPoint>,
    pub failures: Vec<SeedFailure>,
}

impl FixedPointSearch {
    /// Fixed point of largest amplitude, the high-amplitude branch when it exists.
    pub fn high_amplitude(&self) -> Option<&FixedPoint> {
        self.fixed_points.last()
    }

    pub fn nearest(&self, alpha: c64) -> Option<&FixedPoint> {
        self.fixed_points
            .iter()
            .min_by(|a, b| (a.alpha - alpha).norm().total_cmp(&(b.alpha - alpha).norm()))
    }
}

/// `dα/dt = −i(2U|α|²α + 2Λ̃₃|α|² + Λ̃₃*α² + Λ̃₁ + Δ̃α + 2Λ̃₂α*) − κα/2`.
///
/// With real `Λ̃₃`, `Λ̃₁ = −Λ̃₃ r` and no residual detuning or two-photon drive
/// this is `−2iU|α|²α − 2iΛ̃₃|α|² − iΛ̃₃α² + iΛ̃₃r − κα/2`.
pub fn eom_rhs(alpha: c64, s: &BlockadeSpec) -> c64 {
    let i = c64::new(0.0, 1.0);
    let n = alpha.norm_sqr();
    let bracket = 2.0 * s.u * n * alpha
        + 2.0 * s.lambda3_tilde * n
        + s.lambda3_tilde.conj() * alpha * alpha
        + s.lambda1_tilde()
        + s.detuning_error * alpha
        + 2.0 * s.lambda2_error * alpha.conj();
    -i * bracket - 0.5 * s.kappa * alpha
}

/// `(∂f/∂α, ∂f/∂α*)` for `f` = [`eom_rhs`].
pub fn eom_derivatives(alpha: c64, s: &BlockadeSpec) -> (c64, c64) {
    let i = c64::new(0.0, 1.0);
    let a = -i
        * (4.0 * s.u * alpha.norm_sqr()
            + 2.0 * s.lambda3_tilde * alpha.conj()
            + 2.0 * s.lambda3_tilde.conj() * alpha
            + s.detuning_error)
        - 0.5 * s.kappa;
    let b = -i * (2.0 * s.u * alpha * alpha + 2.0 * s.lambda3_tilde * alpha + 2.0 * s.lambda2_error);
    (a, b)
}

/// Real Jacobian of `(Re f, Im f)` with respect to `(Re α, Im α)`.
pub fn real_jacobian(alpha: c64, s: &BlockadeSpec) -> [[f64; 2]; 2] {
    let (a, b) = eom_derivatives(alpha, s);
    let dx = a + b;
    let dy = c64::new(0.0, 1.0) * (a - b);
    [[dx.re, dy.re], [dx.im, dy.im]]
}

/// Eigenvalues of a real 2×2 matrix, larger real part first.
fn eig2(j: &[[f64; 2]; 2]) -> [c64; 2] {
    let half_tr = 0.5 * (j[0][0] + j[1][1]);
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = c64::new(half_tr * half_tr - det, 0.0).sqrt();
    [half_tr + disc, half_tr - disc]
}

pub fn jacobian_eigenvalues(alpha: c64, s: &BlockadeSpec) -> [c64; 2] {
    eig2(&real_jacobian(alpha, s))
}

fn scale(s: &BlockadeSpec) -> f64 {
    s.lambda3_tilde.norm().max(s.kappa).max(f64::MIN_POSITIVE)
}

/// Residual threshold a fixed point must meet.
pub fn residual_tolerance(s: &BlockadeSpec) -> f64 {
    1e-10 * scale(s)
}

/// Damped Newton iteration on `(Re α, Im α)`.
pub fn newton(seed: c64, s: &BlockadeSpec) -> Result<FixedPoint> {
    let tol = residual_tolerance(s);
    let mut alpha = seed;
    let mut f = eom_rhs(alpha, s);
    for _ in 0..NEWTON_MAX_ITER {
        if f.norm() <= 1e-3 * tol {
            break;
        }
        let j = real_jacobian(alpha, s);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let dx = (j[1][1] * f.re - j[0][1] * f.im) / det;
        let dy = (-j[1][0] * f.re + j[0][0] * f.im) / det;
        let step = c64::new(-dx, -dy);
        // Backtrack until the residual decreases.
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial = alpha + t * step;
            let ft = eom_rhs(trial, s);
            if ft.norm() < f.norm() {
                alpha = trial;
                f = ft;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted || (t * step).norm() <= 1e-15 * alpha.norm().max(1.0) {
            break;
        }
    }
    let residual = f.norm();
    if !(residual <= tol) {
        return Err(Error::InvalidParameter(format!(
            "Newton from seed {seed} stalled at residual {residual:e}"
        )));
    }
    let eigs = jacobian_eigenvalues(alpha, s);
    Ok(FixedPoint { alpha, jacobian_eigs: eigs, stable: eigs.iter().all(|e| e.re < 0.0), residual })
}

/// Newton from `0`, from `−3Λ̃₃/2U` and from eight reproducible random seeds
/// in the disk `|α| ≤ 2|α_ha|`; converged points are merged and sorted by amplitude.
pub fn find_fixed_points(s: &BlockadeSpec) -> FixedPointSearch {
    let mut seeds = vec![c64::new(0.0, 0.0)];
    let radius = if s.u > 0.0 {
        let ha = -3.0 * s.lambda3_tilde / (2.0 * s.u);
        seeds.push(ha);
        2.0 * ha.norm()
    } else {
        2.0 * (s.lambda3_tilde.norm() * s.r.abs()).sqrt().max(1.0)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    for _ in 0..RANDOM_SEEDS {
        let rho = radius * rng.random::<f64>().sqrt();
        let phi = std::f64::consts::TAU * rng.random::<f64>();
        seeds.push(c64::from_polar(rho, phi));
    }

    let mut points: Vec<FixedPoint> = Vec::new();
    let mut failures = Vec::new();
    for seed in seeds {
        match newton(seed, s) {
            Ok(fp) => {
                let dup = points
                    .iter()
                    .any(|p| (p.alpha - fp.alpha).norm() <= MERGE_DISTANCE * fp.alpha.norm().max(1.0));
                if !dup {
                    points.push(fp);
                }
            }
            Err(e) => failures.push(SeedFailure { seed, reason: e.to_string() }),
        }
    }
    points.sort_by(|a, b| a.alpha.norm().total_cmp(&b.alpha.norm()));
    FixedPointSearch { fixed_points: points, failures }
}

/// First-order high-amplitude fixed point
/// `−3Λ̃₃/2U − iκ/2Λ̃₃ + 2Ur/9Λ̃₃`, evaluated for `|Λ̃₃|` and rotated by the
/// phase of `Λ̃₃`.
pub fn alpha_ha_perturbative(s: &BlockadeSpec) -> c64 {
    let l3 = s.lambda3_tilde.norm();
    if s.u > l3 {
        log::warn!("perturbative high-amplitude branch used outside U <= |Λ̃₃| (U = {}, |Λ̃₃| = {l3})", s.u);
    }
    let base = c64::new(-1.5 * l3 / s.u + 2.0 * s.u * s.r / (9.0 * l3), -s.kappa / (2.0 * l3));
    base * c64::from_polar(1.0, s.lambda3_tilde.arg())
}

/// Stability exponents at the high-amplitude branch,
/// `−κ/2 ± i (3√3|Λ̃₃|²/2U)(1 − 8U²r/27|Λ̃₃|²)`, `+` first.
pub fn stability_eigenvalues_analytic(s: &BlockadeSpec) -> (c64, c64) {
    let l2 = s.lambda3_tilde.norm_sqr();
    let w = 3.0 * 3f64.sqrt() * l2 / (2.0 * s.u) * (1.0 - 8.0 * s.u * s.u * s.r / (27.0 * l2));
    (c64::new(-0.5 * s.kappa, w), c64::new(-0.5 * s.kappa, -w))
}
