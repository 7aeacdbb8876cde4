//! Drive tuning and Hamiltonian assembly for the driven Kerr cavity, its
//! displaced frame, the target blockade Hamiltonian and the two-mode variant.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64 as c64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{annihilation, Operator, Truncation};
use crate::linalg::{SparseMatrix, ONE};

/// Lab-frame parameters in the drive rotating frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RwaParams {
    pub u: f64,
    pub delta: f64,
    pub lambda1: c64,
    pub lambda2: c64,
    pub kappa: f64,
}

/// Coefficients of the Hamiltonian after the shift `a → a + α`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DisplacedParams {
    pub u: f64,
    pub delta_tilde: f64,
    pub lambda1_tilde: c64,
    pub lambda2_tilde: c64,
    pub lambda3_tilde: c64,
    pub kappa: f64,
    /// Displacement that produced these coefficients; `lambda3_tilde = 2uα`.
    pub alpha: c64,
}

/// Target blockade model `Λ̃₃ a†(a†a − r) + h.c. + U a†a†aa` with an optional
/// relative error `δλ₁` on the linear drive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BlockadeSpec {
    pub lambda3_tilde: c64,
    pub r: f64,
    pub u: f64,
    pub kappa: f64,
    pub delta_lambda1: c64,
    /// Residual two-photon drive left over by imperfect tuning. Zero in the ideal model.
    pub lambda2_error: c64,
    /// Residual detuning left over by imperfect tuning. Zero in the ideal model.
    pub detuning_error: f64,
}

impl BlockadeSpec {
    pub fn new(lambda3_tilde: c64, r: f64, u: f64, kappa: f64) -> Self {
        BlockadeSpec {
            lambda3_tilde,
            r,
            u,
            kappa,
            delta_lambda1: c64::new(0.0, 0.0),
            lambda2_error: c64::new(0.0, 0.0),
            detuning_error: 0.0,
        }
    }

    pub fn with_mismatch(mut self, delta_lambda1: f64) -> Self {
        self.delta_lambda1 = c64::new(delta_lambda1, 0.0);
        self
    }

    /// Linear drive `Λ̃₁ = −Λ̃₃ r (1 + δλ₁)`.
    pub fn lambda1_tilde(&self) -> c64 {
        -self.lambda3_tilde * self.r * (ONE + self.delta_lambda1)
    }

    /// Absolute error on the linear drive, `δΛ̃₁ = Λ̃₃ δλ₁`.
    pub fn delta_lambda1_abs(&self) -> c64 {
        self.lambda3_tilde * self.delta_lambda1
    }

    /// Duration of the effective π-pulse `π / (2|Λ̃₃|)`.
    pub fn t_pi(&self) -> f64 {
        PI / (2.0 * self.lambda3_tilde.norm())
    }

    pub fn displaced_params(&self) -> DisplacedParams {
        DisplacedParams {
            u: self.u,
            delta_tilde: self.detuning_error,
            lambda1_tilde: self.lambda1_tilde(),
            lambda2_tilde: self.lambda2_error,
            lambda3_tilde: self.lambda3_tilde,
            kappa: self.kappa,
            alpha: if self.u > 0.0 { self.lambda3_tilde / (2.0 * self.u) } else { c64::new(0.0, 0.0) },
        }
    }
}

/// Lab-frame drives that realize a target blockade model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DriveTuning {
    pub alpha_b: c64,
    pub lambda1_b: c64,
    pub lambda2_b: c64,
    pub delta_b: f64,
}

impl DriveTuning {
    pub fn rwa_params(&self, u: f64, kappa: f64) -> RwaParams {
        RwaParams { u, delta: self.delta_b, lambda1: self.lambda1_b, lambda2: self.lambda2_b, kappa }
    }
}

/// Displacement and drive parameters giving `Λ̃₃`, `r` in the displaced frame
/// with no residual detuning or two-photon drive.
pub fn tune_drives(lambda3_tilde: c64, u: f64, kappa: f64, r: f64) -> Result<DriveTuning> {
    if !(u > 0.0 && u.is_finite()) {
        return Err(Error::InvalidParameter(format!("Kerr strength U = {u} must be positive")));
    }
    let l3 = lambda3_tilde;
    let l3sq = l3.norm_sqr();
    Ok(DriveTuning {
        alpha_b: l3 / (2.0 * u),
        lambda1_b: l3 * c64::new(-r + l3sq / (2.0 * u * u), kappa / (4.0 * u)),
        lambda2_b: -l3 * l3 / (4.0 * u),
        delta_b: -l3sq / u,
    })
}

pub fn displace_params(p: &RwaParams, alpha: c64) -> DisplacedParams {
    let a2 = alpha.norm_sqr();
    DisplacedParams {
        u: p.u,
        delta_tilde: p.delta + 4.0 * p.u * a2,
        lambda1_tilde: p.lambda1 + alpha * p.delta + 2.0 * alpha.conj() * p.lambda2 + 2.0 * p.u * a2 * alpha
            - c64::new(0.0, 0.5 * p.kappa) * alpha,
        lambda2_tilde: p.lambda2 + p.u * alpha * alpha,
        lambda3_tilde: 2.0 * p.u * alpha,
        kappa: p.kappa,
        alpha,
    }
}

/// c-number produced when `H_RWA` is shifted by `α`:
/// `U|α|⁴ + Δ|α|² + (Λ₁α* + Λ₂α*² + c.c.)`.
pub fn displacement_energy_shift(p: &RwaParams, alpha: c64) -> f64 {
    let a2 = alpha.norm_sqr();
    p.u * a2 * a2 + p.delta * a2 + 2.0 * (p.lambda1 * alpha.conj() + p.lambda2 * alpha.conj() * alpha.conj()).re
}

/// `U a†a†aa + Δ a†a + (Λ₁a† + Λ₂a†a† + Λ₃a†a†a + h.c.)` assembled from its
/// matrix elements.
fn kerr_hamiltonian(u: f64, delta: f64, l1: c64, l2: c64, l3: c64, t: Truncation) -> Operator {
    let d = t.dim();
    let mut trip = Vec::with_capacity(5 * d);
    for n in 0..d {
        let nf = n as f64;
        trip.push((n, n, c64::new(u * nf * (nf - 1.0) + delta * nf, 0.0)));
        if n + 1 < d {
            let v = (nf + 1.0).sqrt() * (l1 + l3 * nf);
            trip.push((n + 1, n, v));
            trip.push((n, n + 1, v.conj()));
        }
        if n + 2 < d {
            let v = l2 * ((nf + 1.0) * (nf + 2.0)).sqrt();
            trip.push((n + 2, n, v));
            trip.push((n, n + 2, v.conj()));
        }
    }
    Operator::from_sparse(SparseMatrix::from_triplets(d, d, trip))
}

pub fn build_h_rwa(p: &RwaParams, t: Truncation) -> Operator {
    kerr_hamiltonian(p.u, p.delta, p.lambda1, p.lambda2, c64::new(0.0, 0.0), t)
}

pub fn build_h_displaced(p: &DisplacedParams, t: Truncation) -> Operator {
    kerr_hamiltonian(p.u, p.delta_tilde, p.lambda1_tilde, p.lambda2_tilde, p.lambda3_tilde, t)
}

pub fn build_h_target(s: &BlockadeSpec, t: Truncation) -> Operator {
    build_h_displaced(&s.displaced_params(), t)
}

/// Two cavities driven through the collective mode `b = (a₁ + a₂)/√2`:
/// `Λ̃₃ b†b†b + Λ̃₁ b† + h.c.` on the product space (mode 1 is the slow index).
pub fn build_two_mode(s: &BlockadeSpec, t: Truncation) -> Result<Operator> {
    if t.dim() < 3 {
        return Err(Error::TruncationInadequate { dim: t.dim(), required: 3 });
    }
    let b = collective_mode(t)?;
    let bd = b.adjoint();
    let drive = bd.matmul(&bd).matmul(&b).scale(s.lambda3_tilde).add(&bd.scale(s.lambda1_tilde()));
    Ok(drive.add(&drive.adjoint()))
}

/// `(a₁ ⊗ 1, 1 ⊗ a₂)` on the two-mode product space.
pub fn two_mode_ladders(t: Truncation) -> Result<(Operator, Operator)> {
    let a = annihilation(t)?;
    let id = Operator::identity(t.dim());
    Ok((a.kron(&id), id.kron(&a)))
}

/// `b = (a₁ + a₂)/√2`.
pub fn collective_mode(t: Truncation) -> Result<Operator> {
    let (a1, a2) = two_mode_ladders(t)?;
    Ok(a1.add(&a2).scale(c64::new(FRAC_1_SQRT_2, 0.0)))
}

/// `(a₁ − a₂)/√2`.
pub fn antisymmetric_mode(t: Truncation) -> Result<Operator> {
    let (a1, a2) = two_mode_ladders(t)?;
    Ok(a1.sub(&a2).scale(c64::new(FRAC_1_SQRT_2, 0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{displacement_operator, KetState};
    use crate::linalg;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> c64 {
        c64::new(re, im)
    }

    fn tr(d: usize) -> Truncation {
        Truncation::new(d).unwrap()
    }

    #[test]
    fn tune_drives_examples() {
        let t = tune_drives(c(2.0, 0.0), 0.4, 1.0, 1.0).unwrap();
        assert!((t.alpha_b - c(2.5, 0.0)).norm() < 1e-14);
        assert!((t.lambda1_b - c(23.0, 1.25)).norm() < 1e-12);
        assert!((t.lambda2_b - c(-2.5, 0.0)).norm() < 1e-14);
        assert_abs_diff_eq!(t.delta_b, -10.0, epsilon = 1e-12);

        let z = tune_drives(c(0.0, 0.0), 0.3, 1.0, 1.0).unwrap();
        assert_eq!(z.alpha_b, c(0.0, 0.0));
        assert_eq!(z.lambda1_b, c(0.0, 0.0));
        assert_eq!(z.lambda2_b, c(0.0, 0.0));
        assert_eq!(z.delta_b, 0.0);

        let l3 = c(1.3, -0.4);
        let r1 = tune_drives(l3, 0.7, 1.0, 1.0).unwrap();
        let r2 = tune_drives(l3, 0.7, 1.0, 2.0).unwrap();
        assert!((r2.lambda1_b - r1.lambda1_b + l3).norm() < 1e-12);

        assert!(tune_drives(l3, 0.0, 1.0, 1.0).is_err());
        assert!(tune_drives(l3, -1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn displace_params_examples() {
        let p = RwaParams { u: 0.3, delta: 0.7, lambda1: c(0.2, 0.1), lambda2: c(-0.1, 0.3), kappa: 1.0 };
        let d = displace_params(&p, c(0.0, 0.0));
        assert_eq!(d.delta_tilde, p.delta);
        assert_eq!(d.lambda1_tilde, p.lambda1);
        assert_eq!(d.lambda2_tilde, p.lambda2);
        assert_eq!(d.lambda3_tilde, c(0.0, 0.0));

        let tune = tune_drives(c(2.0, 0.0), 0.4, 1.0, 1.0).unwrap();
        let d = displace_params(&tune.rwa_params(0.4, 1.0), tune.alpha_b);
        assert_abs_diff_eq!(d.delta_tilde, 0.0, epsilon = 1e-12);
        assert!(d.lambda2_tilde.norm() < 1e-12);
        assert!((d.lambda3_tilde - c(2.0, 0.0)).norm() < 1e-12);
        assert!((d.lambda1_tilde - c(-2.0, 0.0)).norm() < 1e-12);

        let kerr = RwaParams { u: 0.3, delta: 0.0, lambda1: c(0.0, 0.0), lambda2: c(0.0, 0.0), kappa: 0.0 };
        let d = displace_params(&kerr, c(1.0, 0.0));
        assert_abs_diff_eq!(d.delta_tilde, 1.2, epsilon = 1e-14);
        assert!((d.lambda1_tilde - c(0.6, 0.0)).norm() < 1e-14);
        assert!((d.lambda2_tilde - c(0.3, 0.0)).norm() < 1e-14);
        assert!((d.lambda3_tilde - c(0.6, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn h_rwa_examples() {
        let zero = RwaParams { u: 0.0, delta: 0.0, lambda1: c(0.0, 0.0), lambda2: c(0.0, 0.0), kappa: 0.0 };
        assert_eq!(build_h_rwa(&zero, tr(6)).to_sparse().nnz(), 0);

        let h = build_h_rwa(&RwaParams { u: 1.0, ..zero }, tr(6));
        for n in 0..6 {
            assert_abs_diff_eq!(h.entry(n, n).re, (n * n.saturating_sub(1)) as f64, epsilon = 0.0);
        }
        assert_eq!(h.to_sparse().nnz(), 4);

        let h = build_h_rwa(&RwaParams { lambda1: c(1.0, 0.0), ..zero }, tr(3));
        assert_abs_diff_eq!(h.entry(1, 0).re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(h.entry(2, 1).re, 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn h_rwa_matches_ladder_products() {
        let t = tr(9);
        let p = RwaParams { u: 0.37, delta: -1.1, lambda1: c(0.2, -0.7), lambda2: c(0.4, 0.15), kappa: 1.0 };
        let a = annihilation(t).unwrap();
        let ad = a.adjoint();
        let drive = ad.scale(p.lambda1).add(&ad.matmul(&ad).scale(p.lambda2));
        let oracle = ad
            .matmul(&ad)
            .matmul(&a)
            .matmul(&a)
            .scale(c(p.u, 0.0))
            .add(&ad.matmul(&a).scale(c(p.delta, 0.0)))
            .add(&drive)
            .add(&drive.adjoint());
        let h = build_h_rwa(&p, t);
        assert!(linalg::norm_max(&(&h.to_dense() - &oracle.to_dense())) < 1e-13);
    }

    #[test]
    fn h_target_examples() {
        let spec = BlockadeSpec::new(c(2.0, 0.0), 1.0, 0.4, 1.0);
        let h = build_h_target(&spec, tr(10));
        assert_eq!(h.entry(2, 1), c(0.0, 0.0));
        assert_abs_diff_eq!(h.entry(1, 0).norm(), 2.0, epsilon = 1e-14);

        let h = build_h_target(&spec.with_mismatch(0.1), tr(10));
        assert_abs_diff_eq!(h.entry(2, 1).norm(), 2f64.sqrt() * 2.0 * 0.1, epsilon = 1e-13);
    }

    #[test]
    fn tuned_displaced_matches_target() {
        let tune = tune_drives(c(2.0, 0.0), 0.4, 1.0, 1.0).unwrap();
        let d = displace_params(&tune.rwa_params(0.4, 1.0), tune.alpha_b);
        let t = tr(25);
        let hd = build_h_displaced(&d, t).to_dense();
        let ht = build_h_target(&BlockadeSpec::new(c(2.0, 0.0), 1.0, 0.4, 1.0), t).to_dense();
        assert!(linalg::norm_max(&(&hd - &ht)) < 1e-12);

        let p = RwaParams { u: 0.3, delta: 0.5, lambda1: c(0.1, 0.2), lambda2: c(0.3, -0.1), kappa: 0.0 };
        let dz = DisplacedParams {
            u: p.u,
            delta_tilde: p.delta,
            lambda1_tilde: p.lambda1,
            lambda2_tilde: p.lambda2,
            lambda3_tilde: c(0.0, 0.0),
            kappa: 0.0,
            alpha: c(0.0, 0.0),
        };
        let diff = &build_h_displaced(&dz, t).to_dense() - &build_h_rwa(&p, t).to_dense();
        assert_eq!(linalg::norm_max(&diff), 0.0);
    }

    #[test]
    fn displaced_frame_is_unitarily_equivalent() {
        // D(α)† H_RWA D(α), plus the drive the dissipator induces, minus the c-number shift.
        let alpha = c(1.2, 0.5);
        let p = RwaParams { u: 0.3, delta: -0.8, lambda1: c(0.4, -0.2), lambda2: c(-0.25, 0.1), kappa: 1.0 };
        let need = (alpha.norm_sqr() + 6.0 * alpha.norm() + 15.0).ceil() as usize;
        let dim = need + 25;
        let t = tr(dim);
        let d = displacement_operator(alpha, t).unwrap().to_dense();
        let h = build_h_rwa(&p, t).to_dense();
        let mut conj = &(&linalg::adjoint(&d) * &h) * &d;
        let a = annihilation(t).unwrap();
        let induced = a.adjoint().scale(c(0.0, -0.5 * p.kappa) * alpha);
        let induced = induced.add(&induced.adjoint()).to_dense();
        conj = &conj + &induced;
        let shift = displacement_energy_shift(&p, alpha);
        for i in 0..dim {
            conj[(i, i)] -= c(shift, 0.0);
        }
        let target = build_h_displaced(&displace_params(&p, alpha), t).to_dense();
        let interior = dim - need;
        for i in 0..interior {
            for j in 0..interior {
                assert!((conj[(i, j)] - target[(i, j)]).norm() < 1e-6, "({i},{j})");
            }
        }
    }

    #[test]
    fn two_mode_examples() {
        let t = tr(4);
        let spec = BlockadeSpec::new(c(1.0, 0.0), 1.0, 0.0, 1.0);
        let h = build_two_mode(&spec, t).unwrap();
        assert!(h.hermiticity_defect() < 1e-13);
        let idx = |n1: usize, n2: usize| n1 * 4 + n2;

        let out = h.apply(KetState::fock(idx(0, 0), 16).unwrap().amplitudes());
        for (k, v) in out.iter().enumerate() {
            if k == idx(1, 0) || k == idx(0, 1) {
                assert_abs_diff_eq!(v.norm(), FRAC_1_SQRT_2, epsilon = 1e-13);
            } else {
                assert!(v.norm() < 1e-14);
            }
        }
        assert!((out[idx(1, 0)] - out[idx(0, 1)]).norm() < 1e-14);

        let mut sym = vec![c(0.0, 0.0); 16];
        sym[idx(1, 0)] = c(FRAC_1_SQRT_2, 0.0);
        sym[idx(0, 1)] = c(FRAC_1_SQRT_2, 0.0);
        let out = h.apply(&sym);
        for (n1, n2) in [(2, 0), (1, 1), (0, 2)] {
            assert!(out[idx(n1, n2)].norm() < 1e-13);
        }

        // the antisymmetric mode is a spectator: H c†|00⟩ = c† H|00⟩, and H conserves c†c
        let c_op = antisymmetric_mode(t).unwrap();
        let cd = c_op.adjoint();
        let vac = KetState::fock(0, 16).unwrap();
        let lhs = h.apply(&cd.apply(vac.amplitudes()));
        let rhs = cd.apply(&h.apply(vac.amplitudes()));
        for (x, y) in lhs.iter().zip(&rhs) {
            assert!((x - y).norm() < 1e-13);
        }
        let big = tr(6);
        let hb = build_two_mode(&spec.with_mismatch(0.07), big).unwrap();
        let cb = antisymmetric_mode(big).unwrap();
        let nc = cb.adjoint().matmul(&cb);
        let comm = hb.matmul(&nc).sub(&nc.matmul(&hb)).to_dense();
        // the truncation breaks the commutation only through the top level of each mode
        let keep: Vec<usize> = (0..36).filter(|k| k / 6 + k % 6 <= 3).collect();
        for &i in &keep {
            for &j in &keep {
                assert!(comm[(i, j)].norm() < 1e-12);
            }
        }
    }

    #[test]
    fn blockade_identity_for_integer_r() {
        for r in 1..5 {
            let l3 = c(0.8, 1.7);
            let spec = BlockadeSpec::new(l3, r as f64, 0.3, 1.0);
            let h = build_h_target(&spec, tr(12));
            assert!(h.entry(r + 1, r).norm() < 1e-12 * l3.norm());
        }
    }

    proptest! {
        #[test]
        fn tuning_closes(re in -5.0f64..5.0, im in -5.0f64..5.0, u in 0.01f64..3.0, kappa in 0.0f64..4.0, r in 0.0f64..4.0) {
            let l3 = c(re, im);
            let tune = tune_drives(l3, u, kappa, r).unwrap();
            let d = displace_params(&tune.rwa_params(u, kappa), tune.alpha_b);
            // each tuned coefficient is a difference of terms of size ~|Λ̃₃|³/U²
            let scale = l3.norm() * (1.0 + l3.norm_sqr() / (u * u) + kappa / u + r) + 1e-300;
            prop_assert!(d.delta_tilde.abs() <= 1e-12 * (l3.norm_sqr() / u + 1e-300) * 4.0);
            prop_assert!(d.lambda2_tilde.norm() <= 1e-12 * scale);
            prop_assert!((d.lambda3_tilde - l3).norm() <= 1e-12 * l3.norm().max(1e-300));
            prop_assert!((d.lambda1_tilde + l3 * r).norm() <= 1e-12 * scale);
        }

        #[test]
        fn builders_are_hermitian(re in -3.0f64..3.0, im in -3.0f64..3.0, u in 0.0f64..2.0, r in 0.0f64..3.0, dl in -0.3f64..0.3) {
            let spec = BlockadeSpec::new(c(re, im), r, u, 1.0).with_mismatch(dl);
            prop_assert!(build_h_target(&spec, tr(15)).hermiticity_defect() < 1e-13);
            let p = RwaParams { u, delta: re * im, lambda1: c(im, r), lambda2: c(dl, re), kappa: 1.0 };
            prop_assert!(build_h_rwa(&p, tr(15)).hermiticity_defect() < 1e-13);
            prop_assert!(build_two_mode(&spec, tr(4)).unwrap().hermiticity_defect() < 1e-13);
        }

        #[test]
        fn phase_covariance(theta in 0.0f64..6.28, dl in 0.0f64..0.2) {
            let t = tr(10);
            let base = BlockadeSpec::new(c(1.1, 0.0), 1.0, 0.3, 1.0).with_mismatch(dl);
            let rotated = BlockadeSpec { lambda3_tilde: base.lambda3_tilde * c64::from_polar(1.0, theta), ..base };
            let h0 = build_h_target(&base, t).to_dense();
            let h1 = build_h_target(&rotated, t).to_dense();
            // H(Λ̃₃ e^{iθ}) = e^{iθn} H(Λ̃₃) e^{−iθn}
            let rot = |i: usize| c64::from_polar(1.0, theta * i as f64);
            for i in 0..10 {
                for j in 0..10 {
                    let expect = rot(i) * h0[(i, j)] * rot(j).conj();
                    prop_assert!((expect - h1[(i, j)]).norm() < 1e-12);
                }
            }
            let e0 = linalg::hermitian_eigenvalues(&h0).unwrap();
            let e1 = linalg::hermitian_eigenvalues(&h1).unwrap();
            for (x, y) in e0.iter().zip(&e1) {
                prop_assert!((x - y).abs() < 1e-10);
            }
        }
    }
}
