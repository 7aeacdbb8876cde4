//! Truncated Fock-space primitives: ladder operators, kets, density matrices,
//! Gaussian states and the observables built on them.
//!
//! All states and operators in one computation share a [`Truncation`]; level
//! `n` lives at index `n`. Operators constructed here are sparse unless they
//! come out of a matrix exponential.

use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64 as c64;

use crate::error::{Error, Result};
use crate::linalg::{self, SparseMatrix, ONE, ZERO};

/// Below this `<n>` the ratio in g² is not evaluated.
pub const G2_FLOOR: f64 = 1e-8;
/// Most negative eigenvalue tolerated in a density matrix.
pub const POSITIVITY_TOL: f64 = 1e-8;
const HERMITICITY_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-10;
const KET_NORM_TOL: f64 = 1e-12;
/// Largest thermal tail mass `q^dim` accepted by [`thermal_state`].
const THERMAL_TAIL: f64 = 1e-12;

/// Number of retained Fock levels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize)]
pub struct Truncation(usize);

impl Truncation {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidTruncation(dim));
        }
        Ok(Truncation(dim))
    }

    pub fn dim(self) -> usize {
        self.0
    }

    /// Levels needed to hold a coherent state of amplitude `alpha`:
    /// `|α|² + 6|α| + 10`, rounded up.
    pub fn required_for(alpha: c64) -> usize {
        let a = alpha.norm();
        (a * a + 6.0 * a + 10.0).ceil() as usize
    }

    pub fn check_displacement(self, alpha: c64) -> Result<()> {
        let required = Self::required_for(alpha);
        if required > self.0 {
            return Err(Error::TruncationInadequate { dim: self.0, required });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layout {
    Dense,
    Sparse,
}

#[derive(Clone, Debug)]
enum Repr {
    Dense(Mat<c64>),
    Sparse(SparseMatrix),
}

/// Square complex operator on a (possibly tensor-product) truncated space.
#[derive(Clone, Debug)]
pub struct Operator {
    repr: Repr,
}

impl Operator {
    pub fn from_dense(m: Mat<c64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "operators are square");
        Operator { repr: Repr::Dense(m) }
    }

    pub fn from_sparse(m: SparseMatrix) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "operators are square");
        Operator { repr: Repr::Sparse(m) }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_sparse(SparseMatrix::identity(dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_sparse(SparseMatrix::zeros(dim, dim))
    }

    pub fn dim(&self) -> usize {
        match &self.repr {
            Repr::Dense(m) => m.nrows(),
            Repr::Sparse(s) => s.nrows(),
        }
    }

    pub fn layout(&self) -> Layout {
        match self.repr {
            Repr::Dense(_) => Layout::Dense,
            Repr::Sparse(_) => Layout::Sparse,
        }
    }

    pub fn to_dense(&self) -> Mat<c64> {
        match &self.repr {
            Repr::Dense(m) => m.clone(),
            Repr::Sparse(s) => s.to_dense(),
        }
    }

    pub fn to_sparse(&self) -> SparseMatrix {
        match &self.repr {
            Repr::Dense(m) => SparseMatrix::from_dense(m, 0.0),
            Repr::Sparse(s) => s.clone(),
        }
    }

    pub fn with_layout(&self, layout: Layout) -> Self {
        match layout {
            Layout::Dense => Self::from_dense(self.to_dense()),
            Layout::Sparse => Self::from_sparse(self.to_sparse()),
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> c64 {
        match &self.repr {
            Repr::Dense(m) => m[(i, j)],
            Repr::Sparse(s) => s.get(i, j),
        }
    }

    pub fn adjoint(&self) -> Self {
        match &self.repr {
            Repr::Dense(m) => Self::from_dense(linalg::adjoint(m)),
            Repr::Sparse(s) => Self::from_sparse(s.adjoint()),
        }
    }

    pub fn scale(&self, s: c64) -> Self {
        match &self.repr {
            Repr::Dense(m) => Self::from_dense(Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * s)),
            Repr::Sparse(sp) => Self::from_sparse(sp.scale(s)),
        }
    }

    pub fn add(&self, other: &Operator) -> Self {
        match (&self.repr, &other.repr) {
            (Repr::Sparse(a), Repr::Sparse(b)) => Self::from_sparse(a.add(b)),
            _ => Self::from_dense(&self.to_dense() + &other.to_dense()),
        }
    }

    pub fn sub(&self, other: &Operator) -> Self {
        self.add(&other.scale(-ONE))
    }

    pub fn matmul(&self, other: &Operator) -> Self {
        match (&self.repr, &other.repr) {
            (Repr::Sparse(a), Repr::Sparse(b)) => Self::from_sparse(a.matmul(b)),
            _ => Self::from_dense(&self.to_dense() * &other.to_dense()),
        }
    }

    /// `self ⊗ other`.
    pub fn kron(&self, other: &Operator) -> Self {
        Self::from_sparse(SparseMatrix::kron(&self.to_sparse(), &other.to_sparse()))
    }

    pub fn apply(&self, v: &[c64]) -> Vec<c64> {
        match &self.repr {
            Repr::Sparse(s) => s.mul_vec(v),
            Repr::Dense(m) => (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum()).collect(),
        }
    }

    /// `max |H − H†|` entrywise.
    pub fn hermiticity_defect(&self) -> f64 {
        match &self.repr {
            Repr::Sparse(s) => s.hermiticity_defect(),
            Repr::Dense(m) => linalg::norm_max(&(m - &linalg::adjoint(m))),
        }
    }

    /// `Tr(O ρ)`.
    pub fn expect(&self, rho: &DensityMatrix) -> c64 {
        let r = rho.matrix();
        match &self.repr {
            Repr::Sparse(s) => s.triplets().map(|(i, j, v)| v * r[(j, i)]).sum(),
            Repr::Dense(m) => {
                let mut acc = ZERO;
                for i in 0..m.nrows() {
                    for j in 0..m.ncols() {
                        acc += m[(i, j)] * r[(j, i)];
                    }
                }
                acc
            }
        }
    }

    /// `U ρ U†` without re-validating the result.
    pub fn conjugate(&self, rho: &DensityMatrix) -> DensityMatrix {
        let u = self.to_dense();
        DensityMatrix::from_matrix_unchecked(&(&u * rho.matrix()) * &linalg::adjoint(&u))
    }
}

/// Normalized state vector.
#[derive(Clone, Debug, PartialEq)]
pub struct KetState {
    amps: Vec<c64>,
}

impl KetState {
    /// Wraps amplitudes that are already normalized.
    pub fn new(amps: Vec<c64>) -> Result<Self> {
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > KET_NORM_TOL {
            return Err(Error::InvalidParameter(format!("ket norm {norm} differs from 1")));
        }
        Ok(KetState { amps })
    }

    pub fn normalized(mut amps: Vec<c64>) -> Result<Self> {
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidParameter("cannot normalize a zero or non-finite vector".into()));
        }
        amps.iter_mut().for_each(|a| *a /= norm);
        Ok(KetState { amps })
    }

    pub fn fock(n: usize, dim: usize) -> Result<Self> {
        if n >= dim {
            return Err(Error::TruncationInadequate { dim, required: n + 1 });
        }
        let mut amps = vec![ZERO; dim];
        amps[n] = ONE;
        Ok(KetState { amps })
    }

    pub fn vacuum(t: Truncation) -> Self {
        Self::fock(0, t.dim()).expect("dim >= 2")
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[c64] {
        &self.amps
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &KetState) -> c64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn to_density(&self) -> DensityMatrix {
        let n = self.dim();
        DensityMatrix::from_matrix_unchecked(Mat::from_fn(n, n, |i, j| self.amps[i] * self.amps[j].conj()))
    }

    /// `⟨ψ|O|ψ⟩`.
    pub fn expect(&self, op: &Operator) -> c64 {
        let v = op.apply(&self.amps);
        self.amps.iter().zip(&v).map(|(a, b)| a.conj() * b).sum()
    }
}

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    m: Mat<c64>,
}

impl DensityMatrix {
    /// Validates Hermiticity (1e−12), trace (1e−10) and positivity (−1e−8).
    pub fn new(m: Mat<c64>) -> Result<Self> {
        let rho = Self::from_matrix_unchecked(m);
        rho.validate()?;
        Ok(rho)
    }

    pub(crate) fn from_matrix_unchecked(m: Mat<c64>) -> Self {
        assert_eq!(m.nrows(), m.ncols());
        DensityMatrix { m }
    }

    pub fn vacuum(t: Truncation) -> Self {
        KetState::vacuum(t).to_density()
    }

    pub fn fock(n: usize, dim: usize) -> Result<Self> {
        Ok(KetState::fock(n, dim)?.to_density())
    }

    pub fn validate(&self) -> Result<()> {
        let herm = linalg::norm_max(&(&self.m - &linalg::adjoint(&self.m)));
        if herm > HERMITICITY_TOL {
            return Err(Error::InvalidParameter(format!("density matrix not Hermitian (defect {herm:e})")));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidParameter(format!("density matrix trace {tr} differs from 1")));
        }
        let min = self.min_eigenvalue()?;
        if min < -POSITIVITY_TOL {
            return Err(Error::InvalidParameter(format!("density matrix eigenvalue {min:e} below tolerance")));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &Mat<c64> {
        &self.m
    }

    pub fn into_matrix(self) -> Mat<c64> {
        self.m
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.m).re
    }

    pub fn population(&self, n: usize) -> f64 {
        if n < self.dim() {
            self.m[(n, n)].re
        } else {
            0.0
        }
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|n| self.m[(n, n)].re).collect()
    }

    pub fn purity(&self) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += self.m[(i, j)].norm_sqr();
            }
        }
        acc
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let h = Mat::from_fn(self.dim(), self.dim(), |i, j| 0.5 * (self.m[(i, j)] + self.m[(j, i)].conj()));
        Ok(linalg::hermitian_eigenvalues(&h)?.into_iter().fold(f64::INFINITY, f64::min))
    }

    /// `⟨a†a⟩`.
    pub fn n_mean(&self) -> f64 {
        (0..self.dim()).map(|n| n as f64 * self.m[(n, n)].re).sum()
    }

    /// `⟨a†a†aa⟩`.
    pub fn second_factorial_moment(&self) -> f64 {
        (0..self.dim()).map(|n| (n * n.saturating_sub(1)) as f64 * self.m[(n, n)].re).sum()
    }

    /// `⟨a⟩`.
    pub fn mean_a(&self) -> c64 {
        (1..self.dim()).map(|n| (n as f64).sqrt() * self.m[(n, n - 1)]).sum()
    }

    /// `⟨aa⟩`.
    pub fn mean_aa(&self) -> c64 {
        (2..self.dim()).map(|n| ((n * (n - 1)) as f64).sqrt() * self.m[(n, n - 2)]).sum()
    }

    /// Quadrature variances `(⟨ΔX²⟩, ⟨ΔY²⟩)` with `X = (a + a†)/√2`,
    /// `Y = (a − a†)/(i√2)`, evaluated from normal-ordered moments.
    pub fn quadrature_variances(&self) -> (f64, f64) {
        let n = self.n_mean();
        let a = self.mean_a();
        let aa = self.mean_aa();
        let x2 = aa.re + n + 0.5;
        let y2 = -aa.re + n + 0.5;
        let x = std::f64::consts::SQRT_2 * a.re;
        let y = std::f64::consts::SQRT_2 * a.im;
        (x2 - x * x, y2 - y * y)
    }

    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        linalg::trace_distance(&self.m, &other.m)
    }
}

fn ladder_check(t: Truncation) -> Result<usize> {
    let d = t.dim();
    if d < 2 {
        return Err(Error::InvalidTruncation(d));
    }
    Ok(d)
}

/// Annihilation operator: `a_{n−1,n} = √n`.
pub fn annihilation(t: Truncation) -> Result<Operator> {
    let d = ladder_check(t)?;
    Ok(Operator::from_sparse(SparseMatrix::from_triplets(
        d,
        d,
        (1..d).map(|n| (n - 1, n, c64::new((n as f64).sqrt(), 0.0))),
    )))
}

pub fn creation(t: Truncation) -> Result<Operator> {
    Ok(annihilation(t)?.adjoint())
}

pub fn number(t: Truncation) -> Operator {
    let diag: Vec<c64> = (0..t.dim()).map(|n| c64::new(n as f64, 0.0)).collect();
    Operator::from_sparse(SparseMatrix::from_diagonal(&diag))
}

/// Photon-number parity `(−1)^n`.
pub fn parity(t: Truncation) -> Operator {
    let diag: Vec<c64> = (0..t.dim()).map(|n| c64::new(if n % 2 == 0 { 1.0 } else { -1.0 }, 0.0)).collect();
    Operator::from_sparse(SparseMatrix::from_diagonal(&diag))
}

/// Coherent state from its Fock series, renormalized on the truncation.
pub fn coherent_state(alpha: c64, t: Truncation) -> Result<KetState> {
    t.check_displacement(alpha)?;
    coherent_amplitudes(alpha, t.dim())
}

pub(crate) fn coherent_amplitudes(alpha: c64, dim: usize) -> Result<KetState> {
    let mut amps = Vec::with_capacity(dim);
    let mut c = c64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    amps.push(c);
    for n in 1..dim {
        c = c * alpha / (n as f64).sqrt();
        amps.push(c);
    }
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>();
    if (1.0 - norm).abs() > 1e-10 {
        return Err(Error::TruncationInadequate { dim, required: Truncation::required_for(alpha) });
    }
    KetState::normalized(amps)
}

/// `D(α) = exp(α a† − α* a)` by dense matrix exponential at the working truncation.
pub fn displacement_operator(alpha: c64, t: Truncation) -> Result<Operator> {
    t.check_displacement(alpha)?;
    let a = annihilation(t)?;
    let gen = a.adjoint().scale(alpha).sub(&a.scale(alpha.conj()));
    Ok(Operator::from_dense(linalg::expm(&gen.to_dense())))
}

/// Levels needed to hold a squeezed state with parameter `xi`.
fn squeeze_required(xi: f64) -> usize {
    (10.0 * (2.0 * xi.abs()).exp()).ceil() as usize + 2
}

/// `S(ξ) = exp(ξ (a² − a†²)/2)` for real `ξ`; `ξ > 0` squeezes the X quadrature.
pub fn squeeze_operator(xi: f64, t: Truncation) -> Result<Operator> {
    if !xi.is_finite() {
        return Err(Error::InvalidParameter(format!("squeeze parameter {xi} is not finite")));
    }
    let required = squeeze_required(xi);
    if required > t.dim() {
        return Err(Error::TruncationInadequate { dim: t.dim(), required });
    }
    let a = annihilation(t)?;
    let a2 = a.matmul(&a);
    let gen = a2.sub(&a2.adjoint()).scale(c64::new(0.5 * xi, 0.0));
    Ok(Operator::from_dense(linalg::expm(&gen.to_dense())))
}

/// Thermal state with mean occupation `nbar`.
pub fn thermal_state(nbar: f64, t: Truncation) -> Result<DensityMatrix> {
    if !(nbar >= 0.0 && nbar.is_finite()) {
        return Err(Error::InvalidParameter(format!("thermal occupation {nbar} must be finite and >= 0")));
    }
    let d = t.dim();
    if nbar == 0.0 {
        return Ok(DensityMatrix::vacuum(t));
    }
    let q = nbar / (1.0 + nbar);
    let tail_levels = (THERMAL_TAIL.ln() / q.ln()).ceil() as usize;
    let required = tail_levels.max((20.0 * nbar).ceil() as usize);
    if required > d {
        return Err(Error::TruncationInadequate { dim: d, required });
    }
    let weights: Vec<f64> = (0..d).map(|n| q.powi(n as i32)).collect();
    let z: f64 = weights.iter().sum();
    let m = Mat::from_fn(d, d, |i, j| if i == j { c64::new(weights[i] / z, 0.0) } else { ZERO });
    Ok(DensityMatrix::from_matrix_unchecked(m))
}

/// `⟨a†a†aa⟩ / ⟨a†a⟩²`; signals when `⟨a†a⟩` is below [`G2_FLOOR`].
pub fn g2_instantaneous(rho: &DensityMatrix) -> Result<f64> {
    g2_from_moments(rho.n_mean(), rho.second_factorial_moment())
}

pub fn g2_from_moments(n_mean: f64, second: f64) -> Result<f64> {
    if !(n_mean > G2_FLOOR) {
        return Err(Error::UndefinedG2 { n_mean, floor: G2_FLOOR });
    }
    Ok(second / (n_mean * n_mean))
}

/// Wigner function at `β`: `(2/π) Tr[D(β)† ρ D(β) Π]`.
pub fn wigner_point(rho: &DensityMatrix, beta: c64) -> Result<f64> {
    let t = Truncation::new(rho.dim())?;
    if beta == ZERO {
        return Ok(2.0 / PI * parity(t).expect(rho).re);
    }
    let d = displacement_operator(beta, t)?;
    let shifted = d.adjoint().conjugate(rho);
    Ok(2.0 / PI * parity(t).expect(&shifted).re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tr(d: usize) -> Truncation {
        Truncation::new(d).unwrap()
    }

    #[test]
    fn truncation_rejects_small_dims() {
        assert!(matches!(Truncation::new(1), Err(Error::InvalidTruncation(1))));
        assert!(matches!(Truncation::new(0), Err(Error::InvalidTruncation(0))));
    }

    #[test]
    fn ladder_matrix_elements() {
        let a = annihilation(tr(3)).unwrap();
        let out = a.apply(KetState::fock(2, 3).unwrap().amplitudes());
        assert_abs_diff_eq!(out[1].re, 2f64.sqrt(), epsilon = 1e-15);
        assert_eq!(out[0], ZERO);
        assert_eq!(out[2], ZERO);

        let a2 = annihilation(tr(2)).unwrap();
        let out = a2.apply(KetState::fock(0, 2).unwrap().amplitudes());
        assert!(out.iter().all(|v| *v == ZERO));

        let a4 = annihilation(tr(4)).unwrap();
        let n = a4.adjoint().matmul(&a4);
        let out = n.apply(KetState::fock(3, 4).unwrap().amplitudes());
        assert_abs_diff_eq!(out[3].re, 3.0, epsilon = 1e-14);
    }

    #[test]
    fn commutator_is_identity_below_top_level() {
        for d in [2, 3, 5, 10, 40, 130] {
            let a = annihilation(tr(d)).unwrap();
            let ad = a.adjoint();
            let comm = a.matmul(&ad).sub(&ad.matmul(&a)).to_dense();
            for i in 0..d - 1 {
                for j in 0..d - 1 {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((comm[(i, j)] - c64::new(expect, 0.0)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn sparse_and_dense_layouts_agree() {
        let a = annihilation(tr(8)).unwrap();
        let h = a.adjoint().matmul(&a).add(&a.scale(c64::new(0.3, -0.2)));
        let dense = h.with_layout(Layout::Dense);
        assert_eq!(dense.layout(), Layout::Dense);
        for i in 0..8 {
            for j in 0..8 {
                assert!((dense.entry(i, j) - h.entry(i, j)).norm() < 1e-14);
            }
        }
        let back = dense.with_layout(Layout::Sparse);
        assert!(linalg::norm_max(&(&back.to_dense() - &h.to_dense())) < 1e-14);
    }

    #[test]
    fn coherent_state_examples() {
        let vac = coherent_state(ZERO, tr(12)).unwrap();
        assert_abs_diff_eq!(vac.amplitudes()[0].re, 1.0, epsilon = 1e-15);

        let psi = coherent_state(c64::new(1.0, 0.0), tr(17)).unwrap();
        assert!(coherent_state(c64::new(1.0, 0.0), tr(16)).is_err());
        assert_abs_diff_eq!(psi.to_density().n_mean(), 1.0, epsilon = 1e-10);

        let psi = coherent_state(c64::new(2.5, 0.0), tr(40)).unwrap();
        // independent evaluation of the truncated Poisson series for <n>
        let lam: f64 = 6.25;
        let mut p = (-lam).exp();
        let (mut num, mut den) = (0.0, p);
        for n in 1..40 {
            p *= lam / n as f64;
            num += n as f64 * p;
            den += p;
        }
        assert_abs_diff_eq!(psi.to_density().n_mean(), num / den, epsilon = 1e-12);
        assert_abs_diff_eq!(psi.to_density().n_mean(), 6.25, epsilon = 1e-8);
    }

    #[test]
    fn coherent_state_guard() {
        let err = coherent_state(c64::new(3.0, 0.0), tr(30)).unwrap_err();
        assert!(matches!(err, Error::TruncationInadequate { required: 37, .. }));
    }

    #[test]
    fn displacement_examples() {
        let t = tr(20);
        let d0 = displacement_operator(ZERO, t).unwrap().to_dense();
        assert!(linalg::norm_max(&(&d0 - &Mat::<c64>::identity(20, 20))) < 1e-15);

        let t = tr(60);
        let alpha = c64::new(2.5, 0.0);
        let d = displacement_operator(alpha, t).unwrap().to_dense();
        let dm = displacement_operator(-alpha, t).unwrap().to_dense();
        let prod = &d * &dm;
        let ddag = &linalg::adjoint(&d) * &d;
        let interior = 60 - (6.0 * alpha.norm()).ceil() as usize;
        for i in 0..interior {
            for j in 0..interior {
                let id = if i == j { ONE } else { ZERO };
                assert!((ddag[(i, j)] - id).norm() < 1e-8, "D†D at ({i},{j})");
            }
        }
        let inner = interior - (6.0 * alpha.norm()).ceil() as usize;
        for i in 0..inner {
            for j in 0..inner {
                let id = if i == j { ONE } else { ZERO };
                assert!((prod[(i, j)] - id).norm() < 1e-8, "D(α)D(−α) at ({i},{j})");
            }
        }

        let t = tr(40);
        let d = displacement_operator(alpha, t).unwrap();
        let col = d.apply(KetState::vacuum(t).amplitudes());
        let series = coherent_state(alpha, t).unwrap();
        for (x, y) in col.iter().zip(series.amplitudes()) {
            assert!((x - y).norm() < 1e-8);
        }
    }

    #[test]
    fn thermal_examples() {
        let rho = thermal_state(0.0, tr(5)).unwrap();
        assert_eq!(rho.population(0), 1.0);

        let rho = thermal_state(0.01, tr(10)).unwrap();
        // geometric series: <n> = Σ n q^n / Σ q^n with q = n̄/(1+n̄)
        let q: f64 = 0.01 / 1.01;
        let num: f64 = (0..10).map(|n| n as f64 * q.powi(n)).sum();
        let den: f64 = (0..10).map(|n| q.powi(n)).sum();
        assert_abs_diff_eq!(rho.n_mean(), num / den, epsilon = 1e-15);
        assert_abs_diff_eq!(rho.n_mean(), 0.01, epsilon = 1e-8);

        let rho = thermal_state(0.5, tr(40)).unwrap();
        assert_abs_diff_eq!(rho.purity(), 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(rho.n_mean(), 0.5, epsilon = 1e-8);
        rho.validate().unwrap();

        assert!(matches!(thermal_state(2.0, tr(20)), Err(Error::TruncationInadequate { .. })));
        assert!(thermal_state(-0.1, tr(20)).is_err());
    }

    #[test]
    fn squeeze_examples() {
        let t = tr(30);
        let s0 = squeeze_operator(0.0, t).unwrap().to_dense();
        assert!(linalg::norm_max(&(&s0 - &Mat::<c64>::identity(30, 30))) < 1e-15);

        let s = squeeze_operator(0.1, t).unwrap();
        let sq = s.conjugate(&DensityMatrix::vacuum(t));
        let (vx, vy) = sq.quadrature_variances();
        assert_abs_diff_eq!(vy, (0.2f64).exp() / 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(vx, (-0.2f64).exp() / 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(vy, 0.61070, epsilon = 1e-5);

        let prod = &s.to_dense() * &squeeze_operator(-0.1, t).unwrap().to_dense();
        for i in 0..20 {
            for j in 0..20 {
                let id = if i == j { ONE } else { ZERO };
                assert!((prod[(i, j)] - id).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn g2_examples() {
        assert_eq!(g2_instantaneous(&DensityMatrix::fock(1, 5).unwrap()).unwrap(), 0.0);
        let coh = coherent_state(c64::new(1.3, 0.0), tr(30)).unwrap().to_density();
        assert_abs_diff_eq!(g2_instantaneous(&coh).unwrap(), 1.0, epsilon = 1e-8);
        let th = thermal_state(0.5, tr(60)).unwrap();
        // moment sums Σ n(n−1)p_n / (Σ n p_n)² for the geometric distribution
        assert_abs_diff_eq!(g2_instantaneous(&th).unwrap(), 2.0, epsilon = 1e-6);
        for n in 1..6 {
            let g = g2_instantaneous(&DensityMatrix::fock(n, 8).unwrap()).unwrap();
            assert_abs_diff_eq!(g, (n as f64 - 1.0) / n as f64, epsilon = 1e-8);
        }
        assert!(matches!(g2_instantaneous(&DensityMatrix::vacuum(tr(4))), Err(Error::UndefinedG2 { .. })));
    }

    #[test]
    fn wigner_examples() {
        let t = tr(30);
        let w = wigner_point(&DensityMatrix::vacuum(t), ZERO).unwrap();
        assert_abs_diff_eq!(w, 2.0 / PI, epsilon = 1e-14);
        let w = wigner_point(&DensityMatrix::fock(1, 30).unwrap(), ZERO).unwrap();
        assert_abs_diff_eq!(w, -2.0 / PI, epsilon = 1e-14);
        let alpha = c64::new(0.8, -0.6);
        let coh = coherent_state(alpha, t).unwrap().to_density();
        assert_abs_diff_eq!(wigner_point(&coh, alpha).unwrap(), 2.0 / PI, epsilon = 1e-8);
    }

    #[test]
    fn density_matrix_validation() {
        let mut m = Mat::<c64>::zeros(3, 3);
        m[(0, 0)] = c64::new(0.5, 0.0);
        m[(1, 1)] = c64::new(0.5, 0.0);
        assert!(DensityMatrix::new(m.clone()).is_ok());
        m[(0, 1)] = c64::new(0.1, 0.0);
        assert!(DensityMatrix::new(m.clone()).is_err());
        m[(1, 0)] = c64::new(0.1, 0.0);
        assert!(DensityMatrix::new(m.clone()).is_ok());
        m[(0, 1)] = c64::new(0.9, 0.0);
        m[(1, 0)] = c64::new(0.9, 0.0);
        assert!(DensityMatrix::new(m).is_err());
    }
}
