//! Long-time structure of the blockade Liouvillian: steady states, the
//! dissipative gap, the perturbative slow rate, golden-rule escape rates from
//! the blockaded subspace and the steady-state antiresonance at integer `r`.

use faer::prelude::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::Mat;
use num_complex::Complex64 as c64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{liouvillian_matrix, LindbladGenerator};
use crate::error::{Error, Result};
use crate::fock::{coherent_amplitudes, DensityMatrix, KetState, Truncation};
use crate::linalg::{self, SparseMatrix, ONE, ZERO};
use crate::model::{build_h_target, BlockadeSpec};
use crate::semiclassical::alpha_ha_perturbative;

/// Largest `‖L ρ‖_max` accepted for a steady state.
pub const STEADY_RESIDUAL_TOL: f64 = 1e-9;
/// Truncations up to this size get a dense Liouvillian eigensolve in [`dissipative_gap`].
pub const DENSE_GAP_MAX_DIM: usize = 60;
/// Eigenvalues with `|Re λ|` below this multiple of the largest jump rate count as zero.
pub const ZERO_EIGENVALUE_TOL: f64 = 1e-10;
/// Default truncation for [`fgr_escape_rate`].
pub const FGR_DEFAULT_DIM: usize = 160;

// Two steady-state candidates further apart than this (max-norm) signal a
// null space of dimension > 1.
const CANDIDATE_AGREEMENT: f64 = 1e-7;

// The bordered matrix is singular exactly when the null space is degenerate.
fn lu_error(e: impl std::fmt::Debug) -> Error {
    Error::DegenerateNullSpace(format!("bordered Liouvillian is singular ({e:?})"))
}

fn solve(lu: &Lu<usize, c64>, b: &[c64]) -> Vec<c64> {
    let rhs = Mat::<c64>::from_fn(b.len(), 1, |i, _| b[i]);
    let x = lu.solve(&rhs);
    (0..b.len()).map(|i| x[(i, 0)]).collect()
}

/// Liouvillian with the row for `ρ_kk` replaced by the trace functional.
fn bordered(l: &SparseMatrix, d: usize, k: usize) -> SparseMatrix {
    let row = k * (d + 1);
    let mut trip: Vec<(usize, usize, c64)> = l.triplets().filter(|&(i, _, _)| i != row).collect();
    trip.extend((0..d).map(|j| (row, j * (d + 1), ONE)));
    SparseMatrix::from_triplets(l.nrows(), l.ncols(), trip)
}

fn bordered_solve(l: &SparseMatrix, d: usize, k: usize) -> Result<Vec<c64>> {
    let a = bordered(l, d, k);
    let lu = a.to_faer().sp_lu().map_err(lu_error)?;
    let mut b = vec![ZERO; d * d];
    b[k * (d + 1)] = ONE;
    let mut x = solve(&lu, &b);
    // one pass of iterative refinement
    let ax = a.mul_vec(&x);
    let r: Vec<c64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
    for (xi, ci) in x.iter_mut().zip(solve(&lu, &r)) {
        *xi += ci;
    }
    Ok(x)
}

#[derive(Clone, Debug)]
pub struct SteadyState {
    pub state: DensityMatrix,
    /// `max |(L ρ)_ij|`.
    pub residual: f64,
}

/// Unique stationary state of `gen`, or an error when the null space is not
/// one-dimensional.
pub fn steady_state(gen: &LindbladGenerator) -> Result<DensityMatrix> {
    Ok(steady_state_with_residual(gen)?.state)
}

/// Null vector of the Liouvillian from an LU solve with the trace condition
/// bordered in. The solve is repeated with the trace row in a second position;
/// disagreement between the two candidates means the null space is degenerate.
pub fn steady_state_with_residual(gen: &LindbladGenerator) -> Result<SteadyState> {
    if gen.jumps().is_empty() {
        return Err(Error::DegenerateNullSpace("no dissipation: every Hamiltonian eigenprojector is stationary".into()));
    }
    let d = gen.dim();
    let l = liouvillian_matrix(gen);
    let x0 = bordered_solve(&l, d, 0)?;
    let x1 = bordered_solve(&l, d, d - 1)?;
    let finite = |x: &[c64]| x.iter().all(|v| v.re.is_finite() && v.im.is_finite());
    if !finite(&x0) || !finite(&x1) {
        return Err(Error::DegenerateNullSpace("bordered Liouvillian is singular".into()));
    }
    let spread = x0.iter().zip(&x1).fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
    if spread > CANDIDATE_AGREEMENT {
        return Err(Error::DegenerateNullSpace(format!(
            "two bordered solves give candidates differing by {spread:e}"
        )));
    }
    let m = linalg::unvec_col_major(&x0, d);
    let herm = (&m + linalg::adjoint(&m)) * faer::Scale(c64::new(0.5, 0.0));
    let tr = linalg::trace(&herm).re;
    let herm = herm * faer::Scale(c64::new(1.0 / tr, 0.0));
    let residual = linalg::norm_max(&gen.apply(&herm));
    if !(residual < STEADY_RESIDUAL_TOL) {
        return Err(Error::SteadyState(format!("residual {residual:e} above {STEADY_RESIDUAL_TOL:e}")));
    }
    let state = DensityMatrix::new(herm).map_err(|e| Error::SteadyState(e.to_string()))?;
    Ok(SteadyState { state, residual })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum GapMethod {
    /// Dense eigensolve when `dim ≤ DENSE_GAP_MAX_DIM`, shift-invert Arnoldi otherwise.
    Auto,
    Dense,
    ShiftInvert,
}

/// Slowest decaying Liouvillian mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlowMode {
    pub eigenvalue: c64,
    /// `|Re λ|`.
    pub gap: f64,
    /// `Σ n |X_nn| / Σ |X_nn|` for the eigenmatrix `X`; shows which photon
    /// numbers the mode moves population between.
    pub weight_center: f64,
}

/// Smallest nonzero `|Re λ|` over the Liouvillian spectrum.
pub fn dissipative_gap(gen: &LindbladGenerator) -> Result<f64> {
    Ok(slow_eigenvalue(gen, GapMethod::Auto)?.re.abs())
}

fn zero_tol(gen: &LindbladGenerator) -> f64 {
    ZERO_EIGENVALUE_TOL * gen.max_rate().max(1e-300)
}

/// Nonzero eigenvalue with the smallest `|Re λ|`.
pub fn slow_eigenvalue(gen: &LindbladGenerator, method: GapMethod) -> Result<c64> {
    if gen.jumps().is_empty() {
        return Err(Error::InvalidParameter("dissipative gap needs at least one jump operator".into()));
    }
    let dense = match method {
        GapMethod::Auto => gen.dim() <= DENSE_GAP_MAX_DIM,
        GapMethod::Dense => true,
        GapMethod::ShiftInvert => false,
    };
    let tol = zero_tol(gen);
    let eigs = if dense {
        linalg::eigenvalues(&liouvillian_matrix(gen).to_dense())?
    } else {
        shift_invert_eigenvalues(gen)?
    };
    let zeros = eigs.iter().filter(|z| z.re.abs() < tol).count();
    if zeros > 1 {
        log::warn!("{zeros} Liouvillian eigenvalues with |Re λ| < {tol:e}");
    }
    eigs.into_iter()
        .filter(|z| z.re.abs() >= tol)
        .min_by(|a, b| a.re.abs().total_cmp(&b.re.abs()))
        .ok_or_else(|| Error::EigenSolver("no nonzero eigenvalue found".into()))
}

fn traceless_project(x: &mut [c64], d: usize) {
    let tr: c64 = (0..d).map(|k| x[k * (d + 1)]).sum();
    let shift = tr / d as f64;
    for k in 0..d {
        x[k * (d + 1)] -= shift;
    }
}

fn dot(a: &[c64], b: &[c64]) -> c64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm2(a: &[c64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

const ARNOLDI_DIM: usize = 30;
const ARNOLDI_RESTARTS: usize = 20;

/// Converged Ritz values of `(L − σ)⁻¹` on the traceless subspace, mapped back
/// to Liouvillian eigenvalues. The steady state is excluded because `L` maps
/// traceless matrices to traceless matrices.
fn shift_invert_eigenvalues(gen: &LindbladGenerator) -> Result<Vec<c64>> {
    let d = gen.dim();
    let n = d * d;
    let l = liouvillian_matrix(gen);
    let sigma = 1e-2 * gen.max_rate();
    let shifted = l.sub(&SparseMatrix::identity(n).scale(c64::new(sigma, 0.0)));
    let lu = shifted.to_faer().sp_lu().map_err(|e| Error::EigenSolver(format!("sparse LU failed: {e:?}")))?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut start: Vec<c64> = (0..n).map(|_| c64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
    let m = ARNOLDI_DIM.min(n - 1);
    let mut best: Vec<c64> = Vec::new();
    for _ in 0..ARNOLDI_RESTARTS {
        traceless_project(&mut start, d);
        let s0 = norm2(&start);
        let mut basis: Vec<Vec<c64>> = vec![start.iter().map(|v| v / s0).collect()];
        let mut h = Mat::<c64>::zeros(m + 1, m);
        let mut k_end = m;
        for k in 0..m {
            let mut w = solve(&lu, &basis[k]);
            traceless_project(&mut w, d);
            for _ in 0..2 {
                for (j, v) in basis.iter().enumerate() {
                    let c = dot(v, &w);
                    h[(j, k)] += c;
                    w.iter_mut().zip(v).for_each(|(a, b)| *a -= c * b);
                }
            }
            let nw = norm2(&w);
            h[(k + 1, k)] = c64::new(nw, 0.0);
            if nw < 1e-14 {
                k_end = k + 1;
                break;
            }
            basis.push(w.iter().map(|v| v / nw).collect());
        }
        let hk = Mat::<c64>::from_fn(k_end, k_end, |i, j| h[(i, j)]);
        let evd = hk.eigen().map_err(|e| Error::EigenSolver(format!("{e:?}")))?;
        let thetas: Vec<c64> = (0..k_end).map(|i| evd.S()[i]).collect();
        let vecs = evd.U();
        let beta = h[(k_end, k_end - 1)].norm();
        let mut converged = Vec::new();
        let mut target: Option<(f64, usize)> = None;
        for (i, th) in thetas.iter().enumerate() {
            let resid = beta * vecs[(k_end - 1, i)].norm();
            let lam = sigma + 1.0 / th;
            if resid <= 1e-10 * th.norm() {
                converged.push(lam);
            }
            if lam.re.abs() >= zero_tol(gen) && target.is_none_or(|(mag, _)| th.norm() > mag) {
                target = Some((th.norm(), i));
            }
        }
        best = converged;
        let Some((_, ti)) = target else { break };
        let target_lam = sigma + 1.0 / thetas[ti];
        if best.iter().any(|z| (z - target_lam).norm() <= 1e-12 * target_lam.norm().max(1e-300)) {
            return Ok(best);
        }
        // restart from the Ritz vector of the eigenvalue closest to the shift
        start = vec![ZERO; n];
        for (j, v) in basis.iter().take(k_end).enumerate() {
            let c = vecs[(j, ti)];
            start.iter_mut().zip(v).for_each(|(a, b)| *a += c * b);
        }
    }
    if best.is_empty() {
        return Err(Error::EigenSolver("shift-invert Arnoldi did not converge".into()));
    }
    Ok(best)
}

/// Eigenmatrix of the slow mode by inverse iteration close to `lambda`.
fn slow_mode_vector(gen: &LindbladGenerator, lambda: c64) -> Result<Vec<c64>> {
    let d = gen.dim();
    let n = d * d;
    let l = liouvillian_matrix(gen);
    let mu = lambda + c64::new(1e-6 * lambda.norm().max(zero_tol(gen)), 0.0);
    let lu = l
        .sub(&SparseMatrix::identity(n).scale(mu))
        .to_faer()
        .sp_lu()
        .map_err(|e| Error::EigenSolver(format!("sparse LU failed: {e:?}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut x: Vec<c64> = (0..n).map(|_| c64::new(rng.random::<f64>() - 0.5, 0.0)).collect();
    for _ in 0..4 {
        traceless_project(&mut x, d);
        x = solve(&lu, &x);
        let nx = norm2(&x);
        x.iter_mut().for_each(|v| *v /= nx);
    }
    Ok(x)
}

pub fn slow_mode(gen: &LindbladGenerator, method: GapMethod) -> Result<SlowMode> {
    let eigenvalue = slow_eigenvalue(gen, method)?;
    let x = slow_mode_vector(gen, eigenvalue)?;
    let d = gen.dim();
    let space = gen.space();
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..d {
        let w = x[k * (d + 1)].norm();
        num += space.excitations(k) as f64 * w;
        den += w;
    }
    Ok(SlowMode { eigenvalue, gap: eigenvalue.re.abs(), weight_center: if den > 0.0 { num / den } else { f64::NAN } })
}

#[derive(Clone, Debug)]
pub struct SpectralReport {
    pub steady_state: DensityMatrix,
    pub steady_residual: f64,
    pub gap: f64,
    pub slow_mode: SlowMode,
}

pub fn spectral_report(gen: &LindbladGenerator, method: GapMethod) -> Result<SpectralReport> {
    let ss = steady_state_with_residual(gen)?;
    let slow_mode = slow_mode(gen, method)?;
    Ok(SpectralReport { steady_state: ss.state, steady_residual: ss.residual, gap: slow_mode.gap, slow_mode })
}

/// `κ A (1 + 2A) e^{−A}` with `A = |α_ha|²`.
pub fn slow_rate_formula(kappa: f64, alpha_sq: f64) -> f64 {
    kappa * alpha_sq * (1.0 + 2.0 * alpha_sq) * (-alpha_sq).exp()
}

/// Perturbative slow rate, with `α_ha` from the first-order semiclassical branch.
pub fn gamma_slow_perturbative(s: &BlockadeSpec) -> f64 {
    slow_rate_formula(s.kappa, alpha_ha_perturbative(s).norm_sqr())
}

/// Hamiltonian eigenpairs split into the blockade manifold `{|0⟩ … |r⟩}` and the rest.
#[derive(Clone, Debug)]
pub struct BlockadeEigensystem {
    pub blockade_energies: Vec<f64>,
    /// Columns are full-space eigenvectors.
    pub blockade_vectors: Mat<c64>,
    pub other_energies: Vec<f64>,
    pub other_vectors: Mat<c64>,
}

/// Weight a blockade eigenstate must have inside the manifold when the
/// Hamiltonian couples the manifold to the rest.
const BLOCKADE_WEIGHT_TOL: f64 = 1e-6;

/// Diagonalizes `h` treating levels `0..m` as the blockade manifold. When the
/// manifold is exactly decoupled the two blocks are diagonalized separately,
/// which keeps the split well defined even if energies coincide across blocks.
pub fn blockade_eigensystem(h: &Mat<c64>, m: usize) -> Result<BlockadeEigensystem> {
    let d = h.nrows();
    if m == 0 || m >= d {
        return Err(Error::BlockadeIdentification(format!("manifold size {m} invalid for dim {d}")));
    }
    let scale = linalg::norm_max(h).max(1e-300);
    let mut coupling = 0.0f64;
    for i in 0..m {
        for j in m..d {
            coupling = coupling.max(h[(i, j)].norm()).max(h[(j, i)].norm());
        }
    }
    let embed = |vals: Vec<f64>, vecs: Mat<c64>, offset: usize| {
        let k = vecs.ncols();
        let full = Mat::<c64>::from_fn(d, k, |i, j| if i >= offset && i < offset + vecs.nrows() { vecs[(i - offset, j)] } else { ZERO });
        (vals, full)
    };
    if coupling <= 1e-14 * scale {
        let hb = Mat::<c64>::from_fn(m, m, |i, j| h[(i, j)]);
        let hr = Mat::<c64>::from_fn(d - m, d - m, |i, j| h[(i + m, j + m)]);
        let (bv, bvec) = linalg::hermitian_eigen(&hb)?;
        let (rv, rvec) = linalg::hermitian_eigen(&hr)?;
        let (blockade_energies, blockade_vectors) = embed(bv, bvec, 0);
        let (other_energies, other_vectors) = embed(rv, rvec, m);
        return Ok(BlockadeEigensystem { blockade_energies, blockade_vectors, other_energies, other_vectors });
    }
    let (vals, vecs) = linalg::hermitian_eigen(h)?;
    let mut inside = Vec::new();
    let mut outside = Vec::new();
    for k in 0..d {
        let w: f64 = (0..m).map(|i| vecs[(i, k)].norm_sqr()).sum();
        if w > 1.0 - BLOCKADE_WEIGHT_TOL {
            inside.push(k);
        } else {
            outside.push(k);
        }
    }
    if inside.len() != m {
        return Err(Error::BlockadeIdentification(format!(
            "found {} eigenstates within {BLOCKADE_WEIGHT_TOL:e} of the {m}-level manifold",
            inside.len()
        )));
    }
    let pick = |idx: &[usize]| {
        (idx.iter().map(|&k| vals[k]).collect::<Vec<_>>(), Mat::<c64>::from_fn(d, idx.len(), |i, j| vecs[(i, idx[j])]))
    };
    let (blockade_energies, blockade_vectors) = pick(&inside);
    let (other_energies, other_vectors) = pick(&outside);
    Ok(BlockadeEigensystem { blockade_energies, blockade_vectors, other_energies, other_vectors })
}

fn blockade_size(s: &BlockadeSpec) -> Result<usize> {
    if !(s.r >= 0.0 && s.r.fract() == 0.0) {
        return Err(Error::InvalidParameter(format!("blockade manifold needs integer r, got {}", s.r)));
    }
    Ok(s.r as usize + 1)
}

/// Golden-rule escape from one blockade eigenstate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EscapeChannel {
    pub energy: f64,
    pub gamma: f64,
    pub c: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FgrEscape {
    /// Average over the blockade eigenstates.
    pub gamma_esc: f64,
    pub c: f64,
    pub channels: Vec<EscapeChannel>,
    /// Unblockaded levels merged because their spacing was below their width.
    pub grouped_levels: usize,
    pub dim: usize,
}

/// [`fgr_escape_rate_with`] at [`FGR_DEFAULT_DIM`].
pub fn fgr_escape_rate(s: &BlockadeSpec) -> Result<FgrEscape> {
    fgr_escape_rate_with(s, Truncation::new(FGR_DEFAULT_DIM)?)
}

/// Escape rate from the blockade manifold treating `δΛ̃₁ a† + h.c.` as a
/// perturbation of the matched Hamiltonian. Each unblockaded eigenstate `j`
/// is lifetime broadened with `γ_j = κ⟨n⟩_j`:
///
/// `Γ_b = Σ_j |⟨φ_j|δΛ̃₁ a†|φ_b⟩|² (γ_j/2) / ((E_j − E_b)² + γ_j²/4)`,
///
/// and `c = Γ κ / |δΛ̃₁|²`. Neighbouring levels closer than their width are
/// merged first into the single state they jointly receive from `a†|φ_b⟩`,
/// with that state's mean energy and decay rate.
pub fn fgr_escape_rate_with(s: &BlockadeSpec, t: Truncation) -> Result<FgrEscape> {
    if !(s.kappa > 0.0) {
        return Err(Error::InvalidParameter("golden-rule escape needs kappa > 0".into()));
    }
    let m = blockade_size(s)?;
    let mut s0 = *s;
    s0.delta_lambda1 = ZERO;
    let h0 = build_h_target(&s0, t).to_dense();
    let sys = blockade_eigensystem(&h0, m)?;
    let d = t.dim();
    let others = sys.other_energies.len();

    let widths: Vec<f64> = (0..others)
        .map(|j| s.kappa * (0..d).map(|n| n as f64 * sys.other_vectors[(n, j)].norm_sqr()).sum::<f64>())
        .collect();
    let mut order: Vec<usize> = (0..others).collect();
    order.sort_by(|&a, &b| sys.other_energies[a].total_cmp(&sys.other_energies[b]));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &j in &order {
        match groups.last_mut() {
            Some(g) => {
                let last = *g.last().unwrap();
                if sys.other_energies[j] - sys.other_energies[last] < widths[j].max(widths[last]) {
                    g.push(j);
                } else {
                    groups.push(vec![j]);
                }
            }
            None => groups.push(vec![j]),
        }
    }
    let grouped_levels = groups.iter().filter(|g| g.len() > 1).map(|g| g.len()).sum();

    let dl = s.delta_lambda1_abs().norm_sqr();
    let mut channels = Vec::with_capacity(m);
    for b in 0..m {
        // a† |φ_b⟩
        let mut raised = vec![ZERO; d];
        for n in 0..d - 1 {
            raised[n + 1] = ((n + 1) as f64).sqrt() * sys.blockade_vectors[(n, b)];
        }
        let amps: Vec<c64> = (0..others)
            .map(|j| (0..d).map(|n| sys.other_vectors[(n, j)].conj() * raised[n]).sum())
            .collect();
        let eb = sys.blockade_energies[b];
        let mut c = 0.0;
        for g in &groups {
            let w: f64 = g.iter().map(|&j| amps[j].norm_sqr()).sum();
            if w == 0.0 {
                continue;
            }
            // a group acts as one level: the coherent sum of its members
            // weighted by their matrix elements
            let e = g.iter().map(|&j| amps[j].norm_sqr() * sys.other_energies[j]).sum::<f64>() / w;
            let gam = if g.len() == 1 {
                widths[g[0]]
            } else {
                let n_mean: f64 = (0..d)
                    .map(|n| {
                        let v: c64 = g.iter().map(|&j| amps[j] * sys.other_vectors[(n, j)]).sum();
                        n as f64 * v.norm_sqr()
                    })
                    .sum();
                s.kappa * n_mean / w
            };
            c += w * (0.5 * gam) / ((e - eb).powi(2) + 0.25 * gam * gam);
        }
        c *= s.kappa;
        channels.push(EscapeChannel { energy: eb, gamma: c * dl / s.kappa, c });
    }
    let c = channels.iter().map(|ch| ch.c).sum::<f64>() / m as f64;
    Ok(FgrEscape { gamma_esc: c * dl / s.kappa, c, channels, grouped_levels, dim: d })
}

/// `⟨n⟩` of the steady state at each `r`, evaluated in parallel; order follows `r_grid`.
pub fn steady_photon_number(
    lambda3_tilde: c64,
    u: f64,
    kappa: f64,
    r_grid: &[f64],
    t: Truncation,
) -> Result<Vec<f64>> {
    r_grid
        .par_iter()
        .map(|&r| {
            let s = BlockadeSpec::new(lambda3_tilde, r, u, kappa);
            let gen = LindbladGenerator::single_mode(&build_h_target(&s, t), kappa)?;
            Ok(steady_state(&gen)?.n_mean())
        })
        .collect()
}

/// Points `center ± offset` with offsets log-spaced in `[min_offset, max_offset]`,
/// plus `center` itself, ascending.
pub fn antiresonance_grid(center: f64, min_offset: f64, max_offset: f64, per_side: usize) -> Result<Vec<f64>> {
    if !(min_offset > 0.0 && max_offset > min_offset && per_side >= 2) {
        return Err(Error::InvalidParameter("antiresonance grid needs 0 < min_offset < max_offset and per_side >= 2".into()));
    }
    let (a, b) = (min_offset.ln(), max_offset.ln());
    let offs: Vec<f64> = (0..per_side).map(|k| (a + (b - a) * k as f64 / (per_side - 1) as f64).exp()).collect();
    let mut grid: Vec<f64> = offs.iter().rev().map(|o| center - o).collect();
    grid.push(center);
    grid.extend(offs.iter().map(|o| center + o));
    Ok(grid)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DipWidth {
    pub floor: f64,
    pub floor_r: f64,
    pub plateau: f64,
    pub half_level: f64,
    pub left: f64,
    pub right: f64,
    pub fwhm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AntiresonanceScan {
    pub r: Vec<f64>,
    pub n_ss: Vec<f64>,
    pub width: DipWidth,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn half_crossings(r: &[f64], n: &[f64], c: usize, half: f64) -> Result<(f64, f64)> {
    let cross = |i: usize, j: usize| r[i] + (half - n[i]) * (r[j] - r[i]) / (n[j] - n[i]);
    let mut right = None;
    for j in c + 1..r.len() {
        if n[j] >= half {
            if j == c + 1 {
                return Err(Error::UnresolvedDip("right half-depth crossing falls in the first grid interval".into()));
            }
            right = Some(cross(j - 1, j));
            break;
        }
    }
    let mut left = None;
    for j in (0..c).rev() {
        if n[j] >= half {
            if j + 1 == c {
                return Err(Error::UnresolvedDip("left half-depth crossing falls in the first grid interval".into()));
            }
            left = Some(cross(j + 1, j));
            break;
        }
    }
    match (left, right) {
        (Some(l), Some(r)) => Ok((l, r)),
        _ => Err(Error::UnresolvedDip("photon number never reaches half depth inside the grid".into())),
    }
}

/// Full width at half depth of the dip in `n(r)` centred on the grid point
/// `center`. The baseline is the median of `n` over the grid, then the median
/// over `|r − center| > 10 Δr` using the first width estimate.
pub fn dip_width(r: &[f64], n: &[f64], center: f64) -> Result<DipWidth> {
    if r.len() != n.len() || r.len() < 5 {
        return Err(Error::InvalidParameter("dip width needs matching r and n arrays of at least 5 points".into()));
    }
    if r.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("r grid must be strictly increasing".into()));
    }
    let c = (0..r.len()).min_by(|&a, &b| (r[a] - center).abs().total_cmp(&(r[b] - center).abs())).unwrap();
    if (r[c] - center).abs() > 1e-12 * center.abs().max(1.0) {
        return Err(Error::InvalidParameter(format!("grid does not contain r = {center}")));
    }
    if c == 0 || c + 1 == n.len() {
        return Err(Error::UnresolvedDip("dip centre sits on the edge of the grid".into()));
    }
    let floor = n[c];
    let mut plateau = median(n.to_vec());
    let mut half = 0.5 * (plateau + floor);
    let (mut left, mut right) = half_crossings(r, n, c, half)?;
    let far: Vec<f64> = (0..n.len()).filter(|&k| (r[k] - r[c]).abs() > 10.0 * (right - left)).map(|k| n[k]).collect();
    if far.len() >= 3 {
        plateau = median(far);
        half = 0.5 * (plateau + floor);
        (left, right) = half_crossings(r, n, c, half)?;
    }
    Ok(DipWidth { floor, floor_r: r[c], plateau, half_level: half, left, right, fwhm: right - left })
}

/// Steady-state `⟨n⟩` along `r_grid` and the width of the dip it contains,
/// centred on the integer nearest the lowest point (which must be on the grid).
pub fn antiresonance_scan(
    lambda3_tilde: c64,
    u: f64,
    kappa: f64,
    r_grid: &[f64],
    t: Truncation,
) -> Result<AntiresonanceScan> {
    let n_ss = steady_photon_number(lambda3_tilde, u, kappa, r_grid, t)?;
    let lowest = (0..n_ss.len()).min_by(|&a, &b| n_ss[a].total_cmp(&n_ss[b])).ok_or_else(|| {
        Error::InvalidParameter("empty r grid".into())
    })?;
    let width = dip_width(r_grid, &n_ss, r_grid[lowest].round())?;
    Ok(AntiresonanceScan { r: r_grid.to_vec(), n_ss, width })
}

/// Coherent-state approximation to the metastable high-amplitude eigenstate.
#[derive(Clone, Debug)]
pub struct MetastableAnsatz {
    pub alpha_ha: c64,
    /// `|α_ha⟩` with its `|0⟩` and `|1⟩` components removed, normalized.
    pub ket_phi: KetState,
    /// `𝒩 = √(1 − e^{−|α|²}(1 + |α|²))`.
    pub normalization: f64,
    /// Index-free description of the eigenstate of `H_target` closest to `|φ⟩`.
    pub eigen_energy: f64,
    pub eigen_n_mean: f64,
    /// `|⟨φ|Φ⟩|²`.
    pub phi_overlap: f64,
    /// `|⟨α_ha|Φ⟩|²`.
    pub coherent_overlap: f64,
    /// Energies of the blockade-manifold eigenstates, ascending.
    pub blockade_energies: Vec<f64>,
}

pub fn metastable_ansatz(s: &BlockadeSpec, t: Truncation) -> Result<MetastableAnsatz> {
    let alpha_ha = alpha_ha_perturbative(s);
    t.check_displacement(alpha_ha)?;
    let coherent = coherent_amplitudes(alpha_ha, t.dim())?;
    let mut amps = coherent.amplitudes().to_vec();
    amps[0] = ZERO;
    amps[1] = ZERO;
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    let ket_phi = KetState::normalized(amps)?;

    let m = blockade_size(s)?;
    let h = build_h_target(s, t).to_dense();
    let sys = blockade_eigensystem(&h, m)?;
    let d = t.dim();
    let overlap = |v: &[c64], k: usize| (0..d).map(|n| v[n].conj() * sys.other_vectors[(n, k)]).sum::<c64>().norm_sqr();
    let best = (0..sys.other_energies.len())
        .max_by(|&a, &b| overlap(ket_phi.amplitudes(), a).total_cmp(&overlap(ket_phi.amplitudes(), b)))
        .ok_or_else(|| Error::BlockadeIdentification("no states outside the blockade manifold".into()))?;
    let eigen_n_mean = (0..d).map(|n| n as f64 * sys.other_vectors[(n, best)].norm_sqr()).sum();
    let mut blockade_energies = sys.blockade_energies.clone();
    blockade_energies.sort_by(f64::total_cmp);
    Ok(MetastableAnsatz {
        alpha_ha,
        normalization: norm,
        eigen_energy: sys.other_energies[best],
        eigen_n_mean,
        phi_overlap: overlap(ket_phi.amplitudes(), best),
        coherent_overlap: overlap(coherent.amplitudes(), best),
        ket_phi,
        blockade_energies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{evolve_with, steady_p1_analytic, EvolveOptions, Method, TimeGrid};
    use crate::fock::{g2_from_moments, Operator};
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> c64 {
        c64::new(re, 0.0)
    }

    fn target_gen(s: &BlockadeSpec, dim: usize) -> LindbladGenerator {
        let t = Truncation::new(dim).unwrap();
        LindbladGenerator::single_mode(&build_h_target(s, t), s.kappa).unwrap()
    }

    #[test]
    fn pure_loss_relaxes_to_vacuum() {
        let gen = LindbladGenerator::single_mode(&Operator::zeros(8), 1.3).unwrap();
        let ss = steady_state(&gen).unwrap();
        assert_abs_diff_eq!(ss.population(0), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dissipative_gap(&gen).unwrap(), 0.65, epsilon = 1e-10);
        let si = slow_eigenvalue(&gen, GapMethod::ShiftInvert).unwrap();
        assert_abs_diff_eq!(si.re, -0.65, epsilon = 1e-10);
    }

    #[test]
    fn lossless_generator_is_degenerate() {
        let t = Truncation::new(4).unwrap();
        let h = crate::fock::number(t);
        let gen = LindbladGenerator::new(&h, vec![]).unwrap();
        assert!(matches!(steady_state(&gen), Err(Error::DegenerateNullSpace(_))));
    }

    #[test]
    fn two_decoupled_sinks_are_degenerate() {
        // Loss inside two disjoint blocks leaves two stationary states.
        let d = 4;
        let mut jump = Mat::<c64>::zeros(d, d);
        jump[(0, 1)] = ONE;
        jump[(2, 3)] = ONE;
        let gen = LindbladGenerator::new(&Operator::zeros(d), vec![(Operator::from_dense(jump), 1.0)]).unwrap();
        assert!(matches!(steady_state(&gen), Err(Error::DegenerateNullSpace(_))));
    }

    #[test]
    fn weak_drive_blockade() {
        let s = BlockadeSpec::new(c(0.5), 1.0, 0.4, 1.0);
        let ss = steady_state_with_residual(&target_gen(&s, 30)).unwrap();
        assert!(ss.residual < STEADY_RESIDUAL_TOL);
        let rho = ss.state;
        assert_abs_diff_eq!(rho.population(1), 1.0 / 3.0, epsilon = 1e-4);
        assert_abs_diff_eq!(rho.population(1), steady_p1_analytic(c(0.5), 1.0).unwrap(), epsilon = 1e-10);
        let above: f64 = rho.populations()[2..].iter().sum();
        assert!(above < 1e-9);
        for l3 in [0.25, 1.0, 3.0] {
            let s = BlockadeSpec::new(c(l3), 1.0, 0.2, 1.0);
            let rho = steady_state(&target_gen(&s, 20)).unwrap();
            let g2 = g2_from_moments(rho.n_mean(), rho.second_factorial_moment()).unwrap();
            assert!(g2.abs() < 1e-8, "g2 = {g2}");
        }
    }

    #[test]
    fn integer_r_truncates_support() {
        let s = BlockadeSpec::new(c(0.7), 2.0, 0.3, 1.0);
        let rho = steady_state(&target_gen(&s, 24)).unwrap();
        let above: f64 = rho.populations()[3..].iter().sum();
        assert!(above < 1e-9);
        assert!(rho.population(2) > 1e-3);
    }

    #[test]
    fn steady_state_matches_long_time_evolution() {
        let s = BlockadeSpec::new(c(0.8), 1.0, 1.0, 1.0).with_mismatch(0.3);
        let gen = target_gen(&s, 16);
        let ss = steady_state(&gen).unwrap();
        let gap = dissipative_gap(&gen).unwrap();
        let t_end = 50.0 / gap.min(1.0);
        let grid = TimeGrid::new(0.0, t_end, t_end).unwrap();
        let opts = EvolveOptions { method: Method::Pade { max_step: 0.5 }, leakage_budget: None, ..Default::default() };
        let rho0 = DensityMatrix::vacuum(Truncation::new(16).unwrap());
        let ev = evolve_with(&gen, &rho0, &grid, &opts, |_, _| {}).unwrap();
        assert!(ev.final_state.trace_distance(&ss).unwrap() < 1e-4);
    }

    #[test]
    fn spectrum_closed_under_conjugation() {
        let s = BlockadeSpec::new(c64::new(0.6, 0.3), 1.0, 0.5, 0.4).with_mismatch(0.1);
        let gen = target_gen(&s, 6);
        let eigs = linalg::eigenvalues(&liouvillian_matrix(&gen).to_dense()).unwrap();
        for z in &eigs {
            let partner = eigs.iter().map(|w| (w - z.conj()).norm()).fold(f64::INFINITY, f64::min);
            assert!(partner < 1e-8, "no conjugate partner for {z}");
        }
    }

    #[test]
    fn dense_and_shift_invert_agree() {
        let s = BlockadeSpec::new(c(1.0), 1.0, 0.5, 0.1);
        let gen = target_gen(&s, 30);
        let dense = slow_eigenvalue(&gen, GapMethod::Dense).unwrap();
        let si = slow_eigenvalue(&gen, GapMethod::ShiftInvert).unwrap();
        assert!((dense - si).norm() < 1e-6 * dense.norm(), "{dense} vs {si}");
        assert!(dense.re < 0.0);
        let mode = slow_mode(&gen, GapMethod::ShiftInvert).unwrap();
        // the slow mode exchanges population with the high-amplitude state
        assert!(mode.weight_center > 2.0);
    }

    #[test]
    fn slow_rate_formula_values() {
        assert_abs_diff_eq!(slow_rate_formula(1.0, 9.0), 9.0 * 19.0 * (-9.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(slow_rate_formula(1.0, 9.0), 0.0211, epsilon = 1e-4);
        let ratio = slow_rate_formula(1.0, 9.0) / slow_rate_formula(1.0, 16.0);
        assert_abs_diff_eq!(ratio, (9.0 * 19.0) / (16.0 * 33.0) * 7.0f64.exp(), epsilon = 1e-9);
        let mut last = f64::INFINITY;
        for ratio in [0.5, 0.4, 0.3, 0.2, 0.1] {
            let g = gamma_slow_perturbative(&BlockadeSpec::new(c(1.0), 1.0, ratio, 0.1));
            assert!(g < last);
            last = g;
        }
    }

    #[test]
    fn blockade_fragility() {
        let s = BlockadeSpec::new(c(1.0), 1.0, 0.5, 0.1);
        let base = steady_state(&target_gen(&s, 40)).unwrap().n_mean();
        let dl = 10.0 * gamma_slow_perturbative(&s) / s.kappa;
        let broken = steady_state(&target_gen(&s.with_mismatch(dl), 40)).unwrap().n_mean();
        assert!(broken > 5.0 * base, "{broken} vs {base}");
    }

    #[test]
    fn fgr_scales_quadratically() {
        let s = BlockadeSpec::new(c(10.0), 1.0, 3.0, 1.0);
        let t = Truncation::new(60).unwrap();
        let a = fgr_escape_rate_with(&s.with_mismatch(0.01), t).unwrap();
        let b = fgr_escape_rate_with(&s.with_mismatch(0.02), t).unwrap();
        assert_abs_diff_eq!(b.gamma_esc / a.gamma_esc, 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a.c, b.c, epsilon = 1e-15);
        assert_eq!(a.channels.len(), 2);
        let mut e: Vec<f64> = a.channels.iter().map(|c| c.energy).collect();
        e.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(e[0], -10.0, epsilon = 1e-10);
        assert_abs_diff_eq!(e[1], 10.0, epsilon = 1e-10);
    }

    #[test]
    fn fgr_strong_loss_limit() {
        // κ ≫ Λ̃₃: only |2⟩ matters, broadened by 2κ, giving c → 1
        let s = BlockadeSpec::new(c(1e-3), 1.0, 1e-4, 1.0);
        let f = fgr_escape_rate_with(&s, Truncation::new(12).unwrap()).unwrap();
        assert_abs_diff_eq!(f.c, 1.0, epsilon = 1e-3);
    }

    #[test]
    fn fgr_rejects_non_integer_r() {
        let s = BlockadeSpec::new(c(1.0), 1.5, 0.2, 0.1);
        assert!(fgr_escape_rate_with(&s, Truncation::new(20).unwrap()).is_err());
    }

    #[test]
    fn coupled_manifold_identification() {
        // a residual two-photon drive couples |0⟩ to |2⟩, so identification must fail
        let mut s = BlockadeSpec::new(c(1.0), 1.0, 0.2, 0.1);
        s.lambda2_error = c(0.3);
        let h = build_h_target(&s, Truncation::new(20).unwrap()).to_dense();
        assert!(matches!(blockade_eigensystem(&h, 2), Err(Error::BlockadeIdentification(_))));
    }

    #[test]
    fn metastable_ansatz_properties() {
        // κ only shifts α_ha by −iκ/2Λ̃₃; keep it small so the comparison is
        // with the coherent state the Hamiltonian eigenstate approximates
        let s = BlockadeSpec::new(c(1.0), 1.0, 0.2, 0.01);
        let t = Truncation::new(120).unwrap();
        let m = metastable_ansatz(&s, t).unwrap();
        let a = m.ket_phi.amplitudes();
        assert!(a[0].norm() < 1e-12 && a[1].norm() < 1e-12);
        let norm: f64 = a.iter().map(|v| v.norm_sqr()).sum();
        assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.blockade_energies[0], -1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(m.blockade_energies[1], 1.0, epsilon = 1e-10);
        assert!(m.coherent_overlap > 0.96, "overlap {}", m.coherent_overlap);
        let a2 = m.alpha_ha.norm_sqr();
        assert!((m.eigen_n_mean - a2).abs() < 0.1 * a2);
        let expected = (1.0 - (-a2).exp() * (1.0 + a2)).sqrt();
        assert_abs_diff_eq!(m.normalization, expected, epsilon = 1e-10);
    }

    #[test]
    fn dip_width_of_a_lorentzian() {
        // n(r) = 10 − 9.5 / (1 + ((r−1)/w)²) has floor 0.5, plateau 10, FWHM 2w
        let w = 1e-3;
        let grid = antiresonance_grid(1.0, 1e-6, 0.5, 80).unwrap();
        let n: Vec<f64> = grid.iter().map(|r| 10.0 - 9.5 / (1.0 + ((r - 1.0) / w).powi(2))).collect();
        let dw = dip_width(&grid, &n, 1.0).unwrap();
        assert_abs_diff_eq!(dw.floor, 0.5, epsilon = 1e-12);
        assert!((dw.plateau - 10.0).abs() < 0.05);
        assert!((dw.fwhm - 2.0 * w).abs() < 0.02 * 2.0 * w, "{}", dw.fwhm);
    }

    #[test]
    fn coarse_grid_is_unresolved() {
        let grid = antiresonance_grid(1.0, 0.1, 0.5, 5).unwrap();
        let n: Vec<f64> = grid.iter().map(|r| 10.0 - 9.5 / (1.0 + ((r - 1.0) / 1e-4).powi(2))).collect();
        assert!(matches!(dip_width(&grid, &n, 1.0), Err(Error::UnresolvedDip(_))));
    }

    #[test]
    fn antiresonance_floor_is_weak_drive_population() {
        let grid = antiresonance_grid(1.0, 1e-7, 0.5, 12).unwrap();
        let t = Truncation::new(48).unwrap();
        let scan = antiresonance_scan(c(1.0), 0.4, 0.1, &grid, t).unwrap();
        let p1 = steady_p1_analytic(c(1.0), 0.1).unwrap();
        assert_abs_diff_eq!(scan.width.floor, p1, epsilon = 1e-6);
        assert_eq!(scan.width.floor_r, 1.0);
        // off resonance the cavity sits near the high-amplitude branch
        let a2 = alpha_ha_perturbative(&BlockadeSpec::new(c(1.0), 1.0, 0.4, 0.1)).norm_sqr();
        assert!(scan.width.plateau > 0.5 * a2 && scan.width.plateau < 2.0 * a2, "{scan:?}");
        assert!(scan.width.fwhm > 0.0 && scan.width.fwhm < 0.1);
    }
}
