//! Lindblad evolution: generators, the vectorized Liouvillian, an adaptive
//! Dormand–Prince integrator working directly on density matrices, and the
//! escape-rate fit applied to the resulting photon-number series.

use faer::Mat;
use num_complex::Complex64 as c64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{annihilation, g2_from_moments, DensityMatrix, Operator, Truncation};
use crate::linalg::{self, BandedMatrix, SparseMatrix, I, ONE, ZERO};
use crate::model::two_mode_ladders;

/// Default leakage budget on the population of the three highest Fock levels.
pub const LEAKAGE_BUDGET: f64 = 1e-6;

/// Hilbert space a generator acts on. Decides how photon-number observables
/// are read off the basis index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Space {
    Single(usize),
    /// Two modes with the given per-mode dimension; index `n1 * d + n2`.
    TwoMode(usize),
}

impl Space {
    pub fn dim(self) -> usize {
        match self {
            Space::Single(d) => d,
            Space::TwoMode(d) => d * d,
        }
    }

    /// Total photon number of basis state `k`.
    pub fn excitations(self, k: usize) -> usize {
        match self {
            Space::Single(_) => k,
            Space::TwoMode(d) => k / d + k % d,
        }
    }

    /// Whether basis state `k` has a mode in one of its three highest levels.
    pub fn near_cutoff(self, k: usize) -> bool {
        match self {
            Space::Single(d) => k + 3 >= d,
            Space::TwoMode(d) => k / d + 3 >= d || k % d + 3 >= d,
        }
    }
}

/// `dρ/dt = −i[H, ρ] + Σ_j κ_j D[L_j]ρ`.
#[derive(Clone, Debug)]
pub struct LindbladGenerator {
    h: SparseMatrix,
    jumps: Vec<(SparseMatrix, f64)>,
    space: Space,
    // H − (i/2) Σ κ L†L, used by the operator-form right-hand side
    h_eff: SparseMatrix,
}

impl LindbladGenerator {
    pub fn new(h: &Operator, jumps: Vec<(Operator, f64)>) -> Result<Self> {
        Self::with_space(h, jumps, Space::Single(h.dim()))
    }

    pub fn with_space(h: &Operator, jumps: Vec<(Operator, f64)>, space: Space) -> Result<Self> {
        let d = h.dim();
        if space.dim() != d {
            return Err(Error::DimensionMismatch { expected: space.dim(), found: d });
        }
        let h = h.to_sparse();
        let scale = h.norm_one().max(1.0);
        if h.hermiticity_defect() > 1e-12 * scale {
            return Err(Error::InvalidParameter("Hamiltonian is not Hermitian".into()));
        }
        let mut h_eff = h.clone();
        let mut js = Vec::with_capacity(jumps.len());
        for (op, rate) in jumps {
            if op.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, found: op.dim() });
            }
            if !(rate >= 0.0 && rate.is_finite()) {
                return Err(Error::InvalidParameter(format!("jump rate {rate} must be finite and >= 0")));
            }
            if rate == 0.0 {
                continue;
            }
            let l = op.to_sparse();
            let ldl = l.adjoint().matmul(&l);
            h_eff = h_eff.add(&ldl.scale(c64::new(0.0, -0.5 * rate)));
            js.push((l, rate));
        }
        Ok(LindbladGenerator { h, jumps: js, space, h_eff })
    }

    /// Single cavity with photon loss at rate `kappa`.
    pub fn single_mode(h: &Operator, kappa: f64) -> Result<Self> {
        let t = Truncation::new(h.dim())?;
        Self::new(h, vec![(annihilation(t)?, kappa)])
    }

    /// Two cavities, each losing photons at rate `kappa`.
    pub fn two_mode(h: &Operator, kappa: f64, per_mode: Truncation) -> Result<Self> {
        let (a1, a2) = two_mode_ladders(per_mode)?;
        Self::with_space(h, vec![(a1, kappa), (a2, kappa)], Space::TwoMode(per_mode.dim()))
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn hamiltonian(&self) -> &SparseMatrix {
        &self.h
    }

    pub fn jumps(&self) -> &[(SparseMatrix, f64)] {
        &self.jumps
    }

    /// Largest jump rate (zero for closed systems).
    pub fn max_rate(&self) -> f64 {
        self.jumps.iter().map(|(_, k)| *k).fold(0.0, f64::max)
    }

    /// Rough bound on the generator norm, used to pick initial steps and thresholds.
    pub fn norm_estimate(&self) -> f64 {
        2.0 * self.h_eff.norm_one() + self.jumps.iter().map(|(l, k)| k * l.norm_one().powi(2)).sum::<f64>()
    }

    /// Direct application to an arbitrary (not necessarily Hermitian) matrix.
    pub fn apply(&self, rho: &Mat<c64>) -> Mat<c64> {
        let d = self.dim();
        let x = linalg::vec_col_major(rho);
        let mut out = vec![ZERO; d * d];
        self.apply_vec(&x, &mut out);
        linalg::unvec_col_major(&out, d)
    }

    /// `out = L(x)` for a column-major matrix `x`.
    pub(crate) fn apply_vec(&self, x: &[c64], out: &mut [c64]) {
        let d = self.dim();
        out.iter_mut().for_each(|v| *v = ZERO);
        self.h_eff.left_mul_acc(x, out, -I);
        let h_eff_adj = self.h_eff.adjoint();
        h_eff_adj.right_mul_acc(x, out, I);
        let mut tmp = vec![ZERO; d * d];
        for (l, k) in &self.jumps {
            tmp.iter_mut().for_each(|v| *v = ZERO);
            l.left_mul_acc(x, &mut tmp, ONE);
            l.adjoint().right_mul_acc(&tmp, out, c64::new(*k, 0.0));
        }
    }
}

/// Sparse `d² × d²` Liouvillian in column-stacking convention,
/// `vec(AXB) = (Bᵀ ⊗ A) vec(X)`.
pub fn liouvillian_matrix(gen: &LindbladGenerator) -> SparseMatrix {
    let d = gen.dim();
    let id = SparseMatrix::identity(d);
    let mut l = SparseMatrix::kron(&id, &gen.h_eff)
        .scale(-I)
        .add(&SparseMatrix::kron(&gen.h_eff.conj(), &id).scale(I));
    for (op, k) in &gen.jumps {
        l = l.add(&SparseMatrix::kron(&op.conj(), op).scale(c64::new(*k, 0.0)));
    }
    l
}

/// Output grid `t0, t0 + stride, …, t1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub t1: f64,
    pub stride: f64,
}

impl TimeGrid {
    pub fn new(t0: f64, t1: f64, stride: f64) -> Result<Self> {
        if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
            return Err(Error::InvalidParameter(format!("time grid needs t1 > t0 (got {t0}, {t1})")));
        }
        if !(stride > 0.0 && stride.is_finite()) {
            return Err(Error::InvalidParameter(format!("output stride {stride} must be positive")));
        }
        Ok(TimeGrid { t0, t1, stride })
    }

    pub fn times(&self) -> Vec<f64> {
        let span = (self.t1 - self.t0) / self.stride;
        let n = if (span - span.round()).abs() < 1e-9 * span.max(1.0) { span.round() as usize } else { span.floor() as usize };
        let mut ts: Vec<f64> = (0..=n).map(|k| self.t0 + k as f64 * self.stride).collect();
        if let Some(last) = ts.last_mut() {
            if (self.t1 - *last).abs() < 1e-9 * self.stride {
                *last = self.t1;
            } else {
                ts.push(self.t1);
            }
        }
        ts
    }
}

/// Photon-number observables sampled on the output grid. `g2` is NaN where
/// `<n>` is below the g² floor.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ObservableSeries {
    pub times: Vec<f64>,
    pub n_mean: Vec<f64>,
    pub g2: Vec<f64>,
    pub p0: Vec<f64>,
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    pub leak_top3: Vec<f64>,
}

impl ObservableSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn push(&mut self, t: f64, obs: &Observables) {
        self.times.push(t);
        self.n_mean.push(obs.n_mean);
        self.g2.push(obs.g2);
        self.p0.push(obs.p[0]);
        self.p1.push(obs.p[1]);
        self.p2.push(obs.p[2]);
        self.leak_top3.push(obs.leak_top3);
    }
}

/// Snapshot of photon-number statistics of one state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observables {
    pub n_mean: f64,
    pub second_moment: f64,
    pub g2: f64,
    /// Probabilities of 0, 1 and 2 total excitations.
    pub p: [f64; 3],
    /// Probability of more than two excitations.
    pub p_above2: f64,
    pub leak_top3: f64,
    pub trace: f64,
}

pub fn observables(space: Space, rho: &[c64]) -> Observables {
    let d = space.dim();
    let (mut n, mut n2, mut tr, mut leak) = (0.0, 0.0, 0.0, 0.0);
    let mut p = [0.0; 3];
    let mut above = 0.0;
    for k in 0..d {
        let pk = rho[k + k * d].re;
        let e = space.excitations(k);
        tr += pk;
        n += e as f64 * pk;
        n2 += (e * e.saturating_sub(1)) as f64 * pk;
        if e < 3 {
            p[e] += pk;
        } else {
            above += pk;
        }
        if space.near_cutoff(k) {
            leak += pk;
        }
    }
    Observables {
        n_mean: n,
        second_moment: n2,
        g2: g2_from_moments(n, n2).unwrap_or(f64::NAN),
        p,
        p_above2: above,
        leak_top3: leak,
        trace: tr,
    }
}

/// Time stepper used by [`evolve_with`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Method {
    /// Adaptive Dormand–Prince 5(4) on the density matrix, right-hand side in
    /// operator form.
    DormandPrince,
    /// Fixed steps of at most `max_step` with the (4,5) Padé approximant of
    /// `exp(hL)`, applied as five shifted sparse solves. Unconditionally stable,
    /// so the step is set by the physical time scales rather than by the
    /// largest Liouvillian eigenvalue; meant for long runs at large truncation.
    Pade { max_step: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EvolveOptions {
    pub method: Method,
    /// Per-step relative tolerance of the adaptive integrator.
    pub rtol: f64,
    pub atol: f64,
    /// `None` disables the top-level population check.
    pub leakage_budget: Option<f64>,
    /// Smallest-eigenvalue check at every output point (O(d³) per point).
    pub check_positivity: bool,
    pub max_steps: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            method: Method::DormandPrince,
            rtol: 1e-8,
            atol: 1e-10,
            leakage_budget: Some(LEAKAGE_BUDGET),
            check_positivity: false,
            max_steps: 50_000_000,
        }
    }
}

/// Integration bookkeeping for one run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct EvolveStats {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub max_trace_drift: f64,
    pub max_leakage: f64,
    pub max_hermiticity_defect: f64,
    /// Most negative eigenvalue seen; only tracked with `check_positivity`.
    pub min_eigenvalue: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Evolution {
    pub series: ObservableSeries,
    pub final_state: DensityMatrix,
    pub stats: EvolveStats,
}

/// Evolve with default options and return the observable series.
pub fn evolve(gen: &LindbladGenerator, rho0: &DensityMatrix, grid: &TimeGrid) -> Result<ObservableSeries> {
    Ok(evolve_with(gen, rho0, grid, &EvolveOptions::default(), |_, _| {})?.series)
}

// Dormand–Prince 5(4) tableau; the generator is autonomous so the nodes are not needed.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights minus embedded fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Operator-form right-hand side for Hermitian `ρ`: `X + X†` with
/// `X = −i H_eff ρ + ½ Σ κ L (L ρ)†`. The result is Hermitian bit for bit, so
/// an exactly Hermitian state stays exactly Hermitian under the stage updates.
struct Rhs {
    d: usize,
    h_eff: Kernel,
    jumps: Vec<(Kernel, f64)>,
    x: Vec<c64>,
    tmp: Vec<c64>,
}

enum Kernel {
    Banded(BandedMatrix),
    Csr(SparseMatrix),
}

impl Kernel {
    fn new(s: &SparseMatrix) -> Self {
        match BandedMatrix::from_sparse(s, 24) {
            Some(b) => Kernel::Banded(b),
            None => Kernel::Csr(s.clone()),
        }
    }

    fn left_mul_acc(&self, x: &[c64], out: &mut [c64], coef: c64) {
        match self {
            Kernel::Banded(b) => b.left_mul_acc(x, out, coef),
            Kernel::Csr(s) => s.left_mul_acc(x, out, coef),
        }
    }
}

impl Rhs {
    fn new(gen: &LindbladGenerator) -> Self {
        let d = gen.dim();
        Rhs {
            d,
            h_eff: Kernel::new(&gen.h_eff),
            jumps: gen.jumps.iter().map(|(l, k)| (Kernel::new(l), *k)).collect(),
            x: vec![ZERO; d * d],
            tmp: vec![ZERO; d * d],
        }
    }

    fn eval(&mut self, rho: &[c64], out: &mut [c64]) {
        let d = self.d;
        self.x.iter_mut().for_each(|v| *v = ZERO);
        self.h_eff.left_mul_acc(rho, &mut self.x, -I);
        for (l, k) in &self.jumps {
            self.tmp.iter_mut().for_each(|v| *v = ZERO);
            l.left_mul_acc(rho, &mut self.tmp, ONE);
            adjoint_in_place(&mut self.tmp, d);
            l.left_mul_acc(&self.tmp, &mut self.x, c64::new(0.5 * k, 0.0));
        }
        for j in 0..d {
            for i in 0..d {
                out[i + j * d] = self.x[i + j * d] + self.x[j + i * d].conj();
            }
        }
    }
}

fn adjoint_in_place(m: &mut [c64], d: usize) {
    for j in 0..d {
        for i in 0..j {
            m.swap(i + j * d, j + i * d);
        }
    }
    m.iter_mut().for_each(|v| *v = v.conj());
}

/// `(ρ + ρ†)/2` in column-major storage.
fn hermitize(m: &mut [c64], d: usize) {
    for j in 0..d {
        for i in 0..=j {
            let v = 0.5 * (m[i + j * d] + m[j + i * d].conj());
            m[i + j * d] = v;
            m[j + i * d] = v.conj();
        }
    }
}

/// Adaptive Dormand–Prince 5(4) evolution, calling `observer(t, ρ)` at every
/// output time.
pub fn evolve_with<F>(
    gen: &LindbladGenerator,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
    opts: &EvolveOptions,
    mut observer: F,
) -> Result<Evolution>
where
    F: FnMut(f64, &DensityMatrix),
{
    let d = gen.dim();
    if rho0.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: rho0.dim() });
    }
    if !(opts.rtol > 0.0 && opts.atol > 0.0) {
        return Err(Error::InvalidParameter("tolerances must be positive".into()));
    }
    let n2 = d * d;
    let mut y = linalg::vec_col_major(rho0.matrix());
    hermitize(&mut y, d);

    let mut series = ObservableSeries::default();
    let mut stats = EvolveStats::default();
    let times = grid.times();

    let mut record = |t: f64, y: &[c64], series: &mut ObservableSeries, stats: &mut EvolveStats| -> Result<()> {
        let obs = observables(gen.space(), y);
        stats.max_trace_drift = stats.max_trace_drift.max((obs.trace - 1.0).abs());
        stats.max_leakage = stats.max_leakage.max(obs.leak_top3);
        let rho = DensityMatrix::from_matrix_unchecked(linalg::unvec_col_major(y, d));
        let m = rho.matrix();
        let mut herm: f64 = 0.0;
        for j in 0..d {
            for i in 0..j {
                herm = herm.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        stats.max_hermiticity_defect = stats.max_hermiticity_defect.max(herm);
        if opts.check_positivity {
            let e = rho.min_eigenvalue()?;
            stats.min_eigenvalue = Some(stats.min_eigenvalue.map_or(e, |m| m.min(e)));
        }
        series.push(t, &obs);
        observer(t, &rho);
        if let Some(budget) = opts.leakage_budget {
            if obs.leak_top3 > budget {
                return Err(Error::LeakageExceeded { time: t, leakage: obs.leak_top3, budget });
            }
        }
        if !obs.n_mean.is_finite() {
            return Err(Error::Integration { time: t, reason: "state became non-finite".into() });
        }
        Ok(())
    };

    record(grid.t0, &y, &mut series, &mut stats)?;
    match opts.method {
        Method::DormandPrince => {
            let mut rhs = Rhs::new(gen);
            let mut k: Vec<Vec<c64>> = (0..7).map(|_| vec![ZERO; n2]).collect();
            let mut stage = vec![ZERO; n2];
            let mut y_new = vec![ZERO; n2];
            let mut t = grid.t0;
            rhs.eval(&y, &mut k[0]);
            let mut h = (1.0 / gen.norm_estimate().max(1e-300)).min(grid.stride);
            let mut err_prev: f64 = 1e-4;
            let mut steps = 0usize;
            for &t_out in &times[1..] {
                while t < t_out {
                    if steps >= opts.max_steps {
                        return Err(Error::Integration { time: t, reason: format!("step limit {} reached", opts.max_steps) });
                    }
                    let remaining = t_out - t;
                    let last = h >= remaining * (1.0 - 1e-12);
                    let h_try = if last { remaining } else { h };

                    for s in 1..7 {
                        stage.copy_from_slice(&y);
                        for (j, kj) in k.iter().enumerate().take(s) {
                            let a = A[s][j] * h_try;
                            if a != 0.0 {
                                for (st, v) in stage.iter_mut().zip(kj) {
                                    *st += a * v;
                                }
                            }
                        }
                        if s == 6 {
                            y_new.copy_from_slice(&stage);
                        }
                        rhs.eval(&stage, &mut k[s]);
                    }
                    let mut err2: f64 = 0.0;
                    for i in 0..n2 {
                        let mut e = ZERO;
                        for (s, ks) in k.iter().enumerate() {
                            if E[s] != 0.0 {
                                e += E[s] * ks[i];
                            }
                        }
                        let sc = opts.atol + opts.rtol * y[i].norm_sqr().max(y_new[i].norm_sqr()).sqrt();
                        err2 = err2.max(e.norm_sqr() / (sc * sc));
                    }
                    let err = err2.sqrt() * h_try;
                    if !err.is_finite() {
                        return Err(Error::Integration { time: t, reason: "non-finite error estimate".into() });
                    }
                    steps += 1;
                    if err <= 1.0 {
                        t = if last { t_out } else { t + h_try };
                        std::mem::swap(&mut y, &mut y_new);
                        k.swap(0, 6);
                        stats.accepted_steps += 1;
                        let fac = 0.9 * err.max(1e-10).powf(-0.17) * err_prev.powf(0.04);
                        err_prev = err.max(1e-4);
                        if !last {
                            h = h_try * fac.clamp(0.2, 5.0);
                        }
                    } else {
                        stats.rejected_steps += 1;
                        h = h_try * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
                        if h < 1e-14 * t.abs().max(1.0) {
                            return Err(Error::Integration { time: t, reason: "step size underflow".into() });
                        }
                    }
                }
                record(t_out, &y, &mut series, &mut stats)?;
            }
        }
        Method::Pade { max_step } => {
            if !(max_step > 0.0 && max_step.is_finite()) {
                return Err(Error::InvalidParameter(format!("max_step {max_step} must be positive")));
            }
            let l = liouvillian_matrix(gen);
            let mut steppers: Vec<(f64, PadeStepper)> = Vec::new();
            for w in times.windows(2) {
                let span = w[1] - w[0];
                let n = ((span / max_step) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
                let h = span / n as f64;
                let idx = match steppers.iter().position(|(hh, _)| (hh - h).abs() <= 1e-12 * h) {
                    Some(i) => i,
                    None => {
                        steppers.push((h, PadeStepper::new(&l, h)?));
                        steppers.len() - 1
                    }
                };
                for _ in 0..n {
                    steppers[idx].1.step(&mut y)?;
                    hermitize(&mut y, d);
                    stats.accepted_steps += 1;
                }
                record(w[1], &y, &mut series, &mut stats)?;
            }
        }
    }

    let final_state = DensityMatrix::from_matrix_unchecked(linalg::unvec_col_major(&y, d));
    Ok(Evolution { series, final_state, stats })
}

/// Partial-fraction form of the `(k, m)` Padé approximant of `eˣ`,
/// `R(x) = Σ r_j / (x − z_j)`, returned as `(z_j, r_j)` pairs (needs `k < m`).
pub fn pade_exp_poles(k: usize, m: usize) -> Result<Vec<(c64, c64)>> {
    if k >= m {
        return Err(Error::InvalidParameter("partial fractions need numerator degree below denominator degree".into()));
    }
    let fact = |n: usize| (1..=n).map(|v| v as f64).product::<f64>();
    let p: Vec<f64> = (0..=k).map(|j| fact(k + m - j) * fact(k) / (fact(k + m) * fact(j) * fact(k - j))).collect();
    let q: Vec<f64> = (0..=m)
        .map(|j| fact(k + m - j) * fact(m) / (fact(k + m) * fact(j) * fact(m - j)) * if j % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    let lead = q[m];
    let comp = Mat::from_fn(m, m, |i, j| {
        if j == m - 1 {
            c64::new(-q[i] / lead, 0.0)
        } else if i == j + 1 {
            ONE
        } else {
            ZERO
        }
    });
    let poly = |c: &[f64], z: c64| c.iter().rev().fold(ZERO, |acc, &a| acc * z + a);
    let dq: Vec<f64> = (1..=m).map(|j| j as f64 * q[j]).collect();
    let mut out = Vec::with_capacity(m);
    for mut z in linalg::eigenvalues(&comp)? {
        for _ in 0..5 {
            z -= poly(&q, z) / poly(&dq, z);
        }
        out.push((z, poly(&p, z) / poly(&dq, z)));
    }
    // the residues are large enough that R(0) misses 1 by ~1e−13; rescale so the
    // propagator preserves the trace to rounding
    let r0: c64 = out.iter().map(|(z, r)| -r / z).sum();
    for (_, r) in out.iter_mut() {
        *r /= r0;
    }
    Ok(out)
}

struct PadeStepper {
    terms: Vec<(c64, faer::sparse::linalg::solvers::Lu<usize, c64>)>,
    n: usize,
}

impl PadeStepper {
    fn new(l: &SparseMatrix, h: f64) -> Result<Self> {
        let n = l.nrows();
        let hl = l.scale(c64::new(h, 0.0));
        let mut terms = Vec::new();
        for (z, r) in pade_exp_poles(4, 5)? {
            let shifted = hl.sub(&SparseMatrix::identity(n).scale(z)).to_faer();
            let lu = shifted
                .sp_lu()
                .map_err(|e| Error::Integration { time: 0.0, reason: format!("sparse LU failed: {e:?}") })?;
            terms.push((r, lu));
        }
        Ok(PadeStepper { terms, n })
    }

    fn step(&self, y: &mut [c64]) -> Result<()> {
        use faer::prelude::Solve;
        let mut acc = vec![ZERO; self.n];
        let mut col = Mat::<c64>::zeros(self.n, 1);
        for (r, lu) in &self.terms {
            for (i, v) in y.iter().enumerate() {
                col[(i, 0)] = *v;
            }
            lu.solve_in_place(col.as_mut());
            for (i, a) in acc.iter_mut().enumerate() {
                *a += r * col[(i, 0)];
            }
        }
        if acc.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Integration { time: f64::NAN, reason: "non-finite state after Padé step".into() });
        }
        y.copy_from_slice(&acc);
        Ok(())
    }
}

/// Result of rerunning with the step size roughly halved.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConvergenceReport {
    /// Largest difference in any recorded observable (g² excluded where undefined).
    pub max_difference: f64,
    pub converged: bool,
}

/// Step-halving check: repeats the run with the step halved (for the adaptive
/// integrator, tolerances tightened by 2⁵, since its local error scales as h⁵)
/// and compares observables.
pub fn convergence_check(
    gen: &LindbladGenerator,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
    opts: &EvolveOptions,
    threshold: f64,
) -> Result<ConvergenceReport> {
    let a = evolve_with(gen, rho0, grid, opts, |_, _| {})?.series;
    let fine = match opts.method {
        Method::DormandPrince => EvolveOptions { rtol: opts.rtol / 32.0, atol: opts.atol / 32.0, ..*opts },
        Method::Pade { max_step } => EvolveOptions { method: Method::Pade { max_step: 0.5 * max_step }, ..*opts },
    };
    let b = evolve_with(gen, rho0, grid, &fine, |_, _| {})?.series;
    let mut diff: f64 = 0.0;
    let pairs = [
        (&a.n_mean, &b.n_mean),
        (&a.p0, &b.p0),
        (&a.p1, &b.p1),
        (&a.p2, &b.p2),
        (&a.leak_top3, &b.leak_top3),
    ];
    for (x, y) in pairs {
        for (u, v) in x.iter().zip(y.iter()) {
            diff = diff.max((u - v).abs());
        }
    }
    Ok(ConvergenceReport { max_difference: diff, converged: diff <= threshold })
}

/// Weak-drive steady-state single-photon population `4x²/(1 + 8x²)`, `x = |Λ̃₃/κ|`.
pub fn steady_p1_analytic(lambda3_tilde: c64, kappa: f64) -> Result<f64> {
    if !(kappa > 0.0) {
        return Err(Error::InvalidParameter(format!("kappa = {kappa} must be positive")));
    }
    let x2 = lambda3_tilde.norm_sqr() / (kappa * kappa);
    if x2.is_infinite() {
        return Ok(0.5);
    }
    Ok(4.0 * x2 / (1.0 + 8.0 * x2))
}

/// Fit window for [`fit_escape_rate`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct FitWindow {
    /// Defaults to `5/κ`, moved later if needed so that `<n>` is monotone over the window.
    pub start: Option<f64>,
    /// Defaults to the last sample.
    pub end: Option<f64>,
    /// Long-time `<n>`. When absent it is fitted together with the rate.
    pub plateau: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EscapeFit {
    pub gamma: f64,
    pub c: f64,
    pub n_plateau: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub points: usize,
    /// False when the series never leaves its plateau; `gamma` is then 0.
    pub accepted: bool,
}

/// Minimum coefficient of determination for an accepted fit.
pub const FIT_MIN_R2: f64 = 0.98;

/// Late-time escape rate from `log|n_ss − <n>(t)| ≈ log A − Γ t`, and
/// `c = Γ κ / |δΛ̃₁|²`.
pub fn fit_escape_rate(
    series: &ObservableSeries,
    window: &FitWindow,
    delta_lambda1_abs: c64,
    kappa: f64,
) -> Result<EscapeFit> {
    if !(kappa > 0.0) {
        return Err(Error::InvalidParameter("escape-rate fit needs kappa > 0".into()));
    }
    let t_end = window.end.unwrap_or(f64::INFINITY);
    let t_min = window.start.unwrap_or(5.0 / kappa);
    let idx: Vec<usize> = (0..series.len()).filter(|&i| series.times[i] >= t_min && series.times[i] <= t_end).collect();
    if idx.len() < 4 {
        return Err(Error::FitRejected(format!("only {} samples inside the fit window", idx.len())));
    }
    let ns: Vec<f64> = idx.iter().map(|&i| series.n_mean[i]).collect();
    let ts: Vec<f64> = idx.iter().map(|&i| series.times[i]).collect();

    let scale = ns.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let spread = ns.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v)) - ns.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let flat = match window.plateau {
        Some(p) => ns.iter().all(|v| (v - p).abs() < 1e-8 * p.abs().max(1.0)),
        None => spread < 1e-8 * scale,
    };
    if flat || delta_lambda1_abs.norm() == 0.0 && spread < 1e-6 * scale {
        return Ok(EscapeFit {
            gamma: 0.0,
            c: 0.0,
            n_plateau: window.plateau.unwrap_or(ns[ns.len() - 1]),
            r_squared: 0.0,
            window: (ts[0], ts[ts.len() - 1]),
            points: ts.len(),
            accepted: false,
        });
    }

    // shrink the window from the left until <n> is monotone over it
    let rising = ns[ns.len() - 1] > ns[0];
    let mut first = ns.len() - 1;
    while first > 0 {
        let ok = if rising { ns[first - 1] <= ns[first] } else { ns[first - 1] >= ns[first] };
        if !ok {
            break;
        }
        first -= 1;
    }
    if window.start.is_some() && first > 0 {
        return Err(Error::FitRejected(format!("<n> is not monotone inside the window (turns at t = {})", ts[first])));
    }
    let (ts, ns) = (&ts[first..], &ns[first..]);
    if ts.len() < 4 {
        return Err(Error::FitRejected("monotone part of the window has fewer than 4 samples".into()));
    }

    let (gamma, n_ss, r2) = match window.plateau {
        Some(p) => {
            let mut ys = Vec::with_capacity(ns.len());
            for &n in ns {
                let gap = (p - n).abs();
                if gap <= 0.0 || (rising && n > p) || (!rising && n < p) {
                    return Err(Error::FitRejected(format!("<n> = {n} crosses the plateau {p}")));
                }
                ys.push(gap.ln());
            }
            let (slope, _, r2) = linalg::linear_fit(ts, &ys);
            (-slope, p, r2)
        }
        None => fit_exponential_approach(ts, ns)?,
    };
    if !(r2 >= FIT_MIN_R2) {
        return Err(Error::FitRejected(format!("log-linear fit has R² = {r2:.4} < {FIT_MIN_R2}")));
    }
    let dl2 = delta_lambda1_abs.norm_sqr();
    let c = if dl2 > 0.0 { gamma * kappa / dl2 } else { f64::INFINITY };
    Ok(EscapeFit {
        gamma,
        c,
        n_plateau: n_ss,
        r_squared: r2,
        window: (ts[0], ts[ts.len() - 1]),
        points: ts.len(),
        accepted: true,
    })
}

/// Fits `n(t) = n_ss − A e^{−Γ t}` by variable projection: for fixed Γ the
/// model is linear in `(n_ss, A)`; Γ is found by golden-section search on the
/// residual. Returns `(Γ, n_ss, R²)`.
fn fit_exponential_approach(ts: &[f64], ns: &[f64]) -> Result<(f64, f64, f64)> {
    let t0 = ts[0];
    let span = ts[ts.len() - 1] - t0;
    let resid = |g: f64| -> (f64, f64, f64) {
        let xs: Vec<f64> = ts.iter().map(|t| (-g * (t - t0)).exp()).collect();
        let (slope, icpt, _) = linalg::linear_fit(&xs, ns);
        let ss: f64 = xs.iter().zip(ns).map(|(x, n)| (icpt + slope * x - n).powi(2)).sum();
        (ss, icpt, slope)
    };
    let (mut lo, mut hi) = ((1e-4 / span).ln(), (200.0 / span).ln());
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let a = hi - phi * (hi - lo);
        let b = lo + phi * (hi - lo);
        if resid(a.exp()).0 < resid(b.exp()).0 {
            hi = b;
        } else {
            lo = a;
        }
    }
    let g = (0.5 * (lo + hi)).exp();
    let (ss, n_ss, _) = resid(g);
    let mean = ns.iter().sum::<f64>() / ns.len() as f64;
    let tot: f64 = ns.iter().map(|n| (n - mean).powi(2)).sum();
    let r2 = if tot > 0.0 { 1.0 - ss / tot } else { 0.0 };
    if (g * span - 1e-4).abs() < 1e-6 || (g * span - 200.0).abs() < 1e-3 {
        return Err(Error::FitRejected("rate fit ran to the edge of its search range".into()));
    }
    Ok((g, n_ss, r2))
}
