//! Three-step Fock-state generation: noisy displacement into the blockade
//! frame, blockade evolution, and displacement back, with the final
//! displacement's noise accounted for through exact moment shifts.

use faer::Mat;
use num_complex::Complex64 as c64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{evolve_with, EvolveOptions, LindbladGenerator, TimeGrid};
use crate::error::{Error, Result};
use crate::fock::{self, g2_from_moments, squeeze_operator, thermal_state, DensityMatrix, Operator, Truncation};
use crate::model::{build_h_target, BlockadeSpec};

/// Output points used to locate the first crossing of the target population.
const SCAN_POINTS: usize = 200;
/// Bisection stops once `|P1(τ) − target|` is below this.
pub const P1_TOLERANCE: f64 = 1e-7;
const BISECTION_MAX_ITER: usize = 80;
/// `|⟨a⟩|²` (and `|⟨aa⟩|`) above this fraction of `⟨n⟩` triggers a warning
/// that the moment-shift bound is being used outside its assumptions.
const COHERENCE_WARN_FRACTION: f64 = 0.01;
const MC_CHUNK: usize = 4096;

/// Error model of the two lab-frame displacements.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    None,
    /// Complex Gaussian displacement error with `E|β|² = σ²`.
    Additive { sigma: f64 },
    /// Error proportional to the displacement, `β = α_b ε` with `E|ε|² = σ²`.
    Multiplicative { sigma: f64 },
    /// Phase jitter of the displacement, `α_b → α_b e^{iφ}` with `φ ~ N(0, σ²)`.
    Phase { sigma: f64 },
}

impl NoiseModel {
    pub fn sigma(&self) -> f64 {
        match *self {
            NoiseModel::None => 0.0,
            NoiseModel::Additive { sigma } | NoiseModel::Multiplicative { sigma } | NoiseModel::Phase { sigma } => sigma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.sigma();
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise sigma {s} must be finite and >= 0")));
        }
        Ok(())
    }

    /// Phase diffusion `|α_b|²σ²`; zero for the other kinds.
    pub fn diffusion(&self, alpha_b: c64) -> f64 {
        match *self {
            NoiseModel::Phase { sigma } => alpha_b.norm_sqr() * sigma * sigma,
            _ => 0.0,
        }
    }

    /// Thermal occupation injected by one noisy displacement.
    pub fn nbar_th(&self, alpha_b: c64) -> f64 {
        match *self {
            NoiseModel::None => 0.0,
            NoiseModel::Additive { sigma } => sigma * sigma,
            NoiseModel::Multiplicative { sigma } => alpha_b.norm_sqr() * sigma * sigma,
            NoiseModel::Phase { .. } => 0.5 * ((1.0 + 2.0 * self.diffusion(alpha_b)).sqrt() - 1.0),
        }
    }

    /// Squeezing that restores the in-phase quadrature to vacuum width; phase kind only.
    pub fn xi(&self, alpha_b: c64) -> Option<f64> {
        match self {
            NoiseModel::Phase { .. } => Some(0.25 * (1.0 + 2.0 * self.diffusion(alpha_b)).ln()),
            _ => None,
        }
    }

    /// Gaussian statistics of the random displacement `β` left in the
    /// displaced frame, to second order in the noise.
    pub fn displacement_moments(&self, alpha_b: c64) -> DisplacementMoments {
        match *self {
            NoiseModel::None => DisplacementMoments::default(),
            NoiseModel::Additive { .. } | NoiseModel::Multiplicative { .. } => {
                let v = self.nbar_th(alpha_b);
                DisplacementMoments { abs2: v, square: c64::new(0.0, 0.0), abs4: 2.0 * v * v }
            }
            NoiseModel::Phase { .. } => {
                // β = i e^{iθ} η with real η, ⟨η²⟩ = D/2, θ = arg α_b.
                let half = 0.5 * self.diffusion(alpha_b);
                let rot = c64::from_polar(1.0, 2.0 * alpha_b.arg());
                DisplacementMoments { abs2: half, square: -rot * half, abs4: 3.0 * half * half }
            }
        }
    }
}

/// `⟨|β|²⟩`, `⟨β²⟩`, `⟨|β|⁴⟩` of a zero-mean classical displacement.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct DisplacementMoments {
    pub abs2: f64,
    pub square: c64,
    pub abs4: f64,
}

/// How long the blockade evolution runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockDuration {
    Fixed(f64),
    TargetP1(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProtocolConfig {
    pub spec: BlockadeSpec,
    pub duration: BlockDuration,
    pub noise: NoiseModel,
    pub truncation: Truncation,
}

impl ProtocolConfig {
    pub fn alpha_b(&self) -> c64 {
        self.spec.lambda3_tilde / (2.0 * self.spec.u)
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.spec;
        if !(s.u > 0.0 && s.u.is_finite()) {
            return Err(Error::InvalidParameter(format!("U = {} must be positive", s.u)));
        }
        if !(s.kappa >= 0.0 && s.kappa.is_finite()) {
            return Err(Error::InvalidParameter(format!("kappa = {} must be >= 0", s.kappa)));
        }
        if !(s.lambda3_tilde.norm() > 0.0) {
            return Err(Error::InvalidParameter("Lambda3Tilde must be nonzero".into()));
        }
        match self.duration {
            BlockDuration::Fixed(tau) if !(tau > 0.0 && tau.is_finite()) => {
                return Err(Error::InvalidParameter(format!("tau_block = {tau} must be positive")))
            }
            BlockDuration::TargetP1(p) if !(p > 0.0 && p <= 1.0) => {
                return Err(Error::InvalidParameter(format!("target_P1 = {p} must lie in (0, 1]")))
            }
            _ => {}
        }
        self.noise.validate()
    }
}

/// Normal-ordered moments of the output state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Moments {
    pub n_mean: f64,
    pub second: f64,
    pub mean_a: c64,
    pub mean_aa: c64,
}

impl Moments {
    pub fn of(rho: &DensityMatrix) -> Self {
        Moments { n_mean: rho.n_mean(), second: rho.second_factorial_moment(), mean_a: rho.mean_a(), mean_aa: rho.mean_aa() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ProtocolResult {
    #[serde(skip)]
    pub final_state: DensityMatrix,
    pub moments: Moments,
    pub g2_bare: f64,
    /// Lower bound on the measured g² after the noisy final displacement.
    pub g2_bound: f64,
    /// g² of the state after the final displacement's noise, from the exact
    /// moment shift.
    pub g2_shifted: f64,
    pub p1: f64,
    /// Population in `n ≥ 2`.
    pub p_multi: f64,
    /// Largest top-three-level population seen during the evolution.
    pub leakage: f64,
    pub max_trace_drift: f64,
    pub tau_block: f64,
    pub t_pi: f64,
    pub alpha_b: c64,
    pub nbar_th: f64,
    pub xi: Option<f64>,
    pub warnings: Vec<String>,
}

/// Displaced-frame state right after the first (noisy) displacement.
pub fn initial_state(config: &ProtocolConfig) -> Result<DensityMatrix> {
    config.noise.validate()?;
    let t = config.truncation;
    let alpha_b = config.alpha_b();
    let nbar = config.noise.nbar_th(alpha_b);
    match config.noise {
        NoiseModel::None => Ok(DensityMatrix::vacuum(t)),
        NoiseModel::Additive { .. } | NoiseModel::Multiplicative { .. } => thermal_state(nbar, t),
        NoiseModel::Phase { .. } => {
            let xi = config.noise.xi(alpha_b).unwrap_or(0.0);
            let th = thermal_state(nbar, t)?;
            let sq = squeeze_operator(xi, t)?.conjugate(&th);
            // Diffusion is tangent to α_b: rotate the squeezed axis accordingly.
            let theta = alpha_b.arg();
            let rotated = if theta == 0.0 { sq } else { rotation(theta, t).conjugate(&sq) };
            DensityMatrix::new(hermitized(rotated.matrix()))
        }
    }
}

fn rotation(theta: f64, t: Truncation) -> Operator {
    let d = t.dim();
    Operator::from_dense(Mat::from_fn(d, d, |i, j| if i == j { c64::from_polar(1.0, theta * i as f64) } else { c64::new(0.0, 0.0) }))
}

fn hermitized(m: &Mat<c64>) -> Mat<c64> {
    let tr: f64 = (0..m.nrows()).map(|i| m[(i, i)].re).sum();
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)].conj()) / tr)
}

fn generator(config: &ProtocolConfig) -> Result<LindbladGenerator> {
    let h = build_h_target(&config.spec, config.truncation);
    LindbladGenerator::single_mode(&h, config.spec.kappa)
}

fn evolve_for(gen: &LindbladGenerator, rho: &DensityMatrix, tau: f64) -> Result<(DensityMatrix, f64, f64)> {
    let grid = TimeGrid::new(0.0, tau, tau)?;
    let ev = evolve_with(gen, rho, &grid, &EvolveOptions::default(), |_, _| {})?;
    Ok((ev.final_state, ev.stats.max_leakage, ev.stats.max_trace_drift))
}

/// Shortest blockade time at which `P1` first reaches `target_p1`, located on
/// `(0, t_π]` and refined by bisection.
pub fn optimize_tau_block(config: &ProtocolConfig, target_p1: f64) -> Result<f64> {
    config.validate()?;
    let gen = generator(config)?;
    let rho0 = initial_state(config)?;
    optimize_with(&gen, &rho0, config.spec.t_pi(), target_p1)
}

fn optimize_with(gen: &LindbladGenerator, rho0: &DensityMatrix, t_pi: f64, target: f64) -> Result<f64> {
    if rho0.population(1) >= target {
        return Err(Error::InvalidParameter(format!(
            "initial P1 = {} already exceeds target {target}",
            rho0.population(1)
        )));
    }
    // Step forward one scan interval at a time so the run stops at the first
    // crossing instead of integrating (and leaking) to t_π.
    let dt = t_pi / SCAN_POINTS as f64;
    let mut prev = (0.0, rho0.clone());
    let mut max_p1 = rho0.population(1);
    let mut upper = None;
    for k in 1..=SCAN_POINTS {
        let (rho, _, _) = evolve_for(gen, &prev.1, dt)?;
        let p = rho.population(1);
        max_p1 = max_p1.max(p);
        if p >= target {
            upper = Some(k as f64 * dt);
            break;
        }
        prev = (k as f64 * dt, rho);
    }
    let Some(t_hi) = upper else {
        return Err(Error::Unreachable { target, max_p1 });
    };
    let (t_lo, rho_lo) = (prev.0, &prev.1);
    let (mut lo, mut hi) = (0.0, t_hi - t_lo);
    for _ in 0..BISECTION_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        let (rho, _, _) = evolve_for(gen, rho_lo, mid)?;
        let p = rho.population(1);
        if (p - target).abs() < P1_TOLERANCE {
            return Ok(t_lo + mid);
        }
        if p < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 * t_pi {
            break;
        }
    }
    Ok(t_lo + 0.5 * (lo + hi))
}

/// `⟨a†a†aa⟩/⟨n⟩² + 4 n̄_th/⟨n⟩`.
pub fn g2_bound_additive(m: &Moments, nbar_th: f64) -> Result<f64> {
    if m.mean_a.norm_sqr() > COHERENCE_WARN_FRACTION * m.n_mean {
        log::warn!("additive g2 bound assumes <a> = 0; |<a>|^2 = {:e}", m.mean_a.norm_sqr());
    }
    Ok(g2_from_moments(m.n_mean, m.second)? + 4.0 * nbar_th / m.n_mean)
}

/// `⟨a†a†aa⟩/⟨n⟩² + 2D/⟨n⟩` with `D = |α_b|²σ²`.
pub fn g2_bound_phase(m: &Moments, diffusion: f64) -> Result<f64> {
    if m.mean_a.norm_sqr() > COHERENCE_WARN_FRACTION * m.n_mean || m.mean_aa.norm() > COHERENCE_WARN_FRACTION * m.n_mean {
        log::warn!("phase g2 bound assumes <a> = <aa> = 0; got {} and {}", m.mean_a, m.mean_aa);
    }
    Ok(g2_from_moments(m.n_mean, m.second)? + 2.0 * diffusion / m.n_mean)
}

/// g² after adding an independent zero-mean random displacement to the state.
pub fn g2_shifted(m: &Moments, b: &DisplacementMoments) -> Result<f64> {
    let n = m.n_mean + b.abs2;
    let second = m.second + 4.0 * m.n_mean * b.abs2 + 2.0 * (b.square * m.mean_aa.conj()).re + b.abs4;
    g2_from_moments(n, second)
}

pub fn run_protocol(config: &ProtocolConfig) -> Result<ProtocolResult> {
    config.validate()?;
    let gen = generator(config)?;
    let rho0 = initial_state(config)?;
    let t_pi = config.spec.t_pi();
    let tau = match config.duration {
        BlockDuration::Fixed(tau) => tau,
        BlockDuration::TargetP1(p) => optimize_with(&gen, &rho0, t_pi, p)?,
    };
    let (rho, leakage, drift) = evolve_for(&gen, &rho0, tau)?;

    let alpha_b = config.alpha_b();
    let noise = config.noise;
    let m = Moments::of(&rho);
    let mut warnings = Vec::new();
    let coherent = m.mean_a.norm_sqr() > COHERENCE_WARN_FRACTION * m.n_mean;
    let squeezed = m.mean_aa.norm() > COHERENCE_WARN_FRACTION * m.n_mean;
    let g2_bare = g2_from_moments(m.n_mean, m.second)?;
    let g2_bound = match noise {
        NoiseModel::None => g2_bare,
        NoiseModel::Additive { .. } | NoiseModel::Multiplicative { .. } => {
            if coherent {
                warnings.push(format!("bound assumes <a> = 0 but |<a>|^2 = {:.3e}", m.mean_a.norm_sqr()));
            }
            g2_bound_additive(&m, noise.nbar_th(alpha_b))?
        }
        NoiseModel::Phase { .. } => {
            if coherent || squeezed {
                warnings.push(format!(
                    "bound assumes <a> = <aa> = 0 but |<a>| = {:.3e}, |<aa>| = {:.3e}",
                    m.mean_a.norm(),
                    m.mean_aa.norm()
                ));
            }
            g2_bound_phase(&m, noise.diffusion(alpha_b))?
        }
    };
    let g2_shifted = g2_shifted(&m, &noise.displacement_moments(alpha_b))?;
    let pops = rho.populations();
    Ok(ProtocolResult {
        moments: m,
        g2_bare,
        g2_bound,
        g2_shifted,
        p1: pops[1],
        p_multi: pops[2..].iter().sum::<f64>().max(0.0),
        leakage,
        max_trace_drift: drift,
        tau_block: tau,
        t_pi,
        alpha_b,
        nbar_th: noise.nbar_th(alpha_b),
        xi: noise.xi(alpha_b),
        warnings,
        final_state: rho,
    })
}

/// Displaced-frame state after one noisy displacement of the vacuum,
/// averaged over `samples` sampled displacement errors. Independent of the
/// thread count for a given seed.
pub fn monte_carlo_channel(noise: NoiseModel, alpha_b: c64, samples: usize, seed: u64, t: Truncation) -> Result<DensityMatrix> {
    noise.validate()?;
    if samples == 0 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    let d = t.dim();
    let sigma = noise.sigma();
    let chunks: Vec<(usize, usize)> = (0..samples.div_ceil(MC_CHUNK))
        .map(|c| (c, MC_CHUNK.min(samples - c * MC_CHUNK)))
        .collect();
    let partial: Vec<Mat<c64>> = chunks
        .par_iter()
        .map(|&(c, count)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let gauss = Normal::new(0.0, 1.0).expect("unit normal");
            let mut acc = Mat::<c64>::zeros(d, d);
            let mut amps = vec![c64::new(0.0, 0.0); d];
            for _ in 0..count {
                let beta = match noise {
                    NoiseModel::None => c64::new(0.0, 0.0),
                    NoiseModel::Additive { .. } | NoiseModel::Multiplicative { .. } => {
                        let scale = if matches!(noise, NoiseModel::Additive { .. }) { sigma } else { sigma * alpha_b.norm() };
                        let e = c64::new(gauss.sample(&mut rng), gauss.sample(&mut rng)) * (scale / std::f64::consts::SQRT_2);
                        if matches!(noise, NoiseModel::Multiplicative { .. }) {
                            e * c64::from_polar(1.0, alpha_b.arg())
                        } else {
                            e
                        }
                    }
                    NoiseModel::Phase { .. } => {
                        // Ŷ variance grows by |α_b|²σ², so θ has variance σ²/2.
                        let phi = sigma / std::f64::consts::SQRT_2 * gauss.sample(&mut rng);
                        alpha_b * (c64::from_polar(1.0, phi) - 1.0)
                    }
                };
                truncated_coherent(beta, &mut amps);
                for j in 0..d {
                    let cj = amps[j].conj();
                    for i in 0..d {
                        acc[(i, j)] += amps[i] * cj;
                    }
                }
            }
            acc
        })
        .collect();
    let mut sum = Mat::<c64>::zeros(d, d);
    for p in &partial {
        sum += p;
    }
    DensityMatrix::new(hermitized(&sum))
}

/// Coherent amplitudes renormalized within the truncation.
fn truncated_coherent(beta: c64, out: &mut [c64]) {
    let mut c = c64::new(1.0, 0.0);
    out[0] = c;
    for n in 1..out.len() {
        c = c * beta / (n as f64).sqrt();
        out[n] = c;
    }
    let norm = out.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in out.iter_mut() {
        *a /= norm;
    }
}

/// Lab-frame state `D(α_b) ρ D(α_b)†` for a displaced-frame state.
pub fn to_lab_frame(rho: &DensityMatrix, alpha_b: c64) -> Result<DensityMatrix> {
    let t = Truncation::new(rho.dim())?;
    Ok(fock::displacement_operator(alpha_b, t)?.conjugate(rho))
}
