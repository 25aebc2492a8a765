//! MUSIC and 2D-MUSIC estimation of the target parameters, plus a seeded
//! Monte-Carlo harness measuring empirical MSE against the CRBs.
//!
//! Spectrum denominators use `αᴴ U_w U_wᴴ α = ‖α‖² − |u_sᴴ α|²`, which holds
//! because `[u_s, U_w]` is a complete orthonormal basis; this turns an
//! `O(N²)` evaluation into `O(N)`.

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::crb::{crb_r_case2, crb_u_case1, MomentSet};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, CMatrix};
use crate::model::{channel_vector, steering_phase, SensingConfig, TargetParams};
use crate::search::{argmax, cell_around, golden_section_max, linspace};

/// Lower clamp on spectrum denominators.
pub const SPECTRUM_FLOOR: f64 = 1e-15;

/// Golden-section tolerance on `u`.
pub const U_TOL: f64 = 1e-10;

/// Golden-section tolerance on `r`, relative to the upper range bound.
pub const R_TOL_REL: f64 = 1e-10;

/// Half-width, in r-grid cells, of the range bracket searched for each
/// candidate `u` during 2D refinement. The spectrum ridge is tilted, so the
/// best range moves by several cells across one u-cell.
pub const JOINT_R_BRACKET_CELLS: usize = 16;

/// Which target parameter(s) MUSIC estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimationCase {
    /// Range known, AoA unknown.
    AoaOnly,
    /// AoA known, range unknown.
    DistanceOnly,
    /// Both unknown.
    Joint,
}

impl EstimationCase {
    pub fn number(self) -> u8 {
        match self {
            EstimationCase::AoaOnly => 1,
            EstimationCase::DistanceOnly => 2,
            EstimationCase::Joint => 3,
        }
    }

    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(EstimationCase::AoaOnly),
            2 => Some(EstimationCase::DistanceOnly),
            3 => Some(EstimationCase::Joint),
            _ => None,
        }
    }
}

/// Received echoes `Y = h sᵀ + W`, stored column by column (one column per
/// snapshot).
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotBatch {
    num_antennas: usize,
    num_snapshots: usize,
    y: Vec<Complex64>,
    pub truth: TargetParams,
    pub symbols: Vec<Complex64>,
    pub seed: u64,
    pub stream: u64,
}

impl SnapshotBatch {
    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    pub fn num_snapshots(&self) -> usize {
        self.num_snapshots
    }

    pub fn column(&self, t: usize) -> &[Complex64] {
        &self.y[t * self.num_antennas..(t + 1) * self.num_antennas]
    }
}

/// Generator for trial `stream` under `seed`: one ChaCha8 key per seed, one
/// independent stream per trial.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Synthesizes the echoes of one trial on stream 0 of `seed`.
pub fn synthesize_echo(
    x: &[f64],
    eta: &TargetParams,
    cfg: &SensingConfig,
    seed: u64,
) -> SnapshotBatch {
    synthesize_echo_stream(x, eta, cfg, seed, 0)
}

/// Constant-modulus symbols `s_t = √P`; circularly-symmetric Gaussian noise
/// of variance `σ²` per entry.
pub fn synthesize_echo_stream(
    x: &[f64],
    eta: &TargetParams,
    cfg: &SensingConfig,
    seed: u64,
    stream: u64,
) -> SnapshotBatch {
    let n = x.len();
    let t_count = cfg.num_snapshots;
    let h = channel_vector(x, eta, cfg);
    let symbols = vec![Complex64::new(cfg.transmit_power.sqrt(), 0.0); t_count];
    let sd = (cfg.noise_power / 2.0).sqrt();
    let mut rng = trial_rng(seed, stream);
    let mut y = Vec::with_capacity(n * t_count);
    for s in &symbols {
        for hn in &h {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            y.push(hn * s + Complex64::new(sd * re, sd * im));
        }
    }
    SnapshotBatch {
        num_antennas: n,
        num_snapshots: t_count,
        y,
        truth: *eta,
        symbols,
        seed,
        stream,
    }
}

/// `R_Y = Y Yᴴ / T`.
pub fn sample_covariance(batch: &SnapshotBatch) -> CMatrix {
    let n = batch.num_antennas;
    let mut r = CMatrix::zeros(n);
    for t in 0..batch.num_snapshots {
        let col = batch.column(t);
        for i in 0..n {
            for j in i..n {
                r[(i, j)] += col[i] * col[j].conj();
            }
        }
    }
    let scale = 1.0 / batch.num_snapshots as f64;
    for i in 0..n {
        for j in i..n {
            let v = r[(i, j)] * scale;
            r[(i, j)] = v;
            r[(j, i)] = v.conj();
        }
        r[(i, i)] = Complex64::new(r[(i, i)].re, 0.0);
    }
    r
}

/// Signal/noise split of a covariance matrix for a single target.
#[derive(Debug, Clone)]
pub struct SubspaceDecomposition {
    pub signal: Vec<Complex64>,
    /// Orthonormal noise basis, one vector per entry (`N − 1` of them).
    pub noise: Vec<Vec<Complex64>>,
    pub gamma_s: f64,
    pub gamma_w: Vec<f64>,
}

impl SubspaceDecomposition {
    /// `αᴴ U_w U_wᴴ α` summed explicitly over the noise basis.
    pub fn noise_projection(&self, alpha: &[Complex64]) -> f64 {
        self.noise.iter().map(|w| inner(w, alpha).norm_sqr()).sum()
    }

    /// Same quantity through the complement of the signal direction.
    pub fn spectrum_denominator(&self, alpha: &[Complex64]) -> f64 {
        let norm: f64 = alpha.iter().map(|a| a.norm_sqr()).sum();
        norm - inner(&self.signal, alpha).norm_sqr()
    }

    /// MUSIC pseudo-spectrum `1 / αᴴ U_w U_wᴴ α`, floored denominator.
    pub fn spectrum(&self, alpha: &[Complex64]) -> f64 {
        1.0 / self.spectrum_denominator(alpha).max(SPECTRUM_FLOOR)
    }

    /// Frobenius deviation of the basis Gram matrix from identity.
    pub fn gram_error(&self) -> f64 {
        let basis: Vec<&Vec<Complex64>> =
            std::iter::once(&self.signal).chain(&self.noise).collect();
        let mut s = 0.0;
        for (i, a) in basis.iter().enumerate() {
            for (j, b) in basis.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                s += (inner(a, b) - target).norm_sqr();
            }
        }
        s.sqrt()
    }

    /// `[u_s U_w] diag(γ) [u_s U_w]ᴴ`.
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.signal.len();
        let mut r = CMatrix::outer(&self.signal);
        for i in 0..n {
            for j in 0..n {
                r[(i, j)] *= self.gamma_s;
            }
        }
        for (w, &g) in self.noise.iter().zip(&self.gamma_w) {
            for i in 0..n {
                for j in 0..n {
                    r[(i, j)] += w[i] * w[j].conj() * g;
                }
            }
        }
        r
    }
}

/// `aᴴ b`.
fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(a, b)| a.conj() * b).sum()
}

/// Eigen-split of a Hermitian PSD covariance; the dominant eigenvector spans
/// the signal subspace.
pub fn noise_subspace(r: &CMatrix) -> Result<SubspaceDecomposition> {
    let eig = hermitian_eigen(r)?;
    let n = r.dim();
    Ok(SubspaceDecomposition {
        signal: eig.vectors.column(0),
        noise: (1..n).map(|k| eig.vectors.column(k)).collect(),
        gamma_s: eig.values[0],
        gamma_w: eig.values[1..].to_vec(),
    })
}

/// Default AoA grid: `points` values `i / points` covering `[0, 1)`.
pub fn aoa_grid(points: usize) -> Vec<f64> {
    (0..points).map(|i| i as f64 / points as f64).collect()
}

/// Default range grid over `[r_min, r_max]`, endpoints included.
pub fn range_grid(r_min: f64, r_max: f64, points: usize) -> Vec<f64> {
    linspace(r_min, r_max, points)
}

/// Pseudo-spectrum sampled on a u-axis, an r-axis or both. A 1D spectrum
/// has a single-element fixed axis; values are stored u-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumGrid {
    pub u: Vec<f64>,
    pub r: Vec<f64>,
    pub values: Vec<f64>,
}

impl SpectrumGrid {
    pub fn value(&self, iu: usize, ir: usize) -> f64 {
        self.values[iu * self.r.len() + ir]
    }

    /// Grid peak as `(u index, r index)`, first one on ties.
    pub fn argmax(&self) -> (usize, usize) {
        let k = argmax(&self.values);
        (k / self.r.len(), k % self.r.len())
    }
}

/// Steering vectors of a fixed parameter grid, reusable across trials.
#[derive(Debug, Clone)]
pub struct SteeringTable {
    u: Vec<f64>,
    r: Vec<f64>,
    n: usize,
    alphas: Vec<Complex64>,
}

impl SteeringTable {
    pub fn new(x: &[f64], u: &[f64], r: &[f64], cfg: &SensingConfig) -> Self {
        let k = cfg.wavenumber();
        let mut alphas = Vec::with_capacity(u.len() * r.len() * x.len());
        for &uu in u {
            for &rr in r {
                alphas.extend(
                    x.iter()
                        .map(|&xn| Complex64::from_polar(1.0, steering_phase(xn, uu, rr, k))),
                );
            }
        }
        Self {
            u: u.to_vec(),
            r: r.to_vec(),
            n: x.len(),
            alphas,
        }
    }

    pub fn spectrum(&self, sub: &SubspaceDecomposition) -> SpectrumGrid {
        let values = self
            .alphas
            .chunks_exact(self.n)
            .map(|a| sub.spectrum(a))
            .collect();
        SpectrumGrid {
            u: self.u.clone(),
            r: self.r.clone(),
            values,
        }
    }
}

/// Noise-subspace energy of the steering vector at `(u, r)`; MUSIC
/// maximizes its negative.
fn denominator_at(x: &[f64], sub: &SubspaceDecomposition, u: f64, r: f64, k: f64) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (&xn, s) in x.iter().zip(&sub.signal) {
        acc += s.conj() * Complex64::from_polar(1.0, steering_phase(xn, u, r, k));
    }
    x.len() as f64 - acc.norm_sqr()
}

pub fn spectrum_1d_aoa(
    x: &[f64],
    sub: &SubspaceDecomposition,
    r_star: f64,
    u_grid: &[f64],
    cfg: &SensingConfig,
) -> SpectrumGrid {
    SteeringTable::new(x, u_grid, &[r_star], cfg).spectrum(sub)
}

pub fn spectrum_1d_range(
    x: &[f64],
    sub: &SubspaceDecomposition,
    u_star: f64,
    r_grid: &[f64],
    cfg: &SensingConfig,
) -> SpectrumGrid {
    SteeringTable::new(x, &[u_star], r_grid, cfg).spectrum(sub)
}

pub fn spectrum_2d(
    x: &[f64],
    sub: &SubspaceDecomposition,
    u_grid: &[f64],
    r_grid: &[f64],
    cfg: &SensingConfig,
) -> SpectrumGrid {
    SteeringTable::new(x, u_grid, r_grid, cfg).spectrum(sub)
}

fn refine_aoa(
    x: &[f64],
    sub: &SubspaceDecomposition,
    spec: &SpectrumGrid,
    cfg: &SensingConfig,
) -> f64 {
    let (iu, _) = spec.argmax();
    let r_star = spec.r[0];
    let k = cfg.wavenumber();
    let (lo, hi) = cell_around(&spec.u, iu);
    let (u, v) = golden_section_max(lo, hi, U_TOL, |u| -denominator_at(x, sub, u, r_star, k));
    if v > -denominator_at(x, sub, spec.u[iu], r_star, k) {
        u
    } else {
        spec.u[iu]
    }
}

fn refine_range(
    x: &[f64],
    sub: &SubspaceDecomposition,
    spec: &SpectrumGrid,
    cfg: &SensingConfig,
) -> f64 {
    let (_, ir) = spec.argmax();
    let u_star = spec.u[0];
    let k = cfg.wavenumber();
    let (lo, hi) = cell_around(&spec.r, ir);
    let tol = R_TOL_REL * spec.r[spec.r.len() - 1].abs();
    let (r, v) = golden_section_max(lo, hi, tol, |r| -denominator_at(x, sub, u_star, r, k));
    if v > -denominator_at(x, sub, u_star, spec.r[ir], k) {
        r
    } else {
        spec.r[ir]
    }
}

/// Best range for a fixed `u` within a bracket around r-grid index `ir`.
fn best_range_for(
    x: &[f64],
    sub: &SubspaceDecomposition,
    u: f64,
    r_grid: &[f64],
    ir: usize,
    k: f64,
) -> (f64, f64) {
    let lo_i = ir.saturating_sub(JOINT_R_BRACKET_CELLS);
    let hi_i = (ir + JOINT_R_BRACKET_CELLS).min(r_grid.len() - 1);
    let bracket = &r_grid[lo_i..=hi_i];
    let values: Vec<f64> = bracket
        .iter()
        .map(|&r| -denominator_at(x, sub, u, r, k))
        .collect();
    let j = argmax(&values);
    if bracket.len() < 2 {
        return (bracket[j], values[j]);
    }
    let (lo, hi) = cell_around(bracket, j);
    let tol = R_TOL_REL * r_grid[r_grid.len() - 1].abs();
    let (r, v) = golden_section_max(lo, hi, tol, |r| -denominator_at(x, sub, u, r, k));
    if v > values[j] {
        (r, v)
    } else {
        (bracket[j], values[j])
    }
}

fn refine_joint(
    x: &[f64],
    sub: &SubspaceDecomposition,
    spec: &SpectrumGrid,
    cfg: &SensingConfig,
) -> TargetParams {
    let (iu, ir) = spec.argmax();
    let k = cfg.wavenumber();
    let grid_best = (
        spec.u[iu],
        spec.r[ir],
        -denominator_at(x, sub, spec.u[iu], spec.r[ir], k),
    );
    if spec.u.len() < 2 {
        let (r, _) = best_range_for(x, sub, spec.u[0], &spec.r, ir, k);
        return TargetParams { u: spec.u[0], r };
    }
    let (lo, hi) = cell_around(&spec.u, iu);
    let (u, v) = golden_section_max(lo, hi, U_TOL, |u| {
        best_range_for(x, sub, u, &spec.r, ir, k).1
    });
    if v > grid_best.2 {
        let (r, _) = best_range_for(x, sub, u, &spec.r, ir, k);
        TargetParams { u, r }
    } else {
        TargetParams {
            u: grid_best.0,
            r: grid_best.1,
        }
    }
}

/// Case-1 MUSIC: grid peak over `u_grid`, then golden-section refinement
/// inside the winning cell.
pub fn estimate_aoa(
    x: &[f64],
    sub: &SubspaceDecomposition,
    r_star: f64,
    u_grid: &[f64],
    cfg: &SensingConfig,
) -> f64 {
    refine_aoa(x, sub, &spectrum_1d_aoa(x, sub, r_star, u_grid, cfg), cfg)
}

/// Case-2 MUSIC over `r_grid` at the known AoA.
pub fn estimate_distance(
    x: &[f64],
    sub: &SubspaceDecomposition,
    u_star: f64,
    r_grid: &[f64],
    cfg: &SensingConfig,
) -> f64 {
    refine_range(x, sub, &spectrum_1d_range(x, sub, u_star, r_grid, cfg), cfg)
}

/// 2D-MUSIC: grid peak, then a nested golden search in which every
/// candidate `u` is scored by its best range.
pub fn estimate_joint(
    x: &[f64],
    sub: &SubspaceDecomposition,
    u_grid: &[f64],
    r_grid: &[f64],
    cfg: &SensingConfig,
) -> TargetParams {
    refine_joint(x, sub, &spectrum_2d(x, sub, u_grid, r_grid, cfg), cfg)
}

/// Grid resolutions and range bounds of the MUSIC searches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MusicGrids {
    pub u_points: usize,
    pub r_points: usize,
    pub joint_u_points: usize,
    pub joint_r_points: usize,
    pub r_min: f64,
    pub r_max: f64,
}

impl MusicGrids {
    /// 2048 u-points and 1024 r-points for 1D searches, 256 × 128 for 2D,
    /// ranges over `[R_FS, R_RL / 2]`.
    pub fn default_for(cfg: &SensingConfig) -> Self {
        Self {
            u_points: 2048,
            r_points: 1024,
            joint_u_points: 256,
            joint_r_points: 128,
            r_min: cfg.fresnel_distance(),
            r_max: cfg.rayleigh_distance() / 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sizes = [
            self.u_points,
            self.r_points,
            self.joint_u_points,
            self.joint_r_points,
        ];
        if sizes.iter().any(|&p| p < 2) {
            return Err(Error::InvalidConfig(
                "spectrum grids need at least 2 points".into(),
            ));
        }
        if !(self.r_min > 0.0 && self.r_max > self.r_min && self.r_max.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "range search interval [{}, {}] is empty",
                self.r_min, self.r_max
            )));
        }
        Ok(())
    }
}

/// Empirical MSEs of one Monte-Carlo cell with the matching CRBs at the
/// true parameters. Entries that do not apply to the case are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub case: EstimationCase,
    pub snr_db: f64,
    pub truth: TargetParams,
    pub trials: usize,
    pub seed: u64,
    pub mse_u: Option<f64>,
    pub mse_r: Option<f64>,
    pub crb_u: Option<f64>,
    pub crb_r: Option<f64>,
}

impl MonteCarloReport {
    /// Sum of the applicable MSEs.
    pub fn mse_total(&self) -> f64 {
        self.mse_u.unwrap_or(0.0) + self.mse_r.unwrap_or(0.0)
    }

    /// Sum of the applicable CRBs (the CRB-matrix trace in the joint case).
    pub fn crb_total(&self) -> f64 {
        self.crb_u.unwrap_or(0.0) + self.crb_r.unwrap_or(0.0)
    }

    pub fn efficiency_ratio(&self) -> f64 {
        self.mse_total() / self.crb_total()
    }
}

struct Estimator<'a> {
    case: EstimationCase,
    x: &'a [f64],
    truth: TargetParams,
    cfg: &'a SensingConfig,
    table: SteeringTable,
}

impl<'a> Estimator<'a> {
    fn new(
        case: EstimationCase,
        x: &'a [f64],
        truth: TargetParams,
        cfg: &'a SensingConfig,
        grids: &MusicGrids,
    ) -> Self {
        let table = match case {
            EstimationCase::AoaOnly => {
                SteeringTable::new(x, &aoa_grid(grids.u_points), &[truth.r], cfg)
            }
            EstimationCase::DistanceOnly => SteeringTable::new(
                x,
                &[truth.u],
                &range_grid(grids.r_min, grids.r_max, grids.r_points),
                cfg,
            ),
            EstimationCase::Joint => SteeringTable::new(
                x,
                &aoa_grid(grids.joint_u_points),
                &range_grid(grids.r_min, grids.r_max, grids.joint_r_points),
                cfg,
            ),
        };
        Self {
            case,
            x,
            truth,
            cfg,
            table,
        }
    }

    /// Squared errors `(e_u², e_r²)` of one trial.
    fn trial(&self, seed: u64, stream: u64) -> Result<(f64, f64)> {
        let batch = synthesize_echo_stream(self.x, &self.truth, self.cfg, seed, stream);
        let sub = noise_subspace(&sample_covariance(&batch))?;
        let spec = self.table.spectrum(&sub);
        Ok(match self.case {
            EstimationCase::AoaOnly => (
                (refine_aoa(self.x, &sub, &spec, self.cfg) - self.truth.u).powi(2),
                0.0,
            ),
            EstimationCase::DistanceOnly => (
                0.0,
                (refine_range(self.x, &sub, &spec, self.cfg) - self.truth.r).powi(2),
            ),
            EstimationCase::Joint => {
                let est = refine_joint(self.x, &sub, &spec, self.cfg);
                (
                    (est.u - self.truth.u).powi(2),
                    (est.r - self.truth.r).powi(2),
                )
            }
        })
    }
}

/// Monte-Carlo MSE with the default grids.
pub fn monte_carlo_mse(
    case: EstimationCase,
    x: &[f64],
    truth: &TargetParams,
    cfg: &SensingConfig,
    trials: usize,
    seed: u64,
) -> Result<MonteCarloReport> {
    monte_carlo_mse_with(
        case,
        x,
        truth,
        cfg,
        trials,
        seed,
        &MusicGrids::default_for(cfg),
    )
}

/// Trial `i` draws from stream `i` of `seed`; squared errors are summed in
/// trial order, so the report does not depend on the worker count.
pub fn monte_carlo_mse_with(
    case: EstimationCase,
    x: &[f64],
    truth: &TargetParams,
    cfg: &SensingConfig,
    trials: usize,
    seed: u64,
    grids: &MusicGrids,
) -> Result<MonteCarloReport> {
    if trials == 0 {
        return Err(Error::InvalidConfig(
            "Monte-Carlo needs at least one trial".into(),
        ));
    }
    // Noiseless runs are allowed here; everything else must validate.
    SensingConfig {
        noise_power: if cfg.noise_power == 0.0 {
            1.0
        } else {
            cfg.noise_power
        },
        ..*cfg
    }
    .validate()?;
    grids.validate()?;
    let mut cfg_n = *cfg;
    cfg_n.num_antennas = x.len();
    let cfg = &cfg_n;

    let est = Estimator::new(case, x, *truth, cfg, grids);
    let errors = run_trials(&est, seed, trials)?;
    let (mut su, mut sr) = (0.0, 0.0);
    for (eu, er) in &errors {
        su += eu;
        sr += er;
    }
    let n = trials as f64;

    let (mse_u, mse_r, crb_u, crb_r) = match case {
        EstimationCase::AoaOnly => (
            Some(su / n),
            None,
            Some(crb_u_case1(x, truth.u, truth.r, cfg)?),
            None,
        ),
        EstimationCase::DistanceOnly => (
            None,
            Some(sr / n),
            None,
            Some(crb_r_case2(x, truth.r, truth.u, cfg)?),
        ),
        EstimationCase::Joint => {
            let crb = MomentSet::of(x).joint_crb(truth, cfg.kappa())?;
            (Some(su / n), Some(sr / n), Some(crb.crb_u), Some(crb.crb_r))
        }
    };
    Ok(MonteCarloReport {
        case,
        snr_db: 10.0 * cfg.snr().log10(),
        truth: *truth,
        trials,
        seed,
        mse_u,
        mse_r,
        crb_u,
        crb_r,
    })
}

#[cfg(feature = "parallel")]
fn run_trials(est: &Estimator<'_>, seed: u64, trials: usize) -> Result<Vec<(f64, f64)>> {
    use rayon::prelude::*;
    (0..trials as u64)
        .into_par_iter()
        .map(|i| est.trial(seed, i))
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn run_trials(est: &Estimator<'_>, seed: u64, trials: usize) -> Result<Vec<(f64, f64)>> {
    (0..trials as u64).map(|i| est.trial(seed, i)).collect()
}
