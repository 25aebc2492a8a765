//! Fisher information and Cramér-Rao bounds for near-field AoA/range
//! estimation, plus the worst-case searches over the unknown parameters.
//!
//! Every bound is `κ` times a geometry factor built from three sample
//! moments of the positions `x` and their squares `x̃ = x²`:
//! `var(x)`, `var(x̃)` and `cov(x, x̃)` (all with `1/N` normalization).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    fresnel_distance, rayleigh_distance, steering_vector, SensingConfig, TargetParams, POSITION_TOL,
};
use crate::search::{cell_around, golden_section_max, linspace, maximize_1d};

/// Normalized FIM determinant below which the joint problem is singular.
pub const SINGULAR_FIM_RATIO: f64 = 1e-12;

/// Default worst-case grid resolution per axis.
pub const DEFAULT_WORST_CASE_GRID: usize = 512;

/// Parameter tolerance of the golden-section refinement.
pub const REFINE_TOL: f64 = 1e-6;

/// Neumaier-compensated sum.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Sample moments of an antenna position vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub mean_x: f64,
    pub var_x: f64,
    pub mean_xt: f64,
    pub var_xt: f64,
    pub cov_x_xt: f64,
}

impl MomentSet {
    /// Two-pass centered moments; order of `x` is irrelevant.
    pub fn of(x: &[f64]) -> Self {
        let n = x.len() as f64;
        let mean_x = compensated_sum(x.iter().copied()) / n;
        let mean_xt = compensated_sum(x.iter().map(|v| v * v)) / n;
        let var_x = compensated_sum(x.iter().map(|v| (v - mean_x) * (v - mean_x))) / n;
        let var_xt = compensated_sum(x.iter().map(|v| (v * v - mean_xt) * (v * v - mean_xt))) / n;
        let cov_x_xt = compensated_sum(x.iter().map(|v| (v - mean_x) * (v * v - mean_xt))) / n;
        Self {
            mean_x,
            var_x,
            mean_xt,
            var_xt,
            cov_x_xt,
        }
    }

    /// `var(x) + (2u/r⋆) cov(x, x̃) + (u²/r⋆²) var(x̃)`.
    pub fn f_u(&self, u: f64, r_star: f64) -> f64 {
        self.var_x + 2.0 * u / r_star * self.cov_x_xt + u * u / (r_star * r_star) * self.var_xt
    }

    /// `((1 - u⋆²) / (2r²))² var(x̃)`.
    pub fn f_r(&self, r: f64, u_star: f64) -> f64 {
        let g = (1.0 - u_star * u_star) / (2.0 * r * r);
        g * g * self.var_xt
    }

    /// `var(x) var(x̃) - cov²(x, x̃)`, the η-free part of the FIM determinant.
    pub fn joint_determinant(&self) -> f64 {
        self.var_x * self.var_xt - self.cov_x_xt * self.cov_x_xt
    }

    /// Joint CRB at `eta` from the closed forms for `CRB_u` and `CRB_r`.
    pub fn joint_crb(&self, eta: &TargetParams, kappa: f64) -> Result<Crb2x2> {
        let det = self.joint_determinant();
        let ratio = if self.var_x > 0.0 && self.var_xt > 0.0 {
            det / (self.var_x * self.var_xt)
        } else {
            0.0
        };
        if !(ratio >= SINGULAR_FIM_RATIO) {
            return Err(Error::SingularFim { ratio });
        }
        let (u, r) = (eta.u, eta.r);
        let one_minus = 1.0 - u * u;
        let crb_u = kappa * self.var_xt / det;
        let crb_r = kappa
            * (4.0 * r.powi(4) * self.var_x
                + 8.0 * u * r.powi(3) * self.cov_x_xt
                + 4.0 * u * u * r * r * self.var_xt)
            / (one_minus * one_minus * det);
        let g = one_minus / (2.0 * r * r);
        let crb_ur = -kappa * (self.cov_x_xt + u / r * self.var_xt) / (g * det);
        Ok(Crb2x2 {
            crb_u,
            crb_r,
            crb_ur,
        })
    }
}

pub fn moments(x: &[f64]) -> MomentSet {
    MomentSet::of(x)
}

pub fn f_u(x: &[f64], u: f64, r_star: f64) -> f64 {
    MomentSet::of(x).f_u(u, r_star)
}

pub fn f_r(x: &[f64], r: f64, u_star: f64) -> f64 {
    MomentSet::of(x).f_r(r, u_star)
}

/// AoA-only bound `κ / F_u` with the range known to be `r_star`.
pub fn crb_u_case1(x: &[f64], u: f64, r_star: f64, cfg: &SensingConfig) -> Result<f64> {
    let f = f_u(x, u, r_star);
    if !(f > 0.0) {
        return Err(Error::DegenerateArray);
    }
    Ok(cfg.kappa() / f)
}

/// Range-only bound `κ / F_r` with the AoA known to be `u_star`.
pub fn crb_r_case2(x: &[f64], r: f64, u_star: f64, cfg: &SensingConfig) -> Result<f64> {
    let f = f_r(x, r, u_star);
    if !(f > 0.0) {
        return Err(Error::DegenerateArray);
    }
    Ok(cfg.kappa() / f)
}

/// Box of unknown parameters searched by the worst-case bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorstCaseDomain {
    pub u_lo: f64,
    pub u_hi: f64,
    pub r_lo: f64,
    pub r_hi: f64,
    pub grid_u: usize,
    pub grid_r: usize,
}

impl WorstCaseDomain {
    pub fn new(
        u_lo: f64,
        u_hi: f64,
        r_lo: f64,
        r_hi: f64,
        grid_u: usize,
        grid_r: usize,
    ) -> Result<Self> {
        let dom = Self {
            u_lo,
            u_hi,
            r_lo,
            r_hi,
            grid_u,
            grid_r,
        };
        dom.validate()?;
        Ok(dom)
    }

    /// `u ∈ [0, cos 45°]`, `r ∈ [R_FS, R_RL/2]`, 512 × 512 grid.
    pub fn default_for(cfg: &SensingConfig) -> Self {
        Self {
            u_lo: 0.0,
            u_hi: std::f64::consts::FRAC_1_SQRT_2,
            r_lo: fresnel_distance(cfg),
            r_hi: rayleigh_distance(cfg) / 2.0,
            grid_u: DEFAULT_WORST_CASE_GRID,
            grid_r: DEFAULT_WORST_CASE_GRID,
        }
    }

    /// Same box collapsed to a single `(u, r)` point.
    pub fn point(eta: &TargetParams) -> Self {
        Self {
            u_lo: eta.u,
            u_hi: eta.u,
            r_lo: eta.r,
            r_hi: eta.r,
            grid_u: 2,
            grid_r: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(format!("worst-case domain: {m}")));
        if !(0.0 <= self.u_lo && self.u_lo <= self.u_hi && self.u_hi < 1.0) {
            return bad(format!(
                "need 0 <= u_lo <= u_hi < 1, got [{}, {}]",
                self.u_lo, self.u_hi
            ));
        }
        if !(0.0 < self.r_lo && self.r_lo <= self.r_hi && self.r_hi.is_finite()) {
            return bad(format!(
                "need 0 < r_lo <= r_hi, got [{}, {}]",
                self.r_lo, self.r_hi
            ));
        }
        if self.grid_u < 2 || self.grid_r < 2 {
            return bad("grid resolutions must be at least 2".into());
        }
        Ok(())
    }

    /// Checks the range bounds against the near-field region of `cfg`.
    pub fn check_near_field(&self, cfg: &SensingConfig) -> Result<()> {
        let (lo, hi) = (fresnel_distance(cfg), rayleigh_distance(cfg));
        if self.r_lo < lo - POSITION_TOL || self.r_hi > hi + POSITION_TOL {
            return Err(Error::InvalidConfig(format!(
                "worst-case range [{}, {}] leaves the near-field region [{lo}, {hi}]",
                self.r_lo, self.r_hi
            )));
        }
        Ok(())
    }
}

/// Result of a one-parameter worst-case search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorstCase {
    pub bound: f64,
    /// Parameter value attaining the bound (`u_opt` or `r_opt`).
    pub arg: f64,
}

/// Worst case of `CRB_u` over `u ∈ [u_lo, u_hi]` at known range `r_star`.
pub fn worst_case_crb_u(
    x: &[f64],
    r_star: f64,
    dom: &WorstCaseDomain,
    cfg: &SensingConfig,
) -> Result<WorstCase> {
    worst_case_crb_u_from(&MomentSet::of(x), r_star, dom, cfg.kappa())
}

pub(crate) fn worst_case_crb_u_from(
    m: &MomentSet,
    r_star: f64,
    dom: &WorstCaseDomain,
    kappa: f64,
) -> Result<WorstCase> {
    if !(m.var_x > 0.0) {
        return Err(Error::DegenerateArray);
    }
    let (arg, bound) = maximize_1d(dom.u_lo, dom.u_hi, dom.grid_u, REFINE_TOL, |u| {
        kappa / m.f_u(u, r_star)
    });
    Ok(WorstCase { bound, arg })
}

/// Worst case of `CRB_r` over `r ∈ [r_lo, r_hi]` at known AoA `u_star`.
pub fn worst_case_crb_r(
    x: &[f64],
    u_star: f64,
    dom: &WorstCaseDomain,
    cfg: &SensingConfig,
) -> Result<WorstCase> {
    worst_case_crb_r_from(&MomentSet::of(x), u_star, dom, cfg.kappa())
}

pub(crate) fn worst_case_crb_r_from(
    m: &MomentSet,
    u_star: f64,
    dom: &WorstCaseDomain,
    kappa: f64,
) -> Result<WorstCase> {
    if !(m.f_r(dom.r_hi, u_star) > 0.0) {
        return Err(Error::DegenerateArray);
    }
    let (arg, bound) = maximize_1d(dom.r_lo, dom.r_hi, dom.grid_r, REFINE_TOL, |r| {
        kappa / m.f_r(r, u_star)
    });
    Ok(WorstCase { bound, arg })
}

/// Symmetric 2×2 Fisher information for `η = [u, r]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fim2x2 {
    pub j_uu: f64,
    pub j_ur: f64,
    pub j_rr: f64,
}

impl Fim2x2 {
    pub fn det(&self) -> f64 {
        self.j_uu * self.j_rr - self.j_ur * self.j_ur
    }

    /// `det / (J_uu J_rr)`, a scale-free conditioning measure.
    pub fn normalized_det(&self) -> f64 {
        let diag = self.j_uu * self.j_rr;
        if diag > 0.0 {
            self.det() / diag
        } else {
            0.0
        }
    }

    /// Inverse through the Schur complements.
    pub fn inverse(&self) -> Result<Crb2x2> {
        let ratio = self.normalized_det();
        if !(ratio >= SINGULAR_FIM_RATIO) {
            return Err(Error::SingularFim { ratio });
        }
        Ok(Crb2x2 {
            crb_u: 1.0 / (self.j_uu - self.j_ur * self.j_ur / self.j_rr),
            crb_r: 1.0 / (self.j_rr - self.j_ur * self.j_ur / self.j_uu),
            crb_ur: 1.0 / (self.j_ur - self.j_uu * self.j_rr / self.j_ur),
        })
    }
}

/// Inverse FIM for joint estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crb2x2 {
    pub crb_u: f64,
    pub crb_r: f64,
    pub crb_ur: f64,
}

impl Crb2x2 {
    pub fn trace(&self) -> f64 {
        self.crb_u + self.crb_r
    }
}

/// Closed-form FIM entries in terms of the position moments.
///
/// `κ` carries the antenna count, so `x.len()` must equal `cfg.num_antennas`.
pub fn fim_joint_closed(x: &[f64], eta: &TargetParams, cfg: &SensingConfig) -> Fim2x2 {
    let m = MomentSet::of(x);
    let inv_kappa = 1.0 / cfg.kappa();
    let (u, r) = (eta.u, eta.r);
    let g = (1.0 - u * u) / (2.0 * r * r);
    Fim2x2 {
        j_uu: inv_kappa * m.f_u(u, r),
        j_ur: inv_kappa * g * (m.cov_x_xt + u / r * m.var_xt),
        j_rr: inv_kappa * g * g * m.var_xt,
    }
}

/// Analytic derivatives `[∂α/∂u, ∂α/∂r]` of the steering vector.
pub fn steering_derivatives(
    x: &[f64],
    eta: &TargetParams,
    cfg: &SensingConfig,
) -> [Vec<Complex64>; 2] {
    let k = cfg.wavenumber();
    let (u, r) = (eta.u, eta.r);
    let alpha = steering_vector(x, eta, cfg);
    let du = x
        .iter()
        .zip(alpha.iter())
        .map(|(&xn, a)| Complex64::i() * (k * (xn + xn * xn * u / r)) * a)
        .collect();
    let dr = x
        .iter()
        .zip(alpha.iter())
        .map(|(&xn, a)| Complex64::i() * (k * xn * xn * (1.0 - u * u) / (2.0 * r * r)) * a)
        .collect();
    [du, dr]
}

/// FIM from the projection formula
/// `(2/σ²) Σ_t Re{ s_t* Ψᴴ (I - α(αᴴα)⁻¹αᴴ) Ψ s_t }` with the channel
/// magnitude `|β|` folded into `Ψ` and constant-modulus symbols `|s_t|² = P`.
pub fn fim_joint_numeric(x: &[f64], eta: &TargetParams, cfg: &SensingConfig) -> Fim2x2 {
    let alpha = steering_vector(x, eta, cfg);
    let psi = steering_derivatives(x, eta, cfg);
    let alpha_norm = alpha.norm_sqr();

    // P⊥ Ψ_k = Ψ_k - α (αᴴ Ψ_k) / (αᴴ α)
    let project = |col: &[Complex64]| -> Vec<Complex64> {
        let inner: Complex64 = alpha.iter().zip(col).map(|(a, c)| a.conj() * c).sum();
        let coef = inner / alpha_norm;
        col.iter()
            .zip(alpha.iter())
            .map(|(c, a)| c - a * coef)
            .collect()
    };
    let proj = [project(&psi[0]), project(&psi[1])];
    let entry = |i: usize, j: usize| -> f64 {
        psi[i]
            .iter()
            .zip(&proj[j])
            .map(|(p, q)| p.conj() * q)
            .sum::<Complex64>()
            .re
    };
    let scale = 2.0 / cfg.noise_power
        * cfg.num_snapshots as f64
        * cfg.transmit_power
        * cfg.channel_gain
        * cfg.channel_gain;
    Fim2x2 {
        j_uu: scale * entry(0, 0),
        j_ur: scale * entry(0, 1),
        j_rr: scale * entry(1, 1),
    }
}

/// Joint CRB matrix at `eta`.
pub fn crb_matrix_joint(x: &[f64], eta: &TargetParams, cfg: &SensingConfig) -> Result<Crb2x2> {
    let m = MomentSet::of(x);
    let fim = fim_joint_closed(x, eta, cfg);
    let ratio = fim.normalized_det();
    if !(ratio >= SINGULAR_FIM_RATIO) {
        return Err(Error::SingularFim { ratio });
    }
    m.joint_crb(eta, cfg.kappa())
}

/// Worst-case joint bound and its location.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointWorstCase {
    /// Worst-case `CRB_u + CRB_r`; the placement objective is its reciprocal.
    pub trace: f64,
    pub eta: TargetParams,
    pub crb: Crb2x2,
}

/// Grid search of the joint trace with the range grid and its powers
/// precomputed, so repeated evaluations only cost one pass over the grid.
#[derive(Debug, Clone)]
pub struct JointWorstCaseSearch {
    dom: WorstCaseDomain,
    u_grid: Vec<f64>,
    r_grid: Vec<f64>,
    r2: Vec<f64>,
    r3: Vec<f64>,
    r4: Vec<f64>,
}

impl JointWorstCaseSearch {
    pub fn new(dom: &WorstCaseDomain) -> Result<Self> {
        dom.validate()?;
        let u_grid = linspace(dom.u_lo, dom.u_hi, dom.grid_u);
        let r_grid = linspace(dom.r_lo, dom.r_hi, dom.grid_r);
        Ok(Self {
            dom: *dom,
            r2: r_grid.iter().map(|r| r * r).collect(),
            r3: r_grid.iter().map(|r| r * r * r).collect(),
            r4: r_grid.iter().map(|r| r.powi(4)).collect(),
            u_grid,
            r_grid,
        })
    }

    pub fn domain(&self) -> &WorstCaseDomain {
        &self.dom
    }

    pub fn evaluate(&self, m: &MomentSet, kappa: f64) -> Result<JointWorstCase> {
        let det = m.joint_determinant();
        let ratio = if m.var_x > 0.0 && m.var_xt > 0.0 {
            det / (m.var_x * m.var_xt)
        } else {
            0.0
        };
        if !(ratio >= SINGULAR_FIM_RATIO) {
            return Err(Error::SingularFim { ratio });
        }

        // trace = κ/det · (var(x̃) + s(u, r)); only s varies over the grid.
        let a: Vec<f64> = self.r4.iter().map(|r4| 4.0 * r4 * m.var_x).collect();
        let b: Vec<f64> = self.r3.iter().map(|r3| 8.0 * r3 * m.cov_x_xt).collect();
        let c: Vec<f64> = self.r2.iter().map(|r2| 4.0 * r2 * m.var_xt).collect();
        let mut best = (0usize, 0usize, f64::NEG_INFINITY);
        for (i, &u) in self.u_grid.iter().enumerate() {
            let w = 1.0 / ((1.0 - u * u) * (1.0 - u * u));
            let uu = u * u;
            for j in 0..self.r_grid.len() {
                let s = w * (a[j] + u * b[j] + uu * c[j]);
                if s > best.2 {
                    best = (i, j, s);
                }
            }
        }

        let trace_at = |u: f64, r: f64| -> f64 {
            m.joint_crb(&TargetParams { u, r }, kappa)
                .map(|c| c.trace())
                .unwrap_or(f64::NEG_INFINITY)
        };
        let (mut u_opt, mut r_opt) = (self.u_grid[best.0], self.r_grid[best.1]);
        let mut value = trace_at(u_opt, r_opt);
        if self.dom.u_lo < self.dom.u_hi {
            let (lo, hi) = cell_around(&self.u_grid, best.0);
            let (u, v) = golden_section_max(lo, hi, REFINE_TOL, |u| trace_at(u, r_opt));
            if v > value {
                u_opt = u;
                value = v;
            }
        }
        if self.dom.r_lo < self.dom.r_hi {
            let (lo, hi) = cell_around(&self.r_grid, best.1);
            let (r, v) = golden_section_max(lo, hi, REFINE_TOL, |r| trace_at(u_opt, r));
            if v > value {
                r_opt = r;
            }
        }
        let eta = TargetParams { u: u_opt, r: r_opt };
        let crb = m.joint_crb(&eta, kappa)?;
        Ok(JointWorstCase {
            trace: crb.trace(),
            eta,
            crb,
        })
    }
}

/// Worst case of `trace(CRB)` over the `(u, r)` box.
pub fn worst_case_joint(
    x: &[f64],
    dom: &WorstCaseDomain,
    cfg: &SensingConfig,
) -> Result<JointWorstCase> {
    JointWorstCaseSearch::new(dom)?.evaluate(&MomentSet::of(x), cfg.kappa())
}
