//! Antenna placement: the two-cluster closed form, benchmark geometries and
//! the sequential discrete-sampling optimizer for the worst-case objectives.

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::crb::{
    worst_case_crb_r_from, worst_case_crb_u_from, JointWorstCaseSearch, MomentSet, WorstCaseDomain,
};
use crate::error::{Error, Result};
use crate::model::{Apv, SensingConfig, POSITION_TOL};

/// Two clusters at the segment ends: `⌊N/2⌋` antennas packed from 0 at
/// spacing `d`, the rest packed against `A`.
pub fn theorem1_apv(n: usize, a: f64, d: f64) -> Result<Apv> {
    check_geometry(n, a, d)?;
    let half = n / 2;
    let positions = (1..=n)
        .map(|k| {
            if k <= half {
                (k - 1) as f64 * d
            } else {
                a - (n - k) as f64 * d
            }
        })
        .collect();
    Apv::new(positions, a, d)
}

fn check_geometry(n: usize, a: f64, d: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidApv("need at least one antenna".into()));
    }
    let needed = (n - 1) as f64 * d;
    if needed > a + POSITION_TOL {
        return Err(Error::InfeasibleGeometry {
            n,
            spacing: d,
            needed,
            segment: a,
        });
    }
    Ok(())
}

/// Fixed-position reference arrays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkKind {
    /// `x_n = (n-1) d`.
    UlaHalfwave,
    /// `x_n = (n-1) A/(N-1)`, full aperture.
    SparseUla,
    /// Far-field optimum, identical to [`theorem1_apv`].
    FarfieldOptimal,
}

pub fn benchmark_apv(kind: BenchmarkKind, n: usize, a: f64, d: f64) -> Result<Apv> {
    check_geometry(n, a, d)?;
    match kind {
        BenchmarkKind::UlaHalfwave => Apv::new((0..n).map(|k| k as f64 * d).collect(), a, d),
        BenchmarkKind::SparseUla => {
            if n < 2 {
                return Apv::new(vec![0.0], a, d);
            }
            let step = a / (n - 1) as f64;
            if step < d - POSITION_TOL {
                return Err(Error::InfeasibleGeometry {
                    n,
                    spacing: d,
                    needed: (n - 1) as f64 * d,
                    segment: a,
                });
            }
            let positions = (0..n)
                .map(|k| if k == n - 1 { a } else { k as f64 * step })
                .collect();
            Apv::new(positions, a, d)
        }
        BenchmarkKind::FarfieldOptimal => theorem1_apv(n, a, d),
    }
}

/// Uniform sampling points `{i·A/M : i = 0..=M}` on the segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingGrid {
    num_points: usize,
    segment: f64,
}

impl SamplingGrid {
    /// Requires `M >= 10 N`.
    pub fn new(num_points: usize, segment: f64, num_antennas: usize) -> Result<Self> {
        if num_points < 10 * num_antennas || num_points == 0 {
            return Err(Error::InvalidGrid(format!(
                "{num_points} sampling points is too coarse for {num_antennas} antennas (need at least {})",
                10 * num_antennas
            )));
        }
        Self::coarse(num_points, segment)
    }

    /// Grid without the density requirement, for exhaustive enumeration at
    /// small `M`.
    pub fn coarse(num_points: usize, segment: f64) -> Result<Self> {
        if num_points == 0 {
            return Err(Error::InvalidGrid(
                "need at least one sampling interval".into(),
            ));
        }
        if !(segment > 0.0 && segment.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "segment length {segment} must be positive"
            )));
        }
        Ok(Self {
            num_points,
            segment,
        })
    }

    /// `M`; the grid holds `M + 1` points including both segment ends.
    pub fn num_points(&self) -> usize {
        self.num_points
    }

    /// `δ_s = A / M`.
    pub fn spacing(&self) -> f64 {
        self.segment / self.num_points as f64
    }

    pub fn segment(&self) -> f64 {
        self.segment
    }

    pub fn point(&self, i: usize) -> f64 {
        if i == self.num_points {
            self.segment
        } else {
            i as f64 * self.segment / self.num_points as f64
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..=self.num_points).map(|i| self.point(i)).collect()
    }

    fn nearest_index(&self, x: f64) -> usize {
        ((x / self.spacing()).round().max(0.0) as usize).min(self.num_points)
    }
}

fn clear_of(s: f64, fixed: &[f64], d: f64) -> bool {
    fixed.iter().all(|p| (s - p).abs() >= d - POSITION_TOL)
}

/// Sampling points at distance `>= d` from every already-updated position
/// (`fixed_before`) and every not-yet-updated one (`fixed_after`).
pub fn feasible_points(
    grid: &SamplingGrid,
    fixed_before: &[f64],
    fixed_after: &[f64],
    d: f64,
) -> Result<Vec<f64>> {
    let points: Vec<f64> = grid
        .points()
        .into_iter()
        .filter(|&s| clear_of(s, fixed_before, d) && clear_of(s, fixed_after, d))
        .collect();
    if points.is_empty() {
        return Err(Error::EmptyFeasibleSet {
            antenna: fixed_before.len() + 1,
        });
    }
    Ok(points)
}

/// Which parameter is unknown, with the known one where applicable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum PlacementCase {
    /// Range known to be `r_star`; AoA unknown over the domain's u-range.
    AoaOnly { r_star: f64 },
    /// AoA known to be `u_star`; range unknown over the domain's r-range.
    DistanceOnly { u_star: f64 },
    /// Both unknown over the full domain.
    Joint,
}

impl PlacementCase {
    pub fn number(&self) -> u8 {
        match self {
            PlacementCase::AoaOnly { .. } => 1,
            PlacementCase::DistanceOnly { .. } => 2,
            PlacementCase::Joint => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacementProblem {
    pub case: PlacementCase,
    pub domain: WorstCaseDomain,
    pub cfg: SensingConfig,
}

impl PlacementProblem {
    pub fn new(case: PlacementCase, domain: WorstCaseDomain, cfg: SensingConfig) -> Result<Self> {
        cfg.validate()?;
        domain.validate()?;
        match case {
            PlacementCase::AoaOnly { r_star } if !(r_star > 0.0 && r_star.is_finite()) => {
                return Err(Error::InvalidConfig(format!(
                    "r_star must be positive, got {r_star}"
                )));
            }
            PlacementCase::DistanceOnly { u_star } if !(0.0..1.0).contains(&u_star) => {
                return Err(Error::InvalidConfig(format!(
                    "u_star must lie in [0, 1), got {u_star}"
                )));
            }
            _ => {}
        }
        Ok(Self { case, domain, cfg })
    }
}

/// Evaluates the worst-case objective of a placement problem; the value is
/// to be maximized and only depends on the multiset of positions.
#[derive(Debug, Clone)]
pub struct ObjectiveEvaluator {
    problem: PlacementProblem,
    kappa: f64,
    joint: Option<JointWorstCaseSearch>,
}

impl ObjectiveEvaluator {
    pub fn new(problem: &PlacementProblem) -> Result<Self> {
        let joint = match problem.case {
            PlacementCase::Joint => Some(JointWorstCaseSearch::new(&problem.domain)?),
            _ => None,
        };
        Ok(Self {
            problem: *problem,
            kappa: problem.cfg.kappa(),
            joint,
        })
    }

    pub fn evaluate(&self, positions: &[f64]) -> Result<f64> {
        let m = MomentSet::of(positions);
        match self.problem.case {
            PlacementCase::AoaOnly { r_star } => {
                let wc = worst_case_crb_u_from(&m, r_star, &self.problem.domain, self.kappa)?;
                Ok(m.f_u(wc.arg, r_star))
            }
            PlacementCase::DistanceOnly { u_star } => {
                let wc = worst_case_crb_r_from(&m, u_star, &self.problem.domain, self.kappa)?;
                Ok(m.f_r(wc.arg, u_star))
            }
            PlacementCase::Joint => {
                let search = self
                    .joint
                    .as_ref()
                    .expect("joint search built for joint case");
                Ok(1.0 / search.evaluate(&m, self.kappa)?.trace)
            }
        }
    }
}

/// `F*_u`, `F*_r` or `1 / worst-case trace`, depending on the case.
pub fn objective_value(problem: &PlacementProblem, x: &Apv) -> Result<f64> {
    ObjectiveEvaluator::new(problem)?.evaluate(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// 1-based update counter across all passes.
    pub iteration: usize,
    /// 1-based index of the antenna that was updated.
    pub antenna: usize,
    pub position: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub initial_objective: f64,
    pub records: Vec<TraceRecord>,
}

impl OptimizationTrace {
    pub fn is_monotone(&self) -> bool {
        let mut prev = self.initial_objective;
        for r in &self.records {
            if r.objective < prev {
                return false;
            }
            prev = r.objective;
        }
        true
    }

    pub fn final_objective(&self) -> f64 {
        self.records
            .last()
            .map_or(self.initial_objective, |r| r.objective)
    }
}

/// Moves every position of `x` onto the grid, keeping the spacing
/// constraint; a point that collides with an earlier one shifts to the
/// nearest free index.
pub fn snap_to_grid(x: &[f64], grid: &SamplingGrid, d: f64) -> Result<Vec<usize>> {
    let mut taken: Vec<usize> = Vec::with_capacity(x.len());
    for (n, &xn) in x.iter().enumerate() {
        let want = grid.nearest_index(xn);
        let ok = |i: usize, taken: &[usize]| {
            taken
                .iter()
                .all(|&j| (grid.point(i) - grid.point(j)).abs() >= d - POSITION_TOL)
        };
        let chosen = (0..=grid.num_points())
            .flat_map(|off| {
                let below = want.checked_sub(off);
                let above = (want + off <= grid.num_points()).then_some(want + off);
                [below, above]
            })
            .flatten()
            .find(|&i| ok(i, &taken))
            .ok_or(Error::EmptyFeasibleSet { antenna: n + 1 })?;
        taken.push(chosen);
    }
    Ok(taken)
}

fn evaluate_candidates(
    eval: &ObjectiveEvaluator,
    base: &[f64],
    slot: usize,
    cands: &[f64],
) -> Vec<Result<f64>> {
    let run = |&s: &f64| {
        let mut trial = base.to_vec();
        trial[slot] = s;
        eval.evaluate(&trial)
    };
    #[cfg(feature = "parallel")]
    {
        cands.par_iter().map(run).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        cands.iter().map(run).collect()
    }
}

/// Sequential discrete-sampling optimizer.
///
/// Antenna `n = 1..N` is moved in turn to the sampling point that maximizes
/// the case objective with all other antennas held fixed; its candidates are
/// the points at least `d` away from every other antenna. Each full sweep is
/// one pass; iteration stops early once a pass moves nothing. The objective
/// never decreases, and argmax ties go to the smallest position.
pub fn algorithm1(
    problem: &PlacementProblem,
    grid: &SamplingGrid,
    x_init: &Apv,
    passes: usize,
) -> Result<(Apv, OptimizationTrace)> {
    let d = problem.cfg.min_spacing;
    if (grid.segment() - problem.cfg.segment_length).abs() > POSITION_TOL {
        return Err(Error::InvalidGrid(format!(
            "grid segment {} differs from configured segment {}",
            grid.segment(),
            problem.cfg.segment_length
        )));
    }
    let eval = ObjectiveEvaluator::new(problem)?;
    let mut working: Vec<f64> = snap_to_grid(x_init, grid, d)?
        .into_iter()
        .map(|i| grid.point(i))
        .collect();
    let mut current = eval.evaluate(&working)?;
    let mut trace = OptimizationTrace {
        initial_objective: current,
        records: Vec::new(),
    };

    let n_ant = working.len();
    for _ in 0..passes {
        let mut moved = false;
        for n in 0..n_ant {
            let cands = feasible_points(grid, &working[..n], &working[n + 1..], d)?;
            let values = evaluate_candidates(&eval, &working, n, &cands);
            let mut best: Option<(f64, f64)> = None;
            for (&s, v) in cands.iter().zip(values) {
                let v = v?;
                if best.is_none_or(|(_, bv)| v > bv) {
                    best = Some((s, v));
                }
            }
            let (s, v) = best.expect("feasible set is non-empty");
            // The current position is itself a candidate, so v >= current.
            if s != working[n] {
                moved = true;
            }
            working[n] = s;
            current = v;
            trace.records.push(TraceRecord {
                iteration: trace.records.len() + 1,
                antenna: n + 1,
                position: s,
                objective: current,
            });
        }
        if !moved {
            break;
        }
    }

    let apv = Apv::from_unsorted(working, problem.cfg.segment_length, d)?;
    Ok((apv, trace))
}
