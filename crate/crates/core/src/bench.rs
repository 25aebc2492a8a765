//! Batch experiment driver: run configuration, CRB sweeps over SNR for each
//! array scheme, optional Monte-Carlo validation, and CSV output.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::crb::{worst_case_crb_r, worst_case_crb_u, worst_case_joint, WorstCaseDomain};
use crate::error::{Error, Result};
use crate::model::{
    fresnel_distance, rayleigh_distance, Apv, SensingConfig, TargetParams, POSITION_TOL,
};
use crate::music::{monte_carlo_mse_with, EstimationCase, MusicGrids};
use crate::placement::{
    algorithm1, benchmark_apv, theorem1_apv, BenchmarkKind, OptimizationTrace, PlacementCase,
    PlacementProblem, SamplingGrid,
};

/// Environment variable capping worker threads (0 = automatic).
pub const THREADS_ENV: &str = "NF_ARRAY_OPT_THREADS";

/// Array geometry compared in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Optimized movable array.
    Proposed,
    /// Benchmark 1.
    UlaHalfwave,
    /// Benchmark 2.
    SparseUla,
    /// Benchmark 3.
    FarfieldOptimal,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [
        Scheme::Proposed,
        Scheme::UlaHalfwave,
        Scheme::SparseUla,
        Scheme::FarfieldOptimal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::UlaHalfwave => "ula_halfwave",
            Scheme::SparseUla => "sparse_ula",
            Scheme::FarfieldOptimal => "farfield_optimal",
        }
    }

    fn benchmark(self) -> Option<BenchmarkKind> {
        match self {
            Scheme::Proposed => None,
            Scheme::UlaHalfwave => Some(BenchmarkKind::UlaHalfwave),
            Scheme::SparseUla => Some(BenchmarkKind::SparseUla),
            Scheme::FarfieldOptimal => Some(BenchmarkKind::FarfieldOptimal),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.as_str() == s)
            .ok_or_else(|| Error::ConfigValidation {
                field: "schemes".into(),
                message: format!("unknown scheme `{s}`"),
            })
    }
}

fn d_wavelength() -> f64 {
    1.0
}
fn d_n() -> usize {
    16
}
fn d_a() -> f64 {
    10.0
}
fn d_d() -> f64 {
    0.5
}
fn d_one() -> usize {
    1
}
fn d_unit() -> f64 {
    1.0
}
fn d_cases() -> Vec<u8> {
    vec![1, 2, 3]
}
fn d_snr_start() -> f64 {
    0.0
}
fn d_snr_stop() -> f64 {
    30.0
}
fn d_snr_step() -> f64 {
    5.0
}
fn d_schemes() -> Vec<Scheme> {
    Scheme::ALL.to_vec()
}
fn d_u_star() -> f64 {
    std::f64::consts::FRAC_1_SQRT_2
}
fn d_m() -> usize {
    2000
}
fn d_512() -> usize {
    512
}
fn d_passes() -> usize {
    10
}
fn d_music_u() -> usize {
    2048
}
fn d_music_r() -> usize {
    1024
}
fn d_joint_u() -> usize {
    256
}
fn d_joint_r() -> usize {
    128
}
fn d_out() -> PathBuf {
    PathBuf::from("out")
}

/// On-disk form: every field optional, geometry-dependent defaults left
/// open until the array is known.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfigFile {
    #[serde(default = "d_wavelength", alias = "lambda")]
    wavelength: f64,
    #[serde(default = "d_n", rename = "N", alias = "num_antennas")]
    num_antennas: usize,
    #[serde(default = "d_a", rename = "A", alias = "segment_length")]
    segment_length: f64,
    #[serde(default = "d_d", rename = "d", alias = "min_spacing")]
    min_spacing: f64,
    #[serde(default = "d_one", rename = "T", alias = "num_snapshots")]
    num_snapshots: usize,
    #[serde(default = "d_unit", rename = "P", alias = "transmit_power")]
    transmit_power: f64,
    #[serde(default = "d_unit", alias = "beta")]
    channel_gain: f64,
    #[serde(default = "d_cases")]
    cases: Vec<u8>,
    #[serde(default = "d_snr_start")]
    snr_start_db: f64,
    #[serde(default = "d_snr_stop")]
    snr_stop_db: f64,
    #[serde(default = "d_snr_step")]
    snr_step_db: f64,
    #[serde(default = "d_schemes")]
    schemes: Vec<Scheme>,
    r_star: Option<f64>,
    #[serde(default = "d_u_star")]
    u_star: f64,
    #[serde(default)]
    u_lo: f64,
    #[serde(default = "d_u_star")]
    u_hi: f64,
    r_min: Option<f64>,
    r_max: Option<f64>,
    #[serde(default = "d_m", rename = "M", alias = "grid_points")]
    grid_points: usize,
    #[serde(default = "d_512", rename = "G_u", alias = "grid_u")]
    grid_u: usize,
    #[serde(default = "d_512", rename = "G_r", alias = "grid_r")]
    grid_r: usize,
    #[serde(default = "d_passes")]
    passes: usize,
    #[serde(default = "d_music_u")]
    music_u_points: usize,
    #[serde(default = "d_music_r")]
    music_r_points: usize,
    #[serde(default = "d_joint_u")]
    music_joint_u_points: usize,
    #[serde(default = "d_joint_r")]
    music_joint_r_points: usize,
    #[serde(default)]
    trials: usize,
    joint_trials: Option<usize>,
    #[serde(default)]
    seed: u64,
    truth_u: Option<f64>,
    truth_r: Option<f64>,
    #[serde(default = "d_out")]
    out_dir: PathBuf,
}

/// Fully resolved, validated experiment description.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub sensing: SensingConfig,
    pub cases: Vec<u8>,
    pub snr_start_db: f64,
    pub snr_stop_db: f64,
    pub snr_step_db: f64,
    pub schemes: Vec<Scheme>,
    /// Known range in the AoA-only case.
    pub r_star: f64,
    /// Known AoA in the distance-only case.
    pub u_star: f64,
    /// Worst-case u-interval of the joint case.
    pub u_lo: f64,
    pub u_hi: f64,
    pub r_min: f64,
    pub r_max: f64,
    /// Algorithm-1 sampling points `M`.
    pub grid_points: usize,
    pub grid_u: usize,
    pub grid_r: usize,
    /// Algorithm-1 pass budget.
    pub passes: usize,
    pub music: MusicGrids,
    /// Monte-Carlo trials per 1D cell; 0 disables Monte-Carlo.
    pub trials: usize,
    /// Monte-Carlo trials per joint-case cell.
    pub joint_trials: usize,
    pub seed: u64,
    /// True target used by the Monte-Carlo trials.
    pub truth: TargetParams,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        parse_config("{}").expect("defaults are valid")
    }
}

fn invalid(field: &str, message: impl Into<String>) -> Error {
    Error::ConfigValidation {
        field: field.into(),
        message: message.into(),
    }
}

impl RunConfigFile {
    fn resolve(self) -> Result<RunConfig> {
        let sensing = SensingConfig {
            wavelength: self.wavelength,
            num_antennas: self.num_antennas,
            segment_length: self.segment_length,
            min_spacing: self.min_spacing,
            num_snapshots: self.num_snapshots,
            transmit_power: self.transmit_power,
            noise_power: 1.0,
            channel_gain: self.channel_gain,
        };
        sensing
            .validate()
            .map_err(|e| invalid("sensing", e.to_string()))?;
        let (r_fs, r_rl) = (fresnel_distance(&sensing), rayleigh_distance(&sensing));
        let r_star = self.r_star.unwrap_or(r_rl / 4.0);
        let r_min = self.r_min.unwrap_or(r_fs);
        let r_max = self.r_max.unwrap_or(r_rl / 2.0);
        let music = MusicGrids {
            u_points: self.music_u_points,
            r_points: self.music_r_points,
            joint_u_points: self.music_joint_u_points,
            joint_r_points: self.music_joint_r_points,
            r_min,
            r_max,
        };
        let truth = TargetParams {
            u: self.truth_u.unwrap_or(self.u_star),
            r: self.truth_r.unwrap_or(r_star),
        };
        let cfg = RunConfig {
            sensing,
            cases: self.cases,
            snr_start_db: self.snr_start_db,
            snr_stop_db: self.snr_stop_db,
            snr_step_db: self.snr_step_db,
            schemes: self.schemes,
            r_star,
            u_star: self.u_star,
            u_lo: self.u_lo,
            u_hi: self.u_hi,
            r_min,
            r_max,
            grid_points: self.grid_points,
            grid_u: self.grid_u,
            grid_r: self.grid_r,
            passes: self.passes,
            music,
            trials: self.trials,
            joint_trials: self.joint_trials.unwrap_or(self.trials),
            seed: self.seed,
            truth,
            out_dir: self.out_dir,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RunConfig {
    /// Checks every invariant, naming the offending field.
    pub fn validate(&self) -> Result<()> {
        let mut s = self.sensing;
        s.noise_power = 1.0;
        s.validate()
            .map_err(|e| invalid("sensing", e.to_string()))?;
        if !(self.snr_step_db > 0.0 && self.snr_step_db.is_finite()) {
            return Err(invalid(
                "snr_step_db",
                format!("must be positive, got {}", self.snr_step_db),
            ));
        }
        if !(self.snr_start_db.is_finite() && self.snr_stop_db.is_finite())
            || self.snr_stop_db < self.snr_start_db
        {
            return Err(invalid(
                "snr_stop_db",
                format!(
                    "sweep [{}, {}] is empty",
                    self.snr_start_db, self.snr_stop_db
                ),
            ));
        }
        if self.cases.is_empty() {
            return Err(invalid("cases", "at least one case is required"));
        }
        if let Some(c) = self.cases.iter().find(|c| !(1..=3).contains(*c)) {
            return Err(invalid("cases", format!("case {c} is not 1, 2 or 3")));
        }
        if self.schemes.is_empty() {
            return Err(invalid("schemes", "at least one scheme is required"));
        }
        let (r_fs, r_rl) = (fresnel_distance(&s), rayleigh_distance(&s));
        let near = |name: &str, r: f64| {
            if r < r_fs - POSITION_TOL || r > r_rl + POSITION_TOL || !r.is_finite() {
                Err(invalid(
                    name,
                    format!("{r} outside the near-field region [{r_fs}, {r_rl}]"),
                ))
            } else {
                Ok(())
            }
        };
        near("r_star", self.r_star)?;
        near("r_min", self.r_min)?;
        near("r_max", self.r_max)?;
        if self.r_max <= self.r_min {
            return Err(invalid(
                "r_max",
                format!("must exceed r_min = {}", self.r_min),
            ));
        }
        for (name, u) in [
            ("u_star", self.u_star),
            ("u_lo", self.u_lo),
            ("u_hi", self.u_hi),
        ] {
            if !(0.0..1.0).contains(&u) {
                return Err(invalid(name, format!("{u} outside [0, 1)")));
            }
        }
        if self.u_hi < self.u_lo {
            return Err(invalid(
                "u_hi",
                format!("must be at least u_lo = {}", self.u_lo),
            ));
        }
        if self.grid_points < 10 * s.num_antennas {
            return Err(invalid(
                "M",
                format!("need M >= 10 N = {}", 10 * s.num_antennas),
            ));
        }
        if self.grid_u < 2 || self.grid_r < 2 {
            return Err(invalid(
                "G_u",
                "worst-case grids need at least 2 points per axis",
            ));
        }
        if self.passes == 0 {
            return Err(invalid("passes", "Algorithm 1 needs at least one pass"));
        }
        self.music
            .validate()
            .map_err(|e| invalid("music_u_points", e.to_string()))?;
        if !(0.0..1.0).contains(&self.truth.u) {
            return Err(invalid(
                "truth_u",
                format!("{} outside [0, 1)", self.truth.u),
            ));
        }
        if !(self.r_min..=self.r_max).contains(&self.truth.r) {
            return Err(invalid(
                "truth_r",
                format!(
                    "{} outside the search range [{}, {}]",
                    self.truth.r, self.r_min, self.r_max
                ),
            ));
        }
        Ok(())
    }

    /// `start + k step` for every `k` that stays within `stop`.
    pub fn snr_values(&self) -> Vec<f64> {
        let count =
            ((self.snr_stop_db - self.snr_start_db) / self.snr_step_db + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|k| self.snr_start_db + k as f64 * self.snr_step_db)
            .collect()
    }

    pub fn domain(&self) -> Result<WorstCaseDomain> {
        WorstCaseDomain::new(
            self.u_lo,
            self.u_hi,
            self.r_min,
            self.r_max,
            self.grid_u,
            self.grid_r,
        )
    }

    pub fn placement_case(&self, case: u8) -> PlacementCase {
        match case {
            1 => PlacementCase::AoaOnly {
                r_star: self.r_star,
            },
            2 => PlacementCase::DistanceOnly {
                u_star: self.u_star,
            },
            _ => PlacementCase::Joint,
        }
    }
}

/// Parses a flat JSON document, filling absent fields with the defaults.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let file: RunConfigFile = serde_json::from_str(text).map_err(|e| Error::ConfigParse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    file.resolve()
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    parse_config(&fs::read_to_string(path)?)
}

/// One (case, scheme, SNR) cell of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub case: u8,
    pub scheme: Scheme,
    pub snr_db: f64,
    pub crb_u: Option<f64>,
    pub crb_r: Option<f64>,
    pub crb_trace: Option<f64>,
    pub u_opt: f64,
    pub r_opt: f64,
    pub mse_u: Option<f64>,
    pub mse_r: Option<f64>,
    pub trials: Option<usize>,
}

impl SweepRecord {
    /// The bound the scheme was optimized for in this case.
    pub fn objective_crb(&self) -> Option<f64> {
        match self.case {
            1 => self.crb_u,
            2 => self.crb_r,
            _ => self.crb_trace,
        }
    }
}

/// Scheme geometry used in one case, with the optimizer trace when
/// Algorithm 1 produced it.
#[derive(Debug, Clone)]
pub struct SchemeArray {
    pub case: u8,
    pub scheme: Scheme,
    pub apv: Apv,
    pub trace: Option<OptimizationTrace>,
}

/// Builds the array of `scheme` for `case`. The proposed array is the
/// two-cluster closed form for the single-parameter cases and the
/// Algorithm-1 output, started from that closed form, for the joint case.
pub fn scheme_array(cfg: &RunConfig, case: u8, scheme: Scheme) -> Result<SchemeArray> {
    let s = &cfg.sensing;
    let (apv, trace) = match (scheme.benchmark(), case) {
        (Some(kind), _) => (
            benchmark_apv(kind, s.num_antennas, s.segment_length, s.min_spacing)?,
            None,
        ),
        (None, 1 | 2) => (
            theorem1_apv(s.num_antennas, s.segment_length, s.min_spacing)?,
            None,
        ),
        (None, _) => {
            let problem = PlacementProblem::new(PlacementCase::Joint, cfg.domain()?, *s)?;
            let grid = SamplingGrid::new(cfg.grid_points, s.segment_length, s.num_antennas)?;
            let init = theorem1_apv(s.num_antennas, s.segment_length, s.min_spacing)?;
            let (apv, trace) = algorithm1(&problem, &grid, &init, cfg.passes)?;
            (apv, Some(trace))
        }
    };
    Ok(SchemeArray {
        case,
        scheme,
        apv,
        trace,
    })
}

fn sweep_cell(cfg: &RunConfig, arr: &SchemeArray, snr_db: f64) -> Result<SweepRecord> {
    let sensing = cfg.sensing.with_snr_db(snr_db);
    let dom = cfg.domain()?;
    let x: &[f64] = &arr.apv;
    let mut rec = SweepRecord {
        case: arr.case,
        scheme: arr.scheme,
        snr_db,
        crb_u: None,
        crb_r: None,
        crb_trace: None,
        u_opt: 0.0,
        r_opt: 0.0,
        mse_u: None,
        mse_r: None,
        trials: None,
    };
    let (est_case, trials) = match arr.case {
        1 => {
            let wc = worst_case_crb_u(x, cfg.r_star, &dom, &sensing)?;
            (rec.crb_u, rec.u_opt, rec.r_opt) = (Some(wc.bound), wc.arg, cfg.r_star);
            (EstimationCase::AoaOnly, cfg.trials)
        }
        2 => {
            let wc = worst_case_crb_r(x, cfg.u_star, &dom, &sensing)?;
            (rec.crb_r, rec.u_opt, rec.r_opt) = (Some(wc.bound), cfg.u_star, wc.arg);
            (EstimationCase::DistanceOnly, cfg.trials)
        }
        _ => {
            let wc = worst_case_joint(x, &dom, &sensing)?;
            rec.crb_u = Some(wc.crb.crb_u);
            rec.crb_r = Some(wc.crb.crb_r);
            rec.crb_trace = Some(wc.trace);
            (rec.u_opt, rec.r_opt) = (wc.eta.u, wc.eta.r);
            (EstimationCase::Joint, cfg.joint_trials)
        }
    };
    if trials > 0 {
        let truth = match est_case {
            EstimationCase::AoaOnly => TargetParams {
                u: cfg.truth.u,
                r: cfg.r_star,
            },
            EstimationCase::DistanceOnly => TargetParams {
                u: cfg.u_star,
                r: cfg.truth.r,
            },
            EstimationCase::Joint => cfg.truth,
        };
        let rep =
            monte_carlo_mse_with(est_case, x, &truth, &sensing, trials, cfg.seed, &cfg.music)?;
        rec.mse_u = rep.mse_u;
        rec.mse_r = rep.mse_r;
        rec.trials = Some(trials);
    }
    Ok(rec)
}

/// Everything a sweep produced.
#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub records: Vec<SweepRecord>,
    pub arrays: Vec<SchemeArray>,
}

/// Runs every configured (case, scheme, SNR) cell. Scheme arrays do not
/// depend on the SNR, so each one is built once per case and reused.
pub fn run_case_sweep(cfg: &RunConfig) -> Result<SweepOutput> {
    cfg.validate()?;
    let snrs = cfg.snr_values();
    let mut cases = cfg.cases.clone();
    cases.sort_unstable();
    cases.dedup();
    let mut schemes = cfg.schemes.clone();
    schemes.sort_unstable();
    schemes.dedup();

    let mut arrays: BTreeMap<(u8, Scheme), SchemeArray> = BTreeMap::new();
    let mut records = Vec::new();
    for &case in &cases {
        for &scheme in &schemes {
            let arr = scheme_array(cfg, case, scheme)
                .map_err(|e| e.annotate(format!("case {case}, scheme {scheme}")))?;
            for &snr in &snrs {
                let rec = sweep_cell(cfg, &arr, snr).map_err(|e| {
                    e.annotate(format!("case {case}, scheme {scheme}, SNR {snr} dB"))
                })?;
                records.push(rec);
            }
            arrays.insert((case, scheme), arr);
        }
    }
    sort_records(&mut records);
    Ok(SweepOutput {
        records,
        arrays: arrays.into_values().collect(),
    })
}

fn sort_records(records: &mut [SweepRecord]) {
    records.sort_by(|a, b| {
        (a.case, a.scheme)
            .cmp(&(b.case, b.scheme))
            .then(a.snr_db.total_cmp(&b.snr_db))
    });
}

/// Full double precision: 17 significant digits.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub const SWEEP_HEADER: [&str; 11] = [
    "case",
    "scheme",
    "snr_db",
    "crb_u",
    "crb_r",
    "crb_trace",
    "u_opt",
    "r_opt",
    "mse_u",
    "mse_r",
    "trials",
];

/// Writes the sweep table, rows ordered by (case, scheme, SNR).
pub fn emit_csv(records: &[SweepRecord], path: impl AsRef<Path>) -> Result<()> {
    if records.is_empty() {
        return Err(Error::InvalidConfig("no sweep records to write".into()));
    }
    let mut sorted = records.to_vec();
    sort_records(&mut sorted);
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(SWEEP_HEADER).map_err(csv_err)?;
    for r in &sorted {
        w.write_record([
            r.case.to_string(),
            r.scheme.to_string(),
            num(r.snr_db),
            opt(r.crb_u),
            opt(r.crb_r),
            opt(r.crb_trace),
            num(r.u_opt),
            num(r.r_opt),
            opt(r.mse_u),
            opt(r.mse_r),
            r.trials.map(|t| t.to_string()).unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

/// Positions of one array, in wavelengths.
pub fn emit_apv_csv(apv: &Apv, wavelength: f64, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["index", "position_lambda"])
        .map_err(csv_err)?;
    for (i, x) in apv.iter().enumerate() {
        w.write_record([(i + 1).to_string(), num(x / wavelength)])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// CRB reduction of the proposed array over one benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reduction {
    pub case: u8,
    pub snr_db: f64,
    pub benchmark: Scheme,
    pub percent_reduction: f64,
}

/// `100 (1 − proposed / benchmark)`.
pub fn percent_reduction(proposed: f64, benchmark: f64) -> f64 {
    100.0 * (1.0 - proposed / benchmark)
}

/// Reduction of the proposed scheme against every benchmark sharing its
/// (case, SNR) cell.
pub fn report_reductions(records: &[SweepRecord]) -> Result<Vec<Reduction>> {
    let mut cells: BTreeMap<(u8, u64), Vec<&SweepRecord>> = BTreeMap::new();
    for r in records {
        cells
            .entry((r.case, r.snr_db.to_bits()))
            .or_default()
            .push(r);
    }
    if !records.iter().any(|r| r.scheme == Scheme::Proposed) {
        return Err(Error::MissingScheme(Scheme::Proposed.to_string()));
    }
    let mut out = Vec::new();
    for ((case, _), recs) in &cells {
        let Some(prop) = recs.iter().find(|r| r.scheme == Scheme::Proposed) else {
            return Err(Error::MissingScheme(format!(
                "{} (case {case})",
                Scheme::Proposed
            )));
        };
        let mut benches: Vec<&&SweepRecord> = recs
            .iter()
            .filter(|r| r.scheme != Scheme::Proposed)
            .collect();
        if benches.is_empty() {
            return Err(Error::MissingScheme(format!("any benchmark (case {case})")));
        }
        benches.sort_by_key(|r| r.scheme);
        for b in benches {
            let (Some(p), Some(q)) = (prop.objective_crb(), b.objective_crb()) else {
                continue;
            };
            out.push(Reduction {
                case: *case,
                snr_db: prop.snr_db,
                benchmark: b.scheme,
                percent_reduction: percent_reduction(p, q),
            });
        }
    }
    out.sort_by(|a, b| {
        a.case
            .cmp(&b.case)
            .then(a.snr_db.total_cmp(&b.snr_db))
            .then(a.benchmark.cmp(&b.benchmark))
    });
    Ok(out)
}

pub fn emit_reductions_csv(reductions: &[Reduction], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["case", "snr_db", "benchmark", "percent_reduction"])
        .map_err(csv_err)?;
    for r in reductions {
        w.write_record([
            r.case.to_string(),
            num(r.snr_db),
            r.benchmark.to_string(),
            num(r.percent_reduction),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Human-readable reduction table.
pub fn format_reductions(reductions: &[Reduction]) -> String {
    let mut s = String::from("case  snr_db  benchmark         reduction\n");
    for r in reductions {
        s.push_str(&format!(
            "{:<5} {:>6.1}  {:<17} {:>8.2}%\n",
            r.case,
            r.snr_db,
            r.benchmark.as_str(),
            r.percent_reduction
        ));
    }
    s
}

/// Axis and series description of the sweep figures, independent of any
/// plotting tool.
pub fn plotspec(cfg: &RunConfig, arrays: &[SchemeArray]) -> String {
    let mut s = String::new();
    let mut cases = cfg.cases.clone();
    cases.sort_unstable();
    cases.dedup();
    for case in cases {
        let (title, column) = match case {
            1 => ("Worst-case CRB of the AoA estimate", "crb_u"),
            2 => ("Worst-case CRB of the range estimate", "crb_r"),
            _ => ("Worst-case sum of joint CRBs", "crb_trace"),
        };
        s.push_str(&format!(
            "[figure case{case}]\ntitle = {title}\nsource = sweep.csv\nfilter = case == {case}\n"
        ));
        s.push_str(&format!("x = snr_db\nx_label = Received SNR (dB)\ny = {column}\ny_scale = log\nseries = scheme\n"));
        if cfg.trials > 0 {
            let mse = match case {
                1 => "mse_u",
                2 => "mse_r",
                _ => "mse_u + mse_r",
            };
            s.push_str(&format!("overlay = {mse}\n"));
        }
        s.push('\n');
    }
    for arr in arrays.iter().filter(|a| a.case == 3) {
        s.push_str(&format!(
            "[figure apv_{0}]\ntitle = Antenna positions ({0})\nsource = apv_{0}.csv\nx = position_lambda\nx_label = Position (wavelengths)\ny = index\nstyle = markers\n\n",
            arr.scheme
        ));
    }
    s
}

/// Writes `sweep.csv`, `reductions.csv` (when a proposed scheme and a
/// benchmark are present), the joint-case `apv_<scheme>.csv` files and
/// `sweep.plotspec` into `dir`.
pub fn write_outputs(
    cfg: &RunConfig,
    out: &SweepOutput,
    dir: impl AsRef<Path>,
) -> Result<Option<Vec<Reduction>>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    emit_csv(&out.records, dir.join("sweep.csv"))?;
    for arr in out.arrays.iter().filter(|a| a.case == 3) {
        emit_apv_csv(
            &arr.apv,
            cfg.sensing.wavelength,
            dir.join(format!("apv_{}.csv", arr.scheme)),
        )?;
    }
    let has_bench = out.records.iter().any(|r| r.scheme != Scheme::Proposed);
    let has_prop = out.records.iter().any(|r| r.scheme == Scheme::Proposed);
    let reductions = if has_bench && has_prop {
        let red = report_reductions(&out.records)?;
        emit_reductions_csv(&red, dir.join("reductions.csv"))?;
        Some(red)
    } else {
        None
    };
    fs::write(dir.join("sweep.plotspec"), plotspec(cfg, &out.arrays))?;
    Ok(reductions)
}

/// Sizes the global worker pool from [`THREADS_ENV`]; unset or 0 keeps the
/// automatic choice.
pub fn configure_threads_from_env() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| invalid(THREADS_ENV, format!("expected a thread count, got `{raw}`")))?;
    configure_threads(n)
}

#[cfg(feature = "parallel")]
fn configure_threads(n: usize) -> Result<()> {
    if n == 0 {
        return Ok(());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| invalid(THREADS_ENV, e.to_string()))
}

#[cfg(not(feature = "parallel"))]
fn configure_threads(_n: usize) -> Result<()> {
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_full_defaults() {
        let c = parse_config("{}").unwrap();
        assert_eq!(c.sensing.num_antennas, 16);
        assert_eq!(c.sensing.segment_length, 10.0);
        assert_eq!(c.sensing.min_spacing, 0.5);
        assert_eq!(c.sensing.num_snapshots, 1);
        assert_eq!(c.grid_points, 2000);
        assert_eq!(c.r_star, 50.0);
        assert!((c.u_star - 45f64.to_radians().cos()).abs() < 1e-15);
        assert_eq!(c.schemes, Scheme::ALL.to_vec());
        assert_eq!(c.cases, vec![1, 2, 3]);
    }

    #[test]
    fn range_defaults_follow_geometry() {
        let c = parse_config(r#"{"A": 10, "N": 16, "d": 0.5}"#).unwrap();
        assert!((c.r_min - 10.7722).abs() < 1e-4, "{}", c.r_min);
        assert_eq!(c.r_max, 100.0);
    }

    #[test]
    fn zero_step_is_rejected() {
        let err = parse_config(r#"{"snr_step_db": 0}"#).unwrap_err();
        assert!(
            matches!(err, Error::ConfigValidation { ref field, .. } if field == "snr_step_db"),
            "{err}"
        );
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = parse_config("{\n  \"N\": 16,\n  \"A\": }").unwrap_err();
        assert!(matches!(err, Error::ConfigParse { line: 3, .. }), "{err}");
        let err = parse_config(r#"{"bogus": 1}"#).unwrap_err();
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn validation_names_the_field() {
        for (json, field) in [
            (r#"{"cases": []}"#, "cases"),
            (r#"{"cases": [4]}"#, "cases"),
            (r#"{"schemes": []}"#, "schemes"),
            (r#"{"r_max": 500}"#, "r_max"),
            (r#"{"u_hi": 1.0}"#, "u_hi"),
            (r#"{"M": 20}"#, "M"),
            (r#"{"snr_start_db": 10, "snr_stop_db": 0}"#, "snr_stop_db"),
        ] {
            match parse_config(json) {
                Err(Error::ConfigValidation { field: f, .. }) => assert_eq!(f, field, "{json}"),
                other => panic!("{json}: {other:?}"),
            }
        }
        assert!(matches!(
            parse_config(r#"{"schemes": ["nope"]}"#),
            Err(Error::ConfigParse { .. })
        ));
    }

    #[test]
    fn snr_axis_is_inclusive() {
        let c =
            parse_config(r#"{"snr_start_db": -10, "snr_stop_db": 30, "snr_step_db": 10}"#).unwrap();
        assert_eq!(c.snr_values(), vec![-10.0, 0.0, 10.0, 20.0, 30.0]);
        let c =
            parse_config(r#"{"snr_start_db": 0, "snr_stop_db": 1, "snr_step_db": 0.1}"#).unwrap();
        assert_eq!(c.snr_values().len(), 11);
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.as_str().parse::<Scheme>().unwrap(), s);
        }
    }

    fn rec(case: u8, scheme: Scheme, snr: f64, crb: f64) -> SweepRecord {
        SweepRecord {
            case,
            scheme,
            snr_db: snr,
            crb_u: (case == 1).then_some(crb),
            crb_r: (case == 2).then_some(crb),
            crb_trace: (case == 3).then_some(crb),
            u_opt: 0.0,
            r_opt: 50.0,
            mse_u: None,
            mse_r: None,
            trials: None,
        }
    }

    #[test]
    fn reductions_against_each_benchmark() {
        let recs = [
            rec(1, Scheme::Proposed, 20.0, 1.0),
            rec(1, Scheme::UlaHalfwave, 20.0, 4.0),
            rec(1, Scheme::SparseUla, 20.0, 2.0),
        ];
        let red = report_reductions(&recs).unwrap();
        assert_eq!(red.len(), 2);
        assert_eq!(red[0].benchmark, Scheme::UlaHalfwave);
        assert_eq!(red[0].percent_reduction, 75.0);
        assert_eq!(red[1].percent_reduction, 50.0);
        assert_eq!(percent_reduction(3.0, 3.0), 0.0);
    }

    #[test]
    fn reductions_need_the_proposed_scheme() {
        let recs = [rec(1, Scheme::UlaHalfwave, 20.0, 4.0)];
        assert!(matches!(
            report_reductions(&recs),
            Err(Error::MissingScheme(_))
        ));
        let recs = [rec(2, Scheme::Proposed, 20.0, 4.0)];
        assert!(matches!(
            report_reductions(&recs),
            Err(Error::MissingScheme(_))
        ));
    }

    #[test]
    fn csv_rows_are_sorted_and_complete() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        emit_csv(
            &[
                rec(2, Scheme::Proposed, 20.0, 0.5),
                rec(1, Scheme::SparseUla, 10.0, 0.25),
            ],
            &path,
        )
        .unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], SWEEP_HEADER.join(","));
        assert!(lines[1].starts_with("1,sparse_ula,1.0000000000000000e1,2.5000000000000000e-1,,,"));
        assert!(lines[2].starts_with("2,proposed,"));
        assert!(emit_csv(&[], &path).is_err());
    }

    #[test]
    fn sweep_ratios_do_not_depend_on_snr() {
        let c = parse_config(
            r#"{"cases": [1, 2], "snr_start_db": 0, "snr_stop_db": 30, "snr_step_db": 10}"#,
        )
        .unwrap();
        let out = run_case_sweep(&c).unwrap();
        assert_eq!(out.records.len(), 2 * 4 * 4);
        let red = report_reductions(&out.records).unwrap();
        for case in [1u8, 2] {
            for b in [Scheme::UlaHalfwave, Scheme::SparseUla] {
                let vals: Vec<f64> = red
                    .iter()
                    .filter(|r| r.case == case && r.benchmark == b)
                    .map(|r| r.percent_reduction)
                    .collect();
                assert_eq!(vals.len(), 4);
                assert!(vals.iter().all(|v| ((v - vals[0]) / vals[0]).abs() < 1e-9));
            }
        }
    }

    #[test]
    fn plotspec_lists_each_case() {
        let c = RunConfig::default();
        let spec = plotspec(&c, &[]);
        for k in ["case1", "case2", "case3", "crb_trace", "snr_db"] {
            assert!(spec.contains(k), "{k}");
        }
    }
}
