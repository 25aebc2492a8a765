//! Browser bindings: antenna-position optimization, CRB-versus-SNR curves
//! and a single-trial MUSIC spectrum. Every export takes plain numbers and
//! returns a JSON string.

use nf_array::bench::{self, RunConfig, Scheme};
use nf_array::model::{SensingConfig, TargetParams};
use nf_array::music::{
    aoa_grid, estimate_aoa, noise_subspace, sample_covariance, spectrum_1d_aoa, synthesize_echo,
};
use nf_array::Error;
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn to_js(e: Error) -> JsValue {
    JsValue::from_str(&format!("{}: {e}", e.class()))
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("plain data serializes")
}

fn demo_config(
    n: usize,
    a: f64,
    d: f64,
    case: u8,
    m: usize,
    grid: usize,
) -> Result<RunConfig, Error> {
    let text = serde_json::json!({
        "N": n, "A": a, "d": d, "cases": [case], "M": m, "G_u": grid, "G_r": grid,
        "snr_start_db": 20.0, "snr_stop_db": 20.0,
    })
    .to_string();
    bench::parse_config(&text)
}

#[derive(Debug, Serialize)]
pub struct PlacementView {
    pub positions: Vec<f64>,
    pub initial_objective: Option<f64>,
    pub objective_trace: Vec<f64>,
}

/// Proposed array for `case`; the joint case runs the discrete optimizer
/// with `m` sampling points and a `grid × grid` worst-case search.
pub fn placement(
    n: usize,
    a: f64,
    d: f64,
    case: u8,
    m: usize,
    grid: usize,
) -> Result<PlacementView, Error> {
    let cfg = demo_config(n, a, d, case, m, grid)?;
    let arr = bench::scheme_array(&cfg, case, Scheme::Proposed)?;
    Ok(PlacementView {
        positions: arr.apv.positions().to_vec(),
        initial_objective: arr.trace.as_ref().map(|t| t.initial_objective),
        objective_trace: arr
            .trace
            .map(|t| t.records.iter().map(|r| r.objective).collect())
            .unwrap_or_default(),
    })
}

#[derive(Debug, Serialize)]
pub struct CurveSet {
    pub snr_db: Vec<f64>,
    pub series: Vec<Series>,
    pub reductions: Vec<bench::Reduction>,
}

#[derive(Debug, Serialize)]
pub struct Series {
    pub scheme: Scheme,
    pub positions: Vec<f64>,
    pub crb: Vec<f64>,
}

/// Worst-case CRB of every scheme over an SNR sweep.
#[allow(clippy::too_many_arguments)]
pub fn curves(
    n: usize,
    a: f64,
    d: f64,
    case: u8,
    snr_lo: f64,
    snr_hi: f64,
    m: usize,
    grid: usize,
) -> Result<CurveSet, Error> {
    let mut cfg = demo_config(n, a, d, case, m, grid)?;
    cfg.snr_start_db = snr_lo;
    cfg.snr_stop_db = snr_hi;
    cfg.snr_step_db = ((snr_hi - snr_lo) / 20.0).max(0.5);
    let out = bench::run_case_sweep(&cfg)?;
    let series = out
        .arrays
        .iter()
        .map(|arr| Series {
            scheme: arr.scheme,
            positions: arr.apv.positions().to_vec(),
            crb: out
                .records
                .iter()
                .filter(|r| r.scheme == arr.scheme)
                .filter_map(|r| r.objective_crb())
                .collect(),
        })
        .collect();
    Ok(CurveSet {
        snr_db: cfg.snr_values(),
        series,
        reductions: bench::report_reductions(&out.records)?,
    })
}

#[derive(Debug, Serialize)]
pub struct SpectrumView {
    pub u: Vec<f64>,
    pub spectrum_db: Vec<f64>,
    pub estimate: f64,
    pub truth: f64,
}

/// One noisy snapshot of a target at `(u, r)` seen by the two-cluster
/// array, and the AoA MUSIC spectrum with the range known.
pub fn spectrum(
    n: usize,
    a: f64,
    d: f64,
    u: f64,
    r: f64,
    snr_db: f64,
    seed: u64,
) -> Result<SpectrumView, Error> {
    let cfg = SensingConfig {
        num_antennas: n,
        segment_length: a,
        min_spacing: d,
        ..SensingConfig::default()
    }
    .with_snr_db(snr_db);
    cfg.validate()?;
    let x = nf_array::placement::theorem1_apv(n, a, d)?;
    let eta = TargetParams::new(u, r)?;
    let sub = noise_subspace(&sample_covariance(&synthesize_echo(&x, &eta, &cfg, seed)))?;
    let grid = aoa_grid(512);
    let spec = spectrum_1d_aoa(&x, &sub, r, &grid, &cfg);
    Ok(SpectrumView {
        spectrum_db: spec.values.iter().map(|v| 10.0 * v.log10()).collect(),
        u: grid.clone(),
        estimate: estimate_aoa(&x, &sub, r, &grid, &cfg),
        truth: u,
    })
}

#[wasm_bindgen]
pub fn optimize_apv(
    n: usize,
    a: f64,
    d: f64,
    case: u8,
    m: usize,
    grid: usize,
) -> Result<String, JsValue> {
    placement(n, a, d, case, m, grid)
        .map(|v| json(&v))
        .map_err(to_js)
}

#[allow(clippy::too_many_arguments)]
#[wasm_bindgen]
pub fn crb_curves(
    n: usize,
    a: f64,
    d: f64,
    case: u8,
    snr_lo: f64,
    snr_hi: f64,
    m: usize,
    grid: usize,
) -> Result<String, JsValue> {
    curves(n, a, d, case, snr_lo, snr_hi, m, grid)
        .map(|v| json(&v))
        .map_err(to_js)
}

#[wasm_bindgen]
pub fn music_spectrum(
    n: usize,
    a: f64,
    d: f64,
    u: f64,
    r: f64,
    snr_db: f64,
    seed: u32,
) -> Result<String, JsValue> {
    spectrum(n, a, d, u, r, snr_db, seed as u64)
        .map(|v| json(&v))
        .map_err(to_js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn placement_of_single_parameter_case_is_two_clusters() {
        let v = placement(16, 10.0, 0.5, 1, 400, 64).unwrap();
        assert_eq!(v.positions[7], 3.5);
        assert_eq!(v.positions[8], 6.5);
        assert!(v.objective_trace.is_empty());
    }

    #[test]
    fn joint_placement_trace_is_monotone() {
        let v = placement(8, 5.0, 0.5, 3, 100, 32).unwrap();
        assert_eq!(v.positions.len(), 8);
        let mut prev = v.initial_objective.unwrap();
        for &o in &v.objective_trace {
            assert!(o >= prev);
            prev = o;
        }
    }

    #[test]
    fn curves_cover_every_scheme() {
        let c = curves(16, 10.0, 0.5, 2, 0.0, 30.0, 400, 64).unwrap();
        assert_eq!(c.series.len(), 4);
        assert!(c.series.iter().all(|s| s.crb.len() == c.snr_db.len()));
        let ula = c
            .reductions
            .iter()
            .find(|r| r.benchmark == Scheme::UlaHalfwave)
            .unwrap();
        assert!((ula.percent_reduction - 74.2).abs() < 0.1);
    }

    #[test]
    fn spectrum_peaks_near_truth() {
        let s = spectrum(16, 10.0, 0.5, 0.4, 50.0, 30.0, 1).unwrap();
        assert!((s.estimate - 0.4).abs() < 1e-2);
        assert_eq!(s.u.len(), s.spectrum_db.len());
        assert!(json(&s).contains("\"estimate\""));
    }

    #[test]
    fn bad_geometry_is_an_error() {
        assert!(matches!(
            placement(40, 10.0, 0.5, 1, 400, 64),
            Err(Error::ConfigValidation { .. })
        ));
    }
}
