//! Monte Carlo MSE of the MUSIC estimators against the CRB.
//!
//! Usage: `cargo run --release --example music_efficiency -- [trials]`

use nf_array::model::{SensingConfig, TargetParams};
use nf_array::music::{monte_carlo_mse, EstimationCase};
use nf_array::placement::{benchmark_apv, BenchmarkKind};

fn main() -> nf_array::Result<()> {
    let trials: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(1000);
    let eta = TargetParams::new(std::f64::consts::FRAC_1_SQRT_2, 50.0)?;
    let kinds = [
        BenchmarkKind::UlaHalfwave,
        BenchmarkKind::SparseUla,
        BenchmarkKind::FarfieldOptimal,
    ];
    for case in [
        EstimationCase::AoaOnly,
        EstimationCase::DistanceOnly,
        EstimationCase::Joint,
    ] {
        let n = if case == EstimationCase::Joint {
            (trials / 10).max(1)
        } else {
            trials
        };
        for kind in kinds {
            let x = benchmark_apv(kind, 16, 10.0, 0.5)?;
            for snr in [10.0, 20.0, 30.0] {
                let cfg = SensingConfig::default().with_snr_db(snr);
                let rep = monte_carlo_mse(case, x.positions(), &eta, &cfg, n, 7)?;
                println!(
                    "{case:?} {kind:?} {snr} dB: MSE/CRB = {:.4} (MSE {:.4e}, CRB {:.4e}, {n} trials)",
                    rep.efficiency_ratio(),
                    rep.mse_total(),
                    rep.crb_total()
                );
            }
        }
    }
    Ok(())
}
