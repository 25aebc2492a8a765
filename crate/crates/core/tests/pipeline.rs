use nf_array::bench::{self, Scheme};
use nf_array::crb::{crb_u_case1, moments, worst_case_crb_u, WorstCaseDomain};
use nf_array::model::{SensingConfig, TargetParams};
use nf_array::music::{
    aoa_grid, estimate_aoa, estimate_distance, estimate_joint, noise_subspace, range_grid,
    sample_covariance, synthesize_echo,
};
use nf_array::placement::{benchmark_apv, theorem1_apv, BenchmarkKind};

fn cfg(snr_db: f64) -> SensingConfig {
    SensingConfig::default().with_snr_db(snr_db)
}

#[test]
fn two_clusters_beat_every_benchmark_in_the_single_parameter_cases() {
    let c = cfg(20.0);
    let th1 = theorem1_apv(16, 10.0, 0.5).unwrap();
    let m = moments(&th1);
    for kind in [BenchmarkKind::UlaHalfwave, BenchmarkKind::SparseUla] {
        let b = moments(&benchmark_apv(kind, 16, 10.0, 0.5).unwrap());
        assert!(m.var_x > b.var_x);
        assert!(m.var_xt > b.var_xt);
    }
    let r_star = c.rayleigh_distance() / 4.0;
    let dom = WorstCaseDomain::default_for(&c);
    let wc = worst_case_crb_u(th1.positions(), r_star, &dom, &c).unwrap();
    let at_arg = crb_u_case1(th1.positions(), wc.arg, r_star, &c).unwrap();
    assert!((wc.bound - at_arg).abs() <= 1e-12 * at_arg);
}

#[test]
fn noiseless_echo_is_located_exactly() {
    let c = SensingConfig {
        noise_power: 0.0,
        num_snapshots: 4,
        ..SensingConfig::default()
    };
    let x = theorem1_apv(16, 10.0, 0.5).unwrap();
    let eta = TargetParams::new(0.63, 37.5).unwrap();
    let sub = noise_subspace(&sample_covariance(&synthesize_echo(
        x.positions(),
        &eta,
        &c,
        11,
    )))
    .unwrap();
    let r_grid = range_grid(c.fresnel_distance(), c.rayleigh_distance() / 2.0, 512);

    let u = estimate_aoa(x.positions(), &sub, eta.r, &aoa_grid(1024), &c);
    assert!((u - eta.u).abs() < 1e-7, "{u}");
    let r = estimate_distance(x.positions(), &sub, eta.u, &r_grid, &c);
    assert!((r - eta.r).abs() < 1e-5 * eta.r, "{r}");
    let j = estimate_joint(
        x.positions(),
        &sub,
        &aoa_grid(256),
        &range_grid(r_grid[0], r_grid[511], 128),
        &c,
    );
    assert!(
        (j.u - eta.u).abs() < 1e-6 && (j.r - eta.r).abs() < 1e-3 * eta.r,
        "{j:?}"
    );
}

#[test]
fn config_file_round_trip_through_the_writer() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    std::fs::write(
        &path,
        r#"{"cases": [2], "snr_start_db": 5, "snr_stop_db": 25, "snr_step_db": 10}"#,
    )
    .unwrap();
    let rc = bench::load_config(&path).unwrap();
    assert_eq!(rc.snr_values(), vec![5.0, 15.0, 25.0]);

    let out = bench::run_case_sweep(&rc).unwrap();
    let red = bench::write_outputs(&rc, &out, dir.path().join("out"))
        .unwrap()
        .unwrap();
    let ula = red
        .iter()
        .find(|r| r.benchmark == Scheme::UlaHalfwave && r.snr_db == 15.0)
        .unwrap();
    assert!((ula.percent_reduction - 74.19).abs() < 0.01);

    let mut rdr = csv::Reader::from_path(dir.path().join("out/sweep.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 4 * 3);
    for (row, rec) in rows.iter().zip(&out.records) {
        let crb_r: f64 = row[4].parse().unwrap();
        assert_eq!(Some(crb_r), rec.crb_r);
    }
}
