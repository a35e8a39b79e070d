use std::fs::File;

use quantlink::config::{parse_config, validate_config, AdcSpec, CsiMode, SystemConfig};
use quantlink::runner::{
    config_hash, linear_grid, read_csv, run_point, run_sweep, write_csv, Metric, PointOptions,
    SweepSpec, SweepVariable, TrialPlan, CSV_HEADER, VERSION,
};

fn small_sweep(seed: u64) -> SweepSpec {
    SweepSpec {
        base: SystemConfig::desk(),
        variable: SweepVariable::Sir(linear_grid(-10.0, 0.0, 5.0)),
        plan: TrialPlan::fixed(16),
        metrics: vec![Metric::BerSim, Metric::BerTight, Metric::RateApprox],
        seed,
        options: PointOptions::default(),
    }
}

#[test]
fn config_text_round_trips() {
    for mut cfg in [SystemConfig::desk(), SystemConfig::baseline()] {
        cfg.csi = CsiMode::Estimated;
        let back = parse_config(&cfg.to_string()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(config_hash(&back), config_hash(&cfg));
    }
    let mut q2 = SystemConfig::desk();
    q2.adc = AdcSpec::midrise(2, 0.01);
    assert_eq!(parse_config(&q2.to_string()).unwrap(), q2);
}

#[test]
fn hash_tracks_every_field() {
    let a = SystemConfig::desk();
    let b = a.clone().with_sir_db(3.0);
    let mut c = a.clone();
    c.antennas += 1;
    assert_ne!(config_hash(&a), config_hash(&b));
    assert_ne!(config_hash(&a), config_hash(&c));
    assert_eq!(config_hash(&a).len(), 16);
}

#[test]
fn sweep_is_deterministic_in_seed() {
    let strip = |mut r: quantlink::runner::SweepResult| {
        r.rows.iter_mut().for_each(|row| row.wall_ms = 0);
        r
    };
    let a = strip(run_sweep(&small_sweep(5)).unwrap());
    let b = strip(run_sweep(&small_sweep(5)).unwrap());
    let c = strip(run_sweep(&small_sweep(6)).unwrap());
    assert_eq!(a, b);
    assert_ne!(a.series("ber_sim"), c.series("ber_sim"));
    // Analytic rows do not depend on the seed.
    assert_eq!(a.series("rate_approx"), c.series("rate_approx"));
}

#[test]
fn sweep_rows_cover_grid_and_metrics() {
    let r = run_sweep(&small_sweep(1)).unwrap();
    assert_eq!(r.rows.len(), 3 * 3);
    let ber = r.series("ber_sim");
    assert_eq!(ber.iter().map(|p| p.0).collect::<Vec<_>>(), vec![-10.0, -5.0, 0.0]);
    // More interference, more errors.
    assert!(ber[0].1 > ber[2].1);
    for row in &r.rows {
        assert_eq!(row.trials, 16);
        assert_eq!(row.version, VERSION);
        assert!(row.value.is_finite() && row.stderr >= 0.0);
    }
}

#[test]
fn csv_round_trips_through_file() {
    let r = run_sweep(&small_sweep(2)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    write_csv(&r, File::create(&path).unwrap()).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
    assert_eq!(read_csv(File::open(&path).unwrap()).unwrap(), r);
}

#[test]
fn csv_rejects_foreign_header() {
    let bad = "point,metric,value\n1,ber_sim,0.1\n";
    assert!(read_csv(bad.as_bytes()).is_err());
}

#[test]
fn empty_grid_is_an_error() {
    let mut spec = small_sweep(0);
    spec.variable = SweepVariable::Sir(linear_grid(1.0, 0.0, 1.0));
    assert!(run_sweep(&spec).is_err());
}

#[test]
fn error_free_without_interference_at_high_snr() {
    let mut cfg = SystemConfig::desk();
    cfg.rho_i = 0.0;
    cfg.noise_var *= 1e-3;
    let cfg = validate_config(cfg).unwrap();
    let s = run_point(&cfg, &TrialPlan::fixed(16), 9, PointOptions::default()).unwrap();
    assert!(s.ber_sim.value() < 1e-3, "{}", s.ber_sim.value());
    assert!(s.ber_tight.mean() < 1e-3);
}

#[test]
fn bit_sweep_changes_resolution() {
    let spec = SweepSpec {
        base: {
            let mut c = SystemConfig::desk().with_sir_db(0.0);
            c.adc = AdcSpec::midrise(1, 0.01);
            c
        },
        variable: SweepVariable::Bits(vec![1, 2, 3]),
        plan: TrialPlan::fixed(16),
        metrics: vec![Metric::BerTight],
        seed: 4,
        options: PointOptions::default(),
    };
    let tight = run_sweep(&spec).unwrap().series("ber_tight");
    assert!(tight[0].1 > tight[1].1 && tight[1].1 > tight[2].1, "{tight:?}");
}

#[test]
fn empty_result_writes_header_only() {
    let mut buf = Vec::new();
    write_csv(&Default::default(), &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), format!("{}\n", CSV_HEADER.join(",")));
}

#[test]
fn bypass_without_interference_is_near_ideal() {
    let mut cfg = SystemConfig::desk();
    cfg.rho_i = 0.0;
    cfg.noise_var = 1e-2;
    let cfg = validate_config(cfg).unwrap();
    let opts = PointOptions {
        bypass_quantizer: true,
        ..PointOptions::default()
    };
    let s = run_point(&cfg, &TrialPlan::fixed(64), 3, opts).unwrap();
    assert!(s.ber_sim.value() < 1e-4, "{}", s.ber_sim.value());
}

#[test]
fn stderr_scales_with_inverse_root_of_trials() {
    let cfg = validate_config(SystemConfig::desk().with_sir_db(-5.0)).unwrap();
    let se = |n| {
        run_point(&cfg, &TrialPlan::fixed(n), 21, PointOptions::default())
            .unwrap()
            .ber_tight
            .stderr()
    };
    let ratio = se(64) / se(256);
    assert!((1.5..2.7).contains(&ratio), "ratio {ratio}");
}
