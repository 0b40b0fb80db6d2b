mod common;

use std::process::Command;

use aircomp::channel::SystemConfig;
use aircomp::harness::{
    load_experiment, parse_experiment, read_csv, run_sweep, run_sweep_with, simulate_transmission, summarize,
    write_csv, ExperimentSpec, Scheme, SweepOptions, CSV_HEADER,
};
use aircomp::quantization::QuantizationProfile;
use aircomp::transceiver::{evaluate_mse, ReceiveBeamformer, TransmitPolicy};
use common::*;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_spec(schemes: Vec<Scheme>, trials: usize) -> ExperimentSpec {
    ExperimentSpec {
        base: SystemConfig {
            num_devices: 4,
            num_rrhs: 2,
            antennas_per_rrh: 2,
            fronthaul_capacity_bps: vec![0.0; 2],
            max_power_mw: vec![SystemConfig::default().max_power_mw[0]; 4],
            ..SystemConfig::default()
        },
        capacity_grid: vec![2e7, 8e7, 3.2e8],
        schemes,
        trials,
        master_seed: 11,
        ..ExperimentSpec::default()
    }
}

fn no_timing() -> SweepOptions {
    SweepOptions {
        threads: None,
        record_timing: false,
    }
}

#[test]
fn empty_csv_is_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.csv");
    write_csv(&[], &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), format!("{}\n", CSV_HEADER.join(",")));
    assert!(read_csv(&path).unwrap().is_empty());
}

#[test]
fn csv_round_trip_preserves_aggregates() {
    let spec = small_spec(vec![Scheme::Proposed, Scheme::EqualAlloc], 2);
    let records = run_sweep(&spec).unwrap();
    assert_eq!(records.len(), 12);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    write_csv(&records, &path).unwrap();
    let rows = read_csv(&path).unwrap();
    assert_eq!(rows.len(), 12);
    for (row, rec) in rows.iter().zip(&records) {
        assert_eq!(row.mse, rec.mse);
        assert_eq!(row.capacity_bps, rec.capacity_bps);
        assert_eq!(row.scheme, rec.scheme);
    }
    let keys: Vec<_> = rows.iter().map(|r| (r.trial, r.scheme.name(), r.capacity_bps)).collect();
    let mut sorted = keys.clone();
    sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(a.2.total_cmp(&b.2)));
    assert_eq!(keys, sorted);

    let from_disk = summarize(rows.iter().map(|r| (r.scheme, r.capacity_bps, r.mse)));
    let in_memory = summarize(records.iter().map(|r| (r.scheme, r.capacity_bps, r.mse)));
    for (a, b) in from_disk.iter().zip(&in_memory) {
        assert!((a.mean - b.mean).abs() <= 1e-12);
    }
}

#[test]
fn csv_write_error_names_path() {
    let err = write_csv(&[], "/nonexistent-dir/out.csv").unwrap_err();
    assert!(err.to_string().contains("/nonexistent-dir/out.csv"), "{err}");
}

#[test]
fn lower_bound_ignores_capacity() {
    let records = run_sweep(&small_spec(vec![Scheme::LowerBound], 2)).unwrap();
    for trial in records.chunks(3) {
        assert!(trial.iter().all(|r| (r.mse - trial[0].mse).abs() <= 1e-12));
    }
}

#[test]
fn same_seed_gives_identical_csv() {
    let spec = ExperimentSpec {
        trials: 1,
        ..small_spec(Scheme::ALL.to_vec(), 1)
    };
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    write_csv(&run_sweep_with(&spec, &no_timing()).unwrap(), &a).unwrap();
    write_csv(
        &run_sweep_with(
            &spec,
            &SweepOptions {
                threads: Some(1),
                record_timing: false,
            },
        )
        .unwrap(),
        &b,
    )
    .unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn paired_dominance_per_realization() {
    let records = run_sweep_with(&small_spec(vec![Scheme::Proposed, Scheme::EqualAlloc, Scheme::LowerBound], 4), &no_timing()).unwrap();
    let find = |t: usize, s: Scheme, c: f64| {
        records
            .iter()
            .find(|r| r.trial_index == t && r.scheme == s && r.capacity_bps == c)
            .unwrap()
            .mse
    };
    for t in 0..4 {
        for c in [2e7, 8e7, 3.2e8] {
            let (p, e, l) = (find(t, Scheme::Proposed, c), find(t, Scheme::EqualAlloc, c), find(t, Scheme::LowerBound, c));
            assert!(p <= e + 1e-9);
            assert!(l <= p + 1e-9 + 1e-4 * l, "trial {t} capacity {c}: {l} > {p}");
        }
    }
    assert!(records.iter().all(|r| r.descent.violations == 0));
}

#[test]
fn empirical_mse_matches_analytic() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut flagged = 0;
    for _ in 0..10 {
        let (devices, dim) = (rng.random_range(1..=4), rng.random_range(1..=4));
        let config = small_config(devices, 1, dim, rng.random_range(0.1..1.0), 1.0);
        let h = random_channels(devices, dim, &mut rng);
        let ch = realization(&h, dim);
        let tx = TransmitPolicy::new((0..devices).map(|_| random_scalar_in_disk(1.0, &mut rng)).collect());
        let rx = ReceiveBeamformer::new(DVector::from_fn(dim, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))));
        let quant = QuantizationProfile::from_levels((0..dim).map(|_| rng.random_range(0.0..0.5)).collect()).unwrap();
        let analytic = evaluate_mse(&ch, &tx, &rx, &quant, &config).unwrap();
        let emp = simulate_transmission(&ch, &tx, &rx, &quant, &config, 20_000, &mut rng).unwrap();
        if (emp.mean - analytic).abs() > 3.0 * emp.std_error {
            flagged += 1;
        }
    }
    assert!(flagged <= 2, "{flagged} of 10 outside 3 standard errors");
}

#[test]
fn config_defaults_and_conversions() {
    let spec = parse_experiment("{}").unwrap();
    let default = SystemConfig::default();
    assert_eq!(spec.base.with_uniform_capacity(default.fronthaul_capacity_bps[0]), default);
    assert_eq!((spec.base.num_devices, spec.base.num_rrhs, spec.base.antennas_per_rrh), (15, 3, 8));
    let spec = parse_experiment(r#"{"tx_power_dbm": 23}"#).unwrap();
    assert!((spec.base.max_power_mw[0] - 199.526).abs() < 1e-3);
    let err = parse_experiment(r#"{"antennas_per_rrh": 0}"#).unwrap_err();
    assert!(err.to_string().contains("antennas_per_rrh"), "{err}");
    let err = parse_experiment(r#"{"bogus": 1}"#).unwrap_err();
    assert!(err.to_string().contains("bogus"), "{err}");
    let err = parse_experiment(r#"{"schemes": ["nope"]}"#).unwrap_err();
    assert!(err.to_string().contains("schemes"), "{err}");
}

#[test]
fn load_reports_missing_file() {
    assert!(load_experiment("/nonexistent/config.json").is_err());
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_aircomp"))
}

#[test]
fn cli_run_and_validate() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.json");
    std::fs::write(
        &config,
        r#"{"num_devices": 3, "num_rrhs": 2, "antennas_per_rrh": 2, "capacity_grid_bps": [4e7, 1.6e8],
            "schemes": ["proposed", "lower_bound"], "trials": 5, "master_seed": 1}"#,
    )
    .unwrap();
    let output = cli().args(["validate", "--config"]).arg(&config).output().unwrap();
    assert!(output.status.success());
    assert!(String::from_utf8_lossy(&output.stdout).contains("ok"));

    let out = dir.path().join("out.csv");
    let run = |path: &std::path::Path| {
        cli()
            .args(["run", "--trials", "2", "--seed", "9", "--no-timing", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(path)
            .output()
            .unwrap()
    };
    let output = run(&out);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let rows = read_csv(&out).unwrap();
    assert_eq!(rows.len(), 2 * 2 * 2);
    assert!(rows.iter().all(|r| r.wall_time_ms == 0.0));
    let again = dir.path().join("again.csv");
    assert!(run(&again).status.success());
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&again).unwrap());

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"trials": 0}"#).unwrap();
    let output = cli().args(["validate", "--config"]).arg(&bad).output().unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("trials"));
}
