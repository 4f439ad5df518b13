use std::process::Command;

use proptest::prelude::*;
use vche2d::harness::{
    fit_decay_exponent, run_experiment, Config, FitMode, Series, Snapshot, EXPERIMENTS,
};
use vche2d::sampling::{rng, two_blob};
use vche2d::norms::WeightExponent;
use vche2d::{Error, Frame, Grid};

fn tiny_invariants() -> Config {
    let mut c = Config::for_experiment("invariants").unwrap();
    c.apply_text(
        "n_points = 64\nhalf_width = 10\ndt = 0.05\nt_end = 0.5\nspread = 1.0\n\
         gamma_t_end = 0.5\nfilter_samples = 5 # quick\ncadence = 2\n",
    )
    .unwrap();
    c
}

#[test]
fn fit_of_exact_power_law() {
    let s: Vec<(f64, f64)> = (1..=20).map(|k| (k as f64, 3.0 / k as f64)).collect();
    let f = fit_decay_exponent(&s, (1.0, 20.0), FitMode::LogLog).unwrap();
    assert!((f.slope + 1.0).abs() < 1e-12);
    assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
    assert_eq!(f.samples, 20);
}

#[test]
fn fit_of_exact_exponential() {
    let s: Vec<(f64, f64)> = (0..=40).map(|k| (0.2 * k as f64, 0.7 * (-0.5 * 0.2 * k as f64).exp())).collect();
    let f = fit_decay_exponent(&s, (2.0, 8.0), FitMode::LogLinear).unwrap();
    assert!((f.slope + 0.5).abs() < 1e-12);
    assert_eq!(f.samples, 31);
    assert!(f.residual < 1e-12);
}

#[test]
fn fit_tolerates_tiny_noise() {
    let mut r = rng(4);
    let s: Vec<(f64, f64)> = (1..=50)
        .map(|k| {
            let t = k as f64;
            (t, (1.0 / t) * (1.0 + 1e-9 * rand::Rng::gen_range(&mut r, -1.0..1.0)))
        })
        .collect();
    let f = fit_decay_exponent(&s, (1.0, 50.0), FitMode::LogLog).unwrap();
    assert!((f.slope + 1.0).abs() < 1e-6);
}

#[test]
fn fit_errors() {
    let s: Vec<(f64, f64)> = (1..=9).map(|k| (k as f64, 1.0)).collect();
    assert!(matches!(
        fit_decay_exponent(&s, (0.0, 10.0), FitMode::LogLinear),
        Err(Error::TooFewSamples { needed: 10, got: 9 })
    ));
    let mut s: Vec<(f64, f64)> = (1..=12).map(|k| (k as f64, 1.0)).collect();
    s[4].1 = 0.0;
    assert!(matches!(
        fit_decay_exponent(&s, (0.0, 20.0), FitMode::LogLinear),
        Err(Error::NonPositive { .. })
    ));
    // Samples outside the window are ignored.
    s[4].1 = -1.0;
    let f = fit_decay_exponent(&s, (6.0, 12.0), FitMode::LogLinear);
    assert!(matches!(f, Err(Error::TooFewSamples { got: 7, .. })));
}

#[test]
fn config_parsing() {
    let mut c = Config::for_experiment("first-order-decay").unwrap();
    c.apply_text("# comment\n\n dt = 0.02 \nnorm=0.1 # trailing\n").unwrap();
    c.apply_override("--t_end=3").unwrap();
    assert_eq!(c.f64("dt").unwrap(), 0.02);
    assert_eq!(c.f64("norm").unwrap(), 0.1);
    assert_eq!(c.f64("t_end").unwrap(), 3.0);
    assert!(matches!(c.set("bogus", "1"), Err(Error::Config { .. })));
    assert!(c.apply_text("dt 0.1").is_err());
    assert!(c.apply_override("--dt").is_err());
    c.set("dt", "fast").unwrap();
    assert!(c.f64("dt").is_err());
    let lp = Config::for_experiment("lp-verification").unwrap();
    assert_eq!(lp.u32_list("orders").unwrap(), vec![2, 3]);
    for name in EXPERIMENTS {
        assert!(Config::for_experiment(name).is_ok());
    }
}

#[test]
fn unknown_experiment_lists_the_valid_ones() {
    match Config::for_experiment("nope") {
        Err(Error::UnknownExperiment { valid, .. }) => assert_eq!(valid.len(), EXPERIMENTS.len()),
        other => panic!("{other:?}"),
    }
    let c = tiny_invariants();
    assert!(run_experiment("nope", &c).is_err());
    assert!(run_experiment("first-order-decay", &c).is_err());
}

#[test]
fn snapshot_roundtrip_is_byte_identical() {
    let grid = Grid::new(32, 6.0).unwrap();
    let snap = Snapshot {
        field: two_blob(grid, Frame::Scaled, 1.0, WeightExponent::TWO, 0.3),
        alpha: 0.125,
        time: 2.5,
    };
    let bytes = snap.to_bytes();
    assert_eq!(bytes.len(), 37 + 8 * 32 * 32);
    let back = Snapshot::from_bytes(&bytes).unwrap();
    assert_eq!(back, snap);
    assert_eq!(back.to_bytes(), bytes);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.vche");
    snap.write(&path).unwrap();
    assert_eq!(Snapshot::read(&path).unwrap(), snap);
    assert!(snap.describe().contains("n_points: 32"));
}

#[test]
fn snapshot_rejects_corruption() {
    let grid = Grid::new(16, 4.0).unwrap();
    let snap = Snapshot {
        field: two_blob(grid, Frame::Physical, 1.0, WeightExponent::ZERO, 1.0),
        alpha: 0.0,
        time: 0.0,
    };
    let good = snap.to_bytes();
    let mut bad = good.clone();
    bad[0] = b'X';
    assert!(matches!(Snapshot::from_bytes(&bad), Err(Error::Snapshot(_))));
    let mut bad = good.clone();
    bad[4] = 9;
    assert!(matches!(Snapshot::from_bytes(&bad), Err(Error::Snapshot(_))));
    let mut bad = good.clone();
    bad[28] = 7;
    assert!(Snapshot::from_bytes(&bad).is_err());
    assert!(Snapshot::from_bytes(&good[..good.len() - 1]).is_err());
    assert!(Snapshot::from_bytes(&good[..10]).is_err());
}

#[test]
fn reports_are_deterministic() {
    let c = tiny_invariants();
    let a = run_experiment("invariants", &c).unwrap();
    let b = run_experiment("invariants", &c).unwrap();
    assert_eq!(a.summary(), b.summary());
    assert_eq!(a.series, b.series);
    assert_eq!(a.snapshots[0].1.to_bytes(), b.snapshots[0].1.to_bytes());
    let dir = tempfile::tempdir().unwrap();
    a.write(dir.path()).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("invariants.csv")).unwrap();
    assert!(csv.starts_with("tau,mass,b1,b2,b1_law,b2_law\n"));
    assert!(dir.path().join("summary.txt").exists());
    assert!(dir.path().join("final.vche").exists());
}

#[test]
fn invariants_without_filter() {
    let mut c = tiny_invariants();
    c.set("alpha", "0").unwrap();
    c.set("filter_alpha", "0").unwrap();
    let r = run_experiment("invariants", &c).unwrap();
    for v in &r.verdicts {
        if v.criterion == "filter-identities" {
            assert!(v.pass, "{v:?}");
        }
    }
    let defect = r.verdicts.iter().find(|v| v.check.starts_with("energy")).unwrap();
    assert!(defect.value < 1e-14);
}

#[test]
fn binary_reports_errors_with_exit_code_two() {
    let bin = env!("CARGO_BIN_EXE_vche2d");
    let out = Command::new(bin).args(["run", "nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invariants"));
    let out = Command::new(bin).args(["run", "invariants", "--bogus=1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(bin).args(["snapshot-dump", "/nonexistent.vche"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn binary_runs_and_dumps_snapshots() {
    let bin = env!("CARGO_BIN_EXE_vche2d");
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.cfg");
    std::fs::write(&cfg, "n_points = 128\nhalf_width = 12\ndt = 0.02\nt_end = 0.5\nspread = 1.0\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = Command::new(bin)
        .env("VCHE2D_THREADS", "1")
        .args(["run", "invariants", "--config"])
        .arg(&cfg)
        .args(["--gamma_t_end=0.5", "--filter_samples=3", "--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("verdict: PASS"));
    let dump = Command::new(bin).arg("snapshot-dump").arg(out_dir.join("final.vche")).output().unwrap();
    assert_eq!(dump.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&dump.stdout).contains("n_points: 128"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn fits_recover_exponents(k in -3.0f64..-0.1, c in 0.1f64..10.0, log in proptest::bool::ANY) {
        let (mode, s): (FitMode, Vec<(f64, f64)>) = if log {
            (FitMode::LogLog, (1..=30).map(|i| (i as f64, c * (i as f64).powf(k))).collect())
        } else {
            (FitMode::LogLinear, (0..30).map(|i| (0.1 * i as f64, c * (k * 0.1 * i as f64).exp())).collect())
        };
        let f = fit_decay_exponent(&s, (0.0, 30.0), mode).unwrap();
        prop_assert!((f.slope - k).abs() < 1e-10);
    }

    #[test]
    fn csv_roundtrips_values(vals in proptest::collection::vec(-1e6f64..1e6, 1..20)) {
        let mut s = Series::new("x", &["t", "v"]);
        for (i, v) in vals.iter().enumerate() {
            s.push(vec![i as f64, *v]);
        }
        let csv = s.to_csv();
        let parsed: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
        prop_assert_eq!(parsed, vals);
    }
}
