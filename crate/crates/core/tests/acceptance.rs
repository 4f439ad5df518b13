//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! fails if any criterion fails.

use std::time::Instant;

use vche2d::evolution::{picard_mild_solve, SimConfig, Simulation};
use vche2d::harness::{run_experiment, Config, DecayReport, Verdict};
use vche2d::norms::{weighted_norm, WeightExponent};
use vche2d::operators::{semigroup_l, semigroup_l_direct, SemigroupTime};
use vche2d::sampling::two_blob;
use vche2d::{Frame, Grid, ScalarField};

struct Outcome {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn describe(verdicts: &[&Verdict]) -> String {
    verdicts
        .iter()
        .map(|v| format!("{} = {:.3e} ({})", v.check, v.value, v.bound))
        .collect::<Vec<_>>()
        .join("; ")
}

fn from_report(id: usize, name: &'static str, report: &DecayReport, criterion: &str, secs: f64, limit: Option<f64>) -> Outcome {
    let vs: Vec<&Verdict> = report.verdicts.iter().filter(|v| v.criterion.starts_with(criterion)).collect();
    let in_time = limit.map_or(true, |l| secs <= l);
    Outcome {
        id,
        name,
        pass: !vs.is_empty() && vs.iter().all(|v| v.pass) && in_time,
        detail: format!("{}; {secs:.0} s", describe(&vs)),
    }
}

fn timed(name: &str) -> (DecayReport, f64) {
    let start = Instant::now();
    let report = run_experiment(name, &Config::for_experiment(name).unwrap()).unwrap();
    (report, start.elapsed().as_secs_f64())
}

fn mild_vs_stepper() -> (f64, f64) {
    let mut c = SimConfig::physical();
    c.half_width = 16.0;
    c.dt = 0.005;
    let grid = c.grid().unwrap();
    let v0 = two_blob(grid, Frame::Physical, 1.0, WeightExponent::ZERO, 0.01);
    let (mild, _) = picard_mild_solve(&v0, 0.1, Some(c.alpha), 8, 8).unwrap();
    let mut sim = Simulation::new(c, &v0).unwrap();
    sim.run_to(0.1, &mut |_| {}).unwrap();
    let picard = weighted_norm(&mild.sub(&sim.state().w).unwrap(), WeightExponent::ZERO);

    let g64 = Grid::new(64, 10.0).unwrap();
    let f = ScalarField::from_fn(g64, Frame::Scaled, |x, y| {
        (-((x - 0.6).powi(2) + (y + 0.3).powi(2)) / 1.6).exp()
            + 0.4 * (-((x + 0.8).powi(2) + (y - 0.5).powi(2)) / 0.7).exp()
    });
    let mut semi: f64 = 0.0;
    for &tau in &[0.25, 0.5, 1.0] {
        let st = SemigroupTime::new(tau).unwrap();
        semi = semi.max(semigroup_l(&f, st).sub(&semigroup_l_direct(&f, st)).unwrap().max_abs());
    }
    (picard, semi)
}

fn reproducibility() -> (bool, String) {
    let mut c = Config::for_experiment("first-order-decay").unwrap();
    c.apply_text("n_points = 128\nt_end = 3\nfit_end = 3\ndt = 0.02\ncadence = 2\nspread = 1.0\n").unwrap();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        run_experiment("first-order-decay", &c).unwrap().write(d.path()).unwrap();
    }
    let mut names: Vec<_> = std::fs::read_dir(dirs[0].path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    let mut same = names.iter().any(|n| n.to_string_lossy().ends_with(".vche"));
    for n in &names {
        let a = std::fs::read(dirs[0].path().join(n)).unwrap();
        let b = std::fs::read(dirs[1].path().join(n)).unwrap();
        same &= a == b;
    }
    (same, format!("{} files compared", names.len()))
}

#[test]
fn acceptance() {
    let mut out = Vec::new();

    let (r, s) = timed("smoothing-L1Lp");
    out.push(from_report(1, "smoothing rate", &r, "smoothing-rate", s, Some(300.0)));
    let (r, s) = timed("first-order-decay");
    out.push(from_report(2, "first-order asymptotics", &r, "first-order-decay", s, Some(600.0)));
    let (r, s) = timed("second-order-decay");
    out.push(from_report(3, "second-order asymptotics", &r, "second-order-decay", s, None));

    let (r, s) = timed("invariants");
    out.push(from_report(4, "conservation laws", &r, "conservation", s, None));
    out.push(from_report(5, "eigenstructure", &r, "eigenstructure", s, None));
    out.push(from_report(6, "filter identities", &r, "filter-identities", s, None));
    out.push(from_report(7, "heat-kernel norms", &r, "heat-kernel-norms", s, None));

    let start = Instant::now();
    let (picard, semi) = mild_vs_stepper();
    out.push(Outcome {
        id: 8,
        name: "oracle cross-validation",
        pass: picard <= 1e-6 && semi <= 1e-6,
        detail: format!(
            "mild vs stepper L2 = {picard:.3e} (<= 1e-6); semigroup vs quadrature max = {semi:.3e} (<= 1e-6); {:.0} s",
            start.elapsed().as_secs_f64()
        ),
    });

    let (r, s) = timed("lp-verification");
    out.push(from_report(9, "Lyapunov-Perron self-consistency", &r, "lyapunov-perron", s, None));

    let start = Instant::now();
    let (same, detail) = reproducibility();
    out.push(Outcome {
        id: 10,
        name: "reproducibility",
        pass: same,
        detail: format!("{detail}; {:.0} s", start.elapsed().as_secs_f64()),
    });

    println!();
    for o in &out {
        println!("{} criterion {:>2} {}: {}", if o.pass { "PASS" } else { "FAIL" }, o.id, o.name, o.detail);
    }
    let failed: Vec<usize> = out.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
