//! Experiment runner: flat `key = value` configuration, decay-exponent fits,
//! CSV/summary reports and the binary snapshot format.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::eigenbasis::{eigen_fields, gamma_field, project};
use crate::error::{Error, Result};
use crate::evolution::{SimConfig, SimState, Simulation, SystemKind};
use crate::lyapunov_perron::{
    emu_norm, estimate_lipschitz, forcing_s, lp_residual, semiorbit, stepping_tolerance, LPContext,
    RemainderSource,
};
use crate::norms::{lp_norm, moments, weighted_norm, WeightExponent};
use crate::operators::{
    heat_kernel, heat_kernel_lp_norm, helmholtz_filter, semigroup_l, FilterParams, SemigroupTime,
};
use crate::sampling::{random_localized, rng, two_blob};
use crate::spectral::{boundary_tail, gradient, integrate, laplacian, Frame, Grid, ScalarField};

/// Names accepted by [`run_experiment`].
pub const EXPERIMENTS: [&str; 5] = [
    "smoothing-L1Lp",
    "first-order-decay",
    "second-order-decay",
    "invariants",
    "lp-verification",
];

/// Upper bound on concurrently running sub-runs, from `VCHE2D_THREADS`
/// (default: available parallelism).
pub fn thread_budget() -> usize {
    std::env::var("VCHE2D_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn defaults(experiment: &str) -> Result<&'static [(&'static str, &'static str)]> {
    Ok(match experiment {
        "smoothing-L1Lp" => &[
            ("n_points", "256"),
            ("half_width", "48"),
            ("alpha", "0.1"),
            ("dt", "0.1"),
            ("t_end", "100"),
            ("mass", "0.05"),
            ("width", "1"),
            ("cadence", "10"),
            ("fit_start", "10"),
            ("fit_end", "100"),
        ],
        "first-order-decay" | "second-order-decay" => &[
            ("n_points", "256"),
            ("half_width", "12"),
            ("alpha", "0.1"),
            ("dt", "0.01"),
            ("t_end", "8"),
            ("norm", "0.05"),
            ("spread", "0.6"),
            ("cadence", "10"),
            ("fit_start", "2"),
            ("fit_end", "8"),
        ],
        "invariants" => &[
            ("n_points", "256"),
            ("half_width", "12"),
            ("alpha", "0.1"),
            ("dt", "0.01"),
            ("t_end", "8"),
            ("norm", "0.05"),
            ("spread", "0.6"),
            ("cadence", "10"),
            ("gamma_mass", "0.1"),
            ("gamma_t_end", "5"),
            ("filter_alpha", "0.2"),
            ("filter_samples", "100"),
            ("seed", "1"),
        ],
        "lp-verification" => &[
            ("n_points", "128"),
            ("half_width", "12"),
            ("alpha", "0.1"),
            ("dt", "0.02"),
            ("r0", "0.01"),
            ("spread", "1"),
            ("steps", "6"),
            ("orders", "2,3"),
            ("mu2", "0.25"),
            ("mu3", "0.75"),
            ("lipschitz_samples", "20"),
            ("seed", "7"),
        ],
        other => {
            return Err(Error::UnknownExperiment {
                name: other.to_string(),
                valid: EXPERIMENTS.iter().map(|s| s.to_string()).collect(),
            })
        }
    })
}

/// Flat configuration for one experiment. Every key has a default; unknown
/// keys are rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    experiment: String,
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn for_experiment(experiment: &str) -> Result<Self> {
        let values = defaults(experiment)?
            .iter()
            .map(|&(k, v)| (k.to_string(), v.to_string()))
            .collect();
        Ok(Self {
            experiment: experiment.to_string(),
            values,
        })
    }

    pub fn experiment(&self) -> &str {
        &self.experiment
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.trim().to_string();
                Ok(())
            }
            None => Err(Error::Config {
                key: key.to_string(),
                message: format!(
                    "unknown key for `{}`; valid keys: {}",
                    self.experiment,
                    self.values.keys().cloned().collect::<Vec<_>>().join(", ")
                ),
            }),
        }
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config {
                key: line.to_string(),
                message: format!("line {} is not `key = value`", lineno + 1),
            })?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    /// Applies a `--key=value` style override (leading dashes optional).
    pub fn apply_override(&mut self, arg: &str) -> Result<()> {
        let body = arg.trim_start_matches('-');
        let (k, v) = body.split_once('=').ok_or_else(|| Error::Config {
            key: body.to_string(),
            message: "override must look like --key=value".into(),
        })?;
        self.set(k, v)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    fn raw(&self, key: &str) -> Result<&str> {
        self.values.get(key).map(|s| s.as_str()).ok_or_else(|| Error::Config {
            key: key.to_string(),
            message: "missing".into(),
        })
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        let raw = self.raw(key)?;
        raw.parse::<f64>().map_err(|e| Error::Config {
            key: key.to_string(),
            message: format!("`{raw}` is not a number ({e})"),
        })
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        let raw = self.raw(key)?;
        raw.parse::<usize>().map_err(|e| Error::Config {
            key: key.to_string(),
            message: format!("`{raw}` is not a nonnegative integer ({e})"),
        })
    }

    pub fn u64(&self, key: &str) -> Result<u64> {
        Ok(self.usize(key)? as u64)
    }

    pub fn u32_list(&self, key: &str) -> Result<Vec<u32>> {
        let raw = self.raw(key)?;
        raw.split(',')
            .map(|s| s.trim())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<u32>().map_err(|e| Error::Config {
                    key: key.to_string(),
                    message: format!("`{s}` is not an integer ({e})"),
                })
            })
            .collect()
    }

    fn grid(&self) -> Result<Grid> {
        Grid::new(self.usize("n_points")?, self.f64("half_width")?).map_err(|e| Error::Config {
            key: "n_points/half_width".into(),
            message: e.to_string(),
        })
    }
}

/// Whether a fit regresses `log(value)` on time or on `log(time)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMode {
    LogLinear,
    LogLog,
}

/// Least-squares decay exponent over a time window.
#[derive(Debug, Clone, PartialEq)]
pub struct Fit {
    pub name: String,
    pub window: (f64, f64),
    pub slope: f64,
    pub intercept: f64,
    /// Largest absolute deviation of the fitted line from the log data.
    pub residual: f64,
    pub samples: usize,
}

/// Fits `log(value) = intercept + slope * x` with `x = time` (`LogLinear`)
/// or `x = log(time)` (`LogLog`) over samples with time in `window`.
pub fn fit_decay_exponent(series: &[(f64, f64)], window: (f64, f64), mode: FitMode) -> Result<Fit> {
    let eps = 1e-12 * window.1.abs().max(1.0);
    let pts: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|&(t, _)| t >= window.0 - eps && t <= window.1 + eps)
        .collect();
    if pts.len() < 10 {
        return Err(Error::TooFewSamples {
            needed: 10,
            got: pts.len(),
        });
    }
    let mut xy = Vec::with_capacity(pts.len());
    for &(t, v) in &pts {
        if !(v > 0.0) {
            return Err(Error::NonPositive { time: t, value: v });
        }
        let x = match mode {
            FitMode::LogLinear => t,
            FitMode::LogLog => {
                if !(t > 0.0) {
                    return Err(Error::NonPositive { time: t, value: t });
                }
                t.ln()
            }
        };
        xy.push((x, v.ln()));
    }
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: 1,
        });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = xy
        .iter()
        .map(|&(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0, f64::max);
    Ok(Fit {
        name: String::new(),
        window,
        slope,
        intercept,
        residual,
        samples: xy.len(),
    })
}

/// One pass/fail row tied to a named acceptance criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub criterion: String,
    pub check: String,
    pub value: f64,
    pub bound: String,
    pub pass: bool,
}

/// A table of samples written as one CSV file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Series {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// `(column 0, column k)` pairs.
    pub fn pairs(&self, k: usize) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| (r[0], r[k])).collect()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Header row plus values with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Everything an experiment produces.
#[derive(Debug, Clone)]
pub struct DecayReport {
    pub experiment: String,
    pub config: Vec<(String, String)>,
    pub series: Vec<Series>,
    pub fits: Vec<Fit>,
    pub verdicts: Vec<Verdict>,
    pub warnings: Vec<String>,
    pub snapshots: Vec<(String, Snapshot)>,
}

impl DecayReport {
    fn new(config: &Config) -> Self {
        Self {
            experiment: config.experiment().to_string(),
            config: config.entries().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            series: Vec::new(),
            fits: Vec::new(),
            verdicts: Vec::new(),
            warnings: Vec::new(),
            snapshots: Vec::new(),
        }
    }

    fn verdict(&mut self, criterion: &str, check: &str, value: f64, bound: &str, pass: bool) {
        self.verdicts.push(Verdict {
            criterion: criterion.to_string(),
            check: check.to_string(),
            value,
            bound: bound.to_string(),
            pass,
        });
    }

    fn fit(&mut self, name: &str, series: &[(f64, f64)], window: (f64, f64), mode: FitMode) -> Result<Fit> {
        let mut fit = fit_decay_exponent(series, window, mode)?;
        fit.name = name.to_string();
        self.fits.push(fit.clone());
        Ok(fit)
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn fit_named(&self, name: &str) -> Option<&Fit> {
        self.fits.iter().find(|f| f.name == name)
    }

    /// Human-readable summary; deterministic for a given configuration.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "experiment: {}", self.experiment);
        let _ = writeln!(s, "\n[config]");
        for (k, v) in &self.config {
            let _ = writeln!(s, "{k} = {v}");
        }
        if !self.fits.is_empty() {
            let _ = writeln!(s, "\n[fits]");
            for f in &self.fits {
                let _ = writeln!(
                    s,
                    "{}: slope {:.6} over [{}, {}] ({} samples, max residual {:.3e})",
                    f.name, f.slope, f.window.0, f.window.1, f.samples, f.residual
                );
            }
        }
        let _ = writeln!(s, "\n[verdicts]");
        for v in &self.verdicts {
            let _ = writeln!(
                s,
                "{} {:<22} {:<44} value {:.6e}  bound {}",
                if v.pass { "PASS" } else { "FAIL" },
                v.criterion,
                v.check,
                v.value,
                v.bound
            );
        }
        if !self.warnings.is_empty() {
            let _ = writeln!(s, "\n[warnings]");
            for w in &self.warnings {
                let _ = writeln!(s, "{w}");
            }
        }
        let _ = writeln!(s, "\nverdict: {}", if self.passed() { "PASS" } else { "FAIL" });
        s
    }

    /// Writes `summary.txt`, one CSV per series and one `.vche` file per snapshot.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("summary.txt"), self.summary())?;
        for s in &self.series {
            std::fs::write(dir.join(format!("{}.csv", s.name)), s.to_csv())?;
        }
        for (name, snap) in &self.snapshots {
            snap.write(&dir.join(format!("{name}.vche")))?;
        }
        Ok(())
    }
}

const MAGIC: &[u8; 4] = b"VCHE";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8 + 8 + 1 + 8;

/// A field with the metadata needed to resume or inspect a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub field: ScalarField,
    pub alpha: f64,
    pub time: f64,
}

impl Snapshot {
    /// Little-endian layout: magic, version, n, half width, alpha, frame tag,
    /// time, then `n^2` values with `x_2` as the outer index.
    pub fn to_bytes(&self) -> Vec<u8> {
        let grid = self.field.grid();
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * grid.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(grid.n() as u32).to_le_bytes());
        out.extend_from_slice(&grid.half_width().to_le_bytes());
        out.extend_from_slice(&self.alpha.to_le_bytes());
        out.push(self.field.frame().as_u8());
        out.extend_from_slice(&self.time.to_le_bytes());
        for v in self.field.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Snapshot(format!("file too short ({} bytes)", bytes.len())));
        }
        if &bytes[0..4] != MAGIC {
            return Err(Error::Snapshot("bad magic".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
        let version = u32_at(4);
        if version != VERSION {
            return Err(Error::Snapshot(format!("unsupported version {version}")));
        }
        let n = u32_at(8) as usize;
        let half_width = f64_at(12);
        let alpha = f64_at(20);
        let frame = Frame::from_u8(bytes[28])
            .ok_or_else(|| Error::Snapshot(format!("unknown frame tag {}", bytes[28])))?;
        let time = f64_at(29);
        let grid = Grid::new(n, half_width).map_err(|e| Error::Snapshot(e.to_string()))?;
        let expected = HEADER_LEN + 8 * grid.len();
        if bytes.len() != expected {
            return Err(Error::Snapshot(format!(
                "expected {expected} bytes for n = {n}, found {}",
                bytes.len()
            )));
        }
        let values = bytes[HEADER_LEN..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Ok(Self {
            field: ScalarField::from_values(grid, frame, values)?,
            alpha,
            time,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Short description used by `snapshot-dump`.
    pub fn describe(&self) -> String {
        let g = self.field.grid();
        let vals = self.field.values();
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mom = moments(&self.field);
        format!(
            "format: VCHE v{VERSION}\nn_points: {}\nhalf_width: {}\nalpha: {}\nframe: {}\ntime: {}\n\
             min: {min:.6e}\nmax: {max:.6e}\nintegral: {:.6e}\nfirst moments: {:.6e} {:.6e}\n",
            g.n(),
            g.half_width(),
            self.alpha,
            self.field.frame().name(),
            self.time,
            mom.a,
            mom.b1,
            mom.b2
        )
    }
}

/// Runs the named experiment with `config` (which must belong to it).
pub fn run_experiment(name: &str, config: &Config) -> Result<DecayReport> {
    defaults(name)?;
    if config.experiment() != name {
        return Err(Error::Config {
            key: "experiment".into(),
            message: format!("config was built for `{}`, not `{name}`", config.experiment()),
        });
    }
    match name {
        "smoothing-L1Lp" => smoothing(config),
        "first-order-decay" => decay(config, 2),
        "second-order-decay" => decay(config, 3),
        "invariants" => invariants(config),
        "lp-verification" => lp_verification(config),
        _ => unreachable!("checked by defaults"),
    }
}

fn window(config: &Config) -> Result<(f64, f64)> {
    let w = (config.f64("fit_start")?, config.f64("fit_end")?);
    if !(w.0 < w.1) {
        return Err(Error::Config {
            key: "fit_start".into(),
            message: format!("fit window [{}, {}] is empty", w.0, w.1),
        });
    }
    Ok(w)
}

fn scaled_config(config: &Config, system: SystemKind) -> Result<SimConfig> {
    let mut sc = SimConfig::scaled(system);
    sc.n_points = config.usize("n_points")?;
    sc.half_width = config.f64("half_width")?;
    sc.alpha = config.f64("alpha")?;
    sc.dt = config.f64("dt")?;
    sc.t_end = config.f64("t_end")?;
    sc.cadence = config.usize("cadence")?;
    sc.validate()?;
    Ok(sc)
}

fn smoothing(config: &Config) -> Result<DecayReport> {
    let mut report = DecayReport::new(config);
    let mut sc = SimConfig::physical();
    sc.n_points = config.usize("n_points")?;
    sc.half_width = config.f64("half_width")?;
    sc.alpha = config.f64("alpha")?;
    sc.dt = config.f64("dt")?;
    sc.t_end = config.f64("t_end")?;
    sc.cadence = config.usize("cadence")?;
    let grid = sc.validate()?;
    let mass = config.f64("mass")?;
    let width = config.f64("width")?;
    let v0 = ScalarField::from_fn(grid, Frame::Physical, |x, y| {
        mass * (-(x * x + y * y) / (2.0 * width * width)).exp() / (2.0 * std::f64::consts::PI * width * width)
    });
    let l1_0 = lp_norm(&v0, 1.0)?;
    let mut series = Series::new("smoothing", &["t", "l1", "l2", "linf", "mass"]);
    let mut failure = None;
    let mut sim = Simulation::new(sc.clone(), &v0)?;
    sim.run_to(sc.t_end, &mut |s: &SimState| {
        let row = (|| -> Result<Vec<f64>> {
            Ok(vec![
                s.time,
                lp_norm(&s.w, 1.0)?,
                lp_norm(&s.w, 2.0)?,
                lp_norm(&s.w, f64::INFINITY)?,
                integrate(&s.w),
            ])
        })();
        match row {
            Ok(r) => series.push(r),
            Err(e) => failure = Some(e),
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let win = window(config)?;
    let f_inf = report.fit("linf", &series.pairs(3), win, FitMode::LogLog)?;
    let f_2 = report.fit("l2", &series.pairs(2), win, FitMode::LogLog)?;
    report.verdict(
        "smoothing-rate",
        "log-log slope of |v|_inf",
        f_inf.slope,
        "-1.0 +- 0.1",
        (f_inf.slope + 1.0).abs() <= 0.1,
    );
    report.verdict(
        "smoothing-rate",
        "log-log slope of |v|_2",
        f_2.slope,
        "-0.5 +- 0.05",
        (f_2.slope + 0.5).abs() <= 0.05,
    );
    // t^{1 - 1/q} |v(t)|_q / |v_0|_1 stays bounded.
    let bounded = series
        .rows
        .iter()
        .filter(|r| r[0] > 0.0)
        .map(|r| (r[0] * r[3] / l1_0).max(r[0].sqrt() * r[2] / l1_0))
        .fold(0.0, f64::max);
    report.warnings.push(format!(
        "sup_t max(t |v|_inf, t^(1/2) |v|_2) / |v_0|_1 = {bounded:.6e}"
    ));
    report.series.push(series);
    report.snapshots.push((
        "final".into(),
        Snapshot {
            field: sim.state().w.clone(),
            alpha: sc.alpha,
            time: sim.time(),
        },
    ));
    Ok(report)
}

fn decay(config: &Config, m: u32) -> Result<DecayReport> {
    let mut report = DecayReport::new(config);
    let sc = scaled_config(config, SystemKind::Full)?;
    let grid = sc.grid()?;
    let wm = WeightExponent::new(m as f64)?;
    let w0 = two_blob(grid, Frame::Scaled, config.f64("spread")?, wm, config.f64("norm")?);
    let (coeffs, _) = project(&w0, m)?;
    let ef = eigen_fields(grid);
    let alpha = sc.alpha;
    let (label, criterion) = if m == 2 {
        ("dev_first", "first-order-decay")
    } else {
        ("dev_second", "second-order-decay")
    };
    let mut series = Series::new("decay", &["tau", label, "norm", "mass", "b1", "b2", "tail"]);
    let mut sim = Simulation::new(sc.clone(), &w0)?;
    sim.run_to(sc.t_end, &mut |s: &SimState| {
        let c = alpha * alpha * (-s.time).exp();
        let mut profile = ef.gamma(c).scale(coeffs.a);
        if m == 3 {
            let d = (-0.5 * s.time).exp();
            profile = profile
                .axpy(d * coeffs.c1, &ef.lambda(1, c))
                .and_then(|p| p.axpy(d * coeffs.c2, &ef.lambda(2, c)))
                .expect("same grid");
        }
        let dev = weighted_norm(&s.w.sub(&profile).expect("same grid"), wm);
        let mom = moments(&s.w);
        series.push(vec![
            s.time,
            dev,
            weighted_norm(&s.w, wm),
            mom.a,
            mom.b1,
            mom.b2,
            boundary_tail(&s.w),
        ]);
    })?;
    let fit = report.fit(label, &series.pairs(1), window(config)?, FitMode::LogLinear)?;
    let bound = if m == 2 { -0.4 } else { -0.75 };
    report.verdict(
        criterion,
        &format!("fitted exponent of {label} in L2({m})"),
        fit.slope,
        &format!("<= {bound}"),
        fit.slope <= bound,
    );
    report.verdict(
        criterion,
        "data has nonzero mass",
        coeffs.a.abs(),
        "> 0",
        coeffs.a != 0.0,
    );
    let b = moments(&w0);
    report.verdict(
        criterion,
        "data has nonzero first moments",
        b.b1.abs().max(b.b2.abs()),
        "> 0",
        b.b1 != 0.0 || b.b2 != 0.0,
    );
    let tail = series.rows.iter().map(|r| r[6]).fold(0.0, f64::max);
    if tail > 1e-10 {
        report
            .warnings
            .push(format!("boundary tail reached {tail:.3e}; the box may be too small"));
    }
    report.series.push(series);
    report.snapshots.push((
        "final".into(),
        Snapshot {
            field: sim.state().w.clone(),
            alpha,
            time: sim.time(),
        },
    ));
    Ok(report)
}

/// `|‖w‖^2 - (‖Hw‖^2 + 2c‖grad Hw‖^2 + c^2‖Delta Hw‖^2)| / ‖w‖^2` in plain `L^2`.
pub fn energy_identity_defect(w: &ScalarField, fp: FilterParams) -> f64 {
    let c = fp.effective_coefficient();
    let l2 = |f: &ScalarField| weighted_norm(f, WeightExponent::ZERO).powi(2);
    let om = helmholtz_filter(w, fp);
    let g = gradient(&om);
    let rhs = l2(&om) + 2.0 * c * (l2(&g.x) + l2(&g.y)) + c * c * l2(&laplacian(&om));
    let lhs = l2(w);
    (lhs - rhs).abs() / lhs
}

fn invariants(config: &Config) -> Result<DecayReport> {
    let mut report = DecayReport::new(config);
    let sc = scaled_config(config, SystemKind::Full)?;
    let grid = sc.grid()?;
    let alpha = sc.alpha;
    let ef = eigen_fields(grid);
    let wm2 = WeightExponent::TWO;

    // Conservation laws along a generic run.
    let w0 = two_blob(grid, Frame::Scaled, config.f64("spread")?, wm2, config.f64("norm")?);
    let m0 = moments(&w0);
    let mut series = Series::new("invariants", &["tau", "mass", "b1", "b2", "b1_law", "b2_law"]);
    let mut sim = Simulation::new(sc.clone(), &w0)?;
    sim.run_to(sc.t_end, &mut |_| {})?;
    let (mut drift, mut law): (f64, f64) = (0.0, 0.0);
    for &(tau, mom) in &sim.state().moment_history {
        let d = (-0.5 * tau).exp();
        drift = drift.max((mom.a - m0.a).abs() / m0.a.abs());
        law = law
            .max((mom.b1 - m0.b1 * d).abs() / m0.b1.abs())
            .max((mom.b2 - m0.b2 * d).abs() / m0.b2.abs());
        series.push(vec![tau, mom.a, mom.b1, mom.b2, m0.b1 * d, m0.b2 * d]);
    }
    report.verdict("conservation", "relative mass drift", drift, "<= 1e-8", drift <= 1e-8);
    report.verdict("conservation", "relative first-moment law error", law, "<= 1e-6", law <= 1e-6);
    report.series.push(series);

    // Eigenstructure of L and the stationary profile.
    let one = SemigroupTime::new(1.0)?;
    let e_g = weighted_norm(&semigroup_l(&ef.g, one).sub(&ef.g)?, wm2);
    report.verdict("eigenstructure", "||e^L G - G||_2", e_g, "<= 1e-6", e_g <= 1e-6);
    for i in 0..2 {
        let e_f = weighted_norm(&semigroup_l(&ef.f[i], one).axpy(-(-0.5f64).exp(), &ef.f[i])?, wm2);
        report.verdict(
            "eigenstructure",
            &format!("||e^L F_{} - e^(-1/2) F_{}||_2", i + 1, i + 1),
            e_f,
            "<= 1e-6",
            e_f <= 1e-6,
        );
    }
    let (gx, gy) = ef.grad_gamma(alpha * alpha);
    let adv = ef.vg.x.mul(&gx)?.add(&ef.vg.y.mul(&gy)?)?.max_abs();
    report.verdict("eigenstructure", "max |v^G . grad Gamma|", adv, "<= 1e-8", adv <= 1e-8);
    let a = config.f64("gamma_mass")?;
    let t_gamma = config.f64("gamma_t_end")?;
    let mut gsim = Simulation::new(scaled_config(config, SystemKind::Full)?, &gamma_field(grid, 0.0, alpha)?.scale(a))?;
    let mut worst: f64 = 0.0;
    let mut gerr = None;
    gsim.run_to(t_gamma, &mut |s: &SimState| match gamma_field(grid, s.time, alpha) {
        Ok(g) => worst = worst.max(weighted_norm(&s.w.axpy(-a, &g).expect("same grid"), WeightExponent::ZERO)),
        Err(e) => gerr = Some(e),
    })?;
    if let Some(e) = gerr {
        return Err(e);
    }
    report.verdict("eigenstructure", "Gamma evolution residual (L2)", worst, "<= 1e-7", worst <= 1e-7);

    // Filter identities.
    let fa = config.f64("filter_alpha")?;
    let fp = FilterParams::physical(fa)?;
    let mut r = rng(config.u64("seed")?);
    let (mut defect, mut ratio): (f64, f64) = (0.0, 0.0);
    for _ in 0..config.usize("filter_samples")? {
        let w = random_localized(grid, &mut r);
        defect = defect.max(energy_identity_defect(&w, fp));
        ratio = ratio.max(weighted_norm(&helmholtz_filter(&w, fp), wm2) / weighted_norm(&w, wm2));
    }
    report.verdict("filter-identities", "energy identity relative defect", defect, "<= 1e-10", defect <= 1e-10);
    report.verdict("filter-identities", "max ||Hw||_2 / ||w||_2", ratio, "<= 1", ratio <= 1.0);
    let fp_gamma = FilterParams::physical(alpha)?;
    let h_gamma = helmholtz_filter(&ef.gamma(alpha * alpha), fp_gamma).sub(&ef.g)?.max_abs();
    report.verdict("filter-identities", "max |H Gamma - G|", h_gamma, "<= 1e-10", h_gamma <= 1e-10);

    // Heat-kernel norms.
    let mut heat_err: f64 = 0.0;
    for &t in &[0.5, 1.0, 2.0] {
        let k = heat_kernel(grid, t)?;
        for &p in &[1.0, 2.0, 4.0] {
            let exact = heat_kernel_lp_norm(p, t);
            heat_err = heat_err.max((lp_norm(&k, p)? - exact).abs() / exact);
        }
    }
    report.verdict("heat-kernel-norms", "max relative error of |Phi(t)|_p", heat_err, "<= 1e-6", heat_err <= 1e-6);
    report.snapshots.push((
        "final".into(),
        Snapshot {
            field: sim.state().w.clone(),
            alpha,
            time: sim.time(),
        },
    ));
    Ok(report)
}

/// Lyapunov-Perron checks for one order `m`.
fn lp_order(config: &Config, m: u32) -> Result<(Series, Vec<Verdict>, Vec<String>)> {
    let grid = config.grid()?;
    let mu = config.f64(if m == 2 { "mu2" } else { "mu3" })?;
    let r0 = config.f64("r0")?;
    let steps = config.usize("steps")?;
    let wm = WeightExponent::new(m as f64)?;
    let w0 = two_blob(grid, Frame::Scaled, config.f64("spread")?, wm, r0);
    let ctx = LPContext::new(m, mu, config.f64("alpha")?, &w0, r0, config.f64("dt")?, steps + 3)?;
    let f0 = ctx.initial_perturbation();
    let seq = semiorbit(&ctx, &f0, steps)?;
    let res = lp_residual(&seq, &ctx, steps + 2, RemainderSource::Telescoped)?;
    let tol = stepping_tolerance(&ctx, &seq)?;
    let lip = estimate_lipschitz(&ctx, config.usize("lipschitz_samples")?, config.u64("seed")?)?;
    let crit = if m == 2 { "lyapunov-perron" } else { "lyapunov-perron-2" };
    let mut verdicts = Vec::new();
    let mut v = |check: String, value: f64, bound: String, pass: bool| {
        verdicts.push(Verdict {
            criterion: crit.into(),
            check,
            value,
            bound,
            pass,
        })
    };
    let lim = 5.0 * (tol + res.tail_bound);
    v("lp residual".into(), res.residual, format!("<= {lim:.3e}"), res.residual <= lim);
    v(
        "LipR * contraction sum".into(),
        lip.lip_r * lip.lhs,
        "< 1".into(),
        lip.contraction_ok,
    );

    let mut series = Series::new(
        &format!("lp_m{m}"),
        &["n", "norm", "ratio", "mass", "b1", "b2", "lp_residual", "S_norm"],
    );
    let norms: Vec<f64> = seq.entries.iter().map(|f| weighted_norm(f, wm)).collect();
    let mut s_norms = Vec::new();
    for n in 0..=steps {
        s_norms.push(if m == 3 { weighted_norm(&forcing_s(&ctx, n)?, wm) } else { 0.0 });
    }
    let mut worst_mass: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    for (n, f) in seq.entries.iter().enumerate() {
        let mom = moments(f);
        let ratio = if n > 0 { norms[n] / norms[n - 1] } else { f64::NAN };
        if n >= 2 {
            worst_ratio = worst_ratio.max(ratio);
        }
        let p1 = if m == 3 {
            mom.a.abs().max(mom.b1.abs()).max(mom.b2.abs())
        } else {
            mom.a.abs()
        };
        worst_mass = worst_mass.max(p1);
        series.push(vec![
            n as f64,
            norms[n],
            ratio,
            mom.a,
            mom.b1,
            mom.b2,
            res.per_n[n],
            s_norms[n],
        ]);
    }
    if m == 2 {
        let bound = (-0.4f64).exp();
        v(
            "step ratio for n >= 2".into(),
            worst_ratio,
            format!("<= {bound:.6}"),
            worst_ratio <= bound,
        );
        v("max |mass of f_n|".into(), worst_mass, "<= 1e-9".into(), worst_mass <= 1e-9);
    } else {
        let bound = (-1.0f64).exp() * 1.05;
        let s_ratio = (0..steps.min(5))
            .map(|n| s_norms[n + 1] / s_norms[n])
            .fold(0.0, f64::max);
        v(
            "max ||S_(n+1)||_3 / ||S_n||_3".into(),
            s_ratio,
            format!("<= {bound:.6}"),
            s_ratio <= bound,
        );
    }
    let notes = vec![
        format!(
            "m = {m}: stepping tolerance {tol:.3e}, tail bound {:.3e}, E^mu norm {:.6e}",
            res.tail_bound,
            emu_norm(&seq)
        ),
        format!(
            "m = {m}: LipR {:.6e}, C1 {:.6}, C2 {:.6}, contraction sum {:.6}, P1 size of f_n {worst_mass:.3e}, step ratio (n >= 2) {worst_ratio:.6}",
            lip.lip_r, lip.constants.c1, lip.constants.c2, lip.lhs
        ),
    ];
    Ok((series, verdicts, notes))
}

fn lp_verification(config: &Config) -> Result<DecayReport> {
    let mut report = DecayReport::new(config);
    let orders = config.u32_list("orders")?;
    if orders.is_empty() || orders.iter().any(|&m| m != 2 && m != 3) {
        return Err(Error::Config {
            key: "orders".into(),
            message: "expected a comma-separated subset of 2,3".into(),
        });
    }
    let results: Vec<Result<(Series, Vec<Verdict>, Vec<String>)>> = if thread_budget() > 1 && orders.len() > 1 {
        std::thread::scope(|scope| {
            let handles: Vec<_> = orders
                .iter()
                .map(|&m| scope.spawn(move || lp_order(config, m)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("worker panicked"))
                .collect()
        })
    } else {
        orders.iter().map(|&m| lp_order(config, m)).collect()
    };
    for r in results {
        let (series, verdicts, notes) = r?;
        report.series.push(series);
        report.verdicts.extend(verdicts);
        report.warnings.extend(notes);
    }
    Ok(report)
}
