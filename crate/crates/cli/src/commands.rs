//! Resolved command configurations. Each one is stored verbatim in the run
//! manifest, so replaying a manifest executes the same code path.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use smoothtest_core::harness::{run_boundary, run_sweep};
use smoothtest_core::lower_bound::{lower_bound_table, LowerBoundRow};
use smoothtest_core::{
    estimate_error, observe, observe_hetero, observe_split, run_split_test, run_test, BesovBall, CoefficientTree,
    ExperimentMode, ExperimentSpec, MCResult, Observation, SignalSpec, SplitCalibration, TestParams, TestReport,
};

use crate::config::{load_json, parse_json, read_text, write_json, write_text};
use crate::error::{code, CliError, Result};
use crate::manifest::{default_path, RunManifest};

pub trait Run: Serialize + DeserializeOwned {
    const NAME: &'static str;

    fn seed(&self) -> u64;
    fn inputs(&self) -> Vec<PathBuf>;
    fn outputs(&mut self) -> Vec<&mut PathBuf>;
    /// Runs the command and returns the process exit code.
    fn execute(&self) -> Result<i32>;
}

/// Executes `run` and records a manifest next to its first output (or at
/// `manifest` when given).
pub fn launch<R: Run>(mut run: R, manifest: Option<PathBuf>) -> Result<i32> {
    let status = run.execute()?;
    let outputs: Vec<PathBuf> = run.outputs().into_iter().map(|p| p.clone()).collect();
    let target = manifest.or_else(|| outputs.first().map(|p| default_path(p)));
    if let Some(target) = target {
        let config = serde_json::to_value(&run).expect("serializable config");
        RunManifest::new(R::NAME, config, run.seed(), run.inputs(), outputs).write(&target)?;
    }
    Ok(status)
}

/// Re-executes a manifest, optionally writing its outputs into `out_dir`.
pub fn replay(manifest: &Path, out_dir: Option<&Path>) -> Result<i32> {
    let m = RunManifest::read(manifest)?;
    fn go<R: Run>(m: &RunManifest, path: &Path, out_dir: Option<&Path>) -> Result<i32> {
        let mut run: R = parse_json(path, &m.config.to_string())?;
        if let Some(dir) = out_dir {
            for p in run.outputs() {
                let name = p.file_name().map(PathBuf::from).unwrap_or_else(|| PathBuf::from("output"));
                *p = dir.join(name);
            }
        }
        launch(run, None)
    }
    match m.subcommand.as_str() {
        GenRun::NAME => go::<GenRun>(&m, manifest, out_dir),
        ObserveRun::NAME => go::<ObserveRun>(&m, manifest, out_dir),
        TestRun::NAME => go::<TestRun>(&m, manifest, out_dir),
        McRun::NAME => go::<McRun>(&m, manifest, out_dir),
        LbCheckRun::NAME => go::<LbCheckRun>(&m, manifest, out_dir),
        other => Err(CliError::Usage(format!("manifest names unknown subcommand `{other}`"))),
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenRun {
    pub signal: SignalSpec,
    pub out: PathBuf,
}

fn signal_seed(signal: &SignalSpec) -> u64 {
    match *signal {
        SignalSpec::NullWorstCase { seed, .. }
        | SignalSpec::NullRandom { seed, .. }
        | SignalSpec::RademacherAlt { seed, .. }
        | SignalSpec::SeparatedAlt { seed, .. } => seed,
        SignalSpec::Explicit { .. } => 0,
    }
}

impl Run for GenRun {
    const NAME: &'static str = "gen";

    fn seed(&self) -> u64 {
        signal_seed(&self.signal)
    }
    fn inputs(&self) -> Vec<PathBuf> {
        Vec::new()
    }
    fn outputs(&mut self) -> Vec<&mut PathBuf> {
        vec![&mut self.out]
    }
    fn execute(&self) -> Result<i32> {
        let tree = self.signal.build()?;
        write_json(&self.out, &tree)?;
        eprintln!("wrote {} ({} coefficients, levels {}..={})", self.out.display(), tree.total_len(), tree.j0(), tree.l_max());
        Ok(code::ACCEPT)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserveRun {
    pub tree: PathBuf,
    pub n: f64,
    #[serde(default)]
    pub split: bool,
    #[serde(default)]
    pub profile: Option<PathBuf>,
    pub seed: u64,
    pub out: PathBuf,
}

impl Run for ObserveRun {
    const NAME: &'static str = "observe";

    fn seed(&self) -> u64 {
        self.seed
    }
    fn inputs(&self) -> Vec<PathBuf> {
        std::iter::once(self.tree.clone()).chain(self.profile.clone()).collect()
    }
    fn outputs(&mut self) -> Vec<&mut PathBuf> {
        vec![&mut self.out]
    }
    fn execute(&self) -> Result<i32> {
        let f: CoefficientTree = load_json(&self.tree)?;
        match (&self.profile, self.split) {
            (Some(_), true) => return Err(CliError::Usage("--profile and --split cannot be combined".into())),
            (Some(profile), false) => {
                let profile: CoefficientTree = load_json(profile)?;
                write_json(&self.out, &observe_hetero(&f, self.n, &profile, self.seed)?)?
            }
            (None, true) => {
                let (a, b) = observe_split(&f, self.n, self.seed)?;
                write_json(&self.out, &[a, b])?
            }
            (None, false) => write_json(&self.out, &observe(&f, self.n, self.seed)?)?,
        }
        Ok(code::ACCEPT)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestRun {
    pub input: PathBuf,
    pub params: TestParams,
    #[serde(default)]
    pub split_calibration: Option<SplitCalibration>,
    #[serde(default)]
    pub report: Option<PathBuf>,
    #[serde(default)]
    pub csv: Option<PathBuf>,
}

/// What a `test` input file holds.
enum TestInput {
    Single(Observation),
    Split(Observation, Observation),
}

fn read_test_input(path: &Path, n: f64) -> Result<TestInput> {
    let text = read_text(path)?;
    let value: Value = parse_json(path, &text)?;
    Ok(match value {
        Value::Array(ref items) if items.len() == 2 => {
            let [a, b]: [Observation; 2] = parse_json(path, &text)?;
            TestInput::Split(a, b)
        }
        Value::Object(ref map) if map.contains_key("n") => TestInput::Single(parse_json(path, &text)?),
        _ => {
            // A bare coefficient tree is treated as a noiseless observation.
            let tree: CoefficientTree = parse_json(path, &text)?;
            TestInput::Single(Observation::exact(tree, n)?)
        }
    })
}

impl Run for TestRun {
    const NAME: &'static str = "test";

    fn seed(&self) -> u64 {
        match self.split_calibration {
            Some(SplitCalibration::Empirical { seed, .. }) => seed,
            _ => 0,
        }
    }
    fn inputs(&self) -> Vec<PathBuf> {
        vec![self.input.clone()]
    }
    fn outputs(&mut self) -> Vec<&mut PathBuf> {
        self.report.iter_mut().chain(self.csv.iter_mut()).collect()
    }
    fn execute(&self) -> Result<i32> {
        let report: TestReport = match read_test_input(&self.input, self.params.n)? {
            TestInput::Single(obs) => {
                if self.split_calibration.is_some() {
                    return Err(CliError::Usage("a split calibration needs a split observation pair".into()));
                }
                run_test(&obs, &self.params)?
            }
            TestInput::Split(a, b) => {
                run_split_test(&a, &b, &self.params, self.split_calibration.unwrap_or(SplitCalibration::AnalyticDefault))?
            }
        };
        if let Some(path) = &self.report {
            write_json(path, &report)?;
        }
        let csv = format!("{}\n{}\n", TestReport::csv_header(), report.csv_row());
        if let Some(path) = &self.csv {
            write_text(path, &csv)?;
        }
        print!("{csv}");
        Ok(if report.rejects() { code::REJECT } else { code::ACCEPT })
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McRun {
    pub experiment: ExperimentSpec,
    pub out: PathBuf,
    #[serde(default)]
    pub json: Option<PathBuf>,
}

fn amplitude(signal: &SignalSpec) -> Option<f64> {
    match *signal {
        SignalSpec::SeparatedAlt { rho, .. } => Some(rho),
        SignalSpec::RademacherAlt { upsilon, .. } => Some(upsilon),
        _ => None,
    }
}

impl Run for McRun {
    const NAME: &'static str = "mc";

    fn seed(&self) -> u64 {
        self.experiment.master_seed
    }
    fn inputs(&self) -> Vec<PathBuf> {
        Vec::new()
    }
    fn outputs(&mut self) -> Vec<&mut PathBuf> {
        std::iter::once(&mut self.out).chain(self.json.iter_mut()).collect()
    }
    fn execute(&self) -> Result<i32> {
        let spec = &self.experiment;
        let (csv, full): (String, Value) = match spec.mode {
            ExperimentMode::Level | ExperimentMode::Power => {
                let r = estimate_error(spec)?;
                eprintln!(
                    "rate {} ({} / {}), 95% CI [{:.4}, {:.4}], {:.2}s",
                    r.rate, r.rejections, r.trials, r.wilson_ci_95.0, r.wilson_ci_95.1, r.wall_time
                );
                let csv = format!("{}\n{}\n", MCResult::csv_header(), r.csv_row(spec.params.n, amplitude(&spec.signal)));
                (csv, json!(r))
            }
            ExperimentMode::Boundary => {
                let p = run_boundary(spec)?;
                eprintln!("boundary {:e} at n = {:e} (power {})", p.boundary, p.n, p.at_boundary.rate);
                let csv = format!("{}\n{}\n", MCResult::csv_header(), p.at_boundary.csv_row(p.n, Some(p.boundary)));
                (csv, json!(p))
            }
            ExperimentMode::Sweep => {
                let s = run_sweep(spec)?;
                eprintln!("slope {} (expected {})", s.slope, s.expected_slope);
                (s.csv(), json!(s))
            }
        };
        write_text(&self.out, &csv)?;
        if let Some(path) = &self.json {
            write_json(path, &full)?;
        }
        Ok(code::ACCEPT)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LbCheckRun {
    #[serde(default = "default_upsilons")]
    pub upsilons: Vec<f64>,
    #[serde(default = "default_levels")]
    pub levels: Vec<u32>,
    #[serde(default = "default_lb_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    pub out: PathBuf,
}

pub fn default_upsilons() -> Vec<f64> {
    (1..=10).map(|i| i as f64 / 10.0).collect()
}
pub fn default_levels() -> Vec<u32> {
    vec![1, 2, 3]
}
pub fn default_lb_trials() -> usize {
    10_000
}

fn lb_violations(rows: &[LowerBoundRow]) -> Vec<String> {
    let mut bad = Vec::new();
    for r in rows {
        if let Some(e) = r.enumeration {
            if (e - r.closed_form).abs() > 1e-12 {
                bad.push(format!("υ = {}, j = {}: enumeration {e} vs closed form {}", r.upsilon, r.j, r.closed_form));
            }
        }
        if r.closed_form > r.bound_2v4 {
            bad.push(format!("υ = {}, j = {}: closed form {} exceeds 2υ⁴", r.upsilon, r.j, r.closed_form));
        }
    }
    bad
}

impl Run for LbCheckRun {
    const NAME: &'static str = "lb-check";

    fn seed(&self) -> u64 {
        self.seed
    }
    fn inputs(&self) -> Vec<PathBuf> {
        Vec::new()
    }
    fn outputs(&mut self) -> Vec<&mut PathBuf> {
        vec![&mut self.out]
    }
    fn execute(&self) -> Result<i32> {
        let rows = lower_bound_table(&self.upsilons, &self.levels, self.trials, self.seed)?;
        let mut csv = format!("{}\n", LowerBoundRow::csv_header());
        for r in &rows {
            csv.push_str(&r.csv_row());
            csv.push('\n');
        }
        write_text(&self.out, &csv)?;
        let bad = lb_violations(&rows);
        if bad.is_empty() {
            eprintln!("{} rows, all checks hold", rows.len());
            Ok(code::ACCEPT)
        } else {
            Err(CliError::CheckFailed(bad.join("; ")))
        }
    }
}

/// Norms and distances of a tree file, with optional predicates.
pub fn check(tree: &Path, t: Option<f64>, member_of: Option<f64>, separated_from: Option<f64>, b: Option<f64>, rho: Option<f64>) -> Result<i32> {
    let f: CoefficientTree = load_json(tree)?;
    let need_b = || b.ok_or_else(|| CliError::Usage("--B is required for membership and separation checks".into()));
    let mut report = json!({
        "J0": f.j0(),
        "z0": f.z0(),
        "l_max": f.l_max(),
        "l2_norm": f.l2_norm(),
        "level_norms": (f.j0()..=f.l_max()).map(|l| f.level_norm(l).unwrap()).collect::<Vec<_>>(),
    });
    let mut failures = Vec::new();
    if let Some(t) = t {
        report["besov_norm_t"] = json!(f.besov_norm(t)?);
    }
    if let Some(s) = member_of {
        let ball = BesovBall::new(s, need_b()?)?;
        let norm = f.besov_norm(s)?;
        let inside = norm <= ball.radius * (1.0 + 1e-12);
        report["member"] = json!({ "s": s, "B": ball.radius, "besov_norm": norm, "inside": inside });
        if !inside {
            failures.push(format!("besov norm {norm} at smoothness {s} exceeds B = {}", ball.radius));
        }
    }
    if let Some(s) = separated_from {
        let rho = rho.ok_or_else(|| CliError::Usage("--separated-from needs --rho".into()))?;
        let ball = BesovBall::new(s, need_b()?)?;
        let distance = f.distance_to_ball(&ball);
        let ok = distance >= rho * (1.0 - 1e-12);
        report["separation"] = json!({ "s": s, "B": ball.radius, "rho": rho, "distance": distance, "separated": ok });
        if !ok {
            failures.push(format!("distance {distance} to the smoothness-{s} ball is below rho = {rho}"));
        }
    }
    println!("{}", serde_json::to_string_pretty(&report).expect("serializable report"));
    if failures.is_empty() {
        Ok(code::ACCEPT)
    } else {
        Err(CliError::CheckFailed(failures.join("; ")))
    }
}
