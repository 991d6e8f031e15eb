//! Monte Carlo driver: error rates, detection boundaries and rate sweeps.
//!
//! Trial `i` of an experiment draws its noise from
//! `derive_seed(master_seed, [i])`, so results do not depend on how trials are
//! scheduled across threads. Rejections are aggregated with an integer sum.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::besov::CoefficientTree;
use crate::error::{Error, Result};
use crate::format::fmt17;
use crate::noise::{derive_seed, observe, observe_split};
use crate::signal::{separation_cap, SignalSpec};
use crate::smooth_test::{
    min_n_for_separation, rate_exponent, run_split_test_with, run_test, SplitCalibration, SplitThresholds,
    TestParams,
};

pub const MIN_TRIALS: usize = 100;

/// What an experiment estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentMode {
    /// Rejection rate under a null signal.
    Level,
    /// Rejection rate under an alternative.
    Power,
    /// Detection boundaries over a grid of `n`.
    Sweep,
    /// Detection boundary at `params.n`.
    Boundary,
}

/// Which statistic the experiment runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestVariant {
    #[default]
    Plugin,
    Split { calibration: SplitCalibration },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSettings {
    #[serde(default)]
    pub n_grid: Vec<f64>,
    #[serde(default = "default_probe_trials")]
    pub trials_per_probe: usize,
    #[serde(default = "default_steps")]
    pub bisection_steps: u32,
    #[serde(default = "default_target")]
    pub target_power: f64,
    /// Also bisect the Wilson band of the power curve to bracket the boundary.
    #[serde(default)]
    pub confidence_band: bool,
}

fn default_probe_trials() -> usize {
    500
}
fn default_steps() -> u32 {
    20
}
fn default_target() -> f64 {
    0.5
}
fn default_trials() -> usize {
    2000
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            n_grid: Vec::new(),
            trials_per_probe: default_probe_trials(),
            bisection_steps: default_steps(),
            target_power: default_target(),
            confidence_band: false,
        }
    }
}

/// A complete, replayable experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub params: TestParams,
    pub signal: SignalSpec,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    pub mode: ExperimentMode,
    #[serde(default)]
    pub test: TestVariant,
    #[serde(default)]
    pub sweep: SweepSettings,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.trials < MIN_TRIALS {
            return Err(Error::Config(format!("trials must be at least {MIN_TRIALS}, got {}", self.trials)));
        }
        let s = &self.sweep;
        if matches!(self.mode, ExperimentMode::Sweep | ExperimentMode::Boundary) {
            if s.trials_per_probe < MIN_TRIALS {
                return Err(Error::Config(format!(
                    "sweep.trials_per_probe must be at least {MIN_TRIALS}, got {}",
                    s.trials_per_probe
                )));
            }
            if !(s.target_power > 0.0 && s.target_power < 1.0) {
                return Err(Error::Config(format!("sweep.target_power must lie in (0, 1), got {}", s.target_power)));
            }
            if s.bisection_steps == 0 || s.bisection_steps > 60 {
                return Err(Error::Config(format!("sweep.bisection_steps must lie in 1..=60, got {}", s.bisection_steps)));
            }
            AmplitudePolicy::of(&self.signal)?;
        }
        if self.mode == ExperimentMode::Sweep {
            validate_grid(&s.n_grid)?;
        }
        Ok(())
    }
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::Config("sweep.n_grid needs at least two points".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) || !(grid[0] > 1.0) {
        return Err(Error::Config("sweep.n_grid must be strictly increasing and above 1".into()));
    }
    let decades = (grid[grid.len() - 1] / grid[0]).log10();
    if decades < 3.0 - 1e-9 {
        return Err(Error::Config(format!("sweep.n_grid must span at least 3 decades, spans {decades:.2}")));
    }
    Ok(())
}

/// Outcome of a rejection-rate estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCResult {
    pub trials: usize,
    pub rejections: u64,
    pub rate: f64,
    pub wilson_ci_95: (f64, f64),
    pub seed: u64,
    /// Seconds; the only field that varies between identical runs.
    pub wall_time: f64,
}

impl MCResult {
    fn new(trials: usize, rejections: u64, seed: u64, wall_time: f64) -> Self {
        MCResult {
            trials,
            rejections,
            rate: rejections as f64 / trials as f64,
            wilson_ci_95: wilson_interval(rejections, trials as u64, 0.95),
            seed,
            wall_time,
        }
    }

    /// Binomial standard error `√(p(1−p)/trials)` at the point estimate.
    pub fn standard_error(&self) -> f64 {
        (self.rate * (1.0 - self.rate) / self.trials as f64).sqrt()
    }

    pub fn csv_header() -> &'static str {
        "n,amplitude,trials,rejections,rate,ci_lo,ci_hi"
    }

    pub fn csv_row(&self, n: f64, amplitude: Option<f64>) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            fmt17(n),
            amplitude.map(fmt17).unwrap_or_default(),
            self.trials,
            self.rejections,
            fmt17(self.rate),
            fmt17(self.wilson_ci_95.0),
            fmt17(self.wilson_ci_95.1)
        )
    }
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(rejections: u64, trials: u64, conf: f64) -> (f64, f64) {
    assert!(rejections <= trials && trials > 0, "need 0 <= rejections <= trials, trials > 0");
    assert!(conf > 0.0 && conf < 1.0, "confidence must lie in (0, 1)");
    let z = Normal::standard().inverse_cdf(0.5 + conf / 2.0);
    let n = trials as f64;
    let p = rejections as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if rejections == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if rejections == trials { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Test variant with any calibration already done.
enum Runner {
    Plugin,
    Split(SplitThresholds),
}

impl Runner {
    fn new(params: &TestParams, variant: TestVariant) -> Result<Self> {
        Ok(match variant {
            TestVariant::Plugin => Runner::Plugin,
            TestVariant::Split { calibration } => Runner::Split(SplitThresholds::compute(params, calibration)?),
        })
    }

    fn rejects(&self, signal: &CoefficientTree, params: &TestParams, seed: u64) -> Result<bool> {
        Ok(match self {
            Runner::Plugin => run_test(&observe(signal, params.n, seed)?, params)?.rejects(),
            Runner::Split(thresholds) => {
                let (a, b) = observe_split(signal, params.n, seed)?;
                run_split_test_with(&a, &b, params, thresholds)?.rejects()
            }
        })
    }
}

/// Counts rejections over `trials` independent observations of `signal`.
/// The signal is padded or truncated to the cutoff level first; levels above
/// it never enter the decision.
fn count_rejections(signal: &CoefficientTree, params: &TestParams, runner: &Runner, trials: usize, master: u64) -> Result<u64> {
    if signal.layout() != params.layout() {
        return Err(Error::Config("signal layout differs from the test parameters".into()));
    }
    let signal = signal.resized(params.j()?)?;
    (0..trials as u64)
        .into_par_iter()
        .map(|i| runner.rejects(&signal, params, derive_seed(master, &[i])).map(u64::from))
        .try_reduce(|| 0, |a, b| Ok(a + b))
}

fn with_separation_hint(err: Error, params: &TestParams, l_max: u32) -> Error {
    match err {
        Error::Infeasible { rho, cap, .. } => {
            let hint = match min_n_for_separation(params, l_max) {
                Some(n) => format!("; the separation C̃(α)·n^(-t/(2t+1/2)) becomes feasible for n ≥ {n:.6e}"),
                None => "; no level separates Σ(t, B) from Σ(s, B)".to_string(),
            };
            Error::Infeasible { rho, cap, hint }
        }
        other => other,
    }
}

fn build_signal(spec: &SignalSpec, params: &TestParams) -> Result<CoefficientTree> {
    spec.build()
        .map_err(|e| with_separation_hint(e, params, spec.l_max().unwrap_or(params.j0)))
}

/// Empirical `E_f Ψ_n` for the experiment's signal.
pub fn estimate_error(spec: &ExperimentSpec) -> Result<MCResult> {
    spec.validate()?;
    let start = Instant::now();
    let signal = build_signal(&spec.signal, &spec.params)?;
    let runner = Runner::new(&spec.params, spec.test)?;
    let rejections = count_rejections(&signal, &spec.params, &runner, spec.trials, spec.master_seed)?;
    Ok(MCResult::new(spec.trials, rejections, spec.master_seed, start.elapsed().as_secs_f64()))
}

/// Which amplitude a boundary search varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudePolicy {
    /// `ρ` of a single-level separated alternative, searched in `(0, cap]`.
    Separated,
    /// `υ` of the Rademacher alternative, searched in `(0, min(1, B)]`.
    Rademacher,
}

impl AmplitudePolicy {
    pub fn of(signal: &SignalSpec) -> Result<Self> {
        match signal {
            SignalSpec::SeparatedAlt { .. } => Ok(AmplitudePolicy::Separated),
            SignalSpec::RademacherAlt { .. } => Ok(AmplitudePolicy::Rademacher),
            _ => Err(Error::Config("boundary searches need a separated_alt or rademacher_alt signal template".into())),
        }
    }
}

/// One power evaluation during a boundary search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub amplitude: f64,
    pub result: MCResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub n: f64,
    pub j: u32,
    /// Smallest probed amplitude whose power reached the target.
    pub boundary: f64,
    /// Power estimate at `boundary`.
    pub at_boundary: MCResult,
    /// Largest amplitude the family allows at this `n`.
    pub amplitude_cap: f64,
    /// Amplitudes where the upper / lower Wilson bound of the power crosses
    /// the target, when requested.
    pub band: Option<(f64, f64)>,
    pub trace: Vec<Probe>,
}

impl BoundaryPoint {
    pub fn band_width(&self) -> Option<f64> {
        self.band.map(|(lo, hi)| hi - lo)
    }
}

fn format_trace(trace: &[Probe]) -> String {
    trace
        .iter()
        .map(|p| format!("  amplitude {:.6e}: {}/{} rejections", p.amplitude, p.result.rejections, p.result.trials))
        .collect::<Vec<_>>()
        .join("\n")
}

struct BoundarySearch<'a> {
    params: TestParams,
    template: &'a SignalSpec,
    runner: Runner,
    trials: usize,
    seed: u64,
    signal_seed: u64,
    j: u32,
    trace: Vec<Probe>,
}

impl BoundarySearch<'_> {
    fn signal(&self, amplitude: f64) -> Result<SignalSpec> {
        let mut spec = self.template.with_amplitude(amplitude)?.with_n(self.params.n);
        match &mut spec {
            SignalSpec::SeparatedAlt { l_max, seed, j0, z0, .. } => {
                *l_max = self.j;
                *seed = self.signal_seed;
                (*j0, *z0) = (self.params.j0, self.params.z0);
            }
            SignalSpec::RademacherAlt { l_max, seed, j0, z0, .. } => {
                *l_max = Some(self.j);
                *seed = self.signal_seed;
                (*j0, *z0) = (self.params.j0, self.params.z0);
            }
            _ => unreachable!("checked by AmplitudePolicy::of"),
        }
        Ok(spec)
    }

    fn probe(&mut self, amplitude: f64) -> Result<MCResult> {
        let signal = build_signal(&self.signal(amplitude)?, &self.params)?;
        let start = Instant::now();
        let rejections = count_rejections(&signal, &self.params, &self.runner, self.trials, self.seed)?;
        let result = MCResult::new(self.trials, rejections, self.seed, start.elapsed().as_secs_f64());
        self.trace.push(Probe { amplitude, result });
        Ok(result)
    }

    /// Smallest amplitude in `(0, cap]` satisfying `accept`, to within
    /// `cap / 2^steps`. `accept` must hold at `cap`.
    fn bisect(&mut self, cap: f64, steps: u32, accept: impl Fn(&MCResult) -> bool) -> Result<(f64, MCResult)> {
        let top = self.probe(cap)?;
        if !accept(&top) {
            return Err(Error::Bisection {
                reason: format!(
                    "power at the largest admissible amplitude {cap:.6e} is {}, below the target (n = {:e})",
                    top.rate, self.params.n
                ),
                trace: format_trace(&self.trace),
            });
        }
        let (mut lo, mut hi, mut at_hi) = (0.0, cap, top);
        for _ in 0..steps {
            let mid = 0.5 * (lo + hi);
            let r = self.probe(mid)?;
            if accept(&r) {
                (hi, at_hi) = (mid, r);
            } else {
                lo = mid;
            }
        }
        Ok((hi, at_hi))
    }

    /// Fails when a larger amplitude has visibly lower power than a smaller
    /// one (beyond three combined standard errors).
    fn check_monotone(&self) -> Result<()> {
        let mut probes = self.trace.clone();
        probes.sort_by(|a, b| a.amplitude.total_cmp(&b.amplitude));
        for (i, small) in probes.iter().enumerate() {
            for large in &probes[i + 1..] {
                let se = (small.result.standard_error().powi(2) + large.result.standard_error().powi(2)).sqrt();
                let floor = 1.0 / small.result.trials as f64;
                if small.result.rate - large.result.rate > 3.0 * se.max(floor) {
                    return Err(Error::Bisection {
                        reason: format!(
                            "power is not monotone in the amplitude: {:.4} at {:.6e} but {:.4} at {:.6e}",
                            small.result.rate, small.amplitude, large.result.rate, large.amplitude
                        ),
                        trace: format_trace(&self.trace),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Detection boundary at `params.n`: the smallest amplitude whose power
/// reaches `settings.target_power`, found by bisection with common random
/// numbers across probes.
pub fn detection_boundary(
    params: &TestParams,
    template: &SignalSpec,
    variant: TestVariant,
    settings: &SweepSettings,
    master_seed: u64,
) -> Result<BoundaryPoint> {
    params.validate()?;
    let policy = AmplitudePolicy::of(template)?;
    let j = params.j()?;
    let cap = match policy {
        AmplitudePolicy::Separated => separation_cap(params.t, params.s, params.b, params.j0, j),
        AmplitudePolicy::Rademacher => params.b.min(1.0),
    };
    if !(cap > 0.0) {
        return Err(Error::Infeasible { rho: 0.0, cap: 0.0, hint: "; no level below the cutoff separates the balls".into() });
    }
    let mut search = BoundarySearch {
        params: *params,
        template,
        runner: Runner::new(params, variant)?,
        trials: settings.trials_per_probe,
        seed: derive_seed(master_seed, &[0]),
        signal_seed: derive_seed(master_seed, &[1]),
        j,
        trace: Vec::new(),
    };
    let target = settings.target_power;
    let steps = settings.bisection_steps;
    let (boundary, at_boundary) = search.bisect(cap, steps, |r| r.rate >= target)?;
    let band = if settings.confidence_band {
        let (lo, _) = search.bisect(cap, steps, |r| r.wilson_ci_95.1 >= target)?;
        let (hi, _) = search.bisect(cap, steps, |r| r.wilson_ci_95.0 >= target)?;
        Some((lo, hi))
    } else {
        None
    };
    search.check_monotone()?;
    Ok(BoundaryPoint { n: params.n, j, boundary, at_boundary, amplitude_cap: cap, band, trace: search.trace })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub points: Vec<BoundaryPoint>,
    /// Least-squares slope of `ln boundary` against `ln n`.
    pub slope: f64,
    pub intercept: f64,
    pub residuals: Vec<f64>,
    /// `−t/(2t + 1/2)`.
    pub expected_slope: f64,
}

impl SweepResult {
    /// One row per grid point plus a summary row (`n` column set to
    /// `slope`, residuals `;`-separated in the amplitude column).
    pub fn csv(&self) -> String {
        let mut out = String::from(MCResult::csv_header());
        out.push('\n');
        for p in &self.points {
            out.push_str(&p.at_boundary.csv_row(p.n, Some(p.boundary)));
            out.push('\n');
        }
        let residuals: Vec<String> = self.residuals.iter().map(|&r| fmt17(r)).collect();
        out.push_str(&format!(
            "slope,intercept,expected_slope,residuals\n{},{},{},{}\n",
            fmt17(self.slope),
            fmt17(self.intercept),
            fmt17(self.expected_slope),
            residuals.join(";")
        ));
        out
    }
}

/// Least-squares line through `(x, y)`; returns `(slope, intercept)`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Detection boundaries over `settings.n_grid` and the fitted log-log slope.
pub fn rate_sweep(
    params_base: &TestParams,
    template: &SignalSpec,
    variant: TestVariant,
    settings: &SweepSettings,
    master_seed: u64,
) -> Result<SweepResult> {
    validate_grid(&settings.n_grid)?;
    let points = settings
        .n_grid
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let params = params_base.with_n(n)?;
            detection_boundary(&params, template, variant, settings, derive_seed(master_seed, &[i as u64]))
        })
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = points.iter().map(|p| p.n.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.boundary.ln()).collect();
    let (slope, intercept) = fit_line(&xs, &ys);
    let residuals = xs.iter().zip(&ys).map(|(x, y)| y - (intercept + slope * x)).collect();
    Ok(SweepResult { points, slope, intercept, residuals, expected_slope: -rate_exponent(params_base.t) })
}

/// Sweep driven by an experiment description (mode `sweep`).
pub fn run_sweep(spec: &ExperimentSpec) -> Result<SweepResult> {
    spec.validate()?;
    rate_sweep(&spec.params, &spec.signal, spec.test, &spec.sweep, spec.master_seed)
}

/// Single boundary driven by an experiment description (mode `boundary`).
pub fn run_boundary(spec: &ExperimentSpec) -> Result<BoundaryPoint> {
    spec.validate()?;
    detection_boundary(&spec.params, &spec.signal, spec.test, &spec.sweep, spec.master_seed)
}
