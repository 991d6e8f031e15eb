//! The level-wise smoothness test.
//!
//! For every level `J0 ≤ l ≤ j` the statistic
//! `T_n(l) = ‖Π_{W_l} f̂‖² − |Z_l|/n` estimates the level energy without bias.
//! It is compared with `t_n(l)² = (B 2^{-ls} + τ_l/2)²`, where
//! `τ_l = c(α) 2^{(j+l)/8} / √n` above the base level, `τ_{J0} = c(α)/√n`, and
//! `c(α) = 24 √(z0/α)`. The null `f ∈ Σ(s, B)` is rejected as soon as one
//! level reaches its threshold. Levels above the cutoff
//! `j = ⌊log2(n) / (2t + 1/2)⌋` are ignored.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::besov::{tail_bound, Layout};
use crate::error::{domain, structure, Error, Result};
use crate::format::fmt17;
use crate::noise::{derive_seed, observe_split, Observation, SplitTag};
use crate::signal::{gen_null, separation_cap};
use crate::sum::{dot, sum_squares};

/// Parameters of one test instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestParams {
    pub n: f64,
    pub t: f64,
    pub s: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub alpha: f64,
    #[serde(rename = "J0", default)]
    pub j0: u32,
    #[serde(default = "one")]
    pub z0: usize,
}

fn one() -> usize {
    1
}

impl TestParams {
    /// Validated parameters with the default base layout `J0 = 0, z0 = 1`.
    pub fn new(n: f64, t: f64, s: f64, b: f64, alpha: f64) -> Result<Self> {
        let p = TestParams { n, t, s, b, alpha, j0: 0, z0: 1 };
        p.validate()?;
        Ok(p)
    }

    pub fn with_layout(mut self, layout: Layout) -> Result<Self> {
        self.j0 = layout.j0;
        self.z0 = layout.z0;
        self.validate()?;
        Ok(self)
    }

    pub fn with_n(mut self, n: f64) -> Result<Self> {
        self.n = n;
        self.validate()?;
        Ok(self)
    }

    pub fn layout(&self) -> Layout {
        Layout { j0: self.j0, z0: self.z0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t > 0.0 && self.s > self.t && self.s.is_finite()) {
            return Err(domain(format!("need s > t > 0, got s = {}, t = {}", self.s, self.t)));
        }
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(domain(format!("radius B must be > 0, got {}", self.b)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(domain(format!("level α must lie in (0, 1), got {}", self.alpha)));
        }
        Layout::new(self.j0, self.z0)?;
        self.j().map(|_| ())
    }

    /// Cutoff level, checked against `J0`.
    pub fn j(&self) -> Result<u32> {
        let j = compute_j(self.n, self.t)?;
        if j < self.j0 {
            return Err(Error::Config(format!(
                "cutoff level j = {j} lies below J0 = {}; n = {} is too small",
                self.j0, self.n
            )));
        }
        Ok(j)
    }

    /// `c(α) = 24 √(z0/α)`.
    pub fn c_alpha(&self) -> f64 {
        24.0 * (self.z0 as f64 / self.alpha).sqrt()
    }
}

/// `j = ⌊log2(n) / (2t + 1/2)⌋`, so that `n^{1/(2t+1/2)}/2 < 2^j ≤ n^{1/(2t+1/2)}`.
pub fn compute_j(n: f64, t: f64) -> Result<u32> {
    if !(n > 1.0 && n.is_finite()) {
        return Err(domain(format!("cutoff level needs finite n > 1, got {n}")));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(domain(format!("cutoff level needs t > 0, got {t}")));
    }
    Ok((n.log2() / (2.0 * t + 0.5)).floor() as u32)
}

/// Exponent `t / (2t + 1/2)` of the separation rate `n^{-t/(2t+1/2)}`.
pub fn rate_exponent(t: f64) -> f64 {
    t / (2.0 * t + 0.5)
}

/// `τ_l`: `c(α) 2^{(j+l)/8} / √n` for `J0 < l ≤ j` and `c(α) / √n` at `J0`.
pub fn tau(l: u32, j: u32, n: f64, alpha: f64, z0: usize, j0: u32) -> Result<f64> {
    if l < j0 || l > j {
        return Err(Error::Range(format!("level {l} outside [{j0}, {j}]")));
    }
    let c = 24.0 * (z0 as f64 / alpha).sqrt();
    let scale = if l == j0 { 1.0 } else { ((j + l) as f64 / 8.0).exp2() };
    Ok(c * scale / n.sqrt())
}

/// `t_n(l)² = (B 2^{-ls} + τ_l / 2)²`.
#[allow(clippy::too_many_arguments)]
pub fn threshold(l: u32, j: u32, n: f64, alpha: f64, z0: usize, j0: u32, b: f64, s: f64) -> Result<f64> {
    let tau_l = tau(l, j, n, alpha, z0, j0)?;
    Ok(threshold_from_tau(l, tau_l, b, s))
}

pub(crate) fn threshold_from_tau(l: u32, tau_l: f64, b: f64, s: f64) -> f64 {
    let edge = b * (-(l as f64) * s).exp2() + tau_l / 2.0;
    edge * edge
}

/// `T_n(l) = Σ_k â_{l,k}² − |Z_l| / n`, using the observation's own `n`.
pub fn statistic(obs: &Observation, l: u32) -> Result<f64> {
    let level = obs
        .tree
        .level(l)
        .ok_or_else(|| structure(format!("observation has no level {l}")))?;
    Ok(sum_squares(level) - level.len() as f64 / obs.n)
}

/// `T̂_n(l) = ⟨Π_{W_l} f̂⁽¹⁾, Π_{W_l} f̂⁽²⁾⟩` for two independent halves.
pub fn split_statistic(first: &Observation, second: &Observation, l: u32) -> Result<f64> {
    check_halves(first, second)?;
    let a = first.tree.level(l).ok_or_else(|| structure(format!("first half has no level {l}")))?;
    let b = second.tree.level(l).ok_or_else(|| structure(format!("second half has no level {l}")))?;
    Ok(dot(a, b))
}

fn check_halves(first: &Observation, second: &Observation) -> Result<()> {
    if first.tree.layout() != second.tree.layout() {
        return Err(structure("split halves have different base layouts"));
    }
    let tags = (first.split, second.split);
    if !matches!(tags, (SplitTag::First, SplitTag::Second) | (SplitTag::Second, SplitTag::First)) {
        return Err(structure(format!("split statistic needs halves tagged 1 and 2, got {tags:?}")));
    }
    Ok(())
}

/// Evidence collected at one level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelStat {
    pub l: u32,
    #[serde(rename = "T")]
    pub statistic: f64,
    /// `τ_l`; for empirically calibrated split tests, the value implied by
    /// the calibrated cutoff.
    pub tau: f64,
    pub threshold_sq: f64,
    pub exceeded: bool,
}

impl LevelStat {
    pub fn margin(&self) -> f64 {
        self.statistic - self.threshold_sq
    }
}

/// How the thresholds of a report were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Calibration {
    Analytic,
    SplitAnalytic,
    SplitEmpirical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub j: u32,
    pub stats: Vec<LevelStat>,
    pub decision: u8,
    /// Separation `C̃(α) n^{-t/(2t+1/2)}` at which the test is guaranteed to
    /// be α-consistent.
    pub rho_n: f64,
    pub params: TestParams,
    pub calibration: Calibration,
    /// Top level present in the observation.
    pub l_max: u32,
    /// Energy a `Σ(t, B)` signal can carry above `l_max`.
    pub truncation_tail: f64,
    /// Set when the observation came from sampled data, whose noise only
    /// approximates the white-noise calibration.
    pub approximate: bool,
}

impl TestReport {
    pub fn rejects(&self) -> bool {
        self.decision == 1
    }

    /// Level with the largest `T − t²` and that margin.
    pub fn max_margin(&self) -> (u32, f64) {
        self.stats
            .iter()
            .map(|s| (s.l, s.margin()))
            .fold((self.params.j0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
    }

    pub fn csv_header() -> &'static str {
        "n,t,s,B,alpha,j,decision,argmax_level,max_margin"
    }

    pub fn csv_row(&self) -> String {
        let p = &self.params;
        let (arg, margin) = self.max_margin();
        format!(
            "{},{},{},{},{},{},{},{},{}",
            fmt17(p.n),
            fmt17(p.t),
            fmt17(p.s),
            fmt17(p.b),
            fmt17(p.alpha),
            self.j,
            self.decision,
            arg,
            fmt17(margin)
        )
    }
}

/// `C̃(α) = 24 √(z0/α) (2^t B / √(1 − 2^{-2t}) + 19)`.
pub fn c_tilde(params: &TestParams) -> f64 {
    let t = params.t;
    params.c_alpha() * (t.exp2() * params.b / (1.0 - (-2.0 * t).exp2()).sqrt() + 19.0)
}

/// `D̃(α) = min(((1 − α)/2)^{1/4}, B)`.
pub fn d_tilde(params: &TestParams) -> f64 {
    ((1.0 - params.alpha) / 2.0).powf(0.25).min(params.b)
}

/// Separation at which the test is α-consistent: `C̃(α) n^{-t/(2t+1/2)}`.
pub fn rho_upper(params: &TestParams) -> f64 {
    c_tilde(params) * params.n.powf(-rate_exponent(params.t))
}

/// Separation below which no test is α-consistent: `D̃(α) n^{-t/(2t+1/2)}`.
pub fn rho_lower(params: &TestParams) -> f64 {
    d_tilde(params) * params.n.powf(-rate_exponent(params.t))
}

/// Smallest `n` for which a single-level alternative on levels
/// `J0..=l_max` can sit at distance [`rho_upper`] from `Σ(s, B)`, or `None`
/// when no level separates the two balls.
pub fn min_n_for_separation(params: &TestParams, l_max: u32) -> Option<f64> {
    let cap = separation_cap(params.t, params.s, params.b, params.j0, l_max);
    (cap > 0.0).then(|| (c_tilde(params) / cap).powf(1.0 / rate_exponent(params.t)))
}

/// Radius of the deviation event at level `l`:
/// `4 √((3 z0 / Δ)(2^{(j+l)/2} / n² + 2^{l/4} ‖Π_{W_l} f‖² / n))`.
pub fn concentration_radius(l: u32, j: u32, n: f64, z0: usize, delta: f64, energy: f64) -> f64 {
    let var = ((j + l) as f64 / 2.0).exp2() / (n * n) + (l as f64 / 4.0).exp2() * energy / n;
    4.0 * (3.0 * z0 as f64 / delta * var).sqrt()
}

fn check_observation(obs: &Observation, params: &TestParams, expected_n: f64, j: u32) -> Result<()> {
    if obs.tree.layout() != params.layout() {
        return Err(Error::Config(format!(
            "observation layout (J0 = {}, z0 = {}) differs from the test's (J0 = {}, z0 = {})",
            obs.tree.j0(),
            obs.tree.z0(),
            params.j0,
            params.z0
        )));
    }
    if ((obs.n - expected_n) / expected_n).abs() > 1e-12 {
        return Err(Error::Config(format!("observation noise level {} does not match the expected {expected_n}", obs.n)));
    }
    if obs.tree.l_max() < j {
        return Err(Error::Coverage { required: j, available: obs.tree.l_max() });
    }
    Ok(())
}

fn report(params: &TestParams, j: u32, stats: Vec<LevelStat>, l_max: u32, calibration: Calibration) -> Result<TestReport> {
    let decision = u8::from(stats.iter().any(|s| s.exceeded));
    Ok(TestReport {
        j,
        stats,
        decision,
        rho_n: rho_upper(params),
        params: *params,
        calibration,
        l_max,
        truncation_tail: tail_bound(params.t, params.b, l_max as i32)?,
        approximate: false,
    })
}

/// Runs the test on one observation. The observation's `n` must equal
/// `params.n` and it must cover levels `J0..=j`.
pub fn run_test(obs: &Observation, params: &TestParams) -> Result<TestReport> {
    params.validate()?;
    let j = params.j()?;
    check_observation(obs, params, params.n, j)?;
    let stats = (params.j0..=j)
        .map(|l| {
            let statistic = statistic(obs, l)?;
            let tau = tau(l, j, params.n, params.alpha, params.z0, params.j0)?;
            let threshold_sq = threshold_from_tau(l, tau, params.b, params.s);
            Ok(LevelStat { l, statistic, tau, threshold_sq, exceeded: statistic >= threshold_sq })
        })
        .collect::<Result<Vec<_>>>()?;
    report(params, j, stats, obs.tree.l_max(), Calibration::Analytic)
}

/// Threshold policy for the split-sample test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum SplitCalibration {
    /// `t_n(l)` with `n` replaced by `n/2` inside `τ_l`.
    AnalyticDefault,
    /// Per-level `(1 − α/(2(j − J0 + 1)))`-quantiles of `T̂` simulated under
    /// the worst-case null.
    Empirical { trials: usize, seed: u64 },
}

/// Per-level cutoffs for the split test, computed once and reusable across
/// observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitThresholds {
    pub j: u32,
    pub calibration: SplitCalibration,
    /// `(τ_l, t²)` for levels `J0..=j`.
    pub levels: Vec<(f64, f64)>,
}

impl SplitThresholds {
    pub fn compute(params: &TestParams, calibration: SplitCalibration) -> Result<Self> {
        params.validate()?;
        let j = params.j()?;
        let half = params.n / 2.0;
        let levels = match calibration {
            SplitCalibration::AnalyticDefault => (params.j0..=j)
                .map(|l| {
                    let tau_l = tau(l, j, half, params.alpha, params.z0, params.j0)?;
                    Ok((tau_l, threshold_from_tau(l, tau_l, params.b, params.s)))
                })
                .collect::<Result<Vec<_>>>()?,
            SplitCalibration::Empirical { trials, seed } => empirical_cutoffs(params, j, trials, seed)?
                .into_iter()
                .zip(params.j0..)
                .map(|(cut, l)| {
                    let edge = params.b * (-(l as f64) * params.s).exp2();
                    (2.0 * (cut.max(0.0).sqrt() - edge), cut)
                })
                .collect(),
        };
        Ok(SplitThresholds { j, calibration, levels })
    }
}

fn empirical_cutoffs(params: &TestParams, j: u32, trials: usize, seed: u64) -> Result<Vec<f64>> {
    let levels = (j - params.j0 + 1) as usize;
    let q = 1.0 - params.alpha / (2.0 * levels as f64);
    if (trials as f64) * (1.0 - q) < 1.0 {
        return Err(Error::Config(format!(
            "empirical calibration needs at least {} trials to resolve the {q} quantile, got {trials}",
            (1.0 / (1.0 - q)).ceil()
        )));
    }
    let null = gen_null(params.s, params.b, params.layout(), j, 1.0, derive_seed(seed, &[u64::MAX]))?;
    let samples: Vec<Vec<f64>> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let (a, b) = observe_split(&null, params.n, derive_seed(seed, &[i]))?;
            (params.j0..=j).map(|l| split_statistic(&a, &b, l)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let rank = ((q * trials as f64).ceil() as usize).clamp(1, trials) - 1;
    Ok((0..levels)
        .map(|i| {
            let mut column: Vec<f64> = samples.iter().map(|row| row[i]).collect();
            let (_, v, _) = column.select_nth_unstable_by(rank, f64::total_cmp);
            *v
        })
        .collect())
}

/// Split-sample test with thresholds computed from `calibration`.
pub fn run_split_test(
    first: &Observation,
    second: &Observation,
    params: &TestParams,
    calibration: SplitCalibration,
) -> Result<TestReport> {
    let thresholds = SplitThresholds::compute(params, calibration)?;
    run_split_test_with(first, second, params, &thresholds)
}

/// Split-sample test against precomputed thresholds. Each half must carry
/// noise level `params.n / 2`.
pub fn run_split_test_with(
    first: &Observation,
    second: &Observation,
    params: &TestParams,
    thresholds: &SplitThresholds,
) -> Result<TestReport> {
    params.validate()?;
    let j = params.j()?;
    if thresholds.j != j || thresholds.levels.len() != (j - params.j0 + 1) as usize {
        return Err(Error::Config("split thresholds were computed for different parameters".into()));
    }
    check_halves(first, second)?;
    check_observation(first, params, params.n / 2.0, j)?;
    check_observation(second, params, params.n / 2.0, j)?;
    let stats = (params.j0..=j)
        .zip(&thresholds.levels)
        .map(|(l, &(tau, threshold_sq))| {
            let statistic = split_statistic(first, second, l)?;
            Ok(LevelStat { l, statistic, tau, threshold_sq, exceeded: statistic >= threshold_sq })
        })
        .collect::<Result<Vec<_>>>()?;
    let calibration = match thresholds.calibration {
        SplitCalibration::AnalyticDefault => Calibration::SplitAnalytic,
        SplitCalibration::Empirical { .. } => Calibration::SplitEmpirical,
    };
    report(params, j, stats, first.tree.l_max().min(second.tree.l_max()), calibration)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::besov::CoefficientTree;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn cutoff_level_examples() {
        assert_eq!(compute_j(1024.0, 0.75).unwrap(), 5);
        // log2(1e6) = 19.931568569324174, times 0.4 = 7.97
        assert_eq!(compute_j(1e6, 1.0).unwrap(), 7);
        assert!(matches!(compute_j(1.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(compute_j(10.0, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn cutoff_below_base_level_is_a_config_error() {
        let p = TestParams { n: 100.0, t: 1.0, s: 2.0, b: 1.0, alpha: 0.1, j0: 5, z0: 1 };
        assert!(matches!(p.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn tau_examples() {
        assert!(close(tau(4, 4, 1e4, 0.04, 1, 0).unwrap(), 2.4, 1e-12));
        let base = tau(0, 3, 1e4, 0.1, 2, 0).unwrap();
        assert_eq!(base, tau(0, 9, 1e4, 0.1, 2, 0).unwrap());
        assert!(close(base, 24.0 * 20f64.sqrt() / 100.0, 1e-12));
        assert!(matches!(tau(5, 4, 1e4, 0.1, 1, 0), Err(Error::Range(_))));
        assert!(matches!(tau(1, 4, 1e4, 0.1, 1, 2), Err(Error::Range(_))));
    }

    #[test]
    fn threshold_examples() {
        assert!(close(threshold_from_tau(2, 0.5, 1.0, 1.0), 0.25, 1e-15));
        assert!(close(threshold_from_tau(3, 0.0, 2.0, 0.5), 4.0 * 2f64.powf(-3.0), 1e-15));
        let (b, s, l) = (1.7, 1.3, 3);
        let tau_l = tau(l, 6, 1e5, 0.2, 1, 0).unwrap();
        let edge = b * 2f64.powf(-(l as f64) * s);
        let expanded = edge * edge + edge * tau_l + tau_l * tau_l / 4.0;
        assert!(close(threshold(l, 6, 1e5, 0.2, 1, 0, b, s).unwrap(), expanded, 1e-12));
    }

    #[test]
    fn statistic_example() {
        let mut tree = CoefficientTree::zeros(Layout::default(), 2).unwrap();
        tree.set_level(1, vec![0.3, 0.4]).unwrap();
        let obs = Observation::exact(tree, 100.0).unwrap();
        assert!(close(statistic(&obs, 1).unwrap(), 0.23, 1e-15));
        assert!(matches!(statistic(&obs, 3), Err(Error::Structure(_))));
    }

    #[test]
    fn split_statistic_example() {
        let mut tree = CoefficientTree::zeros(Layout::default(), 1).unwrap();
        tree.set_level(1, vec![1.0, 2.0]).unwrap();
        let a = Observation { tree: tree.clone(), n: 1.0, seed: 0, split: SplitTag::First };
        let b = Observation { split: SplitTag::Second, ..a.clone() };
        assert_eq!(split_statistic(&a, &b, 1).unwrap(), 5.0);
        assert!(matches!(split_statistic(&a, &a, 1), Err(Error::Structure(_))));
        let other = Observation { tree: CoefficientTree::zeros(Layout::new(0, 2).unwrap(), 1).unwrap(), ..b };
        assert!(matches!(split_statistic(&a, &other, 1), Err(Error::Structure(_))));
    }

    #[test]
    fn constants() {
        let p = TestParams::new(1e6, 1.0, 2.0, 1.0, 0.1).unwrap();
        let expected = 24.0 * (2.0 / 0.75f64.sqrt() + 19.0) * 10f64.sqrt();
        assert!(close(c_tilde(&p), expected, 1e-9));
        assert!(close(c_tilde(&p), 1617.269831438, 1e-6));
        let q = TestParams::new(1e6, 1.0, 2.0, 1.0, 0.5).unwrap();
        assert!(close(d_tilde(&q), 0.5f64.sqrt(), 1e-12));
        let small_b = TestParams::new(1e6, 1.0, 2.0, 0.3, 0.5).unwrap();
        assert_eq!(d_tilde(&small_b), 0.3);
        assert!(rho_lower(&p) < rho_upper(&p));
    }

    fn tree_with(level: u32, values: Vec<f64>, l_max: u32) -> CoefficientTree {
        let mut tree = CoefficientTree::zeros(Layout::default(), l_max).unwrap();
        tree.set_level(level, values).unwrap();
        tree
    }

    #[test]
    fn zero_signal_is_accepted() {
        let p = TestParams::new(1e12, 1.0, 2.0, 1.0, 0.1).unwrap();
        let j = p.j().unwrap();
        let obs = Observation::exact(CoefficientTree::zeros(Layout::default(), j).unwrap(), p.n).unwrap();
        let report = run_test(&obs, &p).unwrap();
        assert_eq!(report.decision, 0);
        assert_eq!(report.stats.len(), j as usize + 1);
        for s in &report.stats {
            let expanded = threshold_from_tau(s.l, s.tau, p.b, p.s);
            assert!(close(s.threshold_sq, expanded, 1e-12));
        }
    }

    #[test]
    fn reaching_the_threshold_rejects() {
        let p = TestParams::new(1e6, 1.0, 2.0, 1.0, 0.1).unwrap();
        let j = p.j().unwrap();
        let l = 3;
        let thr = threshold(l, j, p.n, p.alpha, 1, 0, p.b, p.s).unwrap();
        let size = 1usize << l;
        // T = Σ a² − 2^l/n; put energy thr + 1 + 2^l/n on one coefficient.
        let energy = thr + 1.0 + size as f64 / p.n;
        let mut values = vec![0.0; size];
        values[0] = energy.sqrt();
        let obs = Observation::exact(tree_with(l, values, j), p.n).unwrap();
        let report = run_test(&obs, &p).unwrap();
        assert_eq!(report.decision, 1);
        let stat = report.stats[l as usize];
        assert!(stat.exceeded && close(stat.statistic, thr + 1.0, 1e-9));
        assert_eq!(report.max_margin().0, l);
    }

    #[test]
    fn coverage_and_layout_errors() {
        let p = TestParams::new(1e6, 1.0, 2.0, 1.0, 0.1).unwrap();
        let short = Observation::exact(CoefficientTree::zeros(Layout::default(), 5).unwrap(), p.n).unwrap();
        assert_eq!(run_test(&short, &p).unwrap_err(), Error::Coverage { required: 7, available: 5 });
        let wrong_layout = Observation::exact(CoefficientTree::zeros(Layout::new(0, 2).unwrap(), 8).unwrap(), p.n).unwrap();
        assert!(matches!(run_test(&wrong_layout, &p), Err(Error::Config(_))));
        let wrong_n = Observation::exact(CoefficientTree::zeros(Layout::default(), 8).unwrap(), 2e6).unwrap();
        assert!(matches!(run_test(&wrong_n, &p), Err(Error::Config(_))));
    }

    #[test]
    fn levels_above_cutoff_are_ignored() {
        let p = TestParams::new(1e6, 1.0, 2.0, 1.0, 0.1).unwrap();
        let j = p.j().unwrap();
        let big = tree_with(j + 1, vec![100.0; 1 << (j + 1)], j + 2);
        let report = run_test(&Observation::exact(big, p.n).unwrap(), &p).unwrap();
        assert_eq!(report.decision, 0);
        assert_eq!(report.l_max, j + 2);
    }

    #[test]
    fn split_test_noiseless_agrees_with_norm_comparison() {
        let p = TestParams::new(1e8, 1.0, 2.0, 1.0, 0.1).unwrap();
        let j = p.j().unwrap();
        for (scale, expect) in [(0.5, 0), (3.0, 1)] {
            // level-1 norm = scale * B 2^{-s}
            let radius = scale * 0.25;
            let tree = tree_with(1, vec![radius, 0.0], j);
            let a = Observation { tree: tree.clone(), n: p.n / 2.0, seed: 0, split: SplitTag::First };
            let b = Observation { split: SplitTag::Second, ..a.clone() };
            let report = run_split_test(&a, &b, &p, SplitCalibration::AnalyticDefault).unwrap();
            assert_eq!(report.decision, expect, "scale {scale}");
            assert_eq!(report.calibration, Calibration::SplitAnalytic);
        }
    }

    #[test]
    fn empirical_calibration_needs_enough_trials() {
        let p = TestParams::new(1e6, 1.0, 2.0, 1.0, 0.1).unwrap();
        let err = SplitThresholds::compute(&p, SplitCalibration::Empirical { trials: 10, seed: 1 }).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn minimal_n_for_separation() {
        let p = TestParams::new(1e9, 2.0, 3.0, 1.0, 0.1).unwrap();
        let n_min = min_n_for_separation(&p, 20).unwrap();
        let at = p.with_n(n_min).unwrap();
        assert!(close(rho_upper(&at), 0.125, 1e-9));
        assert!(n_min > 1e9 && n_min < 1e10);
    }

    #[test]
    fn csv_row_shape() {
        let p = TestParams::new(1e6, 1.0, 2.0, 1.0, 0.1).unwrap();
        let obs = Observation::exact(CoefficientTree::zeros(Layout::default(), 7).unwrap(), p.n).unwrap();
        let row = run_test(&obs, &p).unwrap().csv_row();
        assert_eq!(row.split(',').count(), TestReport::csv_header().split(',').count());
        assert!(row.starts_with("1.0000000000000000e6,"));
    }
}
