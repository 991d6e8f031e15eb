//! Empirical Haar coefficients from sampled data.
//!
//! Layout: `J0 = 0`, `z0 = 2`. Level 0 holds the scaling coefficient of `φ =
//! 1_[0,1)` followed by the mother wavelet `ψ_{0,0}`; level `l ≥ 1` holds
//! `ψ_{l,k}(x) = 2^{l/2} ψ(2^l x − k)` for `k < 2^l`. Haar only characterizes
//! Besov `(r, 2, ∞)` balls for `r < 1`, so tests on ingested data require
//! `s, t < 1`.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::besov::{CoefficientTree, Layout, MAX_LEVEL};
use crate::error::{domain, Error, Result};
use crate::noise::{Observation, SplitTag};
use crate::smooth_test::{run_split_test, run_test, SplitCalibration, TestParams, TestReport};
use crate::sum::Neumaier;

pub const HAAR_LAYOUT: Layout = Layout { j0: 0, z0: 2 };

const DESIGN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    /// Pairs `(x_i, y_i)` on the midpoint grid `x_i = (i − 1/2)/n`.
    Regression,
    /// Draws `x_i` from a density on `[0, 1]`.
    Density,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    kind: SampleKind,
    xs: Vec<f64>,
    ys: Vec<f64>,
}

/// Midpoint grid `(i − 1/2)/n`, `i = 1..=n`.
pub fn regression_design(n: usize) -> Vec<f64> {
    (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect()
}

impl SampleSet {
    pub fn regression(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::Parse(format!("{} design points but {} responses", xs.len(), ys.len())));
        }
        check_unit_interval(&xs)?;
        if let Some(i) = ys.iter().position(|y| !y.is_finite()) {
            return Err(domain(format!("response {i} is not finite")));
        }
        let n = xs.len();
        for (i, &x) in xs.iter().enumerate() {
            let expected = (i as f64 + 0.5) / n as f64;
            if (x - expected).abs() > DESIGN_TOL {
                return Err(Error::Design(format!(
                    "regression design must be the equispaced grid (i - 1/2)/n; point {i} is {x}, expected {expected}"
                )));
            }
        }
        Ok(SampleSet { kind: SampleKind::Regression, xs, ys })
    }

    pub fn density(xs: Vec<f64>) -> Result<Self> {
        check_unit_interval(&xs)?;
        Ok(SampleSet { kind: SampleKind::Density, xs, ys: Vec::new() })
    }

    /// Noiseless regression samples of `f` on the `n`-point midpoint grid.
    pub fn sample_regression(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let xs = regression_design(n);
        let ys = xs.iter().map(|&x| f(x)).collect();
        SampleSet::regression(xs, ys)
    }

    /// Reads headerless or headed CSV with columns `x` (density) or `x,y`
    /// (regression).
    pub fn from_csv(kind: SampleKind, reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(reader);
        let width = match kind {
            SampleKind::Regression => 2,
            SampleKind::Density => 1,
        };
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for (row, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::Parse(e.to_string()))?;
            if record.len() != width {
                return Err(Error::Parse(format!("row {}: expected {width} columns, found {}", row + 1, record.len())));
            }
            let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
            match parsed {
                Ok(v) => {
                    xs.push(v[0]);
                    if width == 2 {
                        ys.push(v[1]);
                    }
                }
                Err(_) if row == 0 => continue,
                Err(e) => return Err(Error::Parse(format!("row {}: {e}", row + 1))),
            }
        }
        match kind {
            SampleKind::Regression => SampleSet::regression(xs, ys),
            SampleKind::Density => SampleSet::density(xs),
        }
    }

    pub fn kind(&self) -> SampleKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    /// Even- and odd-indexed halves (0-based). The halves skip design
    /// validation: each is a shifted grid with spacing `2/n`.
    pub fn halves(&self) -> (SampleSet, SampleSet) {
        let pick = |v: &[f64], r: usize| v.iter().skip(r).step_by(2).copied().collect::<Vec<_>>();
        let half = |r| SampleSet { kind: self.kind, xs: pick(&self.xs, r), ys: pick(&self.ys, r) };
        (half(0), half(1))
    }
}

fn check_unit_interval(xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::Parse("sample set is empty".into()));
    }
    match xs.iter().position(|x| !(0.0..=1.0).contains(x)) {
        Some(i) => Err(domain(format!("sample point {i} = {} lies outside [0, 1]", xs[i]))),
        None => Ok(()),
    }
}

/// Haar basis value at `x` for position `k` of level `l` in [`HAAR_LAYOUT`].
pub fn haar_basis(l: u32, k: usize, x: f64) -> f64 {
    if l == 0 && k == 0 {
        return if (0.0..=1.0).contains(&x) { 1.0 } else { 0.0 };
    }
    let k = if l == 0 { 0 } else { k };
    let scale = (1u64 << l) as f64;
    let u = x * scale - k as f64;
    let u = if x == 1.0 && k + 1 == 1 << l { u - f64::EPSILON } else { u };
    if (0.0..0.5).contains(&u) {
        scale.sqrt()
    } else if (0.5..1.0).contains(&u) {
        -scale.sqrt()
    } else {
        0.0
    }
}

/// Evaluates the Haar expansion of `tree` at `x`.
pub fn haar_synthesis(tree: &CoefficientTree, x: f64) -> f64 {
    assert!(tree.layout() == HAAR_LAYOUT, "synthesis needs the Haar layout");
    tree.iter_levels()
        .map(|(l, level)| {
            if l == 0 {
                level[0] * haar_basis(0, 0, x) + level[1] * haar_basis(0, 1, x)
            } else {
                let k = ((x * (1u64 << l) as f64).floor() as usize).min(level.len() - 1);
                level[k] * haar_basis(l, k, x)
            }
        })
        .sum()
}

/// Accumulates `Σ_i w_i ψ_{l,k}(x_i)` for all coefficients. Each point
/// touches one wavelet per level.
fn haar_sums(xs: &[f64], weights: impl Fn(usize) -> f64, l_max: u32) -> Vec<Vec<Neumaier>> {
    let mut acc: Vec<Vec<Neumaier>> =
        (0..=l_max).map(|l| vec![Neumaier::default(); HAAR_LAYOUT.level_size(l)]).collect();
    for (i, &x) in xs.iter().enumerate() {
        let w = weights(i);
        acc[0][0].add(w);
        for l in 0..=l_max {
            let scale = (1u64 << l) as f64;
            let cells = 1usize << l;
            let u = x * scale;
            let k = (u.floor() as usize).min(cells - 1);
            let sign = if u - (k as f64) < 0.5 { 1.0 } else { -1.0 };
            let slot = if l == 0 { 1 } else { k };
            acc[l as usize][slot].add(sign * scale.sqrt() * w);
        }
    }
    acc
}

fn check_resolution(n_samples: usize, l_max: u32) -> Result<()> {
    if l_max > MAX_LEVEL || (1u64 << l_max) > n_samples as u64 {
        return Err(Error::Resolution(format!(
            "level {l_max} needs at least 2^{l_max} samples, have {n_samples}"
        )));
    }
    Ok(())
}

fn estimate(samples: &SampleSet, l_max: u32) -> CoefficientTree {
    let n = samples.len() as f64;
    let sums = match samples.kind {
        SampleKind::Regression => haar_sums(&samples.xs, |i| samples.ys[i], l_max),
        SampleKind::Density => haar_sums(&samples.xs, |_| 1.0, l_max),
    };
    let levels = sums.into_iter().map(|v| v.into_iter().map(|a| a.value() / n).collect()).collect();
    CoefficientTree::from_parts(HAAR_LAYOUT, levels)
}

/// Empirical Haar coefficients `(1/n) Σ_i Y_i ψ_{l,k}(X_i)` (regression) or
/// `(1/n) Σ_i ψ_{l,k}(X_i)` (density) on levels `0..=l_max`, together with
/// the effective noise level `n_samples`.
pub fn estimate_coefficients(samples: &SampleSet, l_max: u32) -> Result<(CoefficientTree, f64)> {
    check_resolution(samples.len(), l_max)?;
    Ok((estimate(samples, l_max), samples.len() as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum IngestMode {
    #[default]
    Plugin,
    Split {
        #[serde(default = "analytic")]
        calibration: SplitCalibration,
    },
}

fn analytic() -> SplitCalibration {
    SplitCalibration::AnalyticDefault
}

/// Estimates coefficients up to the cutoff level and runs the test, with
/// `params.n` replaced by the sample size. Reports are flagged as
/// approximately calibrated.
pub fn test_from_samples(samples: &SampleSet, params: &TestParams, mode: IngestMode) -> Result<TestReport> {
    if !(params.s < 1.0 && params.t < 1.0) {
        return Err(Error::Config(format!(
            "the Haar basis only characterizes smoothness below 1; got t = {}, s = {}",
            params.t, params.s
        )));
    }
    if params.layout() != HAAR_LAYOUT {
        return Err(Error::Config("ingested data use the Haar layout J0 = 0, z0 = 2".into()));
    }
    let params = params.with_n(samples.len() as f64)?;
    let j = params.j()?;
    let mut report = match mode {
        IngestMode::Plugin => {
            let (tree, n) = estimate_coefficients(samples, j)?;
            run_test(&Observation { tree, n, seed: 0, split: SplitTag::Full }, &params)?
        }
        IngestMode::Split { calibration } => {
            if samples.len() % 2 == 1 {
                return Err(Error::Config("split mode needs an even number of samples".into()));
            }
            let (even, odd) = samples.halves();
            check_resolution(odd.len(), j)?;
            let half_n = params.n / 2.0;
            let first = Observation { tree: estimate(&even, j), n: half_n, seed: 0, split: SplitTag::First };
            let second = Observation { tree: estimate(&odd, j), n: half_n, seed: 0, split: SplitTag::Second };
            run_split_test(&first, &second, &params, calibration)?
        }
    };
    report.approximate = true;
    Ok(report)
}
