//! Chi-square quantity behind the non-testability floor.
//!
//! Under the null `f = 0` the likelihood ratio of the uniform mixture of
//! Rademacher alternatives `a_{j,k} = ±υa`, `a = 1/(√n 2^{j/4})`, factorizes as
//! `Z = Π_k cosh(n x_k υa) e^{-nυ²a²/2}`. Its second moment has the closed
//! form `E₀(Z−1)² = cosh(υ² 2^{-j/2})^{2^j} − 1 ≤ 2υ⁴`, which forces the sum of
//! type-I and type-II errors of any test above `1 − 2υ⁴`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::noise::{derive_seed, stream};
use crate::smooth_test::compute_j;
use crate::sum::Neumaier;

/// Largest `2^j` for which exhaustive enumeration is offered.
pub const MAX_ENUMERATION_WIDTH: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundInstance {
    pub upsilon: f64,
    pub n: f64,
    pub t: f64,
    pub j: u32,
    /// Per-coefficient magnitude `1/(√n 2^{j/4})`.
    pub a: f64,
}

impl LowerBoundInstance {
    /// Instance at noise level `n` with cutoff level `compute_j(n, t)`.
    pub fn new(upsilon: f64, n: f64, t: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&upsilon) {
            return Err(domain(format!("amplitude υ must lie in [0, 1], got {upsilon}")));
        }
        let j = compute_j(n, t)?;
        let a = 1.0 / (n.sqrt() * (j as f64 / 4.0).exp2());
        Ok(LowerBoundInstance { upsilon, n, t, j, a })
    }

    /// Instance whose cutoff level is exactly `j` (with `t = 1` and `n`
    /// chosen mid-way inside the dyadic bracket). Every quantity here depends
    /// on `(υ, j)` only.
    pub fn at_level(upsilon: f64, j: u32) -> Result<Self> {
        let t = 1.0;
        let n = ((j as f64 + 0.5) * (2.0 * t + 0.5)).exp2();
        let inst = Self::new(upsilon, n, t)?;
        debug_assert_eq!(inst.j, j);
        Ok(inst)
    }

    /// Number of coefficients `2^j` carrying the alternative.
    pub fn width(&self) -> usize {
        1usize << self.j
    }

    /// `n υ² a²`, which equals `υ² 2^{-j/2}`.
    pub fn coupling(&self) -> f64 {
        self.n * self.upsilon * self.upsilon * self.a * self.a
    }
}

/// `ln cosh y`, stable for large `|y|`.
fn ln_cosh(y: f64) -> f64 {
    let y = y.abs();
    if y < 0.5 {
        // cosh y − 1 = 2 sinh²(y/2)
        let h = (y / 2.0).sinh();
        (2.0 * h * h).ln_1p()
    } else {
        y + (-2.0 * y).exp().ln_1p() - std::f64::consts::LN_2
    }
}

/// `E₀(Z−1)² = cosh(nυ²a²)^{2^j} − 1`.
pub fn chi2_closed_form(inst: &LowerBoundInstance) -> f64 {
    (inst.width() as f64 * ln_cosh(inst.coupling())).exp_m1()
}

/// Exhaustive evaluation of
/// `|I|^{-2} Σ_{α,α'} Π_k [e^{-x} 1{α_k = α'_k} + e^{x} 1{α_k ≠ α'_k}] − 1`, `x = nυ²a²`.
///
/// The summand depends on the pair only through the disagreement pattern
/// `δ = α ⊕ α'`, and each pattern arises from exactly `|I|` pairs, so the
/// double sum is enumerated as `|I|` times the sum over all `2^{2^j}`
/// patterns. Each pattern contributes `exp(x(2d − 2^j)) − 1`, `d = |δ|`,
/// evaluated with `expm1` and summed with compensation.
pub fn chi2_enumeration(inst: &LowerBoundInstance) -> Result<f64> {
    let m = inst.width();
    if m > MAX_ENUMERATION_WIDTH {
        return Err(Error::Cost(format!("enumeration over 2^{m} sign patterns exceeds the budget (2^j ≤ {MAX_ENUMERATION_WIDTH})")));
    }
    let x = inst.coupling();
    let mut acc = Neumaier::default();
    for delta in 0u64..(1u64 << m) {
        let d = delta.count_ones() as f64;
        acc.add((x * (2.0 * d - m as f64)).exp_m1());
    }
    Ok(acc.value() / (1u64 << m) as f64)
}

/// Direct double sum over `I × I` with per-coordinate products, subtracting
/// one at the end. Loses relative accuracy for small `υ`; kept as a second,
/// structurally naive oracle.
pub fn chi2_enumeration_naive(inst: &LowerBoundInstance) -> Result<f64> {
    let m = inst.width();
    if m > 8 {
        return Err(Error::Cost(format!("naive double sum over 4^{m} pairs exceeds the budget (2^j ≤ 8)")));
    }
    let x = inst.coupling();
    let (same, differ) = ((-x).exp(), x.exp());
    let size = 1u64 << m;
    let mut total = Neumaier::default();
    for alpha in 0..size {
        for alpha_p in 0..size {
            let mut prod = 1.0;
            for k in 0..m {
                let bit = |v: u64| (v >> k) & 1;
                prod *= if bit(alpha) == bit(alpha_p) { same } else { differ };
            }
            total.add(prod);
        }
    }
    Ok(total.value() / (size as f64 * size as f64) - 1.0)
}

/// Chain `closed ≤ (1 + υ⁴/2^j)^{2^j} − 1 ≤ exp(υ⁴) − 1 ≤ 2υ⁴`.
pub fn chi2_bound_chain(inst: &LowerBoundInstance) -> [f64; 4] {
    let v4 = inst.upsilon.powi(4);
    let m = inst.width() as f64;
    [chi2_closed_form(inst), (m * (v4 / m).ln_1p()).exp_m1(), v4.exp_m1(), 2.0 * v4]
}

/// Monte Carlo estimates under the null.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareEstimate {
    pub trials: usize,
    /// Mean of `(Z−1)²`.
    pub estimate: f64,
    pub standard_error: f64,
    /// Mean of `|Z−1|`.
    pub abs_deviation: f64,
    pub abs_deviation_se: f64,
}

impl ChiSquareEstimate {
    /// `1 − E₀|Z−1|/2`: estimated minimal sum of type-I and averaged type-II
    /// errors against the Rademacher mixture.
    pub fn total_error_floor(&self) -> f64 {
        1.0 - self.abs_deviation / 2.0
    }
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mut acc = Neumaier::default();
    values.iter().for_each(|&v| acc.add(v));
    let mean = acc.value() / n;
    let mut sq = Neumaier::default();
    values.iter().for_each(|&v| sq.add((v - mean) * (v - mean)));
    let var = sq.value() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Simulates null data `x_k ~ N(0, 1/n)` and averages `(Z−1)²`, with `log Z`
/// accumulated through `ln cosh` to avoid overflow. Trial `i` draws from the
/// stream `derive_seed(seed, [i])`.
pub fn chi2_monte_carlo(inst: &LowerBoundInstance, trials: usize, seed: u64) -> Result<ChiSquareEstimate> {
    if trials < 1000 {
        return Err(domain(format!("Monte Carlo chi-square needs at least 1000 trials, got {trials}")));
    }
    let m = inst.width();
    let scale = inst.n.sqrt().recip();
    let shift = m as f64 * inst.coupling() / 2.0;
    let deviations: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(derive_seed(seed, &[i]), 0);
            let mut log_z = Neumaier::default();
            for _ in 0..m {
                let g: f64 = rng.sample(StandardNormal);
                let x = g * scale;
                log_z.add(ln_cosh(inst.n * x * inst.upsilon * inst.a));
            }
            (log_z.value() - shift).exp_m1()
        })
        .collect();
    let squares: Vec<f64> = deviations.iter().map(|d| d * d).collect();
    let abs: Vec<f64> = deviations.iter().map(|d| d.abs()).collect();
    let (estimate, standard_error) = mean_and_se(&squares);
    let (abs_deviation, abs_deviation_se) = mean_and_se(&abs);
    Ok(ChiSquareEstimate { trials, estimate, standard_error, abs_deviation, abs_deviation_se })
}

/// Lower bound `1 − 2υ⁴` on the sum of the two error probabilities of any test.
pub fn min_error_bound(upsilon: f64) -> Result<f64> {
    if !(upsilon > 0.0 && upsilon < 1.0) {
        return Err(domain(format!("amplitude υ must lie in (0, 1), got {upsilon}")));
    }
    Ok(1.0 - 2.0 * upsilon.powi(4))
}

/// Amplitude `((1 − α)/2)^{1/4}` at which the floor equals `α`.
pub fn upsilon_for_level(alpha: f64) -> f64 {
    ((1.0 - alpha) / 2.0).powf(0.25)
}

/// One row of the `lb-check` table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundRow {
    pub upsilon: f64,
    pub j: u32,
    pub closed_form: f64,
    pub enumeration: Option<f64>,
    pub mc_estimate: f64,
    pub mc_se: f64,
    pub bound_2v4: f64,
}

impl LowerBoundRow {
    pub fn csv_header() -> &'static str {
        "upsilon,j,closed_form,enumeration,mc_estimate,mc_se,bound_2v4"
    }

    pub fn csv_row(&self) -> String {
        use crate::format::fmt17;
        format!(
            "{},{},{},{},{},{},{}",
            fmt17(self.upsilon),
            self.j,
            fmt17(self.closed_form),
            self.enumeration.map(fmt17).unwrap_or_default(),
            fmt17(self.mc_estimate),
            fmt17(self.mc_se),
            fmt17(self.bound_2v4)
        )
    }
}

/// Evaluates every route on a `(υ, j)` grid. Enumeration is left empty for
/// levels beyond the enumeration budget.
pub fn lower_bound_table(upsilons: &[f64], levels: &[u32], trials: usize, seed: u64) -> Result<Vec<LowerBoundRow>> {
    let mut rows = Vec::with_capacity(upsilons.len() * levels.len());
    for (ui, &upsilon) in upsilons.iter().enumerate() {
        for (ji, &j) in levels.iter().enumerate() {
            let inst = LowerBoundInstance::at_level(upsilon, j)?;
            let enumeration = match chi2_enumeration(&inst) {
                Ok(v) => Some(v),
                Err(Error::Cost(_)) => None,
                Err(e) => return Err(e),
            };
            let mc = chi2_monte_carlo(&inst, trials, derive_seed(seed, &[ui as u64, ji as u64]))?;
            rows.push(LowerBoundRow {
                upsilon,
                j,
                closed_form: chi2_closed_form(&inst),
                enumeration,
                mc_estimate: mc.estimate,
                mc_se: mc.standard_error,
                bound_2v4: 2.0 * upsilon.powi(4),
            });
        }
    }
    Ok(rows)
}
