//! Signal generators: null members of `Σ(s, B)`, Rademacher alternatives
//! at the cutoff level, and single-level alternatives separated from
//! `Σ(s, B)` by a prescribed `L2` distance.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::besov::{BesovBall, CoefficientTree, Layout};
use crate::error::{domain, Error, Result};
use crate::noise::stream;
use crate::smooth_test::compute_j;

// Stream tags; kept apart from the observation tags in `noise`.
const NULL_TAG: u64 = 0x10;
const RADEMACHER_TAG: u64 = 0x11;
const SEPARATED_TAG: u64 = 0x12;

/// Uniform direction on the unit sphere of dimension `len`.
fn unit_direction(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
        let norm = crate::sum::sum_squares(&v).sqrt();
        if norm > 1e-300 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// A member of `Σ(s, B)` whose level-`l` norm is exactly `fill · B 2^{-ls}`
/// on every level `J0..=l_max`, with directions uniform on each level sphere.
/// `fill = 1` saturates every constraint (the worst-case null).
pub fn gen_null(s: f64, b: f64, layout: Layout, l_max: u32, fill: f64, seed: u64) -> Result<CoefficientTree> {
    let ball = BesovBall::new(s, b)?;
    if !(fill > 0.0 && fill <= 1.0) {
        return Err(domain(format!("fill must lie in (0, 1], got {fill}")));
    }
    let mut rng = stream(seed, NULL_TAG);
    let mut tree = CoefficientTree::zeros(layout, l_max)?;
    for l in layout.j0..=l_max {
        let radius = fill * ball.level_radius(l);
        let dir = unit_direction(layout.level_size(l), &mut rng);
        tree.set_level(l, dir.into_iter().map(|x| radius * x).collect())?;
    }
    Ok(tree)
}

/// Rademacher alternative at the cutoff level `j = compute_j(n, t)`:
/// `a_{j,k} = υ α_k / (√n 2^{j/4})` with random signs `α_k`, zero elsewhere.
///
/// Its level-`j` norm is `υ 2^{j/4} / √n` when level `j` holds `2^j`
/// coefficients, and its `t`-Besov norm never exceeds `υ`.
pub fn gen_alternative(
    t: f64,
    b: f64,
    upsilon: f64,
    n: f64,
    layout: Layout,
    l_max: u32,
    seed: u64,
) -> Result<CoefficientTree> {
    if !(b > 0.0) {
        return Err(domain(format!("radius B must be > 0, got {b}")));
    }
    if !(upsilon > 0.0 && upsilon <= 1f64.min(b)) {
        return Err(domain(format!("amplitude υ must lie in (0, min(1, B)] = (0, {}], got {upsilon}", 1f64.min(b))));
    }
    let j = compute_j(n, t)?;
    if j < layout.j0 {
        return Err(Error::Config(format!("cutoff level j = {j} lies below J0 = {}; increase n", layout.j0)));
    }
    if l_max < j {
        return Err(Error::Range(format!("L_max = {l_max} must reach the cutoff level j = {j}")));
    }
    let amplitude = upsilon / (n.sqrt() * (j as f64 / 4.0).exp2());
    let mut rng = stream(seed, RADEMACHER_TAG);
    let mut tree = CoefficientTree::zeros(layout, l_max)?;
    let signs = (0..layout.level_size(j))
        .map(|_| if rng.random::<bool>() { amplitude } else { -amplitude })
        .collect();
    tree.set_level(j, signs)?;
    Ok(tree)
}

/// Largest single-level separation `max_l B (2^{-lt} − 2^{-ls})` over the
/// levels `J0..=l_max`.
pub fn separation_cap(t: f64, s: f64, b: f64, j0: u32, l_max: u32) -> f64 {
    (j0..=l_max).map(|l| level_gap(t, s, b, l)).fold(f64::NEG_INFINITY, f64::max)
}

fn level_gap(t: f64, s: f64, b: f64, l: u32) -> f64 {
    b * ((-(l as f64) * t).exp2() - (-(l as f64) * s).exp2())
}

/// A member of `Σ(t, B)` at distance at least `ρ` from `Σ(s, B)`.
///
/// Mass sits on the smallest level `l` with `B 2^{-lt} ≥ ρ + B 2^{-ls}`, where
/// the level norm is set to `ρ + B 2^{-ls}` along a random direction.
pub fn gen_separated(t: f64, s: f64, b: f64, rho: f64, layout: Layout, l_max: u32, seed: u64) -> Result<CoefficientTree> {
    if !(t > 0.0) || !(s > 0.0) {
        return Err(domain(format!("smoothness exponents must be positive, got t = {t}, s = {s}")));
    }
    if !(b > 0.0) {
        return Err(domain(format!("radius B must be > 0, got {b}")));
    }
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(domain(format!("separation ρ must be positive, got {rho}")));
    }
    if l_max < layout.j0 {
        return Err(Error::Range(format!("L_max = {l_max} below J0 = {}", layout.j0)));
    }
    let level = (layout.j0..=l_max).find(|&l| level_gap(t, s, b, l) >= rho);
    let Some(level) = level else {
        return Err(Error::Infeasible {
            rho,
            cap: separation_cap(t, s, b, layout.j0, l_max).max(0.0),
            hint: String::new(),
        });
    };
    let norm = rho + b * (-(level as f64) * s).exp2();
    let mut rng = stream(seed, SEPARATED_TAG);
    let dir = unit_direction(layout.level_size(level), &mut rng);
    let mut tree = CoefficientTree::zeros(layout, l_max)?;
    tree.set_level(level, dir.into_iter().map(|x| norm * x).collect())?;
    Ok(tree)
}

/// Declarative description of a signal, as accepted by the `gen` command
/// and by experiment manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalSpec {
    /// `gen_null` with `fill = 1`.
    NullWorstCase {
        s: f64,
        #[serde(rename = "B")]
        b: f64,
        l_max: u32,
        #[serde(default)]
        seed: u64,
        #[serde(rename = "J0", default)]
        j0: u32,
        #[serde(default = "one")]
        z0: usize,
    },
    NullRandom {
        s: f64,
        #[serde(rename = "B")]
        b: f64,
        fill: f64,
        l_max: u32,
        #[serde(default)]
        seed: u64,
        #[serde(rename = "J0", default)]
        j0: u32,
        #[serde(default = "one")]
        z0: usize,
    },
    RademacherAlt {
        t: f64,
        #[serde(rename = "B")]
        b: f64,
        upsilon: f64,
        n: f64,
        /// Defaults to the cutoff level `j`.
        #[serde(default)]
        l_max: Option<u32>,
        #[serde(default)]
        seed: u64,
        #[serde(rename = "J0", default)]
        j0: u32,
        #[serde(default = "one")]
        z0: usize,
    },
    SeparatedAlt {
        t: f64,
        s: f64,
        #[serde(rename = "B")]
        b: f64,
        rho: f64,
        l_max: u32,
        #[serde(default)]
        seed: u64,
        #[serde(rename = "J0", default)]
        j0: u32,
        #[serde(default = "one")]
        z0: usize,
    },
    Explicit {
        tree: CoefficientTree,
    },
}

fn one() -> usize {
    1
}

impl SignalSpec {
    pub fn build(&self) -> Result<CoefficientTree> {
        match *self {
            SignalSpec::NullWorstCase { s, b, l_max, seed, j0, z0 } => gen_null(s, b, Layout::new(j0, z0)?, l_max, 1.0, seed),
            SignalSpec::NullRandom { s, b, fill, l_max, seed, j0, z0 } => gen_null(s, b, Layout::new(j0, z0)?, l_max, fill, seed),
            SignalSpec::RademacherAlt { t, b, upsilon, n, l_max, seed, j0, z0 } => {
                let l_max = match l_max {
                    Some(l) => l,
                    None => compute_j(n, t)?,
                };
                gen_alternative(t, b, upsilon, n, Layout::new(j0, z0)?, l_max, seed)
            }
            SignalSpec::SeparatedAlt { t, s, b, rho, l_max, seed, j0, z0 } => {
                gen_separated(t, s, b, rho, Layout::new(j0, z0)?, l_max, seed)
            }
            SignalSpec::Explicit { ref tree } => Ok(tree.clone()),
        }
    }

    /// The same family with its amplitude (`ρ` or `υ`) replaced.
    pub fn with_amplitude(&self, amplitude: f64) -> Result<SignalSpec> {
        let mut out = self.clone();
        match &mut out {
            SignalSpec::SeparatedAlt { rho, .. } => *rho = amplitude,
            SignalSpec::RademacherAlt { upsilon, .. } => *upsilon = amplitude,
            _ => return Err(Error::Config("only separated_alt and rademacher_alt signals have an amplitude".into())),
        }
        Ok(out)
    }

    /// The same family re-targeted at noise level `n` (only Rademacher
    /// alternatives depend on it).
    pub fn with_n(&self, new_n: f64) -> SignalSpec {
        let mut out = self.clone();
        if let SignalSpec::RademacherAlt { n, .. } = &mut out {
            *n = new_n;
        }
        out
    }

    /// Top level the generated tree will carry, if known without building.
    pub fn l_max(&self) -> Option<u32> {
        match *self {
            SignalSpec::NullWorstCase { l_max, .. }
            | SignalSpec::NullRandom { l_max, .. }
            | SignalSpec::SeparatedAlt { l_max, .. } => Some(l_max),
            SignalSpec::RademacherAlt { l_max, n, t, .. } => l_max.or_else(|| compute_j(n, t).ok()),
            SignalSpec::Explicit { ref tree } => Some(tree.l_max()),
        }
    }
}
