//! Gaussian sequence observations `â_{l,k} = a_{l,k} + σ_{l,k} g_{l,k} / √n`.
//!
//! Every draw comes from a ChaCha8 stream seeded by [`derive_seed`], so an
//! observation is a pure function of its inputs. Normal variates use the
//! ziggurat sampler of `rand_distr::StandardNormal`, consumed in level order
//! and, within a level, in index order.
//!
//! Stream tags: plain and heteroscedastic observations use tag 0, the two
//! halves of a split observation use tags 1 and 2.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::besov::CoefficientTree;
use crate::error::{domain, structure, Error, Result};

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent 64-bit seed from a master seed and a path of
/// stream indices (trial, half, ...) by chained SplitMix64 hashing.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix(master), |h, &p| splitmix(h ^ splitmix(p.wrapping_mul(GOLDEN))))
}

pub(crate) fn stream(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, &[tag]))
}

/// Which part of a split sample an observation came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum SplitTag {
    Full,
    First,
    Second,
}

impl TryFrom<u8> for SplitTag {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            0 => Ok(SplitTag::Full),
            1 => Ok(SplitTag::First),
            2 => Ok(SplitTag::Second),
            _ => Err(format!("split must be 0, 1 or 2, got {v}")),
        }
    }
}

impl From<SplitTag> for u8 {
    fn from(t: SplitTag) -> u8 {
        match t {
            SplitTag::Full => 0,
            SplitTag::First => 1,
            SplitTag::Second => 2,
        }
    }
}

/// Observed coefficients with their noise bookkeeping.
///
/// `n` is the effective noise parameter of this tree: each coefficient has
/// variance `1/n`. A half of a split observation built from a total budget
/// `n` therefore carries `n/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ObservationRepr", into = "ObservationRepr")]
pub struct Observation {
    pub tree: CoefficientTree,
    pub n: f64,
    pub seed: u64,
    pub split: SplitTag,
}

#[derive(Serialize, Deserialize)]
struct ObservationRepr {
    #[serde(flatten)]
    tree: CoefficientTree,
    n: f64,
    seed: u64,
    split: SplitTag,
}

impl TryFrom<ObservationRepr> for Observation {
    type Error = Error;

    fn try_from(r: ObservationRepr) -> Result<Self> {
        check_n(r.n)?;
        Ok(Observation { tree: r.tree, n: r.n, seed: r.seed, split: r.split })
    }
}

impl From<Observation> for ObservationRepr {
    fn from(o: Observation) -> Self {
        ObservationRepr { tree: o.tree, n: o.n, seed: o.seed, split: o.split }
    }
}

impl Observation {
    /// Treats a known tree as a noiseless observation at noise level `n`.
    pub fn exact(tree: CoefficientTree, n: f64) -> Result<Self> {
        check_n(n)?;
        Ok(Observation { tree, n, seed: 0, split: SplitTag::Full })
    }
}

fn check_n(n: f64) -> Result<()> {
    if n > 0.0 && n.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("noise parameter n must be positive and finite, got {n}")))
    }
}

fn perturb(f: &CoefficientTree, scale: f64, rng: &mut ChaCha8Rng, sigma: impl Fn(usize, usize) -> f64) -> CoefficientTree {
    let levels = f
        .levels()
        .iter()
        .enumerate()
        .map(|(i, level)| {
            level
                .iter()
                .enumerate()
                .map(|(k, &a)| {
                    let g: f64 = rng.sample(StandardNormal);
                    a + sigma(i, k) * scale * g
                })
                .collect()
        })
        .collect();
    CoefficientTree::from_parts(f.layout(), levels)
}

/// Observes `f` with independent `N(0, 1/n)` noise on every coefficient.
pub fn observe(f: &CoefficientTree, n: f64, seed: u64) -> Result<Observation> {
    check_n(n)?;
    let mut rng = stream(seed, 0);
    let tree = perturb(f, n.sqrt().recip(), &mut rng, |_, _| 1.0);
    Ok(Observation { tree, n, seed, split: SplitTag::Full })
}

/// Two independent half-sample observations, each with variance `2/n`.
pub fn observe_split(f: &CoefficientTree, n: f64, seed: u64) -> Result<(Observation, Observation)> {
    check_n(n)?;
    let half = n / 2.0;
    let scale = half.sqrt().recip();
    let first = perturb(f, scale, &mut stream(seed, 1), |_, _| 1.0);
    let second = perturb(f, scale, &mut stream(seed, 2), |_, _| 1.0);
    Ok((
        Observation { tree: first, n: half, seed, split: SplitTag::First },
        Observation { tree: second, n: half, seed, split: SplitTag::Second },
    ))
}

/// Observes `f` with per-coefficient variance `profile_{l,k} / n`.
///
/// `profile` holds variances (not standard deviations) and must have the
/// same shape as `f`. Draws are identical to [`observe`] for the same seed,
/// so a unit profile reproduces it exactly.
pub fn observe_hetero(f: &CoefficientTree, n: f64, profile: &CoefficientTree, seed: u64) -> Result<Observation> {
    check_n(n)?;
    if !f.same_shape(profile) {
        return Err(structure("variance profile must have the same shape as the signal"));
    }
    for (l, v) in profile.iter_levels() {
        if let Some(k) = v.iter().position(|&x| !(x > 0.0)) {
            return Err(domain(format!("variance profile entry ({l}, {k}) must be positive")));
        }
    }
    let sigmas: Vec<Vec<f64>> = profile.levels().iter().map(|v| v.iter().map(|x| x.sqrt()).collect()).collect();
    let mut rng = stream(seed, 0);
    let tree = perturb(f, n.sqrt().recip(), &mut rng, |i, k| sigmas[i][k]);
    Ok(Observation { tree, n, seed, split: SplitTag::Full })
}
