//! Sequence-space representation of signals and Besov `(r, 2, ∞)` geometry.
//!
//! A signal is stored as its wavelet coefficients on the dyadic levels
//! `J0..=L_max`. The base level `J0` holds `z0` coefficients and every level
//! `l > J0` holds `2^l`. The Besov norm is `sup_l 2^{lr} ‖a_l‖`, so the ball
//! `Σ(r, B)` is a product of per-level Euclidean balls of radius `B 2^{-lr}`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, structure, Error, Result};
use crate::sum::sum_squares;

/// Largest level a tree may carry. Level 30 already holds 2^30 coefficients.
pub const MAX_LEVEL: u32 = 30;

/// Base-level convention of a coefficient tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    #[serde(rename = "J0", default)]
    pub j0: u32,
    #[serde(default = "default_z0")]
    pub z0: usize,
}

fn default_z0() -> usize {
    1
}

impl Default for Layout {
    fn default() -> Self {
        Layout { j0: 0, z0: 1 }
    }
}

impl Layout {
    pub fn new(j0: u32, z0: usize) -> Result<Self> {
        if z0 == 0 {
            return Err(structure("z0 must be at least 1"));
        }
        if j0 > MAX_LEVEL {
            return Err(structure(format!("J0 = {j0} exceeds the maximum level {MAX_LEVEL}")));
        }
        Ok(Layout { j0, z0 })
    }

    /// Number of coefficients stored at level `l`.
    pub fn level_size(&self, l: u32) -> usize {
        level_size(self.j0, self.z0, l)
    }
}

/// `|Z_l|`: `z0` at the base level, `2^l` above it.
pub fn level_size(j0: u32, z0: usize, l: u32) -> usize {
    if l == j0 {
        z0
    } else {
        1usize << l
    }
}

/// Dyadic multi-level array of real wavelet coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TreeRepr", into = "TreeRepr")]
pub struct CoefficientTree {
    layout: Layout,
    levels: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeRepr {
    #[serde(rename = "J0")]
    j0: u32,
    z0: usize,
    levels: Vec<Vec<f64>>,
}

impl TryFrom<TreeRepr> for CoefficientTree {
    type Error = Error;

    fn try_from(r: TreeRepr) -> Result<Self> {
        CoefficientTree::new(r.j0, r.z0, r.levels)
    }
}

impl From<CoefficientTree> for TreeRepr {
    fn from(t: CoefficientTree) -> Self {
        TreeRepr { j0: t.layout.j0, z0: t.layout.z0, levels: t.levels }
    }
}

impl CoefficientTree {
    /// Builds a tree from per-level arrays listed from `j0` upward.
    pub fn new(j0: u32, z0: usize, levels: Vec<Vec<f64>>) -> Result<Self> {
        let layout = Layout::new(j0, z0)?;
        if levels.is_empty() {
            return Err(structure("a tree needs at least the base level"));
        }
        let l_max = j0 as usize + levels.len() - 1;
        if l_max > MAX_LEVEL as usize {
            return Err(structure(format!("top level {l_max} exceeds {MAX_LEVEL}")));
        }
        for (i, level) in levels.iter().enumerate() {
            let l = j0 + i as u32;
            let expected = layout.level_size(l);
            if level.len() != expected {
                return Err(structure(format!(
                    "level {l} has {} coefficients, expected {expected}",
                    level.len()
                )));
            }
            if let Some(k) = level.iter().position(|v| !v.is_finite()) {
                return Err(structure(format!("non-finite coefficient at level {l}, index {k}")));
            }
        }
        Ok(CoefficientTree { layout, levels })
    }

    /// All-zero tree on levels `layout.j0..=l_max`.
    pub fn zeros(layout: Layout, l_max: u32) -> Result<Self> {
        Self::from_fn(layout, l_max, |_, _| 0.0)
    }

    /// Tree whose coefficient `(l, k)` is `f(l, k)`.
    pub fn from_fn(layout: Layout, l_max: u32, mut f: impl FnMut(u32, usize) -> f64) -> Result<Self> {
        if l_max < layout.j0 {
            return Err(Error::Range(format!("L_max = {l_max} below J0 = {}", layout.j0)));
        }
        let levels = (layout.j0..=l_max)
            .map(|l| (0..layout.level_size(l)).map(|k| f(l, k)).collect())
            .collect();
        Self::new(layout.j0, layout.z0, levels)
    }

    pub(crate) fn from_parts(layout: Layout, levels: Vec<Vec<f64>>) -> Self {
        debug_assert!(!levels.is_empty());
        CoefficientTree { layout, levels }
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn j0(&self) -> u32 {
        self.layout.j0
    }

    pub fn z0(&self) -> usize {
        self.layout.z0
    }

    pub fn l_max(&self) -> u32 {
        self.layout.j0 + self.levels.len() as u32 - 1
    }

    /// Per-level arrays from `J0` upward.
    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    /// Iterator over `(level, coefficients)`.
    pub fn iter_levels(&self) -> impl Iterator<Item = (u32, &[f64])> {
        let j0 = self.layout.j0;
        self.levels.iter().enumerate().map(move |(i, v)| (j0 + i as u32, v.as_slice()))
    }

    pub fn level(&self, l: u32) -> Option<&[f64]> {
        l.checked_sub(self.layout.j0)
            .and_then(|i| self.levels.get(i as usize))
            .map(Vec::as_slice)
    }

    /// Replaces the coefficients of level `l`.
    pub fn set_level(&mut self, l: u32, values: Vec<f64>) -> Result<()> {
        let expected = self.layout.level_size(l);
        let idx = self.index_of(l)?;
        if values.len() != expected {
            return Err(structure(format!(
                "level {l} needs {expected} coefficients, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(structure(format!("non-finite coefficient for level {l}")));
        }
        self.levels[idx] = values;
        Ok(())
    }

    pub fn set(&mut self, l: u32, k: usize, value: f64) -> Result<()> {
        let idx = self.index_of(l)?;
        if !value.is_finite() {
            return Err(structure("non-finite coefficient"));
        }
        let slot = self.levels[idx]
            .get_mut(k)
            .ok_or_else(|| Error::Range(format!("index {k} outside level {l}")))?;
        *slot = value;
        Ok(())
    }

    fn index_of(&self, l: u32) -> Result<usize> {
        if l < self.layout.j0 || l > self.l_max() {
            return Err(Error::Range(format!(
                "level {l} outside [{}, {}]",
                self.layout.j0,
                self.l_max()
            )));
        }
        Ok((l - self.layout.j0) as usize)
    }

    /// `Σ_k a_{l,k}²`, or `None` when the level is not stored.
    pub fn level_energy(&self, l: u32) -> Option<f64> {
        self.level(l).map(sum_squares)
    }

    pub fn level_norm(&self, l: u32) -> Option<f64> {
        self.level_energy(l).map(f64::sqrt)
    }

    pub fn same_shape(&self, other: &CoefficientTree) -> bool {
        self.layout == other.layout && self.levels.len() == other.levels.len()
    }

    pub fn total_len(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.levels.iter().flatten().all(|&v| v == 0.0)
    }

    pub fn scaled(&self, c: f64) -> CoefficientTree {
        let levels = self.levels.iter().map(|v| v.iter().map(|x| c * x).collect()).collect();
        Self::from_parts(self.layout, levels)
    }

    /// Coefficient-wise sum of two trees with the same base layout; the
    /// result spans the deeper of the two.
    pub fn add(&self, other: &CoefficientTree) -> Result<CoefficientTree> {
        if self.layout != other.layout {
            return Err(structure("cannot add trees with different base layouts"));
        }
        let top = self.l_max().max(other.l_max());
        CoefficientTree::from_fn(self.layout, top, |l, k| {
            self.level(l).map_or(0.0, |v| v[k]) + other.level(l).map_or(0.0, |v| v[k])
        })
    }

    /// Levels `J0..=l` only; `l` may exceed `L_max`, in which case the tree
    /// is zero-padded.
    pub fn resized(&self, l: u32) -> Result<CoefficientTree> {
        CoefficientTree::from_fn(self.layout, l, |lev, k| self.level(lev).map_or(0.0, |v| v[k]))
    }

    /// `‖f‖_{r,2,∞} = max_l 2^{lr} ‖a_l‖` over the stored levels.
    pub fn besov_norm(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(domain(format!("smoothness exponent must be >= 0, got {r}")));
        }
        Ok(self
            .iter_levels()
            .map(|(l, v)| (l as f64 * r).exp2() * sum_squares(v).sqrt())
            .fold(0.0, f64::max))
    }

    /// `L2` norm via Parseval.
    pub fn l2_norm(&self) -> f64 {
        let mut acc = crate::sum::Neumaier::default();
        for v in &self.levels {
            acc.add(sum_squares(v));
        }
        acc.value().sqrt()
    }

    /// Projection onto `V_J`: zeroes every level above `J`.
    pub fn project_v(&self, j: u32) -> Result<CoefficientTree> {
        self.index_of(j)?;
        let levels = self
            .iter_levels()
            .map(|(l, v)| if l <= j { v.to_vec() } else { vec![0.0; v.len()] })
            .collect();
        Ok(Self::from_parts(self.layout, levels))
    }

    /// Projection onto `W_J`: keeps level `J` only.
    pub fn project_w(&self, j: u32) -> Result<CoefficientTree> {
        self.index_of(j)?;
        let levels = self
            .iter_levels()
            .map(|(l, v)| if l == j { v.to_vec() } else { vec![0.0; v.len()] })
            .collect();
        Ok(Self::from_parts(self.layout, levels))
    }

    /// Exact `L2` distance to the ball `Σ(s, B)`.
    ///
    /// The ball constrains each level independently, so the nearest point
    /// shrinks every level radially onto its sphere of radius `B 2^{-ls}` and
    /// `dist² = Σ_l max(0, ‖a_l‖ − B 2^{-ls})²`.
    pub fn distance_to_ball(&self, ball: &BesovBall) -> f64 {
        let mut acc = crate::sum::Neumaier::default();
        for (l, v) in self.iter_levels() {
            let excess = sum_squares(v).sqrt() - ball.level_radius(l);
            if excess > 0.0 {
                acc.add(excess * excess);
            }
        }
        acc.value().sqrt()
    }
}

/// The ball `Σ(r, B)` of the `(r, 2, ∞)` Besov norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesovBall {
    pub r: f64,
    #[serde(rename = "B")]
    pub radius: f64,
}

impl BesovBall {
    pub fn new(r: f64, radius: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(domain(format!("ball smoothness must be > 0, got {r}")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(domain(format!("ball radius must be > 0, got {radius}")));
        }
        Ok(BesovBall { r, radius })
    }

    /// `B 2^{-lr}`, the largest level-`l` norm inside the ball.
    pub fn level_radius(&self, l: u32) -> f64 {
        self.radius * (-(l as f64) * self.r).exp2()
    }

    pub fn contains(&self, tree: &CoefficientTree) -> bool {
        tree.iter_levels().all(|(l, v)| sum_squares(v).sqrt() <= self.level_radius(l))
    }
}

/// Bound on the energy a `Σ(t, B)` signal can carry above level `j`:
/// `‖f − Π_{V_j} f‖₂ ≤ B 2^{-jt} / √(1 − 2^{-2t})`.
pub fn tail_bound(t: f64, b: f64, j: i32) -> Result<f64> {
    if !(t > 0.0) {
        return Err(domain(format!("tail bound needs t > 0, got {t}")));
    }
    Ok(b * (-(j as f64) * t).exp2() / (1.0 - (-2.0 * t).exp2()).sqrt())
}
