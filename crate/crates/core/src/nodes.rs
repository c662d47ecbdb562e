//! Weighted node sets and their annulus partition.

use crate::error::{Error, Result};
use crate::point::Point;

/// Relative distance to an annulus boundary below which membership is flagged.
pub const BOUNDARY_FLAG_TOL: f64 = 1e-9;

/// A finite prefix `(γ_n, v_n)`, sorted by modulus.
///
/// Position `i` of every slice corresponds to the index `n = i + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedNodeSet {
    nodes: Vec<Point>,
    weights: Vec<f64>,
    sparseness_ratio: f64,
    admissibility_sum: f64,
    sparse_exempt: bool,
    partition: AnnulusPartition,
}

pub fn build_node_set(points: Vec<Point>, weights: Vec<f64>) -> Result<WeightedNodeSet> {
    WeightedNodeSet::new(points, weights)
}

pub(crate) fn check_weights(weights: &[f64]) -> Result<()> {
    for (index, &value) in weights.iter().enumerate() {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::NonPositiveWeight { index, value });
        }
    }
    Ok(())
}

/// Sorts `points` by modulus (ties by argument), carrying `weights` along,
/// and rejects exact duplicates.
pub(crate) fn sort_weighted(
    points: Vec<Point>,
    weights: Vec<f64>,
) -> Result<(Vec<Point>, Vec<f64>)> {
    if points.len() != weights.len() {
        return Err(Error::LengthMismatch {
            left: points.len(),
            right: weights.len(),
        });
    }
    if let Some(i) = points.iter().position(|p| !p.is_finite()) {
        return Err(Error::InvalidParameter(format!("point {i} is not finite")));
    }
    check_weights(&weights)?;
    let mut pairs: Vec<(Point, f64)> = points.into_iter().zip(weights).collect();
    pairs.sort_by(|a, b| a.0.modulus_cmp(&b.0));
    for i in 1..pairs.len() {
        if pairs[i - 1].0.diff(&pairs[i].0) == num_complex::Complex64::new(0.0, 0.0) {
            return Err(Error::DuplicatePoint {
                first: i - 1,
                second: i,
            });
        }
    }
    Ok(pairs.into_iter().unzip())
}

impl WeightedNodeSet {
    pub fn new(points: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() && weights.is_empty() {
            return Err(Error::EmptyInput);
        }
        let (nodes, weights) = sort_weighted(points, weights)?;
        if nodes.len() > 1 && nodes[0].norm() == 0.0 {
            return Err(Error::InvalidParameter(
                "a node at 0 is only allowed in a one-point set".into(),
            ));
        }
        let sparseness_ratio = nodes
            .windows(2)
            .map(|w| w[1].norm() / w[0].norm())
            .fold(f64::INFINITY, f64::min);
        let admissibility_sum = nodes
            .iter()
            .zip(&weights)
            .map(|(g, v)| v / (1.0 + g.norm_sqr()))
            .sum();
        let partition = AnnulusPartition::from_nodes(&nodes);
        Ok(Self {
            nodes,
            weights,
            sparseness_ratio,
            admissibility_sum,
            sparse_exempt: false,
            partition,
        })
    }

    /// Marks a deliberately non-sparse set (cluster families) for oracle-only analysis.
    pub fn mark_sparse_exempt(mut self) -> Self {
        self.sparse_exempt = true;
        self
    }

    pub fn is_sparse_exempt(&self) -> bool {
        self.sparse_exempt
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `min |γ_{n+1}|/|γ_n|`; `+∞` for a single node.
    pub fn sparseness_ratio(&self) -> f64 {
        self.sparseness_ratio
    }

    /// `Σ v_n/(1+|γ_n|²)` over the prefix.
    pub fn admissibility_sum(&self) -> f64 {
        self.admissibility_sum
    }

    pub fn partition(&self) -> &AnnulusPartition {
        &self.partition
    }

    pub fn require_sparse(&self) -> Result<()> {
        if self.sparseness_ratio > 1.0 {
            Ok(())
        } else {
            Err(Error::SparsenessViolation {
                ratio: self.sparseness_ratio,
            })
        }
    }

    /// The first `n` nodes (at least one).
    pub fn prefix(&self, n: usize) -> WeightedNodeSet {
        let n = n.clamp(1, self.len());
        let nodes = self.nodes[..n].to_vec();
        let weights = self.weights[..n].to_vec();
        let mut out = Self::new(nodes, weights).expect("prefix of a valid set");
        out.sparse_exempt = self.sparse_exempt;
        out
    }

    /// Same nodes with every weight multiplied by `c > 0`.
    pub fn scaled_weights(&self, c: f64) -> Result<WeightedNodeSet> {
        let mut out = Self::new(
            self.nodes.clone(),
            self.weights.iter().map(|v| v * c).collect(),
        )?;
        out.sparse_exempt = self.sparse_exempt;
        Ok(out)
    }

    /// Position of the node within `1e-12·|γ_n|` of `z` (exactly equal, for a
    /// point anchored at that node), if any.
    pub fn near_node(&self, z: &Point) -> Option<usize> {
        near_node(&self.nodes, z)
    }
}

pub(crate) fn near_node(nodes: &[Point], z: &Point) -> Option<usize> {
    const NEAR: f64 = 1e-12;
    // Differences of points sharing an anchor are exact; only exact coincidence counts.
    let close = |i: usize| {
        let d = z.diff(&nodes[i]).norm();
        d == 0.0 || (nodes[i].anchor() != z.anchor() && d <= NEAR * nodes[i].norm())
    };
    // Nodes bracketing |z|, plus any node sharing its anchor (clusters).
    let k = nodes.partition_point(|g| g.norm() < z.norm());
    (k.saturating_sub(2)..(k + 2).min(nodes.len()))
        .find(|&i| close(i))
        .or_else(|| (0..nodes.len()).find(|&i| nodes[i].anchor() == z.anchor() && close(i)))
}

/// Location of a point relative to the annulus partition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AnnulusHit {
    /// Zero-based annulus position (annulus `Ω_{index+1}`).
    pub index: usize,
    /// Outside the outermost boundary; assigned to the last annulus.
    pub beyond_outer: bool,
    /// Within `1e-9` relative of a boundary radius.
    pub near_boundary: bool,
}

/// Radii `r_1 < … < r_N` with `Ω_n = {r_{n-1} ≤ |z| < r_n}` and `r_0 = 0`.
///
/// `r_n = (|γ_n| + |γ_{n+1}|)/2` for `n < N`; the outer radius `r_N` is
/// extrapolated with the last modulus ratio (`+∞` for a one-point set).
#[derive(Clone, Debug, PartialEq)]
pub struct AnnulusPartition {
    radii: Vec<f64>,
}

impl AnnulusPartition {
    pub fn from_nodes(nodes: &[Point]) -> Self {
        let m: Vec<f64> = nodes.iter().map(Point::norm).collect();
        let n = m.len();
        let mut radii: Vec<f64> = m.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        if n == 1 {
            radii.push(f64::INFINITY);
        } else if n > 1 {
            let q = m[n - 1] / m[n - 2];
            radii.push(0.5 * (m[n - 1] + q * m[n - 1]));
        }
        Self { radii }
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn annulus_of(&self, z: &Point) -> AnnulusHit {
        let r = z.norm();
        let n = self.radii.len();
        let k = self.radii.partition_point(|&b| b <= r);
        let near_boundary = [k.checked_sub(1), Some(k)]
            .into_iter()
            .flatten()
            .filter(|&i| i + 1 < n)
            .any(|i| (r - self.radii[i]).abs() <= BOUNDARY_FLAG_TOL * self.radii[i]);
        AnnulusHit {
            index: k.min(n.saturating_sub(1)),
            beyond_outer: k >= n,
            near_boundary,
        }
    }
}
