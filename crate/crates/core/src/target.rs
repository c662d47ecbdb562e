//! Target systems `(Λ, w)`.

use num_complex::Complex64;

use crate::cumulants::{cumulate, CumulantTable, TailPolicy};
use crate::error::{Error, Result};
use crate::nodes::{near_node, sort_weighted, WeightedNodeSet};
use crate::point::Point;
use crate::transform::bessel_weights;

/// Relative tolerance for accepting user-supplied weights as Bessel weights.
pub const BESSEL_TOL: f64 = 1e-12;

/// A finite prefix of `(Λ, w)`, sorted by modulus, indexed from `offset`.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetSystem {
    points: Vec<Point>,
    weights: Vec<f64>,
    offset: i64,
    bessel_weighted: bool,
}

impl TargetSystem {
    /// An unflagged target system; the list may be empty.
    pub fn new(points: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        let (points, weights) = sort_weighted(points, weights)?;
        Ok(Self {
            points,
            weights,
            offset: 1,
            bessel_weighted: false,
        })
    }

    /// Attaches `w_j = (Σ_n v_n/|λ_j-γ_n|²)^{-1}` over the prefix of `ns`.
    pub fn with_bessel_weights(ns: &WeightedNodeSet, points: Vec<Point>) -> Result<Self> {
        let n = points.len();
        let mut ts = Self::new(points, vec![1.0; n])?;
        ts.weights = bessel_weights(ns, &ts.points)?;
        ts.bessel_weighted = true;
        Ok(ts)
    }

    /// Accepts `weights` as Bessel weights after checking them against `ns`.
    pub fn bessel_flagged(ns: &WeightedNodeSet, points: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        let mut ts = Self::new(points, weights)?;
        let exact = bessel_weights(ns, &ts.points)?;
        if ts
            .weights
            .iter()
            .zip(&exact)
            .any(|(w, e)| ((w - e) / e).abs() > BESSEL_TOL)
        {
            return Err(Error::NotBesselWeighted);
        }
        ts.bessel_weighted = true;
        Ok(ts)
    }

    pub fn with_offset(mut self, offset: i64) -> Self {
        self.offset = offset;
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Index `n₀` of the first point.
    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn is_bessel_weighted(&self) -> bool {
        self.bessel_weighted
    }

    pub fn require_bessel(&self) -> Result<()> {
        if self.bessel_weighted {
            Ok(())
        } else {
            Err(Error::NotBesselWeighted)
        }
    }

    /// Rejects points within `1e-12·|γ_n|` of a node.
    pub fn check_disjoint(&self, ns: &WeightedNodeSet) -> Result<()> {
        for p in &self.points {
            if let Some(node) = near_node(ns.nodes(), p) {
                return Err(Error::EvaluationAtNode { node });
            }
        }
        Ok(())
    }

    /// `W_n = Σ_{m<n} w_m` (empty sum 0) and `Q_n = Σ_{m>n} w_m/|λ_m|²`.
    pub fn cumulants(&self, policy: &TailPolicy) -> Result<CumulantTable> {
        let moduli: Vec<f64> = self.points.iter().map(Point::norm).collect();
        cumulate(&self.weights, &moduli, 0.0, policy)
    }

    /// The points at the given sorted positions, with their weights and flag.
    pub fn subset(&self, positions: &[usize]) -> TargetSystem {
        let mut positions = positions.to_vec();
        positions.sort_unstable();
        positions.dedup();
        TargetSystem {
            points: positions.iter().map(|&i| self.points[i]).collect(),
            weights: positions.iter().map(|&i| self.weights[i]).collect(),
            offset: self.offset,
            bessel_weighted: self.bessel_weighted,
        }
    }

    /// Drops the first point; the offset advances by one.
    pub fn without_first(&self) -> TargetSystem {
        let mut ts = self.subset(&(1..self.len()).collect::<Vec<_>>());
        ts.offset = self.offset + 1;
        ts
    }

    /// The first `n` points.
    pub fn prefix(&self, n: usize) -> TargetSystem {
        let mut ts = self.subset(&(0..n.min(self.len())).collect::<Vec<_>>());
        ts.offset = self.offset;
        ts
    }

    /// Rotates every point by `e^{iθ}` about 0 and recomputes Bessel weights if flagged.
    pub fn rotated(&self, theta: f64, ns: &WeightedNodeSet) -> Result<TargetSystem> {
        let c = Complex64::from_polar(1.0, theta);
        let points: Vec<Point> = self.points.iter().map(|p| p.scale(c)).collect();
        let ts = if self.bessel_weighted {
            Self::with_bessel_weights(ns, points)?
        } else {
            Self::new(points, self.weights.clone())?
        };
        Ok(ts.with_offset(self.offset))
    }

    /// Same points with weights multiplied pointwise; drops the Bessel flag
    /// unless `keep_flag` (used to test invariance under bounded rescaling).
    pub fn rescaled(&self, factors: &[f64], keep_flag: bool) -> Result<TargetSystem> {
        if factors.len() != self.len() {
            return Err(Error::LengthMismatch {
                left: self.len(),
                right: factors.len(),
            });
        }
        let weights: Vec<f64> = self.weights.iter().zip(factors).map(|(w, f)| w * f).collect();
        crate::nodes::check_weights(&weights)?;
        Ok(TargetSystem {
            points: self.points.clone(),
            weights,
            offset: self.offset,
            bessel_weighted: self.bessel_weighted && keep_flag,
        })
    }
}
