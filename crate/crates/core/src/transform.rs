//! The weighted discrete Hilbert transform, Bessel weights and truncated matrices.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cumulants::CumulantTable;
use crate::error::{Error, Result};
use crate::measure::AnnulusMeasure;
use crate::nodes::{near_node, WeightedNodeSet};
use crate::oracle::{singular_extremes, SingularExtremes};
use crate::point::Point;
use crate::target::TargetSystem;

/// `1/d` without forming `|d|²`, so huge and tiny `d` neither overflow nor underflow.
pub(crate) fn recip(d: Complex64) -> Complex64 {
    let s = d.re.abs().max(d.im.abs());
    let e = d / s;
    e.conj() / e.norm_sqr() / s
}

/// Coefficients `a_n` aligned with a node set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientVector {
    pub entries: Vec<Complex64>,
}

impl CoefficientVector {
    pub fn new(entries: Vec<Complex64>) -> Self {
        Self { entries }
    }

    /// `a_n = b_n/√v_n`.
    pub fn from_rescaled(b: &[Complex64], ns: &WeightedNodeSet) -> Self {
        Self::new(b.iter().zip(ns.weights()).map(|(b, v)| b / v.sqrt()).collect())
    }

    /// `b_n = a_n √v_n`.
    pub fn rescaled(&self, ns: &WeightedNodeSet) -> Vec<Complex64> {
        self.entries
            .iter()
            .zip(ns.weights())
            .map(|(a, v)| a * v.sqrt())
            .collect()
    }

    /// `(Σ |a_n|² v_n)^{1/2}`.
    pub fn norm_v(&self, ns: &WeightedNodeSet) -> f64 {
        self.entries
            .iter()
            .zip(ns.weights())
            .map(|(a, v)| a.norm_sqr() * v)
            .sum::<f64>()
            .sqrt()
    }
}

fn check_aligned(ns: &WeightedNodeSet, a: &CoefficientVector) -> Result<()> {
    if a.entries.len() != ns.len() {
        return Err(Error::LengthMismatch {
            left: ns.len(),
            right: a.entries.len(),
        });
    }
    Ok(())
}

/// `Σ_n a_n v_n/(z-γ_n)` over the prefix.
pub fn evaluate(ns: &WeightedNodeSet, a: &CoefficientVector, z: &Point) -> Result<Complex64> {
    check_aligned(ns, a)?;
    if let Some(node) = near_node(ns.nodes(), z) {
        return Err(Error::EvaluationAtNode { node });
    }
    Ok(ns
        .nodes()
        .iter()
        .zip(ns.weights())
        .zip(&a.entries)
        .map(|((g, v), a)| a * *v * recip(z.diff(g)))
        .sum())
}

/// Bound on `|Σ_{n>N} a_n v_n/(z-γ_n)|` per unit `ℓ²_v` norm of an unseen tail:
/// `2 √P_N` when `|z| ≤ |γ_N|/2`, otherwise unknown.
pub fn tail_sensitivity(ns: &WeightedNodeSet, table: &CumulantTable, z: &Point) -> Option<f64> {
    let last = ns.nodes().last()?.norm();
    let p = table.tail.last()? + table.remainder_bound.last().copied().flatten()?;
    (z.norm() <= 0.5 * last).then(|| 2.0 * p.sqrt())
}

fn bessel_sum_scaled(ns: &WeightedNodeSet, z: &Point) -> Result<(f64, f64)> {
    if let Some(node) = near_node(ns.nodes(), z) {
        return Err(Error::EvaluationAtNode { node });
    }
    let r: Vec<f64> = ns
        .nodes()
        .iter()
        .zip(ns.weights())
        .map(|(g, v)| v.sqrt() / z.diff(g).norm())
        .collect();
    let s = r.iter().copied().fold(0.0, f64::max);
    let sum: f64 = r.iter().map(|x| (x / s) * (x / s)).sum();
    // Σ v_n/|z-γ_n|² = s² · sum
    Ok((s, sum))
}

/// `w_j = (Σ_n v_n/|λ_j-γ_n|²)^{-1}` over the prefix.
pub fn bessel_weights(ns: &WeightedNodeSet, lambda: &[Point]) -> Result<Vec<f64>> {
    lambda
        .iter()
        .map(|z| {
            let (s, sum) = bessel_sum_scaled(ns, z)?;
            let inv = 1.0 / s;
            Ok(inv * inv / sum)
        })
        .collect()
}

/// Bessel weights corrected for the tail beyond the prefix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BesselWeights {
    /// `(S_j + P_N)^{-1}` where the tail estimate applies, else the prefix value.
    pub weights: Vec<f64>,
    /// Certified lower bound `(S_j + 4 P_N)^{-1}` where it applies.
    pub lower_bound: Vec<Option<f64>>,
    /// Points with `|λ_j| > |γ_N|/2`, for which only the prefix sum is used.
    pub truncated: Vec<bool>,
}

/// Bessel weights with the tail bound `Σ_{n>N} v_n/|λ-γ_n|² ≤ 4 P_N` for `|λ| ≤ |γ_N|/2`.
pub fn bessel_weights_with_tail(
    ns: &WeightedNodeSet,
    lambda: &[Point],
    table: &CumulantTable,
) -> Result<BesselWeights> {
    let last = ns.nodes().last().map(Point::norm).unwrap_or(0.0);
    let p = table.tail.last().copied().unwrap_or(0.0)
        + table.remainder_bound.last().copied().flatten().unwrap_or(0.0);
    let mut out = BesselWeights {
        weights: Vec::with_capacity(lambda.len()),
        lower_bound: Vec::with_capacity(lambda.len()),
        truncated: Vec::with_capacity(lambda.len()),
    };
    for z in lambda {
        let (s, sum) = bessel_sum_scaled(ns, z)?;
        if z.norm() <= 0.5 * last {
            let total = s * s * sum;
            out.weights.push(1.0 / (total + p));
            out.lower_bound.push(Some(1.0 / (total + 4.0 * p)));
            out.truncated.push(false);
        } else {
            let inv = 1.0 / s;
            out.weights.push(inv * inv / sum);
            out.lower_bound.push(None);
            out.truncated.push(true);
        }
    }
    Ok(out)
}

/// `M_{jn} = √(w_j v_n)/(λ_j-γ_n)` with its source and target data.
#[derive(Clone, Debug)]
pub struct TruncatedOperator {
    matrix: DMatrix<Complex64>,
    source_nodes: Vec<Point>,
    source_weights: Vec<f64>,
    target_points: Vec<Point>,
    target_weights: Vec<f64>,
    summary: OnceLock<SingularExtremes>,
}

/// The normalized `J×N` matrix of the transform from `ns` to `ts`.
pub fn truncated_operator(ns: &WeightedNodeSet, ts: &TargetSystem) -> Result<TruncatedOperator> {
    ts.check_disjoint(ns)?;
    Ok(assemble(ns, ts.points(), ts.weights()))
}

/// The operator into `L²(μ)` for a discrete measure (atoms as targets, masses as weights).
pub fn measure_operator(ns: &WeightedNodeSet, mu: &AnnulusMeasure) -> Result<TruncatedOperator> {
    let atoms = mu.atoms().ok_or_else(|| {
        Error::InvalidParameter("measure operator needs a discrete measure".into())
    })?;
    let points: Vec<Point> = atoms.iter().map(|a| a.0).collect();
    let masses: Vec<f64> = atoms.iter().map(|a| a.1).collect();
    for (k, z) in points.iter().enumerate() {
        if let Some(node) = ns.nodes().iter().position(|g| z.diff(g) == Complex64::new(0.0, 0.0)) {
            return Err(Error::AtomOnNode { atom: k, node });
        }
    }
    Ok(assemble(ns, &points, &masses))
}

fn assemble(ns: &WeightedNodeSet, points: &[Point], weights: &[f64]) -> TruncatedOperator {
    let sv: Vec<f64> = ns.weights().iter().map(|v| v.sqrt()).collect();
    let rows: Vec<Vec<Complex64>> = points
        .par_iter()
        .zip(weights.par_iter())
        .map(|(z, w)| {
            let sw = w.sqrt();
            ns.nodes()
                .iter()
                .zip(&sv)
                .map(|(g, s)| sw * (s * recip(z.diff(g))))
                .collect()
        })
        .collect();
    let matrix = DMatrix::from_fn(points.len(), ns.len(), |j, n| rows[j][n]);
    TruncatedOperator {
        matrix,
        source_nodes: ns.nodes().to_vec(),
        source_weights: ns.weights().to_vec(),
        target_points: points.to_vec(),
        target_weights: weights.to_vec(),
        summary: OnceLock::new(),
    }
}

impl TruncatedOperator {
    /// A bare matrix without source or target data (no witness vectors).
    pub fn from_matrix(matrix: DMatrix<Complex64>) -> Self {
        Self {
            matrix,
            source_nodes: Vec::new(),
            source_weights: Vec::new(),
            target_points: Vec::new(),
            target_weights: Vec::new(),
            summary: OnceLock::new(),
        }
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn source_nodes(&self) -> &[Point] {
        &self.source_nodes
    }

    pub fn source_weights(&self) -> &[f64] {
        &self.source_weights
    }

    pub fn target_points(&self) -> &[Point] {
        &self.target_points
    }

    pub fn target_weights(&self) -> &[f64] {
        &self.target_weights
    }

    /// `M b` for rescaled coefficients `b`.
    pub fn apply(&self, b: &[Complex64]) -> Vec<Complex64> {
        (&self.matrix * DVector::from_column_slice(b)).iter().copied().collect()
    }

    /// `(σ_max, σ_min)`, computed once by the oracle.
    pub fn singular_summary(&self) -> Result<SingularExtremes> {
        if let Some(s) = self.summary.get() {
            return Ok(*s);
        }
        let s = singular_extremes(&self.matrix)?;
        Ok(*self.summary.get_or_init(|| s))
    }

    /// Rayleigh quotients of the witness vectors `c⁽ⁿ⁾` and `a⁽ⁿ⁾`.
    pub fn witness_lower_bounds(&self) -> Witnesses {
        let n = self.source_nodes.len();
        if n == 0 || self.rows() == 0 {
            return Witnesses::default();
        }
        let sv: Vec<f64> = self.source_weights.iter().map(|v| v.sqrt()).collect();
        let quotients = |b: &dyn Fn(usize) -> Complex64, order: &mut dyn Iterator<Item = usize>| {
            let mut y = DVector::<Complex64>::zeros(self.rows());
            let mut norm_sq = 0.0;
            let mut out = Vec::with_capacity(n);
            for m in order {
                let bm = b(m);
                y.axpy(bm, &self.matrix.column(m), Complex64::new(1.0, 0.0));
                norm_sq += bm.norm_sqr();
                out.push(y.norm() / norm_sq.sqrt());
            }
            out
        };
        // c⁽ⁿ⁾: a_m = 1 for m < n, n = 2..=N+1
        let prefix = quotients(&|m| Complex64::new(sv[m], 0.0), &mut (0..n));
        // a⁽ⁿ⁾: a_m = 1/conj(γ_m) for m > n, n = N-1 down to 0
        let mut tail = quotients(
            &|m| sv[m] * recip(self.source_nodes[m].value().conj()),
            &mut (0..n).rev(),
        );
        tail.reverse();
        Witnesses { prefix, tail }
    }
}

/// Witness quotients: `prefix[k]` is for `c⁽ᵏ⁺²⁾`, `tail[k]` for `a⁽ᵏ⁾`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Witnesses {
    pub prefix: Vec<f64>,
    pub tail: Vec<f64>,
}

impl Witnesses {
    /// Largest quotient; 0 when there are none.
    pub fn best(&self) -> f64 {
        self.prefix
            .iter()
            .chain(&self.tail)
            .copied()
            .filter(|x| x.is_finite())
            .fold(0.0, f64::max)
    }
}

pub fn witness_lower_bounds(ns: &WeightedNodeSet, ts: &TargetSystem) -> Result<Witnesses> {
    Ok(truncated_operator(ns, ts)?.witness_lower_bounds())
}
