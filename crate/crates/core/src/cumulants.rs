//! Prefix sums `V_n` and tail sums `P_n` with an explicit tail policy.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nodes::WeightedNodeSet;

/// Maximum relative spread of the window ratios accepted by geometric extrapolation.
pub const EXTRAPOLATION_SPREAD: f64 = 0.2;

/// Closed-form tail `n ↦ Σ_{j>n} t_j` over the infinite sequence (`n` is 1-based).
#[derive(Clone)]
pub struct ClosedFormTail(pub Arc<dyn Fn(usize) -> f64 + Send + Sync>);

impl ClosedFormTail {
    pub fn new(f: impl Fn(usize) -> f64 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }
}

impl fmt::Debug for ClosedFormTail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ClosedFormTail(..)")
    }
}

#[derive(Clone, Debug, Default)]
pub enum TailPolicy {
    /// Tail sums over the prefix only.
    #[default]
    HardTruncate,
    /// Adds a geometric tail `t_N r/(1-r)`; `r` defaults to the mean ratio of
    /// the last `window` consecutive terms.
    GeometricExtrapolate { ratio: Option<f64>, window: usize },
    ClosedForm(ClosedFormTail),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailKind {
    HardTruncate,
    GeometricExtrapolate,
    ClosedForm,
}

impl TailPolicy {
    pub fn kind(&self) -> TailKind {
        match self {
            TailPolicy::HardTruncate => TailKind::HardTruncate,
            TailPolicy::GeometricExtrapolate { .. } => TailKind::GeometricExtrapolate,
            TailPolicy::ClosedForm(_) => TailKind::ClosedForm,
        }
    }
}

/// `V` (or `W`) prefix sums and `P` (or `Q`) tail sums of a weighted sequence.
///
/// Position `i` corresponds to the index `n = i + 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CumulantTable {
    /// `V_n = Σ_{j<n} v_j`, with the empty sum replaced by `empty_prefix`.
    pub prefix: Vec<f64>,
    /// `Σ_{j≤n} v_j`.
    pub inclusive: Vec<f64>,
    /// `P_n = Σ_{j>n} v_j/|γ_j|²` under the policy.
    pub tail: Vec<f64>,
    pub tail_policy: TailKind,
    /// Bound on the tail mass missing from each `P_n`; `None` when it cannot be estimated.
    pub remainder_bound: Vec<Option<f64>>,
}

impl CumulantTable {
    pub fn len(&self) -> usize {
        self.prefix.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prefix.is_empty()
    }

    /// `V_n` for 1-based `n`.
    pub fn v(&self, n: usize) -> f64 {
        self.prefix[n - 1]
    }

    /// `P_n` for 1-based `n`.
    pub fn p(&self, n: usize) -> f64 {
        self.tail[n - 1]
    }
}

/// `V` and `P` of a node set, with `V_1 = 1`.
pub fn cumulants(ns: &WeightedNodeSet, policy: &TailPolicy) -> Result<CumulantTable> {
    let moduli: Vec<f64> = ns.nodes().iter().map(|g| g.norm()).collect();
    cumulate(ns.weights(), &moduli, 1.0, policy)
}

/// Shared machinery for `(V, P)` and `(W, Q)`: prefix sums of `weights` and tail
/// sums of `weights/moduli²`.
pub fn cumulate(
    weights: &[f64],
    moduli: &[f64],
    empty_prefix: f64,
    policy: &TailPolicy,
) -> Result<CumulantTable> {
    let n = weights.len();
    if moduli.len() != n {
        return Err(Error::LengthMismatch {
            left: moduli.len(),
            right: n,
        });
    }
    let mut inclusive = Vec::with_capacity(n);
    let mut acc = 0.0;
    for &v in weights {
        acc += v;
        inclusive.push(acc);
    }
    let prefix: Vec<f64> = (0..n)
        .map(|i| if i == 0 { empty_prefix } else { inclusive[i - 1] })
        .collect();

    let terms: Vec<f64> = weights
        .iter()
        .zip(moduli)
        .map(|(v, m)| v / (m * m))
        .collect();
    let mut hard = vec![0.0; n];
    for i in (0..n.saturating_sub(1)).rev() {
        hard[i] = hard[i + 1] + terms[i + 1];
    }

    let (tail, remainder_bound) = match policy {
        TailPolicy::HardTruncate => {
            let bound = geometric_remainder(&terms);
            (hard, vec![bound; n])
        }
        TailPolicy::GeometricExtrapolate { ratio, window } => {
            let (extra, slack) = extrapolate(&terms, *ratio, *window)?;
            (
                hard.iter().map(|h| h + extra).collect(),
                vec![Some(slack); n],
            )
        }
        TailPolicy::ClosedForm(f) => ((1..=n).map(|k| (f.0)(k)).collect(), vec![Some(0.0); n]),
    };
    Ok(CumulantTable {
        prefix,
        inclusive,
        tail,
        tail_policy: policy.kind(),
        remainder_bound,
    })
}

/// Omitted mass estimate `t_N ρ/(1-ρ)` from the ratio of the last two terms.
fn geometric_remainder(terms: &[f64]) -> Option<f64> {
    let n = terms.len();
    if n < 2 {
        return None;
    }
    let rho = terms[n - 1] / terms[n - 2];
    (rho < 1.0).then(|| terms[n - 1] * rho / (1.0 - rho))
}

fn extrapolate(terms: &[f64], ratio: Option<f64>, window: usize) -> Result<(f64, f64)> {
    let n = terms.len();
    if window == 0 || n < window + 1 {
        return Err(Error::InvalidParameter(format!(
            "geometric extrapolation needs {} terms, have {n}",
            window + 1
        )));
    }
    let ratios: Vec<f64> = terms[n - window - 1..]
        .windows(2)
        .map(|w| w[1] / w[0])
        .collect();
    let mean = ratios.iter().sum::<f64>() / window as f64;
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spread = (hi - lo) / mean;
    if !(spread <= EXTRAPOLATION_SPREAD) {
        return Err(Error::ExtrapolationUnstable { spread });
    }
    let r = ratio.unwrap_or(mean);
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::ExtrapolationUnstable { spread: r });
    }
    let extra = terms[n - 1] * r / (1.0 - r);
    Ok((extra, extra * spread))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::point::Point;

    fn geometric(n: usize) -> WeightedNodeSet {
        let pts = (1..=n).map(|k| Point::real(2f64.powi(k as i32))).collect();
        WeightedNodeSet::new(pts, vec![1.0; n]).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn closed_form_geometric() {
        let tail = ClosedFormTail::new(|n| 4f64.powi(-(n as i32)) / 3.0);
        let t = cumulants(&geometric(20), &TailPolicy::ClosedForm(tail)).unwrap();
        assert_eq!(t.v(5), 4.0);
        assert!(rel(t.p(5), 4f64.powi(-5) / 3.0) < 1e-15);
        for n in 1..=20 {
            assert!(rel(t.p(n) * 3.0 * 4f64.powi(n as i32), 1.0) < 1e-12);
        }
    }

    #[test]
    fn hard_truncation_geometric() {
        let t = cumulants(&geometric(20), &TailPolicy::HardTruncate).unwrap();
        let want = (4f64.powi(-5) - 4f64.powi(-20)) / 3.0;
        assert!(rel(t.p(5), want) < 1e-12);
        assert_eq!(t.p(20), 0.0);
        let r = t.remainder_bound[0].unwrap();
        assert!(rel(r, 4f64.powi(-20) / 3.0) < 1e-12);
        assert_eq!(t.v(1), 1.0);
        assert!(t.prefix.windows(2).all(|w| w[0] <= w[1]));
        assert!(t.tail.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn single_node() {
        let ns = WeightedNodeSet::new(vec![Point::real(1.0)], vec![1.0]).unwrap();
        let t = cumulants(&ns, &TailPolicy::HardTruncate).unwrap();
        assert_eq!((t.v(1), t.p(1)), (1.0, 0.0));
        assert_eq!(t.remainder_bound[0], None);
    }

    #[test]
    fn geometric_extrapolation() {
        let policy = TailPolicy::GeometricExtrapolate {
            ratio: None,
            window: 4,
        };
        let t = cumulants(&geometric(20), &policy).unwrap();
        for n in 1..=20 {
            assert!(rel(t.p(n), 4f64.powi(-(n as i32)) / 3.0) < 1e-12);
        }
    }

    #[test]
    fn unstable_extrapolation() {
        let pts = (1..=8).map(|k| Point::real(2f64.powi(k * k))).collect();
        let ns = WeightedNodeSet::new(pts, vec![1.0; 8]).unwrap();
        let policy = TailPolicy::GeometricExtrapolate {
            ratio: None,
            window: 3,
        };
        assert!(matches!(
            cumulants(&ns, &policy),
            Err(Error::ExtrapolationUnstable { .. })
        ));
    }
}
