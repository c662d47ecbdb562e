//! Boundedness verdicts from annulus statistics.

use serde::{Deserialize, Serialize};

use crate::cumulants::{cumulants, TailPolicy};
use crate::error::Result;
use crate::measure::AnnulusMeasure;
use crate::nodes::WeightedNodeSet;
use crate::oracle::last_change;
use crate::point::Point;
use crate::splitting::{classify, lacunarity_profile, ClassKind, LacunarityProfile};
use crate::target::TargetSystem;

pub const DEFAULT_GROWTH_TOL: f64 = 0.10;
pub const DEFAULT_COUNT_CAP: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Bounded,
    UnboundedTrend,
    Inconclusive,
}

impl Verdict {
    /// The weaker of two verdicts: unbounded dominates, then inconclusive.
    pub fn and(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (UnboundedTrend, _) | (_, UnboundedTrend) => UnboundedTrend,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => Bounded,
        }
    }
}

/// Verdict from a statistic at three nested prefixes.
pub fn plateau_verdict(series: &[f64], growth_tol: f64) -> Verdict {
    if series.iter().any(|x| !x.is_finite()) {
        return Verdict::UnboundedTrend;
    }
    let n = series.len();
    if n < 2 {
        return Verdict::Bounded;
    }
    let last = last_change(series[n - 2], series[n - 1]);
    if last < growth_tol {
        return Verdict::Bounded;
    }
    if n >= 3 && last_change(series[n - 3], series[n - 2]) >= growth_tol {
        Verdict::UnboundedTrend
    } else {
        Verdict::Inconclusive
    }
}

/// Nested prefix lengths `N/4, N/2, N`.
pub fn prefix_sizes(n: usize) -> [usize; 3] {
    [(n / 4).max(1), (n / 2).max(1), n]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "path", rename_all = "kebab-case")]
pub enum CheckPath {
    General,
    /// Exponentially growing `v` and exponentially decaying `v/|γ|²`.
    Exponential { q_v: f64, q_p: f64 },
    /// Summable `v`.
    Summable,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendRow {
    pub size: usize,
    pub local: f64,
    pub a2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundednessReport {
    /// `max_n v_n ∫_{Ω_n} dμ/|z-γ_n|²` (the global integral on the summable path).
    pub condition_local: f64,
    /// `max_n [V'_n Σ_{m>n} ∫_{Ω_m} dμ/|z|² + μ(Ω_1 ∪ … ∪ Ω_n) P_n]`.
    pub condition_a2: f64,
    /// 1-based indices attaining the maxima.
    pub argmax_local: usize,
    pub argmax_a2: usize,
    /// Bound on the contribution of the omitted tail of `P`; `None` if unknown.
    pub tail_slack: Option<f64>,
    pub verdict: Verdict,
    pub trend: Vec<TrendRow>,
    pub path: CheckPath,
}

struct Stats {
    local: (f64, usize),
    a2: (f64, usize),
}

fn max_with_index(values: impl Iterator<Item = f64>) -> (f64, usize) {
    values
        .enumerate()
        .fold((0.0, 0), |(m, k), (i, x)| if x > m { (x, i + 1) } else { (m, k) })
}

fn annulus_stats(ns: &WeightedNodeSet, mu: &AnnulusMeasure, policy: &TailPolicy) -> Result<Stats> {
    let n = ns.len().min(mu.len());
    let table = cumulants(ns, policy)?;
    let v = ns.weights();
    let local = max_with_index((0..n).map(|i| v[i] * mu.local()[i]));
    // Σ_{m>n} inv_sq_m
    let mut outer = vec![0.0; n];
    for i in (0..n.saturating_sub(1)).rev() {
        outer[i] = outer[i + 1] + mu.inv_sq()[i + 1];
    }
    let mut mass = 0.0;
    let a2 = max_with_index((0..n).map(|i| {
        mass += mu.mass()[i];
        table.inclusive[i] * outer[i] + mass * table.tail[i]
    }));
    Ok(Stats { local, a2 })
}

/// Both conditions over the prefix and their trend over `N/4, N/2, N`.
pub fn theorem1_check(ns: &WeightedNodeSet, mu: &AnnulusMeasure, growth_tol: f64) -> Result<BoundednessReport> {
    theorem1_check_with(ns, mu, growth_tol, &TailPolicy::HardTruncate)
}

pub fn theorem1_check_with(
    ns: &WeightedNodeSet,
    mu: &AnnulusMeasure,
    growth_tol: f64,
    policy: &TailPolicy,
) -> Result<BoundednessReport> {
    ns.require_sparse()?;
    let n = ns.len();
    let mut trend = Vec::with_capacity(3);
    let mut last = None;
    for k in prefix_sizes(n) {
        let stats = if k == n {
            annulus_stats(ns, mu, policy)?
        } else {
            annulus_stats(&ns.prefix(k), &mu.restrict(k, ns), &TailPolicy::HardTruncate)?
        };
        trend.push(TrendRow {
            size: k,
            local: stats.local.0,
            a2: stats.a2.0,
        });
        last = Some(stats);
    }
    let stats = last.expect("three prefixes");
    let table = cumulants(ns, policy)?;
    let tail_slack = table.remainder_bound.last().copied().flatten().map(|r| r * mu.total_mass());
    let verdict = plateau_verdict(&trend.iter().map(|r| r.local).collect::<Vec<_>>(), growth_tol)
        .and(plateau_verdict(&trend.iter().map(|r| r.a2).collect::<Vec<_>>(), growth_tol));
    Ok(BoundednessReport {
        condition_local: stats.local.0,
        condition_a2: stats.a2.0,
        argmax_local: stats.local.1,
        argmax_a2: stats.a2.1,
        tail_slack,
        verdict,
        trend,
        path: CheckPath::General,
    })
}

/// Detects the fast-path regime from consecutive ratios on the prefix.
pub fn detect_fast_path(ns: &WeightedNodeSet) -> Option<CheckPath> {
    let v = ns.weights();
    if v.len() < 3 {
        return None;
    }
    let ratios = |f: &dyn Fn(usize) -> f64| -> Vec<f64> {
        (1..v.len()).map(|i| f(i) / f(i - 1)).collect()
    };
    let rv = ratios(&|i| v[i]);
    let rp = ratios(&|i| v[i] / ns.nodes()[i].norm_sqr());
    let q_v = rv.iter().copied().fold(f64::INFINITY, f64::min);
    let q_p = rp.iter().copied().fold(0.0, f64::max);
    if q_v > 1.0 && q_p < 1.0 {
        return Some(CheckPath::Exponential { q_v, q_p });
    }
    if summable(v) {
        return Some(CheckPath::Summable);
    }
    None
}

/// Ratio test over the last quarter, a plateau of the partial sums, or power-law decay.
pub(crate) fn summable(v: &[f64]) -> bool {
    let n = v.len();
    if n < 4 {
        return false;
    }
    let start = n - (n / 4).max(2);
    let ratio_ok = (start + 1..n).all(|i| v[i] / v[i - 1] <= 0.9);
    let total: f64 = v.iter().sum();
    let half: f64 = v[..n / 2].iter().sum();
    // Power-law decay `v_n ~ n^α` with α clearly below -1.
    let alpha = (v[n - 1] / v[n / 2 - 1]).ln() / (n as f64 / (n / 2) as f64).ln();
    ratio_ok || (total - half) <= 1e-3 * total || alpha <= -1.1
}

fn global_local(ns: &WeightedNodeSet, atoms: &[(Point, f64)]) -> (f64, usize) {
    max_with_index(ns.nodes().iter().zip(ns.weights()).map(|(g, v)| {
        v * atoms.iter().map(|(z, m)| m / z.diff(g).norm_sqr()).sum::<f64>()
    }))
}

/// The single condition of the applicable fast path, else the full check.
pub fn corollary_fast_path(ns: &WeightedNodeSet, mu: &AnnulusMeasure, growth_tol: f64) -> Result<BoundednessReport> {
    let full = theorem1_check(ns, mu, growth_tol)?;
    let path = match detect_fast_path(ns) {
        Some(p) => p,
        None => return Ok(full),
    };
    let mut report = full;
    report.path = path;
    match path {
        CheckPath::Exponential { .. } => {
            report.verdict = plateau_verdict(
                &report.trend.iter().map(|r| r.local).collect::<Vec<_>>(),
                growth_tol,
            );
        }
        CheckPath::Summable => {
            let atoms = match mu.atoms() {
                Some(a) => a,
                None => {
                    report.path = CheckPath::General;
                    return Ok(report);
                }
            };
            let n = ns.len();
            let mut series = Vec::with_capacity(3);
            for (row, k) in report.trend.iter_mut().zip(prefix_sizes(n)) {
                let sub = ns.prefix(k);
                let kept: Vec<(Point, f64)> = atoms
                    .iter()
                    .filter(|(z, _)| ns.partition().annulus_of(z).index < k)
                    .copied()
                    .collect();
                let (s, i) = global_local(&sub, &kept);
                row.local = s;
                series.push(s);
                if k == n {
                    report.condition_local = s;
                    report.argmax_local = i;
                }
            }
            report.verdict = plateau_verdict(&series, growth_tol);
        }
        CheckPath::General => {}
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountingRow {
    pub size: usize,
    pub count_max: usize,
    pub v_block_max: usize,
    pub p_block_max: usize,
    pub eq13: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountingReport {
    /// `max_n #(Λ ∩ Ω_n)`.
    pub count_max: usize,
    pub v_lacunarity: LacunarityProfile,
    pub p_lacunarity: LacunarityProfile,
    /// `sup_n [V_n Σ_{m≥n} Σ_{Λ⁽⁰⁾∩Ω_m} |λ-γ_m|²/(v_m|λ|²) + P_n Σ_{m≤n} Σ_{Λ⁽⁰⁾∩Ω_m} |λ-γ_m|²/v_m]`.
    pub eq13: f64,
    pub count_cap: usize,
    pub trend: Vec<CountingRow>,
    pub verdict: Verdict,
}

/// Per-annulus count, V- and P-lacunarity and the zero-class double sum.
pub fn theorem4_check(
    ns: &WeightedNodeSet,
    ts: &TargetSystem,
    count_cap: usize,
    growth_tol: f64,
) -> Result<CountingReport> {
    ts.require_bessel()?;
    ns.require_sparse()?;
    let split = classify(ns, ts)?;
    let table = cumulants(ns, &TailPolicy::HardTruncate)?;
    let n = ns.len();
    let mut trend = Vec::with_capacity(3);
    for k in prefix_sizes(n) {
        let inside: Vec<usize> = (0..ts.len()).filter(|&j| split.entries[j].annulus < k).collect();
        let mut counts = vec![0usize; k];
        for &j in &inside {
            counts[split.entries[j].annulus] += 1;
        }
        let sub = split.restricted(&inside);
        let vl = lacunarity_profile(&sub, ClassKind::V);
        let pl = lacunarity_profile(&sub, ClassKind::P);
        // per-annulus zero-class sums
        let mut outer_terms = vec![0.0; k];
        let mut inner_terms = vec![0.0; k];
        for e in sub.entries.iter().filter(|e| e.kind == ClassKind::Zero) {
            let m = e.annulus;
            let lam = ts.points()[e.position];
            let d2 = lam.diff(&ns.nodes()[m]).norm_sqr();
            let vm = ns.weights()[m];
            outer_terms[m] += d2 / (vm * lam.norm_sqr());
            inner_terms[m] += d2 / vm;
        }
        let mut suffix = vec![0.0; k + 1];
        for m in (0..k).rev() {
            suffix[m] = suffix[m + 1] + outer_terms[m];
        }
        let mut inner = 0.0;
        let mut eq13: f64 = 0.0;
        for m in 0..k {
            inner += inner_terms[m];
            eq13 = eq13.max(table.prefix[m] * suffix[m] + table.tail[m] * inner);
        }
        trend.push(CountingRow {
            size: k,
            count_max: counts.iter().copied().max().unwrap_or(0),
            v_block_max: vl.max_count,
            p_block_max: pl.max_count,
            eq13,
        });
    }
    let all: Vec<usize> = (0..ts.len()).collect();
    let full = split.restricted(&all);
    let v_lacunarity = lacunarity_profile(&full, ClassKind::V);
    let p_lacunarity = lacunarity_profile(&full, ClassKind::P);
    let last = *trend.last().expect("three prefixes");

    let capped = |series: Vec<usize>| {
        if series.iter().any(|&c| c > count_cap) {
            Verdict::UnboundedTrend
        } else {
            plateau_verdict(&series.iter().map(|&c| c as f64).collect::<Vec<_>>(), growth_tol)
        }
    };
    let verdict = capped(trend.iter().map(|r| r.count_max).collect())
        .and(capped(trend.iter().map(|r| r.v_block_max).collect()))
        .and(capped(trend.iter().map(|r| r.p_block_max).collect()))
        .and(plateau_verdict(&trend.iter().map(|r| r.eq13).collect::<Vec<_>>(), growth_tol));
    Ok(CountingReport {
        count_max: last.count_max,
        v_lacunarity,
        p_lacunarity,
        eq13: last.eq13,
        count_cap,
        trend,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::measure::discrete_measure;

    fn geometric(n: usize, v: impl Fn(i32) -> f64, q: f64) -> WeightedNodeSet {
        let pts = (1..=n as i32).map(|k| Point::real(q.powi(k))).collect();
        WeightedNodeSet::new(pts, (1..=n as i32).map(v).collect()).unwrap()
    }

    #[test]
    fn unit_atom_at_three() {
        let ns = geometric(20, |_| 1.0, 2.0);
        let mu = discrete_measure(&[(Point::real(3.0), 1.0)], &ns).unwrap();
        let r = theorem1_check(&ns, &mu, DEFAULT_GROWTH_TOL).unwrap();
        assert_eq!(r.condition_local, 1.0);
        assert_eq!(r.argmax_local, 2);
        assert!((r.condition_a2 - 1.0 / 9.0).abs() < 1e-15);
        assert_eq!(r.argmax_a2, 1);
        assert_eq!(r.verdict, Verdict::Bounded);
    }

    #[test]
    fn zero_measure() {
        let ns = geometric(20, |_| 1.0, 2.0);
        let mu = discrete_measure(&[], &ns).unwrap();
        let r = theorem1_check(&ns, &mu, DEFAULT_GROWTH_TOL).unwrap();
        assert_eq!((r.condition_local, r.condition_a2), (0.0, 0.0));
        assert_eq!(r.verdict, Verdict::Bounded);
    }

    #[test]
    fn atoms_approaching_nodes() {
        let ns = geometric(24, |_| 1.0, 2.0);
        let atoms: Vec<(Point, f64)> = ns
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, g)| (g.shifted(num_complex::Complex64::new(4f64.powi(-(i as i32 + 1)), 0.0)), 1.0))
            .collect();
        let mu = discrete_measure(&atoms, &ns).unwrap();
        let r = theorem1_check(&ns, &mu, DEFAULT_GROWTH_TOL).unwrap();
        assert_eq!(r.verdict, Verdict::UnboundedTrend);
        assert_eq!(r.argmax_local, 24);
    }

    #[test]
    fn non_sparse_rejected() {
        let ns = WeightedNodeSet::new(vec![Point::real(1.0), Point::real(-1.0)], vec![1.0, 1.0]).unwrap();
        let mu = discrete_measure(&[], &ns).unwrap();
        assert!(matches!(
            theorem1_check(&ns, &mu, 0.1),
            Err(Error::SparsenessViolation { .. })
        ));
    }

    #[test]
    fn fast_path_detection() {
        let ns = geometric(20, |k| 2f64.powi(k), 4.0);
        match detect_fast_path(&ns) {
            Some(CheckPath::Exponential { q_v, q_p }) => {
                assert!((q_v - 2.0).abs() < 1e-12 && (q_p - 0.125).abs() < 1e-12)
            }
            other => panic!("{other:?}"),
        }
        let ns = geometric(20, |k| 2f64.powi(-k), 2.0);
        assert_eq!(detect_fast_path(&ns), Some(CheckPath::Summable));
        let ns = geometric(20, |_| 1.0, 2.0);
        assert_eq!(detect_fast_path(&ns), None);
        let mu = discrete_measure(&[(Point::real(3.0), 1.0)], &ns).unwrap();
        let r = corollary_fast_path(&ns, &mu, 0.1).unwrap();
        assert_eq!(r.path, CheckPath::General);
    }

    #[test]
    fn summable_global_condition() {
        let ns = geometric(20, |k| 2f64.powi(-k), 2.0);
        let mu = discrete_measure(&[(Point::real(3.0), 1.0)], &ns).unwrap();
        let r = corollary_fast_path(&ns, &mu, 0.1).unwrap();
        assert_eq!(r.path, CheckPath::Summable);
        let direct = (1..=20)
            .map(|k| 2f64.powi(-k) / (3.0 - 2f64.powi(k)).powi(2))
            .fold(0.0, f64::max);
        assert!((r.condition_local - direct).abs() < 1e-15);
        assert_eq!(r.verdict, Verdict::Bounded);
    }

    #[test]
    fn verdict_rules() {
        assert_eq!(plateau_verdict(&[1.0, 2.0, 2.05], 0.1), Verdict::Bounded);
        assert_eq!(plateau_verdict(&[1.0, 2.0, 4.0], 0.1), Verdict::UnboundedTrend);
        assert_eq!(plateau_verdict(&[1.0, 1.0, 4.0], 0.1), Verdict::Inconclusive);
        assert_eq!(plateau_verdict(&[1.0, f64::INFINITY, 4.0], 0.1), Verdict::UnboundedTrend);
    }

    #[test]
    fn counting_unit_shift() {
        let ns = geometric(40, |_| 1.0, 2.0);
        let one = num_complex::Complex64::new(1.0, 0.0);
        let pts: Vec<Point> = (4..40).map(|i| ns.nodes()[i].shifted(one)).collect();
        let ts = TargetSystem::with_bessel_weights(&ns, pts).unwrap();
        let r = theorem4_check(&ns, &ts, DEFAULT_COUNT_CAP, DEFAULT_GROWTH_TOL).unwrap();
        assert_eq!(r.count_max, 1);
        assert_eq!((r.v_lacunarity.max_count, r.p_lacunarity.max_count), (0, 0));
        assert!(r.eq13 < 0.2);
        assert_eq!(r.verdict, Verdict::Bounded);
    }

    #[test]
    fn counting_empty_and_unflagged() {
        let ns = geometric(10, |_| 1.0, 2.0);
        let ts = TargetSystem::with_bessel_weights(&ns, vec![]).unwrap();
        let r = theorem4_check(&ns, &ts, 16, 0.1).unwrap();
        assert_eq!((r.count_max, r.eq13, r.verdict), (0, 0.0, Verdict::Bounded));
        let raw = TargetSystem::new(vec![Point::real(3.0)], vec![1.0]).unwrap();
        assert_eq!(theorem4_check(&ns, &raw, 16, 0.1).unwrap_err(), Error::NotBesselWeighted);
    }

    #[test]
    fn counting_growing_counts() {
        let ns = geometric(40, |_| 1.0, 2.0);
        let mut pts = Vec::new();
        for (i, g) in ns.nodes().iter().enumerate() {
            for l in 0..=i {
                pts.push(Point::real(g.norm() * (1.05 + 0.01 * l as f64)));
            }
        }
        let ts = TargetSystem::with_bessel_weights(&ns, pts).unwrap();
        let r = theorem4_check(&ns, &ts, 16, 0.1).unwrap();
        assert_eq!(r.verdict, Verdict::UnboundedTrend);
        assert_eq!(r.count_max, 40);
    }
}
