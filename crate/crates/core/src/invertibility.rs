//! Inverse construction through the generating function, and geometric
//! invertibility verdicts for sparse node sets.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::boundedness::{plateau_verdict, prefix_sizes, summable, Verdict};
use crate::cumulants::{cumulants, TailPolicy};
use crate::error::{Error, Result};
use crate::nodes::{near_node, WeightedNodeSet, BOUNDARY_FLAG_TOL};
use crate::oracle::{classify_trend, singular_extremes, Trend, PLATEAU_TOL};
use crate::point::Point;
use crate::splitting::scaled_tails;
use crate::target::TargetSystem;
use crate::transform::{recip, truncated_operator, CoefficientVector};

pub const SOLVE_TOL: f64 = 1e-8;
pub const COND_CAP: f64 = 1e12;
pub const DEFAULT_BIG_M: f64 = 10.0;
pub const DEFAULT_EXCEPTION_CAP: usize = 4;
pub const DEFAULT_MARGIN: f64 = 0.05;

const MIN_OFFSET: i64 = -3;
const MAX_OFFSET: i64 = 4;
const MAX_BIG_M: f64 = 1e3;
/// Largest `|γ_n-λ_n|/|γ_n|` relative to `v_n/V_n` (or its tail analogue) accepted by the fast tests.
const ALIGNMENT_CAP: f64 = 10.0;
/// Largest `v_n/V_n` (resp. `v_n/(|γ_n|²P_n)`) on the probe window for a regime to count as detected.
const REGIME_RATIO: f64 = 0.1;
const RESIDUE_NODES: usize = 128;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// The vector `e` with `H e = (1, 0, 0, ...)` on a square truncation, and the
/// weights of the inverse transform built from it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratingSolution {
    pub e: Vec<Complex64>,
    /// `α_j = (Σ_m e_m v_m (λ₁-γ_m)/(λ_j-γ_m)²)^{-1}`, with `α₁ = 1`.
    pub alpha: Vec<Complex64>,
    /// `ν_n = v_n |λ₁-γ_n|² |e_n|²`.
    pub nu: Vec<f64>,
    /// `ϖ₁ = 1/w₁` and `ϖ_j = |α_j|²/w_j` for `j > 1`.
    pub varpi: Vec<f64>,
    /// `max_j |H e(λ_j) - δ_{1j}|`.
    pub residual: f64,
    /// `σ_max/σ_min` of the normalized matrix.
    pub condition: f64,
    pub nodes: Vec<Point>,
    pub node_weights: Vec<f64>,
    pub points: Vec<Point>,
    pub point_weights: Vec<f64>,
}

pub fn solve_generating(ns: &WeightedNodeSet, ts: &TargetSystem, solve_tol: f64) -> Result<GeneratingSolution> {
    solve_generating_with(ns, ts, solve_tol, COND_CAP)
}

pub fn solve_generating_with(
    ns: &WeightedNodeSet,
    ts: &TargetSystem,
    solve_tol: f64,
    cond_cap: f64,
) -> Result<GeneratingSolution> {
    if !(solve_tol > 0.0) || !(cond_cap > 1.0) {
        return Err(Error::InvalidParameter(
            "solve tolerance must be positive and the condition cap above 1".into(),
        ));
    }
    if ts.len() != ns.len() {
        return Err(Error::InvalidParameter(format!(
            "square truncation needs J = N (J = {}, N = {})",
            ts.len(),
            ns.len()
        )));
    }
    let op = truncated_operator(ns, ts)?;
    let s = op.singular_summary()?;
    let cond = s.max / s.min;
    if !(s.min > 0.0) || !cond.is_finite() {
        return Err(Error::SingularSystem);
    }
    if cond > cond_cap {
        return Err(Error::ConditionCapExceeded { cond, cap: cond_cap });
    }

    let n = ns.len();
    let m = op.matrix();
    let mut rhs = DVector::from_element(n, ZERO);
    rhs[0] = Complex64::new(ts.weights()[0].sqrt(), 0.0);
    let lu = m.clone().lu();
    let mut b = lu.solve(&rhs).ok_or(Error::SingularSystem)?;
    let r = &rhs - m * &b;
    if let Some(db) = lu.solve(&r) {
        b += db;
    }

    let gamma = ns.nodes();
    let v = ns.weights();
    let lambda = ts.points();
    let w = ts.weights();
    let e: Vec<Complex64> = b.iter().zip(v).map(|(b, v)| b / v.sqrt()).collect();
    let ev: Vec<Complex64> = e.iter().zip(v).map(|(e, v)| e * *v).collect();

    let residual = lambda
        .iter()
        .enumerate()
        .map(|(j, z)| {
            let h: Complex64 = gamma.iter().zip(&ev).map(|(g, c)| c * recip(z.diff(g))).sum();
            (h - if j == 0 { ONE } else { ZERO }).norm()
        })
        .fold(0.0, f64::max);
    if !(residual <= solve_tol) {
        return Err(Error::SingularSystem);
    }

    let l1 = lambda[0];
    let alpha: Vec<Complex64> = lambda
        .iter()
        .enumerate()
        .map(|(j, z)| {
            if j == 0 {
                return ONE;
            }
            let s: Complex64 = gamma
                .iter()
                .zip(&ev)
                .map(|(g, c)| {
                    let r = recip(z.diff(g));
                    c * l1.diff(g) * r * r
                })
                .sum();
            recip(s)
        })
        .collect();
    let nu = gamma
        .iter()
        .zip(&e)
        .zip(v)
        .map(|((g, e), v)| {
            let x = l1.diff(g).norm() * e.norm();
            v * x * x
        })
        .collect();
    let varpi = alpha
        .iter()
        .zip(w)
        .enumerate()
        .map(|(j, (a, w))| if j == 0 { 1.0 / w } else { a.norm_sqr() / w })
        .collect();

    Ok(GeneratingSolution {
        e,
        alpha,
        nu,
        varpi,
        residual,
        condition: cond,
        nodes: gamma.to_vec(),
        node_weights: v.to_vec(),
        points: lambda.to_vec(),
        point_weights: w.to_vec(),
    })
}

/// `a_n = e_n (γ_n-λ₁) Σ_j b_j α_j/(γ_n-λ_j)` for `b` supported on the target prefix.
pub fn inverse_apply(gs: &GeneratingSolution, b: &[Complex64]) -> Result<CoefficientVector> {
    if b.len() > gs.points.len() {
        return Err(Error::LengthMismatch {
            left: gs.points.len(),
            right: b.len(),
        });
    }
    let l1 = gs.points[0];
    let entries = gs
        .nodes
        .iter()
        .zip(&gs.e)
        .map(|(g, e)| {
            let d1 = g.diff(&l1);
            let s: Complex64 = b
                .iter()
                .zip(&gs.alpha)
                .zip(&gs.points)
                .enumerate()
                .map(|(j, ((b, a), l))| {
                    if j == 0 {
                        b * a
                    } else {
                        b * a * d1 * recip(g.diff(l))
                    }
                })
                .sum();
            e * s
        })
        .collect();
    Ok(CoefficientVector::new(entries))
}

/// The matrix of `inverse_apply` in normalized coordinates (`√w_j b_j ↦ √v_n a_n`),
/// i.e. the inverse of the normalized forward matrix.
pub fn inverse_matrix(gs: &GeneratingSolution) -> DMatrix<Complex64> {
    let l1 = gs.points[0];
    DMatrix::from_fn(gs.nodes.len(), gs.points.len(), |n, j| {
        let g = gs.nodes[n];
        let ratio = if j == 0 {
            ONE
        } else {
            g.diff(&l1) * recip(g.diff(&gs.points[j]))
        };
        gs.e[n] * gs.alpha[j] * ratio * (gs.node_weights[n].sqrt() / gs.point_weights[j].sqrt())
    })
}

fn phi_raw(gs: &GeneratingSolution, z: &Point) -> Complex64 {
    let s: Complex64 = gs
        .nodes
        .iter()
        .zip(&gs.e)
        .zip(&gs.node_weights)
        .map(|((g, e), v)| e * *v * recip(z.diff(g)))
        .sum();
    z.diff(&gs.points[0]) * s
}

/// `Φ(z) = (z-λ₁) Σ_n e_n v_n/(z-γ_n)`.
pub fn generating_function_eval(gs: &GeneratingSolution, z: &Point) -> Result<Complex64> {
    if let Some(node) = near_node(&gs.nodes, z) {
        return Err(Error::EvaluationAtNode { node });
    }
    Ok(phi_raw(gs, z))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidueRow {
    /// 1-based node index.
    pub n: usize,
    /// Residue of `Φ` at `γ_n` by contour quadrature.
    pub residue: Complex64,
    /// `(γ_n-λ₁) e_n v_n`.
    pub residue_exact: Complex64,
    pub relative_error: f64,
    pub nu: f64,
    /// `|Res|²/v_n`, which reproduces `ν_n`.
    pub nu_from_residue: f64,
    /// `v_n |Res|²`, the reformulation through `|Ψ'(γ_n)|^{-1} = |Res|`.
    pub nu_reformulated: f64,
}

/// Residues of `Φ` at the nodes, and the weights `ν_n` recovered from them.
pub fn residue_check(gs: &GeneratingSolution) -> Vec<ResidueRow> {
    let l1 = gs.points[0];
    (0..gs.nodes.len())
        .map(|n| {
            let g = gs.nodes[n];
            let gap = gs
                .nodes
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != n)
                .map(|(_, x)| g.diff(x).norm())
                .chain(gs.points.iter().map(|x| g.diff(x).norm()))
                .fold(f64::INFINITY, f64::min);
            let radius = if gap.is_finite() { 0.25 * gap } else { 0.25 * g.norm().max(1.0) };
            let residue = (0..RESIDUE_NODES)
                .map(|k| {
                    let d = Complex64::from_polar(radius, 2.0 * PI * k as f64 / RESIDUE_NODES as f64);
                    phi_raw(gs, &g.shifted(d)) * d
                })
                .sum::<Complex64>()
                / RESIDUE_NODES as f64;
            let v = gs.node_weights[n];
            let exact = g.diff(&l1) * gs.e[n] * v;
            let r2 = residue.norm_sqr();
            ResidueRow {
                n: n + 1,
                residue,
                residue_exact: exact,
                relative_error: (residue - exact).norm() / exact.norm(),
                nu: gs.nu[n],
                nu_from_residue: r2 / v,
                nu_reformulated: v * r2,
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "order", rename_all = "kebab-case")]
pub enum PerturbationKind {
    Exact,
    Deficiency(usize),
    Excess(usize),
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationClass {
    pub n0: i64,
    pub kind: PerturbationKind,
    /// Indices `n` with `λ_n ∉ D_n(v; M)`, including indices below 1.
    pub exceptions: Vec<i64>,
    pub m_used: f64,
}

struct Scales {
    moduli: Vec<f64>,
    prefix: Vec<f64>,
    /// `P_n |γ_n|²`.
    tails: Vec<f64>,
}

impl Scales {
    fn new(ns: &WeightedNodeSet) -> Self {
        let table = cumulants(ns, &TailPolicy::HardTruncate).expect("aligned lengths");
        Self {
            moduli: ns.nodes().iter().map(Point::norm).collect(),
            prefix: table.prefix,
            tails: scaled_tails(ns),
        }
    }

    fn log_p(&self, i: usize) -> f64 {
        self.tails[i].ln() - 2.0 * self.moduli[i].ln()
    }
}

/// `z ∈ Ω_{i+1}`, counting points on a boundary (to `1e-9` relative) for both neighbours.
fn in_annulus(ns: &WeightedNodeSet, z: &Point, i: usize) -> bool {
    let radii = ns.partition().radii();
    let r = z.norm();
    let lower = if i == 0 { 0.0 } else { radii[i - 1] };
    r >= lower * (1.0 - BOUNDARY_FLAG_TOL) && r < radii[i] * (1.0 + BOUNDARY_FLAG_TOL)
}

fn exceptions_at(ns: &WeightedNodeSet, sc: &Scales, ts: &TargetSystem, n0: i64, m: f64) -> Vec<i64> {
    let big_n = ns.len() as i64;
    let mut out = Vec::new();
    for (p, lam) in ts.points().iter().enumerate() {
        let n = n0 + p as i64;
        if n < 1 {
            out.push(n);
            continue;
        }
        if n > big_n {
            break;
        }
        let i = (n - 1) as usize;
        let member = in_annulus(ns, lam, i) && {
            let g = sc.moduli[i];
            let rl = g / lam.diff(&ns.nodes()[i]).norm();
            let rv = g / lam.norm();
            m * ns.weights()[i] * rl * rl >= (sc.prefix[i] * rv * rv).max(sc.tails[i])
        };
        if !member {
            out.push(n);
        }
    }
    out
}

fn best_offset(ns: &WeightedNodeSet, sc: &Scales, ts: &TargetSystem, m: f64) -> (i64, Vec<i64>) {
    (MIN_OFFSET..=MAX_OFFSET)
        .map(|n0| (n0, exceptions_at(ns, sc, ts, n0, m)))
        .min_by_key(|(n0, ex)| (ex.len(), (n0 - 1).abs(), *n0))
        .expect("non-empty offset window")
}

/// Aligns `Λ` with `Γ` over offsets `-3..=4`, escalating `M` by ×10 up to `10³`
/// while that removes exceptions.
pub fn classify_perturbation(
    ns: &WeightedNodeSet,
    ts: &TargetSystem,
    big_m: f64,
    exception_cap: usize,
) -> PerturbationClass {
    let sc = Scales::new(ns);
    let mut m = big_m;
    let (mut n0, mut exceptions) = best_offset(ns, &sc, ts, m);
    while !exceptions.is_empty() && m * 10.0 <= MAX_BIG_M * (1.0 + 1e-12) {
        let (n1, ex1) = best_offset(ns, &sc, ts, m * 10.0);
        if ex1.len() >= exceptions.len() {
            break;
        }
        m *= 10.0;
        n0 = n1;
        exceptions = ex1;
    }
    let kind = if exceptions.len() > exception_cap {
        PerturbationKind::None
    } else if n0 == 1 {
        PerturbationKind::Exact
    } else if n0 > 1 {
        PerturbationKind::Deficiency((n0 - 1) as usize)
    } else {
        PerturbationKind::Excess((1 - n0) as usize)
    };
    PerturbationClass {
        n0,
        kind,
        exceptions,
        m_used: m,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentRange {
    pub inf: f64,
    pub sup: f64,
    pub pairs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoProfile {
    pub n0: i64,
    /// 1-based indices `n` at which `ϱ_n` is defined.
    pub indices: Vec<usize>,
    pub log_rho: Vec<f64>,
    /// `log(ϱ_m/ϱ_n)/log(V_m/V_n)` over pairs with `V_m ≥ 2V_n`, `n ≥ N/4`.
    pub v_exponent: Option<ExponentRange>,
    /// `log(ϱ_m/ϱ_n)/log(P_m/P_n)` over pairs with `P_n ≥ 2P_m`, `n ≥ N/4`, `m ≤ 3N/4`.
    pub p_exponent: Option<ExponentRange>,
    /// `max |log ϱ_n|/n` over the second half of the indices.
    pub growth_diagnostic: f64,
}

fn exponent_range(
    idx: &[usize],
    log_rho: &[f64],
    log_c: impl Fn(usize) -> Option<f64>,
    keep: impl Fn(f64) -> bool,
    first: usize,
    last: usize,
) -> Option<ExponentRange> {
    let mut out: Option<ExponentRange> = None;
    let pts: Vec<(f64, f64)> = idx
        .iter()
        .zip(log_rho)
        .filter(|(n, _)| **n >= first && **n <= last)
        .filter_map(|(n, r)| log_c(*n).map(|c| (c, *r)))
        .collect();
    for a in 0..pts.len() {
        for b in a + 1..pts.len() {
            let dc = pts[b].0 - pts[a].0;
            if !keep(dc) {
                continue;
            }
            let e = (pts[b].1 - pts[a].1) / dc;
            let r = out.get_or_insert(ExponentRange {
                inf: e,
                sup: e,
                pairs: 0,
            });
            r.inf = r.inf.min(e);
            r.sup = r.sup.max(e);
            r.pairs += 1;
        }
    }
    out
}

/// `log ϱ_n = Σ_{m=max(1,n₀)}^{n} 2 log(|γ_m|/|λ_m|)` with `λ` indexed from `n₀`.
pub fn rho_profile(ns: &WeightedNodeSet, ts: &TargetSystem, n0: i64) -> RhoProfile {
    let sc = Scales::new(ns);
    let big_n = ns.len();
    let start = n0.max(1);
    let last = (big_n as i64).min(n0 + ts.len() as i64 - 1);
    let mut indices = Vec::new();
    let mut log_rho = Vec::new();
    let mut acc = 0.0;
    for n in start..=last {
        let lam = ts.points()[(n - n0) as usize];
        acc += 2.0 * (sc.moduli[(n - 1) as usize].ln() - lam.norm().ln());
        indices.push(n as usize);
        log_rho.push(acc);
    }
    let first = (big_n / 4).max(1);
    let ln2 = std::f64::consts::LN_2;
    let v_exponent = exponent_range(
        &indices,
        &log_rho,
        |n| Some(sc.prefix[n - 1].ln()),
        |d| d >= ln2,
        first,
        big_n,
    );
    let p_exponent = exponent_range(
        &indices,
        &log_rho,
        |n| (sc.tails[n - 1] > 0.0).then(|| sc.log_p(n - 1)),
        |d| d <= -ln2,
        first,
        big_n - big_n / 4,
    );
    let half = indices.len() / 2;
    let growth_diagnostic = indices[half..]
        .iter()
        .zip(&log_rho[half..])
        .map(|(n, r)| r.abs() / *n as f64)
        .fold(0.0, f64::max);
    RhoProfile {
        n0,
        indices,
        log_rho,
        v_exponent,
        p_exponent,
        growth_diagnostic,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    VRegime,
    PRegime,
    Summable,
    None,
}

/// Regime from the weights: summable first, then `v_n/V_n → 0` with `V` growing,
/// then `v_n/(|γ_n|²P_n) → 0`, probed on the window `N/2 ≤ n < 3N/4`.
pub fn detect_regime(ns: &WeightedNodeSet) -> Regime {
    let n = ns.len();
    if n < 8 {
        return Regime::None;
    }
    if summable(ns.weights()) {
        return Regime::Summable;
    }
    let sc = Scales::new(ns);
    let v = ns.weights();
    let window = n / 2..(3 * n) / 4;
    let v_ratio = window.clone().map(|i| v[i] / sc.prefix[i]).fold(0.0, f64::max);
    if v_ratio <= REGIME_RATIO && sc.prefix[n - 1] >= 1.5 * sc.prefix[n / 2] {
        return Regime::VRegime;
    }
    let p_ratio = window.map(|i| v[i] / sc.tails[i]).fold(0.0, f64::max);
    if p_ratio <= REGIME_RATIO {
        return Regime::PRegime;
    }
    Regime::None
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvertibilityParams {
    pub big_m: f64,
    pub exception_cap: usize,
    pub margin: f64,
    pub growth_tol: f64,
    /// Square truncation sizes for the oracle cross-check; `None` gives `N/8, N/4, N/2, N`.
    pub sizes: Option<Vec<usize>>,
    pub oracle: bool,
}

impl Default for InvertibilityParams {
    fn default() -> Self {
        Self {
            big_m: DEFAULT_BIG_M,
            exception_cap: DEFAULT_EXCEPTION_CAP,
            margin: DEFAULT_MARGIN,
            growth_tol: PLATEAU_TOL,
            sizes: None,
            oracle: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupStatistic {
    /// `supVQ`, `supWP` or `supQ`.
    pub name: String,
    pub sizes: Vec<usize>,
    pub values: Vec<f64>,
    pub trend: Verdict,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    Invertible,
    InvertibleAfterAdjustingOnePoint,
    NotInvertible,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleCrosscheck {
    pub sizes: Vec<usize>,
    pub sigma_max: Vec<f64>,
    pub sigma_min: Vec<f64>,
    pub trend: Trend,
    /// Whether the `σ_min` trend matches the verdict; `None` when inconclusive.
    pub consistent: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvertibilityVerdict {
    pub regime: Regime,
    pub statistic: SupStatistic,
    pub perturbation: PerturbationClass,
    pub rho: RhoProfile,
    pub rho_exponent_range: Option<ExponentRange>,
    pub verdict: Decision,
    pub advisory: Option<String>,
    pub oracle_crosscheck: Option<OracleCrosscheck>,
    pub notes: Vec<String>,
}

/// `Q` aligned with node indices: `Q_n = Σ_{λ index m > n} w_m/|λ_m|²`.
fn aligned_q(ns: &WeightedNodeSet, ts: &TargetSystem, n0: i64) -> Vec<f64> {
    let j = ts.len();
    let mut suffix = vec![0.0; j + 1];
    for p in (0..j).rev() {
        let r = ts.weights()[p].sqrt() / ts.points()[p].norm();
        suffix[p] = suffix[p + 1] + r * r;
    }
    (1..=ns.len() as i64)
        .map(|n| suffix[(n - n0 + 1).clamp(0, j as i64) as usize])
        .collect()
}

/// `W_n P_n` with `W_n = Σ_{λ index m < n} w_m`, accumulated relative to `|γ_n|²`.
fn aligned_wp(ns: &WeightedNodeSet, ts: &TargetSystem, n0: i64, sc: &Scales) -> Vec<f64> {
    let mut out = Vec::with_capacity(ns.len());
    // A = W_n/|γ_n|²
    let mut a = 0.0;
    let mut prev = f64::NAN;
    for i in 0..ns.len() {
        let g = sc.moduli[i];
        if i > 0 {
            let r = prev / g;
            let p = i as i64 - 1 - n0;
            let fresh = if p >= 0 && (p as usize) < ts.len() {
                let s = ts.weights()[p as usize].sqrt() / g;
                s * s
            } else {
                0.0
            };
            a = a * r * r + fresh;
        }
        // Points with index below 1 sit ahead of γ₁.
        if i == 0 {
            for p in 0..ts.len() {
                if n0 + (p as i64) < 1 {
                    let s = ts.weights()[p].sqrt() / g;
                    a += s * s;
                }
            }
        }
        out.push(a * sc.tails[i]);
        prev = g;
    }
    out
}

fn sup_statistic(
    ns: &WeightedNodeSet,
    ts: &TargetSystem,
    n0: i64,
    regime: Regime,
    sc: &Scales,
    growth_tol: f64,
) -> SupStatistic {
    let (name, series) = match regime {
        Regime::PRegime => ("supWP", aligned_wp(ns, ts, n0, sc)),
        Regime::Summable => ("supQ", aligned_q(ns, ts, n0)),
        _ => {
            let q = aligned_q(ns, ts, n0);
            ("supVQ", q.iter().zip(&sc.prefix).map(|(q, v)| q * v).collect())
        }
    };
    let sizes = prefix_sizes(ns.len()).to_vec();
    let values: Vec<f64> = sizes
        .iter()
        .map(|&k| series[..k].iter().copied().fold(0.0, f64::max))
        .collect();
    SupStatistic {
        name: name.into(),
        trend: plateau_verdict(&values, growth_tol),
        sizes,
        values,
    }
}

fn decide(
    regime: Regime,
    class: &PerturbationClass,
    range: Option<ExponentRange>,
    margin: f64,
) -> (Decision, Option<String>) {
    let (case0, case1) = match regime {
        Regime::VRegime => (1, 2),
        Regime::PRegime => (1, 0),
        Regime::Summable => {
            return match class.kind {
                PerturbationKind::Exact => (Decision::Invertible, None),
                _ => (Decision::NotInvertible, None),
            }
        }
        Regime::None => return (Decision::Inconclusive, None),
    };
    let Some(r) = range else {
        return (Decision::Inconclusive, None);
    };
    let needed = if r.sup <= 1.0 - margin {
        case0
    } else if r.inf >= 1.0 + margin {
        case1
    } else {
        return (Decision::Inconclusive, None);
    };
    if class.kind == PerturbationKind::None {
        return (Decision::NotInvertible, None);
    }
    match needed - class.n0 {
        0 => (Decision::Invertible, None),
        1 => (
            Decision::InvertibleAfterAdjustingOnePoint,
            Some("drop the first target point".into()),
        ),
        -1 => (
            Decision::InvertibleAfterAdjustingOnePoint,
            Some("add one target point ahead of the first".into()),
        ),
        _ => (Decision::NotInvertible, None),
    }
}

fn default_sizes(n: usize) -> Vec<usize> {
    let mut s: Vec<usize> = [n / 8, n / 4, n / 2, n].into_iter().filter(|&k| k > 0).collect();
    s.dedup();
    s
}

/// `σ_min` of the square truncations `(γ_1..γ_K)` against the first `K` target points.
pub fn square_study(ns: &WeightedNodeSet, ts: &TargetSystem, sizes: &[usize]) -> Result<OracleCrosscheck> {
    if sizes.is_empty() || sizes.windows(2).any(|w| w[0] >= w[1]) || *sizes.last().unwrap() > ns.len() {
        return Err(Error::InvalidParameter(
            "sizes must be increasing and at most the prefix length".into(),
        ));
    }
    let rows: Vec<(f64, f64)> = sizes
        .iter()
        .map(|&k| {
            let nk = ns.prefix(k);
            let tk = TargetSystem::with_bessel_weights(&nk, ts.prefix(k).points().to_vec())?;
            let s = singular_extremes(truncated_operator(&nk, &tk)?.matrix())?;
            Ok((s.max, s.min))
        })
        .collect::<Result<_>>()?;
    let sigma_min: Vec<f64> = rows.iter().map(|r| r.1).collect();
    Ok(OracleCrosscheck {
        sizes: sizes.to_vec(),
        sigma_max: rows.iter().map(|r| r.0).collect(),
        trend: classify_trend(&sigma_min, PLATEAU_TOL),
        sigma_min,
        consistent: None,
    })
}

pub fn invertibility_verdict(
    ns: &WeightedNodeSet,
    ts: &TargetSystem,
    params: &InvertibilityParams,
) -> Result<InvertibilityVerdict> {
    ts.require_bessel()?;
    ts.check_disjoint(ns)?;
    if !(params.margin >= 0.0) || !(params.big_m > 0.0) || !(params.growth_tol > 0.0) {
        return Err(Error::InvalidParameter(
            "margin, M and growth tolerance must be positive".into(),
        ));
    }
    let sizes = match &params.sizes {
        Some(s) => s.clone(),
        None => default_sizes(ns.len()),
    };
    let analytic = || {
        let sc = Scales::new(ns);
        let regime = detect_regime(ns);
        let class = classify_perturbation(ns, ts, params.big_m, params.exception_cap);
        let rho = rho_profile(ns, ts, class.n0);
        let statistic = sup_statistic(ns, ts, class.n0, regime, &sc, params.growth_tol);
        (regime, class, rho, statistic)
    };
    let oracle = || -> Result<Option<OracleCrosscheck>> {
        if params.oracle && ts.len() >= ns.len() {
            square_study(ns, ts, &sizes).map(Some)
        } else {
            Ok(None)
        }
    };
    let ((regime, class, rho, statistic), crosscheck) = rayon::join(analytic, oracle);
    let mut crosscheck = crosscheck?;

    let mut notes = Vec::new();
    let range = match regime {
        Regime::VRegime => rho.v_exponent,
        Regime::PRegime => rho.p_exponent,
        _ => None,
    };
    if regime == Regime::None {
        notes.push(Error::RegimeUndetected.to_string());
    }
    let (mut verdict, mut advisory) = decide(regime, &class, range, params.margin);
    match statistic.trend {
        Verdict::UnboundedTrend => {
            notes.push(format!("{} grows across prefixes", statistic.name));
            verdict = Decision::NotInvertible;
            advisory = None;
        }
        Verdict::Inconclusive if verdict != Decision::NotInvertible => {
            notes.push(format!("{} trend inconclusive", statistic.name));
            verdict = Decision::Inconclusive;
            advisory = None;
        }
        _ => {}
    }
    if let Some(c) = crosscheck.as_mut() {
        c.consistent = match verdict {
            Decision::Invertible => Some(c.trend == Trend::Plateau),
            Decision::InvertibleAfterAdjustingOnePoint | Decision::NotInvertible => {
                Some(c.trend == Trend::Decay || c.trend == Trend::Growth)
            }
            Decision::Inconclusive => None,
        };
        if c.consistent == Some(false) {
            notes.push(format!("oracle sigma_min trend is {:?}", c.trend).to_lowercase());
        }
    }
    Ok(InvertibilityVerdict {
        regime,
        statistic,
        perturbation: class,
        rho,
        rho_exponent_range: range,
        verdict,
        advisory,
        oracle_crosscheck: crosscheck,
        notes,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuickVerdict {
    Invertible,
    DropOnePoint,
    AddOnePoint,
    Defer,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FastTestReport {
    pub regime: Regime,
    pub c_limsup: f64,
    pub c_liminf: f64,
    /// Largest `|γ_n-λ_n|/|γ_n|` relative to `v_n/V_n` (or `v_n/(|γ_n|²P_n)`).
    pub alignment: f64,
    pub verdict: QuickVerdict,
    pub reason: Option<String>,
}

pub fn example_fast_tests(ns: &WeightedNodeSet, ts: &TargetSystem) -> FastTestReport {
    example_fast_tests_with(ns, ts, DEFAULT_MARGIN)
}

/// `c_n = (|γ_n|/|λ_n| - 1) V_n/v_n` (V-regime) or `(|λ_n|/|γ_n| - 1) |γ_n|²P_n/v_n`
/// (P-regime) on `N/2 ≤ n ≤ 3N/4`, with `λ` indexed from the target offset.
pub fn example_fast_tests_with(ns: &WeightedNodeSet, ts: &TargetSystem, margin: f64) -> FastTestReport {
    let regime = detect_regime(ns);
    let mut report = FastTestReport {
        regime,
        c_limsup: f64::NAN,
        c_liminf: f64::NAN,
        alignment: f64::NAN,
        verdict: QuickVerdict::Defer,
        reason: None,
    };
    if !matches!(regime, Regime::VRegime | Regime::PRegime) {
        report.reason = Some(Error::RegimeUndetected.to_string());
        return report;
    }
    let sc = Scales::new(ns);
    let big_n = ns.len();
    let o = ts.offset();
    let (mut sup, mut inf, mut align) = (f64::NEG_INFINITY, f64::INFINITY, 0.0f64);
    for n in (big_n / 2).max(1)..=(3 * big_n) / 4 {
        let p = n as i64 - o;
        if p < 0 || p as usize >= ts.len() {
            continue;
        }
        let i = n - 1;
        let lam = ts.points()[p as usize];
        let g = sc.moduli[i];
        let v = ns.weights()[i];
        let scale = match regime {
            Regime::VRegime => sc.prefix[i] / v,
            _ => sc.tails[i] / v,
        };
        let c = match regime {
            Regime::VRegime => (g / lam.norm() - 1.0) * scale,
            _ => (lam.norm() / g - 1.0) * scale,
        };
        sup = sup.max(c);
        inf = inf.min(c);
        align = align.max(lam.diff(&ns.nodes()[i]).norm() / g * scale);
    }
    if !inf.is_finite() {
        report.reason = Some("no aligned indices on the probe window".into());
        return report;
    }
    report.c_limsup = sup;
    report.c_liminf = inf;
    report.alignment = align;
    if align > ALIGNMENT_CAP {
        report.reason = Some(format!("alignment violated ({align:.3} > {ALIGNMENT_CAP})"));
        return report;
    }
    let below = sup <= 0.5 - margin;
    let above = inf >= 0.5 + margin;
    use QuickVerdict::*;
    report.verdict = match (regime, o, below, above) {
        (Regime::VRegime, 1, true, _) => Invertible,
        (Regime::VRegime, 2, true, _) => AddOnePoint,
        (Regime::VRegime, 1, _, true) => DropOnePoint,
        (Regime::VRegime, 2, _, true) => Invertible,
        (Regime::PRegime, 1, true, _) => Invertible,
        (Regime::PRegime, 0, true, _) => DropOnePoint,
        (Regime::PRegime, 1, _, true) => AddOnePoint,
        (Regime::PRegime, 0, _, true) => Invertible,
        _ => Defer,
    };
    if report.verdict == Defer {
        report.reason = Some("c_n stays within the margin of 1/2 or the offset is not 0, 1 or 2".into());
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geometric(n: usize) -> WeightedNodeSet {
        WeightedNodeSet::new((1..=n).map(|k| Point::real(2f64.powi(k as i32))).collect(), vec![1.0; n]).unwrap()
    }

    fn example1(c: f64, n: usize) -> (WeightedNodeSet, TargetSystem) {
        let ns = geometric(n);
        let pts = ns
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, g)| g.scale(Complex64::new(1.0 / (1.0 + c / (i.max(1) as f64)), 0.0)))
            .collect();
        let ts = TargetSystem::with_bessel_weights(&ns, pts).unwrap();
        (ns, ts)
    }

    #[test]
    fn one_by_one_system() {
        let ns = WeightedNodeSet::new(vec![Point::real(1.0)], vec![1.0]).unwrap();
        let ts = TargetSystem::with_bessel_weights(&ns, vec![Point::real(0.0)]).unwrap();
        let gs = solve_generating(&ns, &ts, SOLVE_TOL).unwrap();
        assert!((gs.e[0] + 1.0).norm() < 1e-15);
        assert!((gs.nu[0] - 1.0).abs() < 1e-15);
        assert!((gs.varpi[0] - 1.0).abs() < 1e-15);
        let phi = generating_function_eval(&gs, &Point::real(2.0)).unwrap();
        assert!((phi + 2.0).norm() < 1e-15);
        assert_eq!(generating_function_eval(&gs, &Point::real(0.0)).unwrap(), ZERO);
        assert!(generating_function_eval(&gs, &Point::real(1.0)).is_err());
    }

    #[test]
    fn biorthogonality_and_inverse() {
        let (ns, ts) = example1(0.25, 50);
        let gs = solve_generating(&ns, &ts, SOLVE_TOL).unwrap();
        assert!(gs.residual <= 1e-8, "{}", gs.residual);
        let a = inverse_apply(&gs, &[ONE]).unwrap();
        assert_eq!(a.entries, gs.e);
        for j in [1usize, 7, 30, 49] {
            let mut b = vec![ZERO; 50];
            b[j] = ONE;
            let a = inverse_apply(&gs, &b).unwrap();
            for (k, z) in ts.points().iter().enumerate() {
                let h = crate::transform::evaluate(&ns, &a, z).unwrap();
                let want = if k == j { ONE } else { ZERO };
                assert!((h - want).norm() <= 1e-6, "j={j} k={k} {h}");
            }
        }
        assert!(inverse_apply(&gs, &vec![ONE; 51]).is_err());
    }

    #[test]
    fn inverse_matrix_inverts_forward() {
        let (ns, ts) = example1(0.25, 30);
        let gs = solve_generating(&ns, &ts, SOLVE_TOL).unwrap();
        let m = crate::transform::truncated_operator(&ns, &ts).unwrap().matrix().clone();
        let prod = inverse_matrix(&gs) * m;
        let err = (prod - DMatrix::identity(30, 30)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn generating_function_vanishes_on_targets() {
        let (ns, ts) = example1(0.25, 30);
        let gs = solve_generating(&ns, &ts, SOLVE_TOL).unwrap();
        for (j, z) in ts.points().iter().enumerate().skip(1) {
            let phi = generating_function_eval(&gs, z).unwrap();
            // (λ_j - λ₁)·H e(λ_j)
            assert!(phi.norm() <= 1e-6 * z.diff(&ts.points()[0]).norm(), "{j}");
        }
        for row in residue_check(&gs) {
            assert!(row.relative_error < 1e-8, "{row:?}");
            assert!((row.nu_from_residue / row.nu - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn deficient_targets_are_singular() {
        // Two points dropped from a square system of deficiency two become
        // near-duplicates, so the square system loses uniqueness.
        let ns = geometric(25);
        let mut pts: Vec<Point> = ns.nodes()[2..].iter().map(|g| g.shifted(Complex64::new(1.0, 0.0))).collect();
        pts.push(Point::real(2f64.powi(26)) .shifted(Complex64::new(1.0, 0.0)));
        pts.push(Point::real(2f64.powi(26)).shifted(Complex64::new(2.0, 0.0)));
        let ts = TargetSystem::with_bessel_weights(&ns, pts).unwrap();
        assert!(matches!(
            solve_generating(&ns, &ts, SOLVE_TOL),
            Err(Error::SingularSystem) | Err(Error::ConditionCapExceeded { .. })
        ));
    }

    #[test]
    fn perturbation_classes() {
        let ns = geometric(40);
        let one = Complex64::new(1.0, 0.0);
        let exact: Vec<Point> = ns.nodes().iter().map(|g| g.shifted(one)).collect();
        let ts = TargetSystem::with_bessel_weights(&ns, exact).unwrap();
        let c = classify_perturbation(&ns, &ts, DEFAULT_BIG_M, DEFAULT_EXCEPTION_CAP);
        assert_eq!((c.n0, c.kind, c.exceptions.len()), (1, PerturbationKind::Exact, 0));
        assert_eq!(c.m_used, 10.0);

        let shifted: Vec<Point> = ns.nodes()[1..].iter().map(|g| g.shifted(one)).collect();
        let ts = TargetSystem::with_bessel_weights(&ns, shifted).unwrap();
        let c = classify_perturbation(&ns, &ts, DEFAULT_BIG_M, DEFAULT_EXCEPTION_CAP);
        assert_eq!((c.n0, c.kind), (2, PerturbationKind::Deficiency(1)));

        let mut extra = vec![Point::real(0.5)];
        extra.extend(ns.nodes().iter().map(|g| g.shifted(one)));
        let ts = TargetSystem::with_bessel_weights(&ns, extra).unwrap();
        let c = classify_perturbation(&ns, &ts, DEFAULT_BIG_M, DEFAULT_EXCEPTION_CAP);
        assert_eq!((c.n0, c.kind, c.exceptions.clone()), (0, PerturbationKind::Excess(1), vec![0]));
    }

    #[test]
    fn rotated_targets_are_not_perturbations() {
        let n = 700;
        let ns = WeightedNodeSet::new((1..=n).map(|k| Point::real(1.5f64.powi(k as i32))).collect(), vec![1.0; n]).unwrap();
        let ts = TargetSystem::with_bessel_weights(&ns, ns.nodes().iter().map(|g| g.scale(Complex64::i())).collect())
            .unwrap();
        let c = classify_perturbation(&ns, &ts, DEFAULT_BIG_M, DEFAULT_EXCEPTION_CAP);
        assert_eq!(c.kind, PerturbationKind::None);
        assert_eq!(c.m_used, 1000.0);
    }

    #[test]
    fn rho_profiles() {
        let ns = geometric(20);
        let doubled: Vec<Point> = ns.nodes().iter().map(|g| g.scale(Complex64::new(2.0, 0.0))).collect();
        let ts = TargetSystem::new(doubled, vec![1.0; 20]).unwrap();
        let r = rho_profile(&ns, &ts, 1);
        for (n, lr) in r.indices.iter().zip(&r.log_rho) {
            assert!((lr + *n as f64 * 4f64.ln()).abs() < 1e-12);
        }
        let (ns, ts) = example1(0.25, 200);
        let r = rho_profile(&ns, &ts, 1);
        let e = r.v_exponent.unwrap();
        assert!(e.sup >= 0.4 && e.sup <= 0.6, "{e:?}");
        let rot = TargetSystem::new(ts.points().iter().map(|p| p.scale(Complex64::i())).collect(), ts.weights().to_vec()).unwrap();
        let r2 = rho_profile(&ns, &rot, 1);
        assert_eq!(r.log_rho, r2.log_rho);
        assert_eq!(r.v_exponent, r2.v_exponent);
    }

    #[test]
    fn regimes() {
        assert_eq!(detect_regime(&geometric(100)), Regime::VRegime);
        let n = 100;
        let sq = WeightedNodeSet::new(
            (1..=n).map(|k| Point::real(2f64.powi(k))).collect(),
            (1..=n).map(|k| 1.0 / (k * k) as f64).collect(),
        )
        .unwrap();
        assert_eq!(detect_regime(&sq), Regime::Summable);
        let p = WeightedNodeSet::new(
            (1..=n).map(|k| Point::real(2f64.powi(k))).collect(),
            (1..=n).map(|k| 4f64.powi(k) / (k as f64).powi(3)).collect(),
        )
        .unwrap();
        assert_eq!(detect_regime(&p), Regime::PRegime);
        assert_eq!(detect_regime(&geometric(4)), Regime::None);
    }

    #[test]
    fn example1_verdicts() {
        let params = InvertibilityParams {
            oracle: false,
            ..Default::default()
        };
        let (ns, ts) = example1(0.25, 200);
        let v = invertibility_verdict(&ns, &ts, &params).unwrap();
        assert_eq!(v.regime, Regime::VRegime);
        assert_eq!(v.verdict, Decision::Invertible, "{v:?}");
        assert_eq!(example_fast_tests(&ns, &ts).verdict, QuickVerdict::Invertible);

        let (ns, ts) = example1(0.75, 200);
        let v = invertibility_verdict(&ns, &ts, &params).unwrap();
        assert_eq!(v.verdict, Decision::InvertibleAfterAdjustingOnePoint, "{v:?}");
        assert_eq!(v.advisory.as_deref(), Some("drop the first target point"));
        assert_eq!(example_fast_tests(&ns, &ts).verdict, QuickVerdict::DropOnePoint);
        let dropped = ts.without_first();
        let v = invertibility_verdict(&ns, &dropped, &params).unwrap();
        assert_eq!(v.perturbation.kind, PerturbationKind::Deficiency(1));
        assert_eq!(v.verdict, Decision::Invertible);
        assert_eq!(example_fast_tests(&ns, &dropped).verdict, QuickVerdict::Invertible);

        let (ns, ts) = example1(0.5, 200);
        let v = invertibility_verdict(&ns, &ts, &params).unwrap();
        assert_eq!(v.verdict, Decision::Inconclusive);
        let e = v.rho_exponent_range.unwrap();
        assert!(e.inf < 1.05 && e.sup > 0.95);
        assert_eq!(example_fast_tests(&ns, &ts).verdict, QuickVerdict::Defer);
    }

    #[test]
    fn identity_like_targets() {
        let ns = geometric(100);
        let ts = TargetSystem::with_bessel_weights(
            &ns,
            ns.nodes().iter().map(|g| g.scale(Complex64::new(1.0, 1e-6))).collect(),
        )
        .unwrap();
        assert_eq!(example_fast_tests(&ns, &ts).verdict, QuickVerdict::Invertible);
    }

    #[test]
    fn verdict_requires_bessel_weights() {
        let ns = geometric(10);
        let ts = TargetSystem::new(vec![Point::real(3.0)], vec![1.0]).unwrap();
        assert_eq!(
            invertibility_verdict(&ns, &ts, &InvertibilityParams::default()).unwrap_err(),
            Error::NotBesselWeighted
        );
    }
}
