//! Zero/V/P classification and the constructive splitting into surjective pieces.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundedness::{theorem4_check, Verdict, DEFAULT_COUNT_CAP, DEFAULT_GROWTH_TOL};
use crate::cumulants::{cumulants, TailPolicy};
use crate::error::{Error, Result};
use crate::nodes::WeightedNodeSet;
use crate::oracle::{convergence_study, ConvergenceStudy};
use crate::target::TargetSystem;
use crate::transform::{truncated_operator, TruncatedOperator};

pub const TIE_SLACK: f64 = 1e-12;

/// Lower bound on `σ_min²/min_j ‖row_j‖²` demanded by the Gram certificate.
pub const CERTIFICATE_FLOOR: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassKind {
    Zero,
    V,
    P,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedPoint {
    /// Position in the sorted target system.
    pub position: usize,
    /// Zero-based annulus position.
    pub annulus: usize,
    pub kind: ClassKind,
    /// `v_n/|λ-γ_n|²`.
    pub local: f64,
    /// `V_n/|λ|²`.
    pub v_term: f64,
    /// `P_n`.
    pub p_term: f64,
    /// `V_n`, for dyadic blocking.
    pub v_cum: f64,
    /// `log₂ P_n` (`-∞` when the truncated tail is empty).
    pub log2_p: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitVerdict {
    pub entries: Vec<ClassifiedPoint>,
}

impl SplitVerdict {
    pub fn members(&self, kind: ClassKind) -> Vec<usize> {
        self.entries
            .iter()
            .filter(|e| e.kind == kind)
            .map(|e| e.position)
            .collect()
    }

    /// Entries at the given target positions.
    pub fn restricted(&self, positions: &[usize]) -> SplitVerdict {
        SplitVerdict {
            entries: positions.iter().map(|&p| self.entries[p]).collect(),
        }
    }
}

/// Tail sums scaled by the node modulus: `T_n = P_n |γ_n|²`, free of overflow.
pub(crate) fn scaled_tails(ns: &WeightedNodeSet) -> Vec<f64> {
    let n = ns.len();
    let m: Vec<f64> = ns.nodes().iter().map(|g| g.norm()).collect();
    let mut t = vec![0.0; n];
    for i in (0..n.saturating_sub(1)).rev() {
        let r = m[i] / m[i + 1];
        t[i] = r * r * (ns.weights()[i + 1] + t[i + 1]);
    }
    t
}

/// Assigns every point its class, with priority zero > V > P on ties.
///
/// The three quantities are compared after multiplying by `|γ_n|²`.
pub fn classify(ns: &WeightedNodeSet, ts: &TargetSystem) -> Result<SplitVerdict> {
    ts.check_disjoint(ns)?;
    let table = cumulants(ns, &TailPolicy::HardTruncate)?;
    let tails = scaled_tails(ns);
    let entries = ts
        .points()
        .iter()
        .enumerate()
        .map(|(position, lam)| {
            let n = ns.partition().annulus_of(lam).index;
            let g = ns.nodes()[n].norm();
            let v = ns.weights()[n];
            let rl = g / lam.diff(&ns.nodes()[n]).norm();
            let rv = g / lam.norm();
            let s_local = v * rl * rl;
            let s_v = table.prefix[n] * rv * rv;
            let s_p = tails[n];
            let kind = if s_local >= s_v.max(s_p) * (1.0 - TIE_SLACK) {
                ClassKind::Zero
            } else if s_v >= s_p * (1.0 - TIE_SLACK) {
                ClassKind::V
            } else {
                ClassKind::P
            };
            let inv = 1.0 / (g * g);
            ClassifiedPoint {
                position,
                annulus: n,
                kind,
                local: s_local * inv,
                v_term: s_v * inv,
                p_term: s_p * inv,
                v_cum: table.prefix[n],
                log2_p: s_p.log2() - 2.0 * g.log2(),
            }
        })
        .collect();
    Ok(SplitVerdict { entries })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LacunarityProfile {
    pub kind: ClassKind,
    /// Points per dyadic block `⌊log₂ V_m⌋` (V-class) or `⌊-log₂ P_m⌋` (P-class).
    pub blocks: BTreeMap<i64, usize>,
    pub max_count: usize,
    /// Points whose block is undefined (`P_m = 0` at the end of the prefix).
    pub unblocked: usize,
}

/// Dyadic-block counts of the points of one class.
pub fn lacunarity_profile(verdict: &SplitVerdict, kind: ClassKind) -> LacunarityProfile {
    let mut blocks = BTreeMap::new();
    let mut unblocked = 0;
    for e in verdict.entries.iter().filter(|e| e.kind == kind) {
        let key = match kind {
            ClassKind::P => -e.log2_p,
            _ => e.v_cum.log2(),
        };
        if key.is_finite() {
            *blocks.entry(key.floor() as i64).or_insert(0) += 1;
        } else {
            unblocked += 1;
        }
    }
    LacunarityProfile {
        kind,
        max_count: blocks.values().copied().max().unwrap_or(0),
        blocks,
        unblocked,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitParameters {
    pub epsilon: f64,
    pub delta: f64,
    pub n_thin: usize,
    pub n_block: usize,
    /// Deterministic bound on the piece count: `3 · cap · (N_thin + N_block)²`.
    pub k_bound: u128,
}

impl SplitParameters {
    /// `δ = ε/16`, `N_thin = ⌈4/(δε)⌉`, `N_block = ⌈4/δ⌉`.
    pub fn new(epsilon: f64, count_cap: usize) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie in (0, 1), got {epsilon}"
            )));
        }
        let delta = epsilon / 16.0;
        let n_thin = (4.0 / (delta * epsilon)).ceil() as usize;
        let n_block = (4.0 / delta).ceil() as usize;
        let per_stage = (n_thin + n_block) as u128;
        Ok(Self {
            epsilon,
            delta,
            n_thin,
            n_block,
            k_bound: 3 * count_cap.max(1) as u128 * per_stage * per_stage,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Step {
    /// A whole class certified without splitting.
    Class,
    /// One within-annulus rank layer certified without thinning.
    Layer,
    /// `w > δW`, every `N_thin`-th point.
    Step1,
    /// `w ≤ δW`, every `N_block`-th block.
    Step2,
    /// `w|λ|⁻² > δQ`, every `N_thin`-th point.
    Step3,
    /// `w|λ|⁻² ≤ δQ`, every `N_block`-th block.
    Step4,
}

/// Gershgorin bound on the Gram matrix `G = M Mᵀ*` of a piece:
/// `σ_min² ≥ min_j G_jj · (1 - interaction)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// `max_j Σ_{l≠j} |G_jl|/√(G_jj G_ll)`.
    pub interaction: f64,
    pub min_diagonal: f64,
    /// Certified lower bound on `σ_min²` (may be negative, i.e. void).
    pub sigma_min_sq_bound: f64,
    pub certified: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    /// Positions in the sorted target system, increasing.
    pub positions: Vec<usize>,
    pub class: ClassKind,
    pub layer: usize,
    pub step: Step,
    pub certificate: Certificate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeichtingerSplit {
    pub pieces: Vec<Piece>,
    pub parameters: SplitParameters,
}

impl FeichtingerSplit {
    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }
}

/// Certificate of the rows `positions` against all nodes.
pub fn certify(op: &TruncatedOperator, positions: &[usize]) -> Certificate {
    let cols = op.cols();
    let rows = DMatrix::from_fn(positions.len(), cols, |j, n| op.matrix()[(positions[j], n)]);
    gram_certificate(&rows)
}

fn gram_certificate(rows: &DMatrix<Complex64>) -> Certificate {
    let j = rows.nrows();
    if j == 0 {
        return Certificate {
            interaction: 0.0,
            min_diagonal: f64::INFINITY,
            sigma_min_sq_bound: f64::INFINITY,
            certified: true,
        };
    }
    let g = rows * rows.adjoint();
    let d: Vec<f64> = (0..j).map(|i| g[(i, i)].re).collect();
    let interaction = (0..j)
        .map(|a| {
            (0..j)
                .filter(|&b| b != a)
                .map(|b| g[(a, b)].norm() / (d[a] * d[b]).sqrt())
                .sum::<f64>()
        })
        .fold(0.0, f64::max);
    let min_diagonal = d.iter().copied().fold(f64::INFINITY, f64::min);
    Certificate {
        interaction,
        min_diagonal,
        sigma_min_sq_bound: min_diagonal * (1.0 - interaction),
        certified: interaction <= 1.0 - CERTIFICATE_FLOOR,
    }
}

/// Every `n`-th element, as `n` offset classes; empty classes dropped.
fn thin<T: Clone>(items: &[T], n: usize) -> Vec<Vec<T>> {
    (0..n.min(items.len()))
        .map(|k| items.iter().skip(k).step_by(n).cloned().collect())
        .collect()
}

/// Consecutive blocks whose `ratio` sums reach `δ` (each below `2δ` since every ratio is `≤ δ`).
fn blocks(items: &[usize], ratio: impl Fn(usize) -> f64, delta: f64) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    let mut acc = 0.0;
    for &i in items {
        current.push(i);
        acc += ratio(i);
        if acc >= delta {
            out.push(std::mem::take(&mut current));
            acc = 0.0;
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

struct Stage<'a> {
    op: &'a TruncatedOperator,
    params: SplitParameters,
}

impl Stage<'_> {
    /// One two-stage selection: thin the points with `ratio > δ`, block the rest.
    fn select(
        &self,
        items: &[usize],
        ratio: &dyn Fn(usize) -> f64,
        steps: (Step, Step),
    ) -> Vec<(Vec<usize>, Step)> {
        let delta = self.params.delta;
        let (big, small): (Vec<usize>, Vec<usize>) = items.iter().partition(|&&i| ratio(i) > delta);
        let mut out: Vec<(Vec<usize>, Step)> = thin(&big, self.params.n_thin)
            .into_iter()
            .map(|p| (p, steps.0))
            .collect();
        let bl = blocks(&small, ratio, delta);
        for group in thin(&bl, self.params.n_block) {
            out.push((group.concat(), steps.1));
        }
        out
    }

    fn split_layer(&self, ts: &TargetSystem, layer: &[usize], class: ClassKind, index: usize) -> Vec<Piece> {
        let piece = |positions: Vec<usize>, step: Step, certificate: Certificate| {
            let mut positions = positions;
            positions.sort_unstable();
            Piece {
                positions,
                class,
                layer: index,
                step,
                certificate,
            }
        };
        let cert = certify(self.op, layer);
        if cert.certified {
            return vec![piece(layer.to_vec(), Step::Layer, cert)];
        }
        // W and Q along the layer.
        let w = ts.weights();
        let p = ts.points();
        let mut wcum = BTreeMap::new();
        let mut acc = 0.0;
        for &i in layer {
            wcum.insert(i, acc);
            acc += w[i];
        }
        let mut qcum = BTreeMap::new();
        let mut acc = 0.0;
        for &i in layer.iter().rev() {
            qcum.insert(i, acc);
            acc += w[i] / p[i].norm_sqr();
        }
        let ratio_w = |i: usize| w[i] / wcum[&i];
        let ratio_q = |i: usize| w[i] / p[i].norm_sqr() / qcum[&i];
        let mut out = Vec::new();
        for (first, step) in self.select(layer, &ratio_w, (Step::Step1, Step::Step2)) {
            let cert = certify(self.op, &first);
            if cert.certified {
                out.push(piece(first, step, cert));
                continue;
            }
            for (second, step) in self.select(&first, &ratio_q, (Step::Step3, Step::Step4)) {
                let cert = certify(self.op, &second);
                out.push(piece(second, step, cert));
            }
        }
        out
    }
}

/// Within-annulus rank layers of one class (at most one point per annulus each).
fn layers(verdict: &SplitVerdict, kind: ClassKind) -> Vec<Vec<usize>> {
    let mut rank: BTreeMap<usize, usize> = BTreeMap::new();
    let mut out: Vec<Vec<usize>> = Vec::new();
    for e in verdict.entries.iter().filter(|e| e.kind == kind) {
        let r = rank.entry(e.annulus).or_insert(0);
        if out.len() <= *r {
            out.push(Vec::new());
        }
        out[*r].push(e.position);
        *r += 1;
    }
    out
}

/// Splits a Bessel-weighted `Λ` into pieces whose adjoint is bounded below.
pub fn feichtinger_split(ns: &WeightedNodeSet, ts: &TargetSystem, epsilon: f64) -> Result<FeichtingerSplit> {
    feichtinger_split_with(ns, ts, epsilon, DEFAULT_COUNT_CAP, DEFAULT_GROWTH_TOL)
}

pub fn feichtinger_split_with(
    ns: &WeightedNodeSet,
    ts: &TargetSystem,
    epsilon: f64,
    count_cap: usize,
    growth_tol: f64,
) -> Result<FeichtingerSplit> {
    ts.require_bessel()?;
    let parameters = SplitParameters::new(epsilon, count_cap)?;
    let report = theorem4_check(ns, ts, count_cap, growth_tol)?;
    if report.verdict == Verdict::UnboundedTrend {
        return Err(Error::BoundednessPrecheckFailed(format!(
            "per-annulus count {}, V-block max {}, P-block max {}, double sum {:e}",
            report.count_max, report.v_lacunarity.max_count, report.p_lacunarity.max_count, report.eq13
        )));
    }
    let verdict = classify(ns, ts)?;
    let op = truncated_operator(ns, ts)?;
    let stage = Stage {
        op: &op,
        params: parameters,
    };
    let classes = [ClassKind::Zero, ClassKind::V, ClassKind::P];
    let per_class: Vec<Vec<Piece>> = classes
        .par_iter()
        .map(|&kind| {
            let members = verdict.members(kind);
            if members.is_empty() {
                return Vec::new();
            }
            let cert = certify(&op, &members);
            if cert.certified {
                return vec![Piece {
                    positions: members,
                    class: kind,
                    layer: 0,
                    step: Step::Class,
                    certificate: cert,
                }];
            }
            layers(&verdict, kind)
                .iter()
                .enumerate()
                .flat_map(|(i, layer)| stage.split_layer(ts, layer, kind, i))
                .collect()
        })
        .collect();
    Ok(FeichtingerSplit {
        pieces: per_class.into_iter().flatten().collect(),
        parameters,
    })
}

/// `σ` study of one piece: the piece's points in the first `K` annuli
/// against the first `K` nodes, with Bessel weights of that prefix.
pub fn piece_study(
    ns: &WeightedNodeSet,
    ts: &TargetSystem,
    piece: &Piece,
    sizes: &[usize],
) -> Result<ConvergenceStudy> {
    convergence_study(
        |k| {
            let sub = ns.prefix(k);
            let points = piece
                .positions
                .iter()
                .map(|&i| ts.points()[i])
                .filter(|p| ns.partition().annulus_of(p).index < k)
                .collect();
            truncated_operator(&sub, &TargetSystem::with_bessel_weights(&sub, points)?)
        },
        sizes,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::point::Point;

    fn geometric(n: usize, v: impl Fn(i32) -> f64) -> WeightedNodeSet {
        let pts = (1..=n as i32).map(|k| Point::real(2f64.powi(k))).collect();
        WeightedNodeSet::new(pts, (1..=n as i32).map(v).collect()).unwrap()
    }

    fn one(ns: &WeightedNodeSet, x: f64) -> ClassifiedPoint {
        let ts = TargetSystem::new(vec![Point::real(x)], vec![1.0]).unwrap();
        classify(ns, &ts).unwrap().entries[0]
    }

    #[test]
    fn zero_class_near_node() {
        let ns = geometric(20, |_| 1.0);
        let e = one(&ns, 2f64.powi(10) + 1.0);
        assert_eq!(e.kind, ClassKind::Zero);
        assert_eq!(e.local, 1.0);
    }

    #[test]
    fn v_class_midway() {
        let ns = geometric(20, |_| 1.0);
        let e = one(&ns, 1.4 * 2f64.powi(14));
        assert_eq!(e.kind, ClassKind::V);
        let unit = 4f64.powi(-14);
        assert!((e.v_term / unit - 13.0 / 1.96).abs() < 1e-9);
        assert!((e.local / unit - 1.0 / 0.16).abs() < 1e-9);
    }

    #[test]
    fn p_class_with_growing_weights() {
        let ns = geometric(40, |k| 4f64.powi(k) / (k as f64).powi(3));
        let e = one(&ns, 1.4 * 2f64.powi(20));
        assert_eq!(e.kind, ClassKind::P);
        assert!((e.local - 7.8e-4).abs() < 1e-5);
        assert!(e.p_term > e.local && e.local > e.v_term);
    }

    #[test]
    fn lacunarity_examples() {
        let ns = geometric(64, |_| 1.0);
        let empty = SplitVerdict { entries: vec![] };
        assert_eq!(lacunarity_profile(&empty, ClassKind::V).max_count, 0);
        // points in every annulus, classified V by construction of the profile input
        let all: Vec<Point> = ns.nodes().iter().map(|g| Point::real(1.4 * g.norm())).collect();
        let ts = TargetSystem::new(all, vec![1.0; 64]).unwrap();
        let mut v = classify(&ns, &ts).unwrap();
        v.entries.iter_mut().for_each(|e| e.kind = ClassKind::V);
        let prof = lacunarity_profile(&v, ClassKind::V);
        assert_eq!(prof.blocks[&4], 16);
        let sparse = SplitVerdict {
            entries: v.entries.iter().copied().filter(|e| (e.annulus + 1).is_power_of_two()).collect(),
        };
        assert!(lacunarity_profile(&sparse, ClassKind::V).max_count <= 2);
    }

    #[test]
    fn parameters() {
        let p = SplitParameters::new(0.1, 16).unwrap();
        assert_eq!(p.delta, 0.1 / 16.0);
        assert_eq!((p.n_thin, p.n_block), (6400, 640));
        assert!(SplitParameters::new(0.0, 16).is_err());
    }

    #[test]
    fn thinning_partitions() {
        let items: Vec<usize> = (0..10).collect();
        let t = thin(&items, 3);
        assert_eq!(t, vec![vec![0, 3, 6, 9], vec![1, 4, 7], vec![2, 5, 8]]);
        assert_eq!(thin(&items[..2], 5).len(), 2);
        let b = blocks(&items, |_| 0.4, 1.0);
        assert_eq!(b, vec![vec![0, 1, 2], vec![3, 4, 5], vec![6, 7, 8], vec![9]]);
    }

    #[test]
    fn empty_target_gives_no_pieces() {
        let ns = geometric(10, |_| 1.0);
        let ts = TargetSystem::with_bessel_weights(&ns, vec![]).unwrap();
        assert!(feichtinger_split(&ns, &ts, 0.1).unwrap().is_empty());
    }

    #[test]
    fn requires_bessel_and_bounded() {
        let ns = geometric(24, |_| 1.0);
        let raw = TargetSystem::new(vec![Point::real(3.0)], vec![1.0]).unwrap();
        assert_eq!(feichtinger_split(&ns, &raw, 0.1).unwrap_err(), Error::NotBesselWeighted);
        let mut pts = Vec::new();
        for (i, g) in ns.nodes().iter().enumerate() {
            for l in 0..=i {
                pts.push(Point::real(g.norm() * (1.05 + 0.01 * l as f64)));
            }
        }
        let ts = TargetSystem::with_bessel_weights(&ns, pts).unwrap();
        assert!(matches!(
            feichtinger_split(&ns, &ts, 0.1),
            Err(Error::BoundednessPrecheckFailed(_))
        ));
    }
}
