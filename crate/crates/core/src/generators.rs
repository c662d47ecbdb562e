//! Constructors for the standard example families, and the JSON problem schema.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{discrete_measure, AnnulusMeasure};
use crate::nodes::WeightedNodeSet;
use crate::point::Point;
use crate::target::TargetSystem;
use crate::transform::{measure_operator, truncated_operator, TruncatedOperator};

/// Default first cluster centre; keeps every `t_n - 2^s` positive.
pub const DEFAULT_T1: f64 = 64.0;

/// Phase used by `make_example1` when `c = 0` would put `λ_n` on `γ_n`.
pub const ZERO_C_PHASE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum WeightLaw {
    /// `v_n = value`.
    Constant { value: f64 },
    /// `v_n = n^α`.
    Power { alpha: f64 },
    /// `v_n = ratioⁿ`.
    Geometric { ratio: f64 },
    /// `v_n = ratioⁿ n^α`.
    Mixed { ratio: f64, alpha: f64 },
}

impl WeightLaw {
    pub fn weight(&self, n: usize) -> f64 {
        let x = n as f64;
        match *self {
            WeightLaw::Constant { value } => value,
            WeightLaw::Power { alpha } => x.powf(alpha),
            WeightLaw::Geometric { ratio } => ratio.powi(n as i32),
            WeightLaw::Mixed { ratio, alpha } => ratio.powi(n as i32) * x.powf(alpha),
        }
    }
}

fn check_ratio(q: f64) -> Result<()> {
    if q > 1.0 && q.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidRatio(q))
    }
}

/// `γ_n = a qⁿ` for `n = 1..=N` with weights from `law`.
pub fn make_geometric(q: f64, a: Complex64, law: WeightLaw, n: usize) -> Result<WeightedNodeSet> {
    check_ratio(q)?;
    if a == Complex64::new(0.0, 0.0) {
        return Err(Error::InvalidParameter("scale a must be nonzero".into()));
    }
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let points = (1..=n).map(|k| Point::new(a * q.powi(k as i32))).collect();
    let weights = (1..=n).map(|k| law.weight(k)).collect();
    WeightedNodeSet::new(points, weights)
}

/// `γ_n = qⁿ`, `v ≡ 1`, `λ_n = γ_n/(1 + c v_n/max(1, V_n))` with Bessel weights.
///
/// For `c = 0` the targets are `γ_n e^{i·10⁻⁶}` instead.
pub fn make_example1(c: f64, q: f64, n: usize) -> Result<(WeightedNodeSet, TargetSystem)> {
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::InvalidParameter(format!("c must be nonnegative, got {c}")));
    }
    let ns = make_geometric(q, Complex64::new(1.0, 0.0), WeightLaw::Constant { value: 1.0 }, n)?;
    let points = ns
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, g)| {
            if c == 0.0 {
                g.scale(Complex64::from_polar(1.0, ZERO_C_PHASE))
            } else {
                g.scale(Complex64::new(1.0 / (1.0 + c / (i.max(1) as f64)), 0.0))
            }
        })
        .collect();
    let ts = TargetSystem::with_bessel_weights(&ns, points)?;
    Ok((ns, ts))
}

pub fn make_cluster(t_ratio: f64, n_max: usize) -> Result<(WeightedNodeSet, TargetSystem)> {
    make_cluster_with(t_ratio, n_max, DEFAULT_T1)
}

fn floor_log2(n: usize) -> u32 {
    usize::BITS - 1 - n.leading_zeros()
}

/// Clusters `γ_{n,l} = t_n + l - 1` (`1 ≤ l ≤ n`, `v ≡ 1`) with `t_n = t₁ t_ratio^{n-1}`,
/// and targets `λ_{n,s} = t_n - 2ˢ` for `0 ≤ s ≤ ⌊log₂ n⌋`, Bessel-weighted.
///
/// Points are anchored at `t_n`, so in-cluster gaps stay exact at any scale.
pub fn make_cluster_with(t_ratio: f64, n_max: usize, t1: f64) -> Result<(WeightedNodeSet, TargetSystem)> {
    check_ratio(t_ratio)?;
    if n_max == 0 {
        return Err(Error::EmptyInput);
    }
    if !(t1 > 0.0) || !t1.is_finite() {
        return Err(Error::InvalidParameter(format!("t1 must be positive, got {t1}")));
    }
    let mut nodes = Vec::new();
    let mut targets = Vec::new();
    let mut prev_top = f64::NEG_INFINITY;
    for n in 1..=n_max {
        let t = t1 * t_ratio.powi(n as i32 - 1);
        let lowest = t - 2f64.powi(floor_log2(n) as i32);
        if !(lowest > 0.0) || lowest <= prev_top || !t.is_finite() {
            return Err(Error::ClusterOverlap { cluster: n });
        }
        prev_top = t + (n - 1) as f64;
        let anchor = Complex64::new(t, 0.0);
        nodes.extend((0..n).map(|l| Point::anchored(anchor, Complex64::new(l as f64, 0.0))));
        targets.extend(
            (0..=floor_log2(n)).map(|s| Point::anchored(anchor, Complex64::new(-2f64.powi(s as i32), 0.0))),
        );
    }
    let k = nodes.len();
    let ns = WeightedNodeSet::new(nodes, vec![1.0; k])?.mark_sparse_exempt();
    let ts = TargetSystem::with_bessel_weights(&ns, targets)?;
    Ok((ns, ts))
}

/// Geometric nodes (`q`, `v ≡ 1`) with targets `γ_n - 1`, `γ_n + 1`, `γ_n + 2` for `n ≥ 3`.
pub fn make_three_per_annulus(q: f64, n: usize) -> Result<(WeightedNodeSet, TargetSystem)> {
    let ns = make_geometric(q, Complex64::new(1.0, 0.0), WeightLaw::Constant { value: 1.0 }, n)?;
    let points = ns
        .nodes()
        .iter()
        .skip(2)
        .flat_map(|g| [-1.0, 1.0, 2.0].map(|d| g.shifted(Complex64::new(d, 0.0))))
        .collect();
    let ts = TargetSystem::with_bessel_weights(&ns, points)?;
    Ok((ns, ts))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum OffsetLaw {
    /// `λ_n = γ_n + shift` (anchored at `γ_n`).
    Additive { shift: f64 },
    /// `λ_n = γ_n/(1 + c v_n/max(1, V_n))`.
    Relative { c: f64 },
    /// `λ_n = γ_n e^{iθ}`.
    Rotation { theta: f64 },
}

/// Geometric nodes (`q`, `v ≡ 1`) and targets `λ_n` from `law`, indexed from `n0`:
/// for `n0 > 1` the first `n0 - 1` targets are dropped, for `n0 < 1` extra points
/// `γ₁ 2^{k-2}` (`n0 ≤ k ≤ 0`) are put ahead of `λ_1`.
pub fn make_perturbation(q: f64, n: usize, law: OffsetLaw, n0: i64) -> Result<(WeightedNodeSet, TargetSystem)> {
    let ns = make_geometric(q, Complex64::new(1.0, 0.0), WeightLaw::Constant { value: 1.0 }, n)?;
    let mut points: Vec<Point> = (n0.min(1)..1)
        .map(|k| ns.nodes()[0].scale(Complex64::new(2f64.powi(k as i32 - 2), 0.0)))
        .collect();
    let start = (n0.max(1) - 1) as usize;
    points.extend(ns.nodes().iter().enumerate().skip(start).map(|(i, g)| match law {
        OffsetLaw::Additive { shift } => g.shifted(Complex64::new(shift, 0.0)),
        OffsetLaw::Relative { c } => g.scale(Complex64::new(1.0 / (1.0 + c / (i.max(1) as f64)), 0.0)),
        OffsetLaw::Rotation { theta } => g.scale(Complex64::from_polar(1.0, theta)),
    }));
    let ts = TargetSystem::with_bessel_weights(&ns, points)?.with_offset(n0);
    Ok((ns, ts))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasureKind {
    /// One atom per annulus at `ρ γ_m e^{iθ}` (`ρ ∈ [0.8, 0.9] ∪ [1.1, 1.4]`), mass `≍ 4^m/m²`.
    Bounded,
    /// As `Bounded` but with mass `≍ 4^m/m`, so the `V`-side statistic grows linearly.
    GlobalGrowth,
    /// Atoms at `γ_m(1 + m^{-3/2} e^{iθ}/2)` with mass `≍ 4^m/m²`; the local statistic grows.
    LocalGrowth,
}

impl MeasureKind {
    /// Cycles through the three kinds by seed.
    pub fn for_seed(seed: u64) -> Self {
        match seed % 3 {
            0 => MeasureKind::Bounded,
            1 => MeasureKind::GlobalGrowth,
            _ => MeasureKind::LocalGrowth,
        }
    }
}

/// Seeded atoms, one per annulus of `ns` (meant for `γ_m = 2^m`, `v ≡ 1`).
pub fn random_atoms(ns: &WeightedNodeSet, kind: MeasureKind, seed: u64) -> Vec<(Point, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ns.nodes()
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let m = (i + 1) as f64;
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            let u = rng.random_range(0.5..2.0);
            let scale = g.norm_sqr();
            match kind {
                MeasureKind::Bounded | MeasureKind::GlobalGrowth => {
                    let d: f64 = rng.random_range(0.1..0.4);
                    let rho = if rng.random_bool(0.5) { 1.0 + d } else { 1.0 - d.min(0.2) };
                    let mass = if kind == MeasureKind::Bounded {
                        u * scale / (m * m)
                    } else {
                        u * scale / m
                    };
                    (g.scale(Complex64::from_polar(rho, theta)), mass)
                }
                MeasureKind::LocalGrowth => {
                    let z = g.shifted(g.value() * Complex64::from_polar(0.5 * m.powf(-1.5), theta));
                    (z, u * scale / (m * m))
                }
            }
        })
        .collect()
}

/// Explicit node data as it appears in problem files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeData {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    #[serde(default)]
    pub sparse_exempt: bool,
}

impl NodeData {
    pub fn from_set(ns: &WeightedNodeSet) -> Self {
        Self {
            points: ns.nodes().to_vec(),
            weights: ns.weights().to_vec(),
            sparse_exempt: ns.is_sparse_exempt(),
        }
    }

    pub fn build(&self) -> Result<WeightedNodeSet> {
        let ns = WeightedNodeSet::new(self.points.clone(), self.weights.clone())?;
        Ok(if self.sparse_exempt { ns.mark_sparse_exempt() } else { ns })
    }
}

/// Explicit target data; missing weights mean Bessel weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetData {
    pub points: Vec<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default = "one")]
    pub offset: i64,
}

fn one() -> i64 {
    1
}

impl TargetData {
    /// Stores Bessel-weighted targets by their points only.
    pub fn from_system(ts: &TargetSystem) -> Self {
        Self {
            points: ts.points().to_vec(),
            weights: (!ts.is_bessel_weighted()).then(|| ts.weights().to_vec()),
            offset: ts.offset(),
        }
    }

    pub fn build(&self, ns: &WeightedNodeSet) -> Result<TargetSystem> {
        let ts = match &self.weights {
            None => TargetSystem::with_bessel_weights(ns, self.points.clone())?,
            Some(w) => TargetSystem::new(self.points.clone(), w.clone())?,
        };
        Ok(ts.with_offset(self.offset))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "measure", rename_all = "kebab-case")]
pub enum MeasureSpec {
    Atoms { atoms: Vec<(Point, f64)> },
    Random { kind: MeasureKind, seed: Option<u64> },
}

/// A generator family; the JSON generator schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum FamilySpec {
    Geometric {
        q: f64,
        #[serde(default = "unit")]
        a: Complex64,
        #[serde(default = "unit_law")]
        weights: WeightLaw,
        n: usize,
    },
    Example1 {
        c: f64,
        #[serde(default = "two")]
        q: f64,
        n: usize,
        /// Leading targets removed (the square truncation keeps `n` of the rest).
        #[serde(default)]
        drop: usize,
    },
    Cluster {
        t_ratio: f64,
        n_max: usize,
        #[serde(default = "default_t1")]
        t1: f64,
    },
    ThreePerAnnulus {
        #[serde(default = "two")]
        q: f64,
        n: usize,
    },
    Perturbation {
        #[serde(default = "two")]
        q: f64,
        n: usize,
        law: OffsetLaw,
        #[serde(default = "one")]
        n0: i64,
    },
}

fn unit() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

fn unit_law() -> WeightLaw {
    WeightLaw::Constant { value: 1.0 }
}

fn two() -> f64 {
    2.0
}

fn default_t1() -> f64 {
    DEFAULT_T1
}

/// A built family: nodes and, where the family has one, a target system.
#[derive(Clone, Debug)]
pub struct Family {
    pub nodes: WeightedNodeSet,
    pub target: Option<TargetSystem>,
}

impl FamilySpec {
    /// Size parameter: `n`, or `n_max` for clusters.
    pub fn size(&self) -> usize {
        match *self {
            FamilySpec::Geometric { n, .. }
            | FamilySpec::Example1 { n, .. }
            | FamilySpec::ThreePerAnnulus { n, .. }
            | FamilySpec::Perturbation { n, .. } => n,
            FamilySpec::Cluster { n_max, .. } => n_max,
        }
    }

    pub fn with_size(&self, k: usize) -> FamilySpec {
        let mut s = self.clone();
        match &mut s {
            FamilySpec::Geometric { n, .. }
            | FamilySpec::Example1 { n, .. }
            | FamilySpec::ThreePerAnnulus { n, .. }
            | FamilySpec::Perturbation { n, .. } => *n = k,
            FamilySpec::Cluster { n_max, .. } => *n_max = k,
        }
        s
    }

    pub fn build(&self) -> Result<Family> {
        let (nodes, target) = match *self {
            FamilySpec::Geometric { q, a, weights, n } => (make_geometric(q, a, weights, n)?, None),
            FamilySpec::Example1 { c, q, n, drop } => {
                if drop == 0 {
                    let (ns, ts) = make_example1(c, q, n)?;
                    (ns, Some(ts))
                } else {
                    let (full, ts) = make_example1(c, q, n + drop)?;
                    let ns = full.prefix(n);
                    let pts = ts.points()[drop..drop + n].to_vec();
                    let ts = TargetSystem::with_bessel_weights(&ns, pts)?.with_offset(1 + drop as i64);
                    (ns, Some(ts))
                }
            }
            FamilySpec::Cluster { t_ratio, n_max, t1 } => {
                let (ns, ts) = make_cluster_with(t_ratio, n_max, t1)?;
                (ns, Some(ts))
            }
            FamilySpec::ThreePerAnnulus { q, n } => {
                let (ns, ts) = make_three_per_annulus(q, n)?;
                (ns, Some(ts))
            }
            FamilySpec::Perturbation { q, n, law, n0 } => {
                let (ns, ts) = make_perturbation(q, n, law, n0)?;
                (ns, Some(ts))
            }
        };
        Ok(Family { nodes, target })
    }
}

/// A problem file: nodes (a family or explicit data), and optionally a target
/// system and a measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    #[serde(default = "schema_version")]
    pub schema: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<NodeData>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetData>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<MeasureSpec>,
}

fn schema_version() -> u32 {
    1
}

/// A resolved problem.
#[derive(Clone, Debug)]
pub struct Instance {
    pub nodes: WeightedNodeSet,
    pub target: Option<TargetSystem>,
    pub atoms: Option<Vec<(Point, f64)>>,
}

impl Instance {
    pub fn measure(&self) -> Result<Option<AnnulusMeasure>> {
        self.atoms
            .as_ref()
            .map(|a| discrete_measure(a, &self.nodes))
            .transpose()
    }
}

impl Instance {
    /// The measure operator if a measure is present, else the target operator.
    pub fn operator(&self) -> Result<TruncatedOperator> {
        if let Some(mu) = self.measure()? {
            return measure_operator(&self.nodes, &mu);
        }
        match &self.target {
            Some(ts) => truncated_operator(&self.nodes, ts),
            None => Err(Error::InvalidParameter(
                "problem needs a target system or a measure".into(),
            )),
        }
    }

    /// The first `k` nodes with the targets and atoms in their annuli;
    /// Bessel weights are recomputed for the prefix.
    pub fn truncated(&self, k: usize) -> Result<Instance> {
        let ns = self.nodes.prefix(k);
        let keep = |p: &Point| self.nodes.partition().annulus_of(p).index < ns.len();
        let target = match &self.target {
            None => None,
            Some(ts) => {
                let idx: Vec<usize> = (0..ts.len()).filter(|&i| keep(&ts.points()[i])).collect();
                let sub = ts.subset(&idx);
                let t = if ts.is_bessel_weighted() {
                    TargetSystem::with_bessel_weights(&ns, sub.points().to_vec())?
                } else {
                    TargetSystem::new(sub.points().to_vec(), sub.weights().to_vec())?
                };
                Some(t.with_offset(ts.offset()))
            }
        };
        let atoms = self
            .atoms
            .as_ref()
            .map(|a| a.iter().filter(|(z, _)| keep(z)).copied().collect());
        Ok(Instance {
            nodes: ns,
            target,
            atoms,
        })
    }
}

impl Problem {
    /// The operator at truncation size `k`: a family is rebuilt at that size
    /// (seeded measures regenerate identically on the shared prefix); explicit
    /// data is truncated.
    pub fn operator_at(&self, k: usize, seed: u64) -> Result<TruncatedOperator> {
        let explicit = self.target.is_some() || matches!(self.measure, Some(MeasureSpec::Atoms { .. }));
        let inst = match &self.family {
            Some(f) if !explicit => {
                let mut p = self.clone();
                p.family = Some(f.with_size(k));
                p.instantiate(seed)?
            }
            _ => self.instantiate(seed)?.truncated(k)?,
        };
        inst.operator()
    }

    pub fn from_family(family: FamilySpec) -> Self {
        Self {
            schema: 1,
            family: Some(family),
            nodes: None,
            target: None,
            measure: None,
        }
    }

    /// Resolves the problem; `seed` fills in random measures without their own seed.
    pub fn instantiate(&self, seed: u64) -> Result<Instance> {
        if self.schema != 1 {
            return Err(Error::InvalidParameter(format!("unsupported schema {}", self.schema)));
        }
        let (nodes, family_target) = match (&self.family, &self.nodes) {
            (Some(f), None) => {
                let fam = f.build()?;
                (fam.nodes, fam.target)
            }
            (None, Some(d)) => (d.build()?, None),
            _ => {
                return Err(Error::InvalidParameter(
                    "exactly one of \"family\" and \"nodes\" is required".into(),
                ))
            }
        };
        let target = match &self.target {
            Some(t) => Some(t.build(&nodes)?),
            None => family_target,
        };
        let atoms = match &self.measure {
            None => None,
            Some(MeasureSpec::Atoms { atoms }) => Some(atoms.clone()),
            Some(MeasureSpec::Random { kind, seed: s }) => Some(random_atoms(&nodes, *kind, s.unwrap_or(seed))),
        };
        Ok(Instance { nodes, target, atoms })
    }

    /// The same problem with the family and random measure written out explicitly.
    pub fn materialize(&self, seed: u64) -> Result<Problem> {
        let inst = self.instantiate(seed)?;
        Ok(Problem {
            schema: 1,
            family: None,
            nodes: Some(NodeData::from_set(&inst.nodes)),
            target: inst.target.as_ref().map(TargetData::from_system),
            measure: inst.atoms.map(|atoms| MeasureSpec::Atoms { atoms }),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_nodes() {
        let ns = make_geometric(2.0, unit(), unit_law(), 3).unwrap();
        let m: Vec<f64> = ns.nodes().iter().map(Point::norm).collect();
        assert_eq!(m, vec![2.0, 4.0, 8.0]);
        let e = make_geometric(0.5f64.exp(), unit(), unit_law(), 10).unwrap();
        for (k, g) in e.nodes().iter().enumerate() {
            let want = ((k + 1) as f64 / 2.0).exp();
            assert!((g.norm() / want - 1.0).abs() < 1e-14);
        }
        assert_eq!(make_geometric(1.0, unit(), unit_law(), 3).unwrap_err(), Error::InvalidRatio(1.0));
        assert!(make_geometric(2.0, Complex64::new(0.0, 0.0), unit_law(), 3).is_err());
        let p = make_geometric(2.0, unit(), WeightLaw::Power { alpha: -2.0 }, 4).unwrap();
        assert_eq!(p.weights(), &[1.0, 0.25, 1.0 / 9.0, 0.0625]);
    }

    #[test]
    fn example1_construction() {
        let (ns, ts) = make_example1(0.25, 2.0, 50).unwrap();
        assert!(ts.is_bessel_weighted());
        for (i, (g, l)) in ns.nodes().iter().zip(ts.points()).enumerate() {
            let ratio = l.diff(g).norm() / g.norm();
            let vv = 1.0 / (i.max(1) as f64);
            assert!(ratio <= 0.25 * vv * (1.0 + 1e-12));
        }
        let (ns, ts) = make_example1(0.0, 2.0, 10).unwrap();
        ts.check_disjoint(&ns).unwrap();
        assert!(make_example1(-1.0, 2.0, 10).is_err());
    }

    #[test]
    fn cluster_counts_and_weights() {
        let (ns, ts) = make_cluster(8.0, 1).unwrap();
        assert_eq!(ns.nodes()[0].norm(), 64.0);
        assert_eq!(ts.points()[0].norm(), 63.0);
        let (ns, ts) = make_cluster(8.0, 4).unwrap();
        assert_eq!(ns.len(), 10);
        assert_eq!(ts.len(), 1 + 2 + 2 + 3);
        assert!(ns.is_sparse_exempt());
        let (ns, ts) = make_cluster(8.0, 40).unwrap();
        assert_eq!(ns.len(), 820);
        let mut k = 0;
        for n in 1..=40usize {
            // sorted by modulus: larger s first
            for s in (0..=floor_log2(n)).rev() {
                let r = ts.weights()[k] / 2f64.powi(s as i32);
                if n >= 4 {
                    assert!((0.125..=8.0).contains(&r), "n={n} s={s} r={r}");
                }
                k += 1;
            }
        }
        assert_eq!(make_cluster_with(1.01, 3, 64.0).unwrap_err(), Error::ClusterOverlap { cluster: 2 });
        assert_eq!(make_cluster_with(8.0, 3, 1.0).unwrap_err(), Error::ClusterOverlap { cluster: 1 });
        assert_eq!(make_cluster(1.0, 3).unwrap_err(), Error::InvalidRatio(1.0));
    }

    #[test]
    fn perturbation_offsets() {
        let (_, ts) = make_perturbation(2.0, 10, OffsetLaw::Additive { shift: 1.0 }, 2).unwrap();
        assert_eq!((ts.len(), ts.offset()), (9, 2));
        let (ns, ts) = make_perturbation(2.0, 10, OffsetLaw::Additive { shift: 1.0 }, -1).unwrap();
        assert_eq!((ts.len(), ts.offset()), (12, -1));
        assert!(ts.points()[1].norm() < ns.partition().radii()[0]);
    }

    #[test]
    fn seeded_measures_are_reproducible() {
        let ns = make_geometric(2.0, unit(), unit_law(), 20).unwrap();
        for kind in [MeasureKind::Bounded, MeasureKind::GlobalGrowth, MeasureKind::LocalGrowth] {
            let a = random_atoms(&ns, kind, 7);
            assert_eq!(a, random_atoms(&ns, kind, 7));
            let mu = discrete_measure(&a, &ns).unwrap();
            assert!(mu.beyond_outer().is_empty());
            for (i, (z, _)) in a.iter().enumerate() {
                assert_eq!(ns.partition().annulus_of(z).index, i);
            }
        }
    }

    #[test]
    fn problem_round_trip() {
        let p = Problem::from_family(FamilySpec::Example1 {
            c: 0.25,
            q: 2.0,
            n: 12,
            drop: 0,
        });
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<Problem>(&json).unwrap(), p);
        let m = p.materialize(0).unwrap();
        let back: Problem = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
        let a = p.instantiate(0).unwrap();
        let b = back.instantiate(0).unwrap();
        assert_eq!(a.target.unwrap().weights(), b.target.unwrap().weights());
        let spec: FamilySpec = serde_json::from_str(r#"{"family":"cluster","t_ratio":8,"n_max":3}"#).unwrap();
        assert_eq!(spec.build().unwrap().nodes.len(), 6);
    }
}
