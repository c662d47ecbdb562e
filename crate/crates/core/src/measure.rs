//! Measures described by their per-annulus moments.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::nodes::WeightedNodeSet;
use crate::point::Point;

/// Per-annulus moments `μ(Ω_n)`, `∫_{Ω_n} dμ/|z|²`, `∫_{Ω_n} dμ/|z-γ_n|²`.
#[derive(Clone, Debug, PartialEq)]
pub struct AnnulusMeasure {
    mass: Vec<f64>,
    inv_sq: Vec<f64>,
    local: Vec<f64>,
    atoms: Option<Vec<(Point, f64)>>,
    beyond_outer: Vec<usize>,
    near_boundary: Vec<usize>,
}

/// Exact moments of `Σ m_k δ_{z_k}` over the annuli of `ns`.
pub fn discrete_measure(atoms: &[(Point, f64)], ns: &WeightedNodeSet) -> Result<AnnulusMeasure> {
    let n = ns.len();
    let mut mass = vec![0.0; n];
    let mut inv_sq = vec![0.0; n];
    let mut local = vec![0.0; n];
    let mut beyond_outer = Vec::new();
    let mut near_boundary = Vec::new();
    for (k, (z, m)) in atoms.iter().enumerate() {
        if !(*m > 0.0 && m.is_finite()) {
            return Err(Error::NonPositiveWeight { index: k, value: *m });
        }
        if !z.is_finite() {
            return Err(Error::InvalidParameter(format!("atom {k} is not finite")));
        }
        if let Some(node) = ns
            .nodes()
            .iter()
            .position(|g| z.diff(g) == Complex64::new(0.0, 0.0))
        {
            return Err(Error::AtomOnNode { atom: k, node });
        }
        let hit = ns.partition().annulus_of(z);
        if hit.beyond_outer {
            beyond_outer.push(k);
        }
        if hit.near_boundary {
            near_boundary.push(k);
        }
        let i = hit.index;
        mass[i] += m;
        inv_sq[i] += m / z.norm_sqr();
        local[i] += m / z.diff(&ns.nodes()[i]).norm_sqr();
    }
    Ok(AnnulusMeasure {
        mass,
        inv_sq,
        local,
        atoms: Some(atoms.to_vec()),
        beyond_outer,
        near_boundary,
    })
}

impl AnnulusMeasure {
    /// A measure known only through its moments.
    pub fn from_moments(mass: Vec<f64>, inv_sq: Vec<f64>, local: Vec<f64>) -> Result<Self> {
        if mass.len() != inv_sq.len() || mass.len() != local.len() {
            return Err(Error::LengthMismatch {
                left: mass.len(),
                right: inv_sq.len().max(local.len()),
            });
        }
        for (index, &value) in mass.iter().chain(&inv_sq).chain(&local).enumerate() {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "moment {index} is not a nonnegative finite number ({value})"
                )));
            }
        }
        Ok(Self {
            mass,
            inv_sq,
            local,
            atoms: None,
            beyond_outer: Vec::new(),
            near_boundary: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn inv_sq(&self) -> &[f64] {
        &self.inv_sq
    }

    pub fn local(&self) -> &[f64] {
        &self.local
    }

    /// The atoms, for measures built by [`discrete_measure`].
    pub fn atoms(&self) -> Option<&[(Point, f64)]> {
        self.atoms.as_deref()
    }

    /// Atoms outside the outermost boundary (assigned to the last annulus).
    pub fn beyond_outer(&self) -> &[usize] {
        &self.beyond_outer
    }

    pub fn near_boundary(&self) -> &[usize] {
        &self.near_boundary
    }

    /// Moments of the first `n` annuli. Atoms are kept only when none lie beyond.
    pub fn restrict(&self, n: usize, ns: &WeightedNodeSet) -> AnnulusMeasure {
        let n = n.min(self.len());
        if let Some(atoms) = &self.atoms {
            let sub = ns.prefix(n);
            let kept: Vec<(Point, f64)> = atoms
                .iter()
                .filter(|(z, _)| ns.partition().annulus_of(z).index < n)
                .copied()
                .collect();
            if let Ok(m) = discrete_measure(&kept, &sub) {
                if m.beyond_outer.is_empty() {
                    return m;
                }
            }
        }
        AnnulusMeasure {
            mass: self.mass[..n].to_vec(),
            inv_sq: self.inv_sq[..n].to_vec(),
            local: self.local[..n].to_vec(),
            atoms: None,
            beyond_outer: Vec::new(),
            near_boundary: Vec::new(),
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geometric(n: usize) -> WeightedNodeSet {
        let pts = (1..=n).map(|k| Point::real(2f64.powi(k as i32))).collect();
        WeightedNodeSet::new(pts, vec![1.0; n]).unwrap()
    }

    #[test]
    fn unit_atom_at_three() {
        let ns = geometric(20);
        let mu = discrete_measure(&[(Point::real(3.0), 1.0)], &ns).unwrap();
        assert_eq!(mu.mass()[1], 1.0);
        assert_eq!(mu.inv_sq()[1], 1.0 / 9.0);
        assert_eq!(mu.local()[1], 1.0);
        assert_eq!(mu.total_mass(), 1.0);
        assert_eq!(mu.near_boundary(), &[0]);
    }

    #[test]
    fn empty_measure() {
        let mu = discrete_measure(&[], &geometric(5)).unwrap();
        assert!(mu.mass().iter().chain(mu.inv_sq()).chain(mu.local()).all(|&x| x == 0.0));
    }

    #[test]
    fn atom_on_node_rejected() {
        let err = discrete_measure(&[(Point::real(2.0), 1.0)], &geometric(5)).unwrap_err();
        assert_eq!(err, Error::AtomOnNode { atom: 0, node: 0 });
    }

    #[test]
    fn far_atom_flagged() {
        let mu = discrete_measure(&[(Point::real(1e6), 2.0)], &geometric(5)).unwrap();
        assert_eq!(mu.beyond_outer(), &[0]);
        assert_eq!(mu.mass()[4], 2.0);
    }

    #[test]
    fn restriction_matches_prefix_moments() {
        let ns = geometric(10);
        let atoms: Vec<(Point, f64)> = (1..=10)
            .map(|k| (Point::real(1.5 * 2f64.powi(k)), 1.0))
            .collect();
        let mu = discrete_measure(&atoms, &ns).unwrap();
        let r = mu.restrict(5, &ns);
        assert_eq!(r.len(), 5);
        assert_eq!(r.mass(), &mu.mass()[..5]);
    }
}
