//! Two-condition boundedness check of discrete measures against the
//! singular-value oracle.
//!
//!     cargo run --example bounded_measure

use dht_lab::boundedness::{theorem1_check, DEFAULT_GROWTH_TOL};
use dht_lab::generators::{random_atoms, MeasureKind};
use dht_lab::{convergence_study, discrete_measure, make_geometric, measure_operator, Complex64, Point, WeightLaw};

pub fn main() {
    let ns = make_geometric(2.0, Complex64::new(1.0, 0.0), WeightLaw::Constant { value: 1.0 }, 20).unwrap();
    let mu = discrete_measure(&[(Point::real(3.0), 1.0)], &ns).unwrap();
    let r = theorem1_check(&ns, &mu, DEFAULT_GROWTH_TOL).unwrap();
    println!("single atom at 3: S1 = {}, S2 = {:.6}, {:?}", r.condition_local, r.condition_a2, r.verdict);

    let full = make_geometric(2.0, Complex64::new(1.0, 0.0), WeightLaw::Constant { value: 1.0 }, 200).unwrap();
    println!("{:<14} {:>10} {:>10} {:>12} {:>10}  verdict / oracle", "kind", "S1", "S2", "sigma_max^2", "ratio");
    for kind in [MeasureKind::Bounded, MeasureKind::GlobalGrowth, MeasureKind::LocalGrowth] {
        let atoms = random_atoms(&full, kind, 7);
        let mu = discrete_measure(&atoms, &full).unwrap();
        let r = theorem1_check(&full, &mu, DEFAULT_GROWTH_TOL).unwrap();
        let study = convergence_study(
            |k| {
                let sub = full.prefix(k);
                measure_operator(&sub, &mu.restrict(k, &full))
            },
            &[25, 50, 100, 200],
        )
        .unwrap();
        let s2 = study.sigma_max.last().unwrap().powi(2);
        let s = r.condition_local.max(r.condition_a2);
        println!(
            "{:<14} {:>10.4} {:>10.4} {:>12.4} {:>10.4}  {:?} / {:?}",
            format!("{kind:?}"),
            r.condition_local,
            r.condition_a2,
            s2,
            s2 / s,
            r.verdict,
            study.max_trend
        );
    }
}
