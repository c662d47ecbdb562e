//! Singular-value convergence across truncation sizes, driven through a
//! problem description as the CLI does it.
//!
//!     cargo run --example convergence_study

use dht_lab::{convergence_study, FamilySpec, Problem};

pub fn main() {
    for c in [0.25, 0.5, 0.75] {
        let problem = Problem::from_family(FamilySpec::Example1 { c, q: 2.0, n: 200, drop: 0 });
        let study = convergence_study(|k| problem.operator_at(k, 0), &[25, 50, 100, 200]).unwrap();
        println!("c = {c}");
        println!("  size  sigma_max  sigma_min  witness");
        for k in 0..study.sizes.len() {
            println!(
                "  {:<5} {:.6}   {:.6}   {:.6}",
                study.sizes[k], study.sigma_max[k], study.sigma_min[k], study.witness_max[k]
            );
        }
        println!("  trends: max {:?}, min {:?}", study.max_trend, study.min_trend);
    }
}
