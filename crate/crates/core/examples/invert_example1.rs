//! The perturbation trichotomy `λ_n = γ_n/(1 + c/(n-1))`: full verdicts,
//! the quick test, and the explicit inverse for the invertible case.
//!
//!     cargo run --example invert_example1

use dht_lab::invertibility::residue_check;
use dht_lab::{
    example_fast_tests, inverse_apply, invertibility_verdict, make_example1, solve_generating, evaluate,
    CoefficientVector, Complex64, InvertibilityParams,
};

pub fn main() {
    let params = InvertibilityParams::default();
    for c in [0.25, 0.75, 0.5] {
        let (ns, ts) = make_example1(c, 2.0, 200).unwrap();
        let v = invertibility_verdict(&ns, &ts, &params).unwrap();
        let quick = example_fast_tests(&ns, &ts);
        let range = v.rho_exponent_range.map(|r| format!("[{:.3}, {:.3}]", r.inf, r.sup));
        println!("c = {c}: {:?} (regime {:?}, class {:?}, exponents {})", v.verdict, v.regime, v.perturbation.kind, range.unwrap_or_default());
        if let Some(a) = &v.advisory {
            println!("  advisory: {a}");
        }
        if let Some(x) = &v.oracle_crosscheck {
            println!("  sigma_min at {:?}: {:?} ({:?})", x.sizes, x.sigma_min.iter().map(|s| (s * 1e4).round() / 1e4).collect::<Vec<_>>(), x.trend);
        }
        println!("  quick test: {:?}", quick.verdict);
    }

    let (ns, ts) = make_example1(0.25, 2.0, 50).unwrap();
    let gs = solve_generating(&ns, &ts, 1e-8).unwrap();
    println!("generating solve: residual {:.2e}, condition {:.2e}", gs.residual, gs.condition);
    let worst = residue_check(&gs).iter().map(|r| r.relative_error).fold(0.0, f64::max);
    println!("residue identity: worst relative error {worst:.2e}");

    // recover a from its values b_j = (H a)(λ_j)
    let a = CoefficientVector::new((0..ns.len()).map(|k| Complex64::new(1.0 / (k + 1) as f64, 0.0)).collect());
    let b: Vec<Complex64> = ts.points().iter().map(|l| evaluate(&ns, &a, l).unwrap()).collect();
    let back = inverse_apply(&gs, &b).unwrap();
    let err = back.entries.iter().zip(&a.entries).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    println!("inverse_apply round trip: max error {err:.2e}");
}
