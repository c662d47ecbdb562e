//! Bessel weights of a target system, the truncated operator and its
//! witness lower bounds.
//!
//!     cargo run --example bessel_weights

use dht_lab::{evaluate, make_example1, truncated_operator, witness_lower_bounds, CoefficientVector, Complex64, Point};

pub fn main() {
    let (ns, ts) = make_example1(0.25, 2.0, 40).unwrap();
    println!("j   |lambda_j|            w_j");
    for j in 0..6 {
        println!("{:<3} {:<21} {:.6e}", j + 1, ts.points()[j].norm(), ts.weights()[j]);
    }

    // H a at a point off the nodes, for a = δ_1
    let mut a = vec![Complex64::new(0.0, 0.0); ns.len()];
    a[0] = Complex64::new(1.0, 0.0);
    let z = Point::real(3.0);
    println!("H δ_1 (3) = {}", evaluate(&ns, &CoefficientVector::new(a), &z).unwrap());

    let op = truncated_operator(&ns, &ts).unwrap();
    let s = op.singular_summary().unwrap();
    let w = witness_lower_bounds(&ns, &ts).unwrap();
    println!("{}x{} operator: sigma_max = {:.6}, sigma_min = {:.6}", op.rows(), op.cols(), s.max, s.min);
    println!("best witness lower bound = {:.6} (<= sigma_max)", w.best());
}
