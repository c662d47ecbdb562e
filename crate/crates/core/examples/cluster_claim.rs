//! Clusters `t_n + l - 1` with growing population: the operator norm stays
//! bounded although a gap holds about log2 n target points.
//!
//!     cargo run --example cluster_claim

use dht_lab::{convergence_study, make_cluster, truncated_operator};

pub fn main() {
    let sizes = [5, 10, 20, 40];
    let study = convergence_study(
        |k| {
            let (ns, ts) = make_cluster(8.0, k)?;
            truncated_operator(&ns, &ts)
        },
        &sizes,
    )
    .unwrap();
    println!("n_max  nodes  sigma_max");
    for (k, s) in sizes.iter().zip(&study.sigma_max) {
        println!("{k:<6} {:<6} {s:.6}", k * (k + 1) / 2);
    }
    let n = study.sigma_max.len();
    let change = study.sigma_max[n - 1] / study.sigma_max[n - 2] - 1.0;
    println!("last doubling: {:+.2}% ({:?})", 100.0 * change, study.max_trend);
}
