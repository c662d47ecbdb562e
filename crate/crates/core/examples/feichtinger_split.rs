//! Splitting three points per annulus into pieces whose adjoint is bounded
//! below, each with a Gram certificate and a truncation study.
//!
//!     cargo run --example feichtinger_split

use dht_lab::make_three_per_annulus;
use dht_lab::splitting::{classify, feichtinger_split, piece_study, ClassKind};

pub fn main() {
    let (ns, ts) = make_three_per_annulus(2.0, 60).unwrap();
    let classes = classify(&ns, &ts).unwrap();
    for kind in [ClassKind::Zero, ClassKind::V, ClassKind::P] {
        println!("{kind:?}: {} points", classes.members(kind).len());
    }
    let split = feichtinger_split(&ns, &ts, 0.1).unwrap();
    println!("K = {} pieces (bound {})", split.len(), split.parameters.k_bound);
    for (i, p) in split.pieces.iter().enumerate() {
        let study = piece_study(&ns, &ts, p, &[8, 15, 30, 60]).unwrap();
        println!(
            "piece {i}: {:?} layer {} {:?}, {} points, certified {} (sigma_min^2 >= {:.4}), sigma_min {:?} {:?}",
            p.class,
            p.layer,
            p.step,
            p.positions.len(),
            p.certificate.certified,
            p.certificate.sigma_min_sq_bound,
            study.sigma_min.iter().map(|x| (x * 1e4).round() / 1e4).collect::<Vec<_>>(),
            study.min_trend
        );
    }
}
