//! Family specs as JSON, materialized to explicit data and read back.
//!
//!     cargo run --example generate_families

use dht_lab::generators::{MeasureKind, MeasureSpec};
use dht_lab::{FamilySpec, Problem};

pub fn main() {
    let specs = [
        r#"{"family":"geometric","q":2,"n":6,"weights":{"law":"power","alpha":1.5}}"#,
        r#"{"family":"example1","c":0.25,"n":6}"#,
        r#"{"family":"cluster","t_ratio":8,"n_max":3}"#,
        r#"{"family":"three-per-annulus","n":4}"#,
        r#"{"family":"perturbation","n":6,"law":{"law":"relative","c":0.3},"n0":2}"#,
    ];
    for s in specs {
        let spec: FamilySpec = serde_json::from_str(s).unwrap();
        let fam = spec.build().unwrap();
        let targets = fam.target.as_ref().map_or(0, |t| t.len());
        println!("{s}\n  -> {} nodes, {} targets", fam.nodes.len(), targets);
    }

    let mut problem = Problem::from_family(serde_json::from_str(specs[0]).unwrap());
    problem.measure = Some(MeasureSpec::Random { kind: MeasureKind::Bounded, seed: None });
    let explicit = problem.materialize(11).unwrap();
    let json = serde_json::to_string(&explicit).unwrap();
    let back: Problem = serde_json::from_str(&json).unwrap();
    assert_eq!(back, explicit);
    println!("materialized problem ({} bytes): {}", json.len(), &json[..json.len().min(160)]);
}
