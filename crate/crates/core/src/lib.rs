//! Boundedness, splitting and invertibility of weighted discrete Hilbert
//! transforms `a ↦ Σ a_n v_n/(z-γ_n)` on sparse node sequences, with
//! singular-value oracles for every verdict.

pub mod boundedness;
pub mod cli;
pub mod cumulants;
pub mod error;
pub mod generators;
pub mod invertibility;
pub mod measure;
pub mod nodes;
pub mod oracle;
pub mod point;
pub mod splitting;
pub mod target;
pub mod transform;

pub use cumulants::{cumulants, ClosedFormTail, CumulantTable, TailKind, TailPolicy};
pub use error::{Error, Result};
pub use generators::{
    make_cluster, make_example1, make_geometric, make_three_per_annulus, FamilySpec, Problem,
    WeightLaw,
};
pub use invertibility::{
    classify_perturbation, example_fast_tests, generating_function_eval, inverse_apply,
    invertibility_verdict, rho_profile, solve_generating, Decision, GeneratingSolution,
    InvertibilityParams, InvertibilityVerdict, PerturbationClass, PerturbationKind, Regime,
};
pub use measure::{discrete_measure, AnnulusMeasure};
pub use nodes::{build_node_set, AnnulusHit, AnnulusPartition, WeightedNodeSet};
pub use oracle::{
    classify_trend, convergence_study, singular_extremes, ConvergenceStudy, SingularExtremes,
    Trend, PLATEAU_TOL,
};
pub use point::Point;
pub use target::TargetSystem;
pub use transform::{
    bessel_weights, evaluate, measure_operator, truncated_operator, witness_lower_bounds,
    CoefficientVector, TruncatedOperator,
};
pub use num_complex::Complex64;
