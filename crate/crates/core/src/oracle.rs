//! Extreme singular values of truncated operators and convergence studies.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transform::TruncatedOperator;

/// Relative last-step change below which a sequence counts as a plateau.
pub const PLATEAU_TOL: f64 = 0.10;

/// Largest `min(J, N)` handled by the dense SVD.
pub const DENSE_LIMIT: usize = 512;

/// Residual tolerance of the iterative path.
pub const ITERATIVE_TOL: f64 = 1e-9;

const MAX_ITERATIONS: usize = 50_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularExtremes {
    pub max: f64,
    pub min: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SvdMethod {
    Auto,
    Dense,
    Iterative,
}

/// `(σ_max, σ_min)` of `m`, where `σ_min` is the `min(J, N)`-th singular value.
pub fn singular_extremes(m: &DMatrix<Complex64>) -> Result<SingularExtremes> {
    singular_extremes_with(m, SvdMethod::Auto)
}

pub fn singular_extremes_with(m: &DMatrix<Complex64>, method: SvdMethod) -> Result<SingularExtremes> {
    if m.is_empty() {
        return Ok(SingularExtremes { max: 0.0, min: 0.0 });
    }
    if m.iter().any(|x| !(x.re.is_finite() && x.im.is_finite())) {
        return Err(Error::InvalidParameter("matrix has non-finite entries".into()));
    }
    let dense = match method {
        SvdMethod::Auto => m.nrows().min(m.ncols()) <= DENSE_LIMIT,
        SvdMethod::Dense => true,
        SvdMethod::Iterative => false,
    };
    if dense {
        dense_extremes(m)
    } else {
        iterative_extremes(m)
    }
}

fn dense_extremes(m: &DMatrix<Complex64>) -> Result<SingularExtremes> {
    let svd = m
        .clone()
        .try_svd(false, false, f64::EPSILON, 0)
        .ok_or(Error::IterationStalled {
            iterations: 0,
            residual: f64::NAN,
        })?;
    let s = svd.singular_values;
    Ok(SingularExtremes {
        max: s.max(),
        min: s.min(),
    })
}

fn start_vector(k: usize) -> DVector<Complex64> {
    DVector::from_element(k, Complex64::new(1.0 / (k as f64).sqrt(), 0.0))
}

/// Power iteration for the top eigenpair of `x ↦ op(x)` (Hermitian, positive).
fn power(k: usize, op: impl Fn(&DVector<Complex64>) -> DVector<Complex64>) -> Result<f64> {
    let mut x = start_vector(k);
    let mut residual = f64::INFINITY;
    for it in 0..MAX_ITERATIONS {
        let y = op(&x);
        let mu = x.dotc(&y).re;
        residual = (&y - &x * Complex64::new(mu, 0.0)).norm();
        if mu == 0.0 || residual <= ITERATIVE_TOL * mu {
            return Ok(mu);
        }
        let ny = y.norm();
        x = y / Complex64::new(ny, 0.0);
        if it + 1 == MAX_ITERATIONS {
            break;
        }
    }
    Err(Error::IterationStalled {
        iterations: MAX_ITERATIONS,
        residual,
    })
}

fn iterative_extremes(m: &DMatrix<Complex64>) -> Result<SingularExtremes> {
    // Work with a tall matrix A (rows ≥ columns); M and M* share singular values.
    let a = if m.nrows() >= m.ncols() {
        m.clone()
    } else {
        m.adjoint()
    };
    let k = a.ncols();
    let ah = a.adjoint();
    let top = power(k, |x| &ah * (&a * x))?;
    let r = a.qr().r();
    if (0..k).any(|i| r[(i, i)].norm() == 0.0) {
        return Ok(SingularExtremes {
            max: top.sqrt(),
            min: 0.0,
        });
    }
    let inv = power(k, |x| {
        let y = r.ad_solve_upper_triangular(x).expect("nonzero diagonal");
        r.solve_upper_triangular(&y).expect("nonzero diagonal")
    })?;
    Ok(SingularExtremes {
        max: top.sqrt(),
        min: 1.0 / inv.sqrt(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trend {
    Plateau,
    Growth,
    Decay,
}

/// Plateau when the last relative change is below `tol`, else growth or decay by sign.
pub fn classify_trend(values: &[f64], tol: f64) -> Trend {
    match values {
        [.., a, b] => {
            let change = last_change(*a, *b);
            if change.abs() < tol {
                Trend::Plateau
            } else if change > 0.0 {
                Trend::Growth
            } else {
                Trend::Decay
            }
        }
        _ => Trend::Plateau,
    }
}

/// `(b - a)/|a|`, with `0/0 = 0` and `x/0 = ±∞`.
pub fn last_change(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else if a == 0.0 {
        f64::INFINITY.copysign(b)
    } else {
        (b - a) / a.abs()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub sizes: Vec<usize>,
    pub sigma_max: Vec<f64>,
    pub sigma_min: Vec<f64>,
    /// Best witness quotient per size; 0 when the operator carries no source data.
    pub witness_max: Vec<f64>,
    pub max_trend: Trend,
    pub min_trend: Trend,
}

/// Runs `builder` at each size (concurrently) and classifies the trends.
pub fn convergence_study<F>(builder: F, sizes: &[usize]) -> Result<ConvergenceStudy>
where
    F: Fn(usize) -> Result<TruncatedOperator> + Sync,
{
    if sizes.len() < 3 || sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "study sizes must be increasing with at least 3 entries".into(),
        ));
    }
    let rows: Vec<(f64, f64, f64)> = sizes
        .par_iter()
        .map(|&n| {
            let op = builder(n)?;
            let s = op.singular_summary()?;
            Ok((s.max, s.min, op.witness_lower_bounds().best()))
        })
        .collect::<Result<_>>()?;
    let sigma_max: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let sigma_min: Vec<f64> = rows.iter().map(|r| r.1).collect();
    Ok(ConvergenceStudy {
        sizes: sizes.to_vec(),
        max_trend: classify_trend(&sigma_max, PLATEAU_TOL),
        min_trend: classify_trend(&sigma_min, PLATEAU_TOL),
        witness_max: rows.iter().map(|r| r.2).collect(),
        sigma_max,
        sigma_min,
    })
}
