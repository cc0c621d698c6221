//! Univariate B-spline bases on clamped, equidistant knots.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A univariate B-spline basis: polynomial degree, number of basis functions
/// (columns) and the closed domain they cover.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub degree: usize,
    pub num_basis: usize,
    pub domain_lo: f64,
    pub domain_hi: f64,
}

impl BasisSpec {
    /// Cubic basis with `num_basis` columns on `[0, 1]`.
    pub fn cubic(num_basis: usize) -> Self {
        BasisSpec { degree: 3, num_basis, domain_lo: 0.0, domain_hi: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_basis < self.degree + 1 {
            return Err(Error::config(format!(
                "num_basis {} must be at least degree + 1 = {}",
                self.num_basis,
                self.degree + 1
            )));
        }
        if !(self.domain_lo < self.domain_hi) || !self.domain_lo.is_finite() || !self.domain_hi.is_finite() {
            return Err(Error::config(format!(
                "domain [{}, {}] is empty or not finite",
                self.domain_lo, self.domain_hi
            )));
        }
        Ok(())
    }
}

/// Clamped knot sequence of length `num_basis + degree + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    pub knots: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BasisMatrix {
    pub values: Array2<f64>,
    pub spec: BasisSpec,
}

impl BasisMatrix {
    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }
}

pub fn make_knot_vector(spec: &BasisSpec) -> Result<KnotVector> {
    spec.validate()?;
    let q = spec.degree;
    let interior = spec.num_basis - q - 1;
    let width = spec.domain_hi - spec.domain_lo;
    let mut knots = Vec::with_capacity(spec.num_basis + q + 1);
    knots.extend(std::iter::repeat_n(spec.domain_lo, q + 1));
    knots.extend((1..=interior).map(|i| spec.domain_lo + width * i as f64 / (interior + 1) as f64));
    knots.extend(std::iter::repeat_n(spec.domain_hi, q + 1));
    Ok(KnotVector { knots })
}

/// Index `s` of the knot span `[t_s, t_{s+1})` holding `x`; the right endpoint
/// belongs to the last non-empty span.
fn find_span(knots: &[f64], degree: usize, num_basis: usize, x: f64) -> usize {
    let last = num_basis - 1;
    if x >= knots[last + 1] {
        return last;
    }
    let (mut lo, mut hi) = (degree, last + 1);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if x < knots[mid] {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

/// The `degree + 1` basis functions that are non-zero on span `s`, evaluated
/// at `x` by the Cox–de Boor triangular recursion.
fn nonzero_basis(knots: &[f64], degree: usize, span: usize, x: f64) -> Vec<f64> {
    let mut n = vec![0.0; degree + 1];
    let mut left = vec![0.0; degree + 1];
    let mut right = vec![0.0; degree + 1];
    n[0] = 1.0;
    for j in 1..=degree {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let denom = right[r + 1] + left[j - r];
            let temp = if denom == 0.0 { 0.0 } else { n[r] / denom };
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    n
}

pub fn eval_basis(spec: &BasisSpec, xs: &[f64]) -> Result<BasisMatrix> {
    let knots = make_knot_vector(spec)?;
    let q = spec.degree;
    let mut values = Array2::<f64>::zeros((xs.len(), spec.num_basis));
    for (row, &x) in xs.iter().enumerate() {
        if !(x >= spec.domain_lo && x <= spec.domain_hi) {
            return Err(Error::domain(format!(
                "x = {x} at row {row} lies outside [{}, {}]",
                spec.domain_lo, spec.domain_hi
            )));
        }
        let span = find_span(&knots.knots, q, spec.num_basis, x);
        for (k, v) in nonzero_basis(&knots.knots, q, span, x).into_iter().enumerate() {
            values[[row, span - q + k]] = v;
        }
    }
    Ok(BasisMatrix { values, spec: *spec })
}

/// Second-order difference operator: row `r` holds `(1, -2, 1)` at columns
/// `r, r+1, r+2`.
pub fn second_difference_matrix(p: usize) -> Result<Array2<f64>> {
    if p < 3 {
        return Err(Error::config(format!("second differences need at least 3 coefficients, got {p}")));
    }
    let mut d = Array2::<f64>::zeros((p - 2, p));
    for r in 0..p - 2 {
        d[[r, r]] = 1.0;
        d[[r, r + 1]] = -2.0;
        d[[r, r + 2]] = 1.0;
    }
    Ok(d)
}
