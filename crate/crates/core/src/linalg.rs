//! Dense solvers for the small symmetric systems that arise in penalized
//! least squares and Newton iterations.
//!
//! Systems are factored, never inverted. Symmetric positive definite systems go
//! through Cholesky; anything that fails Cholesky falls back to LU with partial
//! pivoting. Both paths estimate the 2-norm condition number and refuse to
//! return a solution above [`CONDITION_LIMIT`].

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Systems whose estimated condition number exceeds this are reported as rank
/// deficient.
pub const CONDITION_LIMIT: f64 = 1e12;

const POWER_ITERATIONS: usize = 40;

/// Lower-triangular Cholesky factor, or `None` if a pivot is not positive.
pub fn cholesky(a: ArrayView2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        l[[j, j]] = d;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / d;
        }
    }
    Some(l)
}

fn cholesky_solve(l: &Array2<f64>, b: ArrayView1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut y = b.to_owned();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[[i, k]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[[k, i]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    y
}

/// LU factorization with partial pivoting, stored compactly.
struct Lu {
    lu: Array2<f64>,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(a: ArrayView2<f64>) -> Option<Lu> {
        let n = a.nrows();
        let mut lu = a.to_owned();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return None;
        }
        for k in 0..n {
            let (p, pivot) =
                (k..n)
                    .map(|i| (i, lu[[i, k]].abs()))
                    .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot <= f64::EPSILON * scale * n as f64 {
                return None;
            }
            if p != k {
                for j in 0..n {
                    lu.swap([k, j], [p, j]);
                }
                perm.swap(k, p);
            }
            let d = lu[[k, k]];
            for i in (k + 1)..n {
                let f = lu[[i, k]] / d;
                lu[[i, k]] = f;
                if f != 0.0 {
                    for j in (k + 1)..n {
                        lu[[i, j]] -= f * lu[[k, j]];
                    }
                }
            }
        }
        Some(Lu { lu, perm })
    }

    fn solve(&self, b: ArrayView1<f64>) -> Array1<f64> {
        let n = self.lu.nrows();
        let mut y: Array1<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.lu[[i, k]] * y[k];
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.lu[[i, k]] * y[k];
            }
            y[i] = s / self.lu[[i, i]];
        }
        y
    }

    /// Solve `Aᵀ x = b`.
    fn solve_transpose(&self, b: ArrayView1<f64>) -> Array1<f64> {
        let n = self.lu.nrows();
        let mut y = b.to_owned();
        // Uᵀ w = b
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.lu[[k, i]] * y[k];
            }
            y[i] = s / self.lu[[i, i]];
        }
        // Lᵀ v = w
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.lu[[k, i]] * y[k];
            }
            y[i] = s;
        }
        let mut x = Array1::zeros(n);
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = y[i];
        }
        x
    }
}

fn start_vector(n: usize) -> Array1<f64> {
    let v: Array1<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i as f64) * 1.618_033_988_75).sin()).collect();
    let norm = v.dot(&v).sqrt();
    v / norm
}

/// Largest singular value of `A` estimated by power iteration on `AᵀA`.
fn norm2_estimate(a: ArrayView2<f64>) -> f64 {
    let mut v = start_vector(a.ncols());
    let mut sigma = 0.0;
    for _ in 0..POWER_ITERATIONS {
        let w = a.t().dot(&a.dot(&v));
        let n = w.dot(&w).sqrt();
        if n == 0.0 {
            return 0.0;
        }
        sigma = n.sqrt();
        v = w / n;
    }
    sigma
}

/// Largest singular value of `A⁻¹`, given solvers for `A` and `Aᵀ`.
fn inverse_norm2_estimate<F, G>(n: usize, solve: F, solve_t: G) -> f64
where
    F: Fn(ArrayView1<f64>) -> Array1<f64>,
    G: Fn(ArrayView1<f64>) -> Array1<f64>,
{
    let mut v = start_vector(n);
    let mut sigma = 0.0;
    for _ in 0..POWER_ITERATIONS {
        let w = solve_t(solve(v.view()).view());
        let nw = w.dot(&w).sqrt();
        if !nw.is_finite() {
            return f64::INFINITY;
        }
        if nw == 0.0 {
            return 0.0;
        }
        sigma = nw.sqrt();
        v = w / nw;
    }
    sigma
}

fn check_square(a: ArrayView2<f64>, b: ArrayView1<f64>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::shape(format!("matrix is {}x{}, expected square", a.nrows(), a.ncols())));
    }
    if a.nrows() != b.len() {
        return Err(Error::shape(format!("matrix has {} rows but right-hand side has length {}", a.nrows(), b.len())));
    }
    Ok(())
}

/// A solution together with the condition estimate of the system that produced it.
#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Array1<f64>,
    pub condition: f64,
}

/// Solve a symmetric system `A x = b`.
///
/// Uses Cholesky when `A` is positive definite and LU with partial pivoting
/// otherwise. Returns [`Error::Rank`] when the system is singular or the
/// condition estimate exceeds [`CONDITION_LIMIT`].
pub fn solve_symmetric(a: ArrayView2<f64>, b: ArrayView1<f64>) -> Result<Solution> {
    check_square(a, b)?;
    if let Some(l) = cholesky(a) {
        let n = a.nrows();
        let norm = norm2_estimate(a);
        let inv = inverse_norm2_estimate(n, |v| cholesky_solve(&l, v), |v| v.to_owned());
        let diag_ratio = {
            let (lo, hi) = l.diag().iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), &d| (lo.min(d), hi.max(d)));
            (hi / lo).powi(2)
        };
        let condition = (norm * inv).max(diag_ratio);
        if !(condition <= CONDITION_LIMIT) {
            return Err(Error::Rank { condition });
        }
        let x = cholesky_solve(&l, b);
        return Ok(Solution { x, condition });
    }
    solve_general(a, b)
}

/// Solve a general square system `A x = b` by LU with partial pivoting.
pub fn solve_general(a: ArrayView2<f64>, b: ArrayView1<f64>) -> Result<Solution> {
    check_square(a, b)?;
    let lu = Lu::factor(a).ok_or(Error::Rank { condition: f64::INFINITY })?;
    let norm = norm2_estimate(a);
    let inv = inverse_norm2_estimate(a.nrows(), |v| lu.solve(v), |v| lu.solve_transpose(v));
    let condition = norm * inv;
    if !(condition <= CONDITION_LIMIT) {
        return Err(Error::Rank { condition });
    }
    let x = lu.solve(b);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Rank { condition: f64::INFINITY });
    }
    Ok(Solution { x, condition })
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Eigenvalues are returned in descending order; column `k` of the returned
/// matrix is the eigenvector for eigenvalue `k`.
pub fn symmetric_eigen(a: ArrayView2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = a.nrows();
    let mut m = a.to_owned();
    let mut v = Array2::<f64>::eye(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[[i, j]] * m[[i, j]])
            .sum();
        let total: f64 = m.iter().map(|x| x * x).sum();
        if off <= 1e-30 * total.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[j, j]].partial_cmp(&m[[i, i]]).unwrap_or(std::cmp::Ordering::Equal));
    let values: Array1<f64> = order.iter().map(|&i| m[[i, i]]).collect();
    let mut vectors = Array2::<f64>::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        vectors.column_mut(dst).assign(&v.column(src));
    }
    (values, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, eps: f64) {
        assert!((a - b).abs() <= eps, "{a} vs {b}");
    }
    use ndarray::array;

    #[test]
    fn cholesky_solves_spd_system() {
        let a = array![[4.0, 2.0, 0.6], [2.0, 5.0, 1.0], [0.6, 1.0, 3.0]];
        let b = array![1.0, -2.0, 0.5];
        let sol = solve_symmetric(a.view(), b.view()).unwrap();
        let r = a.dot(&sol.x) - &b;
        assert!(r.iter().all(|v| v.abs() < 1e-14));
        assert!(sol.condition > 1.0 && sol.condition < 10.0);
    }

    #[test]
    fn indefinite_system_uses_lu() {
        let a = array![[1.0, 2.0], [2.0, 1.0]];
        let b = array![3.0, 3.0];
        let sol = solve_symmetric(a.view(), b.view()).unwrap();
        close(sol.x[0], 1.0, 1e-14);
        close(sol.x[1], 1.0, 1e-14);
        // eigenvalues 3 and -1
        close(sol.condition, 3.0, 1e-6);
    }

    #[test]
    fn singular_system_is_rank_error() {
        let a = array![[1.0, 1.0], [1.0, 1.0]];
        let b = array![1.0, 1.0];
        assert!(matches!(solve_symmetric(a.view(), b.view()), Err(Error::Rank { .. })));
    }

    #[test]
    fn near_singular_system_trips_condition_guard() {
        let a = array![[1.0, 1.0], [1.0, 1.0 + 1e-14]];
        let b = array![1.0, 1.0];
        match solve_symmetric(a.view(), b.view()) {
            Err(Error::Rank { condition }) => assert!(condition > CONDITION_LIMIT),
            other => panic!("expected rank error, got {other:?}"),
        }
    }

    #[test]
    fn lu_transpose_solve() {
        let a = array![[2.0, 1.0, 0.0], [0.0, 3.0, 1.0], [1.0, 0.0, 4.0]];
        let lu = Lu::factor(a.view()).unwrap();
        let b = array![1.0, 2.0, 3.0];
        let x = lu.solve_transpose(b.view());
        let r = a.t().dot(&x) - &b;
        assert!(r.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn jacobi_eigen_of_2x2() {
        let a = array![[2.0, 1.0], [1.0, 2.0]];
        let (vals, vecs) = symmetric_eigen(a.view());
        close(vals[0], 3.0, 1e-12);
        close(vals[1], 1.0, 1e-12);
        let v0 = vecs.column(0);
        close(v0[0].abs(), 0.5_f64.sqrt(), 1e-12);
        close(v0[1].abs(), 0.5_f64.sqrt(), 1e-12);
    }
}
