//! Kernel-smoothed marginals of a fitted surface.
//!
//! The marginal of x at a test point is the Gaussian-kernel weighted mean of
//! fitted values over the observed `x`. Stacking the weights gives a
//! row-stochastic matrix `K`, so the marginal of a linear fit is `K·D·β = W·β`.

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::DesignMatrix;
use crate::error::{Error, Result};

/// Default kernel bandwidth on the unit domain.
pub const DEFAULT_SIGMA_K: f64 = 0.07;

#[derive(Debug, Clone)]
pub struct KernelSmoother {
    pub x_test: Vec<f64>,
    pub sigma_k: f64,
    /// `[n0 × N]` weights; each row sums to one.
    pub k: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalCurve {
    pub x_test: Vec<f64>,
    pub theta: Vec<f64>,
}

impl MarginalCurve {
    pub fn new(x_test: Vec<f64>, theta: Vec<f64>) -> Result<Self> {
        if x_test.len() != theta.len() {
            return Err(Error::shape(format!(
                "marginal curve has {} test points but {} values",
                x_test.len(),
                theta.len()
            )));
        }
        Ok(MarginalCurve { x_test, theta })
    }

    pub fn theta_array(&self) -> Array1<f64> {
        Array1::from(self.theta.clone())
    }
}

/// `n` equidistant points covering `[0, 1]`, endpoints included.
pub fn equidistant(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

pub fn build_kernel(x_h: &[f64], x_test: &[f64], sigma_k: f64) -> Result<KernelSmoother> {
    if !(sigma_k > 0.0) || !sigma_k.is_finite() {
        return Err(Error::config(format!("kernel bandwidth must be positive and finite, got {sigma_k}")));
    }
    if x_h.is_empty() {
        return Err(Error::config("kernel needs at least one observed x"));
    }
    let mut k = Array2::<f64>::zeros((x_test.len(), x_h.len()));
    for (r, &x0) in x_test.iter().enumerate() {
        // log φ up to a constant; shift by the row maximum so the largest weight is exp(0)
        let logs: Vec<f64> = x_h.iter().map(|&xi| -0.5 * ((xi - x0) / sigma_k).powi(2)).collect();
        let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut row_sum = 0.0;
        for (i, l) in logs.iter().enumerate() {
            let w = (l - top).exp();
            k[[r, i]] = w;
            row_sum += w;
        }
        k.row_mut(r).mapv_inplace(|w| w / row_sum);
    }
    Ok(KernelSmoother { x_test: x_test.to_vec(), sigma_k, k })
}

/// `W = K·D`.
pub fn marginal_projection(kernel: &KernelSmoother, d: &DesignMatrix) -> Result<Array2<f64>> {
    if kernel.k.ncols() != d.nrows() {
        return Err(Error::shape(format!(
            "kernel has {} columns but the design has {} rows",
            kernel.k.ncols(),
            d.nrows()
        )));
    }
    Ok(kernel.k.dot(&d.values))
}

/// Kernel average of fitted probabilities.
pub fn estimate_marginal_logistic(kernel: &KernelSmoother, theta_hat: &[f64]) -> Result<MarginalCurve> {
    if kernel.k.ncols() != theta_hat.len() {
        return Err(Error::shape(format!(
            "kernel has {} columns but {} fitted probabilities were given",
            kernel.k.ncols(),
            theta_hat.len()
        )));
    }
    if let Some((i, t)) = theta_hat.iter().enumerate().find(|(_, &t)| !(t > 0.0 && t < 1.0)) {
        return Err(Error::domain(format!("fitted probability {t} at row {i} is outside (0, 1)")));
    }
    let theta = kernel.k.dot(&Array1::from(theta_hat.to_vec()));
    MarginalCurve::new(kernel.x_test.clone(), theta.to_vec())
}

/// Marginal of `surface` over `z` uniform on `[0, 1]`, by the midpoint rule on
/// `m_z` points.
pub fn true_marginal_oracle<F>(surface: F, x_test: &[f64], m_z: usize) -> Result<MarginalCurve>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    if m_z == 0 {
        return Err(Error::config("the z grid needs at least one point"));
    }
    let theta: Vec<f64> = x_test
        .par_iter()
        .map(|&x| {
            let sum: f64 = (0..m_z).map(|i| surface(x, (i as f64 + 0.5) / m_z as f64)).sum();
            sum / m_z as f64
        })
        .collect();
    MarginalCurve::new(x_test.to_vec(), theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::Layout;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn normal_pdf(u: f64) -> f64 {
        (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt()
    }

    #[test]
    fn rows_are_stochastic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xh: Vec<f64> = (0..300).map(|_| rng.random()).collect();
        for sigma in [1e-3, 0.05, 0.1, 2.0] {
            let k = build_kernel(&xh, &equidistant(100), sigma).unwrap();
            for row in k.k.rows() {
                assert!((row.sum() - 1.0).abs() < 1e-12);
                assert!(row.iter().all(|&w| w >= 0.0));
            }
        }
    }

    #[test]
    fn flat_kernel_limit() {
        let xh = [0.0, 0.3, 0.9, 1.0];
        let k = build_kernel(&xh, &[0.2, 0.8], 1e6).unwrap();
        assert!(k.k.iter().all(|&w| (w - 0.25).abs() < 1e-12));
    }

    #[test]
    fn two_point_kernel_by_normal_pdf() {
        let k = build_kernel(&[0.0, 1.0], &[0.0], 1.0).unwrap();
        let (a, b) = (normal_pdf(0.0), normal_pdf(1.0));
        assert!((k.k[[0, 0]] - a / (a + b)).abs() < 1e-15);
        assert!((k.k[[0, 0]] - 0.622_459_331_201_854_6).abs() < 1e-12);
        assert!((k.k[[0, 1]] - 0.377_540_668_798_145_4).abs() < 1e-12);
    }

    #[test]
    fn bad_bandwidth_rejected() {
        assert!(matches!(build_kernel(&[0.5], &[0.5], 0.0), Err(Error::Config(_))));
        assert!(matches!(build_kernel(&[0.5], &[0.5], -1.0), Err(Error::Config(_))));
    }

    #[test]
    fn identity_kernel_gives_design() {
        let x = vec![0.1, 0.5, 0.9, 0.3];
        let z = vec![0.2, 0.2, 0.7, 0.9];
        let d = Layout::additive(3, 3).design_at(&x, &z).unwrap();
        let kernel = KernelSmoother { x_test: x.clone(), sigma_k: 1.0, k: Array2::eye(4) };
        assert_eq!(marginal_projection(&kernel, &d).unwrap(), d.values);
    }

    #[test]
    fn intercept_passes_through() {
        let x = equidistant(30);
        let z: Vec<f64> = x.iter().map(|v| 1.0 - v).collect();
        let d = Layout::interaction(4, 4).design_at(&x, &z).unwrap();
        let kernel = build_kernel(&x, &equidistant(11), 0.1).unwrap();
        let w = marginal_projection(&kernel, &d).unwrap();
        let mut beta = Array1::<f64>::zeros(d.ncols());
        beta[0] = 2.75;
        assert!(w.dot(&beta).iter().all(|v| (v - 2.75).abs() < 1e-12));
    }

    #[test]
    fn projection_by_hand() {
        let kernel = KernelSmoother {
            x_test: vec![0.0, 0.5, 1.0],
            sigma_k: 1.0,
            k: array![[0.5, 0.5], [0.25, 0.75], [1.0, 0.0]],
        };
        let d = DesignMatrix { values: array![[1.0, 2.0], [1.0, 4.0]], layout: Layout::x_only(1) };
        let w = marginal_projection(&kernel, &d).unwrap();
        assert_eq!(w, array![[1.0, 3.0], [1.0, 3.5], [1.0, 2.0]]);
        let bad = DesignMatrix { values: array![[1.0, 2.0]], layout: Layout::x_only(1) };
        assert!(matches!(marginal_projection(&kernel, &bad), Err(Error::Shape(_))));
    }

    #[test]
    fn logistic_marginal_examples() {
        let k = build_kernel(&[0.1, 0.6, 0.9], &[0.0, 0.5, 1.0], 0.2).unwrap();
        let m = estimate_marginal_logistic(&k, &[0.3, 0.3, 0.3]).unwrap();
        assert!(m.theta.iter().all(|t| (t - 0.3).abs() < 1e-15));

        let flat = build_kernel(&[0.1, 0.9], &[0.0, 0.5], 1e6).unwrap();
        let m = estimate_marginal_logistic(&flat, &[0.2, 0.4]).unwrap();
        assert!(m.theta.iter().all(|t| (t - 0.3).abs() < 1e-12));

        let hand = KernelSmoother { x_test: vec![0.0, 1.0], sigma_k: 1.0, k: array![[0.2, 0.3, 0.5], [0.6, 0.4, 0.0]] };
        let m = estimate_marginal_logistic(&hand, &[0.1, 0.5, 0.9]).unwrap();
        // 0.02 + 0.15 + 0.45, 0.06 + 0.20
        assert!((m.theta[0] - 0.62).abs() < 1e-15);
        assert!((m.theta[1] - 0.26).abs() < 1e-15);

        assert!(matches!(estimate_marginal_logistic(&hand, &[0.1, 1.0, 0.5]), Err(Error::Domain(_))));
    }

    #[test]
    fn shift_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let xh: Vec<f64> = (0..50).map(|_| rng.random()).collect();
        let fitted: Array1<f64> = (0..50).map(|_| rng.random_range(-1.0..1.0)).collect();
        let k = build_kernel(&xh, &equidistant(20), 0.1).unwrap();
        let base = k.k.dot(&fitted);
        let shifted = k.k.dot(&(&fitted + 3.5));
        for (a, b) in base.iter().zip(shifted.iter()) {
            assert!((b - a - 3.5).abs() < 1e-12);
        }
    }

    #[test]
    fn wider_bandwidth_smooths() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let xh: Vec<f64> = (0..200).map(|_| rng.random()).collect();
        let fitted: Array1<f64> = xh.iter().map(|x| (8.0 * x).sin() + rng.random_range(-0.5..0.5)).collect();
        let xt = equidistant(100);
        let variance = |v: &Array1<f64>| {
            let m = v.mean().unwrap();
            v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / v.len() as f64
        };
        let mut last = f64::INFINITY;
        for sigma in [0.01, 0.05, 0.1, 0.5, 5.0] {
            let var = variance(&build_kernel(&xh, &xt, sigma).unwrap().k.dot(&fitted));
            assert!(var <= last + 1e-12, "sigma {sigma}: {var} > {last}");
            last = var;
        }
    }

    #[test]
    fn oracle_examples() {
        let xt = equidistant(7);
        let m = true_marginal_oracle(|x, _| x, &xt, 10).unwrap();
        assert!(m.theta.iter().zip(&xt).all(|(a, b)| (a - b).abs() < 1e-15));
        let m = true_marginal_oracle(|_, z| z, &xt, 10_000).unwrap();
        assert!(m.theta.iter().all(|t| (t - 0.5).abs() < 1e-3));
        assert!(matches!(true_marginal_oracle(|x, _| x, &xt, 0), Err(Error::Config(_))));
    }
}
