//! Closed-form estimators for a continuous response.
//!
//! All three share the normal equations
//!
//! ```text
//! (DᵀD + λ₁Ω + λ₂WᵀW) β = Dᵀy + λ₂Wᵀθ
//! ```
//!
//! with `Ω = P1ᵀP1 + P2ᵀP2`: Fit0 has `λ₁ = λ₂ = 0`, Fit1 has `λ₂ = 0`.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::design::{DesignMatrix, PenaltyPair};
use crate::error::{Error, Result};
use crate::linalg::solve_symmetric;
use crate::marginal::MarginalCurve;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelId {
    Fit0,
    Fit1,
    Fit2,
}

impl ModelId {
    pub const ALL: [ModelId; 3] = [ModelId::Fit0, ModelId::Fit1, ModelId::Fit2];

    pub fn name(&self) -> &'static str {
        match self {
            ModelId::Fit0 => "fit0",
            ModelId::Fit1 => "fit1",
            ModelId::Fit2 => "fit2",
        }
    }
}

#[derive(Debug, Clone)]
pub struct LinearFit {
    pub model_id: ModelId,
    pub beta: Array1<f64>,
    /// `D·β`
    pub fitted: Array1<f64>,
    /// `W·β` at the test points, when a projection was supplied.
    pub marginal: Option<MarginalCurve>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub condition: f64,
}

impl LinearFit {
    /// Attach the marginal `W·β` evaluated at `x_test`.
    pub fn project(&mut self, w: &Array2<f64>, x_test: &[f64]) -> Result<()> {
        if w.ncols() != self.beta.len() || w.nrows() != x_test.len() {
            return Err(Error::shape(format!(
                "projection is {}x{}, expected {}x{}",
                w.nrows(),
                w.ncols(),
                x_test.len(),
                self.beta.len()
            )));
        }
        self.marginal = Some(MarginalCurve::new(x_test.to_vec(), w.dot(&self.beta).to_vec())?);
        Ok(())
    }
}

/// Precomputed pieces of the normal equations, reusable across penalty values.
#[derive(Debug, Clone)]
pub struct PenalizedSystem {
    design: Array2<f64>,
    gram: Array2<f64>,
    dty: Array1<f64>,
    omega: Option<Array2<f64>>,
    marginal: Option<MarginalTerm>,
}

#[derive(Debug, Clone)]
struct MarginalTerm {
    w: Array2<f64>,
    wtw: Array2<f64>,
    wt_target: Array1<f64>,
    target: MarginalCurve,
}

impl PenalizedSystem {
    pub fn new(d: &DesignMatrix, y: &[f64]) -> Result<Self> {
        if d.nrows() != y.len() {
            return Err(Error::shape(format!("design has {} rows but y has length {}", d.nrows(), y.len())));
        }
        let y = Array1::from(y.to_vec());
        Ok(PenalizedSystem {
            design: d.values.clone(),
            gram: d.values.t().dot(&d.values),
            dty: d.values.t().dot(&y),
            omega: None,
            marginal: None,
        })
    }

    pub fn with_roughness(mut self, p: &PenaltyPair) -> Result<Self> {
        let m = self.gram.nrows();
        if p.p1.ncols() != m || p.p2.ncols() != m {
            return Err(Error::shape(format!(
                "roughness matrices have {} and {} columns, expected {m}",
                p.p1.ncols(),
                p.p2.ncols()
            )));
        }
        self.omega = Some(p.omega());
        Ok(self)
    }

    pub fn with_marginal(mut self, w: &Array2<f64>, target: &MarginalCurve) -> Result<Self> {
        let m = self.gram.nrows();
        if w.ncols() != m {
            return Err(Error::shape(format!("W has {} columns, expected {m}", w.ncols())));
        }
        if w.nrows() != target.theta.len() {
            return Err(Error::shape(format!(
                "W has {} rows but the target marginal has {} values",
                w.nrows(),
                target.theta.len()
            )));
        }
        let t = target.theta_array();
        self.marginal =
            Some(MarginalTerm { w: w.clone(), wtw: w.t().dot(w), wt_target: w.t().dot(&t), target: target.clone() });
        Ok(self)
    }

    pub fn solve(&self, model_id: ModelId, lambda1: f64, lambda2: f64) -> Result<LinearFit> {
        let (lambda1, lambda2) = match model_id {
            ModelId::Fit0 => (0.0, 0.0),
            ModelId::Fit1 => (lambda1, 0.0),
            ModelId::Fit2 => (lambda1, lambda2),
        };
        if !(lambda1 >= 0.0 && lambda2 >= 0.0) {
            return Err(Error::config(format!("penalties must be non-negative, got ({lambda1}, {lambda2})")));
        }
        let mut a = self.gram.clone();
        let mut rhs = self.dty.clone();
        if lambda1 > 0.0 {
            let omega = self.omega.as_ref().ok_or_else(|| Error::config("λ₁ > 0 needs roughness matrices"))?;
            a.scaled_add(lambda1, omega);
        }
        if lambda2 > 0.0 {
            let mt = self.marginal.as_ref().ok_or_else(|| Error::config("λ₂ > 0 needs a marginal target"))?;
            a.scaled_add(lambda2, &mt.wtw);
            rhs.scaled_add(lambda2, &mt.wt_target);
        }
        let sol = solve_symmetric(a.view(), rhs.view())?;
        let fitted = self.design.dot(&sol.x);
        let marginal = match &self.marginal {
            Some(mt) => Some(MarginalCurve::new(mt.target.x_test.clone(), mt.w.dot(&sol.x).to_vec())?),
            None => None,
        };
        Ok(LinearFit { model_id, beta: sol.x, fitted, marginal, lambda1, lambda2, condition: sol.condition })
    }
}

/// Ordinary least squares.
pub fn fit0(d: &DesignMatrix, y: &[f64]) -> Result<LinearFit> {
    PenalizedSystem::new(d, y)?.solve(ModelId::Fit0, 0.0, 0.0)
}

/// P-spline least squares with a single roughness weight.
pub fn fit1(d: &DesignMatrix, y: &[f64], p: &PenaltyPair, lambda1: f64) -> Result<LinearFit> {
    PenalizedSystem::new(d, y)?.with_roughness(p)?.solve(ModelId::Fit1, lambda1, 0.0)
}

/// P-spline least squares plus the marginal penalty `λ₂‖Wβ − θ‖²`.
pub fn fit2(
    d: &DesignMatrix,
    y: &[f64],
    p: &PenaltyPair,
    w: &Array2<f64>,
    target: &MarginalCurve,
    lambda1: f64,
    lambda2: f64,
) -> Result<LinearFit> {
    PenalizedSystem::new(d, y)?.with_roughness(p)?.with_marginal(w, target)?.solve(ModelId::Fit2, lambda1, lambda2)
}

/// `SS₂(β) = ‖y − Dβ‖² + λ₁βᵀΩβ + λ₂‖Wβ − θ‖²`; the other objectives are special cases.
pub fn penalized_ss(
    d: &DesignMatrix,
    y: &[f64],
    omega: Option<&Array2<f64>>,
    marginal: Option<(&Array2<f64>, &[f64])>,
    lambda1: f64,
    lambda2: f64,
    beta: &Array1<f64>,
) -> f64 {
    let r = Array1::from(y.to_vec()) - d.values.dot(beta);
    let mut ss = r.dot(&r);
    if let Some(omega) = omega {
        ss += lambda1 * beta.dot(&omega.dot(beta));
    }
    if let Some((w, t)) = marginal {
        let e = w.dot(beta) - Array1::from(t.to_vec());
        ss += lambda2 * e.dot(&e);
    }
    ss
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{build_roughness, Layout};
    use crate::marginal::{build_kernel, equidistant, marginal_projection};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Problem {
        d: DesignMatrix,
        y: Vec<f64>,
        p: PenaltyPair,
        w: Array2<f64>,
        target: MarginalCurve,
    }

    fn problem(seed: u64, n: usize, layout: Layout) -> Problem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let z: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let y: Vec<f64> =
            x.iter().zip(&z).map(|(a, b)| (4.0 * a).sin() + b * b + rng.random_range(-0.3..0.3)).collect();
        let d = layout.design(&x, &z).unwrap();
        let p = build_roughness(&layout).unwrap();
        let xt = equidistant(15);
        let kernel = build_kernel(&x, &xt, 0.1).unwrap();
        let w = marginal_projection(&kernel, &d).unwrap();
        let target = MarginalCurve::new(xt.clone(), xt.iter().map(|a| (4.0 * a).sin() + 1.0 / 3.0).collect()).unwrap();
        Problem { d, y, p, w, target }
    }

    /// Coordinate descent with an exact parabola step per coordinate, using
    /// only values of the objective.
    fn coordinate_minimum(f: &dyn Fn(&Array1<f64>) -> f64, m: usize) -> Array1<f64> {
        let mut b = Array1::<f64>::zeros(m);
        for _ in 0..200_000 {
            let mut moved = 0.0_f64;
            for j in 0..m {
                let f0 = f(&b);
                let mut e = b.clone();
                e[j] += 1.0;
                let fp = f(&e);
                e[j] -= 2.0;
                let fm = f(&e);
                let step = -(fp - fm) / (2.0 * (fp - 2.0 * f0 + fm));
                b[j] += step;
                moved = moved.max(step.abs());
            }
            if moved < 1e-14 {
                break;
            }
        }
        b
    }

    fn max_rel(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
        (a - b).iter().fold(0.0_f64, |m, v| m.max(v.abs())) / b.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    #[test]
    fn ols_matches_numeric_minimum() {
        let values =
            ndarray::array![[1.0, 0.2, 0.0], [1.0, 0.5, 0.3], [1.0, 0.1, 0.9], [1.0, 0.7, 0.6], [1.0, 0.3, 0.2]];
        let d = DesignMatrix { values, layout: Layout::x_only(2) };
        let y = [1.0, 2.5, 0.3, 3.1, 1.7];
        let fit = fit0(&d, &y).unwrap();
        let numeric = coordinate_minimum(&|b| penalized_ss(&d, &y, None, None, 0.0, 0.0, b), 3);
        assert!(max_rel(&numeric, &fit.beta) < 1e-8);
    }

    #[test]
    fn twice_penalized_matches_numeric_minimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = DesignMatrix { values: Array2::from_shape_fn((6, 4), |_| rng.random()), layout: Layout::x_only(3) };
        let y: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w = Array2::from_shape_fn((3, 4), |_| rng.random());
        let target = MarginalCurve::new(vec![0.0, 0.5, 1.0], (0..3).map(|_| rng.random()).collect()).unwrap();
        let p = PenaltyPair { p1: ndarray::array![[0.0, 1.0, -2.0, 1.0]], p2: Array2::zeros((0, 4)) };
        let fit = fit2(&d, &y, &p, &w, &target, 0.5, 2.0).unwrap();
        let omega = p.omega();
        let numeric =
            coordinate_minimum(&|b| penalized_ss(&d, &y, Some(&omega), Some((&w, &target.theta)), 0.5, 2.0, b), 4);
        assert!(max_rel(&numeric, &fit.beta) < 1e-8, "{numeric} vs {}", fit.beta);
    }

    #[test]
    fn intercept_only_is_mean() {
        let d = DesignMatrix { values: Array2::ones((5, 1)), layout: Layout::x_only(1) };
        let y = [1.0, 2.0, 4.0, 7.0, 11.0];
        let f = fit0(&d, &y).unwrap();
        assert!((f.beta[0] - 5.0).abs() < 1e-14);
    }

    #[test]
    fn exact_span_interpolates() {
        let pr = problem(1, 40, Layout::additive(4, 4));
        let beta: Array1<f64> = (0..9).map(|i| (i as f64 * 0.37).cos()).collect();
        let y = pr.d.values.dot(&beta).to_vec();
        let f = fit0(&pr.d, &y).unwrap();
        let ss: f64 = f.fitted.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum();
        assert!(ss < 1e-20);
    }

    #[test]
    fn nesting_identities() {
        let pr = problem(2, 60, Layout::interaction(4, 4));
        let f0 = fit0(&pr.d, &pr.y).unwrap();
        let f1 = fit1(&pr.d, &pr.y, &pr.p, 0.0).unwrap();
        let f1b = fit1(&pr.d, &pr.y, &pr.p, 2.5).unwrap();
        let f2 = fit2(&pr.d, &pr.y, &pr.p, &pr.w, &pr.target, 2.5, 0.0).unwrap();
        for (a, b) in f0.beta.iter().zip(f1.beta.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in f1b.beta.iter().zip(f2.beta.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn normal_equation_residual_and_dominance() {
        let pr = problem(3, 80, Layout::interaction(5, 5));
        let (l1, l2) = (1.5, 4.0);
        let f = fit2(&pr.d, &pr.y, &pr.p, &pr.w, &pr.target, l1, l2).unwrap();
        let omega = pr.p.omega();
        let a = pr.d.values.t().dot(&pr.d.values) + &omega * l1 + pr.w.t().dot(&pr.w) * l2;
        let rhs = pr.d.values.t().dot(&Array1::from(pr.y.clone())) + pr.w.t().dot(&pr.target.theta_array()) * l2;
        let scale = rhs.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        let r = a.dot(&f.beta) - &rhs;
        assert!(r.iter().all(|v| v.abs() < 1e-8 * scale));

        let obj =
            |b: &Array1<f64>| penalized_ss(&pr.d, &pr.y, Some(&omega), Some((&pr.w, &pr.target.theta)), l1, l2, b);
        let best = obj(&f.beta);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let eps: Array1<f64> = (0..f.beta.len()).map(|_| rng.random_range(-1e-3..1e-3)).collect();
            assert!(obj(&(&f.beta + &eps)) >= best);
        }
    }

    #[test]
    fn huge_roughness_gives_affine_coefficients() {
        let pr = problem(5, 120, Layout::interaction(6, 6));
        let f = fit1(&pr.d, &pr.y, &pr.p, 1e9).unwrap();
        let curvature =
            pr.p.p1.dot(&f.beta).iter().chain(pr.p.p2.dot(&f.beta).iter()).fold(0.0_f64, |m, v| m.max(v.abs()));
        let scale = f.beta.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(curvature < 1e-6 * scale.max(1.0), "curvature {curvature}");
    }

    #[test]
    fn marginal_discrepancy_shrinks_with_lambda2() {
        let pr = problem(6, 90, Layout::additive(6, 6));
        let mut last = f64::INFINITY;
        for l2 in [0.0, 1.0, 10.0, 100.0, 1e4] {
            let f = fit2(&pr.d, &pr.y, &pr.p, &pr.w, &pr.target, 0.5, l2).unwrap();
            let e = pr.w.dot(&f.beta) - pr.target.theta_array();
            let norm = e.dot(&e).sqrt();
            assert!(norm <= last * (1.0 + 1e-10));
            last = norm;
        }
    }

    #[test]
    fn errors() {
        let pr = problem(7, 30, Layout::additive(4, 4));
        assert!(matches!(fit0(&pr.d, &pr.y[..29]), Err(Error::Shape(_))));
        let short = MarginalCurve::new(vec![0.5], vec![1.0]).unwrap();
        assert!(matches!(fit2(&pr.d, &pr.y, &pr.p, &pr.w, &short, 1.0, 1.0), Err(Error::Shape(_))));
        assert!(matches!(fit1(&pr.d, &pr.y, &pr.p, -1.0), Err(Error::Config(_))));
        // duplicate column makes DᵀD singular
        let mut values = pr.d.values.clone();
        let c1 = values.column(1).to_owned();
        values.column_mut(2).assign(&c1);
        let dup = DesignMatrix { values, layout: pr.d.layout };
        assert!(matches!(fit0(&dup, &pr.y), Err(Error::Rank { .. })));
    }
}
