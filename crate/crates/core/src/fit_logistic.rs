//! Penalized maximum likelihood for a binary response, fitted by
//! Newton–Raphson with step halving.
//!
//! The objective being maximized is
//!
//! ```text
//! F(β) = l(β) − λ₁ βᵀΩβ − λ₂ (Kθ − θ₀)ᵀ(Kθ − θ₀),     θ = expit(Dβ)
//! ```
//!
//! where `l` is the Bernoulli log-likelihood, `Ω = P1ᵀP1 + P2ᵀP2` and `K` is the
//! kernel smoother mapping fitted probabilities onto marginal test points.

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::design::{repeat_rows, DesignMatrix, PenaltyPair};
use crate::error::{Error, Result};
use crate::fit_linear::ModelId;
use crate::linalg::{solve_symmetric, Solution};
use crate::marginal::{KernelSmoother, MarginalCurve};

/// Probabilities are kept this far from 0 and 1 in likelihoods and weights.
pub const PROB_CLAMP: f64 = 1e-12;

/// Coefficients larger than this in magnitude flag quasi-separation.
pub const SEPARATION_GUARD: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewtonConfig {
    /// Starting coefficients; `None` means all zeros.
    #[serde(default)]
    pub beta0: Option<Vec<f64>>,
    #[serde(default = "NewtonConfig::default_tol")]
    pub tol: f64,
    #[serde(default = "NewtonConfig::default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "NewtonConfig::default_step_halving_max")]
    pub step_halving_max: usize,
}

impl NewtonConfig {
    fn default_tol() -> f64 {
        1e-8
    }
    fn default_max_iter() -> usize {
        100
    }
    fn default_step_halving_max() -> usize {
        20
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::config(format!("Newton tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::config("Newton needs at least one iteration"));
        }
        Ok(())
    }
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            beta0: None,
            tol: Self::default_tol(),
            max_iter: Self::default_max_iter(),
            step_halving_max: Self::default_step_halving_max(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LogisticFit {
    pub model_id: ModelId,
    pub beta: Array1<f64>,
    /// `expit(D·β)` on the rows the model was fitted to.
    pub theta_hat: Array1<f64>,
    pub marginal: Option<MarginalCurve>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub converged: bool,
    pub iterations: usize,
    pub final_step_norm: f64,
    /// Some coefficient exceeded [`SEPARATION_GUARD`] in magnitude.
    pub quasi_separation: bool,
    /// Penalized log-likelihood at `beta`.
    pub objective: f64,
    /// Objective after each accepted step, starting with the initial value.
    pub objective_trace: Vec<f64>,
}

/// Numerically stable `e^a / (1 + e^a)`.
pub fn expit(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

fn clamp_prob(t: f64) -> f64 {
    t.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

pub fn loglik(beta: &Array1<f64>, d: &DesignMatrix, y: &[f64]) -> f64 {
    let eta = d.values.dot(beta);
    eta.iter()
        .zip(y)
        .map(|(&e, &yi)| {
            let t = clamp_prob(expit(e));
            yi * t.ln() + (1.0 - yi) * (1.0 - t).ln()
        })
        .sum()
}

/// The marginal penalty `λ₂‖Kθ − θ₀‖²`.
#[derive(Debug, Clone)]
pub struct MarginalPenalty {
    pub k: Array2<f64>,
    pub target: Array1<f64>,
    pub lambda2: f64,
}

impl MarginalPenalty {
    pub fn new(kernel: &KernelSmoother, target: &MarginalCurve, lambda2: f64) -> Result<Self> {
        if kernel.k.nrows() != target.theta.len() {
            return Err(Error::shape(format!(
                "kernel has {} test points but the target has {}",
                kernel.k.nrows(),
                target.theta.len()
            )));
        }
        Ok(MarginalPenalty { k: kernel.k.clone(), target: target.theta_array(), lambda2 })
    }
}

/// Optional penalty terms added to the log-likelihood.
#[derive(Debug, Clone, Default)]
pub struct Penalties {
    /// `(Ω, λ₁)`
    pub roughness: Option<(Array2<f64>, f64)>,
    pub marginal: Option<MarginalPenalty>,
}

impl Penalties {
    pub fn none() -> Self {
        Penalties::default()
    }

    pub fn roughness(p: &PenaltyPair, lambda1: f64) -> Self {
        Penalties { roughness: Some((p.omega(), lambda1)), marginal: None }
    }

    pub fn with_marginal(mut self, mp: MarginalPenalty) -> Self {
        self.marginal = Some(mp);
        self
    }

    pub fn lambda1(&self) -> f64 {
        self.roughness.as_ref().map_or(0.0, |r| r.1)
    }

    pub fn lambda2(&self) -> f64 {
        self.marginal.as_ref().map_or(0.0, |m| m.lambda2)
    }

    fn check(&self, d: &DesignMatrix) -> Result<()> {
        let m = d.ncols();
        if let Some((omega, l1)) = &self.roughness {
            if omega.dim() != (m, m) {
                return Err(Error::shape(format!("Ω is {:?}, expected ({m}, {m})", omega.dim())));
            }
            if !(*l1 >= 0.0) {
                return Err(Error::config(format!("λ₁ must be non-negative, got {l1}")));
            }
        }
        if let Some(mp) = &self.marginal {
            if mp.k.ncols() != d.nrows() {
                return Err(Error::shape(format!(
                    "kernel has {} columns but the design has {} rows",
                    mp.k.ncols(),
                    d.nrows()
                )));
            }
            if mp.k.nrows() != mp.target.len() {
                return Err(Error::shape("kernel rows and marginal target differ in length"));
            }
            if !(mp.lambda2 >= 0.0) {
                return Err(Error::config(format!("λ₂ must be non-negative, got {}", mp.lambda2)));
            }
        }
        Ok(())
    }
}

/// Penalized log-likelihood `l + RP + MP`.
pub fn objective(beta: &Array1<f64>, d: &DesignMatrix, y: &[f64], pen: &Penalties) -> f64 {
    let mut f = loglik(beta, d, y);
    if let Some((omega, l1)) = &pen.roughness {
        f -= l1 * beta.dot(&omega.dot(beta));
    }
    if let Some(mp) = &pen.marginal {
        let theta = d.values.dot(beta).mapv(expit);
        let r = mp.k.dot(&theta) - &mp.target;
        f -= mp.lambda2 * r.dot(&r);
    }
    f
}

/// Gradient and Hessian of the penalized log-likelihood, together with the
/// negative-definite part of the Hessian used when the full Newton direction
/// fails to ascend.
struct Derivatives {
    gradient: Array1<f64>,
    hessian: Array2<f64>,
    curvature: Array2<f64>,
}

fn derivatives(beta: &Array1<f64>, d: &DesignMatrix, y: &[f64], pen: &Penalties) -> Derivatives {
    let dv = &d.values;
    let theta = dv.dot(beta).mapv(expit);
    let w = theta.mapv(|t| {
        let t = clamp_prob(t);
        t * (1.0 - t)
    });
    let resid = Array1::from(y.to_vec()) - &theta;

    // l: ∂l/∂θ · ∂θ/∂β  and  ∂l/∂θ · ∂²θ/∂β² + ∂²l/∂θ² · (∂θ/∂β)²,
    // which collapse to Dᵀ(y − θ) and −Dᵀ diag(θ(1−θ)) D.
    let mut gradient = dv.t().dot(&resid);
    let jac = dv * &w.view().insert_axis(Axis(1)); // ∂θ_i/∂β_j = d_ij θ_i(1−θ_i)
    let mut hessian = -dv.t().dot(&jac);

    if let Some((omega, l1)) = &pen.roughness {
        gradient.scaled_add(-2.0 * l1, &omega.dot(beta));
        hessian.scaled_add(-2.0 * l1, omega);
    }
    let mut curvature = hessian.clone();
    if let Some(mp) = &pen.marginal {
        let l2 = mp.lambda2;
        let r = mp.k.dot(&theta) - &mp.target;
        let kj = mp.k.dot(&jac);
        // ∂MP/∂β_j = −2λ₂ (θᵀKᵀK − θ₀ᵀK) ∂θ/∂β_j
        gradient.scaled_add(-2.0 * l2, &kj.t().dot(&r));
        // ∂²MP/∂β_j∂β_k = −2λ₂ { (∂θ/∂β_k)ᵀKᵀK ∂θ/∂β_j + (θᵀKᵀK − θ₀ᵀK) ∂²θ/∂β_j∂β_k }
        let outer = kj.t().dot(&kj);
        let s = mp.k.t().dot(&r);
        let second = &s * &w * &theta.mapv(|t| 1.0 - 2.0 * t);
        let weighted = dv * &second.view().insert_axis(Axis(1));
        let second_term = dv.t().dot(&weighted);
        hessian.scaled_add(-2.0 * l2, &outer);
        hessian.scaled_add(-2.0 * l2, &second_term);
        curvature.scaled_add(-2.0 * l2, &outer);
    }
    Derivatives { gradient, hessian, curvature }
}

/// Gradient and Hessian of `l + RP + MP` with respect to β.
pub fn score_and_hessian(
    beta: &Array1<f64>,
    d: &DesignMatrix,
    y: &[f64],
    pen: &Penalties,
) -> Result<(Array1<f64>, Array2<f64>)> {
    if beta.len() != d.ncols() || y.len() != d.nrows() {
        return Err(Error::shape(format!(
            "β has length {}, y has length {}, design is {}x{}",
            beta.len(),
            y.len(),
            d.nrows(),
            d.ncols()
        )));
    }
    pen.check(d)?;
    let der = derivatives(beta, d, y, pen);
    Ok((der.gradient, der.hessian))
}

fn newton_direction(der: &Derivatives, has_marginal: bool) -> Result<Array1<f64>> {
    let neg_h = -&der.hessian;
    match solve_symmetric(neg_h.view(), der.gradient.view()) {
        Ok(Solution { x, .. }) if x.dot(&der.gradient) > 0.0 || !has_marginal => Ok(x),
        Err(Error::Rank { .. }) if !has_marginal => damped_solve(&neg_h, &der.gradient),
        Err(e) if !has_marginal => Err(e),
        _ => damped_solve(&-&der.curvature, &der.gradient),
    }
}

/// Solve `(A + μI) δ = g`, starting at μ = 0 and growing μ relative to the
/// largest diagonal entry until the system is well conditioned. Near
/// separation the likelihood Hessian loses rank; the damped step still ascends
/// and lets the iteration continue to the guard.
fn damped_solve(a: &Array2<f64>, g: &Array1<f64>) -> Result<Array1<f64>> {
    let scale = a.diag().iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut mu = 0.0;
    loop {
        let mut damped = a.clone();
        damped.diag_mut().mapv_inplace(|v| v + mu);
        match solve_symmetric(damped.view(), g.view()) {
            Ok(sol) => return Ok(sol.x),
            Err(Error::Rank { condition }) if mu < scale => {
                mu = if mu == 0.0 { scale * 1e-10 } else { mu * 100.0 };
                if !condition.is_finite() && mu > scale {
                    return Err(Error::Rank { condition });
                }
            }
            Err(e) => return Err(e),
        }
    }
}

fn validate_binary(y: &[f64]) -> Result<()> {
    if let Some((i, v)) = y.iter().enumerate().find(|(_, &v)| v != 0.0 && v != 1.0) {
        return Err(Error::domain(format!("response {v} at row {i} is not binary")));
    }
    Ok(())
}

/// Maximize the penalized log-likelihood by Newton–Raphson.
///
/// Each step solves `−H δ = g`. When that direction does not ascend (the
/// marginal term can make `H` indefinite) the step is recomputed with the
/// negative-definite part of the Hessian. Steps are halved until the objective
/// does not decrease. `model_id` only labels the result.
pub fn newton_raphson(
    model_id: ModelId,
    d: &DesignMatrix,
    y: &[f64],
    config: &NewtonConfig,
    pen: &Penalties,
) -> Result<LogisticFit> {
    config.validate()?;
    validate_binary(y)?;
    let m = d.ncols();
    let mut beta = match &config.beta0 {
        Some(b) if b.len() != m => {
            return Err(Error::shape(format!("β₀ has length {}, expected {m}", b.len())));
        }
        Some(b) => Array1::from(b.clone()),
        None => Array1::zeros(m),
    };
    score_and_hessian(&beta, d, y, pen)?;

    let mut f = objective(&beta, d, y, pen);
    if !f.is_finite() {
        return Err(Error::Numerical { iteration: 0, message: "objective is not finite at β₀".into() });
    }
    let mut trace = vec![f];
    let mut converged = false;
    let mut iterations = 0;
    let mut step_norm = f64::INFINITY;

    for iter in 1..=config.max_iter {
        iterations = iter;
        let der = derivatives(&beta, d, y, pen);
        if der.gradient.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numerical { iteration: iter, message: "gradient is not finite".into() });
        }
        let delta = newton_direction(&der, pen.marginal.is_some())?;
        let full_norm = delta.iter().fold(0.0_f64, |a, v| a.max(v.abs()));

        // Near the optimum a correct step can change the objective by less
        // than its rounding error, so allow that much slack.
        let slack = 1e-12 * (1.0 + f.abs());
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=config.step_halving_max {
            let candidate = &beta + &(&delta * t);
            let fc = objective(&candidate, d, y, pen);
            if fc.is_nan() {
                return Err(Error::Numerical { iteration: iter, message: "objective became NaN".into() });
            }
            if fc >= f - slack {
                accepted = Some((candidate, fc));
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some((candidate, fc)) => {
                step_norm = (&candidate - &beta).iter().fold(0.0_f64, |a, v| a.max(v.abs()));
                beta = candidate;
                f = fc;
                trace.push(f);
                if step_norm < config.tol {
                    converged = true;
                    break;
                }
            }
            None => {
                // No representable improvement: stationary up to rounding if the
                // proposed step is already below tolerance.
                step_norm = full_norm;
                converged = full_norm < config.tol;
                break;
            }
        }
    }

    let theta_hat = d.values.dot(&beta).mapv(expit);
    let quasi_separation = beta.iter().any(|b| b.abs() > SEPARATION_GUARD);
    Ok(LogisticFit {
        model_id,
        theta_hat,
        lambda1: pen.lambda1(),
        lambda2: pen.lambda2(),
        converged,
        iterations,
        final_step_norm: step_norm,
        quasi_separation,
        objective: f,
        objective_trace: trace,
        marginal: None,
        beta,
    })
}

/// Fit one of the three logistic models. The roughness term is used by Fit1
/// and Fit2, the marginal term only by Fit2. When `kernel` is given the fitted
/// marginal `K·θ̂` is attached.
#[allow(clippy::too_many_arguments)]
pub fn fit_logistic_model(
    model_id: ModelId,
    d: &DesignMatrix,
    y: &[f64],
    roughness: &PenaltyPair,
    kernel: Option<&KernelSmoother>,
    target: Option<&MarginalCurve>,
    lambda1: f64,
    lambda2: f64,
    config: &NewtonConfig,
) -> Result<LogisticFit> {
    let pen = match model_id {
        ModelId::Fit0 => Penalties::none(),
        ModelId::Fit1 => Penalties::roughness(roughness, lambda1),
        ModelId::Fit2 => {
            let kernel = kernel.ok_or_else(|| Error::config("Fit2 needs a kernel smoother"))?;
            let target = target.ok_or_else(|| Error::config("Fit2 needs a marginal target"))?;
            Penalties::roughness(roughness, lambda1).with_marginal(MarginalPenalty::new(kernel, target, lambda2)?)
        }
    };
    let mut fit = newton_raphson(model_id, d, y, config, &pen)?;
    if let Some(kernel) = kernel {
        if kernel.k.ncols() != d.nrows() {
            return Err(Error::shape("kernel columns do not match design rows"));
        }
        let theta = kernel.k.dot(&fit.theta_hat);
        fit.marginal = Some(MarginalCurve::new(kernel.x_test.clone(), theta.to_vec())?);
    }
    Ok(fit)
}

/// Repeat the rows of `(D, y)` `nrep` times in block order.
pub fn replicate_data(d: &DesignMatrix, y: &[f64], nrep: usize) -> Result<(DesignMatrix, Vec<f64>)> {
    if nrep == 0 {
        return Err(Error::config("nrep must be at least 1"));
    }
    if d.nrows() != y.len() {
        return Err(Error::shape(format!("design has {} rows but y has length {}", d.nrows(), y.len())));
    }
    let values = repeat_rows(&d.values, nrep);
    let y2 = (0..nrep).flat_map(|_| y.iter().cloned()).collect();
    Ok((DesignMatrix { values, layout: d.layout }, y2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{build_roughness, Layout};
    use crate::marginal::{build_kernel, equidistant};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn binary_data(seed: u64, n: usize, layout: Layout) -> (DesignMatrix, Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let z: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let y: Vec<f64> = x
            .iter()
            .zip(&z)
            .map(|(a, b)| if rng.random::<f64>() < expit(2.0 * (3.0 * a).sin() - b) { 1.0 } else { 0.0 })
            .collect();
        (layout.design(&x, &z).unwrap(), y, x)
    }

    #[test]
    fn expit_values() {
        assert_eq!(expit(0.0), 0.5);
        assert!((expit(2.0) - 0.880_797_077_977_882_3).abs() < 1e-15);
        for a in [-700.0, -30.0, -1.5, 0.3, 12.0, 700.0] {
            let (p, q) = (expit(a), expit(-a));
            assert!((p + q - 1.0).abs() < 1e-15);
            assert!(p.is_finite() && (0.0..=1.0).contains(&p));
        }
        assert!(expit(-700.0) > 0.0);
    }

    #[test]
    fn loglik_examples() {
        let layout = Layout::additive(3, 3);
        let d = layout.design_at(&[0.1, 0.4, 0.8], &[0.5, 0.2, 0.9]).unwrap();
        let y = [1.0, 0.0, 1.0];
        let ll = loglik(&Array1::zeros(7), &d, &y);
        assert!((ll - 3.0 * 0.5_f64.ln()).abs() < 1e-14);

        let single = DesignMatrix { values: Array2::ones((1, 1)), layout: Layout::x_only(1) };
        let beta = Array1::from(vec![(0.8_f64 / 0.2).ln()]);
        assert!((loglik(&beta, &single, &[1.0]) - 0.8_f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn score_at_zero() {
        let (d, y, _) = binary_data(1, 40, Layout::additive(4, 4));
        let (g, _) = score_and_hessian(&Array1::zeros(9), &d, &y, &Penalties::none()).unwrap();
        let want = d.values.t().dot(&(Array1::from(y.clone()) - 0.5));
        for (a, b) in g.iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn replicate_examples() {
        let (d, y, _) = binary_data(2, 12, Layout::additive(3, 3));
        let (d1, y1) = replicate_data(&d, &y, 1).unwrap();
        assert_eq!(d1.values, d.values);
        assert_eq!(y1, y);
        let small = DesignMatrix { values: d.values.slice(ndarray::s![..3, ..]).to_owned(), layout: d.layout };
        let (d2, y2) = replicate_data(&small, &y[..3], 2).unwrap();
        assert_eq!(d2.nrows(), 6);
        assert_eq!(d2.values.row(4), small.values.row(1));
        assert_eq!(y2[3..], y[..3]);
        assert!(matches!(replicate_data(&d, &y, 0), Err(Error::Config(_))));
    }

    #[test]
    fn replication_keeps_the_mle() {
        let (d, y, _) = binary_data(3, 120, Layout::additive(4, 4));
        let cfg = NewtonConfig::default();
        let a = newton_raphson(ModelId::Fit0, &d, &y, &cfg, &Penalties::none()).unwrap();
        let (d3, y3) = replicate_data(&d, &y, 3).unwrap();
        let b = newton_raphson(ModelId::Fit0, &d3, &y3, &cfg, &Penalties::none()).unwrap();
        assert!(a.converged && b.converged);
        for (p, q) in a.beta.iter().zip(b.beta.iter()) {
            assert!((p - q).abs() < 1e-7);
        }
    }

    #[test]
    fn ascent_is_monotone() {
        let (d, y, x) = binary_data(4, 150, Layout::interaction(4, 4));
        let p = build_roughness(&d.layout).unwrap();
        let kernel = build_kernel(&x, &equidistant(20), 0.1).unwrap();
        let target = MarginalCurve::new(equidistant(20), vec![0.5; 20]).unwrap();
        let pen = Penalties::roughness(&p, 0.3).with_marginal(MarginalPenalty::new(&kernel, &target, 25.0).unwrap());
        let fit = newton_raphson(ModelId::Fit2, &d, &y, &NewtonConfig::default(), &pen).unwrap();
        assert!(fit.converged);
        assert!(fit.final_step_norm < 1e-8);
        for w in fit.objective_trace.windows(2) {
            assert!(w[1] >= w[0]);
        }
        assert!(fit.theta_hat.iter().all(|&t| t > 0.0 && t < 1.0));
    }

    #[test]
    fn unpenalized_fit_matches_irls() {
        let (d, y, _) = binary_data(21, 20, Layout::x_only(4));
        let fit = newton_raphson(ModelId::Fit0, &d, &y, &NewtonConfig::default(), &Penalties::none()).unwrap();
        // Iteratively reweighted least squares on the working response.
        let yv = Array1::from(y.clone());
        let mut beta = Array1::<f64>::zeros(d.ncols());
        for _ in 0..50 {
            let eta = d.values.dot(&beta);
            let theta = eta.mapv(expit);
            let w = theta.mapv(|t| t * (1.0 - t));
            let work = &eta + &((&yv - &theta) / &w);
            let dw = &d.values * &w.view().insert_axis(Axis(1));
            let lhs = d.values.t().dot(&dw);
            let rhs = dw.t().dot(&work);
            beta = crate::linalg::solve_general(lhs.view(), rhs.view()).unwrap().x;
        }
        let diff = (&fit.beta - &beta).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(diff < 1e-6, "{} vs {beta}", fit.beta);
    }

    #[test]
    fn large_lambda2_pins_the_marginal() {
        let (d, y, x) = binary_data(22, 200, Layout::additive(5, 5));
        let p = build_roughness(&d.layout).unwrap();
        let xt = equidistant(10);
        let kernel = build_kernel(&x, &xt, 0.1).unwrap();
        let target = MarginalCurve::new(xt.clone(), xt.iter().map(|v| 0.3 + 0.3 * v).collect()).unwrap();
        let fit = fit_logistic_model(
            ModelId::Fit2,
            &d,
            &y,
            &p,
            Some(&kernel),
            Some(&target),
            1.0,
            1e5,
            &NewtonConfig::default(),
        )
        .unwrap();
        assert!(fit.converged);
        let m = fit.marginal.unwrap();
        let worst = m.theta.iter().zip(&target.theta).fold(0.0_f64, |a, (u, v)| a.max((u - v).abs()));
        assert!(worst < 0.01, "largest marginal gap {worst}");
    }

    #[test]
    fn separable_data_is_flagged() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 / 19.0).collect();
        let y: Vec<f64> = x.iter().map(|&v| if v > 0.5 { 1.0 } else { 0.0 }).collect();
        let mut values = Array2::ones((20, 2));
        for (i, &v) in x.iter().enumerate() {
            values[[i, 1]] = v;
        }
        let d = DesignMatrix { values, layout: Layout::x_only(1) };
        let fit = newton_raphson(ModelId::Fit0, &d, &y, &NewtonConfig::default(), &Penalties::none());
        match fit {
            Ok(f) => assert!(!f.converged || f.quasi_separation, "separation went unnoticed: {:?}", f.beta),
            Err(e) => assert!(matches!(e, Error::Rank { .. } | Error::Numerical { .. })),
        }
    }

    #[test]
    fn bad_inputs() {
        let (d, y, _) = binary_data(5, 30, Layout::additive(3, 3));
        let mut y2 = y.clone();
        y2[0] = 0.5;
        assert!(matches!(
            newton_raphson(ModelId::Fit0, &d, &y2, &NewtonConfig::default(), &Penalties::none()),
            Err(Error::Domain(_))
        ));
        let cfg = NewtonConfig { tol: 0.0, ..NewtonConfig::default() };
        assert!(matches!(newton_raphson(ModelId::Fit0, &d, &y, &cfg, &Penalties::none()), Err(Error::Config(_))));
        let (g, _) = (Array1::<f64>::zeros(3), ());
        assert!(matches!(score_and_hessian(&g, &d, &y, &Penalties::none()), Err(Error::Shape(_))));
    }
}
