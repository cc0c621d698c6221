//! The H/V workflow for a binary response: estimate the marginal of `x` from
//! V, choose penalties on H by cross-validation, and fit the three models to H
//! with the V marginal as target. Marginals are evaluated at the observed
//! `x` of H.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::design::{build_roughness, Layout};
use crate::error::{Error, Result};
use crate::fit_linear::ModelId;
use crate::fit_logistic::{expit, fit_logistic_model, NewtonConfig};
use crate::marginal::{build_kernel, true_marginal_oracle, MarginalCurve, DEFAULT_SIGMA_K};
use crate::simulate::{default_logit_scale, ss_fitted, surface};
use crate::tune::{
    kfold_cv_lambda1, select_lambda2, CvConfig, CvResult, Lambda2Rule, Lambda2Selection, LambdaGrid, MarginalProblem,
    Metric,
};

/// Pre-reduced H: both covariates and the response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HData {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub y: Vec<f64>,
}

/// Pre-reduced V: the shared covariate and the response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VData {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl HData {
    pub fn validate(&self) -> Result<()> {
        if self.x.len() != self.z.len() || self.x.len() != self.y.len() {
            return Err(Error::shape(format!(
                "H columns have lengths {}, {}, {}",
                self.x.len(),
                self.z.len(),
                self.y.len()
            )));
        }
        check_unit(&self.x, "H x")?;
        check_unit(&self.z, "H z")?;
        check_binary(&self.y, "H y")
    }
}

impl VData {
    pub fn validate(&self) -> Result<()> {
        if self.x.len() != self.y.len() {
            return Err(Error::shape(format!("V columns have lengths {}, {}", self.x.len(), self.y.len())));
        }
        check_unit(&self.x, "V x")?;
        check_binary(&self.y, "V y")
    }
}

fn check_unit(v: &[f64], what: &str) -> Result<()> {
    match v.iter().position(|&a| !(0.0..=1.0).contains(&a)) {
        Some(i) => Err(Error::domain(format!("{what} value {} at row {i} is outside [0, 1]", v[i]))),
        None => Ok(()),
    }
}

fn check_binary(v: &[f64], what: &str) -> Result<()> {
    match v.iter().position(|&a| a != 0.0 && a != 1.0) {
        Some(i) => Err(Error::Schema(format!("{what} value {} at row {i} is not 0 or 1", v[i]))),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApplicationConfig {
    #[serde(default)]
    pub interaction: bool,
    #[serde(default = "default_p")]
    pub px: usize,
    #[serde(default = "default_p")]
    pub pz: usize,
    /// Basis size of the V fit.
    #[serde(default = "default_p")]
    pub v_px: usize,
    /// Fixed roughness weight for the V fit; cross-validated when absent.
    #[serde(default)]
    pub v_lambda1: Option<f64>,
    #[serde(default = "default_sigma_k")]
    pub sigma_k: f64,
    #[serde(default = "LambdaGrid::default_lambda1")]
    pub grid1: LambdaGrid,
    #[serde(default = "LambdaGrid::default_lambda2")]
    pub grid2: LambdaGrid,
    #[serde(default = "default_cv")]
    pub cv: CvConfig,
    #[serde(default = "default_rule")]
    pub rule: Lambda2Rule,
    /// Skip cross-validation and use this `λ₁`.
    #[serde(default)]
    pub lambda1: Option<f64>,
    /// Skip the `λ₂` rule and use this value.
    #[serde(default)]
    pub lambda2: Option<f64>,
    #[serde(default)]
    pub newton: NewtonConfig,
}

fn default_p() -> usize {
    8
}
fn default_sigma_k() -> f64 {
    DEFAULT_SIGMA_K
}
fn default_cv() -> CvConfig {
    CvConfig::new(Metric::Ss, 0)
}
fn default_rule() -> Lambda2Rule {
    Lambda2Rule::FiftyPercent
}

impl Default for ApplicationConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl ApplicationConfig {
    pub fn layout(&self) -> Layout {
        Layout::with_interaction(self.interaction, self.px, self.pz)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VMarginal {
    pub lambda1: f64,
    pub cv: Option<CvResult>,
    pub beta: Vec<f64>,
    pub converged: bool,
    /// `θ̂_V` at the requested points.
    pub curve: MarginalCurve,
}

/// Once-penalized logistic spline of `y` on `x` over V, evaluated at `x_eval`.
pub fn estimate_v_marginal(
    v: &VData,
    px: usize,
    lambda1: Option<f64>,
    grid: &LambdaGrid,
    cv: &CvConfig,
    newton: &NewtonConfig,
    x_eval: &[f64],
) -> Result<VMarginal> {
    v.validate()?;
    let layout = Layout::x_only(px);
    let d = layout.design(&v.x, &[])?;
    let p = build_roughness(&layout)?;
    let (lambda1, cv_result) = match lambda1 {
        Some(l) => (l, None),
        None => {
            let r = kfold_cv_lambda1(&d, &v.y, &p, grid, cv)?;
            (r.lambda1, Some(r))
        }
    };
    let fit = fit_logistic_model(ModelId::Fit1, &d, &v.y, &p, None, None, lambda1, 0.0, newton)?;
    let d_eval = layout.design_at(x_eval, &[])?;
    let theta = d_eval.values.dot(&fit.beta).mapv(expit).to_vec();
    Ok(VMarginal {
        lambda1,
        cv: cv_result,
        beta: fit.beta.to_vec(),
        converged: fit.converged,
        curve: MarginalCurve::new(x_eval.to_vec(), theta)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: ModelId,
    pub lambda1: f64,
    pub lambda2: f64,
    pub beta: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub quasi_separation: bool,
    /// `θ̂_H(x, z)` per H row.
    pub theta_hat: Vec<f64>,
    /// `θ̂_H(x)` per H row.
    pub marginal: Vec<f64>,
    /// `Σ (θ̂_H(x) − θ̂_V(x))²` over H rows.
    pub ss_marginal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplicationReport {
    pub config: ApplicationConfig,
    pub n_h: usize,
    pub n_v: usize,
    pub v_marginal: VMarginal,
    pub lambda1: f64,
    pub cv: Option<CvResult>,
    /// `None` when rule A finds nothing, in which case Fit2 is not reported.
    pub lambda2: Option<f64>,
    pub lambda2_selection: Option<Lambda2Selection>,
    pub models: Vec<ModelReport>,
    pub warnings: Vec<String>,
}

impl ApplicationReport {
    pub fn model(&self, m: ModelId) -> Option<&ModelReport> {
        self.models.iter().find(|r| r.model == m)
    }
}

/// Run the whole workflow on reduced H and V data.
pub fn run_application(h: &HData, v: &VData, config: &ApplicationConfig) -> Result<ApplicationReport> {
    h.validate()?;
    v.validate()?;
    let mut warnings = Vec::new();

    let vm = estimate_v_marginal(v, config.v_px, config.v_lambda1, &config.grid1, &config.cv, &config.newton, &h.x)?;
    if !vm.converged {
        warnings.push("V fit did not converge".into());
    }

    let layout = config.layout();
    let d = layout.design(&h.x, &h.z)?;
    let roughness = build_roughness(&layout)?;
    let kernel = build_kernel(&h.x, &h.x, config.sigma_k)?;

    let (lambda1, cv) = match config.lambda1 {
        Some(l) => (l, None),
        None => {
            let r = kfold_cv_lambda1(&d, &h.y, &roughness, &config.grid1, &config.cv)?;
            warnings.extend(r.warnings.iter().cloned());
            (r.lambda1, Some(r))
        }
    };

    let problem = MarginalProblem {
        d: &d,
        y: &h.y,
        roughness: &roughness,
        kernel: &kernel,
        target: &vm.curve,
        newton: &config.newton,
    };
    let (lambda2, lambda2_selection) = match config.lambda2 {
        Some(l) => (Some(l), None),
        None => {
            let s = select_lambda2(&problem, lambda1, &config.grid2, config.rule)?;
            if s.lambda2.is_none() {
                warnings.push("no λ₂ on the grid halves the Fit1 marginal discrepancy; Fit2 not fitted".into());
            }
            (s.lambda2, Some(s))
        }
    };

    let mut models = Vec::new();
    for model in ModelId::ALL {
        let (l1, l2) = match model {
            ModelId::Fit0 => (0.0, 0.0),
            ModelId::Fit1 => (lambda1, 0.0),
            ModelId::Fit2 => match lambda2 {
                Some(l2) => (lambda1, l2),
                None => continue,
            },
        };
        let fit =
            fit_logistic_model(model, &d, &h.y, &roughness, Some(&kernel), Some(&vm.curve), l1, l2, &config.newton)?;
        if !fit.converged {
            warnings.push(format!("{} did not converge", model.name()));
        }
        if fit.quasi_separation {
            warnings.push(format!("{} shows quasi-separation", model.name()));
        }
        let marginal = fit.marginal.expect("kernel given").theta;
        models.push(ModelReport {
            model,
            lambda1: l1,
            lambda2: l2,
            ss_marginal: ss_fitted(&marginal, &vm.curve.theta)?,
            beta: fit.beta.to_vec(),
            converged: fit.converged,
            iterations: fit.iterations,
            quasi_separation: fit.quasi_separation,
            theta_hat: fit.theta_hat.to_vec(),
            marginal,
        });
    }

    Ok(ApplicationReport {
        config: config.clone(),
        n_h: h.x.len(),
        n_v: v.x.len(),
        v_marginal: vm,
        lambda1,
        cv,
        lambda2,
        lambda2_selection,
        models,
        warnings,
    })
}

/// A synthetic H/V pair drawn from the same binary model: `x` and `z`
/// independent uniform, `θ(x, z) = expit(a + b·surface(x, z))` with the surface
/// range mapped onto `[−2.5, 2.5]`. Also returns the generating marginal of
/// `x` as a function.
#[derive(Debug, Clone)]
pub struct SyntheticPair {
    pub h: HData,
    pub v: VData,
    pub interaction: bool,
    pub logit_scale: (f64, f64),
}

impl SyntheticPair {
    pub fn generate(n_h: usize, n_v: usize, interaction: bool, seed: u64) -> Self {
        let g: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let f: Vec<f64> = g.iter().flat_map(|&x| g.iter().map(move |&z| surface(interaction, x, z))).collect();
        let (a, b) = default_logit_scale(&f);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |n: usize| {
            let mut x = Vec::with_capacity(n);
            let mut z = Vec::with_capacity(n);
            let mut y = Vec::with_capacity(n);
            for _ in 0..n {
                let (xi, zi): (f64, f64) = (rng.random(), rng.random());
                let t = expit(a + b * surface(interaction, xi, zi));
                y.push(if rng.random::<f64>() < t { 1.0 } else { 0.0 });
                x.push(xi);
                z.push(zi);
            }
            (x, z, y)
        };
        let (hx, hz, hy) = draw(n_h);
        let (vx, _, vy) = draw(n_v);
        SyntheticPair { h: HData { x: hx, z: hz, y: hy }, v: VData { x: vx, y: vy }, interaction, logit_scale: (a, b) }
    }

    /// `P(y = 1 | x)` of the generating model at `x_eval`.
    pub fn true_marginal(&self, x_eval: &[f64]) -> Result<MarginalCurve> {
        let (a, b) = self.logit_scale;
        let inter = self.interaction;
        true_marginal_oracle(|x, z| expit(a + b * surface(inter, x, z)), x_eval, 2000)
    }
}
