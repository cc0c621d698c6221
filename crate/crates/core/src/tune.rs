//! Penalty selection.
//!
//! With a known truth (simulations) the three penalties are chosen by a
//! sequential one-dimensional search. Without one, `λ₁` is chosen by k-fold
//! cross-validation of the once-penalized logistic fit and `λ₂` by how much it
//! shrinks the marginal discrepancy relative to that fit.

use std::io::Write;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{DesignMatrix, PenaltyPair};
use crate::error::{Error, Result};
use crate::fit_linear::{ModelId, PenalizedSystem};
use crate::fit_logistic::{expit, fit_logistic_model, NewtonConfig, PROB_CLAMP};
use crate::marginal::{KernelSmoother, MarginalCurve};
use crate::simulate::{ss_fitted, wss_fitted, Evaluator, SimDataset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LambdaGrid {
    values: Vec<f64>,
}

impl LambdaGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::config("λ grid is empty"));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::config(format!("λ grid value {v} is negative or not finite")));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("λ grid must be strictly increasing"));
        }
        Ok(LambdaGrid { values })
    }

    /// `start, start + step, …` up to and including `stop`.
    pub fn range(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(stop >= start) {
            return Err(Error::config(format!("bad λ range {start}..={stop} by {step}")));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        Self::new((0..=n).map(|i| start + i as f64 * step).collect())
    }

    /// `0, 1, …, 100`.
    pub fn default_lambda1() -> Self {
        Self::range(0.0, 100.0, 1.0).expect("valid range")
    }

    /// `0, 0.5, …, 50`.
    pub fn default_lambda2() -> Self {
        Self::range(0.0, 50.0, 0.5).expect("valid range")
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl TryFrom<Vec<f64>> for LambdaGrid {
    type Error = Error;
    fn try_from(values: Vec<f64>) -> Result<Self> {
        LambdaGrid::new(values)
    }
}

impl From<LambdaGrid> for Vec<f64> {
    fn from(g: LambdaGrid) -> Vec<f64> {
        g.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Squared error of fitted values (simulation) or of test-fold
    /// probabilities against 0/1 labels (cross-validation). Lower is better.
    Ss,
    /// Weighted squared error against true probabilities. Lower is better.
    Wss,
    /// Bernoulli log-likelihood of a test fold. Higher is better.
    LogLik,
    /// Area under the ROC curve of a test fold. Higher is better.
    Auc,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Ss => "ss",
            Metric::Wss => "wss",
            Metric::LogLik => "loglik",
            Metric::Auc => "auc",
        }
    }

    fn higher_is_better(&self) -> bool {
        matches!(self, Metric::LogLik | Metric::Auc)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lambda2Rule {
    /// Smallest λ₂ whose marginal SS is at most half that of Fit1.
    FiftyPercent,
    /// λ₂ with the lowest marginal SS.
    BestFit2,
}

/// One evaluated point. `fold` is `None` for whole-data or aggregated values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub stage: String,
    pub lambda: f64,
    pub fold: Option<usize>,
    pub metric: String,
    /// `None` when the fit at this point failed.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningReport {
    pub lambda1a: f64,
    pub lambda1b: f64,
    /// `None` when rule A finds no qualifying value.
    pub lambda2: Option<f64>,
    pub metric: Metric,
    pub lambda2_rule: Option<Lambda2Rule>,
    pub cv_folds: Option<usize>,
    pub trace: Vec<TraceEntry>,
    pub warnings: Vec<String>,
}

impl TuningReport {
    pub const TRACE_HEADER: [&'static str; 5] = ["lambda", "fold", "metric", "value", "stage"];

    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::TRACE_HEADER)?;
        for t in &self.trace {
            w.write_record([
                t.lambda.to_string(),
                t.fold.map(|f| f.to_string()).unwrap_or_default(),
                t.metric.clone(),
                t.value.map(|v| v.to_string()).unwrap_or_else(|| "NA".into()),
                t.stage.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Index of the best finite score; the first (smallest λ) wins ties.
fn best_index(scores: &[Option<f64>], higher_is_better: bool) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.iter().enumerate() {
        let Some(s) = s.filter(|v| v.is_finite()) else { continue };
        let better = match best {
            None => true,
            Some((_, b)) => {
                if higher_is_better {
                    s > b
                } else {
                    s < b
                }
            }
        };
        if better {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i)
}

/// Scores a single fit of a simulated dataset against its truth.
enum Scorer<'a> {
    Linear { system: Box<PenalizedSystem>, truth: &'a [f64] },
    Binary { eval: &'a Evaluator, y: Vec<f64>, truth: &'a [f64] },
}

impl Scorer<'_> {
    fn score(&self, model: ModelId, lambda1: f64, lambda2: f64) -> Result<f64> {
        match self {
            Scorer::Linear { system, truth } => {
                ss_fitted(system.solve(model, lambda1, lambda2)?.fitted.as_slice().unwrap(), truth)
            }
            Scorer::Binary { eval, y, truth } => {
                let fit = fit_logistic_model(
                    model,
                    eval.design(),
                    y,
                    eval.roughness(),
                    Some(eval.kernel()),
                    Some(&eval.setup.theta_true_marginal),
                    lambda1,
                    lambda2,
                    &eval.recipe.newton,
                )?;
                if !fit.converged {
                    return Err(Error::Numerical {
                        iteration: fit.iterations,
                        message: "Newton did not converge".into(),
                    });
                }
                wss_fitted(&fit.theta_hat.as_slice().unwrap()[..truth.len()], truth)
            }
        }
    }
}

/// The truth-based sequential search: `λ₁a` minimizes the Fit1 error, then
/// `λ₂` minimizes the Fit2 error at `λ₁ = λ₁a`, then `λ₁b` minimizes the Fit2
/// error at that `λ₂`. The error is SS of fitted values for a continuous
/// response and WSS for a binary one. Grid points are evaluated in parallel.
pub fn sequential_search(
    eval: &Evaluator,
    data: &SimDataset,
    grid1: &LambdaGrid,
    grid2: &LambdaGrid,
) -> Result<TuningReport> {
    let truth = data.truth.as_slice();
    let (scorer, metric) = if data.binary {
        let y = (0..data.nrep).flat_map(|_| data.y.iter().cloned()).collect();
        (Scorer::Binary { eval, y, truth }, Metric::Wss)
    } else {
        let system = PenalizedSystem::new(eval.design(), &data.y)?
            .with_roughness(eval.roughness())?
            .with_marginal(eval.projection(), &eval.setup.theta_true_marginal)?;
        (Scorer::Linear { system: Box::new(system), truth }, Metric::Ss)
    };

    let mut trace = Vec::new();
    let mut warnings = Vec::new();
    let mut scan = |stage: &str, grid: &LambdaGrid, f: &(dyn Fn(f64) -> Result<f64> + Sync)| -> Result<f64> {
        let scores: Vec<Option<f64>> = grid.values().par_iter().map(|&l| f(l).ok()).collect();
        for (&l, s) in grid.values().iter().zip(&scores) {
            trace.push(TraceEntry {
                stage: stage.into(),
                lambda: l,
                fold: None,
                metric: metric.name().into(),
                value: *s,
            });
        }
        let failed = scores.iter().filter(|s| s.is_none()).count();
        if failed > 0 {
            warnings.push(format!("{stage}: {failed} of {} grid points failed to fit", grid.len()));
        }
        best_index(&scores, false)
            .map(|i| grid.values()[i])
            .ok_or_else(|| Error::Tuning(format!("{stage}: every grid point failed")))
    };

    let lambda1a = scan("lambda1a", grid1, &|l| scorer.score(ModelId::Fit1, l, 0.0))?;
    let lambda2 = scan("lambda2", grid2, &|l| scorer.score(ModelId::Fit2, lambda1a, l))?;
    let lambda1b = scan("lambda1b", grid1, &|l| scorer.score(ModelId::Fit2, l, lambda2))?;
    Ok(TuningReport {
        lambda1a,
        lambda1b,
        lambda2: Some(lambda2),
        metric,
        lambda2_rule: None,
        cv_folds: None,
        trace,
        warnings,
    })
}

/// Fold of each row: a seeded permutation dealt round-robin into `k` folds,
/// so fold sizes differ by at most one.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::config(format!("cross-validation needs at least 2 folds, got {k}")));
    }
    if n < k {
        return Err(Error::config(format!("{n} rows cannot be split into {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n];
    for (pos, &row) in order.iter().enumerate() {
        fold[row] = pos % k;
    }
    Ok(fold)
}

/// Area under the ROC curve as the Mann–Whitney statistic, ties counted one half.
pub fn auc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::shape(format!("{} scores but {} labels", scores.len(), labels.len())));
    }
    if let Some(l) = labels.iter().find(|&&l| l != 0.0 && l != 1.0) {
        return Err(Error::domain(format!("label {l} is not binary")));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1.0).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::domain("AUC needs both classes"));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // midranks over tied runs
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum_pos += idx[i..=j].iter().filter(|&&r| labels[r] == 1.0).count() as f64 * mid;
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos * n_neg) as f64)
}

fn fold_metric(metric: Metric, p: &[f64], y: &[f64]) -> Result<f64> {
    match metric {
        Metric::Ss => ss_fitted(p, y),
        Metric::LogLik => Ok(p
            .iter()
            .zip(y)
            .map(|(&p, &y)| {
                let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
                y * p.ln() + (1.0 - y) * (1.0 - p).ln()
            })
            .sum()),
        Metric::Auc => auc(p, y),
        Metric::Wss => Err(Error::config("WSS needs true probabilities and cannot be cross-validated")),
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn select_rows(a: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    a.select(Axis(0), rows)
}

/// Cross-validation settings for [`kfold_cv_lambda1`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvConfig {
    #[serde(default = "default_folds")]
    pub folds: usize,
    pub metric: Metric,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub newton: NewtonConfig,
}

fn default_folds() -> usize {
    10
}

impl CvConfig {
    pub fn new(metric: Metric, seed: u64) -> Self {
        CvConfig { folds: default_folds(), metric, seed, newton: NewtonConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub lambda1: f64,
    /// Median metric per grid value; `None` when every fold failed.
    pub medians: Vec<Option<f64>>,
    pub trace: Vec<TraceEntry>,
    pub warnings: Vec<String>,
}

/// Choose `λ₁` for the once-penalized logistic fit by k-fold cross-validation.
///
/// For every grid value and fold the model is fitted on the other folds and
/// scored on the held-out rows through `expit(D_test β)`. Folds whose fit
/// fails are dropped from that value's median; a value with no surviving folds
/// cannot be selected.
pub fn kfold_cv_lambda1(
    d: &DesignMatrix,
    y: &[f64],
    roughness: &PenaltyPair,
    grid: &LambdaGrid,
    cv: &CvConfig,
) -> Result<CvResult> {
    if d.nrows() != y.len() {
        return Err(Error::shape(format!("design has {} rows but y has length {}", d.nrows(), y.len())));
    }
    if cv.metric == Metric::Wss {
        return Err(Error::config("WSS cannot be used for cross-validation"));
    }
    let folds = fold_assignment(y.len(), cv.folds, cv.seed)?;
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..cv.folds)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..y.len()).partition(|&i| folds[i] == f);
            (train, test)
        })
        .collect();

    let jobs: Vec<(usize, usize)> = (0..grid.len()).flat_map(|g| (0..cv.folds).map(move |f| (g, f))).collect();
    let results: Vec<std::result::Result<f64, String>> = jobs
        .par_iter()
        .map(|&(g, f)| {
            let (train, test) = &splits[f];
            let d_train = DesignMatrix { values: select_rows(&d.values, train), layout: d.layout };
            let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let fit = fit_logistic_model(
                ModelId::Fit1,
                &d_train,
                &y_train,
                roughness,
                None,
                None,
                grid.values()[g],
                0.0,
                &cv.newton,
            )
            .map_err(|e| e.to_string())?;
            if !fit.converged {
                return Err("Newton did not converge".into());
            }
            let p: Vec<f64> = select_rows(&d.values, test).dot(&fit.beta).mapv(expit).to_vec();
            let y_test: Vec<f64> = test.iter().map(|&i| y[i]).collect();
            fold_metric(cv.metric, &p, &y_test).map_err(|e| e.to_string())
        })
        .collect();

    let mut trace = Vec::with_capacity(jobs.len() + grid.len());
    let mut warnings = Vec::new();
    let mut medians = Vec::with_capacity(grid.len());
    for (g, &lambda) in grid.values().iter().enumerate() {
        let mut ok = Vec::new();
        for f in 0..cv.folds {
            let r = &results[g * cv.folds + f];
            if let Err(msg) = r {
                warnings.push(format!("λ₁ = {lambda}, fold {f}: {msg}"));
            }
            let value = r.as_ref().ok().copied();
            ok.extend(value);
            trace.push(TraceEntry {
                stage: "cv".into(),
                lambda,
                fold: Some(f),
                metric: cv.metric.name().into(),
                value,
            });
        }
        let m = (!ok.is_empty()).then(|| median(&mut ok));
        trace.push(TraceEntry {
            stage: "cv_median".into(),
            lambda,
            fold: None,
            metric: cv.metric.name().into(),
            value: m,
        });
        medians.push(m);
    }
    let best = best_index(&medians, cv.metric.higher_is_better())
        .ok_or_else(|| Error::Tuning("every λ₁ failed in every fold".into()))?;
    Ok(CvResult { lambda1: grid.values()[best], medians, trace, warnings })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lambda2Selection {
    /// `None` when rule A finds nothing.
    pub lambda2: Option<f64>,
    pub ss_fit1: f64,
    /// Marginal SS of Fit2 per grid value; `None` where the fit failed.
    pub ss_fit2: Vec<Option<f64>>,
    pub trace: Vec<TraceEntry>,
}

/// The fixed inputs of the application fits on H.
pub struct MarginalProblem<'a> {
    pub d: &'a DesignMatrix,
    pub y: &'a [f64],
    pub roughness: &'a PenaltyPair,
    pub kernel: &'a KernelSmoother,
    /// The marginal estimated from V at the kernel's test points.
    pub target: &'a MarginalCurve,
    pub newton: &'a NewtonConfig,
}

impl MarginalProblem<'_> {
    /// Marginal SS `Σ (K θ̂ − θ̂_V)²` of one logistic fit.
    pub fn marginal_ss(&self, model: ModelId, lambda1: f64, lambda2: f64) -> Result<f64> {
        let fit = fit_logistic_model(
            model,
            self.d,
            self.y,
            self.roughness,
            Some(self.kernel),
            Some(self.target),
            lambda1,
            lambda2,
            self.newton,
        )?;
        let m = fit.marginal.expect("kernel given");
        ss_fitted(&m.theta, &self.target.theta)
    }
}

/// Choose `λ₂` at fixed `λ₁` from the marginal SS of Fit2 relative to Fit1.
pub fn select_lambda2(
    problem: &MarginalProblem,
    lambda1: f64,
    grid2: &LambdaGrid,
    rule: Lambda2Rule,
) -> Result<Lambda2Selection> {
    let ss_fit1 = problem.marginal_ss(ModelId::Fit1, lambda1, 0.0)?;
    let ss_fit2: Vec<Option<f64>> =
        grid2.values().par_iter().map(|&l2| problem.marginal_ss(ModelId::Fit2, lambda1, l2).ok()).collect();
    let mut trace = vec![TraceEntry {
        stage: "fit1".into(),
        lambda: lambda1,
        fold: None,
        metric: "ss_marginal".into(),
        value: Some(ss_fit1),
    }];
    for (&l2, &s) in grid2.values().iter().zip(&ss_fit2) {
        trace.push(TraceEntry {
            stage: "lambda2".into(),
            lambda: l2,
            fold: None,
            metric: "ss_marginal".into(),
            value: s,
        });
    }
    let lambda2 = match rule {
        Lambda2Rule::FiftyPercent if ss_fit1 == 0.0 => None,
        Lambda2Rule::FiftyPercent => grid2
            .values()
            .iter()
            .zip(&ss_fit2)
            .find(|(_, s)| matches!(s, Some(v) if *v <= 0.5 * ss_fit1))
            .map(|(&l, _)| l),
        Lambda2Rule::BestFit2 => best_index(&ss_fit2, false).map(|i| grid2.values()[i]),
    };
    if lambda2.is_none() && rule == Lambda2Rule::BestFit2 {
        return Err(Error::Tuning("every λ₂ failed to fit".into()));
    }
    Ok(Lambda2Selection { lambda2, ss_fit1, ss_fit2, trace })
}

/// Median of a metric vector; exposed for reporting.
pub fn median_of(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().cloned().filter(|v| v.is_finite()).collect();
    (!v.is_empty()).then(|| median(&mut v))
}

/// Test-fold probabilities for coefficients fitted elsewhere.
pub fn predict_probabilities(d: &DesignMatrix, beta: &Array1<f64>) -> Vec<f64> {
    d.values.dot(beta).mapv(expit).to_vec()
}
