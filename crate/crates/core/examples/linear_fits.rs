//! Draw one continuous replicate and fit the unpenalized, roughness-penalized
//! and marginal-constrained models, comparing each to the true surface and the
//! true marginal.
//!
//! ```text
//! cargo run --release --example linear_fits -- 7
//! ```

use margspline::fit_linear::{ModelId, PenalizedSystem};
use margspline::simulate::{ss_fitted, ss_marginal, Evaluator, FitRecipe, SimConfig};

fn main() -> margspline::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let config = SimConfig::linear(true, 400, 1.0, 18).with_seed(seed);
    let eval = Evaluator::new(&config, &FitRecipe::new(18.0, 18.0, 21.0))?;
    let data = eval.setup.draw(0);
    let truth = &eval.setup.theta_true_marginal;

    let system = PenalizedSystem::new(eval.design(), &data.y)?
        .with_roughness(eval.roughness())?
        .with_marginal(eval.projection(), truth)?;

    println!("model  lambda1  lambda2  SS fitted  SS marginal  condition");
    for (model, l1, l2) in [(ModelId::Fit0, 0.0, 0.0), (ModelId::Fit1, 18.0, 0.0), (ModelId::Fit2, 18.0, 21.0)] {
        let mut fit = system.solve(model, l1, l2)?;
        fit.project(eval.projection(), &truth.x_test)?;
        let m = fit.marginal.as_ref().expect("projected");
        println!(
            "{:5} {:8} {:8} {:10.3} {:12.4} {:10.2e}",
            model.name(),
            l1,
            l2,
            ss_fitted(fit.fitted.as_slice().unwrap(), &data.truth)?,
            ss_marginal(m, truth)?,
            fit.condition
        );
    }
    Ok(())
}
