//! Fit the three logistic models to one binary replicate by penalized Newton
//! iterations, using the reference penalty weights for its size, and print
//! the convergence history of each.
//!
//! ```text
//! cargo run --release --example logistic_newton
//! ```

use margspline::fit_linear::ModelId;
use margspline::fit_logistic::fit_logistic_model;
use margspline::simulate::{reference_recipe, wss_fitted, wss_marginal, Evaluator, SimConfig};

fn main() -> margspline::Result<()> {
    let config = SimConfig::binary(false, 400, 8, 2).with_seed(5);
    let recipe = reference_recipe(&config).expect("reference row exists");
    let eval = Evaluator::new(&config, &recipe)?;
    let data = eval.setup.draw(0);
    let truth = &eval.setup.theta_true_marginal;
    // The design stacks the sample `nrep` times, so the response does too.
    let y: Vec<f64> = (0..data.nrep).flat_map(|_| data.y.iter().cloned()).collect();

    for model in ModelId::ALL {
        let (l1, l2) = recipe.lambdas(model);
        let fit = fit_logistic_model(
            model,
            eval.design(),
            &y,
            eval.roughness(),
            Some(eval.kernel()),
            Some(truth),
            l1,
            l2,
            &recipe.newton,
        )?;
        let m = fit.marginal.as_ref().expect("kernel given");
        println!(
            "{}: converged {} after {} iterations, WSS fitted {:.3}, WSS marginal {:.4}",
            model.name(),
            fit.converged,
            fit.iterations,
            wss_fitted(&fit.theta_hat.as_slice().unwrap()[..data.y.len()], &data.truth)?,
            wss_marginal(m, truth)?
        );
        let trace: Vec<String> = fit.objective_trace.iter().map(|f| format!("{f:.4}")).collect();
        println!("  objective: {}", trace.join(" "));
    }
    Ok(())
}
