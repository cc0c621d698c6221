//! Tune the penalty weights of one simulated replicate against the known
//! truth: `λ₁a` for the roughness fit, then `λ₂` and `λ₁b` for the constrained fit.
//!
//! ```text
//! cargo run --release --example sequential_tuning -- 100 0.5
//! ```

use margspline::simulate::{reference_p, Evaluator, FitRecipe, SimConfig};
use margspline::tune::{sequential_search, LambdaGrid};

fn main() -> margspline::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(100);
    let sigma: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.5);
    let config = SimConfig::linear(true, n, sigma, reference_p(n)).with_seed(1);
    let eval = Evaluator::new(&config, &FitRecipe::new(0.0, 0.0, 0.0))?;
    let grid1 = LambdaGrid::range(0.0, 40.0, 0.5)?;
    let grid2 = LambdaGrid::range(0.0, 40.0, 0.5)?;

    for replicate in 0..5 {
        let data = eval.setup.draw(replicate);
        let report = sequential_search(&eval, &data, &grid1, &grid2)?;
        println!(
            "replicate {replicate}: lambda1a {:5.1}  lambda2 {:5.1}  lambda1b {:5.1}",
            report.lambda1a,
            report.lambda2.unwrap_or(f64::NAN),
            report.lambda1b
        );
    }
    Ok(())
}
