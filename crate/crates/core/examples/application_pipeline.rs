//! The full two-cohort analysis on synthetic data: estimate the marginal of
//! `x` from the large cohort V, choose `λ₁` by cross-validation and `λ₂` by
//! the relative-improvement rule, then fit all three models to H.
//!
//! ```text
//! cargo run --release --example application_pipeline -- 1456 6024
//! ```

use margspline::application::{run_application, ApplicationConfig, SyntheticPair};
use margspline::simulate::ss_marginal;

fn main() -> margspline::Result<()> {
    let mut args = std::env::args().skip(1);
    let n_h: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(1456);
    let n_v: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(6024);

    for interaction in [false, true] {
        let pair = SyntheticPair::generate(n_h, n_v, interaction, 8);
        let config = ApplicationConfig { interaction, ..ApplicationConfig::default() };
        let report = run_application(&pair.h, &pair.v, &config)?;
        let truth = pair.true_marginal(&report.v_marginal.curve.x_test)?;

        println!("interaction {interaction}: lambda1 {} lambda2 {:?}", report.lambda1, report.lambda2);
        println!("  V marginal vs truth: {:.4}", ss_marginal(&report.v_marginal.curve, &truth)?);
        for m in &report.models {
            let curve = margspline::marginal::MarginalCurve::new(truth.x_test.clone(), m.marginal.clone())?;
            println!(
                "  {}: marginal SS vs V {:.3}, vs truth {:.4}",
                m.model.name(),
                m.ss_marginal,
                ss_marginal(&curve, &truth)?
            );
        }
        for w in &report.warnings {
            println!("  warning: {w}");
        }
    }
    Ok(())
}
