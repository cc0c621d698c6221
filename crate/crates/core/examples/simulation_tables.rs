//! Monte Carlo comparison of Fit0, Fit1 and Fit2 over the twelve continuous
//! and eight binary configurations, using the tuned penalties of each row.
//!
//! Run with `cargo run --release --example simulation_tables -- 25`.

use margspline::fit_linear::ModelId;
use margspline::simulate::{reference_p, run_batch, FitRecipe, SimConfig, BINARY_REFERENCE, LINEAR_REFERENCE};

fn main() -> margspline::Result<()> {
    let nsim: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(25);
    println!("continuous response, nsim = {nsim}");
    println!("{:>5} {:>4} {:>4} | {:>26} | {:>26}", "inter", "n", "sd", "SS fitted 0/1/2", "SS marginal 0/1/2");
    for (inter, n, sd, l1a, l1b, l2) in LINEAR_REFERENCE {
        let cfg = SimConfig::linear(inter, n, sd, reference_p(n)).with_nsim(nsim).with_seed(2024);
        let r = run_batch(&cfg, &FitRecipe::new(l1a, l1b, l2))?;
        let f = |m| r.row(m).mean_ss_fitted;
        let g = |m| r.row(m).mean_ss_marginal;
        println!(
            "{:>5} {:>4} {:>4} | {:>8.3} {:>8.3} {:>8.3} | {:>8.4} {:>8.4} {:>8.4}",
            inter,
            n,
            sd,
            f(ModelId::Fit0),
            f(ModelId::Fit1),
            f(ModelId::Fit2),
            g(ModelId::Fit0),
            g(ModelId::Fit1),
            g(ModelId::Fit2)
        );
    }

    println!("\nbinary response, nsim = {nsim}");
    println!(
        "{:>5} {:>4} {:>3} {:>4} | {:>26} | {:>26} | failed",
        "inter", "n", "p", "nrep", "WSS fitted 0/1/2", "WSS marginal 0/1/2"
    );
    for (inter, n, p, nrep, l1a, l1b, l2) in BINARY_REFERENCE {
        let cfg = SimConfig::binary(inter, n, p, nrep).with_nsim(nsim).with_seed(2024);
        let r = run_batch(&cfg, &FitRecipe::new(l1a, l1b, l2))?;
        let f = |m| r.row(m).mean_wss_fitted.unwrap_or(f64::NAN);
        let g = |m| r.row(m).mean_wss_marginal.unwrap_or(f64::NAN);
        println!(
            "{:>5} {:>4} {:>3} {:>4} | {:>8.3} {:>8.3} {:>8.3} | {:>8.4} {:>8.4} {:>8.4} | {} (sep {})",
            inter,
            n,
            p,
            nrep,
            f(ModelId::Fit0),
            f(ModelId::Fit1),
            f(ModelId::Fit2),
            g(ModelId::Fit0),
            g(ModelId::Fit1),
            g(ModelId::Fit2),
            r.n_failed,
            r.row(ModelId::Fit0).n_quasi_separation
        );
    }
    Ok(())
}
