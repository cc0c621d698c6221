//! Estimate the marginal of a known probability surface with the Gaussian kernel smoother
//! and compare it with the exact marginal for a few bandwidths.
//!
//! ```text
//! cargo run --release --example kernel_marginal
//! ```

use margspline::fit_logistic::expit;
use margspline::marginal::{build_kernel, equidistant, estimate_marginal_logistic, true_marginal_oracle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> margspline::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 2000;
    let x: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    let z: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    let prob = |a: f64, b: f64| expit(2.0 * (3.0 * a).sin() - 2.0 * a * b);
    let theta: Vec<f64> = x.iter().zip(&z).map(|(&a, &b)| prob(a, b)).collect();

    let x_test = equidistant(11);
    let exact = true_marginal_oracle(prob, &x_test, 2000)?;

    print!("    x   exact");
    let bandwidths = [0.03, 0.07, 0.15];
    for s in bandwidths {
        print!("  s={s:<5}");
    }
    println!();
    let curves = bandwidths
        .iter()
        .map(|&s| estimate_marginal_logistic(&build_kernel(&x, &x_test, s)?, &theta))
        .collect::<margspline::Result<Vec<_>>>()?;
    for (i, xt) in x_test.iter().enumerate() {
        print!("{xt:5.2} {:7.3}", exact.theta[i]);
        for c in &curves {
            print!(" {:8.3}", c.theta[i]);
        }
        println!();
    }
    Ok(())
}
