//! Collapse two covariate blocks to one score each, by principal components
//! and by a logistic linear predictor, and trim the extreme rows.
//!
//! ```text
//! cargo run --release --example covariate_reduction
//! ```

use margspline::fit_logistic::{expit, NewtonConfig};
use margspline::reduce::{reduce_pair, CovariateBlock, RawH, RawV, ReductionMethod};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn cohort(rng: &mut ChaCha8Rng, n: usize) -> (Array2<f64>, Array2<f64>, Vec<f64>) {
    let mut xb = Array2::zeros((n, 3));
    let mut zb = Array2::zeros((n, 2));
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let u: f64 = StandardNormal.sample(rng);
        let w: f64 = StandardNormal.sample(rng);
        for j in 0..3 {
            let e: f64 = StandardNormal.sample(rng);
            xb[[i, j]] = u + 0.5 * e;
        }
        for j in 0..2 {
            let e: f64 = StandardNormal.sample(rng);
            zb[[i, j]] = w + 0.5 * e;
        }
        y.push(if rng.random::<f64>() < expit(0.8 * u - 0.5 * w) { 1.0 } else { 0.0 });
    }
    (xb, zb, y)
}

fn main() -> margspline::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (hx, hz, hy) = cohort(&mut rng, 800);
    let (vx, _, vy) = cohort(&mut rng, 2000);
    let names = |k: &str, m: usize| (1..=m).map(|j| format!("{k}{j}")).collect::<Vec<_>>();
    let h = RawH {
        x_block: CovariateBlock::new(hx, names("x", 3))?,
        z_block: CovariateBlock::new(hz, names("z", 2))?,
        y: hy,
    };
    let v = RawV { x_block: CovariateBlock::new(vx, names("x", 3))?, y: vy };

    let newton = NewtonConfig::default();
    for method in [ReductionMethod::Pca, ReductionMethod::LinearPredictor] {
        for trim in [None, Some((0.01, 0.99))] {
            let r = reduce_pair(&h, Some(&v), method, trim, &newton)?;
            println!(
                "{method:?} trim {trim:?}: x weights {:?}, H rows {} (removed {}), V rows removed {}",
                r.x_reducer.weights.iter().map(|w| (w * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
                r.h.x.len(),
                r.removed_h,
                r.removed_v
            );
        }
    }
    Ok(())
}
