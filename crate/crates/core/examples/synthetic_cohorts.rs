//! Write a synthetic H/V pair to disk, both pre-reduced (`h.csv`, `v.csv`) and
//! as raw covariate blocks with manifests (`h_raw.csv`, `v_raw.csv`,
//! `h_manifest.json`, `v_manifest.json`), ready for the command line tool.
//!
//! ```text
//! cargo run --release --example synthetic_cohorts -- data 1456 6024
//! margspline --out results fit --h data/h.csv --v data/v.csv --grid1 0:20:1 --grid2 0:20:0.5
//! margspline --out reduced reduce --h data/h_raw.csv --h-manifest data/h_manifest.json \
//!     --v data/v_raw.csv --v-manifest data/v_manifest.json --method pca
//! ```

use std::fs;
use std::path::PathBuf;

use margspline::application::SyntheticPair;
use margspline::io::write_columns;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> margspline::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "cohorts".into()));
    let n_h: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(1456);
    let n_v: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(6024);
    fs::create_dir_all(&dir)?;

    let pair = SyntheticPair::generate(n_h, n_v, true, 11);
    write_columns(&dir.join("h.csv"), &["x", "z", "y"], &[&pair.h.x, &pair.h.z, &pair.h.y])?;
    write_columns(&dir.join("v.csv"), &["x", "y"], &[&pair.v.x, &pair.v.y])?;

    // Each latent covariate is seen through a few noisy, differently scaled columns.
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let noise = Normal::new(0.0, 0.05).unwrap();
    let mut view = |t: &[f64], scale: f64, shift: f64| -> Vec<f64> {
        t.iter().map(|&v| shift + scale * (v + noise.sample(&mut rng))).collect()
    };
    let (a1, a2, a3) = (view(&pair.h.x, 10.0, 40.0), view(&pair.h.x, 0.5, 0.0), view(&pair.h.x, 3.0, -1.0));
    let (b1, b2) = (view(&pair.h.z, 25.0, 18.0), view(&pair.h.z, 1.0, 2.0));
    write_columns(
        &dir.join("h_raw.csv"),
        &["y", "age", "bmi_ratio", "score", "marker_a", "marker_b"],
        &[&pair.h.y, &a1, &a2, &a3, &b1, &b2],
    )?;
    let (c1, c2, c3) = (view(&pair.v.x, 10.0, 40.0), view(&pair.v.x, 0.5, 0.0), view(&pair.v.x, 3.0, -1.0));
    write_columns(&dir.join("v_raw.csv"), &["y", "age", "bmi_ratio", "score"], &[&pair.v.y, &c1, &c2, &c3])?;
    fs::write(
        dir.join("h_manifest.json"),
        r#"{"x_block": ["age", "bmi_ratio", "score"], "z_block": ["marker_a", "marker_b"]}"#,
    )?;
    fs::write(dir.join("v_manifest.json"), r#"{"x_block": ["age", "bmi_ratio", "score"]}"#)?;
    println!("wrote H ({n_h} rows) and V ({n_v} rows) to {}", dir.display());
    Ok(())
}
