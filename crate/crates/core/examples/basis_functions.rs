//! Evaluate a cubic B-spline basis on a grid, check that it is a partition of
//! unity, and show how the additive and tensor designs are assembled from it.
//!
//! ```text
//! cargo run --example basis_functions -- 6
//! ```

use margspline::basis::{eval_basis, make_knot_vector, second_difference_matrix, BasisSpec};
use margspline::design::{build_roughness, Layout};

fn main() -> margspline::Result<()> {
    let p: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(6);
    let spec = BasisSpec::cubic(p);
    println!("knots: {:?}", make_knot_vector(&spec)?.knots);

    let xs: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let b = eval_basis(&spec, &xs)?;
    println!("\n   x  {}   row sum", (1..=p).map(|j| format!("  B{j:<4}")).collect::<String>());
    for (x, row) in xs.iter().zip(b.values.rows()) {
        let cells: String = row.iter().map(|v| format!(" {v:6.3}")).collect();
        println!("{x:5.2} {cells}  {:8.5}", row.sum());
    }

    println!("\nsecond differences for {p} coefficients:\n{}", second_difference_matrix(p)?);

    // The first column of each block is dropped so the intercept is identifiable.
    let x = [0.1, 0.4, 0.8];
    let z = [0.9, 0.5, 0.2];
    for layout in [Layout::additive(p, p), Layout::interaction(p, p)] {
        let d = layout.design_at(&x, &z)?;
        let pen = build_roughness(&layout)?;
        println!(
            "{:?}: design {}x{}, roughness rows {} + {}",
            layout.kind,
            d.nrows(),
            d.ncols(),
            pen.p1.nrows(),
            pen.p2.nrows()
        );
    }
    Ok(())
}
