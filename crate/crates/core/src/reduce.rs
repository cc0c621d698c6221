//! Collapse covariate blocks to the scalar `x` and `z` used by the fits, and
//! trim extreme rows.

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::application::{HData, VData};
use crate::design::{DesignMatrix, Layout};
use crate::error::{Error, Result};
use crate::fit_linear::ModelId;
use crate::fit_logistic::{newton_raphson, NewtonConfig, Penalties};
use crate::linalg::symmetric_eigen;

#[derive(Debug, Clone, PartialEq)]
pub struct CovariateBlock {
    /// `[N × p]`.
    pub values: Array2<f64>,
    pub names: Vec<String>,
}

impl CovariateBlock {
    pub fn new(values: Array2<f64>, names: Vec<String>) -> Result<Self> {
        if values.ncols() == 0 {
            return Err(Error::config("a covariate block needs at least one column"));
        }
        if names.len() != values.ncols() {
            return Err(Error::shape(format!("{} names for {} columns", names.len(), values.ncols())));
        }
        if let Some(((r, c), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Schema(format!("covariate {} has non-finite value {v} at row {r}", names[c])));
        }
        Ok(CovariateBlock { values, names })
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReductionMethod {
    LinearPredictor,
    Pca,
}

/// Affine map of `[lo, hi]` onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rescale {
    pub lo: f64,
    pub hi: f64,
}

impl Rescale {
    pub fn fit(values: &[f64]) -> Result<Self> {
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !(hi > lo) {
            return Err(Error::Reduction(format!("cannot rescale: values span [{lo}, {hi}]")));
        }
        Ok(Rescale { lo, hi })
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.lo) / (self.hi - self.lo)
    }

    pub fn apply_all(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|&v| self.apply(v)).collect()
    }
}

/// A fitted linear reduction `score = intercept + Σ w_j (v_j − center_j) / scale_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reducer {
    pub method: ReductionMethod,
    /// Columns used, in order; zero-variance columns are left out.
    pub names: Vec<String>,
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// Share of standardized variance carried by the first component (PCA only).
    pub explained: Option<f64>,
}

impl Reducer {
    /// Raw scores of `block`, which must contain every column this reducer uses.
    pub fn scores(&self, block: &CovariateBlock) -> Result<Vec<f64>> {
        let cols: Vec<usize> = self
            .names
            .iter()
            .map(|n| {
                block
                    .names
                    .iter()
                    .position(|b| b == n)
                    .ok_or_else(|| Error::Schema(format!("covariate {n} is missing")))
            })
            .collect::<Result<_>>()?;
        Ok(block
            .values
            .rows()
            .into_iter()
            .map(|row| {
                cols.iter().enumerate().fold(self.intercept, |acc, (j, &c)| {
                    acc + self.weights[j] * (row[c] - self.center[j]) / self.scale[j]
                })
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedVector {
    /// Rescaled scores.
    pub values: Vec<f64>,
    pub method: ReductionMethod,
    pub raw: Vec<f64>,
    pub rescale: Rescale,
    pub reducer: Reducer,
    pub warnings: Vec<String>,
}

/// Column means and sample standard deviations; zero-variance columns are
/// reported separately.
/// Standardized kept columns, their indices, centers, scales and warnings.
type Standardized = (Array2<f64>, Vec<usize>, Vec<f64>, Vec<f64>, Vec<String>);

fn standardize(block: &CovariateBlock) -> Result<Standardized> {
    let n = block.nrows();
    if n < 2 {
        return Err(Error::Reduction("need at least two rows".into()));
    }
    let mut keep = Vec::new();
    let (mut center, mut scale) = (Vec::new(), Vec::new());
    let mut warnings = Vec::new();
    for (j, col) in block.values.axis_iter(Axis(1)).enumerate() {
        let m = col.sum() / n as f64;
        let sd = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        if sd > 0.0 {
            keep.push(j);
            center.push(m);
            scale.push(sd);
        } else {
            warnings.push(format!("covariate {} has zero variance and was dropped", block.names[j]));
        }
    }
    if keep.is_empty() {
        return Err(Error::Reduction("every covariate has zero variance".into()));
    }
    let mut z = block.values.select(Axis(1), &keep);
    for (j, mut col) in z.axis_iter_mut(Axis(1)).enumerate() {
        col.mapv_inplace(|v| (v - center[j]) / scale[j]);
    }
    Ok((z, keep, center, scale, warnings))
}

fn finish(block: &CovariateBlock, reducer: Reducer, warnings: Vec<String>) -> Result<ReducedVector> {
    let raw = reducer.scores(block)?;
    let rescale = Rescale::fit(&raw)?;
    Ok(ReducedVector { values: rescale.apply_all(&raw), method: reducer.method, raw, rescale, reducer, warnings })
}

/// The link-scale linear predictor of an unpenalized logistic regression of
/// `y` on the block, rescaled to `[0, 1]`.
pub fn glm_linear_predictor(block: &CovariateBlock, y: &[f64], newton: &NewtonConfig) -> Result<ReducedVector> {
    if y.len() != block.nrows() {
        return Err(Error::shape(format!("block has {} rows but y has length {}", block.nrows(), y.len())));
    }
    let (z, keep, center, scale, warnings) = standardize(block)?;
    let n = z.nrows();
    let mut values = Array2::<f64>::ones((n, z.ncols() + 1));
    values.slice_mut(ndarray::s![.., 1..]).assign(&z);
    let d = DesignMatrix { values, layout: Layout::x_only(z.ncols()) };
    let fit = newton_raphson(ModelId::Fit0, &d, y, newton, &Penalties::none())
        .map_err(|e| Error::Reduction(format!("logistic fit failed ({e}); try trimming or PCA")))?;
    if fit.quasi_separation || !fit.converged {
        return Err(Error::Reduction(
            "the block separates the response, so the linear predictor is not identified; try trimming or PCA".into(),
        ));
    }
    let reducer = Reducer {
        method: ReductionMethod::LinearPredictor,
        names: keep.iter().map(|&j| block.names[j].clone()).collect(),
        center,
        scale,
        weights: fit.beta.iter().skip(1).cloned().collect(),
        intercept: fit.beta[0],
        explained: None,
    };
    finish(block, reducer, warnings)
}

/// Scores on the first principal component of the standardized block,
/// rescaled to `[0, 1]`. The loading of largest magnitude is made positive.
pub fn pca_first_component(block: &CovariateBlock) -> Result<ReducedVector> {
    let (z, keep, center, scale, warnings) = standardize(block)?;
    let n = z.nrows();
    let cov = z.t().dot(&z) / (n - 1) as f64;
    let (vals, vecs) = symmetric_eigen(cov.view());
    let mut v: Array1<f64> = vecs.column(0).to_owned();
    let lead = v.iter().enumerate().fold(0, |best, (i, x)| if x.abs() > v[best].abs() { i } else { best });
    if v[lead] < 0.0 {
        v.mapv_inplace(|x| -x);
    }
    let total: f64 = vals.iter().sum();
    let reducer = Reducer {
        method: ReductionMethod::Pca,
        names: keep.iter().map(|&j| block.names[j].clone()).collect(),
        center,
        scale,
        weights: v.to_vec(),
        intercept: 0.0,
        explained: Some(vals[0] / total),
    };
    finish(block, reducer, warnings)
}

pub fn reduce_block(
    block: &CovariateBlock,
    y: &[f64],
    method: ReductionMethod,
    newton: &NewtonConfig,
) -> Result<ReducedVector> {
    match method {
        ReductionMethod::LinearPredictor => glm_linear_predictor(block, y, newton),
        ReductionMethod::Pca => pca_first_component(block),
    }
}

/// Sample quantile with linear interpolation between order statistics.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let h = (s.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(s.len() - 1);
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trimmed {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub y: Vec<f64>,
    /// Indices of the retained rows in the input.
    pub kept: Vec<usize>,
    pub removed: usize,
    /// Maps applied to the retained `x` and `z`.
    pub x_rescale: Rescale,
    pub z_rescale: Rescale,
}

/// Drop rows whose `x` or `z` lies outside its `[lower_q, upper_q]` sample
/// quantiles, then rescale the survivors to `[0, 1]`.
pub fn trim_extremes(x: &[f64], z: &[f64], y: &[f64], lower_q: f64, upper_q: f64) -> Result<Trimmed> {
    if !(0.0 <= lower_q && lower_q < upper_q && upper_q <= 1.0) {
        return Err(Error::config(format!(
            "trimming quantiles ({lower_q}, {upper_q}) must satisfy 0 ≤ lower < upper ≤ 1"
        )));
    }
    if x.len() != z.len() || x.len() != y.len() {
        return Err(Error::shape(format!("x, z, y have lengths {}, {}, {}", x.len(), z.len(), y.len())));
    }
    if x.is_empty() {
        return Err(Error::config("nothing to trim"));
    }
    let (xl, xh) = (quantile(x, lower_q), quantile(x, upper_q));
    let (zl, zh) = (quantile(z, lower_q), quantile(z, upper_q));
    let kept: Vec<usize> = (0..x.len()).filter(|&i| x[i] >= xl && x[i] <= xh && z[i] >= zl && z[i] <= zh).collect();
    if kept.is_empty() {
        return Err(Error::config("trimming removed every row"));
    }
    let pick = |v: &[f64]| kept.iter().map(|&i| v[i]).collect::<Vec<f64>>();
    let (kx, kz) = (pick(x), pick(z));
    let x_rescale = Rescale::fit(&kx).map_err(|_| Error::config("x is constant after trimming"))?;
    let z_rescale = Rescale::fit(&kz).map_err(|_| Error::config("z is constant after trimming"))?;
    Ok(Trimmed {
        x: x_rescale.apply_all(&kx),
        z: z_rescale.apply_all(&kz),
        y: pick(y),
        removed: x.len() - kept.len(),
        kept,
        x_rescale,
        z_rescale,
    })
}

/// Unreduced H: two covariate blocks and the response.
#[derive(Debug, Clone, PartialEq)]
pub struct RawH {
    pub x_block: CovariateBlock,
    pub z_block: CovariateBlock,
    pub y: Vec<f64>,
}

/// Unreduced V: the shared block and the response.
#[derive(Debug, Clone, PartialEq)]
pub struct RawV {
    pub x_block: CovariateBlock,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedPair {
    pub h: HData,
    pub v: Option<VData>,
    pub method: ReductionMethod,
    pub x_reducer: Reducer,
    pub z_reducer: Reducer,
    /// Affine maps from raw scores to the final `[0, 1]` values.
    pub x_rescale: Rescale,
    pub z_rescale: Rescale,
    pub removed_h: usize,
    pub removed_v: usize,
    pub warnings: Vec<String>,
}

/// Reduce both blocks of H, apply the x reduction to V, and optionally trim H.
///
/// Both reductions are fitted on H because only H holds the z block. Without
/// trimming, `x` is rescaled over H and V together so both lie in `[0, 1]`.
/// With trimming, the survivors of H define the rescaling and V rows that fall
/// outside it are dropped.
pub fn reduce_pair(
    h: &RawH,
    v: Option<&RawV>,
    method: ReductionMethod,
    trim: Option<(f64, f64)>,
    newton: &NewtonConfig,
) -> Result<ReducedPair> {
    if h.x_block.nrows() != h.y.len() || h.z_block.nrows() != h.y.len() {
        return Err(Error::shape("H blocks and response differ in length"));
    }
    let rx = reduce_block(&h.x_block, &h.y, method, newton)?;
    let rz = reduce_block(&h.z_block, &h.y, method, newton)?;
    let mut warnings: Vec<String> = rx.warnings.iter().chain(&rz.warnings).cloned().collect();
    let v_raw = match v {
        Some(v) => {
            if v.x_block.nrows() != v.y.len() {
                return Err(Error::shape("V block and response differ in length"));
            }
            Some(rx.reducer.scores(&v.x_block)?)
        }
        None => None,
    };
    let union: Vec<f64> = rx.raw.iter().chain(v_raw.iter().flatten()).cloned().collect();
    let mut x_rescale = Rescale::fit(&union)?;
    let mut z_rescale = rz.rescale;
    let (hx, hz) = (x_rescale.apply_all(&rx.raw), z_rescale.apply_all(&rz.raw));

    let (h_data, removed_h) = match trim {
        None => (HData { x: hx, z: hz, y: h.y.clone() }, 0),
        Some((lo, hi)) => {
            let t = trim_extremes(&rx.raw, &rz.raw, &h.y, lo, hi)?;
            x_rescale = t.x_rescale;
            z_rescale = t.z_rescale;
            (HData { x: t.x, z: t.z, y: t.y }, t.removed)
        }
    };

    let mut removed_v = 0;
    let v_data = v.zip(v_raw).map(|(v, raw)| {
        let (mut x, mut y) = (Vec::with_capacity(raw.len()), Vec::with_capacity(raw.len()));
        for (r, &yv) in raw.iter().zip(&v.y) {
            let s = x_rescale.apply(*r);
            if (0.0..=1.0).contains(&s) {
                x.push(s);
                y.push(yv);
            } else {
                removed_v += 1;
            }
        }
        VData { x, y }
    });
    if removed_v > 0 {
        warnings.push(format!("{removed_v} V rows fell outside the trimmed x range and were dropped"));
    }
    Ok(ReducedPair {
        h: h_data,
        v: v_data,
        method,
        x_reducer: rx.reducer,
        z_reducer: rz.reducer,
        x_rescale,
        z_rescale,
        removed_h,
        removed_v,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit_logistic::expit;
    use ndarray::{array, Array1};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|j| format!("c{j}")).collect()
    }

    fn logistic_block(seed: u64, n: usize, coefs: &[f64]) -> (CovariateBlock, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = coefs.len();
        let values = Array2::from_shape_fn((n, p), |(_, j)| rng.random::<f64>() * (j + 1) as f64);
        let y = values
            .rows()
            .into_iter()
            .map(|r| {
                let eta: f64 = r.iter().zip(coefs).map(|(a, b)| a * b).sum::<f64>() - 0.5;
                if rng.random::<f64>() < expit(eta) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        (CovariateBlock::new(values, names(p)).unwrap(), y)
    }

    /// Plain IRLS on the raw covariates with an intercept.
    fn irls(x: &Array2<f64>, y: &[f64]) -> Array1<f64> {
        let n = x.nrows();
        let mut d = Array2::<f64>::ones((n, x.ncols() + 1));
        d.slice_mut(ndarray::s![.., 1..]).assign(x);
        let mut beta = Array1::<f64>::zeros(d.ncols());
        for _ in 0..50 {
            let eta = d.dot(&beta);
            let mu = eta.mapv(expit);
            let w = mu.mapv(|m| m * (1.0 - m));
            let zwork: Array1<f64> = &eta + &((Array1::from(y.to_vec()) - &mu) / &w);
            let dw = &d * &w.view().insert_axis(Axis(1));
            let a = d.t().dot(&dw);
            let b = dw.t().dot(&zwork);
            beta = crate::linalg::solve_general(a.view(), b.view()).unwrap().x;
        }
        d.dot(&beta)
    }

    #[test]
    fn glm_matches_irls_oracle() {
        let (block, y) = logistic_block(3, 400, &[1.2, -0.8]);
        let r = glm_linear_predictor(&block, &y, &NewtonConfig::default()).unwrap();
        let eta = irls(&block.values, &y);
        for (a, b) in r.raw.iter().zip(eta.iter()) {
            assert!((a - b).abs() < 1e-6);
        }
        assert_eq!(r.values.iter().cloned().fold(f64::INFINITY, f64::min), 0.0);
        assert_eq!(r.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max), 1.0);
    }

    #[test]
    fn single_column_preserves_order() {
        let (block, y) = logistic_block(4, 300, &[2.0]);
        let r = glm_linear_predictor(&block, &y, &NewtonConfig::default()).unwrap();
        let col = block.values.column(0);
        for i in 0..300 {
            for j in 0..300 {
                if col[i] < col[j] {
                    assert!(r.values[i] < r.values[j]);
                }
            }
        }
    }

    #[test]
    fn duplicated_column_gives_same_predictor() {
        let (block, y) = logistic_block(5, 300, &[2.0]);
        let single = glm_linear_predictor(&block, &y, &NewtonConfig::default()).unwrap();
        let dup = ndarray::concatenate(Axis(1), &[block.values.view(), block.values.view()]).unwrap();
        let dup = CovariateBlock::new(dup, names(2)).unwrap();
        match glm_linear_predictor(&dup, &y, &NewtonConfig::default()) {
            Ok(r) => {
                for (a, b) in r.values.iter().zip(&single.values) {
                    assert!((a - b).abs() < 1e-6);
                }
            }
            Err(e) => assert!(matches!(e, Error::Reduction(_) | Error::Rank { .. })),
        }
    }

    #[test]
    fn separated_response_is_reduction_error() {
        let values = Array2::from_shape_fn((40, 1), |(i, _)| i as f64);
        let y: Vec<f64> = (0..40).map(|i| if i < 20 { 0.0 } else { 1.0 }).collect();
        let block = CovariateBlock::new(values, names(1)).unwrap();
        assert!(matches!(glm_linear_predictor(&block, &y, &NewtonConfig::default()), Err(Error::Reduction(_))));
    }

    #[test]
    fn pca_single_column_is_affine() {
        let values = array![[3.0], [1.0], [2.0], [7.0]];
        let r = pca_first_component(&CovariateBlock::new(values, names(1)).unwrap()).unwrap();
        for (a, b) in r.values.iter().zip([1.0 / 3.0, 0.0, 1.0 / 6.0, 1.0]) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!((r.reducer.explained.unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn pca_perfectly_correlated_columns() {
        let values = Array2::from_shape_fn((10, 2), |(i, j)| if j == 0 { i as f64 } else { 5.0 - 2.0 * i as f64 });
        let r = pca_first_component(&CovariateBlock::new(values, names(2)).unwrap()).unwrap();
        assert!((r.reducer.explained.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pca_hand_eigenvector() {
        // standardized columns of [[0,0],[1,2],[2,1]] have correlation 0.5,
        // so the leading eigenvector of [[1, .5], [.5, 1]] is (1, 1)/√2
        let values = array![[0.0, 0.0], [1.0, 2.0], [2.0, 1.0]];
        let r = pca_first_component(&CovariateBlock::new(values, names(2)).unwrap()).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((r.reducer.weights[0] - h).abs() < 1e-10);
        assert!((r.reducer.weights[1] - h).abs() < 1e-10);
        assert!((r.reducer.explained.unwrap() - 0.75).abs() < 1e-10);
    }

    #[test]
    fn pca_sign_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let values = Array2::from_shape_fn((50, 4), |_| rng.random::<f64>());
        let block = CovariateBlock::new(values, names(4)).unwrap();
        let a = pca_first_component(&block).unwrap();
        let b = pca_first_component(&block).unwrap();
        assert_eq!(a, b);
        let w = &a.reducer.weights;
        let lead = w.iter().cloned().fold(0.0_f64, |m, v| if v.abs() > m.abs() { v } else { m });
        assert!(lead > 0.0);
    }

    #[test]
    fn zero_variance_column_dropped() {
        let values = array![[1.0, 4.0], [2.0, 4.0], [5.0, 4.0]];
        let r = pca_first_component(&CovariateBlock::new(values, names(2)).unwrap()).unwrap();
        assert_eq!(r.reducer.names, vec!["c0".to_string()]);
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn rescale_is_idempotent() {
        let v = vec![0.0, 0.25, 1.0, 0.5];
        assert_eq!(Rescale::fit(&v).unwrap().apply_all(&v), v);
    }

    #[test]
    fn full_quantile_range_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..50)
            .map(|i| {
                if i == 0 {
                    0.0
                } else if i == 1 {
                    1.0
                } else {
                    rng.random()
                }
            })
            .collect();
        let z = x.iter().rev().cloned().collect::<Vec<_>>();
        let y = vec![0.0; 50];
        let t = trim_extremes(&x, &z, &y, 0.0, 1.0).unwrap();
        assert_eq!(t.removed, 0);
        assert_eq!(t.x, x);
    }

    #[test]
    fn trimming_matches_direct_filter() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<f64> = (0..100).map(|_| rng.random()).collect();
        let z: Vec<f64> = (0..100).map(|_| rng.random()).collect();
        let y: Vec<f64> = (0..100).map(|i| (i % 2) as f64).collect();
        let t = trim_extremes(&x, &z, &y, 0.05, 0.95).unwrap();
        let band = |v: &[f64]| {
            let mut s = v.to_vec();
            s.sort_by(f64::total_cmp);
            // (n − 1)q = 4.95 and 94.05
            (s[4] + 0.95 * (s[5] - s[4]), s[94] + 0.05 * (s[95] - s[94]))
        };
        let ((xl, xh), (zl, zh)) = (band(&x), band(&z));
        let expected = (0..100).filter(|&i| x[i] < xl || x[i] > xh || z[i] < zl || z[i] > zh).count();
        assert_eq!(t.removed, expected);
        assert!(t.removed >= 10 && t.removed <= 20);
        assert_eq!(t.x.iter().cloned().fold(f64::INFINITY, f64::min), 0.0);
        assert_eq!(t.z.iter().cloned().fold(f64::NEG_INFINITY, f64::max), 1.0);
    }

    #[test]
    fn pair_shares_x_map_between_h_and_v() {
        let (hx, y) = logistic_block(7, 200, &[1.0, -1.0]);
        let (hz, _) = logistic_block(8, 200, &[0.5, 0.5, 0.5]);
        let (vx, vy) = logistic_block(9, 500, &[1.0, -1.0]);
        let h = RawH { x_block: hx.clone(), z_block: hz, y };
        let v = RawV { x_block: vx.clone(), y: vy };
        let newton = NewtonConfig::default();
        for method in [ReductionMethod::LinearPredictor, ReductionMethod::Pca] {
            let p = reduce_pair(&h, Some(&v), method, None, &newton).unwrap();
            let v = p.v.as_ref().unwrap();
            assert_eq!(v.x.len(), 500);
            let all: Vec<f64> = p.h.x.iter().chain(&v.x).cloned().collect();
            assert_eq!(all.iter().cloned().fold(f64::INFINITY, f64::min), 0.0);
            assert_eq!(all.iter().cloned().fold(f64::NEG_INFINITY, f64::max), 1.0);
            // the same covariate row maps to the same x in H and V
            let both =
                CovariateBlock::new(hx.values.slice(ndarray::s![0..1, ..]).to_owned(), hx.names.clone()).unwrap();
            let s = p.x_rescale.apply(p.x_reducer.scores(&both).unwrap()[0]);
            assert!((s - p.h.x[0]).abs() < 1e-12);
            let t = reduce_pair(&h, Some(&v_raw(&vx, &v.y)), method, Some((0.05, 0.95)), &newton).unwrap();
            assert!(t.removed_h > 0);
            assert!(t.v.unwrap().x.iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }

    fn v_raw(block: &CovariateBlock, y: &[f64]) -> RawV {
        let n = y.len();
        RawV {
            x_block: CovariateBlock::new(block.values.slice(ndarray::s![0..n, ..]).to_owned(), block.names.clone())
                .unwrap(),
            y: y.to_vec(),
        }
    }

    #[test]
    fn trimming_errors() {
        assert!(matches!(trim_extremes(&[0.1], &[0.1], &[0.0], 0.5, 0.5), Err(Error::Config(_))));
        assert!(matches!(trim_extremes(&[0.1, 0.2], &[0.1], &[0.0], 0.0, 1.0), Err(Error::Shape(_))));
    }
}
