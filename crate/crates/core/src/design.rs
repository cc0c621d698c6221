//! Design matrices and roughness penalties for the additive and interaction
//! layouts.
//!
//! Each covariate is expanded in a clamped cubic basis of `p + 1` functions on
//! `[0, 1]` and the first function is dropped, leaving `p` columns per
//! covariate. Without the drop the basis columns of a covariate sum to one and
//! duplicate the intercept, which makes every normal matrix singular.
//!
//! Column layout:
//!
//! * `Additive`: `[1 | Bx (px) | Bz (pz)]`
//! * `Interaction`: `[1 | Bx[:,j] * Bz[:,k]]` for `j` in `0..px`, `k` in `0..pz`,
//!   j-major, so column `1 + j * pz + k`
//! * `XOnly`: `[1 | Bx (px)]`, used for single-covariate (vertical) data

use ndarray::{s, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::basis::{eval_basis, second_difference_matrix, BasisMatrix, BasisSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutKind {
    Additive,
    Interaction,
    XOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub kind: LayoutKind,
    pub px: usize,
    /// Ignored for `XOnly`.
    pub pz: usize,
    pub degree: usize,
}

impl Layout {
    pub const INTERCEPT_COL: usize = 0;

    pub fn additive(px: usize, pz: usize) -> Self {
        Layout { kind: LayoutKind::Additive, px, pz, degree: 3 }
    }

    pub fn interaction(px: usize, pz: usize) -> Self {
        Layout { kind: LayoutKind::Interaction, px, pz, degree: 3 }
    }

    pub fn x_only(px: usize) -> Self {
        Layout { kind: LayoutKind::XOnly, px, pz: 0, degree: 3 }
    }

    pub fn with_interaction(interaction: bool, px: usize, pz: usize) -> Self {
        if interaction {
            Self::interaction(px, pz)
        } else {
            Self::additive(px, pz)
        }
    }

    /// Number of columns of the design matrix, intercept included.
    pub fn ncols(&self) -> usize {
        match self.kind {
            LayoutKind::Additive => 1 + self.px + self.pz,
            LayoutKind::Interaction => 1 + self.px * self.pz,
            LayoutKind::XOnly => 1 + self.px,
        }
    }

    /// Full basis for x; the design keeps all but its first column.
    pub fn basis_x(&self) -> BasisSpec {
        BasisSpec { degree: self.degree, num_basis: self.px + 1, domain_lo: 0.0, domain_hi: 1.0 }
    }

    pub fn basis_z(&self) -> BasisSpec {
        BasisSpec { degree: self.degree, num_basis: self.pz + 1, domain_lo: 0.0, domain_hi: 1.0 }
    }

    fn validate(&self) -> Result<()> {
        if self.px == 0 || (self.kind != LayoutKind::XOnly && self.pz == 0) {
            return Err(Error::config("basis sizes must be positive"));
        }
        Ok(())
    }

    /// Checks the identifiability restriction `ncols < n_rows`.
    pub fn check_size(&self, n_rows: usize) -> Result<()> {
        if self.ncols() >= n_rows {
            return Err(Error::config(format!(
                "{:?} layout with px = {}, pz = {} needs {} columns, which must be fewer than the {} rows",
                self.kind,
                self.px,
                self.pz,
                self.ncols(),
                n_rows
            )));
        }
        Ok(())
    }

    /// Evaluate the design at arbitrary points, without the row-count
    /// restriction. `z` is ignored for `XOnly`.
    pub fn design_at(&self, x: &[f64], z: &[f64]) -> Result<DesignMatrix> {
        self.validate()?;
        let bx = eval_basis(&self.basis_x(), x)?;
        match self.kind {
            LayoutKind::XOnly => Ok(assemble_x_only(&bx, self)),
            LayoutKind::Additive | LayoutKind::Interaction => {
                let bz = eval_basis(&self.basis_z(), z)?;
                if bx.nrows() != bz.nrows() {
                    return Err(Error::shape(format!("x has {} rows but z has {}", bx.nrows(), bz.nrows())));
                }
                Ok(if self.kind == LayoutKind::Additive {
                    assemble_additive(&bx, &bz, self)
                } else {
                    assemble_interaction(&bx, &bz, self)
                })
            }
        }
    }

    /// Evaluate the design at data points, enforcing the row-count restriction.
    pub fn design(&self, x: &[f64], z: &[f64]) -> Result<DesignMatrix> {
        let d = self.design_at(x, z)?;
        self.check_size(d.nrows())?;
        Ok(d)
    }
}

#[derive(Debug, Clone)]
pub struct DesignMatrix {
    pub values: Array2<f64>,
    pub layout: Layout,
}

impl DesignMatrix {
    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }
}

/// Roughness matrices along x (`p1`) and z (`p2`), each sized to multiply the
/// full coefficient vector. Their intercept column is zero.
#[derive(Debug, Clone)]
pub struct PenaltyPair {
    pub p1: Array2<f64>,
    pub p2: Array2<f64>,
}

impl PenaltyPair {
    /// `Ω = P1ᵀP1 + P2ᵀP2`
    pub fn omega(&self) -> Array2<f64> {
        self.p1.t().dot(&self.p1) + self.p2.t().dot(&self.p2)
    }
}

fn dropped(b: &BasisMatrix) -> ndarray::ArrayView2<'_, f64> {
    b.values.slice(s![.., 1..])
}

fn assemble_x_only(bx: &BasisMatrix, layout: &Layout) -> DesignMatrix {
    let n = bx.nrows();
    let mut values = Array2::<f64>::ones((n, layout.ncols()));
    values.slice_mut(s![.., 1..]).assign(&dropped(bx));
    DesignMatrix { values, layout: *layout }
}

fn assemble_additive(bx: &BasisMatrix, bz: &BasisMatrix, layout: &Layout) -> DesignMatrix {
    let n = bx.nrows();
    let px = layout.px;
    let mut values = Array2::<f64>::ones((n, layout.ncols()));
    values.slice_mut(s![.., 1..1 + px]).assign(&dropped(bx));
    values.slice_mut(s![.., 1 + px..]).assign(&dropped(bz));
    DesignMatrix { values, layout: *layout }
}

fn assemble_interaction(bx: &BasisMatrix, bz: &BasisMatrix, layout: &Layout) -> DesignMatrix {
    let n = bx.nrows();
    let (px, pz) = (layout.px, layout.pz);
    let (dx, dz) = (dropped(bx), dropped(bz));
    let mut values = Array2::<f64>::ones((n, layout.ncols()));
    for i in 0..n {
        for j in 0..px {
            let xj = dx[[i, j]];
            for k in 0..pz {
                values[[i, 1 + j * pz + k]] = xj * dz[[i, k]];
            }
        }
    }
    DesignMatrix { values, layout: *layout }
}

fn check_pair(bx: &BasisMatrix, bz: &BasisMatrix) -> Result<()> {
    if bx.nrows() != bz.nrows() {
        return Err(Error::shape(format!("Bx has {} rows but Bz has {}", bx.nrows(), bz.nrows())));
    }
    if bx.spec.num_basis < 2 || bz.spec.num_basis < 2 {
        return Err(Error::config("each basis needs at least two functions"));
    }
    Ok(())
}

/// `[1 | Bx | Bz]` from full bases (first column of each dropped).
pub fn build_additive_design(bx: &BasisMatrix, bz: &BasisMatrix) -> Result<DesignMatrix> {
    check_pair(bx, bz)?;
    let layout = Layout {
        kind: LayoutKind::Additive,
        px: bx.spec.num_basis - 1,
        pz: bz.spec.num_basis - 1,
        degree: bx.spec.degree,
    };
    layout.check_size(bx.nrows())?;
    Ok(assemble_additive(bx, bz, &layout))
}

/// `[1 | Bx ⊙ Bz]` with j-major column order, from full bases.
pub fn build_interaction_design(bx: &BasisMatrix, bz: &BasisMatrix) -> Result<DesignMatrix> {
    check_pair(bx, bz)?;
    let layout = Layout {
        kind: LayoutKind::Interaction,
        px: bx.spec.num_basis - 1,
        pz: bz.spec.num_basis - 1,
        degree: bx.spec.degree,
    };
    layout.check_size(bx.nrows())?;
    Ok(assemble_interaction(bx, bz, &layout))
}

fn kron(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::<f64>::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[[i, j]];
            if aij != 0.0 {
                out.slice_mut(s![i * br..(i + 1) * br, j * bc..(j + 1) * bc]).assign(&(b * aij));
            }
        }
    }
    out
}

fn pad_intercept(block: Array2<f64>) -> Array2<f64> {
    let mut out = Array2::<f64>::zeros((block.nrows(), block.ncols() + 1));
    out.slice_mut(s![.., 1..]).assign(&block);
    out
}

pub fn build_roughness(layout: &Layout) -> Result<PenaltyPair> {
    let (px, pz) = (layout.px, layout.pz);
    let m = layout.ncols();
    match layout.kind {
        LayoutKind::Additive => {
            let (dx, dz) = (second_difference_matrix(px)?, second_difference_matrix(pz)?);
            let mut p1 = Array2::<f64>::zeros((px - 2, m));
            p1.slice_mut(s![.., 1..1 + px]).assign(&dx);
            let mut p2 = Array2::<f64>::zeros((pz - 2, m));
            p2.slice_mut(s![.., 1 + px..]).assign(&dz);
            Ok(PenaltyPair { p1, p2 })
        }
        LayoutKind::Interaction => {
            let (dx, dz) = (second_difference_matrix(px)?, second_difference_matrix(pz)?);
            // x is the slow index, so differences along x are Δx ⊗ I and along z are I ⊗ Δz.
            let p1 = pad_intercept(kron(&dx, &Array2::eye(pz)));
            let p2 = pad_intercept(kron(&Array2::eye(px), &dz));
            Ok(PenaltyPair { p1, p2 })
        }
        LayoutKind::XOnly => {
            let dx = second_difference_matrix(px)?;
            Ok(PenaltyPair { p1: pad_intercept(dx), p2: Array2::zeros((0, m)) })
        }
    }
}

/// Repeat every row block `nrep` times (block order: all rows, then all rows again).
pub(crate) fn repeat_rows(values: &Array2<f64>, nrep: usize) -> Array2<f64> {
    let views: Vec<_> = (0..nrep).map(|_| values.view()).collect();
    ndarray::concatenate(Axis(0), &views).expect("identical column counts")
}
