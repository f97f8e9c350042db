//! Identifiability of a generic point from a coordinate sample or a linear
//! measurement.
//!
//! At a smooth point the sampled map has finite generic fibers exactly when
//! its differential is injective on the tangent space, so the verdict is a
//! numerical rank test on the restricted tangent basis. This decides finite
//! identifiability, not uniqueness: a generic linear map with exactly
//! `dim` rows has finite fibers, and separating the finitely many
//! candidates needs more than `dim` rows.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::numerical_rank;
use crate::sampling::{LinearMeasurement, SampleMask};
use crate::variety::{Point, VarietyModel};

/// Default relative singular-value cutoff.
pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentifyVerdict {
    pub identifiable: bool,
    pub tangent_dim: usize,
    pub projected_rank: usize,
    pub smallest_retained_singular_value: f64,
    pub tolerance_used: f64,
}

impl IdentifyVerdict {
    fn from_restricted(restricted: &DMatrix<f64>, tangent_dim: usize, tol: f64) -> Self {
        let (projected_rank, smallest) = numerical_rank(restricted, tol);
        IdentifyVerdict {
            identifiable: projected_rank == tangent_dim,
            tangent_dim,
            projected_rank,
            smallest_retained_singular_value: smallest,
            tolerance_used: tol,
        }
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::invalid(format!("rank tolerance {tol} must lie in (0, 1)")));
    }
    Ok(())
}

/// Verdict from an orthonormal tangent basis (`ambient × dim`) and a mask.
pub fn identifiable_from_basis(basis: &DMatrix<f64>, mask: &SampleMask, tol: f64) -> Result<IdentifyVerdict> {
    check_tol(tol)?;
    let restricted = mask.select_rows(basis)?;
    Ok(IdentifyVerdict::from_restricted(&restricted, basis.ncols(), tol))
}

pub fn identifiable_mask(
    model: &VarietyModel,
    point: &Point,
    mask: &SampleMask,
    tol: f64,
) -> Result<IdentifyVerdict> {
    if mask.ambient_dim() != model.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.ambient_dim(),
            found: mask.ambient_dim(),
        });
    }
    let tangent = model.tangent_space(point)?;
    identifiable_from_basis(tangent.basis(), mask, tol)
}

pub fn identifiable_linear(
    model: &VarietyModel,
    point: &Point,
    meas: &LinearMeasurement,
    tol: f64,
) -> Result<IdentifyVerdict> {
    check_tol(tol)?;
    if meas.input_dim() != model.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.ambient_dim(),
            found: meas.input_dim(),
        });
    }
    let tangent = model.tangent_space(point)?;
    let image = meas.matrix() * tangent.basis();
    Ok(IdentifyVerdict::from_restricted(&image, tangent.dim(), tol))
}

/// Margin below 1 under which a computed contraction norm counts as a
/// contraction. A rank-deficient restriction has norm exactly 1, and rounding
/// can place it a few ulps lower.
pub const CONTRACTION_MARGIN: f64 = 1e-12;

/// Spectral norm of `Σᵢ (εᵢ/ρ − 1) bᵢ bᵢᵀ` where `bᵢ` are the rows of an
/// orthonormal tangent basis and `εᵢ` the mask indicators.
pub fn contraction_norm_from_basis(basis: &DMatrix<f64>, mask: &SampleMask, rho: f64) -> Result<f64> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::invalid(format!("contraction needs 0 < rho <= 1, got {rho}")));
    }
    let eps = mask.indicators();
    if eps.len() != basis.nrows() {
        return Err(Error::DimensionMismatch {
            expected: basis.nrows(),
            found: eps.len(),
        });
    }
    let k = basis.ncols();
    let mut op = DMatrix::<f64>::zeros(k, k);
    for (i, row) in basis.row_iter().enumerate() {
        let coeff = if eps[i] { 1.0 / rho - 1.0 } else { -1.0 };
        if coeff != 0.0 {
            op.ger(coeff, &row.transpose(), &row.transpose(), 1.0);
        }
    }
    let eig = op.symmetric_eigenvalues();
    Ok(eig.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())))
}

pub fn contraction_norm(model: &VarietyModel, point: &Point, mask: &SampleMask, rho: f64) -> Result<f64> {
    if mask.ambient_dim() != model.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.ambient_dim(),
            found: mask.ambient_dim(),
        });
    }
    let tangent = model.tangent_space(point)?;
    contraction_norm_from_basis(tangent.basis(), mask, rho)
}
