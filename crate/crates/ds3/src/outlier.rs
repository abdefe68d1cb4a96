//! Outlier-tolerant encoding: targets may opt out of being represented.
//!
//! Each target column j gets a slack variable `e_j` with price `w_j`; the
//! simplex constraint becomes `Σ_i z_ij + e_j = 1`. Mechanically this is the
//! plain program on the (M+1)×N augmented matrix `[D; w⊤]` whose appended
//! row carries no row-sparsity penalty (zero prox threshold), so a target
//! whose cheapest encoding costs more than `w_j` shifts its mass to `e_j`
//! instead of forcing a far-away representative.

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, DissimilarityMatrix};
use crate::solver::{solve_rows, Solution, SolverSettings};

/// How the per-target outlier prices `w_j` are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum OutlierConfig {
    /// One shared price for every target.
    Constant(f64),
    /// `w_j = beta·exp(−min_i d_ij / tau)`: targets far from every source
    /// become cheap to discard. Compute on the same scale you solve on —
    /// normalize the matrix first so `beta` and `tau` keep a stable meaning.
    Adaptive { beta: f64, tau: f64 },
    /// Caller-supplied prices, one per target.
    Explicit(Vec<f64>),
}

/// Result of [`solve_with_outliers`].
#[derive(Debug, Clone)]
pub struct OutlierSolution {
    /// Encoding coefficients for the M real sources (masked entries 0).
    pub z: DenseMatrix,
    /// Outlier mass per target; `Σ_i z_ij + e_j = 1` exactly at the
    /// feasible iterate.
    pub e: Vec<f64>,
    /// The full augmented-system solution (objective, iterations,
    /// convergence, residuals; its `outliers` field repeats `e`).
    pub augmented: Solution,
}

impl OutlierSolution {
    /// Conventional classification: more than half of a target's mass on the
    /// slack variable flags it as an outlier. Re-threshold `e` directly for
    /// anything stricter.
    pub fn outlier_flags(&self) -> Vec<bool> {
        self.e.iter().map(|&v| v > 0.5).collect()
    }
}

/// Distance-decayed outlier prices `w_j = beta·exp(−min_i d_ij / tau)`,
/// minimizing over the observed entries of each column.
pub fn outlier_weights(d: &DissimilarityMatrix, beta: f64, tau: f64) -> Result<Vec<f64>> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "outlier price scale beta must be a nonnegative real, got {beta}"
        )));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "outlier decay tau must be a positive real, got {tau}"
        )));
    }
    Ok((0..d.cols())
        .map(|j| {
            // Every column has an observed entry by construction.
            let (_, min) = d.col_min_observed(j);
            beta * (-min / tau).exp()
        })
        .collect())
}

/// Solves the outlier-tolerant program by augmenting `d` with the price row
/// and running the standard solver with a penalty-free last row.
pub fn solve_with_outliers(
    d: &DissimilarityMatrix,
    lambda: f64,
    config: &OutlierConfig,
    settings: &SolverSettings,
) -> Result<OutlierSolution> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "regularization weight lambda must be a nonnegative real, got {lambda}"
        )));
    }
    let (m, n) = (d.rows(), d.cols());
    let weights: Vec<f64> = match config {
        OutlierConfig::Constant(w) => {
            if !(*w >= 0.0 && w.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "outlier price must be a nonnegative real, got {w}"
                )));
            }
            vec![*w; n]
        }
        OutlierConfig::Adaptive { beta, tau } => outlier_weights(d, *beta, *tau)?,
        OutlierConfig::Explicit(w) => {
            if w.len() != n {
                return Err(Error::InvalidArgument(format!(
                    "need one outlier price per target: got {} for {n} targets",
                    w.len()
                )));
            }
            for (j, &wj) in w.iter().enumerate() {
                if !(wj >= 0.0 && wj.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "outlier price for target {j} must be a nonnegative real, got {wj}"
                    )));
                }
            }
            w.clone()
        }
    };

    let mut values = d.values().as_slice().to_vec();
    values.extend_from_slice(&weights);
    let augmented_values = DenseMatrix::from_vec(m + 1, n, values)?;
    let augmented = match d.mask() {
        None => DissimilarityMatrix::from_parts(augmented_values, None, d.scale_factor())?,
        Some(mask) => {
            let mut full = mask.to_vec();
            full.extend(std::iter::repeat(true).take(n));
            DissimilarityMatrix::from_parts(augmented_values, Some(full), d.scale_factor())?
        }
    };

    let mut row_lambda = vec![lambda; m];
    row_lambda.push(0.0);
    let mut sol = solve_rows(&augmented, &row_lambda, settings, None)?;

    let flat = sol.z.as_slice();
    let z = DenseMatrix::from_vec(m, n, flat[..m * n].to_vec())?;
    let e = flat[m * n..].to_vec();
    sol.outliers = Some(e.clone());
    Ok(OutlierSolution { z, e, augmented: sol })
}
