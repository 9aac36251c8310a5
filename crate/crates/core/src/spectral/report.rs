use serde::{Deserialize, Serialize};

use super::{build_operator, check_self_adjoint, potential_coefficients, spectral_gap, SpectralGapEstimate};
use crate::error::Result;
use crate::model::ModelParams;

/// Serializable summary of the spectral analysis at one parameter point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub alpha: f64,
    pub beta: f64,
    pub choices: usize,
    pub rho: f64,
    pub dimension: usize,
    pub detailed_balance_residual: f64,
    pub self_adjoint_asymmetry: f64,
    pub max_column_sum: f64,
    pub gap: SpectralGapEstimate,
}

/// Builds the operator with `n_max - 1` states and collects every diagnostic.
pub fn spectral_report(params: &ModelParams, n_max: usize, tol: f64) -> Result<SpectralReport> {
    let gap = spectral_gap(params, n_max, tol)?;
    let op = build_operator(params, n_max - 1)?;
    let pi = potential_coefficients(&op)?;
    Ok(SpectralReport {
        alpha: params.alpha(),
        beta: params.beta(),
        choices: params.choices(),
        rho: params.rho(),
        dimension: op.dim(),
        detailed_balance_residual: pi.detailed_balance_residual(&op),
        self_adjoint_asymmetry: check_self_adjoint(&op, &pi)?,
        max_column_sum: op.column_sums().into_iter().fold(f64::NEG_INFINITY, f64::max),
        gap,
    })
}
