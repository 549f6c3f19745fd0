use crate::error::{Error, Result};
use crate::model::{AffineModel, ParameterPoint};
use crate::reduction::ReducedModel;

use super::stability_constant;

/// The sure bounds at one parameter, with the ingredients they share.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SureBounds {
    pub alpha: f64,
    pub residual_norm: f64,
    /// `|l| |r| / alpha`, bounds `|s - s~|`.
    pub lipschitz: f64,
    /// `|r| |r_d| / alpha`, bounds `|s - s~_c|`; present when `rm` has a
    /// dual basis.
    pub dual_based: Option<f64>,
}

/// Evaluates both sure bounds with a single stability-constant solve.
pub fn sure_bounds(model: &AffineModel, rm: &ReducedModel, mu: &ParameterPoint) -> Result<SureBounds> {
    let alpha = stability_constant(model, mu)?;
    if !(alpha > 0.0) {
        return Err(Error::Degenerate(alpha));
    }
    let sol = rm.solve(mu)?;
    let residual_norm = rm.residual(model, &sol)?.norm();
    let lipschitz = model.output_vector().norm() * residual_norm / alpha;
    let dual_based = match rm.dual() {
        None => None,
        Some(_) => {
            let ud = rm.solve_dual(&sol)?;
            let rd = rm.dual_residual(model, &sol, &ud)?;
            Some(residual_norm * rd.norm() / alpha)
        }
    };
    Ok(SureBounds { alpha, residual_norm, lipschitz, dual_based })
}

/// Lipschitz bound `eps^L(mu) = |l| |r(mu)| / alpha(mu)` on `|s - s~|`.
pub fn lipschitz_bound(model: &AffineModel, rm: &ReducedModel, mu: &ParameterPoint) -> Result<f64> {
    Ok(sure_bounds(model, rm, mu)?.lipschitz)
}

/// Dual-based bound `eps_cc(mu) = |r(mu)| |r_d(mu)| / alpha(mu)` on
/// `|s - s~_c|`.
pub fn dual_based_bound(model: &AffineModel, rm: &ReducedModel, mu: &ParameterPoint) -> Result<f64> {
    if rm.dual().is_none() {
        return Err(Error::Config("dual-based bound needs a dual basis".into()));
    }
    Ok(sure_bounds(model, rm, mu)?.dual_based.unwrap_or_default())
}
