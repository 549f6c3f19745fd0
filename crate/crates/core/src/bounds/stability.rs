
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{AffineModel, ParameterPoint};

/// Below this dimension the stability constant comes from a dense
/// symmetric eigensolve.
const DENSE_LIMIT: usize = 300;

/// Exact stability constant `alpha(mu)`: the smallest eigenvalue magnitude
/// of the symmetric matrix `A(mu)` in the Euclidean norm.
///
/// Large systems run Lanczos on `A(mu)^{-1}` through the banded LU factors;
/// small ones, or a Lanczos run that stalls, fall back to a dense eigensolve.
pub fn stability_constant(model: &AffineModel, mu: &ParameterPoint) -> Result<f64> {
    if !model.is_symmetric() {
        return Err(Error::Unsupported(
            "stability constant needs a symmetric model".into(),
        ));
    }
    let n = model.dim();
    if n > DENSE_LIMIT {
        let fac = model.factor(mu)?;
        let lu = fac.lu();
        let top = linalg::lanczos_extreme(
            n,
            |x, y| {
                y.copy_from_slice(x);
                lu.solve_in_place(y);
            },
            400,
            1e-13,
        );
        if let Some(theta) = top {
            return Ok(1.0 / theta.abs());
        }
    }
    let (a, _) = model.assemble(mu)?;
    let (vals, _) = linalg::sym_eigen_desc(&a);
    Ok(vals.iter().fold(f64::INFINITY, |m, v| m.min(v.abs())))
}
