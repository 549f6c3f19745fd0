//! POD reduced bases, Galerkin projection and online reduced solves.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{AffineCoefficients, AffineModel, ParameterPoint};
use crate::par_map;

/// Singular values below this fraction of the largest count as zero.
pub const POD_RANK_TOL: f64 = 1e-12;

/// Matrix `Z` with orthonormal columns spanning the reduced space.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedBasis {
    z: DMatrix<f64>,
}

impl ReducedBasis {
    /// Wraps `z` after checking `Z^T Z = I` to 1e-10.
    pub fn from_orthonormal(z: DMatrix<f64>) -> Result<Self> {
        if z.ncols() == 0 {
            return Err(Error::Contract("reduced basis needs at least one column".into()));
        }
        let gram = z.tr_mul(&z);
        let dev = (gram - DMatrix::identity(z.ncols(), z.ncols())).amax();
        if dev > 1e-10 {
            return Err(Error::Contract(format!("basis columns not orthonormal (deviation {dev:e})")));
        }
        Ok(Self { z })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.z
    }

    /// Reduced dimension `n`.
    pub fn len(&self) -> usize {
        self.z.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.z.ncols() == 0
    }

    /// Full-order dimension.
    pub fn full_dim(&self) -> usize {
        self.z.nrows()
    }

    /// `Z c`.
    pub fn expand(&self, coeffs: &DVector<f64>) -> DVector<f64> {
        &self.z * coeffs
    }

    /// Squared projection error `sum_s |s - Z Z^T s|^2` of a snapshot set.
    pub fn projection_error(&self, snapshots: &[DVector<f64>]) -> f64 {
        snapshots
            .iter()
            .map(|s| {
                let c = self.z.tr_mul(s);
                (s - &self.z * c).norm_squared()
            })
            .sum()
    }
}

/// POD basis of dimension `n` together with the full list of snapshot
/// singular values, sorted descending.
pub fn pod_with_spectrum(snapshots: &[DVector<f64>], n: usize) -> Result<(ReducedBasis, Vec<f64>)> {
    let Some(first) = snapshots.first() else {
        return Err(Error::Rank { requested: n, rank: 0 });
    };
    let dim = first.len();
    if snapshots.iter().any(|s| s.len() != dim) {
        return Err(Error::Contract("snapshots of unequal length".into()));
    }
    let mat = DMatrix::from_columns(snapshots);
    let svd = mat.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let top = sigma.first().copied().unwrap_or(0.0);
    let rank = sigma.iter().take_while(|&&s| s > POD_RANK_TOL * top && s > 0.0).count();
    if n == 0 || n > rank {
        return Err(Error::Rank { requested: n, rank });
    }
    let mut z = DMatrix::zeros(dim, n);
    for (c, &k) in order.iter().take(n).enumerate() {
        let mut col: Vec<f64> = u.column(k).iter().copied().collect();
        linalg::fix_sign(&mut col);
        z.set_column(c, &DVector::from_vec(col));
    }
    Ok((ReducedBasis::from_orthonormal(z)?, sigma))
}

/// The `n` dominant left singular directions of the snapshot matrix, each
/// signed so that its largest-magnitude entry is positive.
pub fn pod_basis(snapshots: &[DVector<f64>], n: usize) -> Result<ReducedBasis> {
    pod_with_spectrum(snapshots, n).map(|(b, _)| b)
}

/// Primal and adjoint solution columns.
pub type Snapshots = (Vec<DVector<f64>>, Vec<DVector<f64>>);

/// Primal and adjoint solutions at every parameter of `params`.
pub fn collect_snapshots(model: &AffineModel, params: &[ParameterPoint]) -> Result<Snapshots> {
    let pairs = par_map(params, |mu| {
        let fac = model.factor(mu)?;
        Ok((fac.solve()?.u, fac.solve_adjoint()?))
    });
    let mut primal = Vec::with_capacity(params.len());
    let mut adjoint = Vec::with_capacity(params.len());
    for p in pairs {
        let (u, w) = p?;
        primal.push(u);
        adjoint.push(w);
    }
    Ok((primal, adjoint))
}

/// Projected adjoint operators for the output correction.
#[derive(Debug, Clone)]
pub struct DualProjection {
    basis: ReducedBasis,
    /// `Z_d^T A_q^T Z_d`
    at_q: Vec<DMatrix<f64>>,
    /// `Z_d^T l`
    lt: DVector<f64>,
    /// `Z_d^T A_q Z`, entries `<z_d_a, A_q zeta_j>`
    cross_a: Vec<DMatrix<f64>>,
    /// `Z_d^T f_q'`
    cross_f: Vec<DVector<f64>>,
}

impl DualProjection {
    pub fn basis(&self) -> &ReducedBasis {
        &self.basis
    }
}

/// Galerkin-projected affine model.
#[derive(Debug, Clone)]
pub struct ReducedModel {
    coeffs: Arc<AffineCoefficients>,
    basis: ReducedBasis,
    at_q: Vec<DMatrix<f64>>,
    ft_q: Vec<DVector<f64>>,
    lt: DVector<f64>,
    dual: Option<DualProjection>,
}

/// Reduced coordinates `u~(mu)` plus the coefficient values used to get them.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSolution {
    pub u_tilde: DVector<f64>,
    pub mu: ParameterPoint,
    theta: Vec<f64>,
    gamma: Vec<f64>,
}

impl ReducedSolution {
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }
}

impl ReducedModel {
    /// Offline projection of `model` onto `basis` (and `dual` for the
    /// adjoint problem, when given).
    pub fn project(model: &AffineModel, basis: ReducedBasis, dual: Option<ReducedBasis>) -> Result<Self> {
        let check = |b: &ReducedBasis| {
            if b.full_dim() != model.dim() {
                Err(Error::Contract(format!(
                    "basis of dimension {} for model of dimension {}",
                    b.full_dim(),
                    model.dim()
                )))
            } else {
                Ok(())
            }
        };
        check(&basis)?;
        let z = basis.matrix();
        let az: Vec<DMatrix<f64>> = model.a_q().iter().map(|a| a * z).collect();
        let at_q = az.iter().map(|a| z.tr_mul(a)).collect();
        let ft_q = model.f_q().iter().map(|f| z.tr_mul(f)).collect();
        let lt = z.tr_mul(model.output_vector());
        let dual = match dual {
            None => None,
            Some(db) => {
                check(&db)?;
                let zd = db.matrix();
                Some(DualProjection {
                    at_q: model.a_q().iter().map(|a| (a * zd).tr_mul(zd)).collect(),
                    lt: zd.tr_mul(model.output_vector()),
                    cross_a: az.iter().map(|a| zd.tr_mul(a)).collect(),
                    cross_f: model.f_q().iter().map(|f| zd.tr_mul(f)).collect(),
                    basis: db,
                })
            }
        };
        Ok(Self { coeffs: model.coefficients().clone(), basis, at_q, ft_q, lt, dual })
    }

    /// POD bases of size `n` from snapshots at `params` (the adjoint basis
    /// from adjoint snapshots at the same parameters), then projection.
    pub fn build(model: &AffineModel, params: &[ParameterPoint], n: usize, with_dual: bool) -> Result<Self> {
        let (primal, adjoint) = collect_snapshots(model, params)?;
        let basis = pod_basis(&primal, n)?;
        let dual = if with_dual { Some(pod_basis(&adjoint, n)?) } else { None };
        Self::project(model, basis, dual)
    }

    pub fn basis(&self) -> &ReducedBasis {
        &self.basis
    }

    pub fn dual(&self) -> Option<&DualProjection> {
        self.dual.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn coefficients(&self) -> &Arc<AffineCoefficients> {
        &self.coeffs
    }

    pub fn projected_a(&self) -> &[DMatrix<f64>] {
        &self.at_q
    }

    pub fn projected_f(&self) -> &[DVector<f64>] {
        &self.ft_q
    }

    pub fn projected_l(&self) -> &DVector<f64> {
        &self.lt
    }

    fn combine(coef: &[f64], mats: &[DMatrix<f64>]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(mats[0].nrows(), mats[0].ncols());
        for (c, m) in coef.iter().zip(mats) {
            out.zip_apply(m, |x, y| *x += c * y);
        }
        out
    }

    fn combine_vec(coef: &[f64], vecs: &[DVector<f64>]) -> DVector<f64> {
        let mut out = DVector::zeros(vecs[0].len());
        for (c, v) in coef.iter().zip(vecs) {
            out.axpy(*c, v, 1.0);
        }
        out
    }

    /// Online solve of `A~(mu) u~ = f~(mu)`; touches only reduced-size data.
    pub fn solve(&self, mu: &ParameterPoint) -> Result<ReducedSolution> {
        let theta = self.coeffs.theta_at(mu)?;
        let gamma = self.coeffs.gamma_at(mu)?;
        let a = Self::combine(&theta, &self.at_q);
        let f = Self::combine_vec(&gamma, &self.ft_q);
        let u_tilde = linalg::solve_small(&a, &f).ok_or_else(|| Error::Singular {
            mu: mu.coords().to_vec(),
            detail: "reduced matrix".into(),
        })?;
        Ok(ReducedSolution { u_tilde, mu: mu.clone(), theta, gamma })
    }

    /// Reduced output `s~ = <l~, u~>`.
    pub fn output(&self, sol: &ReducedSolution) -> Result<f64> {
        if sol.u_tilde.len() != self.dim() {
            return Err(Error::Contract(format!(
                "reduced solution of length {} for basis of size {}",
                sol.u_tilde.len(),
                self.dim()
            )));
        }
        Ok(self.lt.dot(&sol.u_tilde))
    }

    fn dual_or_err(&self) -> Result<&DualProjection> {
        self.dual
            .as_ref()
            .ok_or_else(|| Error::Config("reduced model was built without a dual basis".into()))
    }

    /// Reduced adjoint coordinates `u~_d(mu)` from `Z_d^T A^T Z_d u~_d = Z_d^T l`.
    pub fn solve_dual(&self, sol: &ReducedSolution) -> Result<DVector<f64>> {
        let dual = self.dual_or_err()?;
        let a = Self::combine(&sol.theta, &dual.at_q);
        linalg::solve_small(&a, &dual.lt).ok_or_else(|| Error::Singular {
            mu: sol.mu.coords().to_vec(),
            detail: "reduced adjoint matrix".into(),
        })
    }

    /// `<Z_d u~_d, r(mu)>` from the offline cross products.
    pub fn correction(&self, sol: &ReducedSolution, u_dual: &DVector<f64>) -> Result<f64> {
        let dual = self.dual_or_err()?;
        let mut acc = 0.0;
        for (t, c) in sol.theta.iter().zip(&dual.cross_a) {
            acc += t * u_dual.dot(&(c * &sol.u_tilde));
        }
        for (g, c) in sol.gamma.iter().zip(&dual.cross_f) {
            acc -= g * u_dual.dot(c);
        }
        Ok(acc)
    }

    /// Adjoint-corrected output `s~_c = s~ - <Z_d u~_d, r>`.
    pub fn corrected_output(&self, mu: &ParameterPoint) -> Result<f64> {
        let sol = self.solve(mu)?;
        let ud = self.solve_dual(&sol)?;
        Ok(self.output(&sol)? - self.correction(&sol, &ud)?)
    }

    /// Full-space residual `r(mu) = A(mu) Z u~ - f(mu)`.
    pub fn residual(&self, model: &AffineModel, sol: &ReducedSolution) -> Result<DVector<f64>> {
        if model.dim() != self.basis.full_dim() {
            return Err(Error::Contract("model and basis dimensions differ".into()));
        }
        let zu = self.basis.expand(&sol.u_tilde);
        let mut r = DVector::zeros(model.dim());
        model.apply(&sol.theta, zu.as_slice(), r.as_mut_slice());
        r -= model.assemble_rhs(&sol.gamma);
        Ok(r)
    }

    /// `Z_d u~_d(mu)` in the full space.
    pub fn dual_approximation(&self, u_dual: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.dual_or_err()?.basis.expand(u_dual))
    }

    /// Dual residual `r_d(mu) = A(mu)^T Z_d u~_d - l`.
    pub fn dual_residual(
        &self,
        model: &AffineModel,
        sol: &ReducedSolution,
        u_dual: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        let zd = self.dual_approximation(u_dual)?;
        let mut rd = DVector::zeros(model.dim());
        model.apply_transpose(&sol.theta, zd.as_slice(), rd.as_mut_slice());
        rd -= model.output_vector();
        Ok(rd)
    }
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;

    pub fn solution(u: Vec<f64>, mu: Vec<f64>, theta: Vec<f64>, gamma: Vec<f64>) -> ReducedSolution {
        ReducedSolution { u_tilde: DVector::from_vec(u), mu: mu.into(), theta, gamma }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Coefficient, ParameterBox};
    use alloc::vec;

    fn small_model() -> AffineModel {
        let n = 4;
        let a0 = DMatrix::from_fn(n, n, |r, c| match r as i64 - c as i64 {
            0 => 4.0,
            1 | -1 => -1.0,
            _ => 0.0,
        });
        let a1 = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]));
        AffineModel::new(
            ParameterBox::cube(1, 0.0, 1.0).unwrap(),
            vec![Coefficient::constant(1.0), Coefficient::coordinate(0)],
            vec![a0, a1],
            vec![Coefficient::constant(1.0), Coefficient::coordinate(0)],
            vec![DVector::from_vec(vec![1.0, 0.0, 1.0, 0.0]), DVector::from_vec(vec![0.0, 1.0, 0.0, 2.0])],
            DVector::from_vec(vec![0.0, 0.0, 0.0, 1.0]),
            true,
        )
        .unwrap()
    }

    fn unit(n: usize, i: usize) -> DVector<f64> {
        DVector::from_fn(n, |r, _| if r == i { 1.0 } else { 0.0 })
    }

    #[test]
    fn pod_of_repeated_unit_vectors() {
        let snaps = vec![unit(3, 0), unit(3, 0), unit(3, 1)];
        let b = pod_basis(&snaps, 2).unwrap();
        assert_eq!(b.matrix().column(0).as_slice(), unit(3, 0).as_slice());
        assert!(b.projection_error(&snaps) < 1e-18);
        assert!(matches!(pod_basis(&snaps, 3), Err(Error::Rank { requested: 3, rank: 2 })));
    }

    #[test]
    fn pod_sign_convention_flips_negative_snapshots() {
        let snaps = vec![-unit(3, 2) * 2.0];
        let b = pod_basis(&snaps, 1).unwrap();
        let c = b.matrix().column(0);
        assert!((c[2] - 1.0).abs() < 1e-14 && c[0].abs() < 1e-14 && c[1].abs() < 1e-14);
    }

    #[test]
    fn identity_prefix_projects_to_leading_block() {
        let m = small_model();
        let z = DMatrix::from_fn(4, 2, |r, c| if r == c { 1.0 } else { 0.0 });
        let rm = ReducedModel::project(&m, ReducedBasis::from_orthonormal(z).unwrap(), None).unwrap();
        for (at, a) in rm.projected_a().iter().zip(m.a_q()) {
            assert_eq!(*at, a.view((0, 0), (2, 2)).into_owned());
        }
    }

    #[test]
    fn full_basis_reproduces_full_solution() {
        let m = small_model();
        let rm = ReducedModel::project(
            &m,
            ReducedBasis::from_orthonormal(DMatrix::identity(4, 4)).unwrap(),
            Some(ReducedBasis::from_orthonormal(DMatrix::identity(4, 4)).unwrap()),
        )
        .unwrap();
        let mu: ParameterPoint = 0.3.into();
        let full = m.solve_full(&mu).unwrap();
        let red = rm.solve(&mu).unwrap();
        assert!((rm.basis().expand(&red.u_tilde) - &full.u).norm() < 1e-9);
        let s = m.output(full.u.as_slice()).unwrap();
        assert!((rm.output(&red).unwrap() - s).abs() < 1e-9);
        assert!(rm.residual(&m, &red).unwrap().norm() < 1e-9);
        assert!((rm.corrected_output(&mu).unwrap() - s).abs() < 1e-9);
    }

    #[test]
    fn scalar_galerkin() {
        let m = small_model();
        let zeta = DVector::from_vec(vec![0.5, 0.5, 0.5, 0.5]);
        let rm = ReducedModel::project(
            &m,
            ReducedBasis::from_orthonormal(DMatrix::from_columns(core::slice::from_ref(&zeta))).unwrap(),
            None,
        )
        .unwrap();
        let mu: ParameterPoint = 0.6.into();
        let (a, f) = m.assemble(&mu).unwrap();
        let expected = zeta.dot(&f) / zeta.dot(&(&a * &zeta));
        assert!((rm.solve(&mu).unwrap().u_tilde[0] - expected).abs() < 1e-14);
    }

    #[test]
    fn zero_reduced_solution_gives_minus_f() {
        let m = small_model();
        let rm = ReducedModel::project(
            &m,
            ReducedBasis::from_orthonormal(DMatrix::from_columns(&[unit(4, 0)])).unwrap(),
            None,
        )
        .unwrap();
        let mut sol = rm.solve(&0.4.into()).unwrap();
        sol.u_tilde[0] = 0.0;
        let (_, f) = m.assemble(&0.4.into()).unwrap();
        assert_eq!(rm.residual(&m, &sol).unwrap(), -f);
    }

    #[test]
    fn output_orthogonal_to_basis_is_zero() {
        let m = small_model();
        let rm = ReducedModel::project(
            &m,
            ReducedBasis::from_orthonormal(DMatrix::from_columns(&[unit(4, 0), unit(4, 1)])).unwrap(),
            None,
        )
        .unwrap();
        let sol = rm.solve(&0.4.into()).unwrap();
        assert_eq!(rm.output(&sol).unwrap(), 0.0);
    }

    #[test]
    fn missing_dual_is_a_config_error() {
        let m = small_model();
        let rm = ReducedModel::project(
            &m,
            ReducedBasis::from_orthonormal(DMatrix::from_columns(&[unit(4, 0)])).unwrap(),
            None,
        )
        .unwrap();
        assert!(matches!(rm.corrected_output(&0.5.into()), Err(Error::Config(_))));
    }

    #[test]
    fn exact_adjoint_in_dual_basis_kills_output_error() {
        let m = small_model();
        let mu: ParameterPoint = 0.7.into();
        let w = m.solve_adjoint(&mu).unwrap();
        let dual = ReducedBasis::from_orthonormal(DMatrix::from_columns(&[w.normalize()])).unwrap();
        let rm = ReducedModel::project(
            &m,
            ReducedBasis::from_orthonormal(DMatrix::from_columns(&[unit(4, 1)])).unwrap(),
            Some(dual),
        )
        .unwrap();
        let s = m.output(m.solve_full(&mu).unwrap().u.as_slice()).unwrap();
        let sol = rm.solve(&mu).unwrap();
        assert!((rm.output(&sol).unwrap() - s).abs() > 1e-3);
        assert!((rm.corrected_output(&mu).unwrap() - s).abs() < 1e-9);
        let ud = rm.solve_dual(&sol).unwrap();
        assert!(rm.dual_residual(&m, &sol, &ud).unwrap().norm() < 1e-12);
    }

    #[test]
    fn zero_dual_coordinate_leaves_output_uncorrected() {
        let m = small_model();
        let rm = ReducedModel::project(
            &m,
            ReducedBasis::from_orthonormal(DMatrix::from_columns(&[unit(4, 0)])).unwrap(),
            Some(ReducedBasis::from_orthonormal(DMatrix::from_columns(&[unit(4, 2)])).unwrap()),
        )
        .unwrap();
        let sol = rm.solve(&0.5.into()).unwrap();
        let zero = DVector::zeros(1);
        assert_eq!(rm.correction(&sol, &zero).unwrap(), 0.0);
    }
}
