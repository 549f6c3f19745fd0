//! Affine-parametrized full-order linear models and their dense solvers.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, DenseLu};

/// Relative residual tolerance every full-order solve must meet.
pub const SOLVER_TOL: f64 = 1e-10;

/// A point `mu` of the parameter domain.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterPoint(Vec<f64>);

impl ParameterPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        Self(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl From<Vec<f64>> for ParameterPoint {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl From<f64> for ParameterPoint {
    fn from(v: f64) -> Self {
        Self(vec![v])
    }
}

/// Axis-aligned parameter domain carrying the uniform distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl ParameterBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::Contract(format!(
                "box bounds of length {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::Contract(format!("empty box {lo:?} .. {hi:?}")));
        }
        Ok(Self { lo, hi })
    }

    /// The box `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn contains(&self, mu: &[f64]) -> bool {
        mu.len() == self.dim()
            && mu.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (a, b))| *a <= *x && *x <= *b)
    }

    pub fn check(&self, mu: &ParameterPoint) -> Result<()> {
        if mu.dim() != self.dim() {
            return Err(Error::Domain {
                mu: mu.0.clone(),
                reason: format!("expected {} coordinates", self.dim()),
            });
        }
        if !self.contains(&mu.0) {
            return Err(Error::Domain {
                mu: mu.0.clone(),
                reason: format!("box is {:?} .. {:?}", self.lo, self.hi),
            });
        }
        Ok(())
    }

    /// One draw from the uniform law on the box.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ParameterPoint {
        ParameterPoint(
            self.lo
                .iter()
                .zip(&self.hi)
                .map(|(a, b)| a + (b - a) * rng.random::<f64>())
                .collect(),
        )
    }

    /// `count` independent uniform draws from a generator seeded with `seed`.
    pub fn sample_seeded(&self, count: usize, seed: u64) -> Vec<ParameterPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| self.sample(&mut rng)).collect()
    }
}

/// A partition of a [`ParameterBox`] into axis-aligned cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    domain: ParameterBox,
    cells: Vec<ParameterBox>,
}

impl Partition {
    /// The single-cell partition.
    pub fn trivial(domain: ParameterBox) -> Self {
        Self { cells: vec![domain.clone()], domain }
    }

    /// Uniform grid with `divisions[d]` slabs along dimension `d`; cells are
    /// numbered with the last dimension varying fastest.
    pub fn uniform(domain: ParameterBox, divisions: &[usize]) -> Result<Self> {
        if divisions.len() != domain.dim() || divisions.contains(&0) {
            return Err(Error::Contract(format!(
                "divisions {divisions:?} for a {}-dimensional box",
                domain.dim()
            )));
        }
        let total: usize = divisions.iter().product();
        let mut cells = Vec::with_capacity(total);
        let mut idx = vec![0usize; divisions.len()];
        for _ in 0..total {
            let (mut lo, mut hi) = (Vec::new(), Vec::new());
            for d in 0..divisions.len() {
                let (a, b) = (domain.lo[d], domain.hi[d]);
                let k = divisions[d] as f64;
                lo.push(a + (b - a) * idx[d] as f64 / k);
                hi.push(if idx[d] + 1 == divisions[d] {
                    b
                } else {
                    a + (b - a) * (idx[d] + 1) as f64 / k
                });
            }
            cells.push(ParameterBox { lo, hi });
            for d in (0..divisions.len()).rev() {
                idx[d] += 1;
                if idx[d] < divisions[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        Self::from_cells(domain, cells)
    }

    /// Builds a partition from explicit cells, checking that they lie in the
    /// domain, do not overlap, and fill it by measure.
    pub fn from_cells(domain: ParameterBox, cells: Vec<ParameterBox>) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::Partition(String::from("no cells")));
        }
        let mut covered = 0.0;
        for (k, c) in cells.iter().enumerate() {
            if c.dim() != domain.dim() || !domain.contains(&c.lo) || !domain.contains(&c.hi) {
                return Err(Error::Partition(format!("cell {k} leaves the domain")));
            }
            for (j, other) in cells.iter().enumerate().skip(k + 1) {
                let overlap: f64 = (0..c.dim())
                    .map(|d| (c.hi[d].min(other.hi[d]) - c.lo[d].max(other.lo[d])).max(0.0))
                    .product();
                if overlap > 1e-12 * domain.volume() {
                    return Err(Error::Partition(format!("cells {k} and {j} overlap")));
                }
            }
            covered += c.volume();
        }
        if (covered - domain.volume()).abs() > 1e-10 * domain.volume() {
            return Err(Error::Partition(format!(
                "cells cover volume {covered} of {}",
                domain.volume()
            )));
        }
        Ok(Self { domain, cells })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn domain(&self) -> &ParameterBox {
        &self.domain
    }

    pub fn cells(&self) -> &[ParameterBox] {
        &self.cells
    }

    /// Index `k(mu)` of the cell holding `mu`; on shared faces the lowest
    /// index wins.
    pub fn cell_of(&self, mu: &ParameterPoint) -> Result<usize> {
        self.cells
            .iter()
            .position(|c| c.contains(mu.coords()))
            .ok_or_else(|| Error::Partition(format!("{:?} lies in no cell", mu.coords())))
    }
}

type CoefficientFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Coefficient function `mu -> R` of an affine expansion.
#[derive(Clone)]
pub struct Coefficient {
    eval: Arc<CoefficientFn>,
    description: Option<String>,
}

impl Coefficient {
    pub fn new<F>(f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self { eval: Arc::new(f), description: None }
    }

    pub fn described<F>(f: F, description: &str) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self { eval: Arc::new(f), description: Some(String::from(description)) }
    }

    pub fn constant(c: f64) -> Self {
        Self::described(move |_| c, "const")
    }

    /// The `i`-th parameter coordinate.
    pub fn coordinate(i: usize) -> Self {
        Self::described(move |mu| mu[i], "mu_i")
    }

    pub fn eval(&self, mu: &[f64]) -> f64 {
        (self.eval)(mu)
    }

    pub fn description(&self) -> Option<&str> {
        self.description.as_deref()
    }
}

impl core::fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.description.as_deref().unwrap_or("<fn>"))
    }
}

/// The parameter-dependent half of an affine model: the domain and the
/// coefficient functions. Shared between full and reduced models.
#[derive(Debug, Clone)]
pub struct AffineCoefficients {
    pub domain: ParameterBox,
    pub theta: Vec<Coefficient>,
    pub gamma: Vec<Coefficient>,
}

impl AffineCoefficients {
    fn eval_all(coeffs: &[Coefficient], mu: &ParameterPoint, what: &str) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(coeffs.len());
        for (q, c) in coeffs.iter().enumerate() {
            let v = c.eval(mu.coords());
            if !v.is_finite() {
                return Err(Error::Numeric(format!("{what}_{q}({:?}) = {v}", mu.coords())));
            }
            out.push(v);
        }
        Ok(out)
    }

    /// `Theta_q(mu)` for all `q`, after checking `mu` against the domain.
    pub fn theta_at(&self, mu: &ParameterPoint) -> Result<Vec<f64>> {
        self.domain.check(mu)?;
        Self::eval_all(&self.theta, mu, "theta")
    }

    /// `gamma_q'(mu)` for all `q'`, after checking `mu` against the domain.
    pub fn gamma_at(&self, mu: &ParameterPoint) -> Result<Vec<f64>> {
        self.domain.check(mu)?;
        Self::eval_all(&self.gamma, mu, "gamma")
    }
}

/// Full-order model `A(mu) u = f(mu)`, `s = <l, u>` with
/// `A(mu) = sum_q Theta_q(mu) A_q` and `f(mu) = sum_q' gamma_q'(mu) f_q'`.
#[derive(Debug, Clone)]
pub struct AffineModel {
    coeffs: Arc<AffineCoefficients>,
    a_q: Vec<DMatrix<f64>>,
    f_q: Vec<DVector<f64>>,
    l: DVector<f64>,
    symmetric: bool,
    band: (usize, usize),
}

/// Solution of the full-order system at one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct FullSolution {
    pub u: DVector<f64>,
    pub mu: ParameterPoint,
}

impl AffineModel {
    pub fn new(
        domain: ParameterBox,
        theta: Vec<Coefficient>,
        a_q: Vec<DMatrix<f64>>,
        gamma: Vec<Coefficient>,
        f_q: Vec<DVector<f64>>,
        l: DVector<f64>,
        symmetric: bool,
    ) -> Result<Self> {
        if theta.len() != a_q.len() || theta.is_empty() {
            return Err(Error::Contract(format!(
                "{} theta functions for {} matrices",
                theta.len(),
                a_q.len()
            )));
        }
        if gamma.len() != f_q.len() || gamma.is_empty() {
            return Err(Error::Contract(format!(
                "{} gamma functions for {} vectors",
                gamma.len(),
                f_q.len()
            )));
        }
        let n = l.len();
        if a_q.iter().any(|a| a.nrows() != n || a.ncols() != n) || f_q.iter().any(|f| f.len() != n) {
            return Err(Error::Contract(format!("operands must all have dimension {n}")));
        }
        if symmetric {
            for (q, a) in a_q.iter().enumerate() {
                let scale = a.amax().max(f64::MIN_POSITIVE);
                if (a - a.transpose()).amax() > 1e-12 * scale {
                    return Err(Error::Contract(format!("A_{q} is not symmetric")));
                }
            }
        }
        let band = a_q.iter().map(linalg::bandwidth).fold((0, 0), |(kl, ku), (a, b)| (kl.max(a), ku.max(b)));
        Ok(Self {
            coeffs: Arc::new(AffineCoefficients { domain, theta, gamma }),
            a_q,
            f_q,
            l,
            symmetric,
            band,
        })
    }

    pub fn dim(&self) -> usize {
        self.l.len()
    }

    pub fn num_theta(&self) -> usize {
        self.a_q.len()
    }

    pub fn num_gamma(&self) -> usize {
        self.f_q.len()
    }

    pub fn domain(&self) -> &ParameterBox {
        &self.coeffs.domain
    }

    pub fn coefficients(&self) -> &Arc<AffineCoefficients> {
        &self.coeffs
    }

    pub fn a_q(&self) -> &[DMatrix<f64>] {
        &self.a_q
    }

    pub fn f_q(&self) -> &[DVector<f64>] {
        &self.f_q
    }

    pub fn output_vector(&self) -> &DVector<f64> {
        &self.l
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Lower and upper bandwidth shared by all `A_q`.
    pub fn bandwidth(&self) -> (usize, usize) {
        self.band
    }

    /// Dense `A(mu)` and `f(mu)`.
    pub fn assemble(&self, mu: &ParameterPoint) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let theta = self.coeffs.theta_at(mu)?;
        let gamma = self.coeffs.gamma_at(mu)?;
        let n = self.dim();
        let mut a = DMatrix::zeros(n, n);
        for (t, aq) in theta.iter().zip(&self.a_q) {
            a.zip_apply(aq, |x, y| *x += t * y);
        }
        Ok((a, self.assemble_rhs(&gamma)))
    }

    pub(crate) fn assemble_rhs(&self, gamma: &[f64]) -> DVector<f64> {
        let mut f = DVector::zeros(self.dim());
        for (g, fq) in gamma.iter().zip(&self.f_q) {
            f.axpy(*g, fq, 1.0);
        }
        f
    }

    /// `out = A(mu) v` given the values `theta = Theta(mu)`.
    pub(crate) fn apply(&self, theta: &[f64], v: &[f64], out: &mut [f64]) {
        let n = self.dim();
        let (kl, ku) = self.band;
        out.iter_mut().for_each(|x| *x = 0.0);
        for (t, aq) in theta.iter().zip(&self.a_q) {
            for j in 0..n {
                let vj = t * v[j];
                if vj == 0.0 {
                    continue;
                }
                let col = aq.column(j);
                for i in j.saturating_sub(ku)..n.min(j + kl + 1) {
                    out[i] += col[i] * vj;
                }
            }
        }
    }

    /// `out = A(mu)^T v` given the values `theta = Theta(mu)`.
    pub(crate) fn apply_transpose(&self, theta: &[f64], v: &[f64], out: &mut [f64]) {
        let n = self.dim();
        let (kl, ku) = self.band;
        out.iter_mut().for_each(|x| *x = 0.0);
        for (t, aq) in theta.iter().zip(&self.a_q) {
            for j in 0..n {
                let col = aq.column(j);
                let lo = j.saturating_sub(ku);
                let hi = n.min(j + kl + 1);
                let mut s = 0.0;
                for i in lo..hi {
                    s += col[i] * v[i];
                }
                out[j] += t * s;
            }
        }
    }

    /// Factorizes `A(mu)`; the factorization serves primal and adjoint solves.
    pub fn factor(&self, mu: &ParameterPoint) -> Result<FullFactor<'_>> {
        let theta = self.coeffs.theta_at(mu)?;
        let gamma = self.coeffs.gamma_at(mu)?;
        let n = self.dim();
        let (kl, ku) = self.band;
        let mut a = vec![0.0; n * n];
        for (t, aq) in theta.iter().zip(&self.a_q) {
            for j in 0..n {
                let col = aq.column(j);
                for i in j.saturating_sub(ku)..n.min(j + kl + 1) {
                    a[i * n + j] += t * col[i];
                }
            }
        }
        let frob = linalg::norm(&a);
        let lu = DenseLu::factor(n, a, kl, ku).map_err(|p| Error::Singular {
            mu: mu.coords().to_vec(),
            detail: format!("pivot {:e} at row {}", p.pivot, p.row),
        })?;
        Ok(FullFactor { model: self, mu: mu.clone(), theta, gamma, lu, frob })
    }

    pub fn solve_full(&self, mu: &ParameterPoint) -> Result<FullSolution> {
        self.factor(mu)?.solve()
    }

    /// Adjoint solution `w(mu) = A(mu)^{-T} l`.
    pub fn solve_adjoint(&self, mu: &ParameterPoint) -> Result<DVector<f64>> {
        self.factor(mu)?.solve_adjoint()
    }

    /// Output functional `<l, u>`.
    pub fn output(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.dim() {
            return Err(Error::Contract(format!(
                "vector of length {} for model of dimension {}",
                u.len(),
                self.dim()
            )));
        }
        Ok(linalg::dot(self.l.as_slice(), u))
    }
}

/// LU factorization of `A(mu)` plus the coefficient values at `mu`.
#[derive(Debug, Clone)]
pub struct FullFactor<'a> {
    model: &'a AffineModel,
    mu: ParameterPoint,
    theta: Vec<f64>,
    gamma: Vec<f64>,
    lu: DenseLu,
    frob: f64,
}

impl FullFactor<'_> {
    pub fn mu(&self) -> &ParameterPoint {
        &self.mu
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub(crate) fn lu(&self) -> &DenseLu {
        &self.lu
    }

    /// Frobenius norm of `A(mu)`.
    pub fn frobenius(&self) -> f64 {
        self.frob
    }

    pub fn rhs(&self) -> DVector<f64> {
        self.model.assemble_rhs(&self.gamma)
    }

    /// `A(mu)^{-1} g` with one step of iterative refinement, checked against
    /// the residual tolerance.
    pub fn solve_with(&self, g: &[f64]) -> Result<DVector<f64>> {
        self.refined_solve(g, false)
    }

    /// `A(mu)^{-T} g`, as [`Self::solve_with`].
    pub fn solve_transpose_with(&self, g: &[f64]) -> Result<DVector<f64>> {
        self.refined_solve(g, true)
    }

    pub fn solve(&self) -> Result<FullSolution> {
        let f = self.rhs();
        let u = self.solve_with(f.as_slice())?;
        Ok(FullSolution { u, mu: self.mu.clone() })
    }

    pub fn solve_adjoint(&self) -> Result<DVector<f64>> {
        self.solve_transpose_with(self.model.l.as_slice())
    }

    /// `A(mu) v`.
    pub fn apply(&self, v: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(v.len());
        self.model.apply(&self.theta, v, out.as_mut_slice());
        out
    }

    /// `A(mu)^T v`.
    pub fn apply_transpose(&self, v: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(v.len());
        self.model.apply_transpose(&self.theta, v, out.as_mut_slice());
        out
    }

    fn residual_into(&self, rhs: &[f64], x: &[f64], transpose: bool, out: &mut [f64]) {
        if transpose {
            self.model.apply_transpose(&self.theta, x, out);
        } else {
            self.model.apply(&self.theta, x, out);
        }
        out.iter_mut().zip(rhs).for_each(|(o, b)| *o = b - *o);
    }

    fn lu_solve(&self, x: &mut [f64], transpose: bool) {
        if transpose {
            self.lu.solve_transpose_in_place(x);
        } else {
            self.lu.solve_in_place(x);
        }
    }

    fn refined_solve(&self, g: &[f64], transpose: bool) -> Result<DVector<f64>> {
        let n = g.len();
        let mut x = g.to_vec();
        self.lu_solve(&mut x, transpose);
        let mut d = vec![0.0; n];
        self.residual_into(g, &x, transpose, &mut d);
        self.lu_solve(&mut d, transpose);
        x.iter_mut().zip(&d).for_each(|(a, b)| *a += b);
        self.residual_into(g, &x, transpose, &mut d);
        let resid = linalg::norm(&d);
        let scale = self.frob * linalg::norm(&x) + linalg::norm(g);
        if !(resid <= SOLVER_TOL * scale) {
            return Err(Error::Singular {
                mu: self.mu.coords().to_vec(),
                detail: format!("relative residual {:e} above {SOLVER_TOL:e}", resid / scale),
            });
        }
        Ok(DVector::from_vec(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box() -> ParameterBox {
        ParameterBox::cube(1, 0.0, 1.0).unwrap()
    }

    fn identity_model(n: usize, f: &[f64]) -> AffineModel {
        AffineModel::new(
            unit_box(),
            vec![Coefficient::constant(1.0)],
            vec![DMatrix::identity(n, n)],
            vec![Coefficient::constant(1.0)],
            vec![DVector::from_column_slice(f)],
            DVector::from_fn(n, |i, _| if i == 0 { 1.0 } else { 0.0 }),
            true,
        )
        .unwrap()
    }

    #[test]
    fn assemble_identity() {
        let m = identity_model(3, &[1.0, 2.0, 3.0]);
        let (a, f) = m.assemble(&0.3.into()).unwrap();
        assert_eq!(a, DMatrix::identity(3, 3));
        assert_eq!(f.as_slice(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn assemble_linear_combination() {
        let m = AffineModel::new(
            unit_box(),
            vec![Coefficient::constant(1.0), Coefficient::coordinate(0)],
            vec![DMatrix::identity(2, 2), DMatrix::identity(2, 2)],
            vec![Coefficient::constant(1.0)],
            vec![DVector::from_element(2, 1.0)],
            DVector::from_element(2, 1.0),
            true,
        )
        .unwrap();
        let (a, _) = m.assemble(&0.5.into()).unwrap();
        assert_eq!(a, DMatrix::identity(2, 2) * 1.5);
    }

    #[test]
    fn assemble_rejects_out_of_box_and_nan() {
        let m = identity_model(2, &[1.0, 1.0]);
        assert!(matches!(m.assemble(&1.5.into()), Err(Error::Domain { .. })));
        assert!(matches!(m.assemble(&vec![0.1, 0.2].into()), Err(Error::Domain { .. })));
        let bad = AffineModel::new(
            unit_box(),
            vec![Coefficient::new(|_| f64::NAN)],
            vec![DMatrix::identity(2, 2)],
            vec![Coefficient::constant(1.0)],
            vec![DVector::from_element(2, 1.0)],
            DVector::from_element(2, 1.0),
            true,
        )
        .unwrap();
        assert!(matches!(bad.assemble(&0.5.into()), Err(Error::Numeric(_))));
    }

    #[test]
    fn solves_identity_and_diagonal() {
        let m = identity_model(3, &[1.0, 2.0, 3.0]);
        let sol = m.solve_full(&0.2.into()).unwrap();
        assert_eq!(sol.u.as_slice(), &[1.0, 2.0, 3.0]);
        let w = m.solve_adjoint(&0.2.into()).unwrap();
        assert_eq!(w.as_slice(), &[1.0, 0.0, 0.0]);

        let d = AffineModel::new(
            unit_box(),
            vec![Coefficient::constant(1.0)],
            vec![DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 4.0]))],
            vec![Coefficient::constant(1.0)],
            vec![DVector::from_vec(vec![2.0, 8.0])],
            DVector::from_vec(vec![1.0, 0.0]),
            true,
        )
        .unwrap();
        assert_eq!(d.solve_full(&0.5.into()).unwrap().u.as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn singular_model_reports_mu() {
        let m = AffineModel::new(
            unit_box(),
            vec![Coefficient::coordinate(0)],
            vec![DMatrix::identity(2, 2)],
            vec![Coefficient::constant(1.0)],
            vec![DVector::from_element(2, 1.0)],
            DVector::from_element(2, 1.0),
            true,
        )
        .unwrap();
        match m.solve_full(&0.0.into()) {
            Err(Error::Singular { mu, .. }) => assert_eq!(mu, vec![0.0]),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn output_checks_length() {
        let m = identity_model(3, &[1.0, 0.0, 0.0]);
        assert_eq!(m.output(&[5.0, 1.0, 2.0]).unwrap(), 5.0);
        assert!(matches!(m.output(&[1.0]), Err(Error::Contract(_))));
    }

    #[test]
    fn asymmetric_matrix_rejected_when_flagged_symmetric() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        let r = AffineModel::new(
            unit_box(),
            vec![Coefficient::constant(1.0)],
            vec![a],
            vec![Coefficient::constant(1.0)],
            vec![DVector::from_element(2, 1.0)],
            DVector::from_element(2, 1.0),
            true,
        );
        assert!(matches!(r, Err(Error::Contract(_))));
    }

    #[test]
    fn partition_cell_lookup_and_ties() {
        let b = ParameterBox::new(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap();
        let p = Partition::uniform(b.clone(), &[2, 2]).unwrap();
        assert_eq!(p.len(), 4);
        assert_eq!(p.cell_of(&vec![0.1, 0.1].into()).unwrap(), 0);
        assert_eq!(p.cell_of(&vec![0.1, 1.9].into()).unwrap(), 1);
        assert_eq!(p.cell_of(&vec![0.9, 0.1].into()).unwrap(), 2);
        // shared face goes to the lower index
        assert_eq!(p.cell_of(&vec![0.5, 1.0].into()).unwrap(), 0);
        assert!(p.cell_of(&vec![1.5, 0.0].into()).is_err());
    }

    #[test]
    fn partition_rejects_gaps_and_overlaps() {
        let b = ParameterBox::cube(1, 0.0, 1.0).unwrap();
        let half = |lo, hi| ParameterBox::new(vec![lo], vec![hi]).unwrap();
        assert!(Partition::from_cells(b.clone(), vec![half(0.0, 0.4), half(0.5, 1.0)]).is_err());
        assert!(Partition::from_cells(b.clone(), vec![half(0.0, 0.6), half(0.4, 1.0)]).is_err());
        assert!(Partition::from_cells(b, vec![half(0.0, 0.5), half(0.5, 1.0)]).is_ok());
    }

    #[test]
    fn seeded_sampling_is_reproducible_and_in_box() {
        let b = ParameterBox::new(vec![0.5, -1.0], vec![1.0, 1.0]).unwrap();
        let s1 = b.sample_seeded(50, 7);
        let s2 = b.sample_seeded(50, 7);
        assert_eq!(s1, s2);
        assert!(s1.iter().all(|p| b.contains(p.coords())));
    }
}
