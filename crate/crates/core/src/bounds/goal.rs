//! Goal-oriented probabilistic output error bound.
//!
//! The output error is expanded in an orthonormal family `phi_i`:
//! `s~ - s = sum_i <w, phi_i> <r, phi_i>`. The first `N` terms are bracketed
//! using tabulated extrema of `D_i(mu) = <w(mu), phi_i>` over each partition
//! cell (`T1`), the tail is replaced by its Monte-Carlo mean `T2^` divided by
//! the risk, which is valid by Markov's inequality. The family is taken as
//! the dominant eigenvectors of the sampled operator
//! `G^ = (W W^T + R R^T) / (2 #Xi)`, found through the small matrix `Sigma`
//! on an orthonormal basis of `Im W + Im R`.
//!
//! Replacing `w` by `w_c = w - Z_d u~_d` gives the bound on the corrected
//! output.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{AffineModel, ParameterPoint, Partition};
use crate::par_map;
use crate::reduction::{ReducedModel, ReducedSolution};

/// Pivoted-QR diagonal entries below this (relative to unit columns) end the
/// basis of `Im W + Im R`.
pub const SPAN_RANK_TOL: f64 = 1e-10;

/// Offline settings for [`train_goal_oriented`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    /// `#Xi`, size of the training sample.
    pub sample_size: usize,
    /// Truncation index `N`.
    pub truncation: usize,
    /// Bound the corrected output (use `w_c` in place of `w`).
    pub corrected: bool,
    pub seed: u64,
    /// Use `1/(2 #Xi)` in the tail estimator instead of the sample mean.
    pub t2_halved: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self { sample_size: 200, truncation: 10, corrected: false, seed: 0, t2_halved: false }
    }
}

/// Adjoint vectors, residuals and output errors over a training sample.
#[derive(Debug, Clone)]
pub struct TrainingSnapshots {
    pub params: Vec<ParameterPoint>,
    /// Columns `w(mu)` (or `w_c(mu)`).
    pub w: DMatrix<f64>,
    /// Columns `r(mu)`.
    pub r: DMatrix<f64>,
    /// `s~(mu) - s(mu)` (or `s~_c(mu) - s(mu)`), evaluated as `<w, r>`.
    pub errors: Vec<f64>,
}

impl TrainingSnapshots {
    pub fn collect(
        model: &AffineModel,
        rm: &ReducedModel,
        params: &[ParameterPoint],
        corrected: bool,
    ) -> Result<Self> {
        if corrected && rm.dual().is_none() {
            return Err(Error::Config("corrected bound needs a dual basis".into()));
        }
        let cols = par_map(params, |mu| -> Result<(DVector<f64>, DVector<f64>, f64)> {
            let mut w = model.factor(mu)?.solve_adjoint()?;
            let sol = rm.solve(mu)?;
            let r = rm.residual(model, &sol)?;
            if corrected {
                let ud = rm.solve_dual(&sol)?;
                w -= rm.dual_approximation(&ud)?;
            }
            // the error identity avoids cancelling two O(1) outputs
            let err = w.dot(&r);
            Ok((w, r, err))
        });
        let n = model.dim();
        let m = params.len();
        let mut w = DMatrix::zeros(n, m);
        let mut r = DMatrix::zeros(n, m);
        let mut errors = Vec::with_capacity(m);
        for (j, c) in cols.into_iter().enumerate() {
            let (wj, rj, e) = c?;
            w.set_column(j, &wj);
            r.set_column(j, &rj);
            errors.push(e);
        }
        Ok(Self { params: params.to_vec(), w, r, errors })
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Orthonormal basis `V` of `Im W + Im R` by column-pivoted QR on the
    /// unit-normalized nonzero columns.
    pub fn span_basis(&self) -> DMatrix<f64> {
        let n = self.w.nrows();
        let cols: Vec<DVector<f64>> = self
            .w
            .column_iter()
            .chain(self.r.column_iter())
            .filter_map(|c| {
                let nrm = c.norm();
                (nrm > 0.0).then(|| c / nrm)
            })
            .collect();
        if cols.is_empty() {
            return DMatrix::zeros(n, 0);
        }
        let qr = DMatrix::from_columns(&cols).col_piv_qr();
        let rmat = qr.r();
        let rank = (0..rmat.nrows().min(rmat.ncols()))
            .take_while(|&k| rmat[(k, k)].abs() > SPAN_RANK_TOL)
            .count();
        qr.q().columns(0, rank).into_owned()
    }

    /// Eigenpairs of `G^` through the reduced matrix
    /// `Sigma = ((V^T W)(W^T V) + (V^T R)(R^T V)) / (2 #Xi)`.
    ///
    /// Returns all eigenvalues of `Sigma` (descending) and the mapped
    /// eigenvectors `V psi` as columns, each signed with its largest entry
    /// positive.
    pub fn g_eigen(&self) -> (Vec<f64>, DMatrix<f64>) {
        let v = self.span_basis();
        if v.ncols() == 0 {
            return (Vec::new(), v);
        }
        let vw = v.tr_mul(&self.w);
        let vr = v.tr_mul(&self.r);
        let scale = 1.0 / (2.0 * self.len() as f64);
        let sigma = (&vw * vw.transpose() + &vr * vr.transpose()) * scale;
        let (vals, psi) = linalg::sym_eigen_desc(&sigma);
        let mut phi = v * psi;
        for mut c in phi.column_iter_mut() {
            linalg::fix_sign(c.as_mut_slice());
        }
        (vals, phi)
    }
}

/// Offline artifacts of the goal-oriented bound for one reduced model.
#[derive(Debug, Clone, PartialEq)]
pub struct GoalOrientedBoundData {
    /// `phi^_1 .. phi^_N` as columns (full-order, offline only).
    pub phi: DMatrix<f64>,
    /// `ip_a[q][(i, j)] = <A_q zeta_j, phi_i>`.
    pub ip_a: Vec<DMatrix<f64>>,
    /// `ip_f[(i, q')] = <f_q', phi_i>`.
    pub ip_f: DMatrix<f64>,
    /// `beta_min[(i, k)]`, `beta_max[(i, k)]` over cell `k`.
    pub beta_min: DMatrix<f64>,
    pub beta_max: DMatrix<f64>,
    pub t2_hat: f64,
    /// Monte-Carlo standard error of `t2_hat`.
    pub t2_std_err: f64,
    /// Full spectrum of `Sigma`, descending.
    pub eigvals: Vec<f64>,
    pub corrected: bool,
    pub partition: Partition,
    pub sample_size: usize,
    pub seed: u64,
    pub t2_halved: bool,
    /// `N` was cut down to the rank of `Im W + Im R`.
    pub rank_truncated: bool,
}

/// Online values of the goal-oriented bound at one parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoalOrientedEval {
    pub t1: f64,
    pub t2_hat: f64,
    pub bound: f64,
    /// The output the bound certifies: `s~` or `s~_c`.
    pub output: f64,
}

/// Draws `cfg.sample_size` parameters with `cfg.seed` and trains on them.
pub fn train_goal_oriented(
    model: &AffineModel,
    rm: &ReducedModel,
    partition: &Partition,
    cfg: &TrainingConfig,
) -> Result<GoalOrientedBoundData> {
    let params = model.domain().sample_seeded(cfg.sample_size, cfg.seed);
    train_on_params(model, rm, partition, &params, cfg)
}

/// Trains the bound on an explicit sample `Xi` (`cfg.sample_size` and
/// `cfg.seed` are recorded, not used for drawing).
pub fn train_on_params(
    model: &AffineModel,
    rm: &ReducedModel,
    partition: &Partition,
    params: &[ParameterPoint],
    cfg: &TrainingConfig,
) -> Result<GoalOrientedBoundData> {
    if params.len() < 2 {
        return Err(Error::Contract("training sample needs at least two points".into()));
    }
    if cfg.truncation == 0 || cfg.truncation > 2 * params.len() {
        return Err(Error::Contract(format!(
            "truncation {} outside 1..={}",
            cfg.truncation,
            2 * params.len()
        )));
    }
    if partition.domain() != model.domain() {
        return Err(Error::Partition("partition does not cover the model domain".into()));
    }
    let snaps = TrainingSnapshots::collect(model, rm, params, cfg.corrected)?;
    GoalOrientedBoundData::from_snapshots(model, rm, partition, &snaps, cfg)
}

impl GoalOrientedBoundData {
    pub fn from_snapshots(
        model: &AffineModel,
        rm: &ReducedModel,
        partition: &Partition,
        snaps: &TrainingSnapshots,
        cfg: &TrainingConfig,
    ) -> Result<Self> {
        let m = snaps.len();
        let (eigvals, phi_all) = snaps.g_eigen();
        let rank = phi_all.ncols();
        let keep = cfg.truncation.min(rank);
        let phi = phi_all.columns(0, keep).into_owned();

        // D_i(mu) and <r(mu), phi_i> over the sample, N x #Xi
        let d = phi.tr_mul(&snaps.w);
        let p = phi.tr_mul(&snaps.r);

        let k_cells = partition.len();
        let mut cell_members: Vec<Vec<usize>> = (0..k_cells).map(|_| Vec::new()).collect();
        for (j, mu) in snaps.params.iter().enumerate() {
            cell_members[partition.cell_of(mu)?].push(j);
        }
        if let Some(k) = cell_members.iter().position(|c| c.is_empty()) {
            return Err(Error::Partition(format!(
                "cell {k} holds no training point; enlarge the sample or coarsen the partition"
            )));
        }
        let mut beta_min = DMatrix::zeros(keep, k_cells);
        let mut beta_max = DMatrix::zeros(keep, k_cells);
        for (k, members) in cell_members.iter().enumerate() {
            for i in 0..keep {
                let (lo, hi) = members.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &j| {
                    (lo.min(d[(i, j)]), hi.max(d[(i, j)]))
                });
                beta_min[(i, k)] = lo;
                beta_max[(i, k)] = hi;
            }
        }

        let tails: Vec<f64> = (0..m)
            .map(|j| {
                let head: f64 = (0..keep).map(|i| d[(i, j)] * p[(i, j)]).sum();
                (snaps.errors[j] - head).abs()
            })
            .collect();
        let mean = tails.iter().sum::<f64>() / m as f64;
        let var = tails.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (m - 1) as f64;
        let halve = if cfg.t2_halved { 0.5 } else { 1.0 };
        let t2_hat = halve * mean;
        let t2_std_err = halve * libm::sqrt(var / m as f64);

        let z = rm.basis().matrix();
        let ip_a = model.a_q().iter().map(|a| phi.tr_mul(&(a * z))).collect();
        let mut ip_f = DMatrix::zeros(keep, model.num_gamma());
        for (q, f) in model.f_q().iter().enumerate() {
            ip_f.set_column(q, &phi.tr_mul(f));
        }

        Ok(Self {
            phi,
            ip_a,
            ip_f,
            beta_min,
            beta_max,
            t2_hat,
            t2_std_err,
            eigvals,
            corrected: cfg.corrected,
            partition: partition.clone(),
            sample_size: m,
            seed: cfg.seed,
            t2_halved: cfg.t2_halved,
            rank_truncated: keep < cfg.truncation,
        })
    }

    /// Retained truncation index `N`.
    pub fn truncation(&self) -> usize {
        self.phi.ncols()
    }

    /// Reduced dimension the inner-product tables were built for.
    pub fn reduced_dim(&self) -> usize {
        self.ip_a.first().map_or(0, |a| a.ncols())
    }

    /// Checks the structural invariants (table shapes, `beta_min <= beta_max`,
    /// `t2_hat >= 0`, orthonormal `phi`).
    pub fn validate(&self) -> Result<()> {
        let n = self.truncation();
        let k = self.partition.len();
        let shape_ok = self.ip_a.iter().all(|a| a.nrows() == n && a.ncols() == self.reduced_dim())
            && self.ip_f.nrows() == n
            && self.beta_min.shape() == (n, k)
            && self.beta_max.shape() == (n, k);
        if !shape_ok {
            return Err(Error::Contract("goal-oriented tables have inconsistent shapes".into()));
        }
        if self.beta_min.iter().zip(self.beta_max.iter()).any(|(a, b)| !(a <= b)) {
            return Err(Error::Contract("beta_min exceeds beta_max".into()));
        }
        if !(self.t2_hat >= 0.0) {
            return Err(Error::Contract(format!("negative tail estimate {}", self.t2_hat)));
        }
        let gram = self.phi.tr_mul(&self.phi);
        if n > 0 && (gram - DMatrix::identity(n, n)).amax() > 1e-8 {
            return Err(Error::Contract("phi vectors not orthonormal".into()));
        }
        Ok(())
    }

    fn check_rm(&self, rm: &ReducedModel) -> Result<()> {
        if rm.dim() != self.reduced_dim() || rm.projected_a().len() != self.ip_a.len() {
            return Err(Error::Contract(format!(
                "bound trained for reduced dimension {}, model has {}",
                self.reduced_dim(),
                rm.dim()
            )));
        }
        Ok(())
    }

    /// `<r(mu), phi_i>` from the offline tables, `O(N n Q + N Q')`.
    pub fn residual_projections(&self, sol: &ReducedSolution) -> DVector<f64> {
        let mut out = -(&self.ip_f * DVector::from_column_slice(sol.gamma()));
        for (t, a) in sol.theta().iter().zip(&self.ip_a) {
            out.gemv(*t, a, &sol.u_tilde, 1.0);
        }
        out
    }

    /// `T1` at an already-solved reduced point.
    pub fn t1_at(&self, sol: &ReducedSolution) -> Result<f64> {
        let k = self.partition.cell_of(&sol.mu)?;
        let proj = self.residual_projections(sol);
        let (mut low, mut up) = (0.0, 0.0);
        for (i, p) in proj.iter().enumerate() {
            let (bmin, bmax) = (self.beta_min[(i, k)], self.beta_max[(i, k)]);
            if *p > 0.0 {
                up += p * bmax;
                low += p * bmin;
            } else if *p < 0.0 {
                up += p * bmin;
                low += p * bmax;
            }
        }
        Ok(low.abs().max(up.abs()))
    }

    /// `T1(mu, N, Phi) = max(|T1_low|, |T1_up|)`.
    pub fn t1(&self, rm: &ReducedModel, mu: &ParameterPoint) -> Result<f64> {
        self.check_rm(rm)?;
        self.t1_at(&rm.solve(mu)?)
    }

    /// Bound `T1 + T2^ / alpha` with risk `alpha`.
    pub fn bound(&self, rm: &ReducedModel, mu: &ParameterPoint, alpha: f64) -> Result<f64> {
        check_risk(alpha)?;
        Ok(self.t1(rm, mu)? + self.t2_hat / alpha)
    }

    /// Bound together with the output it certifies.
    pub fn evaluate(&self, rm: &ReducedModel, mu: &ParameterPoint, alpha: f64) -> Result<GoalOrientedEval> {
        check_risk(alpha)?;
        self.check_rm(rm)?;
        let sol = rm.solve(mu)?;
        let t1 = self.t1_at(&sol)?;
        let mut output = rm.output(&sol)?;
        if self.corrected {
            let ud = rm.solve_dual(&sol)?;
            output -= rm.correction(&sol, &ud)?;
        }
        Ok(GoalOrientedEval { t1, t2_hat: self.t2_hat, bound: t1 + self.t2_hat / alpha, output })
    }
}

fn check_risk(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Contract(format!("risk {alpha} outside (0, 1)")))
    }
}
