//! Convergence sweeps and certified Sobol tables.

use std::fmt::Write as _;
use std::io;

use nalgebra::DVector;
use rbcert_core::bounds::{stability_constant, train_goal_oriented, TrainingConfig};
use rbcert_core::reduction::collect_snapshots;
use rbcert_core::sensitivity::{hybrid, pick_freeze_design, sobol_certified, PickFreezeSample, SobolResult};
use rbcert_core::{par_map, pod_basis, AffineModel, ParameterPoint, ReducedBasis, ReducedModel};

use crate::config::ExperimentConfig;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub basis_size: usize,
    /// `basis_size * 2^(1/3)`: the dual method pays for two reduced solves.
    pub equivalent_size_dual: f64,
    pub mean_true_err_uncorrected: f64,
    pub mean_true_err_corrected: f64,
    pub mean_lipschitz: f64,
    pub mean_dual_based: f64,
    pub mean_goal_uncorrected: f64,
    pub mean_goal_corrected: f64,
    pub t2_hat: f64,
}

pub const CONVERGENCE_COLUMNS: &str = "basis_size,equivalent_size_dual,mean_true_err_uncorrected,\
mean_true_err_corrected,mean_lipschitz,mean_dual_based,mean_goal_uncorrected,mean_goal_corrected,t2_hat";

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub header: String,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn to_csv(&self) -> String {
        let mut s = self.header.clone();
        s.push_str(CONVERGENCE_COLUMNS);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                r.basis_size,
                r.equivalent_size_dual,
                r.mean_true_err_uncorrected,
                r.mean_true_err_corrected,
                r.mean_lipschitz,
                r.mean_dual_based,
                r.mean_goal_uncorrected,
                r.mean_goal_corrected,
                r.t2_hat
            );
        }
        s
    }

    pub fn write_csv<W: io::Write>(&self, mut out: W) -> io::Result<()> {
        out.write_all(self.to_csv().as_bytes())
    }
}

/// Truth at an evaluation point, shared by every basis size.
struct Reference {
    mu: ParameterPoint,
    s: f64,
    alpha: f64,
}

#[derive(Default, Clone, Copy)]
struct Sums {
    err: f64,
    err_c: f64,
    lip: f64,
    dual: f64,
    goal: f64,
    goal_c: f64,
}

impl core::ops::Add for Sums {
    type Output = Sums;
    fn add(self, o: Sums) -> Sums {
        Sums {
            err: self.err + o.err,
            err_c: self.err_c + o.err_c,
            lip: self.lip + o.lip,
            dual: self.dual + o.dual,
            goal: self.goal + o.goal,
            goal_c: self.goal_c + o.goal_c,
        }
    }
}

fn numeric(n: usize) -> impl Fn(rbcert_core::Error) -> CliError {
    move |source| CliError::Numeric { basis_size: Some(n), source }
}

fn training(cfg: &ExperimentConfig, corrected: bool) -> TrainingConfig {
    TrainingConfig {
        sample_size: cfg.bound_snapshots,
        truncation: cfg.truncation,
        corrected,
        seed: cfg.seeds.train,
        t2_halved: cfg.t2_halved,
    }
}

fn evaluate_point(
    model: &AffineModel,
    rm: &ReducedModel,
    goal: &rbcert_core::bounds::GoalOrientedBoundData,
    goal_c: &rbcert_core::bounds::GoalOrientedBoundData,
    risk: f64,
    r: &Reference,
) -> rbcert_core::Result<Sums> {
    let sol = rm.solve(&r.mu)?;
    let s_tilde = rm.output(&sol)?;
    let res = rm.residual(model, &sol)?.norm();
    let ud = rm.solve_dual(&sol)?;
    let res_d = rm.dual_residual(model, &sol, &ud)?.norm();
    let g = goal.evaluate(rm, &r.mu, risk)?;
    let gc = goal_c.evaluate(rm, &r.mu, risk)?;
    Ok(Sums {
        err: (s_tilde - r.s).abs(),
        err_c: (gc.output - r.s).abs(),
        lip: model.output_vector().norm() * res / r.alpha,
        dual: res * res_d / r.alpha,
        goal: g.bound,
        goal_c: gc.bound,
    })
}

/// POD basis of the adjoint snapshots with `n` vectors, or fewer when they
/// span less: a dual basis holding every adjoint snapshot is already exact.
pub(crate) fn dual_basis(adjoint: &[DVector<f64>], n: usize) -> rbcert_core::Result<ReducedBasis> {
    match pod_basis(adjoint, n) {
        Err(rbcert_core::Error::Rank { rank, .. }) if rank > 0 => pod_basis(adjoint, rank),
        other => other,
    }
}

/// Sweeps `cfg.basis_sizes`: POD bases (primal and dual) from one snapshot
/// set, both goal-oriented bounds trained per size, and all four bounds and
/// both true errors averaged over a fresh evaluation sample.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<ConvergenceTable, CliError> {
    cfg.validate()?;
    let model = cfg.benchmark.build()?;
    let domain = model.domain();
    let partition = cfg.partition()?;
    let num = |source| CliError::Numeric { basis_size: None, source };

    let snap_params = domain.sample_seeded(cfg.pod_snapshots, cfg.seeds.snapshot);
    let (primal, adjoint) = collect_snapshots(&model, &snap_params).map_err(num)?;

    let eval = domain.sample_seeded(cfg.eval_sample, cfg.seeds.eval);
    let refs = par_map(&eval, |mu| -> rbcert_core::Result<Reference> {
        let u = model.solve_full(mu)?.u;
        Ok(Reference { mu: mu.clone(), s: model.output(u.as_slice())?, alpha: stability_constant(&model, mu)? })
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()
    .map_err(num)?;

    let mut rows = Vec::with_capacity(cfg.basis_sizes.len());
    for &n in &cfg.basis_sizes {
        let err = numeric(n);
        let basis = pod_basis(&primal, n).map_err(&err)?;
        let dual = dual_basis(&adjoint, n).map_err(&err)?;
        let rm = ReducedModel::project(&model, basis, Some(dual)).map_err(&err)?;
        let goal = train_goal_oriented(&model, &rm, &partition, &training(cfg, false)).map_err(&err)?;
        let goal_c = train_goal_oriented(&model, &rm, &partition, &training(cfg, true)).map_err(&err)?;

        let per_point = par_map(&refs, |r| evaluate_point(&model, &rm, &goal, &goal_c, cfg.alpha, r));
        let mut sum = Sums::default();
        for p in per_point {
            sum = sum + p.map_err(&err)?;
        }
        let k = refs.len() as f64;
        rows.push(ConvergenceRow {
            basis_size: n,
            equivalent_size_dual: n as f64 * 2f64.cbrt(),
            mean_true_err_uncorrected: sum.err / k,
            mean_true_err_corrected: sum.err_c / k,
            mean_lipschitz: sum.lip / k,
            mean_dual_based: sum.dual / k,
            mean_goal_uncorrected: sum.goal / k,
            mean_goal_corrected: sum.goal_c / k,
            t2_hat: goal.t2_hat,
        });
    }
    Ok(ConvergenceTable { header: cfg.header_comment("convergence"), rows })
}

pub const SOBOL_COLUMNS: &str = "index,s_hat,meta_lo,meta_hi,combined_lo,combined_hi,level,meta_converged";

#[derive(Debug, Clone, PartialEq)]
pub struct SobolTable {
    pub header: String,
    pub rows: Vec<SobolResult>,
}

impl SobolTable {
    pub fn to_csv(&self) -> String {
        let mut s = self.header.clone();
        s.push_str(SOBOL_COLUMNS);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:e},{:e},{:e},{:e},{:e},{:e},{}",
                r.index,
                r.s_hat,
                r.meta_interval.0,
                r.meta_interval.1,
                r.combined_interval.0,
                r.combined_interval.1,
                r.level,
                r.meta_converged
            );
        }
        s
    }

    pub fn write_csv<W: io::Write>(&self, mut out: W) -> io::Result<()> {
        out.write_all(self.to_csv().as_bytes())
    }
}

/// Certified Sobol indices of the reduced output at the largest configured
/// basis size, with per-sample uncorrected goal-oriented bounds at risk
/// `sobol.alpha`.
pub fn run_sobol(cfg: &ExperimentConfig) -> Result<SobolTable, CliError> {
    cfg.validate()?;
    let sc = cfg.sobol.ok_or_else(|| CliError::Config("sobol run needs sobol.* settings".into()))?;
    let model = cfg.benchmark.build()?;
    let domain = model.domain();
    if domain.dim() < 2 {
        return Err(CliError::Config(format!("{} has a single parameter", cfg.benchmark.name())));
    }
    let n = *cfg.basis_sizes.iter().max().expect("validated non-empty");
    let err = numeric(n);
    let snap_params = domain.sample_seeded(cfg.pod_snapshots, cfg.seeds.snapshot);
    let rm = ReducedModel::build(&model, &snap_params, n, false).map_err(&err)?;
    let goal = train_goal_oriented(&model, &rm, &cfg.partition()?, &training(cfg, false)).map_err(&err)?;

    let outputs = |pts: &[ParameterPoint]| -> Result<(Vec<f64>, Vec<f64>), CliError> {
        let evals = par_map(pts, |mu| goal.evaluate(&rm, mu, sc.alpha));
        let mut s = Vec::with_capacity(pts.len());
        let mut eps = Vec::with_capacity(pts.len());
        for e in evals {
            let e = e.map_err(&err)?;
            s.push(e.output);
            eps.push(if sc.zero_eps { 0.0 } else { e.bound });
        }
        Ok((s, eps))
    };

    let (mu_a, mu_b) = pick_freeze_design(domain, sc.m, cfg.seeds.eval);
    let (s, eps) = outputs(&mu_a)?;
    let mut rows = Vec::with_capacity(domain.dim());
    for i in 0..domain.dim() {
        let hybrids: Vec<ParameterPoint> = mu_a.iter().zip(&mu_b).map(|(a, b)| hybrid(a, b, i)).collect();
        let (s_prime, eps_prime) = outputs(&hybrids)?;
        let sample = PickFreezeSample {
            index: i,
            mu_a: mu_a.clone(),
            mu_b: mu_b.clone(),
            s: s.clone(),
            s_prime,
            eps: eps.clone(),
            eps_prime,
        };
        let seed = cfg.seeds.eval.wrapping_add(1 + i as u64);
        rows.push(sobol_certified(&sample, sc.alpha_as, sc.b, sc.alpha, seed).map_err(&err)?);
    }
    Ok(SobolTable { header: cfg.header_comment("sobol"), rows })
}

/// Reduced output with its goal-oriented bound at one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct PointBound {
    pub mu: Vec<f64>,
    pub output: f64,
    pub t1: f64,
    pub t2_hat: f64,
    pub bound: f64,
}

impl PointBound {
    pub fn to_csv(&self, header: &str) -> String {
        let mu: Vec<String> = self.mu.iter().map(|x| format!("{x:e}")).collect();
        format!("{header}mu,output,t1,t2_hat,bound\n{},{:e},{:e},{:e},{:e}\n", mu.join(" "), self.output, self.t1, self.t2_hat, self.bound)
    }
}

pub(crate) fn point_bound(
    rm: &ReducedModel,
    goal: &rbcert_core::bounds::GoalOrientedBoundData,
    mu: &[f64],
    risk: f64,
) -> Result<PointBound, CliError> {
    let p = ParameterPoint::new(mu.to_vec());
    let e = goal
        .evaluate(rm, &p, risk)
        .map_err(|source| CliError::Numeric { basis_size: Some(rm.dim()), source })?;
    Ok(PointBound { mu: mu.to_vec(), output: e.output, t1: e.t1, t2_hat: e.t2_hat, bound: e.bound })
}

