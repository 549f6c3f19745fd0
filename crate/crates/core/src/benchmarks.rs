//! Built-in benchmark models.
//!
//! * Transport: `u_t + mu u_x = sin(x) exp(-x)` on `(0,1)^2` with
//!   `u(x,0) = x(1-x)` and `u(0,t) = 0`, discretized by the implicit upwind
//!   scheme on the whole space-time grid. The square system `B(mu) u = y`
//!   is normalized to `B^T B u = B^T y`. Unknowns are ordered time-major,
//!   `index(i, n) = n (N_x + 1) + i`, which makes `B` lower triangular.
//! * Diffusion: `-div(k grad u) = 1` on the unit square with homogeneous
//!   Dirichlet boundary, P1 elements on a uniform right-triangle mesh, and a
//!   conductivity that is constant on each of `b` equal vertical strips.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{AffineModel, Coefficient, ParameterBox, ParameterPoint};

#[derive(Debug, Clone, PartialEq)]
pub struct TransportConfig {
    pub dx: f64,
    pub dt: f64,
    pub mu_box: ParameterBox,
}

impl Default for TransportConfig {
    fn default() -> Self {
        Self { dx: 0.05, dt: 0.02, mu_box: ParameterBox::cube(1, 0.5, 1.0).expect("valid box") }
    }
}

fn steps(h: f64, what: &str) -> Result<usize> {
    if !(h > 0.0 && h <= 1.0) {
        return Err(Error::Config(format!("{what} = {h} outside (0, 1]")));
    }
    let n = libm::round(1.0 / h);
    if (n * h - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("1/{what} = {} is not an integer", 1.0 / h)));
    }
    Ok(n as usize)
}

impl TransportConfig {
    /// `(N_x, N_t)`.
    pub fn grid(&self) -> Result<(usize, usize)> {
        if self.mu_box.dim() != 1 {
            return Err(Error::Config("transport has a scalar parameter".into()));
        }
        Ok((steps(self.dx, "dx")?, steps(self.dt, "dt")?))
    }

    pub fn dim(&self) -> Result<usize> {
        let (nx, nt) = self.grid()?;
        Ok((nx + 1) * (nt + 1))
    }
}

/// The unnormalized transport system `B(mu) = B_0 + mu B_1`, `y`.
#[derive(Debug, Clone)]
pub struct TransportSystem {
    pub nx: usize,
    pub nt: usize,
    pub b0: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    pub y: DVector<f64>,
}

impl TransportSystem {
    pub fn new(cfg: &TransportConfig) -> Result<Self> {
        let (nx, nt) = cfg.grid()?;
        let dim = (nx + 1) * (nt + 1);
        let idx = |i: usize, n: usize| n * (nx + 1) + i;
        let mut b0 = DMatrix::zeros(dim, dim);
        let mut b1 = DMatrix::zeros(dim, dim);
        let mut y = DVector::zeros(dim);
        for i in 0..=nx {
            let x = i as f64 * cfg.dx;
            b0[(idx(i, 0), idx(i, 0))] = 1.0;
            y[idx(i, 0)] = x * (1.0 - x);
        }
        for n in 1..=nt {
            b0[(idx(0, n), idx(0, n))] = 1.0;
        }
        for n in 0..nt {
            for i in 0..nx {
                let row = idx(i + 1, n + 1);
                b0[(row, idx(i + 1, n + 1))] = 1.0 / cfg.dt;
                b0[(row, idx(i + 1, n))] = -1.0 / cfg.dt;
                b1[(row, idx(i + 1, n + 1))] = 1.0 / cfg.dx;
                b1[(row, idx(i, n + 1))] = -1.0 / cfg.dx;
                let x = i as f64 * cfg.dx;
                y[row] = libm::sin(x) * libm::exp(-x);
            }
        }
        Ok(Self { nx, nt, b0, b1, y })
    }

    pub fn b(&self, mu: f64) -> DMatrix<f64> {
        &self.b0 + &self.b1 * mu
    }
}

fn symmetrized(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Transport model with `Theta = (1, mu, mu^2)`, `gamma = (1, mu)` and the
/// output `s(mu) = u_{N_x}^{N_t}`.
pub fn build_transport(cfg: &TransportConfig) -> Result<AffineModel> {
    let sys = TransportSystem::new(cfg)?;
    let dim = sys.y.len();
    for mu in [cfg.mu_box.lo()[0], cfg.mu_box.hi()[0]] {
        let b = sys.b(mu);
        for k in 0..dim {
            if b[(k, k)] == 0.0 || (k + 1..dim).any(|c| b[(k, c)] != 0.0) {
                return Err(Error::Config(format!("B({mu}) is not lower triangular with nonzero diagonal")));
            }
        }
    }
    let a0 = symmetrized(sys.b0.tr_mul(&sys.b0));
    let a1 = symmetrized(sys.b0.tr_mul(&sys.b1) + sys.b1.tr_mul(&sys.b0));
    let a2 = symmetrized(sys.b1.tr_mul(&sys.b1));
    let f0 = sys.b0.tr_mul(&sys.y);
    let f1 = sys.b1.tr_mul(&sys.y);
    let mut l = DVector::zeros(dim);
    l[dim - 1] = 1.0;
    AffineModel::new(
        cfg.mu_box.clone(),
        vec![
            Coefficient::constant(1.0),
            Coefficient::described(|mu| mu[0], "mu"),
            Coefficient::described(|mu| mu[0] * mu[0], "mu^2"),
        ],
        vec![a0, a1, a2],
        vec![Coefficient::constant(1.0), Coefficient::described(|mu| mu[0], "mu")],
        vec![f0, f1],
        l,
        true,
    )
}

/// Solution of the transport scheme by marching in time: each implicit step
/// is a lower-bidiagonal system solved by forward substitution.
pub fn march_transport(cfg: &TransportConfig, mu: &ParameterPoint) -> Result<DVector<f64>> {
    cfg.mu_box.check(mu)?;
    let (nx, nt) = cfg.grid()?;
    let m = mu.coords()[0];
    let mut u = DVector::zeros((nx + 1) * (nt + 1));
    let mut prev: Vec<f64> = (0..=nx)
        .map(|i| {
            let x = i as f64 * cfg.dx;
            x * (1.0 - x)
        })
        .collect();
    u.rows_mut(0, nx + 1).copy_from_slice(&prev);
    let diag = 1.0 / cfg.dt + m / cfg.dx;
    for n in 1..=nt {
        let mut next = vec![0.0; nx + 1];
        for i in 0..nx {
            let x = i as f64 * cfg.dx;
            let src = libm::sin(x) * libm::exp(-x);
            next[i + 1] = (src + prev[i + 1] / cfg.dt + m * next[i] / cfg.dx) / diag;
        }
        u.rows_mut(n * (nx + 1), nx + 1).copy_from_slice(&next);
        prev = next;
    }
    Ok(u)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionConfig {
    /// Number of conductivity strips, the parameter dimension.
    pub blocks: usize,
    /// Interior nodes per direction; the model has `grid_n^2` unknowns.
    pub grid_n: usize,
    pub mu_box: ParameterBox,
}

impl DiffusionConfig {
    pub fn new(blocks: usize, grid_n: usize) -> Result<Self> {
        Ok(Self { blocks, grid_n, mu_box: ParameterBox::cube(blocks, 0.1, 10.0)? })
    }
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        Self::new(3, 24).expect("valid default")
    }
}

/// Strip-wise conductivity model with `A(mu) = sum_q mu_q A_q`, unit load
/// and the output equal to the mean of `u` over the interior nodes of the
/// last strip. Node `(i, j)` (column `i`, row `j`, both `1..=grid_n`) is
/// unknown `(j - 1) grid_n + (i - 1)`.
pub fn build_diffusion(cfg: &DiffusionConfig) -> Result<AffineModel> {
    let (b, n) = (cfg.blocks, cfg.grid_n);
    if b == 0 || n < b + 1 {
        return Err(Error::Config(format!("grid_n = {n} needs at least blocks + 1 = {}", b + 1)));
    }
    if cfg.mu_box.dim() != b || cfg.mu_box.lo().iter().any(|&lo| lo <= 0.0) {
        return Err(Error::Config("conductivity box must be positive and match the block count".into()));
    }
    let dim = n * n;
    let h = 1.0 / (n + 1) as f64;
    // grid node (i, j) in 0..=n+1; boundary nodes carry no unknown
    let unknown = |i: usize, j: usize| (i >= 1 && i <= n && j >= 1 && j <= n).then(|| (j - 1) * n + (i - 1));
    let mut a_q = vec![DMatrix::zeros(dim, dim); b];
    // each square cell splits into two right triangles along one diagonal;
    // the P1 Laplacian then weights each cell edge by 1/2 and the diagonal by 0
    for cx in 0..=n {
        let a = &mut a_q[(cx * b) / (n + 1)];
        for cy in 0..=n {
            let edges = [
                ((cx, cy), (cx + 1, cy)),
                ((cx, cy + 1), (cx + 1, cy + 1)),
                ((cx, cy), (cx, cy + 1)),
                ((cx + 1, cy), (cx + 1, cy + 1)),
            ];
            for ((i0, j0), (i1, j1)) in edges {
                let (p, q) = (unknown(i0, j0), unknown(i1, j1));
                if let Some(p) = p {
                    a[(p, p)] += 0.5;
                }
                if let Some(q) = q {
                    a[(q, q)] += 0.5;
                }
                if let (Some(p), Some(q)) = (p, q) {
                    a[(p, q)] -= 0.5;
                    a[(q, p)] -= 0.5;
                }
            }
        }
    }
    let f = DVector::from_element(dim, h * h);
    let start = (b - 1) as f64 / b as f64;
    let cols: Vec<usize> = (1..=n).filter(|&i| i as f64 * h >= start).collect();
    let mut l = DVector::zeros(dim);
    let weight = 1.0 / (cols.len() * n) as f64;
    for j in 1..=n {
        for &i in &cols {
            l[(j - 1) * n + (i - 1)] = weight;
        }
    }
    let theta = (0..b).map(Coefficient::coordinate).collect();
    AffineModel::new(cfg.mu_box.clone(), theta, a_q, vec![Coefficient::constant(1.0)], vec![f], l, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_transport_dimension() {
        assert_eq!(TransportConfig::default().dim().unwrap(), 21 * 51);
    }

    #[test]
    fn non_integer_steps_rejected() {
        let cfg = TransportConfig { dx: 0.3, ..TransportConfig::default() };
        assert!(matches!(build_transport(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn transport_rows_follow_the_scheme() {
        let cfg = TransportConfig { dx: 0.25, dt: 0.5, ..TransportConfig::default() };
        let sys = TransportSystem::new(&cfg).unwrap();
        // first scheme row sits at (i, n) = (1, 1), source at i = 0 is zero
        let row = 5 + 1;
        assert_eq!(sys.y[row], 0.0);
        assert_eq!(sys.b0[(row, row)], 2.0);
        assert_eq!(sys.b0[(row, 1)], -2.0);
        assert_eq!(sys.b1[(row, row)], 4.0);
        assert_eq!(sys.b1[(row, 5)], -4.0);
    }

    #[test]
    fn marching_matches_triangular_solve() {
        let cfg = TransportConfig { dx: 0.1, dt: 0.1, ..TransportConfig::default() };
        let sys = TransportSystem::new(&cfg).unwrap();
        let mu = ParameterPoint::from(0.8);
        let u = march_transport(&cfg, &mu).unwrap();
        let back = sys.b(0.8) * &u;
        assert!((back - &sys.y).amax() < 1e-12);
    }

    #[test]
    fn diffusion_single_block_scales_inversely() {
        let cfg = DiffusionConfig { blocks: 1, grid_n: 8, mu_box: ParameterBox::cube(1, 0.1, 10.0).unwrap() };
        let m = build_diffusion(&cfg).unwrap();
        let u1 = m.solve_full(&1.0.into()).unwrap().u;
        let u4 = m.solve_full(&4.0.into()).unwrap().u;
        assert!((u4 * 4.0 - &u1).amax() < 1e-12);
    }

    #[test]
    fn diffusion_unit_conductivity_is_poisson_matrix() {
        let n = 6;
        let m = build_diffusion(&DiffusionConfig::new(3, n).unwrap()).unwrap();
        let (a, _) = m.assemble(&vec![1.0, 1.0, 1.0].into()).unwrap();
        let poisson = DMatrix::from_fn(n * n, n * n, |r, c| {
            let (ri, rj, ci, cj) = (r % n, r / n, c % n, c / n);
            match (ri.abs_diff(ci), rj.abs_diff(cj)) {
                (0, 0) => 4.0,
                (1, 0) | (0, 1) => -1.0,
                _ => 0.0,
            }
        });
        assert!((a - poisson).amax() < 1e-12);
    }

    #[test]
    fn diffusion_output_averages_last_strip() {
        let m = build_diffusion(&DiffusionConfig::new(2, 5).unwrap()).unwrap();
        let l = m.output_vector();
        assert!((l.sum() - 1.0).abs() < 1e-15);
        // columns with x = i/6 >= 1/2 are i = 3, 4, 5
        assert!(l[2] > 0.0 && l[1] == 0.0 && l[5 + 2] > 0.0);
    }

    #[test]
    fn diffusion_rejects_small_grid() {
        assert!(build_diffusion(&DiffusionConfig::new(3, 3).unwrap()).is_err());
    }
}
