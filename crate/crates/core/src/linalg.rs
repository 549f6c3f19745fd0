//! Dense linear-algebra kernels shared by the full-order and reduced layers.
//!
//! The full-order factorization keeps dense row-major storage but skips the
//! structurally-zero part of the band, which makes banded operators (like the
//! space-time transport system) cheap without changing the arithmetic of a
//! textbook partial-pivoting LU.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

/// Relative pivot threshold: a pivot smaller than this times the largest
/// entry of the matrix is treated as singular.
pub const PIVOT_TOL: f64 = 1e-14;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// Lower and upper bandwidth of a square matrix: the largest `i - j` and
/// `j - i` over nonzero entries.
pub fn bandwidth(m: &DMatrix<f64>) -> (usize, usize) {
    let (mut kl, mut ku) = (0, 0);
    for j in 0..m.ncols() {
        for (i, v) in m.column(j).iter().enumerate() {
            if *v != 0.0 {
                if i > j {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
    }
    (kl, ku)
}

/// Flips the sign of a vector so that its largest-magnitude entry is
/// positive. Ties go to the first such entry.
pub fn fix_sign(v: &mut [f64]) {
    let mut best = 0.0f64;
    let mut sign = 1.0;
    for x in v.iter() {
        if x.abs() > best {
            best = x.abs();
            sign = if *x < 0.0 { -1.0 } else { 1.0 };
        }
    }
    if sign < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Row-pivoted LU factorization `P A = L U` held in dense row-major storage.
#[derive(Debug, Clone)]
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    // first stored column of L in each row, last stored column of U
    l_first: Vec<usize>,
    u_last: Vec<usize>,
}

/// Failure of [`DenseLu::factor`]: row index and offending pivot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularPivot {
    pub row: usize,
    pub pivot: f64,
}

impl DenseLu {
    /// Factors the row-major `n x n` matrix `a` whose lower and upper
    /// bandwidths are at most `kl` and `ku`.
    pub fn factor(n: usize, mut a: Vec<f64>, kl: usize, ku: usize) -> Result<Self, SingularPivot> {
        assert_eq!(a.len(), n * n);
        let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let tiny = PIVOT_TOL * scale;
        let mut perm = Vec::with_capacity(n);
        for k in 0..n {
            let rmax = n.min(k + kl + 1);
            let mut p = k;
            let mut best = a[k * n + k].abs();
            for r in k + 1..rmax {
                let v = a[r * n + k].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best > tiny) {
                return Err(SingularPivot { row: k, pivot: best });
            }
            perm.push(p);
            if p != k {
                let (head, tail) = a.split_at_mut(p * n);
                head[k * n..k * n + n].swap_with_slice(&mut tail[..n]);
            }
            let cmax = n.min(k + kl + ku + 1);
            let piv = a[k * n + k];
            for r in k + 1..rmax {
                let m = a[r * n + k] / piv;
                a[r * n + k] = m;
                if m != 0.0 {
                    let (top, bottom) = a.split_at_mut(r * n);
                    let src = &top[k * n + k + 1..k * n + cmax];
                    let dst = &mut bottom[k + 1..cmax];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d -= m * s;
                    }
                }
            }
        }
        let mut l_first = vec![0; n];
        let mut u_last = vec![0; n];
        for r in 0..n {
            let row = &a[r * n..r * n + n];
            l_first[r] = row[..r].iter().position(|x| *x != 0.0).unwrap_or(r);
            u_last[r] = r + row[r..].iter().rposition(|x| *x != 0.0).unwrap_or(0);
        }
        Ok(Self { n, lu: a, perm, l_first, u_last })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        for (k, &p) in self.perm.iter().enumerate() {
            b.swap(k, p);
        }
        for r in 0..n {
            let row = &self.lu[r * n..r * n + n];
            let mut s = b[r];
            for c in self.l_first[r]..r {
                s -= row[c] * b[c];
            }
            b[r] = s;
        }
        for r in (0..n).rev() {
            let row = &self.lu[r * n..r * n + n];
            let mut s = b[r];
            for c in r + 1..=self.u_last[r] {
                s -= row[c] * b[c];
            }
            b[r] = s / row[r];
        }
    }

    /// Solves `A^T x = b` in place.
    pub fn solve_transpose_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        // U^T y = b
        for r in 0..n {
            let row = &self.lu[r * n..r * n + n];
            let y = b[r] / row[r];
            b[r] = y;
            for c in r + 1..=self.u_last[r] {
                b[c] -= row[c] * y;
            }
        }
        // L^T z = y
        for r in (0..n).rev() {
            let row = &self.lu[r * n..r * n + n];
            let z = b[r];
            for c in self.l_first[r]..r {
                b[c] -= row[c] * z;
            }
        }
        for (k, &p) in self.perm.iter().enumerate().rev() {
            b.swap(k, p);
        }
    }
}

/// Small dense LU solve for reduced systems. Returns `None` on a pivot
/// below the relative threshold.
pub fn solve_small(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut x = b.clone();
    let scale = m.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    for k in 0..n {
        let mut p = k;
        for r in k + 1..n {
            if m[(r, k)].abs() > m[(p, k)].abs() {
                p = r;
            }
        }
        if !(m[(p, k)].abs() > PIVOT_TOL * scale) {
            return None;
        }
        if p != k {
            m.swap_rows(k, p);
            x.swap_rows(k, p);
        }
        let piv = m[(k, k)];
        for r in k + 1..n {
            let f = m[(r, k)] / piv;
            if f != 0.0 {
                for c in k + 1..n {
                    m[(r, c)] -= f * m[(k, c)];
                }
                x[r] -= f * x[k];
            }
        }
    }
    for r in (0..n).rev() {
        let mut s = x[r];
        for c in r + 1..n {
            s -= m[(r, c)] * x[c];
        }
        x[r] = s / m[(r, r)];
    }
    Some(x)
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted in
/// descending order. The input is symmetrized first.
pub fn sym_eigen_desc(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// Largest-magnitude eigenvalue of a symmetric operator by Lanczos with full
/// reorthogonalization. Returns `None` if not converged within `max_iter`.
pub fn lanczos_extreme<F>(n: usize, mut apply: F, max_iter: usize, tol: f64) -> Option<f64>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let mut q: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64 * 0.1).collect();
    let nq = norm(&q);
    q.iter_mut().for_each(|x| *x /= nq);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alphas = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let steps = max_iter.min(n);
    for j in 0..steps {
        apply(&q, &mut w);
        let a = dot(&q, &w);
        alphas.push(a);
        basis.push(q.clone());
        for _ in 0..2 {
            for v in &basis {
                let c = dot(v, &w);
                w.iter_mut().zip(v).for_each(|(x, y)| *x -= c * y);
            }
        }
        let b = norm(&w);
        let m = j + 1;
        if m % 4 == 0 || m == steps || b == 0.0 {
            let t = DMatrix::from_fn(m, m, |r, c| {
                if r == c {
                    alphas[r]
                } else if r + 1 == c {
                    betas[r]
                } else if c + 1 == r {
                    betas[c]
                } else {
                    0.0
                }
            });
            let (vals, vecs) = sym_eigen_desc(&t);
            let idx = if vals[0].abs() >= vals[m - 1].abs() { 0 } else { m - 1 };
            let theta = vals[idx];
            let resid = b * vecs[(m - 1, idx)].abs();
            if resid <= tol * theta.abs() || b == 0.0 || m == n {
                return Some(theta);
            }
        }
        betas.push(b);
        q.iter_mut().zip(&w).for_each(|(x, y)| *x = y / b);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
        let n = m.nrows();
        let mut v = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                v[r * n + c] = m[(r, c)];
            }
        }
        v
    }

    #[test]
    fn lu_matches_dense_solve_with_pivoting() {
        let m = DMatrix::from_row_slice(3, 3, &[0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0]);
        let lu = DenseLu::factor(3, row_major(&m), 2, 2).unwrap();
        let mut b = vec![3.0, 2.0, 4.0];
        lu.solve_in_place(&mut b);
        let x = DVector::from_vec(b);
        let back = &m * &x;
        assert!((back - DVector::from_vec(vec![3.0, 2.0, 4.0])).norm() < 1e-14);

        let mut c = vec![1.0, -1.0, 2.0];
        lu.solve_transpose_in_place(&mut c);
        let back = m.transpose() * DVector::from_vec(c);
        assert!((back - DVector::from_vec(vec![1.0, -1.0, 2.0])).norm() < 1e-14);
    }

    #[test]
    fn banded_lu_agrees_with_full_bandwidth() {
        let n = 12;
        let m = DMatrix::from_fn(n, n, |r, c| {
            let d = r as i64 - c as i64;
            match d {
                0 => 0.1 + r as f64 * 0.01,
                1 | 2 => 1.0 + c as f64 * 0.3,
                -1 => -0.7,
                _ => 0.0,
            }
        });
        let (kl, ku) = bandwidth(&m);
        assert_eq!((kl, ku), (2, 1));
        let banded = DenseLu::factor(n, row_major(&m), kl, ku).unwrap();
        let full = DenseLu::factor(n, row_major(&m), n - 1, n - 1).unwrap();
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let (mut x1, mut x2) = (rhs.clone(), rhs.clone());
        banded.solve_in_place(&mut x1);
        full.solve_in_place(&mut x2);
        assert_eq!(x1, x2);
        let mut t1 = rhs.clone();
        banded.solve_transpose_in_place(&mut t1);
        let back = m.transpose() * DVector::from_vec(t1);
        assert!((back - DVector::from_vec(rhs)).norm() < 1e-10);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(DenseLu::factor(2, row_major(&m), 1, 1).is_err());
        assert!(solve_small(&m, &DVector::from_vec(vec![1.0, 1.0])).is_none());
    }

    #[test]
    fn fix_sign_makes_largest_entry_positive() {
        let mut v = [0.1, -3.0, 2.0];
        fix_sign(&mut v);
        assert_eq!(v, [-0.1, 3.0, -2.0]);
    }

    #[test]
    fn lanczos_finds_largest_eigenvalue() {
        let n = 40;
        let diag: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let top = lanczos_extreme(
            n,
            |x, y| {
                for i in 0..n {
                    y[i] = diag[i] * x[i];
                }
            },
            100,
            1e-13,
        )
        .unwrap();
        assert!((top - 40.0).abs() < 1e-9);
    }
}
