//! Sparse linear algebra for the implicit pressure system: a compressed
//! sparse row matrix built from triplets, a Jacobi-preconditioned BiCGSTAB
//! solver, and a dense LU fallback used as oracle on small grids.

use crate::error::{Result, SolverError};
use crate::par;

/// Square sparse matrix in CSR form.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<f64>,
}

impl SparseMatrix {
    /// Build from (row, col, value) triplets, summing duplicates.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; n + 1];
        // Merge duplicates via a per-row map. Rows are short (<= 9
        // entries), so a sorted Vec per row is cheap.
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(r, c, v) in triplets {
            debug_assert!(r < n && c < n);
            let row = &mut rows[r];
            match row.binary_search_by_key(&c, |e| e.0) {
                Ok(k) => row[k].1 += v,
                Err(k) => row.insert(k, (c, v)),
            }
        }
        for (r, row) in rows.iter().enumerate() {
            counts[r + 1] = counts[r] + row.len();
        }
        let nnz = counts[n];
        let mut col = Vec::with_capacity(nnz);
        let mut val = Vec::with_capacity(nnz);
        for row in &rows {
            for &(c, v) in row {
                col.push(c);
                val.push(v);
            }
        }
        Self { n, row_ptr: counts, col, val }
    }

    /// y = A x (parallel over rows; bit-deterministic, each row is a
    /// fixed-order dot product).
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        par::par_map_indexed(y, |r| {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.val[k] * x[self.col[k]];
            }
            acc
        });
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.col[k] == r {
                    d[r] = self.val[k];
                }
            }
        }
        d
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.n]; self.n];
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                a[r][self.col[k]] = self.val[k];
            }
        }
        a
    }

    /// Plain-text triplet dump (row, col, value per line, 0-based).
    pub fn write_triplets<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                writeln!(w, "{} {} {:.17e}", r, self.col[k], self.val[k])?;
            }
        }
        Ok(())
    }
}

fn norm2(x: &[f64]) -> f64 {
    par::det_dot(x, x).sqrt()
}

/// Jacobi-preconditioned BiCGSTAB.
///
/// Stops at relative residual ||b - A x|| / ||b|| <= tol (true residual
/// recomputed on convergence). Dot products run sequentially in fixed
/// order so repeated runs are bit-identical.
pub fn bicgstab(
    a: &SparseMatrix,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<usize> {
    let n = a.n;
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(0);
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d.abs() > 0.0 { 1.0 / d } else { 1.0 })
        .collect();

    let mut r = vec![0.0; n];
    a.mul_vec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let r0 = r.clone();
    let mut rho_old = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut phat = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut shat = vec![0.0; n];
    let mut t = vec![0.0; n];

    let mut best = x.to_vec();
    let mut best_res = norm2(&r) / bnorm;

    for it in 1..=max_iter {
        let rho = par::det_dot(&r0, &r);
        if rho == 0.0 {
            break;
        }
        if it == 1 {
            p.copy_from_slice(&r);
        } else {
            let beta = (rho / rho_old) * (alpha / omega);
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
        }
        for i in 0..n {
            phat[i] = p[i] * inv_diag[i];
        }
        a.mul_vec(&phat, &mut v);
        let denom = par::det_dot(&r0, &v);
        if denom == 0.0 {
            break;
        }
        alpha = rho / denom;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm2(&s) / bnorm <= tol {
            for i in 0..n {
                x[i] += alpha * phat[i];
            }
            return finish(a, b, x, tol, bnorm, it);
        }
        for i in 0..n {
            shat[i] = s[i] * inv_diag[i];
        }
        a.mul_vec(&shat, &mut t);
        let tt = par::det_dot(&t, &t);
        if tt == 0.0 {
            break;
        }
        omega = par::det_dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * phat[i] + omega * shat[i];
            r[i] = s[i] - omega * t[i];
        }
        let res = norm2(&r) / bnorm;
        if res < best_res {
            best_res = res;
            best.copy_from_slice(x);
        }
        if res <= tol {
            return finish(a, b, x, tol, bnorm, it);
        }
        if omega == 0.0 {
            break;
        }
        rho_old = rho;
    }
    // Breakdown or max_iter: keep the best iterate seen and report.
    x.copy_from_slice(&best);
    if best_res <= tol {
        return Ok(max_iter);
    }
    Err(SolverError::LinearSolve(format!(
        "BiCGSTAB stalled at relative residual {best_res:.3e} (tol {tol:.1e})"
    )))
}

fn finish(
    a: &SparseMatrix,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    bnorm: f64,
    it: usize,
) -> Result<usize> {
    // Recompute the true residual; rounding in the recurrences can make
    // the estimated residual optimistic.
    let mut r = vec![0.0; a.n];
    a.mul_vec(x, &mut r);
    for i in 0..a.n {
        r[i] = b[i] - r[i];
    }
    let res = norm2(&r) / bnorm;
    if res <= 10.0 * tol {
        Ok(it)
    } else {
        Err(SolverError::LinearSolve(format!(
            "true residual {res:.3e} exceeds tolerance {tol:.1e}"
        )))
    }
}

/// Dense LU with partial pivoting; oracle path for grids <= 64^2.
pub fn dense_solve(a_dense: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    let mut a: Vec<Vec<f64>> = a_dense.to_vec();
    let mut x = b.to_vec();
    for k in 0..n {
        // pivot
        let mut piv = k;
        let mut mx = a[k][k].abs();
        for r in k + 1..n {
            if a[r][k].abs() > mx {
                mx = a[r][k].abs();
                piv = r;
            }
        }
        if mx == 0.0 {
            return Err(SolverError::LinearSolve("singular matrix in dense LU".into()));
        }
        if piv != k {
            a.swap(k, piv);
            x.swap(k, piv);
        }
        let akk = a[k][k];
        for r in k + 1..n {
            let f = a[r][k] / akk;
            if f == 0.0 {
                continue;
            }
            for c in k..n {
                let v = a[k][c];
                a[r][c] -= f * v;
            }
            x[r] -= f * x[k];
        }
    }
    for k in (0..n).rev() {
        let mut acc = x[k];
        for c in k + 1..n {
            acc -= a[k][c] * x[c];
        }
        x[k] = acc / a[k][k];
    }
    Ok(x)
}
