//! Compressed sparse rows and a Jacobi-preconditioned conjugate gradient.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    /// Builds an `n × n` matrix, summing duplicates in insertion order.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(triplets.len() / 2);
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len() / 2);
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            if last == Some((i, j)) {
                *vals.last_mut().expect("entry exists") += v;
            } else {
                cols.push(j);
                vals.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Csr { n, row_ptr, cols, vals }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            *yi = s;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_into(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .find(|&k| self.cols[k] == i)
                    .map_or(0.0, |k| self.vals[k])
            })
            .collect()
    }

    /// `xᵀ A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.mul(x))
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[k];
                let t = (self.row_ptr[j]..self.row_ptr[j + 1])
                    .find(|&q| self.cols[q] == i)
                    .map_or(0.0, |q| self.vals[q]);
                worst = worst.max((self.vals[k] - t).abs());
            }
        }
        worst / scale
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// `‖b - Ax‖ / ‖b‖`, recomputed from the final iterate.
    pub relative_residual: f64,
}

/// Solves `Ax = b` for symmetric positive definite `A` by Jacobi-PCG.
///
/// Iterates until the recursive residual reaches `tol`; the true residual
/// must then be within `accept` (≥ `tol`), which leaves room for the
/// rounding floor of large systems.
pub fn pcg(a: &Csr, b: &[f64], tol: f64, accept: f64, max_iter: usize) -> Result<(Vec<f64>, SolveStats)> {
    let n = a.n;
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, SolveStats { iterations: 0, relative_residual: 0.0 }));
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 0.0 })
        .collect();
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, m)| r * m).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut it = 0;
    let mut restarts = 0;
    loop {
        let rel = norm(&r) / bnorm;
        if rel <= tol || it >= max_iter {
            // confirm against the true residual
            a.mul_into(&x, &mut ap);
            let true_r: Vec<f64> = b.iter().zip(&ap).map(|(b, y)| b - y).collect();
            let true_rel = norm(&true_r) / bnorm;
            if true_rel <= tol {
                return Ok((x, SolveStats { iterations: it, relative_residual: true_rel }));
            }
            if it >= max_iter || restarts >= 3 {
                if true_rel <= accept {
                    return Ok((x, SolveStats { iterations: it, relative_residual: true_rel }));
                }
                return Err(Error::SingularSystem { iterations: it, residual: true_rel });
            }
            restarts += 1;
            r = true_r;
            z = r.iter().zip(&inv_diag).map(|(r, m)| r * m).collect();
            p = z.clone();
            rz = dot(&r, &z);
            continue;
        }
        a.mul_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::SingularSystem { iterations: it, residual: rel });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        it += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> Csr {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        Csr::from_triplets(n, t)
    }

    #[test]
    fn duplicates_are_summed() {
        let a = Csr::from_triplets(2, vec![(0, 0, 1.0), (1, 1, 2.0), (0, 0, 3.0), (0, 1, 1.0), (1, 0, 1.0)]);
        assert_eq!(a.nnz(), 4);
        assert_eq!(a.diagonal(), vec![4.0, 2.0]);
        assert_eq!(a.mul(&[1.0, 1.0]), vec![5.0, 3.0]);
        assert_eq!(a.asymmetry(), 0.0);
    }

    #[test]
    fn pcg_solves_a_laplacian() {
        let n = 200;
        let a = laplacian_1d(n);
        let exact: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.1).sin()).collect();
        let b = a.mul(&exact);
        let (x, stats) = pcg(&a, &b, 1e-12, 1e-12, 10_000).unwrap();
        assert!(stats.relative_residual <= 1e-12);
        for (u, v) in x.iter().zip(&exact) {
            assert!((u - v).abs() < 1e-8);
        }
    }

    #[test]
    fn pcg_reports_failure() {
        let a = laplacian_1d(500);
        let b = vec![1.0; 500];
        assert!(matches!(pcg(&a, &b, 1e-14, 1e-14, 3), Err(Error::SingularSystem { .. })));
    }
}
