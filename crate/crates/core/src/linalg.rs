//! Small dense eigensolvers used by the mode analysis and the Krylov routines.
//!
//! Matrices are stored row-major in flat `Vec`s; sizes here are at most a few
//! hundred, so nothing fancier than cyclic Jacobi and implicit QL is needed.

use crate::error::{Error, Result};
use crate::num::Real;

/// Symmetric eigen-decomposition: ascending eigenvalues and column eigenvectors
/// (`vectors[row * n + col]`).
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    pub values: Vec<T>,
    pub vectors: Vec<T>,
    pub n: usize,
}

impl<T: Real> SymmetricEigen<T> {
    pub fn vector(&self, col: usize) -> Vec<T> {
        (0..self.n).map(|r| self.vectors[r * self.n + col]).collect()
    }

    fn sorted(mut self) -> Self {
        let n = self.n;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| self.values[a].partial_cmp(&self.values[b]).unwrap());
        let values = order.iter().map(|&i| self.values[i]).collect();
        let mut vectors = vec![T::zero(); n * n];
        for (new, &old) in order.iter().enumerate() {
            for r in 0..n {
                vectors[r * n + new] = self.vectors[r * n + old];
            }
        }
        self.values = values;
        self.vectors = vectors;
        self
    }
}

/// Cyclic Jacobi rotation method for a dense symmetric matrix.
pub fn jacobi_eigen<T: Real>(matrix: &[T], n: usize) -> Result<SymmetricEigen<T>> {
    if matrix.len() != n * n {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            found: matrix.len(),
        });
    }
    let mut a = matrix.to_vec();
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }
    let scale = a.iter().fold(T::zero(), |m, x| m.max(x.abs())).max(T::min_positive_value());
    let tol = T::epsilon() * scale;
    const MAX_SWEEPS: usize = 100;
    let mut off = T::zero();
    for _ in 0..MAX_SWEEPS {
        off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a[p * n + q].abs());
            }
        }
        if off <= tol {
            let values = (0..n).map(|i| a[i * n + i]).collect();
            return Ok(SymmetricEigen { values, vectors: v, n }.sorted());
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= tol {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (apq + apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    Err(Error::NonConvergence {
        what: "Jacobi eigensolver",
        iterations: MAX_SWEEPS,
        residual: off.to_f64_lossy(),
    })
}

/// Implicit-shift QL on a symmetric tridiagonal matrix with diagonal `diag`
/// and super-diagonal `off` (`off.len() == diag.len() - 1`).
pub fn tridiagonal_eigen<T: Real>(diag: &[T], off: &[T]) -> Result<SymmetricEigen<T>> {
    let n = diag.len();
    if n == 0 {
        return Ok(SymmetricEigen {
            values: Vec::new(),
            vectors: Vec::new(),
            n: 0,
        });
    }
    if off.len() + 1 != n {
        return Err(Error::DimensionMismatch {
            expected: n - 1,
            found: off.len(),
        });
    }
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.push(T::zero());
    let mut z = vec![T::zero(); n * n];
    for i in 0..n {
        z[i * n + i] = T::one();
    }
    let two = T::lit(2.0);
    const MAX_ITER: usize = 100;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= T::epsilon() * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_ITER {
                return Err(Error::NonConvergence {
                    what: "tridiagonal QL",
                    iterations: MAX_ITER,
                    residual: e[l].abs().to_f64_lossy(),
                });
            }
            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = g.hypot(T::one());
            let shifted = if g >= T::zero() { g + r } else { g - r };
            g = d[m] - d[l] + e[l] / shifted;
            let (mut s, mut c, mut p) = (T::one(), T::one(), T::zero());
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] -= p;
                    e[m] = T::zero();
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + two * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    let zf = z[k * n + i + 1];
                    z[k * n + i + 1] = s * z[k * n + i] + c * zf;
                    z[k * n + i] = c * z[k * n + i] - s * zf;
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = T::zero();
        }
    }
    Ok(SymmetricEigen {
        values: d,
        vectors: z,
        n,
    }
    .sorted())
}

/// Solves `a x = b` for symmetric positive definite `a` (row-major) by Cholesky.
/// Returns `None` if `a` is not numerically positive definite.
pub fn solve_spd<T: Real>(a: &[T], b: &[T]) -> Option<Vec<T>> {
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);
    let mut l = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= T::zero() {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    let mut y = vec![T::zero(); n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i * n + k] * y[k];
        }
        y[i] = sum / l[i * n + i];
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in (i + 1)..n {
            sum -= l[k * n + i] * x[k];
        }
        x[i] = sum / l[i * n + i];
    }
    Some(x)
}
