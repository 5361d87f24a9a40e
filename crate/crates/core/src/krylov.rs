//! Lanczos routines over matrix-free real symmetric operators: lowest
//! eigenpairs with locking, and the Krylov exponential `exp(-i theta A) v`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::tridiagonal_eigen;
use crate::num::{Complex, Real};

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + *x * *y)
}

fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += alpha * *x);
}

fn orthogonalize<T: Real>(w: &mut [T], basis: &[Vec<T>]) {
    // two passes of classical Gram-Schmidt
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, w);
            axpy(-c, q, w);
        }
    }
}

/// Settings for [`lowest_eigenpairs_op`].
#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions<T> {
    /// Largest Krylov dimension per run.
    pub max_krylov: usize,
    /// Upper bound on the total number of Lanczos runs.
    pub max_runs: usize,
    /// Lock a Ritz pair once `|A y - theta y| < lock_tol * norm_bound`.
    pub lock_tol: T,
    /// Eigenvalues within `degeneracy_tol * norm_bound` are treated as equal.
    pub degeneracy_tol: T,
    pub seed: u64,
}

impl<T: Real> Default for LanczosOptions<T> {
    fn default() -> Self {
        Self {
            max_krylov: 120,
            max_runs: 400,
            lock_tol: T::lit(1e-10).max(T::epsilon() * T::lit(100.0)),
            degeneracy_tol: T::lit(1e-9).max(T::epsilon() * T::lit(1000.0)),
            seed: 0x5eed,
        }
    }
}

/// A converged Ritz pair.
#[derive(Debug, Clone)]
pub struct RitzPair<T> {
    pub value: T,
    pub vector: Vec<T>,
    pub residual: T,
}

/// One Lanczos run with full reorthogonalization, kept orthogonal to `locked`.
/// Returns Ritz pairs in ascending order with cheap residual estimates.
fn lanczos_run<T, F>(apply: &F, locked: &[Vec<T>], start: Vec<T>, max_m: usize, breakdown: T) -> Result<Vec<RitzPair<T>>>
where
    T: Real,
    F: Fn(&[T], &mut [T]),
{
    let dim = start.len();
    let mut q = start;
    orthogonalize(&mut q, locked);
    let nq = dot(&q, &q).sqrt();
    if !(nq > breakdown) {
        return Ok(Vec::new());
    }
    q.iter_mut().for_each(|x| *x /= nq);
    let room = dim.saturating_sub(locked.len()).max(1);
    let max_m = max_m.min(room);
    let mut basis = vec![q];
    let (mut alphas, mut betas): (Vec<T>, Vec<T>) = (Vec::new(), Vec::new());
    let mut w = vec![T::zero(); dim];
    let last_beta = loop {
        let j = basis.len() - 1;
        apply(&basis[j], &mut w);
        let a = dot(&basis[j], &w);
        axpy(-a, &basis[j], &mut w);
        if j > 0 {
            axpy(-betas[j - 1], &basis[j - 1], &mut w);
        }
        orthogonalize(&mut w, locked);
        orthogonalize(&mut w, &basis);
        alphas.push(a);
        let b = dot(&w, &w).sqrt();
        if b <= breakdown || basis.len() >= max_m {
            break if b <= breakdown { T::zero() } else { b };
        }
        betas.push(b);
        basis.push(w.iter().map(|x| *x / b).collect());
    };
    let m = alphas.len();
    let tri = tridiagonal_eigen(&alphas, &betas)?;
    let mut pairs = Vec::with_capacity(m);
    for i in 0..m {
        let s = tri.vector(i);
        let mut y = vec![T::zero(); dim];
        for (qj, sj) in basis.iter().zip(&s) {
            axpy(*sj, qj, &mut y);
        }
        pairs.push(RitzPair {
            value: tri.values[i],
            vector: y,
            residual: last_beta * s[m - 1].abs(),
        });
    }
    Ok(pairs)
}

fn residual<T: Real, F: Fn(&[T], &mut [T])>(apply: &F, value: T, v: &[T]) -> T {
    let mut av = vec![T::zero(); v.len()];
    apply(v, &mut av);
    av.iter()
        .zip(v)
        .fold(T::zero(), |acc, (a, x)| {
            let r = *a - value * *x;
            acc + r * r
        })
        .sqrt()
}

fn random_vector<T: Real>(rng: &mut ChaCha8Rng, dim: usize) -> Vec<T> {
    (0..dim).map(|_| T::lit(rng.random::<f64>() - 0.5)).collect()
}

/// Lowest `k` eigenpairs of the real symmetric operator `apply` (dimension `dim`).
///
/// Degenerate eigenspaces are resolved by deflation: every run is kept
/// orthogonal to the already locked vectors, and the search stops once a fresh
/// run's lowest converged value lies above the `k`-th locked one. `start`
/// optionally seeds the first run. Vectors are orthonormal.
pub fn lowest_eigenpairs_op<T, F>(
    dim: usize,
    k: usize,
    apply: F,
    norm_bound: T,
    start: Option<Vec<T>>,
    opts: &LanczosOptions<T>,
) -> Result<Vec<RitzPair<T>>>
where
    T: Real,
    F: Fn(&[T], &mut [T]),
{
    if k == 0 {
        return Ok(Vec::new());
    }
    if k > dim {
        return Err(Error::InvalidParameter(format!("requested {k} eigenpairs of a {dim}-dimensional operator")));
    }
    let scale = norm_bound.max(T::min_positive_value());
    let lock_tol = opts.lock_tol * scale;
    let deg_tol = opts.degeneracy_tol * scale;
    let breakdown = T::epsilon() * T::lit(10.0) * scale.max(T::one());
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut locked: Vec<RitzPair<T>> = Vec::new();
    let mut locked_vecs: Vec<Vec<T>> = Vec::new();
    let mut next_start = start;
    let mut worst = T::infinity();
    let mut done = false;
    for _ in 0..opts.max_runs {
        if locked.len() == dim {
            done = true;
            break;
        }
        let v0 = next_start.take().unwrap_or_else(|| random_vector(&mut rng, dim));
        let pairs = lanczos_run(&apply, &locked_vecs, v0, opts.max_krylov, breakdown)?;
        if pairs.is_empty() {
            // start vector lay inside the locked span
            continue;
        }
        let kth = if locked.len() >= k {
            let mut vals: Vec<T> = locked.iter().map(|p| p.value).collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            Some(vals[k - 1])
        } else {
            None
        };
        let mut converged = Vec::new();
        for p in pairs.iter() {
            if p.residual > lock_tol {
                break;
            }
            let r = residual(&apply, p.value, &p.vector);
            if r > lock_tol {
                break;
            }
            converged.push(RitzPair { residual: r, ..p.clone() });
        }
        if converged.is_empty() {
            // explicit restart from the best Ritz vector
            worst = pairs[0].residual;
            next_start = Some(pairs.into_iter().next().unwrap().vector);
            continue;
        }
        if let Some(th) = kth {
            if converged[0].value > th + deg_tol {
                done = true;
                break;
            }
        }
        for p in converged {
            if let Some(th) = kth {
                if p.value > th + deg_tol {
                    break;
                }
            }
            // re-orthogonalize against the lock set to keep the basis clean
            let mut v = p.vector;
            orthogonalize(&mut v, &locked_vecs);
            let nv = dot(&v, &v).sqrt();
            if nv < T::lit(0.5) {
                continue;
            }
            v.iter_mut().for_each(|x| *x /= nv);
            locked_vecs.push(v.clone());
            locked.push(RitzPair { vector: v, ..p });
        }
    }
    if !done {
        return Err(Error::NonConvergence {
            what: "Lanczos eigensolver",
            iterations: opts.max_runs,
            residual: worst.to_f64_lossy(),
        });
    }
    locked.sort_by(|a, b| a.value.partial_cmp(&b.value).unwrap());
    locked.truncate(k);
    let tol = T::lit(1e-8) * scale;
    for p in locked.iter_mut() {
        p.residual = residual(&apply, p.value, &p.vector);
        if !(p.residual < tol) {
            return Err(Error::NonConvergence {
                what: "Lanczos eigenpair residual",
                iterations: opts.max_runs,
                residual: p.residual.to_f64_lossy(),
            });
        }
    }
    Ok(locked)
}

/// `exp(-i theta A) v` for real symmetric `A`, by an adaptive Lanczos
/// projection. The Krylov space grows until the a posteriori error estimate
/// `beta_m |e_m^T exp(-i theta T_m) e_1| |v|` drops below `tol`; exceeding
/// `max_m` is reported as [`Error::NonConvergence`] so the caller can shrink
/// `theta`. Returns the propagated vector and the Krylov dimension used.
pub fn expm_krylov<T, F>(apply: &F, v: &[Complex<T>], theta: T, tol: T, max_m: usize) -> Result<(Vec<Complex<T>>, usize)>
where
    T: Real,
    F: Fn(&[Complex<T>], &mut [Complex<T>]),
{
    let dim = v.len();
    let zero = Complex::new(T::zero(), T::zero());
    let nv = crate::state::norm(v);
    if nv == T::zero() {
        return Ok((v.to_vec(), 0));
    }
    let mut basis: Vec<Vec<Complex<T>>> = vec![v.iter().map(|x| *x / nv).collect()];
    let (mut alphas, mut betas) = (Vec::new(), Vec::new());
    let mut w = vec![zero; dim];
    let err = loop {
        let j = basis.len() - 1;
        apply(&basis[j], &mut w);
        let a = crate::state::inner(&basis[j], &w).re;
        w.iter_mut().zip(&basis[j]).for_each(|(w, q)| *w -= *q * a);
        if j > 0 {
            let b = betas[j - 1];
            w.iter_mut().zip(&basis[j - 1]).for_each(|(w, q)| *w -= *q * b);
        }
        alphas.push(a);
        let b = crate::state::norm(&w);
        let m = alphas.len();
        let tri = tridiagonal_eigen(&alphas, &betas)?;
        // c = Q exp(-i theta L) Q^T e1
        let phases: Vec<Complex<T>> = (0..m)
            .map(|i| {
                let q0 = tri.vectors[i];
                Complex::from_polar(q0, -theta * tri.values[i])
            })
            .collect();
        let coeff: Vec<Complex<T>> = (0..m)
            .map(|r| (0..m).fold(zero, |acc, i| acc + phases[i] * tri.vectors[r * m + i]))
            .collect();
        let happy = b <= T::epsilon() * T::lit(10.0) * (a.abs() + T::one());
        let err = if happy { T::zero() } else { b * coeff[m - 1].norm() * nv };
        if err <= tol || happy {
            let mut out = vec![zero; dim];
            for (q, c) in basis.iter().zip(&coeff) {
                let c = *c * nv;
                out.iter_mut().zip(q).for_each(|(o, q)| *o += *q * c);
            }
            return Ok((out, m));
        }
        if m >= max_m {
            break err;
        }
        betas.push(b);
        basis.push(w.iter().map(|x| *x / b).collect());
    };
    Err(Error::NonConvergence {
        what: "Krylov exponential",
        iterations: max_m,
        residual: err.to_f64_lossy(),
    })
}
