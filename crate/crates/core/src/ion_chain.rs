//! Equilibrium positions and transverse normal modes of a linear ion crystal.
//!
//! Lengths are dimensionless, in units of the axial characteristic length
//! `(e^2 / 4 pi eps0 M w_ax^2)^(1/3)`, so the axial potential energy of the
//! chain reads `V(u) = sum_i u_i^2 / 2 + sum_{i<j} 1 / |u_i - u_j|`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{jacobi_eigen, solve_spd};
use crate::num::Real;

/// Gradient-norm tolerance for the equilibrium solver.
pub const EQUILIBRIUM_TOL: f64 = 1e-10;
/// Maximum number of damped Newton iterations.
pub const EQUILIBRIUM_MAX_ITER: usize = 500;

/// Harmonic trap holding a linear chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapParameters<T> {
    pub n_ions: usize,
    /// Axial center-of-mass frequency (MHz).
    pub axial_freq: T,
    /// Transverse center-of-mass frequency, the highest transverse mode (MHz).
    pub transverse_com_freq: T,
    /// Recoil frequency of the optical dipole force (kHz).
    pub recoil_freq: T,
}

impl<T: Real> TrapParameters<T> {
    pub fn new(n_ions: usize, axial_freq: T, transverse_com_freq: T, recoil_freq: T) -> Result<Self> {
        let trap = Self {
            n_ions,
            axial_freq,
            transverse_com_freq,
            recoil_freq,
        };
        trap.validate()?;
        Ok(trap)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_ions < 2 {
            return Err(Error::InvalidParameter(format!(
                "a chain needs at least 2 ions, got {}",
                self.n_ions
            )));
        }
        for (name, f) in [
            ("axial_freq", self.axial_freq),
            ("transverse_com_freq", self.transverse_com_freq),
            ("recoil_freq", self.recoil_freq),
        ] {
            if !(f > T::zero()) || !f.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {f}")));
            }
        }
        if self.axial_freq >= self.transverse_com_freq {
            return Err(Error::InvalidParameter(format!(
                "axial frequency {} MHz must lie below the transverse frequency {} MHz",
                self.axial_freq, self.transverse_com_freq
            )));
        }
        Ok(())
    }

    /// Single-ion Lamb-Dicke parameter `sqrt(nu_R / nu_1)`.
    pub fn lamb_dicke(&self) -> T {
        (self.recoil_freq / (self.transverse_com_freq * T::lit(1000.0))).sqrt()
    }
}

/// Equilibrium configuration plus transverse normal modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainGeometry<T> {
    /// Dimensionless equilibrium coordinates, strictly increasing.
    pub positions: Vec<T>,
    /// Transverse mode frequencies (MHz), descending; index 0 is the COM mode.
    pub mode_freqs: Vec<T>,
    /// Row-major `N x N`; column `m` is the orthonormal mode vector `b_{., m}`.
    pub mode_vectors: Vec<T>,
}

impl<T: Real> ChainGeometry<T> {
    pub fn n(&self) -> usize {
        self.positions.len()
    }

    /// Mode participation `b_{i,m}` of ion `i` in mode `m` (both zero-based).
    #[inline]
    pub fn component(&self, ion: usize, mode: usize) -> T {
        self.mode_vectors[ion * self.n() + mode]
    }

    pub fn mode_vector(&self, mode: usize) -> Vec<T> {
        (0..self.n()).map(|i| self.component(i, mode)).collect()
    }
}

/// Gradient of the dimensionless axial potential.
pub fn potential_gradient<T: Real>(u: &[T]) -> Vec<T> {
    let n = u.len();
    let mut g = u.to_vec();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let d = u[i] - u[j];
            g[i] -= d.signum() / (d * d);
        }
    }
    g
}

/// Dimensionless axial potential energy.
pub fn potential_energy<T: Real>(u: &[T]) -> T {
    let half = T::lit(0.5);
    let mut v = T::zero();
    for (i, &ui) in u.iter().enumerate() {
        v += half * ui * ui;
        for &uj in &u[i + 1..] {
            v += T::one() / (ui - uj).abs();
        }
    }
    v
}

fn potential_hessian<T: Real>(u: &[T]) -> Vec<T> {
    let n = u.len();
    let two = T::lit(2.0);
    let mut h = vec![T::zero(); n * n];
    for i in 0..n {
        let mut diag = T::one();
        for j in 0..n {
            if i == j {
                continue;
            }
            let c = two / (u[i] - u[j]).abs().powi(3);
            h[i * n + j] = -c;
            diag += c;
        }
        h[i * n + i] = diag;
    }
    h
}

/// [`EQUILIBRIUM_TOL`], loosened to what the scalar type can resolve.
fn gradient_tolerance<T: Real>() -> T {
    T::lit(EQUILIBRIUM_TOL).max(T::epsilon() * T::lit(1e3))
}

fn norm<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt()
}

fn strictly_increasing<T: Real>(u: &[T]) -> bool {
    u.windows(2).all(|w| w[1] > w[0])
}

/// Equilibrium positions of the chain by damped Newton iteration.
pub fn equilibrium_positions<T: Real>(trap: &TrapParameters<T>) -> Result<Vec<T>> {
    trap.validate()?;
    let n = trap.n_ions;
    let half_span = T::lit(0.8 * (n as f64).powf(0.56));
    let mut u: Vec<T> = (0..n)
        .map(|i| {
            let frac = T::from_usize_exact(2 * i) / T::from_usize_exact(n - 1) - T::one();
            frac * half_span
        })
        .collect();
    let tol = gradient_tolerance::<T>();
    let mut energy = potential_energy(&u);
    let mut grad = potential_gradient(&u);
    for _ in 0..EQUILIBRIUM_MAX_ITER {
        if norm(&grad) < tol {
            return Ok(u);
        }
        let hess = potential_hessian(&u);
        let rhs: Vec<T> = grad.iter().map(|&g| -g).collect();
        let step = solve_spd(&hess, &rhs).unwrap_or(rhs);
        let mut damping = T::one();
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<T> = u.iter().zip(&step).map(|(&x, &s)| x + damping * s).collect();
            if strictly_increasing(&trial) {
                let e = potential_energy(&trial);
                let g = potential_gradient(&trial);
                if e <= energy || norm(&g) < norm(&grad) {
                    u = trial;
                    energy = e;
                    grad = g;
                    accepted = true;
                    break;
                }
            }
            damping *= T::lit(0.5);
        }
        if !accepted {
            break;
        }
    }
    let residual = norm(&grad);
    if residual < tol {
        return Ok(u);
    }
    Err(Error::NonConvergence {
        what: "equilibrium positions",
        iterations: EQUILIBRIUM_MAX_ITER,
        residual: residual.to_f64_lossy(),
    })
}

/// Transverse normal modes about the equilibrium `positions`.
pub fn transverse_modes<T: Real>(trap: &TrapParameters<T>, positions: &[T]) -> Result<ChainGeometry<T>> {
    trap.validate()?;
    let n = trap.n_ions;
    if positions.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: positions.len(),
        });
    }
    let residual = norm(&potential_gradient(positions));
    if !(residual < T::lit(1e-8).max(T::epsilon() * T::lit(1e4))) {
        return Err(Error::InvalidParameter(format!(
            "positions are not an equilibrium (gradient norm {})", residual
        )));
    }

    // Transverse curvature in units of the axial frequency squared.
    let beta2 = (trap.transverse_com_freq / trap.axial_freq).powi(2);
    let mut k = vec![T::zero(); n * n];
    for i in 0..n {
        let mut diag = beta2;
        for j in 0..n {
            if i == j {
                continue;
            }
            let c = T::one() / (positions[i] - positions[j]).abs().powi(3);
            k[i * n + j] = c;
            diag -= c;
        }
        k[i * n + i] = diag;
    }
    let eig = jacobi_eigen(&k, n)?;

    // Ascending eigenvalues -> descending frequencies.
    let mut mode_freqs = Vec::with_capacity(n);
    let mut mode_vectors = vec![T::zero(); n * n];
    for (m, col) in (0..n).rev().enumerate() {
        let lambda = eig.values[col];
        if lambda <= T::zero() {
            return Err(Error::ZigzagInstability {
                mode: m,
                ratio: (trap.axial_freq / trap.transverse_com_freq).to_f64_lossy(),
            });
        }
        mode_freqs.push(trap.axial_freq * lambda.sqrt());
        let v = eig.vector(col);
        let nv = norm(&v);
        // Mirror-symmetric modes have entries of equal magnitude; take the first within 1e-9.
        let tie = T::lit(1e-9).max(T::epsilon() * T::lit(100.0));
        let pivot = v
            .iter()
            .copied()
            .fold(T::zero(), |best, x| if x.abs() > best.abs() + tie { x } else { best });
        let sign = if pivot < T::zero() { -T::one() } else { T::one() };
        for i in 0..n {
            mode_vectors[i * n + m] = sign * v[i] / nv;
        }
    }
    Ok(ChainGeometry {
        positions: positions.to_vec(),
        mode_freqs,
        mode_vectors,
    })
}

/// Equilibrium plus transverse modes in one call.
pub fn chain_geometry<T: Real>(trap: &TrapParameters<T>) -> Result<ChainGeometry<T>> {
    let positions = equilibrium_positions(trap)?;
    transverse_modes(trap, &positions)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trap(n: usize, axial: f64) -> TrapParameters<f64> {
        TrapParameters::new(n, axial, 4.1, 18.5).unwrap()
    }

    #[test]
    fn two_ion_equilibrium_is_analytic() {
        let u = equilibrium_positions(&trap(2, 0.62)).unwrap();
        let expected = 4f64.powf(-1.0 / 3.0);
        assert!((u[0] + expected).abs() < 1e-12);
        assert!((u[1] - expected).abs() < 1e-12);
    }

    #[test]
    fn three_ion_middle_sits_at_origin() {
        let u = equilibrium_positions(&trap(3, 0.8)).unwrap();
        assert!(u[1].abs() < 1e-12);
    }

    #[test]
    fn two_ion_rocking_mode() {
        let t = trap(2, 0.62);
        let g = chain_geometry(&t).unwrap();
        assert!((g.mode_freqs[0] - 4.1).abs() < 1e-12);
        assert!((g.mode_freqs[1] - (4.1f64.powi(2) - 0.62f64.powi(2)).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn com_mode_is_uniform() {
        for n in [2, 5, 10, 16] {
            let g = chain_geometry(&trap(n, 0.55)).unwrap();
            assert!((g.mode_freqs[0] - 4.1).abs() < 1e-9);
            let c = 1.0 / (n as f64).sqrt();
            for i in 0..n {
                assert!((g.component(i, 0) - c).abs() < 1e-9, "n={n} i={i}");
            }
        }
    }

    #[test]
    fn sign_convention_makes_largest_entry_positive() {
        let g = chain_geometry(&trap(7, 0.7)).unwrap();
        for m in 0..7 {
            let v = g.mode_vector(m);
            let big = v.iter().copied().fold(0.0f64, |b, x| if x.abs() > b.abs() + 1e-9 { x } else { b });
            assert!(big > 0.0);
        }
    }

    #[test]
    fn zigzag_detected_for_weak_transverse_confinement() {
        let t = TrapParameters::new(20, 1.0, 1.5, 18.5).unwrap();
        match chain_geometry(&t) {
            Err(Error::ZigzagInstability { ratio, .. }) => assert!((ratio - 1.0 / 1.5).abs() < 1e-12),
            other => panic!("expected zigzag, got {other:?}"),
        }
    }

    #[test]
    fn rejects_invalid_trap() {
        assert!(TrapParameters::new(1, 0.6, 4.1, 18.5).is_err());
        assert!(TrapParameters::new(4, 5.0, 4.1, 18.5).is_err());
        assert!(TrapParameters::new(4, 0.6, 4.1, -1.0).is_err());
    }

    #[test]
    fn modes_reject_non_equilibrium() {
        let t = trap(3, 0.8);
        assert!(transverse_modes(&t, &[-1.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn single_precision_chain() {
        let t = TrapParameters::<f32>::new(4, 0.8, 4.1, 18.5).unwrap();
        let g = chain_geometry(&t).unwrap();
        assert!((g.mode_freqs[0] - 4.1).abs() < 1e-4);
        assert!((g.positions[0] + g.positions[3]).abs() < 1e-5);
    }
}
