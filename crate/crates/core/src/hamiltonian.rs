//! Transverse-field Ising Hamiltonian
//! `H = s * ( sum_{j<i} J_ij sx_i sx_j - B sum_i sy_i )`, `s = +1` (AFM) or `-1` (FM),
//! applied matrix-free.
//!
//! Two representations are provided. [`IsingHamiltonian::apply`] acts on
//! z-basis [`StateVector`]s with paired bit flips for the Ising terms and
//! phased single flips for the field. The [`IsingFrame`] rotates every spin
//! by `W = diag(1, -i) Ry(pi/2)`, which maps `sx -> -sz` and `sy -> sx`: the
//! Ising part becomes the diagonal of classical energies and the field a sum of
//! real bit flips, so the whole operator is real symmetric. Frame index bits
//! are the x-basis readout (bit set = spin up along x).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::couplings::CouplingMatrix;
use crate::error::{Error, Result};
use crate::num::{Complex, Real};
use crate::state::{ion_mask, Gate, StateVector};

/// Largest spin count for [`classical_energies`].
pub const MAX_CLASSICAL_SPINS: usize = 24;
/// Largest spin count for which dense matrices are built.
pub const MAX_DENSE_SPINS: usize = 12;
/// Registers at least this large are processed with rayon.
pub(crate) const PARALLEL_DIM: usize = 1 << 13;

/// Overall sign of the Hamiltonian.
///
/// The ferromagnetic model is the global sign flip of the antiferromagnetic one:
/// its ground states are the highest states of the AFM Hamiltonian, which is how
/// a ferromagnet is reached from the `-y` product state with AFM couplings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IsingSign {
    #[default]
    Afm,
    Fm,
}

impl IsingSign {
    pub fn factor<T: Real>(self) -> T {
        match self {
            IsingSign::Afm => T::one(),
            IsingSign::Fm => -T::one(),
        }
    }
}

/// Classical (zero-field) energies `E(s) = sum_{j<i} J_ij x_i x_j` with `x = +-1`
/// read from the bits of `s` (set bit = +1).
pub fn classical_energies<T: Real>(couplings: &CouplingMatrix<T>) -> Result<Vec<T>> {
    let n = couplings.n();
    if n > MAX_CLASSICAL_SPINS {
        return Err(Error::InvalidParameter(format!(
            "classical energies limited to {MAX_CLASSICAL_SPINS} spins, got {n}"
        )));
    }
    let pairs: Vec<(usize, T)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .map(|(i, j)| (ion_mask(n, i) | ion_mask(n, j), couplings.get(i, j)))
        .collect();
    let energy = |s: usize| {
        let mut e = T::zero();
        for &(mask, j) in &pairs {
            // aligned pair iff both or neither bit set
            if (s & mask).count_ones() == 1 {
                e -= j;
            } else {
                e += j;
            }
        }
        e
    };
    let dim = 1usize << n;
    Ok(if dim >= PARALLEL_DIM {
        (0..dim).into_par_iter().map(energy).collect()
    } else {
        (0..dim).map(energy).collect()
    })
}

/// Ising model plus transverse field `B` (kHz).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsingHamiltonian<T> {
    pub couplings: CouplingMatrix<T>,
    pub field: T,
    pub sign: IsingSign,
}

impl<T: Real> IsingHamiltonian<T> {
    pub fn new(couplings: CouplingMatrix<T>, field: T, sign: IsingSign) -> Self {
        Self { couplings, field, sign }
    }

    pub fn n(&self) -> usize {
        self.couplings.n()
    }

    /// Upper bound on the spectral norm: `sum |J_ij| + N |B|`.
    pub fn norm_bound(&self) -> T {
        self.couplings.total_abs_coupling() + T::from_usize_exact(self.n()) * self.field.abs()
    }

    /// `H |psi>` in the z basis without forming a matrix.
    pub fn apply(&self, state: &StateVector<T>) -> Result<StateVector<T>> {
        let n = self.n();
        if state.n() != n {
            return Err(Error::DimensionMismatch {
                expected: 1 << n,
                found: state.dim(),
            });
        }
        let psi = state.amplitudes();
        let s = self.sign.factor::<T>();
        let pairs: Vec<(usize, T)> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| (ion_mask(n, i) | ion_mask(n, j), s * self.couplings.get(i, j)))
            .filter(|&(_, j)| j != T::zero())
            .collect();
        let masks: Vec<usize> = (0..n).map(|i| ion_mask(n, i)).collect();
        let field = s * self.field;
        let zero = Complex::new(T::zero(), T::zero());
        let row = |idx: usize| {
            let mut acc = zero;
            for &(mask, j) in &pairs {
                acc += psi[idx ^ mask] * j;
            }
            // -B sy: <1|sy|0> = i, <0|sy|1> = -i
            let mut flips = zero;
            for &m in &masks {
                let a = psi[idx ^ m];
                flips += if idx & m != 0 { Complex::new(-a.im, a.re) } else { Complex::new(a.im, -a.re) };
            }
            acc - flips * field
        };
        let out: Vec<Complex<T>> = if psi.len() >= PARALLEL_DIM {
            (0..psi.len()).into_par_iter().map(row).collect()
        } else {
            (0..psi.len()).map(row).collect()
        };
        StateVector::new(n, out)
    }

    /// `<psi|H|psi>`.
    pub fn expectation(&self, state: &StateVector<T>) -> Result<T> {
        let h = self.apply(state)?;
        Ok(state.inner(&h).re)
    }

    /// Dense z-basis matrix (row-major), built from the Pauli definitions.
    pub fn dense_matrix(&self) -> Result<Vec<Complex<T>>> {
        let n = self.n();
        if n > MAX_DENSE_SPINS {
            return Err(Error::InvalidParameter(format!(
                "dense Hamiltonian limited to {MAX_DENSE_SPINS} spins, got {n}"
            )));
        }
        let dim = 1usize << n;
        let mut h = vec![Complex::new(T::zero(), T::zero()); dim * dim];
        let s = self.sign.factor::<T>();
        for col in 0..dim {
            for i in 0..n {
                let mi = ion_mask(n, i);
                for j in (i + 1)..n {
                    let row = col ^ mi ^ ion_mask(n, j);
                    h[row * dim + col] += Complex::new(s * self.couplings.get(i, j), T::zero());
                }
                let row = col ^ mi;
                // sy|0> = i|1>, sy|1> = -i|0>
                let phase = if col & mi == 0 { T::one() } else { -T::one() };
                h[row * dim + col] += Complex::new(T::zero(), -s * self.field * phase);
            }
        }
        Ok(h)
    }

    /// Real symmetric operator in the rotated frame.
    pub fn frame(&self) -> Result<IsingFrame<T>> {
        IsingFrame::new(&self.couplings, self.field, self.sign)
    }
}

/// The Hamiltonian in the rotated frame: `s * (diag(E) - B sum_i X_i)`,
/// where `X_i` flips bit `i` of the frame index.
#[derive(Debug, Clone)]
pub struct IsingFrame<T> {
    n: usize,
    /// Signed classical energies.
    diagonal: Vec<T>,
    /// Coefficient of the bit-flip sum, `-s B`.
    flip_coeff: T,
    sign: T,
}

impl<T: Real> IsingFrame<T> {
    pub fn new(couplings: &CouplingMatrix<T>, field: T, sign: IsingSign) -> Result<Self> {
        let s = sign.factor::<T>();
        let mut diagonal = classical_energies(couplings)?;
        if s < T::zero() {
            diagonal.iter_mut().for_each(|e| *e = -*e);
        }
        Ok(Self {
            n: couplings.n(),
            diagonal,
            flip_coeff: -s * field,
            sign: s,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    pub fn diagonal(&self) -> &[T] {
        &self.diagonal
    }

    /// Replaces the transverse field (kHz), keeping couplings and sign.
    pub fn set_field(&mut self, field: T) {
        self.flip_coeff = -self.sign * field;
    }

    pub fn field(&self) -> T {
        -self.flip_coeff * self.sign
    }

    /// Bound on the spectral norm: `max |E| + N |B|`.
    pub fn norm_bound(&self) -> T {
        let emax = self.diagonal.iter().fold(T::zero(), |m, e| m.max(e.abs()));
        emax + T::from_usize_exact(self.n) * self.flip_coeff.abs()
    }

    /// `out = H x` for real or complex amplitudes.
    pub fn apply<A>(&self, x: &[A], out: &mut [A])
    where
        A: Copy + Send + Sync + std::ops::Add<Output = A> + std::ops::Mul<T, Output = A>,
    {
        debug_assert_eq!(x.len(), self.dim());
        let n = self.n;
        let (diag, coeff) = (&self.diagonal, self.flip_coeff);
        let row = |(s, o): (usize, &mut A)| {
            let mut flips = x[s ^ 1];
            for q in 1..n {
                flips = flips + x[s ^ (1 << q)];
            }
            *o = x[s] * diag[s] + flips * coeff;
        };
        if x.len() >= PARALLEL_DIM {
            out.par_iter_mut().enumerate().for_each(row);
        } else {
            out.iter_mut().enumerate().for_each(row);
        }
    }

    /// `out = (sum_i X_i) x`, the frame image of `sum_i sy_i`.
    pub fn apply_field_operator<A>(&self, x: &[A], out: &mut [A])
    where
        A: Copy + Send + Sync + std::ops::Add<Output = A>,
    {
        let n = self.n;
        let row = |(s, o): (usize, &mut A)| {
            let mut flips = x[s ^ 1];
            for q in 1..n {
                flips = flips + x[s ^ (1 << q)];
            }
            *o = flips;
        };
        if x.len() >= PARALLEL_DIM {
            out.par_iter_mut().enumerate().for_each(row);
        } else {
            out.iter_mut().enumerate().for_each(row);
        }
    }
}

/// Single-spin frame rotation `W = diag(1, -i) Ry(pi/2)`.
pub fn frame_gate<T: Real>() -> Gate<T> {
    let h = T::lit(std::f64::consts::FRAC_1_SQRT_2);
    let z = T::zero();
    [
        [Complex::new(h, z), Complex::new(-h, z)],
        [Complex::new(z, -h), Complex::new(z, -h)],
    ]
}

/// z-basis amplitudes -> frame amplitudes.
pub fn to_frame<T: Real>(state: &StateVector<T>) -> Vec<Complex<T>> {
    let mut amps = state.amplitudes().to_vec();
    crate::state::apply_gate_all(&mut amps, state.n(), &frame_gate());
    amps
}

/// Frame amplitudes -> z-basis state.
pub fn from_frame<T: Real>(n: usize, mut amps: Vec<Complex<T>>) -> Result<StateVector<T>> {
    crate::state::apply_gate_all(&mut amps, n, &crate::state::dagger(&frame_gate()));
    StateVector::new(n, amps)
}

/// Global flip `U = prod_i (i sy_i)` applied in the z basis.
pub fn apply_global_flip<T: Real>(state: &StateVector<T>) -> StateVector<T> {
    let n = state.n();
    let z = T::zero();
    // i sy = [[0, 1], [-1, 0]]
    let g: Gate<T> = [
        [Complex::new(z, z), Complex::new(T::one(), z)],
        [Complex::new(-T::one(), z), Complex::new(z, z)],
    ];
    let mut out = state.clone();
    for ion in 0..n {
        out.apply_single(ion, &g);
    }
    out
}
