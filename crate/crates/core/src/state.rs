//! State vectors over `N` spins in the z-product basis.
//!
//! Index convention: ion 1 is the most significant bit, `|down> = 0`, `|up> = 1`,
//! so the staggered states of ten spins sit at indices 341 and 682.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{Complex, Real};

/// Largest register the dense state-vector routines accept.
pub const MAX_SPINS: usize = 26;

/// Bloch-sphere axis used for initialization and measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn label(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        match label.trim().to_ascii_lowercase().as_str() {
            "x" => Some(Axis::X),
            "y" => Some(Axis::Y),
            "z" => Some(Axis::Z),
            _ => None,
        }
    }
}

/// Initial polarization along the transverse field axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    PlusY,
    MinusY,
}

/// 2x2 single-spin unitary, row-major.
pub type Gate<T> = [[Complex<T>; 2]; 2];

/// Bit mask of ion `ion` (zero-based) in an `n`-spin index.
#[inline]
pub fn ion_mask(n: usize, ion: usize) -> usize {
    1usize << (n - 1 - ion)
}

/// `+1` for a set bit (up), `-1` otherwise.
#[inline]
pub fn spin_sign(index: usize, n: usize, ion: usize) -> i32 {
    if index & ion_mask(n, ion) != 0 {
        1
    } else {
        -1
    }
}

/// Dense amplitudes of an `n`-spin register.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector<T> {
    n: usize,
    amplitudes: Vec<Complex<T>>,
}

impl<T: Real> StateVector<T> {
    pub fn new(n: usize, amplitudes: Vec<Complex<T>>) -> Result<Self> {
        check_spins(n)?;
        if amplitudes.len() != 1usize << n {
            return Err(Error::DimensionMismatch {
                expected: 1 << n,
                found: amplitudes.len(),
            });
        }
        Ok(Self { n, amplitudes })
    }

    pub fn basis_state(n: usize, index: usize) -> Result<Self> {
        check_spins(n)?;
        if index >= 1 << n {
            return Err(Error::InvalidParameter(format!("basis index {index} out of range for {n} spins")));
        }
        let mut amplitudes = vec![Complex::new(T::zero(), T::zero()); 1 << n];
        amplitudes[index] = Complex::new(T::one(), T::zero());
        Ok(Self { n, amplitudes })
    }

    /// Product of identical single-spin states `a|0> + b|1>`.
    pub fn product(n: usize, single: [Complex<T>; 2]) -> Result<Self> {
        check_spins(n)?;
        let dim = 1usize << n;
        let amplitudes = (0..dim)
            .map(|s| {
                let ones = s.count_ones() as usize;
                let mut a = Complex::new(T::one(), T::zero());
                for _ in 0..ones {
                    a *= single[1];
                }
                for _ in ones..n {
                    a *= single[0];
                }
                a
            })
            .collect();
        Ok(Self { n, amplitudes })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex<T>> {
        self.amplitudes
    }

    pub fn norm(&self) -> T {
        norm(&self.amplitudes)
    }

    pub fn normalize(&mut self) {
        let nrm = self.norm();
        if nrm > T::zero() {
            for a in &mut self.amplitudes {
                *a /= nrm;
            }
        }
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> Complex<T> {
        inner(&self.amplitudes, &other.amplitudes)
    }

    /// `|<self|other>|^2`.
    pub fn fidelity(&self, other: &Self) -> T {
        self.inner(other).norm_sqr()
    }

    /// Born-rule probabilities in the current basis.
    pub fn probabilities(&self) -> Vec<T> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Applies the same single-spin unitary to every ion.
    pub fn apply_global(&mut self, gate: &Gate<T>) {
        apply_gate_all(&mut self.amplitudes, self.n, gate);
    }

    pub fn apply_single(&mut self, ion: usize, gate: &Gate<T>) {
        apply_gate(&mut self.amplitudes, ion_mask(self.n, ion), gate);
    }

    /// Expectation of `sigma_axis` on `ion`.
    pub fn expectation_pauli(&self, ion: usize, axis: Axis) -> T {
        let mask = ion_mask(self.n, ion);
        let mut acc = T::zero();
        for (s, a) in self.amplitudes.iter().enumerate() {
            match axis {
                Axis::Z => {
                    let sign = if s & mask != 0 { T::one() } else { -T::one() };
                    acc += sign * a.norm_sqr();
                }
                Axis::X | Axis::Y => {
                    if s & mask == 0 {
                        // <s|P|s^m> terms, counted from the lower index of each pair
                        let b = self.amplitudes[s | mask];
                        let c = a.conj() * b;
                        acc += match axis {
                            Axis::X => c.re + c.re,
                            // sigma_y: <0|Y|1> = -i
                            _ => c.im + c.im,
                        };
                    }
                }
            }
        }
        acc
    }
}

fn check_spins(n: usize) -> Result<()> {
    if n == 0 || n > MAX_SPINS {
        return Err(Error::InvalidParameter(format!(
            "spin count must lie in 1..={MAX_SPINS}, got {n}"
        )));
    }
    Ok(())
}

pub(crate) fn norm<T: Real>(v: &[Complex<T>]) -> T {
    v.iter().fold(T::zero(), |acc, a| acc + a.norm_sqr()).sqrt()
}

pub(crate) fn inner<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    a.iter()
        .zip(b)
        .fold(Complex::new(T::zero(), T::zero()), |acc, (x, y)| acc + x.conj() * y)
}

pub(crate) fn apply_gate<T: Real>(amps: &mut [Complex<T>], mask: usize, g: &Gate<T>) {
    for s in 0..amps.len() {
        if s & mask == 0 {
            let (a0, a1) = (amps[s], amps[s | mask]);
            amps[s] = g[0][0] * a0 + g[0][1] * a1;
            amps[s | mask] = g[1][0] * a0 + g[1][1] * a1;
        }
    }
}

pub(crate) fn apply_gate_all<T: Real>(amps: &mut [Complex<T>], n: usize, g: &Gate<T>) {
    for ion in 0..n {
        apply_gate(amps, ion_mask(n, ion), g);
    }
}

fn c<T: Real>(re: f64, im: f64) -> Complex<T> {
    Complex::new(T::lit(re), T::lit(im))
}

/// Rotation `exp(-i theta sigma_x / 2)`.
pub fn rx<T: Real>(theta: f64) -> Gate<T> {
    let (s, co) = (0.5 * theta).sin_cos();
    [[c(co, 0.0), c(0.0, -s)], [c(0.0, -s), c(co, 0.0)]]
}

/// Rotation `exp(-i theta sigma_y / 2)`.
pub fn ry<T: Real>(theta: f64) -> Gate<T> {
    let (s, co) = (0.5 * theta).sin_cos();
    [[c(co, 0.0), c(-s, 0.0)], [c(s, 0.0), c(co, 0.0)]]
}

pub fn dagger<T: Real>(g: &Gate<T>) -> Gate<T> {
    [[g[0][0].conj(), g[1][0].conj()], [g[0][1].conj(), g[1][1].conj()]]
}

/// Global pi/2 pulse mapping `axis` onto z, with `+1` eigenstates landing on `|1>`.
pub fn measurement_rotation<T: Real>(axis: Axis) -> Option<Gate<T>> {
    let half_pi = std::f64::consts::FRAC_PI_2;
    match axis {
        Axis::X => Some(ry(half_pi)),
        Axis::Y => Some(rx(-half_pi)),
        Axis::Z => None,
    }
}

/// Product state with every spin along `+y` or `-y`, obtained from `|down...>`
/// by a global pi/2 rotation about x.
pub fn prepare_initial_state<T: Real>(n: usize, direction: Direction) -> Result<StateVector<T>> {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let theta = match direction {
        Direction::PlusY => -half_pi,
        Direction::MinusY => half_pi,
    };
    let g = rx::<T>(theta);
    // Rx(theta)|0> is the first column of the gate.
    StateVector::product(n, [g[0][0], g[1][0]])
}

/// Rotates the register so that a z-basis readout samples the `axis` component.
pub fn rotate_measurement_basis<T: Real>(state: &StateVector<T>, axis: Axis) -> StateVector<T> {
    let mut out = state.clone();
    if let Some(g) = measurement_rotation::<T>(axis) {
        out.apply_global(&g);
    }
    out
}

/// Inverse of [`rotate_measurement_basis`].
pub fn unrotate_measurement_basis<T: Real>(state: &StateVector<T>, axis: Axis) -> StateVector<T> {
    let mut out = state.clone();
    if let Some(g) = measurement_rotation::<T>(axis) {
        out.apply_global(&dagger(&g));
    }
    out
}
