#![allow(dead_code)]

use lrtfim::couplings::CouplingMatrix;
use lrtfim::hamiltonian::IsingSign;
use lrtfim::state::StateVector;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type C = Complex64;

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

pub fn pauli(axis: char) -> DMatrix<C> {
    let z = c(0.0, 0.0);
    match axis {
        'x' => DMatrix::from_row_slice(2, 2, &[z, c(1.0, 0.0), c(1.0, 0.0), z]),
        'y' => DMatrix::from_row_slice(2, 2, &[z, c(0.0, -1.0), c(0.0, 1.0), z]),
        'z' => DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), z, z, c(-1.0, 0.0)]),
        _ => DMatrix::identity(2, 2),
    }
}

/// Kronecker product of single-site operators; site 0 is the leftmost factor.
pub fn site_operator(n: usize, ops: &[(usize, char)]) -> DMatrix<C> {
    let mut m = DMatrix::<C>::identity(1, 1);
    for site in 0..n {
        let op = ops.iter().find(|(s, _)| *s == site).map(|(_, a)| pauli(*a)).unwrap_or_else(|| DMatrix::identity(2, 2));
        m = m.kronecker(&op);
    }
    m
}

/// Dense Hamiltonian from explicit Kronecker products of the textbook Pauli
/// matrices in index order (|0>, |1>).
pub fn dense_hamiltonian(j: &CouplingMatrix<f64>, field: f64, sign: IsingSign) -> DMatrix<C> {
    let n = j.n();
    let dim = 1 << n;
    let mut h = DMatrix::<C>::zeros(dim, dim);
    for i in 0..n {
        for k in (i + 1)..n {
            h += site_operator(n, &[(i, 'x'), (k, 'x')]) * c(j.get(i, k), 0.0);
        }
        h -= site_operator(n, &[(i, 'y')]) * c(field, 0.0);
    }
    match sign {
        IsingSign::Afm => h,
        IsingSign::Fm => -h,
    }
}

pub fn to_dvector(s: &StateVector<f64>) -> DVector<C> {
    DVector::from_column_slice(s.amplitudes())
}

pub fn random_state(n: usize, seed: u64) -> StateVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amps = (0..1usize << n).map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
    let mut s = StateVector::new(n, amps).unwrap();
    s.normalize();
    s
}

pub fn random_couplings(n: usize, seed: u64) -> CouplingMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        for k in (i + 1)..n {
            let x = 0.2 + rng.random::<f64>();
            v[i * n + k] = x;
            v[k * n + i] = x;
        }
    }
    CouplingMatrix::new(n, v).unwrap()
}

/// Ascending eigenvalues of a dense Hermitian matrix.
pub fn dense_eigenvalues(h: &DMatrix<C>) -> Vec<f64> {
    let mut v: Vec<f64> = h.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

const PENALTY: f64 = 1e3;

/// Dense gap oracle: penalize everything outside the joint eigenspace of the
/// global flip and (optionally) the chain reflection that holds `|+y...>`, then
/// pick the first energy cluster above the ground manifold reached by `sum sy`.
pub fn dense_gap(j: &CouplingMatrix<f64>, field: f64, reflect: bool) -> f64 {
    let n = j.n();
    let dim = 1usize << n;
    let h = dense_hamiltonian(j, field, IsingSign::Afm);
    let isy = DMatrix::from_row_slice(2, 2, &[C::new(0.0, 0.0), C::new(1.0, 0.0), C::new(-1.0, 0.0), C::new(0.0, 0.0)]);
    let mut u = DMatrix::<C>::identity(1, 1);
    for _ in 0..n {
        u = u.kronecker(&isy);
    }
    let plus = lrtfim::state::prepare_initial_state::<f64>(n, lrtfim::Direction::PlusY).unwrap();
    let py = DVector::from_column_slice(plus.amplitudes());
    let lambda = (py.adjoint() * &u * &py)[(0, 0)];
    let id = DMatrix::<C>::identity(dim, dim);
    let p_u = (&id + &u * lambda.conj()) * C::new(0.5, 0.0);
    let mut hp = &h + (&id - p_u) * C::new(PENALTY, 0.0);
    if reflect {
        let r = DMatrix::from_fn(dim, dim, |a, b| {
            let rev = (0..n).fold(0, |acc, q| acc | ((b >> q & 1) << (n - 1 - q)));
            if a == rev { C::new(1.0, 0.0) } else { C::new(0.0, 0.0) }
        });
        hp += (&id - (&id + r) * C::new(0.5, 0.0)) * C::new(PENALTY, 0.0);
    }
    let eig = hp.symmetric_eigen();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let e0 = eig.eigenvalues[order[0]];
    let g = eig.eigenvectors.column(order[0]).into_owned();
    let sy: DMatrix<C> = (0..n).map(|i| site_operator(n, &[(i, 'y')])).fold(DMatrix::zeros(dim, dim), |a, b| a + b);
    let fg = &sy * &g;
    let j0 = j.nearest_neighbor_mean();
    let mut k = 1;
    while k < dim {
        let e = eig.eigenvalues[order[k]];
        let mut cluster = vec![order[k]];
        while k + cluster.len() < dim && (eig.eigenvalues[order[k + cluster.len()]] - e).abs() < 1e-7 {
            cluster.push(order[k + cluster.len()]);
        }
        k += cluster.len();
        if e - e0 < 1e-9 * j0 {
            continue;
        }
        let weight: f64 = cluster.iter().map(|&c| eig.eigenvectors.column(c).dotc(&fg).norm_sqr()).sum();
        if weight.sqrt() > 1e-8 {
            return e - e0;
        }
    }
    panic!("no coupled excitation");
}

/// Dense `M[observed][true]` straight from the per-bit definition.
pub fn dense_confusion(n: usize, dark: f64, bright: f64) -> DMatrix<f64> {
    let dim = 1usize << n;
    DMatrix::from_fn(dim, dim, |o, t| {
        (0..n)
            .map(|q| {
                let (ob, tb) = (o >> q & 1, t >> q & 1);
                let eps = if tb == 0 { dark } else { bright };
                if ob == tb { eps } else { 1.0 - eps }
            })
            .product()
    })
}
