//! Low-lying spectra, classical energies and critical-gap scans.

use serde::{Deserialize, Serialize};

use crate::couplings::CouplingMatrix;
use crate::error::{Error, Result};
use crate::hamiltonian::{classical_energies, from_frame, IsingHamiltonian};
use crate::krylov::{lowest_eigenpairs_op, LanczosOptions};
use crate::linalg::tridiagonal_eigen;
use crate::num::{Complex, Real};
use crate::state::StateVector;

/// Relative threshold on `|<e| sum sy |g>|` for an excited state to count as coupled.
pub const COUPLING_THRESHOLD: f64 = 1e-8;
/// Energies within this many `J0` of the ground state belong to its manifold.
pub const MANIFOLD_TOLERANCE: f64 = 1e-9;

/// An eigenvalue (kHz) with its z-basis eigenvector.
#[derive(Debug, Clone)]
pub struct EigenPair<T> {
    pub energy: T,
    pub state: StateVector<T>,
    pub residual: T,
}

/// Lowest `k` eigenpairs of `h`, ascending, with orthonormal vectors inside
/// degenerate manifolds.
pub fn lowest_eigenpairs<T: Real>(h: &IsingHamiltonian<T>, k: usize) -> Result<Vec<EigenPair<T>>> {
    let frame = h.frame()?;
    let dim = frame.dim();
    if k > dim {
        return Err(Error::InvalidParameter(format!("k = {k} exceeds Hilbert dimension {dim}")));
    }
    let bound = frame.norm_bound();
    let opts = LanczosOptions::default();
    let pairs = lowest_eigenpairs_op(dim, k, |x: &[T], y: &mut [T]| frame.apply(x, y), bound, None, &opts)?;
    pairs
        .into_iter()
        .map(|p| {
            let amps = p.vector.iter().map(|&x| Complex::new(x, T::zero())).collect();
            Ok(EigenPair {
                energy: p.value,
                state: from_frame(h.n(), amps)?,
                residual: p.residual,
            })
        })
        .collect()
}

/// The symmetry sector of the rotated frame that contains the `+y` product state:
/// even under the global flip and, when the couplings allow it, under reflection
/// of the chain. Basis vectors are normalized orbit sums.
#[derive(Debug, Clone)]
pub struct SymmetricSector<T> {
    n: usize,
    reps: Vec<usize>,
    orbit_size: Vec<u8>,
    /// Sector index of every frame basis state.
    index: Vec<u32>,
    /// Per representative, the `n` flip targets with their orbit weights.
    neighbors: Vec<(u32, T)>,
    energies: Vec<T>,
    reflection: bool,
}

fn reverse_bits(s: usize, n: usize) -> usize {
    s.reverse_bits() >> (usize::BITS as usize - n)
}

impl<T: Real> SymmetricSector<T> {
    /// Builds the sector; reflection is used when `J` is mirror symmetric to
    /// a relative tolerance of `1e-9`.
    pub fn new(couplings: &CouplingMatrix<T>) -> Result<Self> {
        let n = couplings.n();
        let scale = couplings.values().iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let tol = T::lit(1e-9) * scale;
        let reflection = (0..n).all(|i| (0..n).all(|j| (couplings.get(i, j) - couplings.get(n - 1 - i, n - 1 - j)).abs() <= tol));
        let all = (1usize << n) - 1;
        let full = classical_energies(couplings)?;
        let mut index = vec![u32::MAX; 1 << n];
        let (mut reps, mut orbit_size, mut energies) = (Vec::new(), Vec::new(), Vec::new());
        for s in 0..=all {
            if index[s] != u32::MAX {
                continue;
            }
            let mut orbit = vec![s, s ^ all];
            if reflection {
                let r = reverse_bits(s, n);
                orbit.extend([r, r ^ all]);
            }
            orbit.sort_unstable();
            orbit.dedup();
            let id = reps.len() as u32;
            for &t in &orbit {
                index[t] = id;
            }
            reps.push(s);
            orbit_size.push(orbit.len() as u8);
            energies.push(full[s]);
        }
        let neighbors = reps
            .iter()
            .enumerate()
            .flat_map(|(a, &r)| {
                let oa = T::from_usize_exact(orbit_size[a] as usize);
                let (index, orbit_size) = (&index, &orbit_size);
                (0..n).map(move |q| {
                    let b = index[r ^ (1 << q)];
                    (b, (oa / T::from_usize_exact(orbit_size[b as usize] as usize)).sqrt())
                })
            })
            .collect();
        Ok(Self {
            n,
            reps,
            orbit_size,
            index,
            neighbors,
            energies,
            reflection,
        })
    }

    pub fn dim(&self) -> usize {
        self.reps.len()
    }

    pub fn uses_reflection(&self) -> bool {
        self.reflection
    }

    /// `y = (diag(E) - B sum X) x` restricted to the sector.
    pub fn apply(&self, field: T, x: &[T], y: &mut [T]) {
        self.apply_flips(x, y);
        for ((y, x), e) in y.iter_mut().zip(x).zip(&self.energies) {
            *y = *e * *x - field * *y;
        }
    }

    /// `y = (sum X) x` restricted to the sector.
    pub fn apply_flips(&self, x: &[T], y: &mut [T]) {
        for (y, row) in y.iter_mut().zip(self.neighbors.chunks_exact(self.n)) {
            *y = row.iter().fold(T::zero(), |acc, &(b, w)| acc + x[b as usize] * w);
        }
    }

    /// Expands a sector vector into frame amplitudes over all `2^n` states.
    pub fn embed(&self, x: &[T]) -> Vec<T> {
        self.index
            .iter()
            .map(|&a| x[a as usize] / T::from_usize_exact(self.orbit_size[a as usize] as usize).sqrt())
            .collect()
    }

    /// Sector image of the `+y` product state.
    pub fn plus_y(&self) -> Vec<T> {
        let total = T::from_usize_exact(1usize << self.n);
        self.orbit_size
            .iter()
            .map(|&o| (T::from_usize_exact(o as usize) / total).sqrt())
            .collect()
    }

    fn norm_bound(&self, field: T) -> T {
        let emax = self.energies.iter().fold(T::zero(), |m, e| m.max(e.abs()));
        emax + T::from_usize_exact(self.n) * field.abs()
    }
}

/// Ground state and first coupled excitation at one field value (kHz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapPoint<T> {
    pub field: T,
    pub ground_energy: T,
    pub excited_energy: T,
    pub gap: T,
    /// `|<e| sum sy |g>|` of the selected excitation.
    pub matrix_element: T,
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + *x * *y)
}

/// Lanczos from the `+y` image with full reorthogonalization, grown until the
/// ground pair and the selected excitation are converged.
fn sector_gap<T: Real>(sector: &SymmetricSector<T>, field: T, j0: T) -> Result<GapPoint<T>> {
    let dim = sector.dim();
    let bound = sector.norm_bound(field).max(T::min_positive_value());
    let tol = T::lit(1e-10).max(T::epsilon() * T::lit(1e3)) * bound;
    let manifold = T::lit(MANIFOLD_TOLERANCE) * j0;
    let threshold = T::lit(COUPLING_THRESHOLD);
    let mut m = dim.min(60);
    loop {
        let (values, vectors, resid) = krylov_ritz(sector, field, m)?;
        let converged = |i: usize| resid[i] < tol;
        if converged(0) {
            let g = &vectors[0];
            let mut fg = vec![T::zero(); dim];
            sector.apply_flips(g, &mut fg);
            let mut candidates = Vec::new();
            let mut pending = false;
            for i in 1..values.len() {
                if values[i] - values[0] < manifold {
                    continue;
                }
                if !converged(i) {
                    pending = true;
                    break;
                }
                let me = dot(&vectors[i], &fg).abs();
                candidates.push((values[i] - values[0], me));
                if me > threshold {
                    return Ok(GapPoint {
                        field,
                        ground_energy: values[0],
                        excited_energy: values[i],
                        gap: values[i] - values[0],
                        matrix_element: me,
                    });
                }
            }
            if !pending && (m >= dim || values.len() < m) {
                return Err(Error::AmbiguousCoupling {
                    field: field.to_f64_lossy(),
                    candidates: candidates.iter().map(|&(g, me)| (g.to_f64_lossy(), me.to_f64_lossy())).collect(),
                });
            }
        }
        if m >= dim {
            return Err(Error::NonConvergence {
                what: "sector Lanczos",
                iterations: m,
                residual: resid[0].to_f64_lossy(),
            });
        }
        m = (2 * m).min(dim);
    }
}

/// Ritz values, vectors and residual estimates of an `m`-step run.
#[allow(clippy::type_complexity)]
fn krylov_ritz<T: Real>(sector: &SymmetricSector<T>, field: T, m: usize) -> Result<(Vec<T>, Vec<Vec<T>>, Vec<T>)> {
    let dim = sector.dim();
    let mut basis = vec![sector.plus_y()];
    let (mut alphas, mut betas): (Vec<T>, Vec<T>) = (Vec::new(), Vec::new());
    let mut w = vec![T::zero(); dim];
    let scale = sector.norm_bound(field).max(T::one());
    let last = loop {
        let j = basis.len() - 1;
        sector.apply(field, &basis[j], &mut w);
        let a = dot(&basis[j], &w);
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                w.iter_mut().zip(q).for_each(|(w, q)| *w -= c * *q);
            }
        }
        alphas.push(a);
        let b = dot(&w, &w).sqrt();
        if b <= T::epsilon() * T::lit(10.0) * scale || basis.len() >= m {
            break if b <= T::epsilon() * T::lit(10.0) * scale { T::zero() } else { b };
        }
        betas.push(b);
        basis.push(w.iter().map(|x| *x / b).collect());
    };
    let k = alphas.len();
    let tri = tridiagonal_eigen(&alphas, &betas)?;
    // only the low end of the Ritz spectrum is ever inspected
    let keep = k.min(12);
    let mut vectors = Vec::with_capacity(keep);
    let mut resid = Vec::with_capacity(keep);
    for i in 0..keep {
        let s = tri.vector(i);
        let mut y = vec![T::zero(); dim];
        for (q, c) in basis.iter().zip(&s) {
            y.iter_mut().zip(q).for_each(|(y, q)| *y += *c * *q);
        }
        resid.push(last * s[k - 1].abs());
        vectors.push(y);
    }
    Ok((tri.values[..keep].to_vec(), vectors, resid))
}

/// Gap between the adiabatic ground branch and the first excitation coupled to
/// it by `dH/dB = -sum sy`, at transverse field `field` (kHz). Energies in kHz.
pub fn gap_at_field<T: Real>(couplings: &CouplingMatrix<T>, field: T) -> Result<GapPoint<T>> {
    let sector = SymmetricSector::new(couplings)?;
    sector_gap(&sector, field, couplings.nearest_neighbor_mean())
}

/// Logarithmic grid of `points` values of `B/J0` over `[lo, hi]`.
pub fn log_grid<T: Real>(lo: T, hi: T, points: usize) -> Vec<T> {
    if points < 2 {
        return vec![lo; points];
    }
    let (a, b) = (lo.ln(), hi.ln());
    let last = T::from_usize_exact(points - 1);
    (0..points)
        .map(|i| {
            if i == points - 1 {
                hi
            } else {
                (a + (b - a) * T::from_usize_exact(i) / last).exp()
            }
        })
        .collect()
}

/// Default scan grid: 200 logarithmic points of `B/J0` over `[0.01, 5]`.
pub fn default_b_grid<T: Real>() -> Vec<T> {
    log_grid(T::lit(0.01), T::lit(5.0), 200)
}

/// Gap scan over a `B/J0` grid with the critical point located on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumScan<T> {
    pub n: usize,
    /// Nearest-neighbor mean coupling `J0` (kHz) used as the energy unit.
    pub j0: T,
    pub alpha: Option<T>,
    pub b_grid: Vec<T>,
    /// Gaps in units of `J0`.
    pub gaps: Vec<T>,
    pub critical_field: T,
    pub critical_gap: T,
}

/// JSON-friendly summary of a scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanSummary<T> {
    #[serde(rename = "B_c")]
    pub critical_field: T,
    #[serde(rename = "Delta_c")]
    pub critical_gap: T,
    pub alpha: Option<T>,
    #[serde(rename = "N")]
    pub n: usize,
}

impl<T: Real> SpectrumScan<T> {
    pub fn summary(&self) -> ScanSummary<T> {
        ScanSummary {
            critical_field: self.critical_field,
            critical_gap: self.critical_gap,
            alpha: self.alpha,
            n: self.n,
        }
    }

    /// CSV with header `B/J0,gap/J0`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("B/J0,gap/J0\n");
        for (b, g) in self.b_grid.iter().zip(&self.gaps) {
            out.push_str(&format!("{b},{g}\n"));
        }
        out
    }
}

/// Scans the critical gap over `b_grid` (units of `J0`), which must cover
/// `[0.01, 5]` with at least 50 points.
pub fn critical_gap_scan<T: Real>(couplings: &CouplingMatrix<T>, b_grid: &[T]) -> Result<SpectrumScan<T>> {
    validate_grid(b_grid)?;
    critical_gap_scan_unchecked(couplings, b_grid)
}

/// [`critical_gap_scan`] without the grid coverage requirement.
pub fn critical_gap_scan_unchecked<T: Real>(couplings: &CouplingMatrix<T>, b_grid: &[T]) -> Result<SpectrumScan<T>> {
    if b_grid.is_empty() || b_grid.iter().any(|b| !(*b > T::zero()) || !b.is_finite()) {
        return Err(Error::InvalidParameter("field grid must be non-empty, positive and finite".into()));
    }
    if !couplings.is_antiferromagnetic() {
        return Err(Error::InvalidParameter("gap scan expects antiferromagnetic couplings".into()));
    }
    let j0 = couplings.nearest_neighbor_mean();
    let sector = SymmetricSector::new(couplings)?;
    let gaps = b_grid
        .iter()
        .map(|&b| sector_gap(&sector, b * j0, j0).map(|p| p.gap / j0))
        .collect::<Result<Vec<T>>>()?;
    let (imin, gmin) = gaps
        .iter()
        .enumerate()
        .fold((0, T::infinity()), |(bi, bg), (i, &g)| if g < bg { (i, g) } else { (bi, bg) });
    Ok(SpectrumScan {
        n: couplings.n(),
        j0,
        alpha: couplings.fit().map(|f| f.alpha),
        b_grid: b_grid.to_vec(),
        gaps,
        critical_field: b_grid[imin],
        critical_gap: gmin,
    })
}

fn validate_grid<T: Real>(grid: &[T]) -> Result<()> {
    if grid.len() < 50 {
        return Err(Error::InvalidParameter(format!("field grid needs at least 50 points, got {}", grid.len())));
    }
    let lo = grid.iter().fold(T::infinity(), |m, &b| m.min(b));
    let hi = grid.iter().fold(T::neg_infinity(), |m, &b| m.max(b));
    let slack = T::lit(1e-9);
    if lo > T::lit(0.01) * (T::one() + slack) || hi < T::lit(5.0) * (T::one() - slack) {
        return Err(Error::InvalidParameter(format!("field grid [{lo}, {hi}] must cover [0.01, 5] J0")));
    }
    Ok(())
}
