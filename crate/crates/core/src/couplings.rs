//! Ising coupling matrices: the phonon mode sum produced by a spin-dependent
//! dipole force, idealized power laws, and the power-law characterization
//! (`J0`, `alpha`, range `xi`) used throughout the analysis.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ion_chain::{chain_geometry, ChainGeometry, TrapParameters};
use crate::num::Real;

/// Minimum allowed distance between the beatnote detuning and any mode (kHz).
pub const DEFAULT_RESONANCE_GUARD_KHZ: f64 = 1.0;

/// How the beatnote detuning `mu` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetuningRule<T> {
    /// Fixed detuning in MHz.
    Explicit(T),
    /// `mu = nu_1 + 3 eta Omega`, with `eta` the single-ion Lamb-Dicke parameter.
    ComPlus3EtaOmega,
}

/// Optical drive producing the spin-spin interaction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveParameters<T> {
    /// Single spin-flip Rabi frequency (kHz), uniform over the chain.
    pub rabi_freq: T,
    pub detuning: DetuningRule<T>,
}

impl<T: Real> DriveParameters<T> {
    pub fn new(rabi_freq: T, detuning: DetuningRule<T>) -> Result<Self> {
        if !(rabi_freq > T::zero()) {
            return Err(Error::InvalidParameter(format!("Rabi frequency must be positive, got {rabi_freq}")));
        }
        if let DetuningRule::Explicit(mu) = detuning {
            if !(mu > T::zero()) {
                return Err(Error::InvalidParameter(format!("detuning must be positive, got {mu}")));
            }
        }
        Ok(Self { rabi_freq, detuning })
    }

    /// Beatnote detuning `mu` in kHz for the given trap.
    pub fn beatnote_detuning_khz(&self, trap: &TrapParameters<T>) -> T {
        let k = T::lit(1000.0);
        match self.detuning {
            DetuningRule::Explicit(mu) => mu * k,
            DetuningRule::ComPlus3EtaOmega => {
                trap.transverse_com_freq * k + T::lit(3.0) * trap.lamb_dicke() * self.rabi_freq
            }
        }
    }
}

/// Least-squares power-law characterization `J(r) ~ j0 / r^alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit<T> {
    /// Fitted intercept (kHz).
    pub j0: T,
    pub alpha: T,
    /// RMS residual of the log-log fit.
    pub residual: T,
}

impl<T: Real> PowerLawFit<T> {
    /// Interaction range `xi = 5^(1/alpha)`; `None` in the uniform limit `alpha <= 0`.
    pub fn range_xi(&self) -> Option<T> {
        interaction_range(self.alpha).ok()
    }
}

/// Symmetric `N x N` Ising coupling matrix in kHz with zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingMatrix<T> {
    n: usize,
    values: Vec<T>,
    fit: Option<PowerLawFit<T>>,
}

impl<T: Real> CouplingMatrix<T> {
    /// Builds a matrix from row-major values; symmetry must hold exactly.
    pub fn new(n: usize, values: Vec<T>) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidParameter("coupling matrix needs at least one spin".into()));
        }
        if values.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: values.len(),
            });
        }
        for i in 0..n {
            if values[i * n + i] != T::zero() {
                return Err(Error::InvalidParameter(format!("diagonal entry J[{i}][{i}] must be zero")));
            }
            for j in 0..i {
                let (a, b) = (values[i * n + j], values[j * n + i]);
                if !a.is_finite() || a != b {
                    return Err(Error::InvalidParameter(format!(
                        "coupling matrix not symmetric/finite at ({i}, {j}): {a} vs {b}"
                    )));
                }
            }
        }
        let mut m = Self { n, values, fit: None };
        m.fit = fit_power_law(&m).ok();
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i * self.n + j]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Power-law fit, available for `N >= 3` with positive separation averages.
    pub fn fit(&self) -> Option<&PowerLawFit<T>> {
        self.fit.as_ref()
    }

    pub fn range_xi(&self) -> Option<T> {
        self.fit.and_then(|f| f.range_xi())
    }

    /// Mean coupling over all pairs separated by `r` sites.
    pub fn mean_at_separation(&self, r: usize) -> T {
        assert!(r >= 1 && r < self.n, "separation {r} out of range");
        let mut sum = T::zero();
        for i in 0..self.n - r {
            sum += self.get(i, i + r);
        }
        sum / T::from_usize_exact(self.n - r)
    }

    /// Average nearest-neighbor coupling; the energy unit `J0` of the `B/J0` axis.
    pub fn nearest_neighbor_mean(&self) -> T {
        if self.n < 2 {
            return T::zero();
        }
        self.mean_at_separation(1)
    }

    /// Largest relative deviation of a nearest-neighbor bond from the mean.
    pub fn nearest_neighbor_inhomogeneity(&self) -> T {
        let mean = self.nearest_neighbor_mean();
        (0..self.n - 1)
            .map(|i| ((self.get(i, i + 1) - mean) / mean).abs())
            .fold(T::zero(), T::max)
    }

    /// Sum of `|J_ij|` over pairs `i < j`.
    pub fn total_abs_coupling(&self) -> T {
        let mut s = T::zero();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                s += self.get(i, j).abs();
            }
        }
        s
    }

    pub fn is_antiferromagnetic(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| i == j || self.get(i, j) > T::zero()))
    }

    /// Same matrix multiplied by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        let values = self.values.iter().map(|&v| v * factor).collect();
        Self::new(self.n, values).expect("scaling preserves symmetry")
    }

    /// Row-major CSV with a commented header carrying `n` and units.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# n={}", self.n);
        let _ = writeln!(out, "# units=kHz");
        for i in 0..self.n {
            let row: Vec<String> = (0..self.n).map(|j| format!("{}", self.get(i, j))).collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut n: Option<usize> = None;
        let mut rows: Vec<Vec<T>> = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(header) = line.strip_prefix('#') {
                let header = header.trim();
                if let Some(v) = header.strip_prefix("n=") {
                    n = Some(v.trim().parse().map_err(|_| Error::InvalidParameter(format!("bad header: {line}")))?);
                } else if let Some(units) = header.strip_prefix("units=") {
                    if units.trim() != "kHz" {
                        return Err(Error::InvalidParameter(format!("unsupported units {units}")));
                    }
                }
                continue;
            }
            let row = line
                .split(',')
                .map(|c| {
                    c.trim()
                        .parse::<f64>()
                        .map(T::lit)
                        .map_err(|_| Error::InvalidParameter(format!("bad coupling entry {c:?}")))
                })
                .collect::<Result<Vec<T>>>()?;
            rows.push(row);
        }
        let n = n.ok_or_else(|| Error::InvalidParameter("missing '# n=' header".into()))?;
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: rows.iter().map(Vec::len).sum(),
            });
        }
        Self::new(n, rows.into_iter().flatten().collect())
    }
}

/// Mode-sum couplings restricted to the listed modes:
/// `J_ij = Omega^2 nu_R sum_m b_im b_jm / (mu^2 - nu_m^2)`, all frequencies in kHz.
pub fn mode_sum_couplings<T: Real>(
    chain: &ChainGeometry<T>,
    detuning_khz: T,
    rabi_khz: T,
    recoil_khz: T,
    modes: &[usize],
    guard_khz: T,
) -> Result<CouplingMatrix<T>> {
    let n = chain.n();
    let k = T::lit(1000.0);
    let mut weights = Vec::with_capacity(modes.len());
    for &m in modes {
        let nu = chain.mode_freqs[m] * k;
        if (detuning_khz - nu).abs() < guard_khz {
            return Err(Error::SidebandResonance {
                mode: m,
                detuning_khz: detuning_khz.to_f64_lossy(),
                mode_freq_khz: nu.to_f64_lossy(),
                guard_khz: guard_khz.to_f64_lossy(),
            });
        }
        weights.push(T::one() / (detuning_khz * detuning_khz - nu * nu));
    }
    let prefactor = rabi_khz * rabi_khz * recoil_khz;
    let mut values = vec![T::zero(); n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let mut s = T::zero();
            for (&m, &w) in modes.iter().zip(&weights) {
                s += chain.component(i, m) * chain.component(j, m) * w;
            }
            values[i * n + j] = prefactor * s;
            values[j * n + i] = prefactor * s;
        }
    }
    CouplingMatrix::new(n, values)
}

/// Full mode-sum Ising couplings for a chain driven by `drive`.
pub fn ising_couplings<T: Real>(
    trap: &TrapParameters<T>,
    chain: &ChainGeometry<T>,
    drive: &DriveParameters<T>,
) -> Result<CouplingMatrix<T>> {
    let modes: Vec<usize> = (0..chain.n()).collect();
    mode_sum_couplings(
        chain,
        drive.beatnote_detuning_khz(trap),
        drive.rabi_freq,
        trap.recoil_freq,
        &modes,
        T::lit(DEFAULT_RESONANCE_GUARD_KHZ),
    )
}

/// Chain geometry and couplings straight from trap and drive parameters.
pub fn physical_couplings<T: Real>(trap: &TrapParameters<T>, drive: &DriveParameters<T>) -> Result<CouplingMatrix<T>> {
    let chain = chain_geometry(trap)?;
    ising_couplings(trap, &chain, drive)
}

/// Fits `log Jbar(r) = log j0 - alpha log r` over `r = 1..N-1` by unweighted least squares,
/// where `Jbar(r)` averages all couplings at separation `r`.
pub fn fit_power_law<T: Real>(couplings: &CouplingMatrix<T>) -> Result<PowerLawFit<T>> {
    let n = couplings.n();
    if n < 3 {
        return Err(Error::InvalidParameter(format!(
            "power-law fit needs at least 3 spins, got {n}"
        )));
    }
    let mut xs = Vec::with_capacity(n - 1);
    let mut ys = Vec::with_capacity(n - 1);
    for r in 1..n {
        let mean = couplings.mean_at_separation(r);
        if !(mean > T::zero()) {
            return Err(Error::PowerLawUndefined {
                separation: r,
                mean: mean.to_f64_lossy(),
            });
        }
        xs.push(T::from_usize_exact(r).ln());
        ys.push(mean.ln());
    }
    let count = T::from_usize_exact(xs.len());
    let mx = xs.iter().fold(T::zero(), |a, &x| a + x) / count;
    let my = ys.iter().fold(T::zero(), |a, &y| a + y) / count;
    let (mut sxy, mut sxx) = (T::zero(), T::zero());
    for (&x, &y) in xs.iter().zip(&ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sq = xs
        .iter()
        .zip(&ys)
        .fold(T::zero(), |a, (&x, &y)| a + (y - intercept - slope * x).powi(2));
    Ok(PowerLawFit {
        j0: intercept.exp(),
        alpha: -slope,
        residual: (sq / count).sqrt(),
    })
}

/// Number of sites over which the coupling decays to 20% of its
/// nearest-neighbor value, `xi = 5^(1/alpha)`.
pub fn interaction_range<T: Real>(alpha: T) -> Result<T> {
    if !(alpha > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "interaction range diverges for alpha = {alpha} (uniform limit)"
        )));
    }
    let xi = T::lit(5.0).powf(alpha.recip());
    if !xi.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "interaction range diverges for alpha = {alpha} (uniform limit)"
        )));
    }
    Ok(xi)
}

/// Idealized couplings `J_ij = j0 / |i - j|^alpha`.
pub fn synthetic_power_law<T: Real>(n: usize, j0: T, alpha: T) -> Result<CouplingMatrix<T>> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 spins, got {n}")));
    }
    if !(j0 > T::zero()) || !(alpha >= T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "synthetic power law needs j0 > 0 and alpha >= 0 (got {j0}, {alpha})"
        )));
    }
    let mut values = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let r = T::from_usize_exact(i.abs_diff(j));
                values[i * n + j] = j0 / r.powf(alpha);
            }
        }
    }
    CouplingMatrix::new(n, values)
}

/// Axial frequency (MHz) at which the fitted exponent equals `target_alpha`,
/// found by bisection on `[axial_lo, axial_hi]`. The exponent decreases
/// monotonically as the axial confinement (mode bandwidth) grows.
pub fn axial_freq_for_alpha<T: Real>(
    base: &TrapParameters<T>,
    drive: &DriveParameters<T>,
    target_alpha: T,
    axial_lo: T,
    axial_hi: T,
) -> Result<T> {
    let alpha_at = |axial: T| -> Result<T> {
        let trap = TrapParameters::new(base.n_ions, axial, base.transverse_com_freq, base.recoil_freq)?;
        let j = physical_couplings(&trap, drive)?;
        j.fit()
            .map(|f| f.alpha)
            .ok_or_else(|| Error::InvalidParameter("power-law fit unavailable".into()))
    };
    let (mut lo, mut hi) = (axial_lo, axial_hi);
    let (a_lo, a_hi) = (alpha_at(lo)?, alpha_at(hi)?);
    if !((a_lo - target_alpha) * (a_hi - target_alpha) <= T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "alpha {target_alpha} not bracketed by [{a_hi}, {a_lo}] over axial [{lo}, {hi}] MHz"
        )));
    }
    for _ in 0..80 {
        let mid = (lo + hi) * T::lit(0.5);
        if alpha_at(mid)? > target_alpha {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) < T::lit(1e-12) {
            break;
        }
    }
    Ok((lo + hi) * T::lit(0.5))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ref_trap(n: usize, axial: f64) -> TrapParameters<f64> {
        TrapParameters::new(n, axial, 4.1, 18.5).unwrap()
    }

    fn ref_drive() -> DriveParameters<f64> {
        DriveParameters::new(600.0, DetuningRule::ComPlus3EtaOmega).unwrap()
    }

    #[test]
    fn detuning_rule_uses_lamb_dicke() {
        let trap = ref_trap(10, 0.8);
        let eta = (18.5f64 / 4100.0).sqrt();
        let mu = ref_drive().beatnote_detuning_khz(&trap);
        assert!((mu - (4100.0 + 3.0 * eta * 600.0)).abs() < 1e-9);
    }

    #[test]
    fn com_only_couplings_are_uniform() {
        let trap = ref_trap(8, 0.8);
        let chain = chain_geometry(&trap).unwrap();
        let mu = ref_drive().beatnote_detuning_khz(&trap);
        let j = mode_sum_couplings(&chain, mu, 600.0, 18.5, &[0], 1.0).unwrap();
        let first = j.get(0, 1);
        for a in 0..8 {
            for b in 0..8 {
                if a != b {
                    assert!((j.get(a, b) - first).abs() < 1e-9 * first);
                }
            }
        }
    }

    #[test]
    fn resonance_guard_trips() {
        let trap = ref_trap(4, 0.8);
        let chain = chain_geometry(&trap).unwrap();
        let drive = DriveParameters::new(600.0, DetuningRule::Explicit(4.1 + 0.0005)).unwrap();
        let err = ising_couplings(&trap, &chain, &drive).unwrap_err();
        assert!(matches!(err, Error::SidebandResonance { mode: 0, .. }));
    }

    #[test]
    fn reference_parameters_are_antiferromagnetic() {
        for axial in [0.62, 0.7, 0.8, 0.85, 0.88] {
            let j = physical_couplings(&ref_trap(10, axial), &ref_drive()).unwrap();
            assert!(j.is_antiferromagnetic());
            assert!(j.nearest_neighbor_inhomogeneity() < 0.25);
        }
    }

    #[test]
    fn exact_power_law_fit() {
        let j = synthetic_power_law(10, 2.0f64, 1.3).unwrap();
        let fit = fit_power_law(&j).unwrap();
        assert!((fit.j0 - 2.0).abs() < 1e-10);
        assert!((fit.alpha - 1.3).abs() < 1e-10);
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn uniform_matrix_has_zero_exponent() {
        let j = synthetic_power_law(6, 0.7f64, 0.0).unwrap();
        let fit = fit_power_law(&j).unwrap();
        assert!(fit.alpha.abs() < 1e-10);
        assert!(j.range_xi().is_none());
    }

    #[test]
    fn fit_rejects_nonpositive_average() {
        let mut v = synthetic_power_law(4, 1.0, 1.0).unwrap().values().to_vec();
        v[3] = -1.0;
        v[12] = -1.0;
        let j = CouplingMatrix::new(4, v).unwrap();
        assert!(j.fit().is_none());
        assert!(matches!(fit_power_law(&j), Err(Error::PowerLawUndefined { separation: 3, .. })));
        assert!(fit_power_law(&synthetic_power_law(2, 1.0, 1.0).unwrap()).is_err());
    }

    #[test]
    fn interaction_range_values() {
        assert!((interaction_range(1.0f64).unwrap() - 5.0).abs() < 1e-14);
        let a = 5f64.ln() / 10f64.ln();
        assert!((interaction_range(a).unwrap() - 10.0).abs() < 1e-12);
        assert!((interaction_range(1e6f64).unwrap() - 1.0).abs() < 1e-5);
        assert!(interaction_range(0.0f64).is_err());
        assert!(interaction_range(-1.0f64).is_err());
    }

    #[test]
    fn synthetic_entries() {
        let j = synthetic_power_law(2, 3.0f64, 1.0).unwrap();
        assert_eq!(j.get(0, 1), 3.0);
        let j = synthetic_power_law(10, 1.0f64, 1.0).unwrap();
        assert!((j.get(0, 9) - 1.0 / 9.0).abs() < 1e-15);
        let j = synthetic_power_law(5, 0.5, 0.0).unwrap();
        assert!(j.values().iter().enumerate().all(|(k, &v)| k % 6 == 0 || v == 0.5));
    }

    #[test]
    fn csv_round_trip() {
        let j = physical_couplings(&ref_trap(5, 0.7), &ref_drive()).unwrap();
        let back = CouplingMatrix::<f64>::from_csv(&j.to_csv()).unwrap();
        assert_eq!(j, back);
        assert!(CouplingMatrix::<f64>::from_csv("1,2\n3,4\n").is_err());
    }

    #[test]
    fn rejects_asymmetric_values() {
        assert!(CouplingMatrix::new(2, vec![0.0, 1.0, 1.5, 0.0]).is_err());
        assert!(CouplingMatrix::new(2, vec![1.0, 1.0, 1.0, 0.0]).is_err());
    }
}
