//! Order parameters and correlation functions of measured bitstrings.
//!
//! Everything here works on an [`Ensemble`]: a finite-shot [`SampleSet`] or an
//! exact (possibly deconvolved) [`ProbabilityDistribution`], seen as weights
//! over bitstrings. Spin `i` (1-based, ion 1 = most significant bit) reads
//! `x_i = +1` when its bit is set. Sums go through pairwise reduction.

use serde::{Deserialize, Serialize};

use crate::couplings::CouplingMatrix;
use crate::detection::{ProbabilityDistribution, SampleSet};
use crate::error::{Error, Result};
use crate::hamiltonian::classical_energies;
use crate::num::{pairwise_sum, Real};
use crate::state::{ion_mask, Axis};

/// Weights over bitstrings that sum to one.
pub trait Ensemble<T: Real> {
    fn n(&self) -> usize;
    /// Measurement basis, when known.
    fn basis(&self) -> Option<Axis>;
    /// Number of shots behind the weights; `None` for exact distributions.
    fn shots(&self) -> Option<u64>;
    fn weighted(&self) -> Vec<(usize, T)>;
}

impl<T: Real> Ensemble<T> for SampleSet<T> {
    fn n(&self) -> usize {
        self.n
    }

    fn basis(&self) -> Option<Axis> {
        Some(self.basis)
    }

    fn shots(&self) -> Option<u64> {
        Some(self.total_shots)
    }

    fn weighted(&self) -> Vec<(usize, T)> {
        let total = T::lit(self.total_shots as f64);
        self.iter().map(|(s, c)| (s, T::lit(c as f64) / total)).collect()
    }
}

impl<T: Real> Ensemble<T> for ProbabilityDistribution<T> {
    fn n(&self) -> usize {
        ProbabilityDistribution::n(self)
    }

    fn basis(&self) -> Option<Axis> {
        None
    }

    fn shots(&self) -> Option<u64> {
        None
    }

    fn weighted(&self) -> Vec<(usize, T)> {
        self.values()
            .iter()
            .enumerate()
            .filter(|(_, p)| **p != T::zero())
            .map(|(s, p)| (s, *p))
            .collect()
    }
}

fn check_basis<T: Real, E: Ensemble<T> + ?Sized>(ens: &E, want: Axis) -> Result<Vec<(usize, T)>> {
    if let Some(b) = ens.basis() {
        if b != want {
            return Err(Error::InvalidParameter(format!(
                "expected {}-basis samples, got {}-basis",
                want.label(),
                b.label()
            )));
        }
    }
    let w = ens.weighted();
    if w.is_empty() || ens.shots() == Some(0) {
        return Err(Error::EmptySamples);
    }
    Ok(w)
}

fn spin<T: Real>(s: usize, n: usize, ion: usize) -> T {
    if s & ion_mask(n, ion) != 0 {
        T::one()
    } else {
        -T::one()
    }
}

fn weighted_mean<T: Real>(w: &[(usize, T)], f: impl Fn(usize) -> T) -> T {
    let terms: Vec<T> = w.iter().map(|&(s, p)| p * f(s)).collect();
    pairwise_sum(&terms)
}

/// Per-shot `m_s = (1/N) |sum_i (-1)^i x_i|`.
pub fn staggered_magnetization<T: Real>(bitstring: usize, n: usize) -> T {
    let sum: i64 = (0..n)
        .map(|i| {
            let x = if bitstring & ion_mask(n, i) != 0 { 1 } else { -1 };
            if (i + 1) % 2 == 0 {
                x
            } else {
                -x
            }
        })
        .sum();
    T::from_usize_exact(sum.unsigned_abs() as usize) / T::from_usize_exact(n)
}

/// Per-shot `|sum_i x_i| / N`.
pub fn magnetization<T: Real>(bitstring: usize, n: usize) -> T {
    let ones = (bitstring & ((1usize << n) - 1)).count_ones() as i64;
    let sum = 2 * ones - n as i64;
    T::from_usize_exact(sum.unsigned_abs() as usize) / T::from_usize_exact(n)
}

/// Moments of a per-shot order parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderParameter<T> {
    /// Mean of the per-shot value.
    pub mean: T,
    pub stderr: Option<T>,
    pub m2: T,
    pub m4: T,
    /// `(1/N) |sum_i s_i <x_i>|` with the ensemble mean inside the absolute value.
    pub from_expectations: T,
}

fn order_parameter<T: Real>(w: &[(usize, T)], n: usize, shots: Option<u64>, staggered: bool) -> OrderParameter<T> {
    let per_shot = |s: usize| if staggered { staggered_magnetization::<T>(s, n) } else { magnetization::<T>(s, n) };
    let mean = weighted_mean(w, per_shot);
    let m2 = weighted_mean(w, |s| per_shot(s).powi(2));
    let m4 = weighted_mean(w, |s| per_shot(s).powi(4));
    let stderr = shots.filter(|&k| k > 1).map(|k| ((m2 - mean * mean).max(T::zero()) / T::lit((k - 1) as f64)).sqrt());
    let mut sum = T::zero();
    for i in 0..n {
        let sign = if staggered && (i + 1) % 2 == 1 { -T::one() } else { T::one() };
        sum += sign * weighted_mean(w, |s| spin::<T>(s, n, i));
    }
    OrderParameter {
        mean,
        stderr,
        m2,
        m4,
        from_expectations: sum.abs() / T::from_usize_exact(n),
    }
}

/// Staggered magnetization moments of x-basis data.
pub fn staggered_moments<T: Real, E: Ensemble<T> + ?Sized>(ens: &E) -> Result<OrderParameter<T>> {
    let w = check_basis(ens, Axis::X)?;
    Ok(order_parameter(&w, ens.n(), ens.shots(), true))
}

/// Uniform magnetization moments of x-basis data.
pub fn magnetization_moments<T: Real, E: Ensemble<T> + ?Sized>(ens: &E) -> Result<OrderParameter<T>> {
    let w = check_basis(ens, Axis::X)?;
    Ok(order_parameter(&w, ens.n(), ens.shots(), false))
}

/// Raw and finite-size-scaled Binder cumulant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinderCumulant<T> {
    /// `g = 3/2 - <m^4> / (2 <m^2>^2)`.
    pub raw: T,
    /// `(g - g_uniform) / (1 - g_uniform)`.
    pub scaled: T,
    pub uniform_reference: T,
}

/// Raw cumulant of the uniform distribution over all `N`-spin strings.
/// With `S` a sum of `N` independent signs, `<S^2> = N` and
/// `<S^4> = 3N^2 - 2N`, which gives `g = 1/N`.
pub fn uniform_binder<T: Real>(n: usize) -> T {
    T::one() / T::from_usize_exact(n)
}

fn binder_from_moments<T: Real>(m2: T, m4: T, n: usize) -> Result<BinderCumulant<T>> {
    if !(m2 > T::zero()) {
        return Err(Error::UndefinedCumulant);
    }
    let raw = T::lit(1.5) - m4 / (T::lit(2.0) * m2 * m2);
    let g0 = uniform_binder::<T>(n);
    Ok(BinderCumulant {
        raw,
        scaled: (raw - g0) / (T::one() - g0),
        uniform_reference: g0,
    })
}

/// Binder cumulant of per-shot order-parameter values for an `n`-spin chain.
pub fn binder_cumulant<T: Real>(per_shot: &[T], n: usize) -> Result<BinderCumulant<T>> {
    if per_shot.len() < 2 {
        return Err(Error::InvalidParameter("Binder cumulant needs at least two shots".into()));
    }
    let k = T::from_usize_exact(per_shot.len());
    let m2 = pairwise_sum(&per_shot.iter().map(|m| *m * *m).collect::<Vec<_>>()) / k;
    let m4 = pairwise_sum(&per_shot.iter().map(|m| m.powi(4)).collect::<Vec<_>>()) / k;
    binder_from_moments(m2, m4, n)
}

/// Binder cumulant of the staggered magnetization of x-basis data.
pub fn staggered_binder<T: Real, E: Ensemble<T> + ?Sized>(ens: &E) -> Result<BinderCumulant<T>> {
    if ens.shots().is_some_and(|s| s < 2) {
        return Err(Error::InvalidParameter("Binder cumulant needs at least two shots".into()));
    }
    let m = staggered_moments(ens)?;
    binder_from_moments(m.m2, m.m4, ens.n())
}

/// Connected two-point correlations `C_ij = <x_i x_j> - <x_i><x_j>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationProfile<T> {
    pub n: usize,
    pub means: Vec<T>,
    /// Row-major `N x N`, zero-based ions.
    pub pair_matrix: Vec<T>,
    /// `C(r)` for `r = 1..N-1` (entry `r - 1`).
    pub averaged: Vec<T>,
    /// `C_{1,1+r}` for `r = 1..N-1`.
    pub reference_row: Vec<T>,
    /// Binomial standard errors of `C(r)` ignoring cross-correlations; `None` for exact input.
    pub averaged_stderr: Option<Vec<T>>,
    /// Smallest `r` with `|C(r)| < |C(1)| / e`.
    pub correlation_length: Option<usize>,
}

impl<T: Real> CorrelationProfile<T> {
    pub fn get(&self, i: usize, j: usize) -> T {
        self.pair_matrix[i * self.n + j]
    }

    /// `C(r)` for `1 <= r < N`.
    pub fn at(&self, r: usize) -> T {
        self.averaged[r - 1]
    }
}

pub fn correlations<T: Real, E: Ensemble<T> + ?Sized>(ens: &E) -> Result<CorrelationProfile<T>> {
    let w = check_basis(ens, Axis::X)?;
    let n = ens.n();
    if n < 2 {
        return Err(Error::InvalidParameter("correlations need at least two spins".into()));
    }
    let means: Vec<T> = (0..n).map(|i| weighted_mean(&w, |s| spin::<T>(s, n, i))).collect();
    let mut raw = vec![T::zero(); n * n];
    for i in 0..n {
        for j in i..n {
            let v = weighted_mean(&w, |s| spin::<T>(s, n, i) * spin::<T>(s, n, j));
            raw[i * n + j] = v;
            raw[j * n + i] = v;
        }
    }
    let mut pair = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            pair[i * n + j] = raw[i * n + j] - means[i] * means[j];
        }
    }
    let averaged: Vec<T> = (1..n)
        .map(|r| pairwise_sum(&(0..n - r).map(|m| pair[m * n + m + r]).collect::<Vec<_>>()) / T::from_usize_exact(n - r))
        .collect();
    let reference_row = (1..n).map(|r| pair[r]).collect();
    let averaged_stderr = ens.shots().map(|k| {
        let k = T::lit(k as f64);
        (1..n)
            .map(|r| {
                let var = pairwise_sum(&(0..n - r).map(|m| T::one() - raw[m * n + m + r].powi(2)).collect::<Vec<_>>());
                (var.max(T::zero()) / k).sqrt() / T::from_usize_exact(n - r)
            })
            .collect()
    });
    let c1 = averaged[0].abs();
    let cut = c1 / T::one().exp();
    let correlation_length = if c1 > T::zero() {
        (1..n).find(|&r| averaged[r - 1].abs() < cut)
    } else {
        None
    };
    Ok(CorrelationProfile {
        n,
        means,
        pair_matrix: pair,
        averaged,
        reference_row,
        averaged_stderr,
        correlation_length,
    })
}

/// `S(k) = |sum_{r=1}^{N-1} C(r) e^{ikr}| / (N - 1)` on `k_m = m pi / N`, `m = 1..N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureFunction<T> {
    pub k_values: Vec<T>,
    pub s_values: Vec<T>,
}

impl<T: Real> StructureFunction<T> {
    /// `S(pi)`, the last grid point.
    pub fn at_pi(&self) -> T {
        *self.s_values.last().expect("grid is never empty")
    }
}

pub fn structure_function<T: Real>(profile: &CorrelationProfile<T>) -> StructureFunction<T> {
    let n = profile.n;
    let norm = T::from_usize_exact(n - 1);
    let k_values: Vec<T> = (1..=n).map(|m| T::PI() * T::from_usize_exact(m) / T::from_usize_exact(n)).collect();
    let s_values = k_values
        .iter()
        .map(|&k| {
            let (mut re, mut im) = (T::zero(), T::zero());
            for r in 1..n {
                let phase = k * T::from_usize_exact(r);
                re += profile.at(r) * phase.cos();
                im += profile.at(r) * phase.sin();
            }
            re.hypot(im) / norm
        })
        .collect();
    StructureFunction { k_values, s_values }
}

/// `S(pi)` from the per-shot staggered pair sum
/// `sum_r (-1)^r/(N-r) sum_m x_m x_{m+r}` minus its disconnected part; an
/// independent reduction of the same correlators as [`structure_function`].
pub fn staggered_structure_factor<T: Real, E: Ensemble<T> + ?Sized>(ens: &E) -> Result<T> {
    let w = check_basis(ens, Axis::X)?;
    let n = ens.n();
    let weight = |r: usize| {
        let s = if r.is_multiple_of(2) { T::one() } else { -T::one() };
        s / T::from_usize_exact(n - r)
    };
    let pair_sum = |x: &dyn Fn(usize) -> T| {
        let mut acc = T::zero();
        for r in 1..n {
            for m in 0..n - r {
                acc += weight(r) * x(m) * x(m + r);
            }
        }
        acc
    };
    let connected = weighted_mean(&w, |s| pair_sum(&|i| spin::<T>(s, n, i)));
    let means: Vec<T> = (0..n).map(|i| weighted_mean(&w, |s| spin::<T>(s, n, i))).collect();
    let disconnected = pair_sum(&|i| means[i]);
    Ok((connected - disconnected).abs() / T::from_usize_exact(n - 1))
}

/// One distinct classical energy with its total probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyLevel<T> {
    pub energy: T,
    pub probability: T,
    pub degeneracy: usize,
}

/// Bitstring probabilities ordered by zero-field energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyDistribution<T> {
    /// `(bitstring, energy, probability)` sorted by energy, then bitstring.
    pub states: Vec<(usize, T, T)>,
    /// Running sum of `states` probabilities.
    pub cumulative: Vec<T>,
    pub levels: Vec<EnergyLevel<T>>,
    /// `-(1/N) sum_i P_i log2 P_i` over bitstrings with `P_i > 0`.
    pub entropy_per_particle: T,
}

/// Entropy per particle (bits) of bitstring probabilities; non-positive entries are skipped.
pub fn entropy_per_particle<T: Real>(probabilities: &[T], n: usize) -> T {
    let terms: Vec<T> = probabilities
        .iter()
        .filter(|p| **p > T::zero())
        .map(|&p| -p * p.log2())
        .collect();
    pairwise_sum(&terms) / T::from_usize_exact(n)
}

pub fn energy_distribution<T: Real, E: Ensemble<T> + ?Sized>(ens: &E, couplings: &CouplingMatrix<T>) -> Result<EnergyDistribution<T>> {
    let w = check_basis(ens, Axis::X)?;
    let n = ens.n();
    if couplings.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: couplings.n(),
        });
    }
    let energies = classical_energies(couplings)?;
    let mut probs = vec![T::zero(); 1 << n];
    for (s, p) in w {
        probs[s] += p;
    }
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| energies[a].partial_cmp(&energies[b]).unwrap().then(a.cmp(&b)));
    let states: Vec<(usize, T, T)> = order.iter().map(|&s| (s, energies[s], probs[s])).collect();
    let mut cumulative = Vec::with_capacity(states.len());
    let mut acc = T::zero();
    for &(_, _, p) in &states {
        acc += p;
        cumulative.push(acc);
    }
    let scale = couplings.total_abs_coupling().max(T::one());
    let tol = T::lit(1e-9) * scale;
    let mut levels: Vec<EnergyLevel<T>> = Vec::new();
    for &(_, e, p) in &states {
        match levels.last_mut() {
            Some(l) if (e - l.energy).abs() <= tol => {
                l.probability += p;
                l.degeneracy += 1;
            }
            _ => levels.push(EnergyLevel {
                energy: e,
                probability: p,
                degeneracy: 1,
            }),
        }
    }
    Ok(EnergyDistribution {
        entropy_per_particle: entropy_per_particle(&probs, n),
        states,
        cumulative,
        levels,
    })
}

/// Distribution of the total `S_y = #ones - #zeros` of y-basis data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyHistogram<T> {
    /// `-N, -N+2, ..., N`.
    pub values: Vec<i64>,
    pub probabilities: Vec<T>,
    pub mean: T,
    /// `mean / N`.
    pub mean_fraction: T,
}

pub fn transverse_magnetization_histogram<T: Real, E: Ensemble<T> + ?Sized>(ens: &E) -> Result<SyHistogram<T>> {
    let w = check_basis(ens, Axis::Y)?;
    let n = ens.n();
    let mut probabilities = vec![T::zero(); n + 1];
    for (s, p) in w {
        probabilities[s.count_ones() as usize] += p;
    }
    let values: Vec<i64> = (0..=n as i64).map(|k| 2 * k - n as i64).collect();
    let mean = pairwise_sum(&values.iter().zip(&probabilities).map(|(&v, &p)| T::lit(v as f64) * p).collect::<Vec<_>>());
    Ok(SyHistogram {
        values,
        probabilities,
        mean,
        mean_fraction: mean / T::from_usize_exact(n),
    })
}

/// One row of a tidy observable table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableRow<T> {
    pub quantity: String,
    pub index: String,
    pub value: T,
    pub stderr: Option<T>,
}

impl<T> ObservableRow<T> {
    pub fn new(quantity: &str, index: impl ToString, value: T, stderr: Option<T>) -> Self {
        Self {
            quantity: quantity.into(),
            index: index.to_string(),
            value,
            stderr,
        }
    }
}

/// CSV with columns `quantity,index,value,stderr`.
pub fn to_tidy_csv<T: Real>(rows: &[ObservableRow<T>]) -> String {
    let mut out = String::from("quantity,index,value,stderr\n");
    for r in rows {
        let se = r.stderr.map(|s| s.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{},{}\n", r.quantity, r.index, r.value, se));
    }
    out
}

/// Everything reported for one x-basis ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XBasisSummary<T> {
    pub n: usize,
    pub shots: Option<u64>,
    pub staggered: OrderParameter<T>,
    pub magnetization: OrderParameter<T>,
    pub binder: Option<BinderCumulant<T>>,
    pub correlations: CorrelationProfile<T>,
    pub structure: StructureFunction<T>,
    pub entropy_per_particle: Option<T>,
    /// Combined weight of the two Neel strings.
    pub neel_population: T,
}

/// Indices of the two Neel strings `0101...` and `1010...` (ion 1 first).
pub fn neel_indices(n: usize) -> (usize, usize) {
    let a = (0..n).filter(|i| i % 2 == 1).fold(0usize, |acc, i| acc | ion_mask(n, i));
    (a, a ^ ((1usize << n) - 1))
}

pub fn summarize_x<T: Real, E: Ensemble<T> + ?Sized>(ens: &E, couplings: Option<&CouplingMatrix<T>>) -> Result<XBasisSummary<T>> {
    let w = check_basis(ens, Axis::X)?;
    let n = ens.n();
    let correlations = correlations(ens)?;
    let structure = structure_function(&correlations);
    let entropy_per_particle = match couplings {
        Some(j) if n <= crate::hamiltonian::MAX_CLASSICAL_SPINS => Some(energy_distribution(ens, j)?.entropy_per_particle),
        _ => None,
    };
    let (a, b) = neel_indices(n);
    let neel_population = w.iter().filter(|(s, _)| *s == a || *s == b).fold(T::zero(), |acc, (_, p)| acc + *p);
    Ok(XBasisSummary {
        n,
        shots: ens.shots(),
        staggered: staggered_moments(ens)?,
        magnetization: magnetization_moments(ens)?,
        binder: staggered_binder(ens).ok(),
        correlations,
        structure,
        entropy_per_particle,
        neel_population,
    })
}

impl<T: Real> XBasisSummary<T> {
    pub fn tidy_rows(&self) -> Vec<ObservableRow<T>> {
        let mut rows = vec![
            ObservableRow::new("staggered_magnetization_per_shot", "", self.staggered.mean, self.staggered.stderr),
            ObservableRow::new("staggered_magnetization_expectation", "", self.staggered.from_expectations, None),
            ObservableRow::new("magnetization_per_shot", "", self.magnetization.mean, self.magnetization.stderr),
            ObservableRow::new("neel_population", "", self.neel_population, None),
        ];
        if let Some(b) = &self.binder {
            rows.push(ObservableRow::new("binder_raw", "", b.raw, None));
            rows.push(ObservableRow::new("binder_scaled", "", b.scaled, None));
        }
        if let Some(s) = self.entropy_per_particle {
            rows.push(ObservableRow::new("entropy_per_particle", "", s, None));
        }
        for r in 1..self.n {
            let se = self.correlations.averaged_stderr.as_ref().map(|v| v[r - 1]);
            rows.push(ObservableRow::new("C_r", r, self.correlations.at(r), se));
            rows.push(ObservableRow::new("C_1_1+r", r, self.correlations.reference_row[r - 1], None));
        }
        if let Some(l) = self.correlations.correlation_length {
            rows.push(ObservableRow::new("correlation_length", "", T::from_usize_exact(l), None));
        }
        for (k, s) in self.structure.k_values.iter().zip(&self.structure.s_values) {
            rows.push(ObservableRow::new("S_k", k, *s, None));
        }
        rows
    }
}
