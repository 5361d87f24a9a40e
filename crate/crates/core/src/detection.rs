//! Projective sampling, the per-spin detection-error channel and its inversion.
//!
//! The channel acts independently on every spin with the single-spin matrix
//! `m = [[e_d, 1 - e_b], [1 - e_d, e_b]]` (columns: true dark/bright state), so
//! the full confusion matrix is `m (x) m (x) ... (x) m` and both it and its
//! inverse are applied in `O(n 2^n)` without ever being formed.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;
use crate::state::{ion_mask, rotate_measurement_basis, Axis, StateVector};

/// Tolerance on the normalization of probability vectors.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Per-spin detection efficiencies for dark (`0`) and bright (`1`) states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionChannel<T> {
    pub eps_dark: T,
    pub eps_bright: T,
}

impl<T: Real> DetectionChannel<T> {
    pub fn symmetric(epsilon: T) -> Result<Self> {
        Self::asymmetric(epsilon, epsilon)
    }

    pub fn asymmetric(eps_dark: T, eps_bright: T) -> Result<Self> {
        let half = T::lit(0.5);
        for e in [eps_dark, eps_bright] {
            if !(e > half && e <= T::one()) {
                return Err(Error::InvalidParameter(format!("detection efficiency must lie in (0.5, 1], got {e}")));
            }
        }
        Ok(Self { eps_dark, eps_bright })
    }

    pub fn ideal() -> Self {
        Self {
            eps_dark: T::one(),
            eps_bright: T::one(),
        }
    }

    pub fn is_ideal(&self) -> bool {
        self.eps_dark == T::one() && self.eps_bright == T::one()
    }

    pub fn is_symmetric(&self) -> bool {
        self.eps_dark == self.eps_bright
    }

    /// Single-spin matrix `m[observed][true]`.
    pub fn single_spin(&self) -> [[T; 2]; 2] {
        let (d, b) = (self.eps_dark, self.eps_bright);
        [[d, T::one() - b], [T::one() - d, b]]
    }

    fn single_spin_inverse(&self) -> [[T; 2]; 2] {
        let [[a, b], [c, d]] = self.single_spin();
        let det = a * d - b * c;
        [[d / det, -b / det], [-c / det, a / det]]
    }

    /// `M[observed][true]` for `n`-spin bitstrings.
    pub fn entry(&self, observed: usize, truth: usize, n: usize) -> T {
        let m = self.single_spin();
        (0..n).fold(T::one(), |acc, q| {
            let o = (observed >> q) & 1;
            let t = (truth >> q) & 1;
            acc * m[o][t]
        })
    }

    /// Probability that a spin in state `bit` is read correctly.
    fn fidelity(&self, bit: usize) -> T {
        if bit == 0 {
            self.eps_dark
        } else {
            self.eps_bright
        }
    }
}

/// `M_ij = (1 - eps)^beta eps^(n - beta)` with `beta` the Hamming distance.
pub fn confusion_matrix_entry<T: Real>(i: usize, j: usize, epsilon: T, n: usize) -> T {
    let beta = ((i ^ j) & ((1usize << n) - 1)).count_ones() as i32;
    (T::one() - epsilon).powi(beta) * epsilon.powi(n as i32 - beta)
}

fn apply_product<T: Real>(values: &mut [T], n: usize, m: &[[T; 2]; 2]) {
    for q in 0..n {
        let mask = 1usize << q;
        for s in 0..values.len() {
            if s & mask == 0 {
                let (p0, p1) = (values[s], values[s | mask]);
                values[s] = m[0][0] * p0 + m[0][1] * p1;
                values[s | mask] = m[1][0] * p0 + m[1][1] * p1;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistributionKind {
    Raw,
    Observed,
    Deconvolved,
}

/// Probabilities over all `2^n` bitstrings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityDistribution<T> {
    n: usize,
    values: Vec<T>,
    kind: DistributionKind,
}

/// Negative entries of a deconvolved distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegativityReport<T> {
    pub count: usize,
    pub min_value: T,
}

impl<T: Real> ProbabilityDistribution<T> {
    /// Validates normalization (and non-negativity unless deconvolved).
    pub fn new(n: usize, values: Vec<T>, kind: DistributionKind) -> Result<Self> {
        if values.len() != 1usize << n {
            return Err(Error::DimensionMismatch {
                expected: 1 << n,
                found: values.len(),
            });
        }
        let total = crate::num::pairwise_sum(&values);
        if (total - T::one()).abs() > T::lit(NORMALIZATION_TOLERANCE) {
            return Err(Error::InvalidParameter(format!("probabilities sum to {total}, not 1")));
        }
        if kind != DistributionKind::Deconvolved {
            if let Some(v) = values.iter().find(|v| !(**v >= T::zero())) {
                return Err(Error::InvalidParameter(format!("negative or NaN probability {v}")));
            }
        }
        Ok(Self { n, values, kind })
    }

    /// Born-rule distribution of a state in its current basis.
    pub fn from_state(state: &StateVector<T>) -> Result<Self> {
        let mut values = state.probabilities();
        let total = crate::num::pairwise_sum(&values);
        values.iter_mut().for_each(|v| *v /= total);
        Self::new(state.n(), values, DistributionKind::Raw)
    }

    /// Empirical frequencies of a sample set.
    pub fn from_samples(samples: &SampleSet<T>) -> Result<Self> {
        if samples.total_shots == 0 {
            return Err(Error::EmptySamples);
        }
        let mut values = vec![T::zero(); 1 << samples.n];
        let total = T::lit(samples.total_shots as f64);
        for (&s, &c) in &samples.counts {
            values[s] = T::lit(c as f64) / total;
        }
        let kind = if samples.channel.is_ideal() {
            DistributionKind::Raw
        } else {
            DistributionKind::Observed
        };
        Self::new(samples.n, values, kind)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn kind(&self) -> DistributionKind {
        self.kind
    }

    pub fn get(&self, index: usize) -> T {
        self.values[index]
    }

    pub fn negativity(&self) -> NegativityReport<T> {
        let count = self.values.iter().filter(|v| **v < T::zero()).count();
        let min_value = self.values.iter().fold(T::infinity(), |m, v| m.min(*v));
        NegativityReport { count, min_value }
    }

    /// Total-variation distance `1/2 sum |p - q|`.
    pub fn total_variation(&self, other: &Self) -> T {
        let diffs: Vec<T> = self.values.iter().zip(&other.values).map(|(a, b)| (*a - *b).abs()).collect();
        crate::num::pairwise_sum(&diffs) / T::lit(2.0)
    }
}

/// Measured bitstrings of one basis, with counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet<T> {
    pub basis: Axis,
    pub n: usize,
    pub counts: BTreeMap<usize, u64>,
    pub total_shots: u64,
    /// Detection channel the records have passed through.
    pub channel: DetectionChannel<T>,
    pub seed: Option<u64>,
}

/// JSON metadata accompanying a sample CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMetadata<T> {
    pub basis: Axis,
    pub n: usize,
    pub epsilon: T,
    pub eps_dark: T,
    pub eps_bright: T,
    pub shots: u64,
    pub seed: Option<u64>,
}

impl<T: Real> SampleSet<T> {
    pub fn new(basis: Axis, n: usize, counts: BTreeMap<usize, u64>, seed: Option<u64>) -> Result<Self> {
        if let Some((&s, _)) = counts.iter().find(|(&s, _)| s >> n != 0) {
            return Err(Error::InvalidParameter(format!("bitstring index {s} out of range for {n} spins")));
        }
        let total_shots = counts.values().sum();
        Ok(Self {
            basis,
            n,
            counts,
            total_shots,
            channel: DetectionChannel::ideal(),
            seed,
        })
    }

    /// Iterates shots as `(bitstring, multiplicity)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.counts.iter().map(|(&s, &c)| (s, c))
    }

    /// The efficiency reported for the set: `eps` of a symmetric channel,
    /// the mean of the pair otherwise.
    pub fn epsilon(&self) -> T {
        (self.channel.eps_dark + self.channel.eps_bright) / T::lit(2.0)
    }

    pub fn metadata(&self) -> SampleMetadata<T> {
        SampleMetadata {
            basis: self.basis,
            n: self.n,
            epsilon: self.epsilon(),
            eps_dark: self.channel.eps_dark,
            eps_bright: self.channel.eps_bright,
            shots: self.total_shots,
            seed: self.seed,
        }
    }

    /// CSV with header `basis,bitstring,count`; bitstrings list ion 1 first.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("basis,bitstring,count\n");
        for (s, c) in self.iter() {
            out.push_str(&format!("{},{:0width$b},{}\n", self.basis.label(), s, c, width = self.n));
        }
        out
    }

    /// Parses [`SampleSet::to_csv`] output. The channel and seed are not part of
    /// the CSV and come back as ideal/unknown.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or(Error::EmptySamples)?;
        if header.replace(' ', "") != "basis,bitstring,count" {
            return Err(Error::InvalidParameter(format!("unexpected sample header {header:?}")));
        }
        let mut basis = None;
        let mut n = None;
        let mut counts = BTreeMap::new();
        for (row, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = |what: &str| Error::InvalidParameter(format!("sample row {}: {what}: {line:?}", row + 1));
            if fields.len() != 3 {
                return Err(bad("expected 3 fields"));
            }
            let b = Axis::from_label(fields[0]).ok_or_else(|| bad("unknown basis"))?;
            if *basis.get_or_insert(b) != b {
                return Err(bad("mixed bases"));
            }
            let width = fields[1].len();
            if *n.get_or_insert(width) != width || width == 0 {
                return Err(bad("inconsistent bitstring length"));
            }
            let s = usize::from_str_radix(fields[1], 2).map_err(|_| bad("bitstring is not binary"))?;
            let c: u64 = fields[2].parse().map_err(|_| bad("count is not a nonnegative integer"))?;
            *counts.entry(s).or_insert(0) += c;
        }
        let (basis, n) = basis.zip(n).ok_or(Error::EmptySamples)?;
        Self::new(basis, n, counts, None)
    }
}

/// Draws `shots` i.i.d. bitstrings from `|amplitude|^2` of `state` as given
/// (z basis). Deterministic for a fixed seed.
pub fn sample<T: Real>(state: &StateVector<T>, shots: u64, seed: u64) -> Result<SampleSet<T>> {
    sample_labeled(state, Axis::Z, shots, seed)
}

/// Rotates `state` so that `axis` is read out, then samples.
pub fn sample_in_basis<T: Real>(state: &StateVector<T>, axis: Axis, shots: u64, seed: u64) -> Result<SampleSet<T>> {
    sample_labeled(&rotate_measurement_basis(state, axis), axis, shots, seed)
}

fn sample_labeled<T: Real>(state: &StateVector<T>, basis: Axis, shots: u64, seed: u64) -> Result<SampleSet<T>> {
    let dist = ProbabilityDistribution::from_state(state)?;
    sample_distribution(&dist, basis, shots, seed)
}

/// Samples a non-negative distribution.
pub fn sample_distribution<T: Real>(dist: &ProbabilityDistribution<T>, basis: Axis, shots: u64, seed: u64) -> Result<SampleSet<T>> {
    if shots == 0 {
        return Err(Error::InvalidParameter("need at least one shot".into()));
    }
    if dist.kind == DistributionKind::Deconvolved {
        return Err(Error::InvalidParameter("cannot sample a deconvolved distribution".into()));
    }
    let mut cdf = Vec::with_capacity(dist.values.len());
    let mut acc = 0.0f64;
    for v in &dist.values {
        acc += v.to_f64_lossy();
        cdf.push(acc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = BTreeMap::new();
    for _ in 0..shots {
        let u = rng.random::<f64>() * acc;
        let idx = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        *counts.entry(idx).or_insert(0) += 1;
    }
    let mut set = SampleSet::new(basis, dist.n, counts, Some(seed))?;
    set.channel = DetectionChannel::ideal();
    Ok(set)
}

/// Exact forward channel `P' = M P`.
pub fn apply_detection_error<T: Real>(dist: &ProbabilityDistribution<T>, channel: &DetectionChannel<T>) -> Result<ProbabilityDistribution<T>> {
    let mut values = dist.values.clone();
    apply_product(&mut values, dist.n, &channel.single_spin());
    Ok(ProbabilityDistribution {
        n: dist.n,
        values,
        kind: DistributionKind::Observed,
    })
}

/// Sampled forward channel: every bit of every shot is read correctly with
/// probability `eps` (dark or bright), independently.
pub fn apply_detection_error_sampled<T: Real>(samples: &SampleSet<T>, channel: &DetectionChannel<T>, seed: u64) -> Result<SampleSet<T>> {
    if !samples.channel.is_ideal() {
        return Err(Error::InvalidParameter("samples already passed through a detection channel".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = samples.n;
    let fid: Vec<f64> = [0, 1].iter().map(|&b| channel.fidelity(b).to_f64_lossy()).collect();
    let mut counts = BTreeMap::new();
    for (s, c) in samples.iter() {
        for _ in 0..c {
            let mut out = s;
            for ion in 0..n {
                let m = ion_mask(n, ion);
                let bit = usize::from(s & m != 0);
                if rng.random::<f64>() >= fid[bit] {
                    out ^= m;
                }
            }
            *counts.entry(out).or_insert(0) += 1;
        }
    }
    let mut set = SampleSet::new(samples.basis, n, counts, Some(seed))?;
    set.channel = *channel;
    Ok(set)
}

/// `P = M^-1 P'` through the inverse single-spin factor. Negative entries are
/// kept; see [`ProbabilityDistribution::negativity`].
pub fn deconvolve<T: Real>(observed: &ProbabilityDistribution<T>, channel: &DetectionChannel<T>) -> Result<ProbabilityDistribution<T>> {
    let half = T::lit(0.5);
    if !(channel.eps_dark > half && channel.eps_bright > half) {
        return Err(Error::InvalidParameter("deconvolution requires efficiencies above 0.5".into()));
    }
    let mut values = observed.values.clone();
    apply_product(&mut values, observed.n, &channel.single_spin_inverse());
    Ok(ProbabilityDistribution {
        n: observed.n,
        values,
        kind: DistributionKind::Deconvolved,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::Complex;
    use crate::state::{prepare_initial_state, Direction};

    #[test]
    fn reference_diagonal_entry() {
        let m = confusion_matrix_entry(341usize, 341, 0.93f64, 10);
        assert!((m - 0.93f64.powi(10)).abs() < 1e-15);
        assert!((m - 0.483982).abs() < 1e-6);
        assert_eq!(confusion_matrix_entry(0usize, 15, 1.0f64, 4), 0.0);
        assert!((confusion_matrix_entry(0usize, 15, 0.9f64, 4) - 1e-4).abs() < 1e-15);
    }

    #[test]
    fn neel_delta_through_channel() {
        let mut v = vec![0.0f64; 1024];
        v[341] = 1.0;
        let p = ProbabilityDistribution::new(10, v, DistributionKind::Raw).unwrap();
        let ch = DetectionChannel::symmetric(0.93).unwrap();
        let o = apply_detection_error(&p, &ch).unwrap();
        assert!((o.get(341) - 0.93f64.powi(10)).abs() < 1e-12);
        for q in 0..10 {
            assert!((o.get(341 ^ (1 << q)) - 0.93f64.powi(9) * 0.07).abs() < 1e-12);
        }
        let back = deconvolve(&o, &ch).unwrap();
        assert!((back.get(341) - 1.0).abs() < 1e-12);
        assert_eq!(back.kind(), DistributionKind::Deconvolved);
    }

    #[test]
    fn deterministic_state_sampling() {
        let s = StateVector::<f64>::basis_state(2, 3).unwrap();
        let set = sample(&s, 500, 1).unwrap();
        assert_eq!(set.counts.get(&3), Some(&500));
        assert_eq!(set.total_shots, 500);
    }

    #[test]
    fn sampling_is_reproducible() {
        let s = prepare_initial_state::<f64>(3, Direction::PlusY).unwrap();
        let a = sample(&s, 1000, 42).unwrap();
        let b = sample(&s, 1000, 42).unwrap();
        let c = sample(&s, 1000, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.counts, c.counts);
    }

    #[test]
    fn csv_round_trip() {
        let amps = vec![Complex::new(0.6f64, 0.0), Complex::new(0.0, 0.0), Complex::new(0.0, 0.8), Complex::new(0.0, 0.0)];
        let s = StateVector::new(2, amps).unwrap();
        let set = sample_in_basis(&s, Axis::X, 200, 5).unwrap();
        let text = set.to_csv();
        assert!(text.starts_with("basis,bitstring,count\nx,"));
        let back = SampleSet::<f64>::from_csv(&text).unwrap();
        assert_eq!(back.counts, set.counts);
        assert_eq!(back.basis, Axis::X);
        assert!(SampleSet::<f64>::from_csv("basis,bitstring,count\nx,01,3\nz,10,1\n").is_err());
        assert!(SampleSet::<f64>::from_csv("basis,bitstring,count\nx,02,3\n").is_err());
    }

    #[test]
    fn rejects_bad_channels() {
        assert!(DetectionChannel::symmetric(0.5f64).is_err());
        assert!(DetectionChannel::symmetric(1.01f64).is_err());
        assert!(DetectionChannel::asymmetric(0.95f64, 0.9).is_ok());
        assert!(ProbabilityDistribution::new(1, vec![0.7f64, 0.7], DistributionKind::Raw).is_err());
        assert!(ProbabilityDistribution::new(1, vec![1.1f64, -0.1], DistributionKind::Raw).is_err());
        assert!(ProbabilityDistribution::new(1, vec![1.1f64, -0.1], DistributionKind::Deconvolved).is_ok());
    }

    #[test]
    fn sampled_channel_flip_rate() {
        let s = StateVector::<f64>::basis_state(4, 0b1010).unwrap();
        let set = sample(&s, 20000, 3).unwrap();
        let ch = DetectionChannel::symmetric(0.9).unwrap();
        let noisy = apply_detection_error_sampled(&set, &ch, 9).unwrap();
        let right = *noisy.counts.get(&0b1010).unwrap() as f64 / 20000.0;
        let expect = 0.9f64.powi(4);
        let sigma = (expect * (1.0 - expect) / 20000.0).sqrt();
        assert!((right - expect).abs() < 4.0 * sigma);
        assert!(apply_detection_error_sampled(&noisy, &ch, 1).is_err());
    }
}
