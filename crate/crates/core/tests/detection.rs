mod common;

use std::collections::BTreeMap;

use common::dense_confusion;
use lrtfim::detection::{
    apply_detection_error, apply_detection_error_sampled, confusion_matrix_entry, deconvolve, sample, sample_distribution,
    DetectionChannel, DistributionKind, ProbabilityDistribution, SampleSet,
};
use lrtfim::state::{prepare_initial_state, StateVector};
use lrtfim::{Axis, Direction};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_distribution(n: usize, seed: u64) -> ProbabilityDistribution<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..1usize << n).map(|_| rng.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    ProbabilityDistribution::new(n, raw.iter().map(|x| x / total).collect(), DistributionKind::Raw).unwrap()
}

#[test]
fn product_structure_matches_dense_oracle() {
    for n in 1..=4 {
        for (d, b) in [(0.93, 0.93), (0.9, 0.97), (1.0, 1.0), (0.51, 0.8)] {
            let ch = DetectionChannel::asymmetric(d, b).unwrap();
            let m = dense_confusion(n, d, b);
            let p = random_distribution(n, n as u64);
            let got = apply_detection_error(&p, &ch).unwrap();
            let want = &m * DVector::from_column_slice(p.values());
            for (a, w) in got.values().iter().zip(want.iter()) {
                assert!((a - w).abs() < 1e-12);
            }
            let inv = m.clone().try_inverse().unwrap();
            let back = deconvolve(&got, &ch).unwrap();
            let want_back = inv * DVector::from_column_slice(got.values());
            for (a, w) in back.values().iter().zip(want_back.iter()) {
                assert!((a - w).abs() < 1e-12);
            }
            for o in 0..1usize << n {
                for t in 0..1usize << n {
                    assert!((ch.entry(o, t, n) - m[(o, t)]).abs() < 1e-15);
                    if d == b {
                        assert!((confusion_matrix_entry(o, t, d, n) - m[(o, t)]).abs() < 1e-15);
                    }
                }
            }
        }
    }
}

#[test]
fn confusion_entries() {
    assert!((confusion_matrix_entry(341, 341, 0.93f64, 10) - 0.93f64.powi(10)).abs() < 1e-15);
    assert!((0.93f64.powi(10) - 0.48398).abs() < 1e-5);
    assert_eq!(confusion_matrix_entry(5, 5, 1.0f64, 4), 1.0);
    assert_eq!(confusion_matrix_entry(5, 4, 1.0f64, 4), 0.0);
    assert!((confusion_matrix_entry(0, 15, 0.9f64, 4) - 0.1f64.powi(4)).abs() < 1e-15);
}

#[test]
fn rows_and_columns_conserve_probability() {
    let ch = DetectionChannel::symmetric(0.93).unwrap();
    for n in [1, 5, 12] {
        let dim = 1usize << n;
        // columns: each delta distribution stays normalized
        for t in [0, dim / 3, dim - 1] {
            let mut v = vec![0.0; dim];
            v[t] = 1.0;
            let out = apply_detection_error(&ProbabilityDistribution::new(n, v, DistributionKind::Raw).unwrap(), &ch).unwrap();
            assert!((out.values().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        // rows: the symmetric channel maps the uniform distribution to itself
        let u = ProbabilityDistribution::new(n, vec![1.0 / dim as f64; dim], DistributionKind::Raw).unwrap();
        let out = apply_detection_error(&u, &ch).unwrap();
        assert!(out.values().iter().all(|x| (x * dim as f64 - 1.0).abs() < 1e-12));
    }
}

#[test]
fn forward_channel_contracts_total_variation() {
    let ch = DetectionChannel::asymmetric(0.9, 0.95).unwrap();
    for seed in 0..20 {
        let (p, q) = (random_distribution(6, seed), random_distribution(6, seed + 100));
        let (mp, mq) = (apply_detection_error(&p, &ch).unwrap(), apply_detection_error(&q, &ch).unwrap());
        assert!(mp.total_variation(&mq) <= p.total_variation(&q) + 1e-15);
    }
}

#[test]
fn round_trip_at_ten_spins() {
    let ch = DetectionChannel::symmetric(0.93).unwrap();
    let p = random_distribution(10, 7);
    let back = deconvolve(&apply_detection_error(&p, &ch).unwrap(), &ch).unwrap();
    let err = back.values().iter().zip(p.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 1e-10);
    assert_eq!(back.kind(), DistributionKind::Deconvolved);

    let ideal = DetectionChannel::ideal();
    assert_eq!(apply_detection_error(&p, &ideal).unwrap().values(), p.values());
    assert_eq!(deconvolve(&p, &ideal).unwrap().values(), p.values());
}

#[test]
fn neel_delta_closed_form() {
    let ch = DetectionChannel::symmetric(0.93).unwrap();
    let mut v = vec![0.0; 1024];
    v[341] = 1.0;
    let out = apply_detection_error(&ProbabilityDistribution::new(10, v, DistributionKind::Raw).unwrap(), &ch).unwrap();
    assert!((out.get(341) - 0.93f64.powi(10)).abs() < 1e-15);
    for q in 0..10 {
        assert!((out.get(341 ^ (1 << q)) - 0.93f64.powi(9) * 0.07).abs() < 1e-15);
    }
}

#[test]
fn invalid_efficiency_is_rejected() {
    assert!(DetectionChannel::symmetric(0.5f64).is_err());
    assert!(DetectionChannel::symmetric(1.01f64).is_err());
    assert!(DetectionChannel::asymmetric(0.9f64, 0.2).is_err());
}

#[test]
fn sampling_is_deterministic_and_born() {
    let up = StateVector::<f64>::basis_state(2, 3).unwrap();
    let s = sample(&up, 500, 1).unwrap();
    assert_eq!(s.counts.get(&3), Some(&500));

    let plus = prepare_initial_state::<f64>(1, Direction::PlusY).unwrap();
    let s = sample(&plus, 10_000, 2).unwrap();
    let p1 = *s.counts.get(&1).unwrap_or(&0) as f64 / 10_000.0;
    assert!((p1 - 0.5).abs() < 3.0 * (0.25f64 / 10_000.0).sqrt());
    assert_eq!(sample(&plus, 100, 9).unwrap(), sample(&plus, 100, 9).unwrap());
}

#[test]
fn chi_square_against_born_probabilities() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let amps = (0..16).map(|_| num_complex::Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
    let mut psi = StateVector::new(4, amps).unwrap();
    psi.normalize();
    let shots = 1_000_000u64;
    let s = sample(&psi, shots, 11).unwrap();
    assert_eq!(s.total_shots, shots);
    let p = psi.probabilities();
    let chi2: f64 = (0..16)
        .map(|i| {
            let expected = p[i] * shots as f64;
            let seen = *s.counts.get(&i).unwrap_or(&0) as f64;
            (seen - expected).powi(2) / expected
        })
        .sum();
    // 15 degrees of freedom, 0.1% upper tail
    assert!(chi2 < 37.7, "chi2 = {chi2}");
}

#[test]
fn deconvolved_estimate_is_unbiased() {
    let n = 6;
    let mut v = vec![0.01 / 62.0; 64];
    v[0b010101] = 0.5;
    v[0b101010] = 0.49;
    let truth = ProbabilityDistribution::new(n, v, DistributionKind::Raw).unwrap();
    let ch = DetectionChannel::symmetric(0.93).unwrap();
    let estimates: Vec<f64> = (0..120u64)
        .map(|seed| {
            let raw = sample_distribution(&truth, Axis::X, 4000, seed).unwrap();
            let noisy = apply_detection_error_sampled(&raw, &ch, 1000 + seed).unwrap();
            let observed = ProbabilityDistribution::from_samples(&noisy).unwrap();
            deconvolve(&observed, &ch).unwrap().get(0b010101)
        })
        .collect();
    let k = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / k;
    let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (k - 1.0);
    assert!((mean - 0.5).abs() < 3.0 * (var / k).sqrt(), "mean {mean}");
}

#[test]
fn finite_shot_deconvolution_sharpens_peaks_and_flags_negatives() {
    let n = 8;
    let mut v = vec![0.1 / 254.0; 256];
    v[0b0101_0101] = 0.45;
    v[0b1010_1010] = 0.45;
    let truth = ProbabilityDistribution::new(n, v, DistributionKind::Raw).unwrap();
    let ch = DetectionChannel::symmetric(0.93).unwrap();
    let raw = sample_distribution(&truth, Axis::X, 4000, 5).unwrap();
    let noisy = apply_detection_error_sampled(&raw, &ch, 6).unwrap();
    assert_eq!(noisy.total_shots, 4000);
    assert_eq!(noisy.channel, ch);
    let observed = ProbabilityDistribution::from_samples(&noisy).unwrap();
    let fixed = deconvolve(&observed, &ch).unwrap();
    assert!(fixed.get(0b0101_0101) > observed.get(0b0101_0101));
    assert!(fixed.get(0b1010_1010) > observed.get(0b1010_1010));
    assert!((fixed.values().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    let neg = fixed.negativity();
    assert!(neg.count > 0 && neg.min_value < 0.0);
    assert!(ProbabilityDistribution::new(1, vec![1.2, -0.2], DistributionKind::Observed).is_err());
    assert!(ProbabilityDistribution::new(1, vec![1.2, -0.2], DistributionKind::Deconvolved).is_ok());
}

#[test]
fn sample_csv_round_trip() {
    let mut counts = BTreeMap::new();
    counts.insert(0b0101, 7u64);
    counts.insert(0b1111, 3);
    let s = SampleSet::<f64>::new(Axis::X, 4, counts, Some(42)).unwrap();
    let csv = s.to_csv();
    assert!(csv.starts_with("basis,bitstring,count\n"));
    assert!(csv.contains("x,0101,7"));
    let back = SampleSet::<f64>::from_csv(&csv).unwrap();
    assert_eq!(back.counts, s.counts);
    assert_eq!(back.basis, Axis::X);
    assert!(SampleSet::<f64>::new(Axis::X, 2, BTreeMap::from([(4, 1)]), None).is_err());
}
