mod common;

use common::{dense_hamiltonian, random_couplings, to_dvector, C};
use lrtfim::couplings::{synthetic_power_law, CouplingMatrix};
use lrtfim::dynamics::{adiabaticity_diagnostic, evolve, RampRegime, RampSchedule, SnapshotKind, StepControl};
use lrtfim::hamiltonian::{apply_global_flip, IsingHamiltonian};
use lrtfim::spectrum::{critical_gap_scan, lowest_eigenpairs, log_grid};
use lrtfim::state::{prepare_initial_state, rotate_measurement_basis, unrotate_measurement_basis, StateVector};
use lrtfim::{Axis, Direction, IsingSign};
use nalgebra::{DMatrix, DVector};

fn infidelity(a: &StateVector<f64>, b: &StateVector<f64>) -> f64 {
    1.0 - a.fidelity(b)
}

/// Midpoint exponential steps of the dense Hamiltonian, each via a full eigendecomposition.
fn dense_evolve(psi: &StateVector<f64>, j: &CouplingMatrix<f64>, sign: IsingSign, s: &RampSchedule<f64>, steps: usize) -> DVector<C> {
    let j0 = j.nearest_neighbor_mean();
    let dt = s.total_duration / steps as f64;
    let mut v = to_dvector(psi);
    for k in 0..steps {
        let b = s.b((k as f64 + 0.5) * dt) * j0;
        let eig = dense_hamiltonian(j, b, sign).symmetric_eigen();
        let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| C::from_polar(1.0, -2.0 * std::f64::consts::PI * l * dt)));
        v = &eig.eigenvectors * (phases * (eig.eigenvectors.adjoint() * v));
    }
    v
}

#[test]
fn matches_dense_time_ordered_propagator() {
    let j = random_couplings(4, 21);
    let psi = prepare_initial_state::<f64>(4, Direction::PlusY).unwrap();
    for (sign, schedule) in [
        (IsingSign::Afm, RampSchedule::down(5.0, 0.2)),
        (IsingSign::Fm, RampSchedule::down_then_reverse(3.0, 0.1)),
    ] {
        let traj = evolve(&psi, &j, sign, &schedule, &StepControl::default()).unwrap();
        let want = dense_evolve(&psi, &j, sign, &schedule, 20_000);
        let got = to_dvector(traj.final_state());
        let overlap = got.dotc(&want).norm_sqr();
        assert!(1.0 - overlap < 1e-7, "{sign:?}: {overlap}");
        assert!((got - want).camax() < 1e-3);
    }
}

#[test]
fn norm_is_preserved_along_the_ramp() {
    let j = synthetic_power_law::<f64>(8, 1.0, 1.0).unwrap();
    let psi = prepare_initial_state::<f64>(8, Direction::PlusY).unwrap();
    let times: Vec<f64> = (1..12).map(|k| 0.1 * k as f64).collect();
    let traj = evolve(&psi, &j, IsingSign::Afm, &RampSchedule::down(5.0, 0.2), &StepControl::default().with_snapshots(times)).unwrap();
    assert!(traj.max_norm_drift < 1e-8);
    for s in &traj.snapshots {
        assert!((s.state.norm() - 1.0).abs() < 1e-8);
    }
    assert_eq!(traj.snapshots.len(), 14);
    assert!(traj.snapshots.windows(2).all(|w| w[0].time <= w[1].time));
}

#[test]
fn halving_the_step_is_stable() {
    let j = synthetic_power_law::<f64>(8, 1.0, 1.1).unwrap();
    let psi = prepare_initial_state::<f64>(8, Direction::PlusY).unwrap();
    let s = RampSchedule::down(5.0, 0.4);
    let a = evolve(&psi, &j, IsingSign::Afm, &s, &StepControl::default()).unwrap();
    let b = evolve(&psi, &j, IsingSign::Afm, &s, &StepControl::default().with_max_phase(0.05)).unwrap();
    assert!(b.steps > a.steps);
    assert!(infidelity(a.final_state(), b.final_state()) < 1e-8);
}

#[test]
fn fourth_order_convergence() {
    let j = random_couplings(5, 2);
    let psi = prepare_initial_state::<f64>(5, Direction::PlusY).unwrap();
    let s = RampSchedule::down(5.0, 0.3);
    let run = |phase: f64| {
        let t = evolve(&psi, &j, IsingSign::Afm, &s, &StepControl::default().with_max_phase(phase)).unwrap();
        to_dvector(t.final_state())
    };
    let reference = run(0.02);
    let e1 = (run(1.6) - &reference).norm();
    let e2 = (run(0.8) - &reference).norm();
    let ratio = e1 / e2;
    assert!(ratio > 10.0 && ratio < 24.0, "error ratio {ratio}");
}

#[test]
fn global_flip_expectation_is_conserved() {
    let j = synthetic_power_law::<f64>(7, 1.0, 0.9).unwrap();
    // a generic state with nonzero flip expectation
    let mut psi = prepare_initial_state::<f64>(7, Direction::PlusY).unwrap();
    psi.apply_single(2, &lrtfim::state::rx(0.7));
    psi.apply_single(5, &lrtfim::state::ry(0.3));
    let flip = |s: &StateVector<f64>| s.inner(&apply_global_flip(s));
    let times: Vec<f64> = (1..8).map(|k| 0.2 * k as f64).collect();
    let traj = evolve(&psi, &j, IsingSign::Afm, &RampSchedule::down(5.0, 0.3), &StepControl::default().with_snapshots(times)).unwrap();
    let u0 = flip(&psi);
    assert!(u0.norm() > 0.1);
    for s in &traj.snapshots {
        assert!((flip(&s.state) - u0).norm() < 1e-7);
    }
}

#[test]
fn slow_ramp_follows_the_ground_state() {
    let j = synthetic_power_law::<f64>(6, 1.0, 1.0).unwrap();
    let psi = prepare_initial_state::<f64>(6, Direction::PlusY).unwrap();
    let schedule = RampSchedule::down(5.0, 50.0);
    let traj = evolve(&psi, &j, IsingSign::Afm, &schedule, &StepControl::default()).unwrap();
    let b_end = schedule.b(schedule.total_duration);
    let h = IsingHamiltonian::new(j, b_end, IsingSign::Afm);
    let pairs = lowest_eigenpairs(&h, 2).unwrap();
    let overlap: f64 = pairs.iter().map(|p| p.state.fidelity(traj.final_state())).sum();
    assert!(overlap >= 0.9, "overlap {overlap}");
}

#[test]
fn field_only_evolution_keeps_plus_y() {
    let zero = CouplingMatrix::new(4, vec![0.0; 16]).unwrap();
    let psi = prepare_initial_state::<f64>(4, Direction::PlusY).unwrap();
    let s = RampSchedule::down(2.0, 0.5).with_field_unit(1.0);
    let traj = evolve(&psi, &zero, IsingSign::Afm, &s, &StepControl::default()).unwrap();
    for ion in 0..4 {
        assert!((traj.final_state().expectation_pauli(ion, Axis::Y) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn frozen_spins_stay_frozen() {
    let j = synthetic_power_law::<f64>(5, 1.0, 1.0).unwrap();
    let psi = prepare_initial_state::<f64>(5, Direction::PlusY).unwrap();
    let traj = evolve(&psi, &j, IsingSign::Afm, &RampSchedule::down(5.0, 0.3), &StepControl::default()).unwrap();
    let last = traj.final_state().clone();
    let off = CouplingMatrix::new(5, vec![0.0; 25]).unwrap();
    let idle = evolve(&last, &off, IsingSign::Afm, &RampSchedule::down(5.0, 1.0), &StepControl::default()).unwrap();
    assert!(infidelity(idle.final_state(), &last) < 1e-14);
    for (a, b) in idle.final_state().amplitudes().iter().zip(last.amplitudes()) {
        assert!((a - b).norm() < 1e-12);
    }
}

#[test]
fn reversal_snapshots_and_manifest() {
    let j = synthetic_power_law::<f64>(4, 1.0, 1.0).unwrap();
    let psi = prepare_initial_state::<f64>(4, Direction::PlusY).unwrap();
    let s = RampSchedule::down_then_reverse(5.0, 0.1);
    let traj = evolve(&psi, &j, IsingSign::Afm, &s, &StepControl::default()).unwrap();
    let mid = traj.snapshot(SnapshotKind::FieldMinimum).unwrap();
    assert!((mid.time - 0.6).abs() < 1e-12);
    assert!((mid.b - 5.0 * (-6.0f64).exp()).abs() < 1e-12);
    let end = traj.snapshot(SnapshotKind::Final).unwrap();
    assert!((end.b - 5.0).abs() < 1e-12);
    let m = traj.manifest();
    assert!(m.mirror_symmetric_reversal);
    assert_eq!(m.snapshots.len(), 3);
    assert_eq!(m.n, 4);
}

#[test]
fn adiabaticity_labels() {
    let j = synthetic_power_law::<f64>(10, 1.0, 0.76).unwrap();
    let scan = critical_gap_scan(&j, &log_grid(0.01, 5.0, 60)).unwrap();
    let fast = adiabaticity_diagnostic(&RampSchedule::down(5.0, 0.4), &scan);
    assert_eq!(fast.regime, RampRegime::Quench);
    assert_eq!(fast.regime.label(), "quench");
    assert!((fast.ramp_rate_khz - 2.5).abs() < 1e-12);
    let slow = adiabaticity_diagnostic(&RampSchedule::down(5.0, 1e6), &scan);
    assert_eq!(slow.regime.label(), "quasi-adiabatic");
    let s = RampSchedule::down(5.0f64, 0.4);
    for t in [0.1, 0.7, 2.0] {
        let h = 1e-6;
        let d = ((s.b(t + h)).ln() - (s.b(t - h)).ln()) / (2.0 * h);
        assert!((d.abs() - s.log_rate()).abs() < 1e-6);
    }
}

#[test]
fn measurement_rotations() {
    let plus = prepare_initial_state::<f64>(5, Direction::PlusY).unwrap();
    let p = rotate_measurement_basis(&plus, Axis::Y).probabilities();
    assert!((p[31] - 1.0).abs() < 1e-12);
    let minus = prepare_initial_state::<f64>(2, Direction::MinusY).unwrap();
    assert!((minus.expectation_pauli(0, Axis::Y) + 1.0).abs() < 1e-12);
    assert!((minus.expectation_pauli(1, Axis::Y) + 1.0).abs() < 1e-12);
    let one = prepare_initial_state::<f64>(1, Direction::PlusY).unwrap();
    let a = one.amplitudes();
    assert!((a[1] / a[0] - C::new(0.0, 1.0)).norm() < 1e-12);

    let updown = unrotate_measurement_basis(&StateVector::<f64>::basis_state(3, 0b101).unwrap(), Axis::X);
    assert!((rotate_measurement_basis(&updown, Axis::X).probabilities()[0b101] - 1.0).abs() < 1e-12);
    let r = lrtfim::hamiltonian::apply_global_flip(&plus);
    let round = unrotate_measurement_basis(&rotate_measurement_basis(&r, Axis::X), Axis::X);
    for (x, y) in round.amplitudes().iter().zip(r.amplitudes()) {
        assert!((x - y).norm() < 1e-12);
    }
    assert_eq!(rotate_measurement_basis(&r, Axis::Z).amplitudes(), r.amplitudes());
}
