//! Time evolution under an exponentially ramped transverse field.
//!
//! Frequencies are in kHz and times in ms, so the propagator over a step `dt` is
//! `exp(-i 2 pi H dt)`. Integration uses the fourth-order commutator-free
//! Magnus scheme with two exponentials per step, each evaluated by a Lanczos
//! projection on the real rotated-frame operator.

use serde::{Deserialize, Serialize};

use crate::couplings::CouplingMatrix;
use crate::error::{Error, Result};
use crate::hamiltonian::{from_frame, to_frame, IsingFrame, IsingSign};
use crate::krylov::expm_krylov;
use crate::num::{Complex, Real};
use crate::spectrum::SpectrumScan;
use crate::state::StateVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RampShape {
    ExponentialDown,
    /// Down-ramp to the midpoint, then its mirror image back up.
    ExponentialDownThenReverse,
}

/// Transverse field `b(t)` in units of `J0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RampSchedule<T> {
    pub b_initial: T,
    /// Time constant (ms).
    pub tau: T,
    /// Total duration (ms).
    pub total_duration: T,
    pub shape: RampShape,
    pub freeze_then_measure: bool,
    /// kHz per unit of `b`; `None` uses the nearest-neighbor mean coupling `J0`.
    pub field_unit_khz: Option<T>,
}

impl<T: Real> RampSchedule<T> {
    /// Down-ramp from `b_initial` over the default `6 tau`.
    pub fn down(b_initial: T, tau: T) -> Self {
        Self {
            b_initial,
            tau,
            total_duration: T::lit(6.0) * tau,
            shape: RampShape::ExponentialDown,
            freeze_then_measure: true,
            field_unit_khz: None,
        }
    }

    /// Down-ramp over `6 tau` followed by its mirror image (total `12 tau`).
    pub fn down_then_reverse(b_initial: T, tau: T) -> Self {
        Self {
            total_duration: T::lit(12.0) * tau,
            shape: RampShape::ExponentialDownThenReverse,
            ..Self::down(b_initial, tau)
        }
    }

    pub fn with_field_unit(mut self, khz: T) -> Self {
        self.field_unit_khz = Some(khz);
        self
    }

    pub fn with_total_duration(mut self, total: T) -> Self {
        self.total_duration = total;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: T| x > T::zero() && x.is_finite();
        if !ok(self.b_initial) || !ok(self.tau) || !ok(self.total_duration) || self.field_unit_khz.is_some_and(|u| !ok(u)) {
            return Err(Error::InvalidParameter(format!(
                "ramp needs positive finite b_initial, tau and duration (got {}, {}, {})",
                self.b_initial, self.tau, self.total_duration
            )));
        }
        Ok(())
    }

    /// Midpoint of a reversed ramp, or the end of a plain down-ramp.
    pub fn turning_time(&self) -> T {
        match self.shape {
            RampShape::ExponentialDown => self.total_duration,
            RampShape::ExponentialDownThenReverse => self.total_duration / T::lit(2.0),
        }
    }

    /// `b(t)` in units of `J0`; clamped to `[0, total_duration]`.
    pub fn b(&self, t: T) -> T {
        let t = t.max(T::zero()).min(self.total_duration);
        let t = match self.shape {
            RampShape::ExponentialDown => t,
            RampShape::ExponentialDownThenReverse => {
                if t <= self.turning_time() {
                    t
                } else {
                    self.total_duration - t
                }
            }
        };
        self.b_initial * (-t / self.tau).exp()
    }

    /// Time of the field minimum.
    pub fn b_min_time(&self) -> T {
        self.turning_time()
    }

    /// `|d ln b / dt|`, constant `1/tau` for every leg.
    pub fn log_rate(&self) -> T {
        T::one() / self.tau
    }
}

/// Integrator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepControl<T> {
    /// Upper bound on `2 pi (sum |J| + N B(t)) dt`.
    pub max_phase: T,
    /// Smallest admissible step (ms).
    pub min_step: T,
    /// Error target of each Krylov exponential.
    pub krylov_tol: T,
    pub max_krylov: usize,
    /// Largest tolerated `| |psi| - 1 |`.
    pub norm_tolerance: T,
    /// Additional snapshot times (ms).
    pub snapshot_times: Vec<T>,
}

impl<T: Real> Default for StepControl<T> {
    fn default() -> Self {
        Self {
            max_phase: T::lit(0.1),
            min_step: T::lit(1e-9),
            krylov_tol: T::lit(1e-13).max(T::epsilon() * T::lit(100.0)),
            max_krylov: 30,
            norm_tolerance: T::lit(1e-6),
            snapshot_times: Vec::new(),
        }
    }
}

impl<T: Real> StepControl<T> {
    pub fn with_max_phase(mut self, max_phase: T) -> Self {
        self.max_phase = max_phase;
        self
    }

    pub fn with_snapshots(mut self, times: Vec<T>) -> Self {
        self.snapshot_times = times;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotKind {
    Initial,
    FieldMinimum,
    Final,
    Requested,
}

#[derive(Debug, Clone)]
pub struct Snapshot<T> {
    pub time: T,
    /// `b(t)` in units of `J0`.
    pub b: T,
    pub kind: SnapshotKind,
    pub state: StateVector<T>,
}

/// Result of [`evolve`].
#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    pub snapshots: Vec<Snapshot<T>>,
    pub schedule: RampSchedule<T>,
    pub sign: IsingSign,
    pub j0: T,
    pub steps: usize,
    pub max_norm_drift: T,
}

/// Serializable description of a trajectory without amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryManifest<T> {
    pub n: usize,
    pub schedule: RampSchedule<T>,
    pub sign: IsingSign,
    pub j0_khz: T,
    pub steps: usize,
    pub max_norm_drift: T,
    /// The up-leg is the exact mirror of the down-leg.
    pub mirror_symmetric_reversal: bool,
    pub snapshots: Vec<(SnapshotKind, T)>,
}

impl<T: Real> Trajectory<T> {
    pub fn final_state(&self) -> &StateVector<T> {
        &self.snapshots.last().expect("trajectory always has a final snapshot").state
    }

    pub fn snapshot(&self, kind: SnapshotKind) -> Option<&Snapshot<T>> {
        self.snapshots.iter().find(|s| s.kind == kind)
    }

    pub fn manifest(&self) -> TrajectoryManifest<T> {
        TrajectoryManifest {
            n: self.final_state().n(),
            schedule: self.schedule,
            sign: self.sign,
            j0_khz: self.j0,
            steps: self.steps,
            max_norm_drift: self.max_norm_drift,
            mirror_symmetric_reversal: self.schedule.shape == RampShape::ExponentialDownThenReverse,
            snapshots: self.snapshots.iter().map(|s| (s.kind, s.time)).collect(),
        }
    }
}

/// Evolves `state` under `sign * (sum J sx sx - B(t) sum sy)` with
/// `B(t) = b(t) J0`, where `J0` is the nearest-neighbor mean coupling.
/// Snapshots are kept at `t = 0`, at the field minimum, at the requested
/// times and at the end.
pub fn evolve<T: Real>(
    state: &StateVector<T>,
    couplings: &CouplingMatrix<T>,
    sign: IsingSign,
    schedule: &RampSchedule<T>,
    control: &StepControl<T>,
) -> Result<Trajectory<T>> {
    schedule.validate()?;
    let n = couplings.n();
    if state.n() != n {
        return Err(Error::DimensionMismatch {
            expected: 1 << n,
            found: state.dim(),
        });
    }
    if (state.norm() - T::one()).abs() > control.norm_tolerance {
        return Err(Error::InvalidParameter(format!("initial state not normalized (norm {})", state.norm())));
    }
    let j0 = schedule.field_unit_khz.unwrap_or_else(|| couplings.nearest_neighbor_mean());
    let sum_j = couplings.total_abs_coupling();
    let nn = T::from_usize_exact(n);
    let two_pi = T::PI() + T::PI();
    let total = schedule.total_duration;

    // (time, kind) stops, sorted and deduplicated
    let mut stops: Vec<(T, SnapshotKind)> = vec![(schedule.b_min_time(), SnapshotKind::FieldMinimum)];
    for &t in &control.snapshot_times {
        if t > T::zero() && t < total {
            stops.push((t, SnapshotKind::Requested));
        }
    }
    stops.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut frame = IsingFrame::new(couplings, T::zero(), sign)?;
    let mut psi = to_frame(state);
    let mut snapshots = vec![Snapshot {
        time: T::zero(),
        b: schedule.b(T::zero()),
        kind: SnapshotKind::Initial,
        state: state.clone(),
    }];
    let c = T::lit(3f64.sqrt() / 6.0);
    let half = T::lit(0.5);
    let a1 = T::lit((3.0 - 2.0 * 3f64.sqrt()) / 12.0);
    let a2 = T::lit((3.0 + 2.0 * 3f64.sqrt()) / 12.0);
    let field = |t: T| schedule.b(t) * j0;
    let max_dt = |t: T| {
        let bound = two_pi * (sum_j + nn * field(t).abs());
        if bound > T::zero() {
            control.max_phase / bound
        } else {
            T::infinity()
        }
    };
    let mut t = T::zero();
    let mut steps = 0usize;
    let mut max_drift = T::zero();
    let mut stop_idx = 0;
    let time_eps = T::lit(1e-12) * total.max(T::one());
    while t < total - time_eps {
        let target = stops.get(stop_idx).map(|s| s.0).unwrap_or(total).min(total);
        let mut dt = max_dt(t).min(target - t);
        dt = dt.min(max_dt(t + dt));
        let mut next = loop {
            // a short hop onto a snapshot time is fine; only halving can underflow
            if dt < control.min_step && dt < target - t - time_eps {
                return Err(Error::StepUnderflow {
                    time: t.to_f64_lossy(),
                    step: dt.to_f64_lossy(),
                });
            }
            let b1 = field(t + (half - c) * dt);
            let b2 = field(t + (half + c) * dt);
            let theta = two_pi * dt * half;
            frame.set_field(T::lit(2.0) * (a2 * b1 + a1 * b2));
            let apply = |x: &[Complex<T>], y: &mut [Complex<T>]| frame.apply(x, y);
            let first = expm_krylov(&apply, &psi, theta, control.krylov_tol, control.max_krylov);
            let Ok((mid, _)) = first else {
                dt *= half;
                continue;
            };
            frame.set_field(T::lit(2.0) * (a1 * b1 + a2 * b2));
            let apply = |x: &[Complex<T>], y: &mut [Complex<T>]| frame.apply(x, y);
            match expm_krylov(&apply, &mid, theta, control.krylov_tol, control.max_krylov) {
                Ok((out, _)) => break out,
                Err(_) => dt *= half,
            }
        };
        std::mem::swap(&mut psi, &mut next);
        t = if (target - (t + dt)).abs() <= time_eps { target } else { t + dt };
        steps += 1;
        let drift = (crate::state::norm(&psi) - T::one()).abs();
        max_drift = max_drift.max(drift);
        if drift > control.norm_tolerance {
            return Err(Error::NormDrift {
                time: t.to_f64_lossy(),
                drift: drift.to_f64_lossy(),
            });
        }
        while stop_idx < stops.len() && stops[stop_idx].0 <= t + time_eps {
            let (ts, kind) = stops[stop_idx];
            snapshots.push(Snapshot {
                time: ts,
                b: schedule.b(ts),
                kind,
                state: from_frame(n, psi.clone())?,
            });
            stop_idx += 1;
        }
    }
    // zero-length schedules still record the remaining stops
    while stop_idx < stops.len() {
        let (ts, kind) = stops[stop_idx];
        snapshots.push(Snapshot {
            time: ts,
            b: schedule.b(ts),
            kind,
            state: from_frame(n, psi.clone())?,
        });
        stop_idx += 1;
    }
    snapshots.push(Snapshot {
        time: total,
        b: schedule.b(total),
        kind: SnapshotKind::Final,
        state: from_frame(n, psi)?,
    });
    Ok(Trajectory {
        snapshots,
        schedule: *schedule,
        sign,
        j0,
        steps,
        max_norm_drift: max_drift,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RampRegime {
    Quench,
    QuasiAdiabatic,
}

impl RampRegime {
    pub fn label(self) -> &'static str {
        match self {
            RampRegime::Quench => "quench",
            RampRegime::QuasiAdiabatic => "quasi-adiabatic",
        }
    }
}

/// Comparison of the logarithmic ramp rate with the critical gap, both as
/// ordinary frequencies in kHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticityReport<T> {
    /// `|dB/dt / B| = 1/tau`.
    pub ramp_rate_khz: T,
    /// `Delta_c J0`.
    pub critical_gap_khz: T,
    pub regime: RampRegime,
}

pub fn adiabaticity_diagnostic<T: Real>(schedule: &RampSchedule<T>, scan: &SpectrumScan<T>) -> AdiabaticityReport<T> {
    let rate = schedule.log_rate();
    let gap = scan.critical_gap * scan.j0;
    AdiabaticityReport {
        ramp_rate_khz: rate,
        critical_gap_khz: gap,
        regime: if rate > gap { RampRegime::Quench } else { RampRegime::QuasiAdiabatic },
    }
}
