//! The five experiment pipelines and the standalone deconvolution tool.

use std::fmt::Write as _;
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use lrtfim::couplings::{
    axial_freq_for_alpha, physical_couplings, synthetic_power_law, CouplingMatrix, DetuningRule, DriveParameters,
};
use lrtfim::detection::{
    apply_detection_error, deconvolve, sample_distribution, DetectionChannel, ProbabilityDistribution, SampleSet,
};
use lrtfim::dynamics::{evolve, RampSchedule, SnapshotKind, StepControl, Trajectory};
use lrtfim::ion_chain::TrapParameters;
use lrtfim::observables::{summarize_x, transverse_magnetization_histogram, XBasisSummary};
use lrtfim::spectrum::{critical_gap_scan, log_grid};
use lrtfim::state::{prepare_initial_state, rotate_measurement_basis, StateVector};
use lrtfim::{Axis, Direction, IsingSign};
use serde::Serialize;

use crate::config::{Mode, RunConfig};
use crate::error::{CliError, CliResult, ErrorKind};
use crate::manifest::{sha256_hex, software_version, ArtifactWriter, RunManifest};
use crate::pool::pool_map;

/// A coupling matrix with the parameters that produced it.
#[derive(Debug, Clone)]
pub struct LabeledCouplings {
    pub label: String,
    /// Fitted exponent (physical) or the requested one (synthetic).
    pub alpha: f64,
    pub axial_mhz: Option<f64>,
    pub matrix: CouplingMatrix<f64>,
}

/// Builds every coupling matrix named by the config, in order.
pub fn resolve_couplings(config: &RunConfig) -> CliResult<Vec<LabeledCouplings>> {
    if let Some(s) = &config.couplings.synthetic {
        return s
            .alphas
            .iter()
            .map(|&alpha| {
                Ok(LabeledCouplings {
                    label: format!("alpha_{alpha}"),
                    alpha,
                    axial_mhz: None,
                    matrix: synthetic_power_law(s.n, s.j0_khz, alpha)?,
                })
            })
            .collect();
    }
    let p = config
        .couplings
        .physical
        .as_ref()
        .ok_or_else(|| CliError::new(ErrorKind::Config, "no coupling source"))?;
    let detuning = p.detuning_mhz.map(DetuningRule::Explicit).unwrap_or(DetuningRule::ComPlus3EtaOmega);
    let drive = DriveParameters::new(p.rabi_khz, detuning)?;
    let trap = |axial: f64| TrapParameters::new(p.n, axial, p.transverse_com_mhz, p.recoil_khz);
    let mut axials = p.axial_freqs_mhz.clone();
    for &alpha in &p.target_alphas {
        let [lo, hi] = p.axial_bracket_mhz;
        axials.push(axial_freq_for_alpha(&trap(lo)?, &drive, alpha, lo, hi)?);
    }
    axials
        .into_iter()
        .map(|axial| {
            let matrix = physical_couplings(&trap(axial)?, &drive)?;
            let alpha = matrix.fit().map(|f| f.alpha).unwrap_or(f64::NAN);
            Ok(LabeledCouplings {
                label: format!("axial_{axial:.6}MHz"),
                alpha,
                axial_mhz: Some(axial),
                matrix,
            })
        })
        .collect()
}

fn coupling_digest(couplings: &[LabeledCouplings]) -> String {
    let text: String = couplings.iter().map(|c| c.matrix.to_csv()).collect();
    sha256_hex(text.as_bytes())
}

/// Executes the configured pipeline, writing artifacts and `manifest.json`
/// into `dir`. The config must already be resolved.
pub fn run(config: &RunConfig, dir: &Path) -> CliResult<RunManifest> {
    let started = Instant::now();
    let couplings = resolve_couplings(config)?;
    let mut out = ArtifactWriter::create(dir)?;
    let mut table = String::from("label,alpha,axial_MHz,J0_kHz,alpha_fit\n");
    for c in &couplings {
        let fit = c.matrix.fit().map(|f| f.alpha.to_string()).unwrap_or_default();
        let axial = c.axial_mhz.map(|a| a.to_string()).unwrap_or_default();
        writeln!(table, "{},{},{},{},{}", c.label, c.alpha, axial, c.matrix.nearest_neighbor_mean(), fit).unwrap();
        out.write(&format!("couplings/{}.csv", c.label), c.matrix.to_csv())?;
    }
    out.write("couplings.csv", table)?;
    match config.mode() {
        Mode::SpectrumScan => spectrum_scan(config, &couplings, &mut out)?,
        Mode::Quench => quench(config, &couplings, &mut out)?,
        Mode::CoherenceReversal => coherence_reversal(config, &couplings, &mut out)?,
        Mode::RampSpeedSweep => ramp_speed_sweep(config, &couplings, &mut out)?,
        Mode::FmComparison => fm_comparison(config, &couplings, &mut out)?,
    }
    let manifest = RunManifest {
        mode: config.mode().label().into(),
        config: serde_json::to_value(config).expect("config serializes"),
        config_sha256: config.digest(),
        coupling_sha256: coupling_digest(&couplings),
        software_version: software_version(),
        started_unix: unix_now(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        artifacts: out.into_artifacts(),
    };
    manifest.save(dir)?;
    Ok(manifest)
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

#[derive(Serialize)]
struct FigureDescriptor<'a> {
    mode: &'a str,
    table: &'a str,
    x: &'a str,
    y: Vec<&'a str>,
    group_by: Option<&'a str>,
    note: &'a str,
}

fn channel(config: &RunConfig) -> CliResult<DetectionChannel<f64>> {
    if config.epsilon == 1.0 {
        Ok(DetectionChannel::ideal())
    } else {
        Ok(DetectionChannel::symmetric(config.epsilon)?)
    }
}

fn control(config: &RunConfig) -> StepControl<f64> {
    StepControl::default().with_max_phase(config.schedule.max_phase)
}

fn distribution(state: &StateVector<f64>, axis: Axis) -> CliResult<ProbabilityDistribution<f64>> {
    Ok(ProbabilityDistribution::from_state(&rotate_measurement_basis(state, axis))?)
}

/// What the detector reports for an exact distribution: the channel output,
/// either exactly or as `shots` seeded samples.
struct Detected {
    samples: Option<SampleSet<f64>>,
    observed: ProbabilityDistribution<f64>,
}

fn detect(config: &RunConfig, exact: &ProbabilityDistribution<f64>, axis: Axis, stream: u64) -> CliResult<Detected> {
    let ch = channel(config)?;
    let through = apply_detection_error(exact, &ch)?;
    if config.shots == 0 {
        return Ok(Detected {
            samples: None,
            observed: through,
        });
    }
    let seed = config.seed.expect("validated: sampling requires a seed").wrapping_add(stream);
    let mut samples = sample_distribution(&through, axis, config.shots, seed)?;
    samples.channel = ch;
    let observed = ProbabilityDistribution::from_samples(&samples)?;
    Ok(Detected {
        samples: Some(samples),
        observed,
    })
}

fn deconvolved(config: &RunConfig, d: &Detected) -> CliResult<ProbabilityDistribution<f64>> {
    Ok(deconvolve(&d.observed, &channel(config)?)?)
}

fn spectrum_scan(config: &RunConfig, couplings: &[LabeledCouplings], out: &mut ArtifactWriter) -> CliResult<()> {
    let grid = log_grid(config.scan.b_min, config.scan.b_max, config.scan.points);
    let scans = pool_map(couplings, config.worker_count(), |_, c| critical_gap_scan(&c.matrix, &grid));
    let mut summary = String::from("label,alpha,J0_kHz,B_c/J0,Delta_c/J0\n");
    let mut gaps = String::from("label,alpha,B/J0,gap/J0\n");
    for (c, scan) in couplings.iter().zip(scans) {
        let scan = scan?;
        writeln!(summary, "{},{},{},{},{}", c.label, c.alpha, scan.j0, scan.critical_field, scan.critical_gap).unwrap();
        for (b, g) in scan.b_grid.iter().zip(&scan.gaps) {
            writeln!(gaps, "{},{},{},{}", c.label, c.alpha, b, g).unwrap();
        }
    }
    out.write("spectrum.csv", summary)?;
    out.write("gaps.csv", gaps)?;
    out.write_json(
        "figure.json",
        &FigureDescriptor {
            mode: "spectrum_scan",
            table: "spectrum.csv",
            x: "alpha",
            y: vec!["B_c/J0", "Delta_c/J0"],
            group_by: None,
            note: "gap to the first excited state coupled to the ground state by the field term; gaps.csv holds the full curves",
        },
    )
}

fn run_ramp(
    config: &RunConfig,
    c: &LabeledCouplings,
    schedule: RampSchedule<f64>,
    sign: IsingSign,
    start: Direction,
) -> CliResult<Trajectory<f64>> {
    let psi = prepare_initial_state::<f64>(c.matrix.n(), start)?;
    Ok(evolve(&psi, &c.matrix, sign, &schedule, &control(config))?)
}

/// Appends tidy rows, each starting with `prefix` (already comma-terminated).
fn push_summary(csv: &mut String, prefix: &str, source: &str, s: &XBasisSummary<f64>) {
    for r in s.tidy_rows() {
        let se = r.stderr.map(|v| v.to_string()).unwrap_or_default();
        writeln!(csv, "{prefix}{source},{},{},{},{se}", r.quantity, r.index, r.value).unwrap();
    }
}

struct QuenchResult {
    trajectory: Trajectory<f64>,
    ideal: XBasisSummary<f64>,
    measured: XBasisSummary<f64>,
    samples: Option<SampleSet<f64>>,
}

fn quench_one(config: &RunConfig, c: &LabeledCouplings, tau: f64, stream: u64) -> CliResult<QuenchResult> {
    let schedule = RampSchedule::down(config.schedule.b_initial, tau);
    let trajectory = run_ramp(config, c, schedule, IsingSign::Afm, Direction::PlusY)?;
    let exact = distribution(trajectory.final_state(), Axis::X)?;
    let detected = detect(config, &exact, Axis::X, stream)?;
    let mitigated = deconvolved(config, &detected)?;
    Ok(QuenchResult {
        ideal: summarize_x(&exact, Some(&c.matrix))?,
        measured: summarize_x(&mitigated, Some(&c.matrix))?,
        samples: detected.samples,
        trajectory,
    })
}

fn quench(config: &RunConfig, couplings: &[LabeledCouplings], out: &mut ArtifactWriter) -> CliResult<()> {
    let tau = config.schedule.tau_ms;
    let results = pool_map(couplings, config.worker_count(), |i, c| quench_one(config, c, tau, i as u64));
    let mut table = String::from("label,alpha,source,quantity,index,value,stderr\n");
    let mut structure = String::from("label,alpha,k,S_ideal,S_deconvolved\n");
    let mut trajectories = Vec::new();
    for (c, r) in couplings.iter().zip(results) {
        let r = r?;
        let prefix = format!("{},{},", c.label, c.alpha);
        push_summary(&mut table, &prefix, "ideal", &r.ideal);
        push_summary(&mut table, &prefix, "deconvolved", &r.measured);
        let (si, sm) = (&r.ideal.structure, &r.measured.structure);
        for ((k, a), b) in si.k_values.iter().zip(&si.s_values).zip(&sm.s_values) {
            writeln!(structure, "{},{},{k},{a},{b}", c.label, c.alpha).unwrap();
        }
        if let Some(s) = &r.samples {
            out.write(&format!("samples/{}.csv", c.label), s.to_csv())?;
        }
        trajectories.push((c.label.clone(), r.trajectory.manifest()));
    }
    out.write("observables.csv", table)?;
    out.write("structure.csv", structure)?;
    out.write_json("trajectories.json", &trajectories)?;
    out.write_json(
        "figure.json",
        &FigureDescriptor {
            mode: "quench",
            table: "structure.csv",
            x: "k",
            y: vec!["S_ideal", "S_deconvolved"],
            group_by: Some("alpha"),
            note: "observables.csv holds correlations, Neel population, entropy and Binder cumulants per coupling set",
        },
    )
}

fn coherence_reversal(config: &RunConfig, couplings: &[LabeledCouplings], out: &mut ArtifactWriter) -> CliResult<()> {
    let tau = config.schedule.tau_ms;
    let ch = channel(config)?;
    let results = pool_map(couplings, config.worker_count(), |_, c| {
        run_ramp(config, c, RampSchedule::down_then_reverse(config.schedule.b_initial, tau), IsingSign::Afm, Direction::PlusY)
    });
    let mut table = String::from("label,alpha,stage,time_ms,b/J0,Sy/N_ideal,Sy/N_degraded\n");
    let mut hist = String::from("label,alpha,stage,Sy,p_ideal,p_degraded\n");
    let mut trajectories = Vec::new();
    for (i, (c, r)) in couplings.iter().zip(results).enumerate() {
        let traj = r?;
        for (stage, kind) in [("initial", SnapshotKind::Initial), ("turning_point", SnapshotKind::FieldMinimum), ("final", SnapshotKind::Final)] {
            let snap = traj.snapshot(kind).expect("reversal keeps initial, turning and final snapshots");
            let exact = distribution(&snap.state, Axis::Y)?;
            let degraded = if config.shots == 0 {
                apply_detection_error(&exact, &ch)?
            } else {
                detect(config, &exact, Axis::Y, 3 * i as u64 + kind_stream(kind))?.observed
            };
            let (hi, hd) = (transverse_magnetization_histogram(&exact)?, transverse_magnetization_histogram(&degraded)?);
            writeln!(table, "{},{},{stage},{},{},{},{}", c.label, c.alpha, snap.time, snap.b, hi.mean_fraction, hd.mean_fraction).unwrap();
            for ((v, a), b) in hi.values.iter().zip(&hi.probabilities).zip(&hd.probabilities) {
                writeln!(hist, "{},{},{stage},{v},{a},{b}", c.label, c.alpha).unwrap();
            }
        }
        trajectories.push((c.label.clone(), traj.manifest()));
    }
    out.write("reversal.csv", table)?;
    out.write("histograms.csv", hist)?;
    out.write_json("trajectories.json", &trajectories)?;
    out.write_json(
        "figure.json",
        &FigureDescriptor {
            mode: "coherence_reversal",
            table: "histograms.csv",
            x: "Sy",
            y: vec!["p_ideal", "p_degraded"],
            group_by: Some("stage"),
            note: "reversal.csv lists the recovered Sy/N; degraded values pass the detection channel without deconvolution",
        },
    )
}

fn kind_stream(kind: SnapshotKind) -> u64 {
    match kind {
        SnapshotKind::Initial => 0,
        SnapshotKind::FieldMinimum => 1,
        _ => 2,
    }
}

fn ramp_speed_sweep(config: &RunConfig, couplings: &[LabeledCouplings], out: &mut ArtifactWriter) -> CliResult<()> {
    let taus = &config.schedule.tau_grid_ms;
    let jobs: Vec<(usize, f64)> = (0..couplings.len()).flat_map(|c| taus.iter().map(move |&t| (c, t))).collect();
    let results = pool_map(&jobs, config.worker_count(), |i, &(c, tau)| quench_one(config, &couplings[c], tau, i as u64));
    let mut table = String::from("label,alpha,tau_ms,six_tau_ms,g_s_ideal,g_s_scaled_ideal,g_s_scaled_deconvolved,neel_population_ideal\n");
    let mut failures = Vec::new();
    for (&(c, tau), r) in jobs.iter().zip(results) {
        let c = &couplings[c];
        match r {
            Ok(r) => {
                let fmt = |b: Option<f64>| b.map(|v| v.to_string()).unwrap_or_default();
                writeln!(
                    table,
                    "{},{},{tau},{},{},{},{},{}",
                    c.label,
                    c.alpha,
                    6.0 * tau,
                    fmt(r.ideal.binder.map(|b| b.raw)),
                    fmt(r.ideal.binder.map(|b| b.scaled)),
                    fmt(r.measured.binder.map(|b| b.scaled)),
                    r.ideal.neel_population
                )
                .unwrap();
                if let Some(s) = &r.samples {
                    out.write(&format!("samples/{}_tau_{tau}.csv", c.label), s.to_csv())?;
                }
            }
            Err(e) => failures.push(format!("{} tau={tau}: {}", c.label, e.message)),
        }
    }
    out.write("rampsweep.csv", table)?;
    out.write_json(
        "figure.json",
        &FigureDescriptor {
            mode: "ramp_speed_sweep",
            table: "rampsweep.csv",
            x: "six_tau_ms",
            y: vec!["g_s_scaled_ideal", "g_s_scaled_deconvolved"],
            group_by: Some("alpha"),
            note: "closed-system evolution: only the rise of order with slower ramps is modeled",
        },
    )?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::new(ErrorKind::Simulation, format!("{} of {} ramp points failed", failures.len(), jobs.len())).with_details(failures))
    }
}

fn fm_comparison(config: &RunConfig, couplings: &[LabeledCouplings], out: &mut ArtifactWriter) -> CliResult<()> {
    let c = &couplings[0];
    let runs = [(IsingSign::Fm, Direction::MinusY), (IsingSign::Afm, Direction::PlusY)];
    let schedule = RampSchedule::down(config.schedule.b_initial, config.schedule.tau_ms);
    let results = pool_map(&runs, config.worker_count(), |i, &(sign, start)| -> CliResult<_> {
        let traj = run_ramp(config, c, schedule, sign, start)?;
        let exact = distribution(traj.final_state(), Axis::X)?;
        let detected = detect(config, &exact, Axis::X, i as u64)?;
        let mitigated = deconvolved(config, &detected)?;
        Ok((traj.manifest(), exact, mitigated, detected.samples))
    });
    let n = c.matrix.n();
    let mut table = String::from("sign,initial,quantity,ideal,deconvolved\n");
    let mut hist = String::from("sign,magnetization,p_ideal,p_deconvolved\n");
    let mut trajectories = Vec::new();
    for (&(sign, start), r) in runs.iter().zip(results) {
        let (manifest, exact, mitigated, samples) = r?;
        let (si, sm) = (summarize_x(&exact, None)?, summarize_x(&mitigated, None)?);
        let sign_label = if sign == IsingSign::Fm { "fm" } else { "afm" };
        let start_label = if start == Direction::MinusY { "-y" } else { "+y" };
        for (q, a, b) in [
            ("abs_magnetization", si.magnetization.mean, sm.magnetization.mean),
            ("staggered_magnetization", si.staggered.mean, sm.staggered.mean),
            ("neel_population", si.neel_population, sm.neel_population),
        ] {
            writeln!(table, "{sign_label},{start_label},{q},{a},{b}").unwrap();
        }
        let (mut pi, mut pm) = (vec![0.0; n + 1], vec![0.0; n + 1]);
        for (s, (a, b)) in exact.values().iter().zip(mitigated.values()).enumerate() {
            let ones = s.count_ones() as usize;
            pi[ones] += a;
            pm[ones] += b;
        }
        for k in 0..=n {
            let m = (2.0 * k as f64 - n as f64) / n as f64;
            writeln!(hist, "{sign_label},{m},{},{}", pi[k], pm[k]).unwrap();
        }
        if let Some(s) = samples {
            out.write(&format!("samples/{sign_label}.csv"), s.to_csv())?;
        }
        trajectories.push((sign_label, manifest));
    }
    out.write("fm_comparison.csv", table)?;
    out.write("magnetization_histograms.csv", hist)?;
    out.write_json("trajectories.json", &trajectories)?;
    out.write_json(
        "figure.json",
        &FigureDescriptor {
            mode: "fm_comparison",
            table: "magnetization_histograms.csv",
            x: "magnetization",
            y: vec!["p_ideal", "p_deconvolved"],
            group_by: Some("sign"),
            note: "the ferromagnet is the global sign flip of the antiferromagnet, started from -y",
        },
    )
}

/// Reads a sample CSV, inverts the detection channel and writes the
/// mitigated distribution plus x-basis observables when applicable.
pub fn deconvolve_samples(input: &Path, epsilon: f64, dir: &Path) -> CliResult<RunManifest> {
    let started = Instant::now();
    let text = std::fs::read_to_string(input)
        .map_err(|e| CliError::new(ErrorKind::Io, format!("cannot read {}: {e}", input.display())))?;
    let samples = SampleSet::<f64>::from_csv(&text).map_err(|e| CliError::new(ErrorKind::Input, e.to_string()))?;
    if samples.n > 20 {
        return Err(CliError::new(ErrorKind::ResourceGuard, format!("deconvolution of {} spins needs 2^{} probabilities", samples.n, samples.n)));
    }
    let ch = if epsilon == 1.0 {
        DetectionChannel::ideal()
    } else {
        DetectionChannel::symmetric(epsilon).map_err(|e| CliError::new(ErrorKind::Config, e.to_string()))?
    };
    let observed = ProbabilityDistribution::from_samples(&samples)?;
    let mitigated = deconvolve(&observed, &ch)?;
    let mut out = ArtifactWriter::create(dir)?;
    let mut csv = String::from("bitstring,observed,deconvolved\n");
    for (s, (o, d)) in observed.values().iter().zip(mitigated.values()).enumerate() {
        writeln!(csv, "{s:0width$b},{o},{d}", width = samples.n).unwrap();
    }
    out.write("deconvolved.csv", csv)?;
    out.write_json("negativity.json", &mitigated.negativity())?;
    if samples.basis == Axis::X {
        let mut table = String::from("source,quantity,index,value,stderr\n");
        push_summary(&mut table, "", "observed", &summarize_x(&observed, None)?);
        push_summary(&mut table, "", "deconvolved", &summarize_x(&mitigated, None)?);
        out.write("observables.csv", table)?;
    }
    let config = serde_json::json!({
        "input": input.display().to_string(),
        "input_sha256": sha256_hex(text.as_bytes()),
        "epsilon": epsilon,
        "basis": samples.basis,
        "n": samples.n,
        "shots": samples.total_shots,
    });
    let manifest = RunManifest {
        mode: "deconv".into(),
        config_sha256: sha256_hex(config.to_string().as_bytes()),
        config,
        coupling_sha256: String::new(),
        software_version: software_version(),
        started_unix: unix_now(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        artifacts: out.into_artifacts(),
    };
    manifest.save(dir)?;
    Ok(manifest)
}
