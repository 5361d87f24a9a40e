//! Run configuration: a TOML file resolved against documented defaults.
//!
//! ```toml
//! mode = "quench"            # spectrum_scan | quench | coherence_reversal
//!                            # | ramp_speed_sweep | fm_comparison
//! seed = 2013                # required whenever shots > 0
//! shots = 0                  # 0 = exact distributions, no sampling
//! epsilon = 0.93             # detector efficiency; 1 = ideal
//! output_dir = "runs/quench"
//! max_spins = 20             # resource guard
//! allow_large_n = false      # lift the guard explicitly
//! workers = 0                # 0 = available parallelism
//!
//! [couplings.synthetic]      # exactly one of synthetic / physical
//! n = 10
//! j0_khz = 1.0
//! alphas = [1.05, 0.89, 0.76, 0.67]
//!
//! [couplings.physical]
//! n = 10
//! axial_freqs_mhz = [0.75]   # and/or target_alphas = [1.1]
//! transverse_com_mhz = 4.1
//! recoil_khz = 18.5
//! rabi_khz = 600.0
//! # detuning_mhz = 4.12     # default: COM mode + 3 eta Omega
//!
//! [schedule]
//! b_initial = 5.0            # units of J0
//! tau_ms = 0.4
//! tau_grid_ms = [0.05, 0.1, 0.15, 0.2, 0.3, 0.4]   # ramp_speed_sweep
//! max_phase = 0.1
//!
//! [scan]                     # spectrum_scan; must cover [0.01, 5]
//! b_min = 0.01
//! b_max = 5.0
//! points = 200
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult, ErrorKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    SpectrumScan,
    Quench,
    CoherenceReversal,
    RampSpeedSweep,
    FmComparison,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::SpectrumScan => "spectrum_scan",
            Mode::Quench => "quench",
            Mode::CoherenceReversal => "coherence_reversal",
            Mode::RampSpeedSweep => "ramp_speed_sweep",
            Mode::FmComparison => "fm_comparison",
        }
    }

    /// Modes whose pipeline ends in detector records.
    pub fn samples(self) -> bool {
        self != Mode::SpectrumScan
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSource {
    pub n: usize,
    #[serde(default = "one")]
    pub j0_khz: f64,
    pub alphas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalSource {
    pub n: usize,
    #[serde(default)]
    pub axial_freqs_mhz: Vec<f64>,
    /// Axial frequencies found by bisection on the fitted exponent.
    #[serde(default)]
    pub target_alphas: Vec<f64>,
    #[serde(default = "default_com")]
    pub transverse_com_mhz: f64,
    #[serde(default = "default_recoil")]
    pub recoil_khz: f64,
    #[serde(default = "default_rabi")]
    pub rabi_khz: f64,
    #[serde(default)]
    pub detuning_mhz: Option<f64>,
    /// Bisection bracket for `target_alphas`.
    #[serde(default = "default_bracket")]
    pub axial_bracket_mhz: [f64; 2],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub physical: Option<PhysicalSource>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    #[serde(default = "default_b_initial")]
    pub b_initial: f64,
    #[serde(default = "default_tau")]
    pub tau_ms: f64,
    #[serde(default = "default_tau_grid")]
    pub tau_grid_ms: Vec<f64>,
    #[serde(default = "default_max_phase")]
    pub max_phase: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            b_initial: default_b_initial(),
            tau_ms: default_tau(),
            tau_grid_ms: default_tau_grid(),
            max_phase: default_max_phase(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    #[serde(default = "default_b_min")]
    pub b_min: f64,
    #[serde(default = "default_b_max")]
    pub b_max: f64,
    #[serde(default = "default_points")]
    pub points: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            b_min: default_b_min(),
            b_max: default_b_max(),
            points: default_points(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub shots: u64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_max_spins")]
    pub max_spins: usize,
    #[serde(default)]
    pub allow_large_n: bool,
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub couplings: CouplingSource,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub scan: ScanConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: None,
            seed: None,
            shots: 0,
            epsilon: default_epsilon(),
            output_dir: None,
            max_spins: default_max_spins(),
            allow_large_n: false,
            workers: 0,
            couplings: CouplingSource::default(),
            schedule: ScheduleConfig::default(),
            scan: ScanConfig::default(),
        }
    }
}

fn one() -> f64 {
    1.0
}
fn default_com() -> f64 {
    4.1
}
fn default_recoil() -> f64 {
    18.5
}
fn default_rabi() -> f64 {
    600.0
}
fn default_bracket() -> [f64; 2] {
    [0.62, 0.88]
}
fn default_b_initial() -> f64 {
    5.0
}
fn default_tau() -> f64 {
    0.4
}
fn default_tau_grid() -> Vec<f64> {
    vec![0.05, 0.1, 0.15, 0.2, 0.3, 0.4]
}
fn default_max_phase() -> f64 {
    0.1
}
fn default_b_min() -> f64 {
    0.01
}
fn default_b_max() -> f64 {
    5.0
}
fn default_points() -> usize {
    200
}
fn default_epsilon() -> f64 {
    0.93
}
fn default_max_spins() -> usize {
    20
}

/// Hard ceiling even with the override: `2^26` amplitudes is 1 GiB.
pub const ABSOLUTE_MAX_SPINS: usize = 26;

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub shots: Option<u64>,
    pub epsilon: Option<f64>,
    pub output_dir: Option<PathBuf>,
    pub allow_large_n: bool,
    pub workers: Option<usize>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::new(ErrorKind::Config, format!("cannot parse config: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::new(ErrorKind::Io, format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// Fills in the mode and the default coupling source, applies overrides and
    /// validates. Every problem is reported at once, before any compute.
    pub fn resolve(mut self, mode: Mode, overrides: &Overrides) -> CliResult<Self> {
        let mut problems = Vec::new();
        match self.mode {
            Some(m) if m != mode => problems.push(format!(
                "config declares mode {} but the {} pipeline was requested",
                m.label(),
                mode.label()
            )),
            _ => self.mode = Some(mode),
        }
        if overrides.seed.is_some() {
            self.seed = overrides.seed;
        }
        if let Some(s) = overrides.shots {
            self.shots = s;
        }
        if let Some(e) = overrides.epsilon {
            self.epsilon = e;
        }
        if overrides.output_dir.is_some() {
            self.output_dir = overrides.output_dir.clone();
        }
        if let Some(w) = overrides.workers {
            self.workers = w;
        }
        self.allow_large_n |= overrides.allow_large_n;
        if self.couplings.synthetic.is_none() && self.couplings.physical.is_none() {
            self.couplings.synthetic = Some(SyntheticSource {
                n: if mode == Mode::FmComparison { 16 } else { 10 },
                j0_khz: 1.0,
                alphas: vec![1.0],
            });
        }
        problems.extend(self.problems());
        if let Some(n) = self.n() {
            if n > ABSOLUTE_MAX_SPINS {
                problems.push(format!("N = {n} exceeds the hard limit of {ABSOLUTE_MAX_SPINS} spins"));
            } else if n > self.max_spins && !self.allow_large_n {
                return Err(CliError::new(
                    ErrorKind::ResourceGuard,
                    format!(
                        "N = {n} exceeds max_spins = {}; state vectors need {} MiB each. Set allow_large_n or pass --allow-large",
                        self.max_spins,
                        (16u64 << n) >> 20
                    ),
                )
                .with_details(problems));
            }
        }
        if problems.is_empty() {
            Ok(self)
        } else {
            Err(CliError::new(ErrorKind::Config, format!("{} invalid setting(s)", problems.len())).with_details(problems))
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode.expect("resolved config has a mode")
    }

    pub fn n(&self) -> Option<usize> {
        match (&self.couplings.synthetic, &self.couplings.physical) {
            (Some(s), None) => Some(s.n),
            (None, Some(p)) => Some(p.n),
            _ => None,
        }
    }

    fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        let mode = self.mode.unwrap_or(Mode::Quench);
        let positive = |v: f64| v.is_finite() && v > 0.0;
        match (&self.couplings.synthetic, &self.couplings.physical) {
            (Some(_), Some(_)) => p.push("exactly one coupling source is allowed; found both synthetic and physical".into()),
            (Some(s), None) => {
                if s.n < 2 {
                    p.push(format!("couplings.synthetic.n must be at least 2, got {}", s.n));
                }
                if !positive(s.j0_khz) {
                    p.push(format!("couplings.synthetic.j0_khz must be positive, got {}", s.j0_khz));
                }
                if s.alphas.is_empty() {
                    p.push("couplings.synthetic.alphas is empty".into());
                }
                if let Some(a) = s.alphas.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
                    p.push(format!("couplings.synthetic.alphas must be finite and nonnegative, got {a}"));
                }
            }
            (None, Some(ph)) => {
                if ph.n < 2 {
                    p.push(format!("couplings.physical.n must be at least 2, got {}", ph.n));
                }
                if ph.axial_freqs_mhz.is_empty() && ph.target_alphas.is_empty() {
                    p.push("couplings.physical needs axial_freqs_mhz or target_alphas".into());
                }
                for (name, v) in [
                    ("transverse_com_mhz", ph.transverse_com_mhz),
                    ("recoil_khz", ph.recoil_khz),
                    ("rabi_khz", ph.rabi_khz),
                ] {
                    if !positive(v) {
                        p.push(format!("couplings.physical.{name} must be positive, got {v}"));
                    }
                }
                if let Some(f) = ph.axial_freqs_mhz.iter().find(|f| !positive(**f)) {
                    p.push(format!("couplings.physical.axial_freqs_mhz must be positive, got {f}"));
                }
                if let Some(mu) = ph.detuning_mhz.filter(|m| !positive(*m)) {
                    p.push(format!("couplings.physical.detuning_mhz must be positive, got {mu}"));
                }
                let [lo, hi] = ph.axial_bracket_mhz;
                if !(positive(lo) && hi > lo) {
                    p.push(format!("couplings.physical.axial_bracket_mhz must be increasing and positive, got [{lo}, {hi}]"));
                }
            }
            (None, None) => p.push("exactly one coupling source is required".into()),
        }
        if mode.samples() && self.shots > 0 && self.seed.is_none() {
            p.push(format!("seed is mandatory when sampling ({} shots requested)", self.shots));
        }
        if !(self.epsilon > 0.5 && self.epsilon <= 1.0) {
            p.push(format!("epsilon must lie in (0.5, 1], got {}", self.epsilon));
        }
        let s = &self.schedule;
        if !positive(s.b_initial) {
            p.push(format!("schedule.b_initial must be positive, got {}", s.b_initial));
        }
        if !positive(s.tau_ms) {
            p.push(format!("schedule.tau_ms must be positive, got {}", s.tau_ms));
        }
        if !positive(s.max_phase) {
            p.push(format!("schedule.max_phase must be positive, got {}", s.max_phase));
        }
        if let Some(t) = s.tau_grid_ms.iter().find(|t| !positive(**t)) {
            p.push(format!("schedule.tau_grid_ms must be positive, got {t}"));
        }
        if mode == Mode::SpectrumScan {
            let c = &self.scan;
            if !(positive(c.b_min) && c.b_min <= 0.01 && c.b_max >= 5.0) {
                p.push(format!("scan range [{}, {}] must cover [0.01, 5] J0", c.b_min, c.b_max));
            }
            if c.points < 50 {
                p.push(format!("scan.points must be at least 50, got {}", c.points));
            }
        }
        if mode == Mode::FmComparison && self.n().is_some() && self.coupling_count() != 1 {
            p.push("fm_comparison takes exactly one coupling matrix".into());
        }
        p
    }

    fn coupling_count(&self) -> usize {
        match (&self.couplings.synthetic, &self.couplings.physical) {
            (Some(s), _) => s.alphas.len(),
            (None, Some(p)) => p.axial_freqs_mhz.len() + p.target_alphas.len(),
            _ => 0,
        }
    }

    /// Content digest of everything that affects results: the output location
    /// and the worker count are excluded.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        c.workers = 0;
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn worker_count(&self) -> usize {
        if self.workers > 0 {
            self.workers
        } else {
            std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
        }
    }
}
