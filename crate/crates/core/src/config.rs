//! Experiment configuration: TOML parsing, defaults and validation.
//!
//! All quantities are in trap units (ħ = k_B = 1, energies in ω_T, lengths
//! in the oscillator length) unless a key says otherwise.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{max_stable_dt, AxisEngine, Envelope, PulseSpec, TimeGrid, WindowSpec};
use crate::field::ModeGrid;
use crate::franck_condon::{wavevector_norm, OscillatorParams};
use crate::trap::{critical_temperature, default_cutoff_shell, TrapSpec};

pub const DEFAULT_SAMPLES: usize = 200;
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_SUB_BINS: usize = 8;
pub const DEFAULT_Q_MAX: usize = 9;

/// One invariant violation, naming the offending key.
#[derive(Debug, Clone, PartialEq, Error, Serialize)]
#[error("{field}: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    fn new(field: &str, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

/// Temperature as written in the file: a number or `"<x> Tc"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawTemperature {
    Absolute(f64),
    Text(String),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
struct RawTrap {
    omega_t: Option<f64>,
    atoms: Option<i64>,
    e_cutoff: Option<f64>,
    x0: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
struct RawPulse {
    omega_l: Option<f64>,
    k_l: Option<Vec<f64>>,
    drive_strength: Option<f64>,
    envelope: Option<String>,
    cycles: Option<f64>,
    dt: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
struct RawTruncation {
    delta_e: Option<f64>,
    n_max: Option<i64>,
    g_base: Option<i64>,
    g_spread: Option<f64>,
    e_extra: Option<i64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
struct RawGrid {
    q_max: Option<i64>,
    sub_bins: Option<i64>,
    coupling_g0: Option<f64>,
    emission_c: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
struct RawOutputs {
    dir: Option<PathBuf>,
    amplitudes: Option<bool>,
    traces: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
struct RawConfig {
    seed: Option<u64>,
    samples: Option<i64>,
    sweep: Option<Vec<RawTemperature>>,
    dipole_override: Option<PathBuf>,
    trap: RawTrap,
    pulse: RawPulse,
    truncation: RawTruncation,
    grid: RawGrid,
    outputs: RawOutputs,
}

const KNOWN_KEYS: &[(&str, &[&str])] = &[
    ("", &["seed", "samples", "sweep", "dipole_override", "trap", "pulse", "truncation", "grid", "outputs"]),
    ("trap", &["omega_t", "atoms", "e_cutoff", "x0"]),
    ("pulse", &["omega_l", "k_l", "drive_strength", "envelope", "cycles", "dt"]),
    ("truncation", &["delta_e", "n_max", "g_base", "g_spread", "e_extra"]),
    ("grid", &["q_max", "sub_bins", "coupling_g0", "emission_c"]),
    ("outputs", &["dir", "amplitudes", "traces"]),
];

/// A resolved sweep temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperaturePoint {
    pub label: String,
    pub value: f64,
    pub over_tc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub delta_e: f64,
    /// Largest admissible longitudinal quantum number; `None` sizes the chain
    /// from the sampled configurations.
    pub n_max: Option<usize>,
    pub window: WindowSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub q_max: usize,
    pub sub_bins: usize,
    pub coupling_g0: f64,
    /// Emission dispersion `q = ω / c`; defaults to `ω_L / |k_L|`.
    pub emission_c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outputs {
    pub dir: Option<PathBuf>,
    pub amplitudes: bool,
    pub traces: bool,
}

/// Validated experiment with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub trap: TrapSpec,
    /// Explicit energy cutoff; `None` uses the per-temperature default.
    pub e_cutoff: Option<f64>,
    pub oscillator: OscillatorParams,
    pub pulse: PulseSpec,
    pub truncation: Truncation,
    pub grid: GridConfig,
    pub sweep: Vec<TemperaturePoint>,
    pub samples: usize,
    pub seed: u64,
    pub dipole_override: Option<PathBuf>,
    pub outputs: Outputs,
}

/// Parse result: the config plus non-fatal warnings.
#[derive(Debug, Clone)]
pub struct Validated {
    pub config: ExperimentConfig,
    pub warnings: Vec<String>,
}

fn unknown_keys(value: &toml::Value) -> Vec<String> {
    let mut out = Vec::new();
    for (section, keys) in KNOWN_KEYS {
        let table = if section.is_empty() { value.as_table() } else { value.get(section).and_then(|v| v.as_table()) };
        if let Some(t) = table {
            for k in t.keys() {
                if !keys.contains(&k.as_str()) {
                    let path = if section.is_empty() { k.clone() } else { format!("{section}.{k}") };
                    out.push(format!("unknown key '{path}' ignored"));
                }
            }
        }
    }
    out
}

/// Parses `"0.5 Tc"`, `"0.5Tc"`, `"0.5 T_c"` or a bare number.
pub fn parse_temperature(raw: &RawTemperature, tc: Option<f64>) -> Result<TemperaturePoint, String> {
    match raw {
        RawTemperature::Absolute(v) => Ok(TemperaturePoint {
            label: v.to_string(),
            value: *v,
            over_tc: tc.map_or(f64::NAN, |tc| v / tc),
        }),
        RawTemperature::Text(s) => {
            let t = s.trim();
            let lower = t.to_ascii_lowercase();
            let stripped = ["t_c", "tc"].iter().find_map(|suf| lower.strip_suffix(suf));
            match stripped {
                Some(num) => {
                    let x: f64 = num.trim().trim_end_matches('*').trim().parse().map_err(|_| format!("cannot parse '{s}'"))?;
                    let tc = tc.ok_or_else(|| format!("'{s}' needs a critical temperature"))?;
                    Ok(TemperaturePoint { label: t.to_string(), value: x * tc, over_tc: x })
                }
                None => {
                    let v: f64 = t.parse().map_err(|_| format!("cannot parse '{s}'"))?;
                    Ok(TemperaturePoint { label: t.to_string(), value: v, over_tc: tc.map_or(f64::NAN, |tc| v / tc) })
                }
            }
        }
    }
}

fn positive(errors: &mut Vec<ConfigError>, field: &str, v: f64) {
    if !(v > 0.0) || !v.is_finite() {
        errors.push(ConfigError::new(field, format!("must be positive, got {v}")));
    }
}

fn non_negative_int(errors: &mut Vec<ConfigError>, field: &str, v: i64) -> usize {
    if v < 0 {
        errors.push(ConfigError::new(field, format!("must be non-negative, got {v}")));
        0
    } else {
        v as usize
    }
}

/// Parses and validates a config file, reporting every violation at once.
pub fn validate_config(text: &str) -> Result<Validated, Vec<ConfigError>> {
    let value: toml::Value = toml::from_str(text).map_err(|e| vec![ConfigError::new("<file>", e.to_string())])?;
    let raw: RawConfig = value.clone().try_into().map_err(|e: toml::de::Error| vec![ConfigError::new("<file>", e.to_string())])?;
    let warnings = unknown_keys(&value);
    let mut errors = Vec::new();

    let omega_t = raw.trap.omega_t.unwrap_or(1.0);
    positive(&mut errors, "trap.omega_t", omega_t);
    let atoms = raw.trap.atoms.unwrap_or(1000);
    if atoms < 1 {
        errors.push(ConfigError::new("trap.atoms", format!("must be at least 1, got {atoms}")));
    }
    if let Some(c) = raw.trap.e_cutoff {
        if !(c >= 0.0) {
            errors.push(ConfigError::new("trap.e_cutoff", format!("must be non-negative, got {c}")));
        }
    }
    let x0 = raw.trap.x0.unwrap_or(1.0);
    positive(&mut errors, "trap.x0", x0);

    let omega_l = raw.pulse.omega_l.unwrap_or(20.0);
    positive(&mut errors, "pulse.omega_l", omega_l);
    let k_l = match raw.pulse.k_l.as_deref() {
        None => [0.2, 0.0, 0.0],
        Some([a, b, c]) => [*a, *b, *c],
        Some(_) => {
            errors.push(ConfigError::new("pulse.k_l", "must have three components"));
            [0.0; 3]
        }
    };
    let drive_strength = raw.pulse.drive_strength.unwrap_or(30.0);
    if !drive_strength.is_finite() {
        errors.push(ConfigError::new("pulse.drive_strength", "must be finite"));
    }
    let envelope = match raw.pulse.envelope.as_deref().unwrap_or("sin2").to_ascii_lowercase().as_str() {
        "sin2" | "sin^2" | "sin²" => Envelope::Sin2,
        "rectangular" | "rect" => Envelope::Rectangular,
        other => {
            errors.push(ConfigError::new("pulse.envelope", format!("unknown envelope '{other}'")));
            Envelope::Sin2
        }
    };
    let cycles = raw.pulse.cycles.unwrap_or(10.0);
    positive(&mut errors, "pulse.cycles", cycles);
    if let Some(dt) = raw.pulse.dt {
        positive(&mut errors, "pulse.dt", dt);
    }

    let delta_e = raw.truncation.delta_e.unwrap_or(70.0);
    if !delta_e.is_finite() {
        errors.push(ConfigError::new("truncation.delta_e", "must be finite"));
    }
    let n_max = raw.truncation.n_max.map(|v| non_negative_int(&mut errors, "truncation.n_max", v));
    let defaults = WindowSpec::default();
    let window = WindowSpec {
        g_base: raw.truncation.g_base.map_or(defaults.g_base, |v| non_negative_int(&mut errors, "truncation.g_base", v)),
        g_spread: raw.truncation.g_spread.unwrap_or(defaults.g_spread),
        e_extra: raw.truncation.e_extra.map_or(defaults.e_extra, |v| non_negative_int(&mut errors, "truncation.e_extra", v)),
    };
    if !(window.g_spread >= 0.0) {
        errors.push(ConfigError::new("truncation.g_spread", "must be non-negative"));
    }

    let q_max = raw.grid.q_max.map_or(DEFAULT_Q_MAX, |v| non_negative_int(&mut errors, "grid.q_max", v));
    if q_max < 1 {
        errors.push(ConfigError::new("grid.q_max", "must be at least 1"));
    }
    let sub_bins = raw.grid.sub_bins.map_or(DEFAULT_SUB_BINS, |v| non_negative_int(&mut errors, "grid.sub_bins", v));
    if sub_bins < 1 {
        errors.push(ConfigError::new("grid.sub_bins", "must be at least 1"));
    }
    let coupling_g0 = raw.grid.coupling_g0.unwrap_or(0.01);
    if !coupling_g0.is_finite() {
        errors.push(ConfigError::new("grid.coupling_g0", "must be finite"));
    }
    if let Some(c) = raw.grid.emission_c {
        positive(&mut errors, "grid.emission_c", c);
    }

    let samples = raw.samples.unwrap_or(DEFAULT_SAMPLES as i64);
    if samples < 1 {
        errors.push(ConfigError::new("samples", format!("must be at least 1, got {samples}")));
    }

    let trap = TrapSpec { omega_t, atoms: atoms.max(1) as u64, e_cutoff: raw.trap.e_cutoff.unwrap_or(0.0) };
    let tc = if atoms >= 2 && omega_t > 0.0 { critical_temperature(&trap).ok() } else { None };
    let mut sweep = Vec::new();
    match raw.sweep.as_deref() {
        None | Some([]) => errors.push(ConfigError::new("sweep", "must list at least one temperature")),
        Some(items) => {
            for (i, item) in items.iter().enumerate() {
                match parse_temperature(item, tc) {
                    Ok(p) if p.value > 0.0 && p.value.is_finite() => sweep.push(p),
                    Ok(p) => errors.push(ConfigError::new(&format!("sweep[{i}]"), format!("temperature must be positive, got {}", p.value))),
                    Err(e) => errors.push(ConfigError::new(&format!("sweep[{i}]"), e)),
                }
            }
        }
    }

    if !errors.is_empty() {
        return Err(errors);
    }

    let mut pulse = PulseSpec {
        omega_l,
        k_l,
        drive_strength,
        envelope,
        cycles,
        grid: TimeGrid { start: 0.0, stop: 1.0, dt: 1.0 },
    };
    let duration = pulse.duration();
    let config = ExperimentConfig {
        trap,
        e_cutoff: raw.trap.e_cutoff,
        oscillator: OscillatorParams { x0 },
        pulse,
        truncation: Truncation { delta_e, n_max, window },
        grid: GridConfig { q_max, sub_bins, coupling_g0, emission_c: raw.grid.emission_c },
        sweep,
        samples: samples as usize,
        seed: raw.seed.unwrap_or(DEFAULT_SEED),
        dipole_override: raw.dipole_override,
        outputs: Outputs {
            dir: raw.outputs.dir,
            amplitudes: raw.outputs.amplitudes.unwrap_or(false),
            traces: raw.outputs.traces.unwrap_or(false),
        },
    };
    // time grid: explicit dt must tile the pulse; otherwise the stability bound picks it
    let grid = match raw.pulse.dt {
        Some(dt) => TimeGrid::new(0.0, duration, dt).map_err(|e| vec![ConfigError::new("pulse.dt", e.to_string())])?,
        None => {
            let e_max = config.engine().e_max(config.chain_bound());
            TimeGrid::covering(0.0, duration, max_stable_dt(e_max)).map_err(|e| vec![ConfigError::new("pulse", e.to_string())])?
        }
    };
    pulse.grid = grid;
    let config = ExperimentConfig { pulse, ..config };
    Ok(Validated { config, warnings })
}

impl ExperimentConfig {
    pub fn critical_temperature(&self) -> Option<f64> {
        critical_temperature(&self.trap).ok()
    }

    /// Trap spec used at temperature `t`.
    pub fn trap_at(&self, t: f64) -> TrapSpec {
        let e_cutoff = self.e_cutoff.unwrap_or_else(|| default_cutoff_shell(self.trap.omega_t, t) as f64 * self.trap.omega_t);
        TrapSpec { e_cutoff, ..self.trap }
    }

    /// Upper bound on the longitudinal quantum number any sample can reach.
    pub fn chain_bound(&self) -> usize {
        if let Some(n) = self.truncation.n_max {
            return n;
        }
        self.sweep.iter().map(|p| self.trap_at(p.value).max_shell()).max().unwrap_or(0)
    }

    pub fn mode_grid(&self) -> ModeGrid {
        ModeGrid::harmonic(self.pulse.omega_l, self.grid.q_max, self.grid.sub_bins, self.grid.coupling_g0)
            .expect("validated grid parameters")
    }

    /// Emission wavenumber for frequency `omega`.
    pub fn emission_q(&self, omega: f64) -> f64 {
        match self.grid.emission_c {
            Some(c) => omega / c,
            None => {
                let k = wavevector_norm(self.pulse.k_l);
                if k == 0.0 {
                    0.0
                } else {
                    omega * k / self.pulse.omega_l
                }
            }
        }
    }

    pub fn engine(&self) -> AxisEngine {
        let grid = self.mode_grid();
        AxisEngine {
            pulse: self.pulse,
            delta_e: self.truncation.delta_e,
            omega_t: self.trap.omega_t,
            x0: self.oscillator.x0,
            emission_q: grid.omegas.iter().map(|&w| self.emission_q(w)).collect(),
            window: self.truncation.window,
        }
    }
}
