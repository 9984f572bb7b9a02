//! Temperature sweeps and the file outputs behind the command-line tool.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig, TemperaturePoint};
use crate::dynamics::{DipoleTrace, DynamicsError, TimeGrid};
use crate::field::{coherent_amplitude, AmplitudeVector, FieldError, ModeGrid, QuadratureTable};
use crate::state::{fidelity_to_pure, mean_photons, purity, purity_estimate, CoherentMixture, StateError};
use crate::trap::{
    critical_temperature, sample_axis_occupations, solve_chemical_potential, AxisOccupations, ThermalState, ThermoError,
    ThermoSummary,
};

/// Largest tolerated norm drift of a propagated chain.
pub const UNITARITY_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {}", format_errors(.0))]
    Config(Vec<ConfigError>),
    #[error(transparent)]
    Thermo(#[from] ThermoError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("dipole file: {0}")]
    DipoleFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn format_errors(errs: &[ConfigError]) -> String {
    errs.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ")
}

impl PipelineError {
    /// 1 for configuration problems, 2 for numerical ones and I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::DipoleFile(_) => 1,
            _ => 2,
        }
    }
}

/// SHA-256 over the resolved configuration (output directory excluded) and
/// the bytes of any dipole override file.
pub fn config_hash(cfg: &ExperimentConfig) -> Result<String, PipelineError> {
    let mut canonical = cfg.clone();
    canonical.outputs.dir = None;
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(&canonical)?);
    if let Some(p) = &cfg.dipole_override {
        h.update(fs::read(p)?);
    }
    Ok(hex::encode(h.finalize()))
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Independent seed for sample `k` of temperature point `t_index`.
pub fn sample_seed(seed: u64, t_index: usize, k: usize) -> u64 {
    splitmix64(seed ^ splitmix64(((t_index as u64) << 32) | k as u64))
}

/// Single-atom amplitudes `Σ_i w_i e^{-iω_j t_i} d_{j,n}(t_i)` (without ξ)
/// for every longitudinal mode `n ≤ n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeTable {
    pub grid: ModeGrid,
    pub omegas: Arc<Vec<f64>>,
    pub rows: Vec<Vec<Complex64>>,
}

impl AmplitudeTable {
    pub fn n_max(&self) -> usize {
        self.rows.len() - 1
    }

    /// `χ_j = ξ_j Σ_n N_n A[n][j]`, summed in ascending `n`.
    pub fn amplitudes(&self, occ: &AxisOccupations, label: String, weight: f64) -> Result<AmplitudeVector, PipelineError> {
        if let Some(top) = occ.max_occupied() {
            if top > self.n_max() {
                return Err(DynamicsError::ConfigOutsideBasis(crate::trap::ModeIndex::axis(top)).into());
            }
        }
        let mut chis = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        for (n, &count) in occ.counts.iter().enumerate() {
            if count == 0 {
                continue;
            }
            for (c, a) in chis.iter_mut().zip(&self.rows[n]) {
                *c += a * count as f64;
            }
        }
        for (j, c) in chis.iter_mut().enumerate() {
            *c *= self.grid.xi(j);
        }
        Ok(AmplitudeVector { omegas: self.omegas.clone(), chis, config_label: label, weight })
    }
}

/// Reads a `t, Re d, Im d` CSV (lines starting with `#` are comments).
pub fn read_dipole_csv(path: &Path) -> Result<DipoleTrace, PipelineError> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).has_headers(false).trim(csv::Trim::All).from_path(path)?;
    let mut ts = Vec::new();
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let field = |i: usize| -> Result<f64, PipelineError> {
            rec.get(i)
                .ok_or_else(|| PipelineError::DipoleFile(format!("row with {} columns, need 3", rec.len())))?
                .parse::<f64>()
                .map_err(|e| PipelineError::DipoleFile(e.to_string()))
        };
        // tolerate a header row
        match field(0) {
            Ok(t) => {
                ts.push(t);
                values.push(Complex64::new(field(1)?, field(2)?));
            }
            Err(_) if ts.is_empty() => continue,
            Err(e) => return Err(e),
        }
    }
    if ts.len() < 2 {
        return Err(PipelineError::DipoleFile("need at least two samples".into()));
    }
    let dt = (ts[ts.len() - 1] - ts[0]) / (ts.len() - 1) as f64;
    for (i, &t) in ts.iter().enumerate() {
        if (t - (ts[0] + i as f64 * dt)).abs() > 1e-9 * dt.abs().max(1.0) {
            return Err(PipelineError::DipoleFile(format!("non-uniform time grid at row {i}")));
        }
    }
    let grid = TimeGrid::new(ts[0], ts[ts.len() - 1], dt).map_err(|e| PipelineError::DipoleFile(e.to_string()))?;
    Ok(DipoleTrace { q: None, grid, values, config_label: path.display().to_string() })
}

pub fn write_dipole_csv(path: &Path, trace: &DipoleTrace, hash: &str) -> Result<(), PipelineError> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "# config_hash={hash}")?;
    writeln!(f, "t,re_d,im_d")?;
    for (t, v) in trace.times().iter().zip(&trace.values) {
        writeln!(f, "{t},{},{}", v.re, v.im)?;
    }
    f.flush()?;
    Ok(())
}

fn write_series_csv(path: &Path, hash: &str, header: &str, rows: impl Iterator<Item = String>) -> Result<(), PipelineError> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "# config_hash={hash}")?;
    writeln!(f, "{header}")?;
    for r in rows {
        writeln!(f, "{r}")?;
    }
    f.flush()?;
    Ok(())
}

pub fn write_spectrum_csv(path: &Path, omegas: &[f64], values: &[f64], hash: &str) -> Result<(), PipelineError> {
    write_series_csv(path, hash, "omega,S", omegas.iter().zip(values).map(|(w, s)| format!("{w},{s}")))
}

pub fn write_amplitude_csv(path: &Path, amps: &AmplitudeVector, hash: &str) -> Result<(), PipelineError> {
    write_series_csv(
        path,
        hash,
        "omega,re_chi,im_chi",
        amps.omegas.iter().zip(&amps.chis).map(|(w, c)| format!("{w},{},{}", c.re, c.im)),
    )
}

/// Reads the `# config_hash=` line of an output CSV.
pub fn csv_hash(path: &Path) -> Option<String> {
    let text = fs::read_to_string(path).ok()?;
    text.lines().next()?.strip_prefix("# config_hash=").map(str::to_string)
}

/// `thermo.json` layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermoFile {
    pub config_hash: String,
    pub points: Vec<ThermoSummary>,
}

pub fn write_thermo_json(path: &Path, points: &[ThermoSummary], hash: &str) -> Result<(), PipelineError> {
    let file = ThermoFile { config_hash: hash.into(), points: points.to_vec() };
    fs::write(path, serde_json::to_vec_pretty(&file)?)?;
    Ok(())
}

/// Per-temperature record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "T_over_Tc")]
    pub t_over_tc: f64,
    pub purity: f64,
    pub purity_stderr: Option<f64>,
    /// Plug-in `Tr ρ²` of the assembled mixture, diagonal pairs included.
    pub purity_plugin: f64,
    pub fidelity: f64,
    pub n_components: usize,
    pub n_samples: usize,
    pub condensate_fraction: f64,
    pub max_occupied_mode: usize,
    pub thermo: ThermoSummary,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub path: PathBuf,
    pub kind: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointFailure {
    pub index: usize,
    #[serde(rename = "T")]
    pub t: f64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub version: String,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub timings_s: BTreeMap<String, f64>,
    pub outputs: Vec<OutputEntry>,
    pub resumed_points: Vec<usize>,
    pub failures: Vec<PointFailure>,
    pub records: Vec<PointRecord>,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Worker count; `None` keeps the global pool.
    pub threads: Option<usize>,
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// Runs `f` on a pool of `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, PipelineError> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| PipelineError::Numeric(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Builds the single-atom amplitude table for modes `0..=n_max`, either by
/// propagating every chain or from the override trace.
pub fn amplitude_table(cfg: &ExperimentConfig, n_max: usize) -> Result<AmplitudeTable, PipelineError> {
    let grid = cfg.mode_grid();
    let omegas = Arc::new(grid.omegas.clone());
    if let Some(path) = &cfg.dipole_override {
        let trace = read_dipole_csv(path)?;
        let unit = ModeGrid { coupling_g0: 1.0, ..grid.clone() };
        let raw = coherent_amplitude(&trace, &unit)?;
        let row: Vec<Complex64> = raw.chis.iter().enumerate().map(|(j, c)| c / unit.xi(j)).collect();
        return Ok(AmplitudeTable { grid, omegas, rows: vec![row; n_max + 1] });
    }
    let engine = cfg.engine();
    engine.check_grid(n_max)?;
    let quad = QuadratureTable::new(cfg.pulse.grid, &grid.omegas);
    let rows = (0..=n_max)
        .into_par_iter()
        .map(|n| -> Result<Vec<Complex64>, PipelineError> {
            let md = engine.mode_dipoles(n)?;
            if md.max_unitarity_residual > UNITARITY_TOL {
                return Err(PipelineError::Numeric(format!(
                    "norm drift {:.3e} in chain {n}",
                    md.max_unitarity_residual
                )));
            }
            Ok(md.series.iter().enumerate().map(|(j, s)| quad.apply(j, s)).collect())
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(AmplitudeTable { grid, omegas, rows })
}

/// Summed dipole trace of a configuration for grid mode `j`.
pub fn configuration_trace(cfg: &ExperimentConfig, occ: &AxisOccupations, j: usize, label: &str) -> Result<DipoleTrace, PipelineError> {
    let grid = cfg.mode_grid();
    if j >= grid.len() {
        return Err(PipelineError::Numeric(format!("grid mode {j} out of range ({} modes)", grid.len())));
    }
    let q = cfg.emission_q(grid.omegas[j]);
    let k = crate::franck_condon::wavevector_norm(cfg.pulse.k_l);
    let dir = if k > 0.0 { cfg.pulse.k_l.map(|c| c / k) } else { [1.0, 0.0, 0.0] };
    let mut trace = DipoleTrace::zeros(cfg.pulse.grid, Some(dir.map(|c| c * q)), label);
    if let Some(path) = &cfg.dipole_override {
        let single = read_dipole_csv(path)?;
        return Ok(DipoleTrace { config_label: label.into(), ..single.scaled(occ.total() as f64) });
    }
    let engine = cfg.engine();
    if let Some(top) = occ.max_occupied() {
        engine.check_grid(top)?;
    }
    for (n, &count) in occ.counts.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let md = engine.mode_dipoles(n)?;
        for (v, d) in trace.values.iter_mut().zip(&md.series[j]) {
            *v += d * count as f64;
        }
    }
    Ok(trace)
}

/// Condensate configuration: every atom in the ground mode.
pub fn condensate_occupations(atoms: u64) -> AxisOccupations {
    AxisOccupations { counts: vec![atoms] }
}

/// Mixture over configurations, merging identical ones so that a
/// deterministic ensemble yields a single component.
pub fn assemble_mixture(
    table: &AmplitudeTable,
    configs: &[AxisOccupations],
    label_prefix: &str,
) -> Result<CoherentMixture, PipelineError> {
    let mut merged: Vec<(AxisOccupations, usize)> = Vec::new();
    for c in configs {
        match merged.iter_mut().find(|(m, _)| m == c) {
            Some((_, k)) => *k += 1,
            None => merged.push((c.clone(), 1)),
        }
    }
    let total = configs.len() as f64;
    let comps = merged
        .into_iter()
        .enumerate()
        .map(|(i, (c, k))| table.amplitudes(&c, format!("{label_prefix}-{i}"), k as f64 / total))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CoherentMixture::new(comps)?)
}

/// Thermal states at every sweep temperature.
pub fn thermal_states(cfg: &ExperimentConfig) -> Result<Vec<ThermalState>, PipelineError> {
    cfg.sweep.iter().map(|p| Ok(solve_chemical_potential(&cfg.trap_at(p.value), p.value)?)).collect()
}

/// `M` sampled longitudinal configurations at sweep point `index`.
pub fn sample_point(cfg: &ExperimentConfig, state: &ThermalState, index: usize) -> Vec<AxisOccupations> {
    (0..cfg.samples).map(|k| sample_axis_occupations(state, sample_seed(cfg.seed, index, k))).collect()
}

fn point_paths(out: &Path, i: usize) -> (PathBuf, PathBuf) {
    (out.join(format!("point_{i:02}.json")), out.join(format!("spectrum_{i:02}.csv")))
}

fn load_completed(out: &Path, i: usize, hash: &str) -> Option<PointRecord> {
    let (json, csv) = point_paths(out, i);
    let rec: PointRecord = serde_json::from_slice(&fs::read(json).ok()?).ok()?;
    (rec.config_hash == hash && csv_hash(&csv).as_deref() == Some(hash)).then_some(rec)
}

struct Timer(BTreeMap<String, f64>);

impl Timer {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        *self.0.entry(stage.into()).or_default() += start.elapsed().as_secs_f64();
        out
    }
}

fn point_record(
    cfg: &ExperimentConfig,
    point: &TemperaturePoint,
    state: &ThermalState,
    table: &AmplitudeTable,
    configs: &[AxisOccupations],
    index: usize,
    hash: &str,
) -> Result<(PointRecord, Vec<f64>), PipelineError> {
    let samples = configs
        .iter()
        .enumerate()
        .map(|(k, c)| table.amplitudes(c, format!("T{index}-s{k}"), 1.0 / configs.len() as f64))
        .collect::<Result<Vec<_>, _>>()?;
    let estimate = purity_estimate(&samples)?;
    let mixture = assemble_mixture(table, configs, &format!("T{index}"))?;
    let reference = table.amplitudes(&condensate_occupations(cfg.trap.atoms), "condensate".into(), 1.0)?;
    let photons = mean_photons(&mixture);
    let max_occupied_mode = configs.iter().filter_map(|c| c.max_occupied()).max().unwrap_or(0);
    let record = PointRecord {
        t: point.value,
        t_over_tc: point.over_tc,
        purity: estimate.value,
        purity_stderr: estimate.stderr,
        purity_plugin: purity(&mixture),
        fidelity: fidelity_to_pure(&mixture, &reference)?,
        n_components: mixture.len(),
        n_samples: configs.len(),
        condensate_fraction: state.condensate_fraction(),
        max_occupied_mode,
        thermo: state.summary(),
        config_hash: hash.into(),
    };
    Ok((record, photons))
}

/// Runs the whole sweep, writing one JSON record and one spectrum CSV per
/// temperature plus `thermo.json`, the condensate reference and `manifest.json`.
/// Points whose outputs already carry the current config hash are reused.
pub fn run_sweep(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunManifest, PipelineError> {
    with_threads(opts.threads, || run_sweep_inner(cfg, &opts.out_dir))?
}

fn run_sweep_inner(cfg: &ExperimentConfig, out: &Path) -> Result<RunManifest, PipelineError> {
    let started_unix = unix_now();
    let hash = config_hash(cfg)?;
    fs::create_dir_all(out)?;
    let mut timer = Timer(BTreeMap::new());
    let mut outputs = Vec::new();
    let mut failures = Vec::new();
    let mut resumed_points = Vec::new();

    let mut states = Vec::new();
    timer.time("thermo", || -> Result<(), PipelineError> {
        for (i, p) in cfg.sweep.iter().enumerate() {
            match solve_chemical_potential(&cfg.trap_at(p.value), p.value) {
                Ok(s) => states.push(Some(s)),
                Err(e) => {
                    failures.push(PointFailure { index: i, t: p.value, error: e.to_string() });
                    states.push(None);
                }
            }
        }
        Ok(())
    })?;
    let thermo_path = out.join("thermo.json");
    let summaries: Vec<_> = states.iter().flatten().map(|s| s.summary()).collect();
    write_thermo_json(&thermo_path, &summaries, &hash)?;
    outputs.push(OutputEntry { path: thermo_path, kind: "thermo".into() });

    let mut pending = Vec::new();
    let mut records: Vec<Option<PointRecord>> = vec![None; cfg.sweep.len()];
    for (i, state) in states.iter().enumerate() {
        let Some(state) = state else { continue };
        if let Some(rec) = load_completed(out, i, &hash) {
            log::info!("point {i} already complete, skipping");
            resumed_points.push(i);
            records[i] = Some(rec);
            continue;
        }
        let configs = timer.time("sampling", || sample_point(cfg, state, i));
        pending.push((i, configs));
    }

    let n_needed = pending
        .iter()
        .flat_map(|(_, cs)| cs.iter().filter_map(|c| c.max_occupied()))
        .max()
        .unwrap_or(0);
    let n_max = match cfg.truncation.n_max {
        Some(cap) => cap,
        None => n_needed,
    };
    let table = timer.time("propagation", || amplitude_table(cfg, n_max))?;

    for (i, configs) in &pending {
        let (i, point) = (*i, &cfg.sweep[*i]);
        let state = states[i].as_ref().expect("pending points have states");
        match timer.time("state", || point_record(cfg, point, state, &table, configs, i, &hash)) {
            Ok((rec, photons)) => {
                let (json, csv) = point_paths(out, i);
                write_spectrum_csv(&csv, &table.omegas, &photons, &hash)?;
                fs::write(&json, serde_json::to_vec_pretty(&rec)?)?;
                records[i] = Some(rec);
            }
            Err(e) => failures.push(PointFailure { index: i, t: point.value, error: e.to_string() }),
        }
    }
    for (i, r) in records.iter().enumerate() {
        if r.is_some() {
            let (json, csv) = point_paths(out, i);
            outputs.push(OutputEntry { path: json, kind: "point".into() });
            outputs.push(OutputEntry { path: csv, kind: "spectrum".into() });
        }
    }

    let reference = table.amplitudes(&condensate_occupations(cfg.trap.atoms), "condensate".into(), 1.0)?;
    let ref_path = out.join("condensate_spectrum.csv");
    let s: Vec<f64> = reference.chis.iter().map(|c| c.norm_sqr()).collect();
    write_spectrum_csv(&ref_path, &reference.omegas, &s, &hash)?;
    outputs.push(OutputEntry { path: ref_path, kind: "spectrum".into() });
    if cfg.outputs.amplitudes {
        let p = out.join("condensate_amplitudes.csv");
        write_amplitude_csv(&p, &reference, &hash)?;
        outputs.push(OutputEntry { path: p, kind: "amplitudes".into() });
    }
    if cfg.outputs.traces {
        for j in 0..table.grid.len() {
            let tr = configuration_trace(cfg, &condensate_occupations(cfg.trap.atoms), j, "condensate")?;
            let p = out.join(format!("condensate_trace_{j:03}.csv"));
            write_dipole_csv(&p, &tr, &hash)?;
            outputs.push(OutputEntry { path: p, kind: "trace".into() });
        }
    }

    failures.sort_by_key(|f| f.index);
    let manifest = RunManifest {
        config_hash: hash,
        version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix,
        finished_unix: unix_now(),
        timings_s: timer.0,
        outputs,
        resumed_points,
        failures,
        records: records.into_iter().flatten().collect(),
    };
    fs::write(out.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Reads and validates a config file; unreadable files count as config errors.
pub fn load_config(path: &Path) -> Result<crate::config::Validated, PipelineError> {
    let text = fs::read_to_string(path)
        .map_err(|e| PipelineError::Config(vec![ConfigError { field: "<file>".into(), message: format!("{}: {e}", path.display()) }]))?;
    crate::config::validate_config(&text).map_err(PipelineError::Config)
}

/// Mean photon number per grid mode of the sampled mixture at sweep point `index`.
pub fn point_spectrum(cfg: &ExperimentConfig, index: usize) -> Result<(Arc<Vec<f64>>, Vec<f64>), PipelineError> {
    let point = cfg
        .sweep
        .get(index)
        .ok_or_else(|| PipelineError::Numeric(format!("sweep point {index} out of range")))?;
    let state = solve_chemical_potential(&cfg.trap_at(point.value), point.value)?;
    let configs = sample_point(cfg, &state, index);
    let n_max = configs.iter().filter_map(|c| c.max_occupied()).max().unwrap_or(0);
    let table = amplitude_table(cfg, cfg.truncation.n_max.unwrap_or(n_max))?;
    let mixture = assemble_mixture(&table, &configs, &format!("T{index}"))?;
    Ok((table.omegas.clone(), mean_photons(&mixture)))
}

/// Coherent amplitudes of the all-condensed configuration.
pub fn condensate_amplitudes(cfg: &ExperimentConfig) -> Result<AmplitudeVector, PipelineError> {
    let table = amplitude_table(cfg, 0)?;
    table.amplitudes(&condensate_occupations(cfg.trap.atoms), "condensate".into(), 1.0)
}

/// Thermodynamic summaries for the sweep; errors if any point fails.
pub fn run_thermo(cfg: &ExperimentConfig) -> Result<Vec<ThermoSummary>, PipelineError> {
    Ok(thermal_states(cfg)?.iter().map(|s| s.summary()).collect())
}

/// `T_c` of the configured trap, if defined.
pub fn tc_of(cfg: &ExperimentConfig) -> Option<f64> {
    critical_temperature(&cfg.trap).ok()
}
