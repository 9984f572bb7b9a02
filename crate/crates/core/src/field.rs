//! Coherent amplitudes of the harmonic field from dipole time series.
//!
//! `χ_q = ξ(ω_q) Σ_i w_i e^{-iω_q t_i} d(t_i)` with trapezoidal weights and
//! `ξ(ω) = g0 √ω`. When every grid frequency sits on the bin lattice of a
//! (possibly zero-padded) DFT of the window, all amplitudes come from one FFT.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{DipoleTrace, TimeGrid};

/// Edge-to-peak ratio above which a trace counts as not decayed.
pub const EDGE_DECAY_TOL: f64 = 1e-3;

/// Largest zero-padding factor tried when looking for a commensurate FFT length.
pub const MAX_PAD_FACTOR: usize = 64;

const LATTICE_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum FieldError {
    #[error("invalid mode grid: {0}")]
    InvalidGrid(String),
    #[error("trace has {got} samples, grid expects {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("fast transform requested but the grid is not commensurate with the window")]
    NotCommensurate,
    #[error("{traces} traces for {modes} grid modes")]
    TraceCount { traces: usize, modes: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeGrid {
    pub omegas: Vec<f64>,
    pub coupling_g0: f64,
}

impl ModeGrid {
    pub fn new(omegas: Vec<f64>, coupling_g0: f64) -> Result<Self, FieldError> {
        if omegas.is_empty() {
            return Err(FieldError::InvalidGrid("no frequencies".into()));
        }
        if omegas.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(FieldError::InvalidGrid("frequencies must be positive and finite".into()));
        }
        if omegas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(FieldError::InvalidGrid("frequencies must be strictly increasing".into()));
        }
        if !coupling_g0.is_finite() {
            return Err(FieldError::InvalidGrid("coupling must be finite".into()));
        }
        Ok(Self { omegas, coupling_g0 })
    }

    /// `ω_L (1 + j / R)` for `j = 0 ..= (q_max - 1) R`: every harmonic from 1 to
    /// `q_max` plus `R - 1` sub-bins between neighbours.
    pub fn harmonic(omega_l: f64, q_max: usize, sub_bins: usize, coupling_g0: f64) -> Result<Self, FieldError> {
        if q_max < 1 || sub_bins < 1 {
            return Err(FieldError::InvalidGrid("need q_max >= 1 and sub_bins >= 1".into()));
        }
        let n = (q_max - 1) * sub_bins + 1;
        let omegas = (0..n).map(|j| omega_l * (1.0 + j as f64 / sub_bins as f64)).collect();
        Self::new(omegas, coupling_g0)
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    pub fn xi(&self, j: usize) -> f64 {
        self.coupling_g0 * self.omegas[j].sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeVector {
    pub omegas: Arc<Vec<f64>>,
    pub chis: Vec<Complex64>,
    pub config_label: String,
    pub weight: f64,
}

impl AmplitudeVector {
    pub fn zeros(grid: &ModeGrid, config_label: impl Into<String>, weight: f64) -> Self {
        Self {
            omegas: Arc::new(grid.omegas.clone()),
            chis: vec![Complex64::new(0.0, 0.0); grid.len()],
            config_label: config_label.into(),
            weight,
        }
    }

    pub fn same_grid(&self, other: &AmplitudeVector) -> bool {
        Arc::ptr_eq(&self.omegas, &other.omegas) || self.omegas == other.omegas
    }

    pub fn norm_sqr(&self) -> f64 {
        self.chis.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Which quadrature evaluated a set of amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformPath {
    Direct,
    Fast,
}

fn trapezoid_weight(i: usize, n_points: usize, dt: f64) -> f64 {
    if i == 0 || i + 1 == n_points {
        0.5 * dt
    } else {
        dt
    }
}

fn check_length(values: &[Complex64], grid: &TimeGrid) -> Result<(), FieldError> {
    if values.len() != grid.n_points() {
        return Err(FieldError::LengthMismatch { got: values.len(), expected: grid.n_points() });
    }
    Ok(())
}

/// `true` when both ends of the trace are small relative to its peak.
pub fn edge_decayed(trace: &DipoleTrace) -> bool {
    let peak = trace.peak_magnitude();
    peak == 0.0 || trace.edge_magnitude() <= EDGE_DECAY_TOL * peak
}

fn warn_edges(trace: &DipoleTrace) {
    if !edge_decayed(trace) {
        log::warn!(
            "dipole trace '{}' not decayed at window edges (edge {:.3e}, peak {:.3e})",
            trace.config_label,
            trace.edge_magnitude(),
            trace.peak_magnitude()
        );
    }
}

/// `Σ_i w_i e^{-iω t_i} d_i` by direct summation.
pub fn direct_transform(values: &[Complex64], grid: &TimeGrid, omega: f64) -> Complex64 {
    let n = values.len();
    values
        .iter()
        .enumerate()
        .map(|(i, d)| Complex64::from_polar(trapezoid_weight(i, n, grid.dt), -omega * grid.time(i)) * d)
        .sum()
}

/// FFT length and bin index per frequency, if all frequencies lie on the
/// bin lattice of `m · n_steps` points for some `m ≤ MAX_PAD_FACTOR`.
pub fn commensurate_bins(omegas: &[f64], grid: &TimeGrid) -> Option<(usize, Vec<usize>)> {
    let n_steps = grid.n_steps();
    for m in 1..=MAX_PAD_FACTOR {
        let n_fft = m * n_steps;
        let unit = 2.0 * PI / (n_fft as f64 * grid.dt);
        let mut bins = Vec::with_capacity(omegas.len());
        for &w in omegas {
            let k = w / unit;
            if (k - k.round()).abs() > LATTICE_TOL * k.abs().max(1.0) {
                break;
            }
            bins.push(k.round() as usize % n_fft);
        }
        if bins.len() == omegas.len() {
            return Some((n_fft, bins));
        }
    }
    None
}

/// `Σ_i w_i e^{-iω_q t_i} d_i` for every frequency through one FFT of the
/// weighted samples folded modulo the FFT length.
pub fn fast_transform(values: &[Complex64], grid: &TimeGrid, omegas: &[f64]) -> Result<Vec<Complex64>, FieldError> {
    check_length(values, grid)?;
    let (n_fft, bins) = commensurate_bins(omegas, grid).ok_or(FieldError::NotCommensurate)?;
    let n = values.len();
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
    for (i, d) in values.iter().enumerate() {
        buf[i % n_fft] += d * trapezoid_weight(i, n, grid.dt);
    }
    FftPlanner::new().plan_fft_forward(n_fft).process(&mut buf);
    Ok(bins
        .iter()
        .zip(omegas)
        .map(|(&k, &w)| buf[k] * Complex64::from_polar(1.0, -w * grid.start))
        .collect())
}

/// Amplitudes on every grid frequency from a single trace.
pub fn coherent_amplitude(trace: &DipoleTrace, grid: &ModeGrid) -> Result<AmplitudeVector, FieldError> {
    coherent_amplitude_with(trace, grid, None).map(|(a, _)| a)
}

/// As [`coherent_amplitude`], optionally forcing one path. `None` picks the
/// fast path whenever the grid is commensurate.
pub fn coherent_amplitude_with(
    trace: &DipoleTrace,
    grid: &ModeGrid,
    path: Option<TransformPath>,
) -> Result<(AmplitudeVector, TransformPath), FieldError> {
    check_length(&trace.values, &trace.grid)?;
    warn_edges(trace);
    let fast_ok = commensurate_bins(&grid.omegas, &trace.grid).is_some();
    let chosen = match path {
        Some(TransformPath::Fast) if !fast_ok => return Err(FieldError::NotCommensurate),
        Some(p) => p,
        None if fast_ok => TransformPath::Fast,
        None => TransformPath::Direct,
    };
    let raw = match chosen {
        TransformPath::Fast => fast_transform(&trace.values, &trace.grid, &grid.omegas)?,
        TransformPath::Direct => grid.omegas.iter().map(|&w| direct_transform(&trace.values, &trace.grid, w)).collect(),
    };
    let mut out = AmplitudeVector::zeros(grid, trace.config_label.clone(), 1.0);
    for (j, (slot, r)) in out.chis.iter_mut().zip(raw).enumerate() {
        *slot = r * grid.xi(j);
    }
    Ok((out, chosen))
}

/// Amplitudes where grid mode `j` is driven by its own trace `traces[j]`,
/// as happens when the emission wavevector follows the frequency.
pub fn coherent_amplitude_per_mode(traces: &[DipoleTrace], grid: &ModeGrid) -> Result<AmplitudeVector, FieldError> {
    if traces.len() != grid.len() {
        return Err(FieldError::TraceCount { traces: traces.len(), modes: grid.len() });
    }
    let label = traces.first().map(|t| t.config_label.clone()).unwrap_or_default();
    let mut out = AmplitudeVector::zeros(grid, label, 1.0);
    for (j, tr) in traces.iter().enumerate() {
        check_length(&tr.values, &tr.grid)?;
        warn_edges(tr);
        out.chis[j] = grid.xi(j) * direct_transform(&tr.values, &tr.grid, grid.omegas[j]);
    }
    Ok(out)
}

/// Precomputed `w_i e^{-iω_j t_i}` for repeated transforms of real series
/// sharing one time grid.
#[derive(Debug, Clone)]
pub struct QuadratureTable {
    pub grid: TimeGrid,
    rows: Vec<Vec<Complex64>>,
}

impl QuadratureTable {
    pub fn new(grid: TimeGrid, omegas: &[f64]) -> Self {
        let n = grid.n_points();
        let rows = omegas
            .iter()
            .map(|&w| (0..n).map(|i| Complex64::from_polar(trapezoid_weight(i, n, grid.dt), -w * grid.time(i))).collect())
            .collect();
        Self { grid, rows }
    }

    /// `Σ_i w_i e^{-iω_j t_i} d_i` for a real series.
    pub fn apply(&self, j: usize, values: &[f64]) -> Complex64 {
        self.rows[j].iter().zip(values).map(|(k, &d)| k * d).sum()
    }
}

/// `S(ω_q) = |χ_q|²`, the mean photon number of each mode.
pub fn spectrum(amps: &AmplitudeVector) -> Vec<(f64, f64)> {
    amps.omegas.iter().zip(&amps.chis).map(|(&w, c)| (w, c.norm_sqr())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n_steps: usize, dt: f64) -> TimeGrid {
        TimeGrid::new(0.0, n_steps as f64 * dt, dt).unwrap()
    }

    fn trace_from(g: TimeGrid, f: impl Fn(f64) -> Complex64) -> DipoleTrace {
        DipoleTrace { q: None, grid: g, values: g.times().into_iter().map(f).collect(), config_label: "t".into() }
    }

    fn max_rel(a: &[Complex64], b: &[Complex64]) -> f64 {
        let scale = b.iter().map(|z| z.norm()).fold(0.0, f64::max);
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale
    }

    #[test]
    fn grid_validation() {
        assert!(ModeGrid::new(vec![1.0, 1.0], 1.0).is_err());
        assert!(ModeGrid::new(vec![-1.0, 1.0], 1.0).is_err());
        assert!(ModeGrid::new(vec![], 1.0).is_err());
        let h = ModeGrid::harmonic(2.0, 3, 4, 0.5).unwrap();
        assert_eq!(h.len(), 9);
        assert_eq!(h.omegas[4], 4.0);
        assert_eq!(h.omegas[8], 6.0);
        assert!((h.xi(0) - 0.5 * 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn zero_trace_gives_zero_amplitudes() {
        let g = grid(200, 0.01);
        let tr = DipoleTrace::zeros(g, None, "z");
        let mg = ModeGrid::harmonic(2.0 * PI / 2.0, 5, 2, 1.0).unwrap();
        let a = coherent_amplitude(&tr, &mg).unwrap();
        assert!(a.chis.iter().all(|c| c.norm() == 0.0));
        assert!(spectrum(&a).iter().all(|(_, s)| *s == 0.0));
    }

    #[test]
    fn fast_matches_direct() {
        let g = grid(400, 0.005);
        let tw = 2.0;
        let w0 = 2.0 * PI / tw;
        let tr = trace_from(g, |t| {
            let env = (PI * t / tw).sin().powi(2);
            Complex64::new(env * (3.0 * w0 * t).sin() + 0.3 * env * (w0 * t).cos(), 0.0)
        });
        let mg = ModeGrid::harmonic(w0, 9, 4, 0.7).unwrap();
        let (fast, p) = coherent_amplitude_with(&tr, &mg, Some(TransformPath::Fast)).unwrap();
        assert_eq!(p, TransformPath::Fast);
        let (direct, _) = coherent_amplitude_with(&tr, &mg, Some(TransformPath::Direct)).unwrap();
        assert!(max_rel(&fast.chis, &direct.chis) < 1e-10);
    }

    #[test]
    fn fast_path_handles_offset_start() {
        let g = TimeGrid::new(0.5, 2.5, 0.01).unwrap();
        let tr = trace_from(g, |t| Complex64::new((t * 5.0).sin(), (t * 2.0).cos()));
        let mg = ModeGrid::harmonic(PI, 6, 2, 1.0).unwrap();
        let (fast, _) = coherent_amplitude_with(&tr, &mg, Some(TransformPath::Fast)).unwrap();
        let (direct, _) = coherent_amplitude_with(&tr, &mg, Some(TransformPath::Direct)).unwrap();
        assert!(max_rel(&fast.chis, &direct.chis) < 1e-10);
    }

    #[test]
    fn incommensurate_grid_falls_back() {
        let g = grid(100, 0.01);
        let tr = trace_from(g, |t| Complex64::new(t.sin(), 0.0));
        let mg = ModeGrid::new(vec![1.0, 2.0_f64.sqrt() * 3.0], 1.0).unwrap();
        let (_, p) = coherent_amplitude_with(&tr, &mg, None).unwrap();
        assert_eq!(p, TransformPath::Direct);
        assert_eq!(coherent_amplitude_with(&tr, &mg, Some(TransformPath::Fast)).unwrap_err(), FieldError::NotCommensurate);
    }

    #[test]
    fn cosine_gives_half_window() {
        let tw = 4.0;
        let g = grid(4000, tw / 4000.0);
        let w0 = 3.0 * 2.0 * PI / tw;
        let tr = trace_from(g, |t| Complex64::new((w0 * t).cos(), 0.0));
        let mg = ModeGrid::new(vec![w0], 0.2).unwrap();
        let a = coherent_amplitude(&tr, &mg).unwrap();
        let expect = mg.xi(0) * tw / 2.0;
        assert!((a.chis[0].norm() - expect).abs() < 0.01 * expect);
    }

    #[test]
    fn linear_in_trace() {
        let g = grid(300, 0.01);
        let tr = trace_from(g, |t| Complex64::new((7.0 * t).sin() * (-t).exp(), 0.0));
        let mg = ModeGrid::harmonic(2.0 * PI / 3.0, 4, 3, 1.0).unwrap();
        let a = coherent_amplitude(&tr, &mg).unwrap();
        let b = coherent_amplitude(&tr.scaled(-2.5), &mg).unwrap();
        for (x, y) in a.chis.iter().zip(&b.chis) {
            assert!((x * -2.5 - y).norm() <= 1e-12 * x.norm().max(1e-300));
        }
    }

    #[test]
    fn plancherel_on_dense_grid() {
        let tw = 20.0;
        let n = 2000;
        let dt = tw / n as f64;
        let g = grid(n, dt);
        let w0 = 30.0;
        let tr = trace_from(g, |t| Complex64::from_polar((-(t - 10.0).powi(2) / 2.0).exp(), w0 * t));
        let dw = 2.0 * PI / tw;
        let omegas: Vec<f64> = (1..n).map(|k| k as f64 * dw).filter(|w| *w < 2.0 * w0).collect();
        let mg = ModeGrid::new(omegas, 1.0).unwrap();
        let a = coherent_amplitude(&tr, &mg).unwrap();
        let lhs: f64 = a.chis.iter().enumerate().map(|(j, c)| (c / mg.xi(j)).norm_sqr() * dw).sum();
        let rhs: f64 = 2.0 * PI * tr.values.iter().map(|v| v.norm_sqr() * dt).sum::<f64>();
        assert!((lhs - rhs).abs() < 0.01 * rhs, "{lhs} vs {rhs}");
    }

    #[test]
    fn single_line_dominates() {
        let tw = 6.0;
        let g = grid(1200, tw / 1200.0);
        let w0 = 2.0 * PI / tw * 5.0;
        let tr = trace_from(g, |t| Complex64::new((w0 * t).sin() * (PI * t / tw).sin().powi(2), 0.0));
        let mg = ModeGrid::harmonic(w0 / 5.0, 10, 1, 1.0).unwrap();
        let s = spectrum(&coherent_amplitude(&tr, &mg).unwrap());
        let (imax, _) = s.iter().enumerate().max_by(|a, b| a.1 .1.total_cmp(&b.1 .1)).unwrap();
        assert_eq!(s[imax].0, w0);
    }

    #[test]
    fn per_mode_matches_single_trace_when_equal() {
        let g = grid(200, 0.01);
        let tr = trace_from(g, |t| Complex64::new((9.0 * t).sin(), 0.0));
        let mg = ModeGrid::harmonic(PI, 3, 2, 0.3).unwrap();
        let traces = vec![tr.clone(); mg.len()];
        let a = coherent_amplitude_per_mode(&traces, &mg).unwrap();
        let b = coherent_amplitude_with(&tr, &mg, Some(TransformPath::Direct)).unwrap().0;
        assert_eq!(a.chis, b.chis);
        assert!(coherent_amplitude_per_mode(&traces[..2], &mg).is_err());
    }

    #[test]
    fn quadrature_table_matches_direct() {
        let g = grid(150, 0.02);
        let vals: Vec<f64> = g.times().iter().map(|t| (4.0 * t).cos() * t).collect();
        let cvals: Vec<Complex64> = vals.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let omegas = [1.0, 3.3, 7.0];
        let tab = QuadratureTable::new(g, &omegas);
        for (j, &w) in omegas.iter().enumerate() {
            assert!((tab.apply(j, &vals) - direct_transform(&cvals, &g, w)).norm() < 1e-13);
        }
    }

    #[test]
    fn edge_check() {
        let g = grid(100, 0.01);
        assert!(!edge_decayed(&trace_from(g, |_| Complex64::new(1.0, 0.0))));
        assert!(edge_decayed(&trace_from(g, |t| Complex64::new((PI * t).sin(), 0.0))));
    }
}
