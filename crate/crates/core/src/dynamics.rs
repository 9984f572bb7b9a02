//! Driven two-manifold dynamics on a truncated single-particle basis.
//!
//! The stepper works in the interaction picture of
//! `H0 = diag(E_g, E_e + δE)`, where the drive is the chiral block
//! `f(t) [[0, B], [B†, 0]]` with `B = P_g η P_e†`. A thin SVD `η = W Σ V†`
//! turns the midpoint exponential into independent 2×2 rotations, so every
//! step is an exact unitary and the free evolution is never discretised.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::franck_condon::{default_excited_margin, fc_factor_1d, FcMatrix};
use crate::trap::{ModeIndex, OccupationConfig};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Couplings weaker than this do not constrain the time step.
pub const COUPLING_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("basis mismatch: {0}")]
    BasisMismatch(String),
    #[error("time step {dt} exceeds the stability bound {max_dt} (largest energy scale {e_max})")]
    StepTooLarge { dt: f64, max_dt: f64, e_max: f64 },
    #[error("configuration occupies mode {0} outside the ground basis")]
    ConfigOutsideBasis(ModeIndex),
    #[error("invalid pulse: {0}")]
    InvalidPulse(String),
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Envelope {
    Rectangular,
    #[serde(alias = "sin^2", alias = "sin²")]
    Sin2,
}

/// Uniform grid `start, start + dt, …, stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub start: f64,
    pub stop: f64,
    pub dt: f64,
}

impl TimeGrid {
    pub fn new(start: f64, stop: f64, dt: f64) -> Result<Self, DynamicsError> {
        if !(dt > 0.0) || !(stop > start) || !start.is_finite() || !stop.is_finite() {
            return Err(DynamicsError::InvalidGrid(format!("need start < stop and dt > 0, got ({start}, {stop}, {dt})")));
        }
        let steps = (stop - start) / dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return Err(DynamicsError::InvalidGrid(format!(
                "window length {} is not a whole number of steps of {dt}",
                stop - start
            )));
        }
        Ok(Self { start, stop, dt })
    }

    /// Finest uniform grid on `[start, stop]` whose step does not exceed `max_dt`.
    pub fn covering(start: f64, stop: f64, max_dt: f64) -> Result<Self, DynamicsError> {
        if !(max_dt > 0.0) || !(stop > start) {
            return Err(DynamicsError::InvalidGrid(format!("cannot cover ({start}, {stop}) with step {max_dt}")));
        }
        let n = ((stop - start) / max_dt).ceil().max(1.0);
        Ok(Self { start, stop, dt: (stop - start) / n })
    }

    pub fn n_steps(&self) -> usize {
        ((self.stop - self.start) / self.dt).round() as usize
    }

    pub fn n_points(&self) -> usize {
        self.n_steps() + 1
    }

    pub fn time(&self, i: usize) -> f64 {
        self.start + i as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_points()).map(|i| self.time(i)).collect()
    }

    /// Same window, step divided by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        Self { start: self.start, stop: self.stop, dt: self.dt / factor as f64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub omega_l: f64,
    pub k_l: [f64; 3],
    /// Combined `|α| ξ(k_L)` prefactor.
    pub drive_strength: f64,
    pub envelope: Envelope,
    /// Envelope length in optical cycles, starting at `t = 0`.
    pub cycles: f64,
    pub grid: TimeGrid,
}

impl PulseSpec {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.omega_l > 0.0) {
            return Err(DynamicsError::InvalidPulse(format!("omega_L must be positive, got {}", self.omega_l)));
        }
        if !(self.cycles > 0.0) {
            return Err(DynamicsError::InvalidPulse(format!("cycles must be positive, got {}", self.cycles)));
        }
        if !self.drive_strength.is_finite() || self.k_l.iter().any(|k| !k.is_finite()) {
            return Err(DynamicsError::InvalidPulse("non-finite drive parameters".into()));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.cycles * 2.0 * PI / self.omega_l
    }

    pub fn envelope_at(&self, t: f64) -> f64 {
        let tp = self.duration();
        if !(0.0..=tp).contains(&t) {
            return 0.0;
        }
        match self.envelope {
            Envelope::Rectangular => 1.0,
            Envelope::Sin2 => (PI * t / tp).sin().powi(2),
        }
    }

    /// Scalar drive `f(t) = drive_strength · env(t) · sin(ω_L t)`.
    pub fn field(&self, t: f64) -> f64 {
        self.drive_strength * self.envelope_at(t) * (self.omega_l * t).sin()
    }

    pub fn k_norm(&self) -> f64 {
        crate::franck_condon::wavevector_norm(self.k_l)
    }
}

/// Retained ground and excited modes with the excited-manifold offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisTruncation {
    pub g_modes: Vec<ModeIndex>,
    pub e_modes: Vec<ModeIndex>,
    pub delta_e: f64,
    pub omega_t: f64,
}

impl BasisTruncation {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if self.g_modes.is_empty() || self.e_modes.is_empty() {
            return Err(DynamicsError::BasisMismatch("bases must be non-empty".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.g_modes.len() + self.e_modes.len()
    }

    pub fn energies_g(&self) -> Vec<f64> {
        self.g_modes.iter().map(|m| self.omega_t * m.shell() as f64).collect()
    }

    pub fn energies_e(&self) -> Vec<f64> {
        self.e_modes.iter().map(|m| self.omega_t * m.shell() as f64 + self.delta_e).collect()
    }

    /// Checks that `fc` rows and columns are exactly the ground and excited bases.
    pub fn check_fc(&self, fc: &FcMatrix) -> Result<(), DynamicsError> {
        if fc.rows != self.g_modes || fc.cols != self.e_modes {
            return Err(DynamicsError::BasisMismatch(format!(
                "FC matrix is {}x{} on different labels, basis is {}x{}",
                fc.nrows(),
                fc.ncols(),
                self.g_modes.len(),
                self.e_modes.len()
            )));
        }
        Ok(())
    }
}

/// Largest energy scale the grid has to resolve: retained transition
/// energies with non-negligible coupling, the peak Rabi frequency and ω_L.
pub fn max_energy_scale(eg: &[f64], ee: &[f64], eta: &DMatrix<Complex64>, sigma_max: f64, pulse: &PulseSpec) -> f64 {
    let mut e_max = pulse.omega_l.max(pulse.drive_strength.abs() * sigma_max);
    for (i, &g) in eg.iter().enumerate() {
        for (j, &e) in ee.iter().enumerate() {
            if eta[(i, j)].norm() > COUPLING_TOL {
                e_max = e_max.max((e - g).abs());
            }
        }
    }
    e_max
}

/// `dt ≤ 2π / (20 E_max)`.
pub fn max_stable_dt(e_max: f64) -> f64 {
    2.0 * PI / (20.0 * e_max)
}

/// Lab-frame `H_sc(t)` on `g ⊕ e`.
pub fn build_hsc(
    t: f64,
    trunc: &BasisTruncation,
    pulse: &PulseSpec,
    fc_kl: &FcMatrix,
) -> Result<DMatrix<Complex64>, DynamicsError> {
    trunc.validate()?;
    trunc.check_fc(fc_kl)?;
    let (ng, ne) = (trunc.g_modes.len(), trunc.e_modes.len());
    let mut h = DMatrix::zeros(ng + ne, ng + ne);
    for (i, e) in trunc.energies_g().into_iter().chain(trunc.energies_e()).enumerate() {
        h[(i, i)] = Complex64::new(e, 0.0);
    }
    let f = pulse.field(t);
    for i in 0..ng {
        for j in 0..ne {
            let v = fc_kl.entries[(i, j)] * f;
            h[(i, ng + j)] = v;
            h[(ng + j, i)] = v.conj();
        }
    }
    Ok(h)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagatorSnapshot {
    pub t: f64,
    pub u: DMatrix<Complex64>,
}

impl PropagatorSnapshot {
    /// `‖U†U − I‖_max`.
    pub fn unitarity_residual(&self) -> f64 {
        let n = self.u.ncols();
        let d = self.u.ad_mul(&self.u) - DMatrix::<Complex64>::identity(n, n);
        d.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// SVD-based interaction-picture stepper for one pulse and basis.
#[derive(Debug, Clone)]
pub struct Propagator {
    pulse: PulseSpec,
    eg: Vec<f64>,
    ee: Vec<f64>,
    w: DMatrix<Complex64>,
    v: DMatrix<Complex64>,
    sigma: Vec<f64>,
    e_max: f64,
}

impl Propagator {
    pub fn new(trunc: &BasisTruncation, pulse: &PulseSpec, fc_kl: &FcMatrix) -> Result<Self, DynamicsError> {
        trunc.validate()?;
        trunc.check_fc(fc_kl)?;
        Self::from_parts(trunc.energies_g(), trunc.energies_e(), &fc_kl.entries, pulse)
    }

    fn from_parts(eg: Vec<f64>, ee: Vec<f64>, eta: &DMatrix<Complex64>, pulse: &PulseSpec) -> Result<Self, DynamicsError> {
        pulse.validate()?;
        let svd = eta.clone().svd(true, true);
        let w = svd.u.expect("requested U");
        let v = svd.v_t.expect("requested V^T").adjoint();
        let sigma: Vec<f64> = svd.singular_values.iter().copied().collect();
        let sigma_max = sigma.iter().copied().fold(0.0, f64::max);
        let e_max = max_energy_scale(&eg, &ee, eta, sigma_max, pulse);
        let max_dt = max_stable_dt(e_max);
        if pulse.grid.dt > max_dt * (1.0 + 1e-12) {
            return Err(DynamicsError::StepTooLarge { dt: pulse.grid.dt, max_dt, e_max });
        }
        Ok(Self { pulse: *pulse, eg, ee, w, v, sigma, e_max })
    }

    pub fn e_max(&self) -> f64 {
        self.e_max
    }

    pub fn grid(&self) -> TimeGrid {
        self.pulse.grid
    }

    /// One midpoint step from `t` to `t + dt` on interaction-picture columns.
    fn step(&self, t: f64, dt: f64, xg: &mut DMatrix<Complex64>, xe: &mut DMatrix<Complex64>) {
        let tm = t + 0.5 * dt;
        let f = self.pulse.field(tm);
        if f == 0.0 {
            return;
        }
        let mut wt = self.w.clone();
        for (i, &e) in self.eg.iter().enumerate() {
            let ph = Complex64::from_polar(1.0, e * tm);
            for c in wt.row_mut(i).iter_mut() {
                *c *= ph;
            }
        }
        let mut vt = self.v.clone();
        for (j, &e) in self.ee.iter().enumerate() {
            let ph = Complex64::from_polar(1.0, e * tm);
            for c in vt.row_mut(j).iter_mut() {
                *c *= ph;
            }
        }
        let a = wt.ad_mul(xg);
        let b = vt.ad_mul(xe);
        let mut da = a.clone();
        let mut db = b.clone();
        for (l, &s) in self.sigma.iter().enumerate() {
            let th = f * s * dt;
            let (sn, cs) = th.sin_cos();
            for c in 0..a.ncols() {
                da[(l, c)] = (cs - 1.0) * a[(l, c)] - I * sn * b[(l, c)];
                db[(l, c)] = (cs - 1.0) * b[(l, c)] - I * sn * a[(l, c)];
            }
        }
        *xg += wt * da;
        *xe += vt * db;
    }

    /// Maps interaction-picture columns to the lab frame at time `t`.
    fn to_lab(&self, t: f64, xg: &DMatrix<Complex64>, xe: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let (ng, ne) = (self.eg.len(), self.ee.len());
        let mut out = DMatrix::zeros(ng + ne, xg.ncols());
        for c in 0..xg.ncols() {
            for i in 0..ng {
                out[(i, c)] = Complex64::from_polar(1.0, -self.eg[i] * t) * xg[(i, c)];
            }
            for j in 0..ne {
                out[(ng + j, c)] = Complex64::from_polar(1.0, -self.ee[j] * t) * xe[(j, c)];
            }
        }
        out
    }

    /// Evolves the given lab-frame initial columns (rows on `g ⊕ e`, set at
    /// the grid start) and calls `visit(i, t, ψ_lab)` at every grid point.
    pub fn evolve<F>(&self, init: &DMatrix<Complex64>, mut visit: F)
    where
        F: FnMut(usize, f64, &DMatrix<Complex64>),
    {
        let ng = self.eg.len();
        let grid = self.pulse.grid;
        let t0 = grid.start;
        let mut xg = init.rows(0, ng).into_owned();
        let mut xe = init.rows(ng, self.ee.len()).into_owned();
        // interaction picture relative to t = 0
        for c in 0..init.ncols() {
            for i in 0..ng {
                xg[(i, c)] *= Complex64::from_polar(1.0, self.eg[i] * t0);
            }
            for j in 0..self.ee.len() {
                xe[(j, c)] *= Complex64::from_polar(1.0, self.ee[j] * t0);
            }
        }
        visit(0, t0, &self.to_lab(t0, &xg, &xe));
        for i in 0..grid.n_steps() {
            let t = grid.time(i);
            self.step(t, grid.dt, &mut xg, &mut xe);
            let t1 = grid.time(i + 1);
            visit(i + 1, t1, &self.to_lab(t1, &xg, &xe));
        }
    }

    /// Lab-frame propagator `U(t)` at every grid point.
    pub fn snapshots(&self) -> Vec<PropagatorSnapshot> {
        let n = self.eg.len() + self.ee.len();
        let mut out = Vec::with_capacity(self.pulse.grid.n_points());
        self.evolve(&DMatrix::identity(n, n), |_, t, u| out.push(PropagatorSnapshot { t, u: u.clone() }));
        out
    }

    pub fn final_unitary(&self) -> DMatrix<Complex64> {
        let n = self.eg.len() + self.ee.len();
        let mut last = DMatrix::identity(n, n);
        self.evolve(&DMatrix::identity(n, n), |_, _, u| last = u.clone());
        last
    }
}

/// Propagates the full basis and returns `U(t)` on the pulse grid.
pub fn propagate(
    trunc: &BasisTruncation,
    pulse: &PulseSpec,
    fc_kl: &FcMatrix,
) -> Result<Vec<PropagatorSnapshot>, DynamicsError> {
    Ok(Propagator::new(trunc, pulse, fc_kl)?.snapshots())
}

/// Time series of `⟨n,0|D_q(t)|n,0⟩` for one emission wavevector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DipoleTrace {
    /// Emission wavevector; `None` for externally supplied traces.
    pub q: Option<[f64; 3]>,
    pub grid: TimeGrid,
    pub values: Vec<Complex64>,
    pub config_label: String,
}

impl DipoleTrace {
    pub fn zeros(grid: TimeGrid, q: Option<[f64; 3]>, config_label: impl Into<String>) -> Self {
        Self { q, grid, values: vec![Complex64::new(0.0, 0.0); grid.n_points()], config_label: config_label.into() }
    }

    pub fn times(&self) -> Vec<f64> {
        self.grid.times()
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// `values += c · other.values`.
    pub fn add_scaled(&mut self, other: &DipoleTrace, c: f64) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b * c;
        }
    }

    /// Largest `|d|` at the first and last sample.
    pub fn edge_magnitude(&self) -> f64 {
        let first = self.values.first().map_or(0.0, |v| v.norm());
        let last = self.values.last().map_or(0.0, |v| v.norm());
        first.max(last)
    }

    pub fn peak_magnitude(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// `2 Re(ψ_g† η ψ_e)`: diagonal element of the off-diagonal one-body dipole.
fn dipole_element(psi_g: &[Complex64], eta: &DMatrix<Complex64>, psi_e: &[Complex64]) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (j, &pe) in psi_e.iter().enumerate() {
        if pe == Complex64::new(0.0, 0.0) {
            continue;
        }
        let col = eta.column(j);
        let mut inner = Complex64::new(0.0, 0.0);
        for (i, &pg) in psi_g.iter().enumerate() {
            inner += pg.conj() * col[i];
        }
        acc += inner * pe;
    }
    2.0 * acc.re
}

/// `d_q(t) = Σ_k n_k (U† D_q U)_{kk}` over the occupied ground modes.
pub fn dipole_expectation(
    config: &OccupationConfig,
    snapshots: &[PropagatorSnapshot],
    fc_q: &FcMatrix,
    grid: TimeGrid,
    config_label: &str,
) -> Result<DipoleTrace, DynamicsError> {
    let (ng, ne) = (fc_q.nrows(), fc_q.ncols());
    if snapshots.len() != grid.n_points() {
        return Err(DynamicsError::BasisMismatch(format!(
            "{} snapshots for a grid of {} points",
            snapshots.len(),
            grid.n_points()
        )));
    }
    let mut occupied = Vec::new();
    for (mode, &n) in &config.occupations {
        if n == 0 {
            continue;
        }
        let k = fc_q.rows.iter().position(|r| r == mode).ok_or(DynamicsError::ConfigOutsideBasis(*mode))?;
        occupied.push((k, n as f64));
    }
    let mut trace = DipoleTrace::zeros(grid, Some(fc_q.q), config_label);
    for (slot, snap) in trace.values.iter_mut().zip(snapshots) {
        if snap.u.nrows() != ng + ne {
            return Err(DynamicsError::BasisMismatch(format!(
                "propagator dimension {} does not match FC blocks {}+{}",
                snap.u.nrows(),
                ng,
                ne
            )));
        }
        let mut d = 0.0;
        for &(k, n) in &occupied {
            let col = snap.u.column(k);
            let psi: Vec<Complex64> = col.iter().copied().collect();
            d += n * dipole_element(&psi[..ng], &fc_q.entries, &psi[ng..]);
        }
        *slot = Complex64::new(d, 0.0);
    }
    Ok(trace)
}

/// Window sizes for the per-mode axis engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    /// Fixed ground half-width around the initial mode.
    pub g_base: usize,
    /// Extra ground half-width per unit of `|k_L| x0 · sqrt(2n + 1)`.
    pub g_spread: f64,
    /// Extra excited shells beyond the ground window, added to the default FC margin.
    pub e_extra: usize,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self { g_base: 6, g_spread: 3.0, e_extra: 2 }
    }
}

/// Ground and excited index ranges used for initial mode `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeWindow {
    pub g_lo: usize,
    pub g_hi: usize,
    pub e_lo: usize,
    pub e_hi: usize,
}

impl WindowSpec {
    pub fn window(&self, n: usize, k_x0: f64) -> ModeWindow {
        let spread = |m: usize| (self.g_spread * k_x0.abs() * (2.0 * m as f64 + 1.0).sqrt()).ceil() as usize;
        let wg = self.g_base + spread(n);
        let g_lo = n.saturating_sub(wg);
        let g_hi = n + wg;
        let we = default_excited_margin(k_x0) + self.e_extra + spread(g_hi) / 2;
        ModeWindow { g_lo, g_hi, e_lo: g_lo.saturating_sub(we), e_hi: g_hi + we }
    }
}

/// Per-mode response of atoms initially in `(n, ·, ·)`.
///
/// With an isotropic trap, identical potentials and every wavevector along
/// the drive axis, the single-particle problem factorises: transverse quantum
/// numbers are spectators whose phases cancel in the dipole, so the response
/// of `(n, ny, nz)` equals that of `(n, 0, 0)` and only a one-dimensional
/// chain along the drive axis has to be propagated. Each chain is truncated
/// to a window around `n`.
#[derive(Debug, Clone)]
pub struct AxisEngine {
    pub pulse: PulseSpec,
    pub delta_e: f64,
    pub omega_t: f64,
    pub x0: f64,
    /// Emission wavenumbers along the drive axis (inverse length).
    pub emission_q: Vec<f64>,
    pub window: WindowSpec,
}

/// Real dipole samples for one initial mode, one series per emission wavenumber.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeDipoles {
    pub n: usize,
    pub grid: TimeGrid,
    pub series: Vec<Vec<f64>>,
    pub max_unitarity_residual: f64,
}

impl AxisEngine {
    pub fn k_x0(&self) -> f64 {
        self.pulse.k_norm() * self.x0
    }

    fn window_eta(&self, w: &ModeWindow, qx0: f64) -> DMatrix<Complex64> {
        DMatrix::from_fn(w.g_hi - w.g_lo + 1, w.e_hi - w.e_lo + 1, |i, j| fc_factor_1d(w.g_lo + i, w.e_lo + j, qx0))
    }

    /// Largest energy scale over the windows of modes `0..=n_max`.
    pub fn e_max(&self, n_max: usize) -> f64 {
        let kx0 = self.k_x0();
        // widest window spans the largest transition energy
        let w = self.window.window(n_max, kx0);
        let span = (w.e_hi - w.g_lo).max(w.g_hi.saturating_sub(w.e_lo)) as f64 * self.omega_t;
        let transition = (self.delta_e.abs() + span).max((self.delta_e - span).abs());
        // |η| ≤ 1 bounds σ_max
        transition.max(self.pulse.omega_l).max(self.pulse.drive_strength.abs())
    }

    pub fn check_grid(&self, n_max: usize) -> Result<(), DynamicsError> {
        self.pulse.validate()?;
        let e_max = self.e_max(n_max);
        let max_dt = max_stable_dt(e_max);
        if self.pulse.grid.dt > max_dt * (1.0 + 1e-12) {
            return Err(DynamicsError::StepTooLarge { dt: self.pulse.grid.dt, max_dt, e_max });
        }
        Ok(())
    }

    /// Propagates one chain and samples the dipole for every emission wavenumber.
    pub fn mode_dipoles(&self, n: usize) -> Result<ModeDipoles, DynamicsError> {
        self.pulse.validate()?;
        let kx0 = self.k_x0();
        let w = self.window.window(n, kx0);
        let eg: Vec<f64> = (w.g_lo..=w.g_hi).map(|m| self.omega_t * m as f64).collect();
        let ee: Vec<f64> = (w.e_lo..=w.e_hi).map(|m| self.omega_t * m as f64 + self.delta_e).collect();
        let eta_l = self.window_eta(&w, kx0);
        let prop = Propagator::from_parts(eg, ee, &eta_l, &self.pulse)?;
        let etas: Vec<DMatrix<Complex64>> = self.emission_q.iter().map(|q| self.window_eta(&w, q * self.x0)).collect();

        let ng = w.g_hi - w.g_lo + 1;
        let ne = w.e_hi - w.e_lo + 1;
        let mut init = DMatrix::zeros(ng + ne, 1);
        init[(n - w.g_lo, 0)] = Complex64::new(1.0, 0.0);
        let grid = self.pulse.grid;
        let mut series = vec![vec![0.0; grid.n_points()]; etas.len()];
        let mut max_res: f64 = 0.0;
        prop.evolve(&init, |i, _, psi| {
            let col: Vec<Complex64> = psi.column(0).iter().copied().collect();
            let norm: f64 = col.iter().map(|z| z.norm_sqr()).sum();
            max_res = max_res.max((norm - 1.0).abs());
            for (s, eta) in series.iter_mut().zip(&etas) {
                s[i] = dipole_element(&col[..ng], eta, &col[ng..]);
            }
        });
        Ok(ModeDipoles { n, grid, series, max_unitarity_residual: max_res })
    }
}
