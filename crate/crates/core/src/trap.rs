//! Ideal Bose gas in an isotropic three-dimensional harmonic trap.
//!
//! Units: ħ = k_B = 1. Single-particle energies are `omega_t * (nx + ny + nz)`,
//! so every level of shell `s` is `(s + 1)(s + 2) / 2`-fold degenerate. All
//! thermal sums run over shells and only expand to individual modes on demand.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Apéry's constant ζ(3).
pub const ZETA3: f64 = 1.202_056_903_159_594_3;

/// Default gap between the pinned chemical potential and the ground level,
/// in units of `omega_t`.
pub const DEFAULT_MU_GAP: f64 = 1e-12;

/// Boltzmann-factor threshold used to pick the default energy cutoff.
pub const DEFAULT_CUTOFF_WEIGHT: f64 = 1e-8;

const MAX_BISECTION_ITERS: usize = 400;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThermoError {
    #[error("invalid trap spec: {0}")]
    InvalidSpec(String),
    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),
    #[error("chemical potential solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("critical temperature is degenerate for N = {atoms} (formula value {value})")]
    DegenerateCriticalTemperature { atoms: u64, value: f64 },
}

/// Trap frequency, atom number and single-particle energy cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapSpec {
    pub omega_t: f64,
    pub atoms: u64,
    /// Largest retained single-particle energy (same units as `omega_t`).
    pub e_cutoff: f64,
}

impl TrapSpec {
    pub fn new(omega_t: f64, atoms: u64, e_cutoff: f64) -> Result<Self, ThermoError> {
        let spec = Self { omega_t, atoms, e_cutoff };
        spec.validate()?;
        Ok(spec)
    }

    /// Spec whose cutoff keeps every shell with Boltzmann weight
    /// `exp(-s * omega_t / T)` above [`DEFAULT_CUTOFF_WEIGHT`].
    pub fn with_default_cutoff(omega_t: f64, atoms: u64, temperature: f64) -> Result<Self, ThermoError> {
        if !(temperature > 0.0) {
            return Err(ThermoError::NonPositiveTemperature(temperature));
        }
        let shells = default_cutoff_shell(omega_t, temperature);
        Self::new(omega_t, atoms, shells as f64 * omega_t)
    }

    pub fn validate(&self) -> Result<(), ThermoError> {
        if !(self.omega_t > 0.0) || !self.omega_t.is_finite() {
            return Err(ThermoError::InvalidSpec(format!("omega_t must be positive, got {}", self.omega_t)));
        }
        if self.atoms < 1 {
            return Err(ThermoError::InvalidSpec("atom number must be at least 1".into()));
        }
        if !(self.e_cutoff >= 0.0) || !self.e_cutoff.is_finite() {
            return Err(ThermoError::InvalidSpec(format!("e_cutoff must be non-negative, got {}", self.e_cutoff)));
        }
        Ok(())
    }

    /// Highest retained shell index.
    pub fn max_shell(&self) -> usize {
        // small slack so that e.g. 3.0 * 0.1 / 0.1 still counts as shell 3
        (self.e_cutoff / self.omega_t + 1e-9).floor() as usize
    }

    pub fn mode_count(&self) -> u64 {
        modes_up_to_shell(self.max_shell())
    }
}

/// Smallest shell `s` with `exp(-s * omega_t / T) < 1e-8`.
pub fn default_cutoff_shell(omega_t: f64, temperature: f64) -> usize {
    let s = temperature / omega_t * (1.0 / DEFAULT_CUTOFF_WEIGHT).ln();
    s.floor() as usize + 1
}

/// Number of modes in shell `s`.
pub fn shell_degeneracy(s: usize) -> u64 {
    let s = s as u64;
    (s + 1) * (s + 2) / 2
}

/// Number of modes with `nx + ny + nz <= s`, i.e. binomial(s + 3, 3).
pub fn modes_up_to_shell(s: usize) -> u64 {
    let s = s as u64;
    (s + 1) * (s + 2) * (s + 3) / 6
}

/// Quantum numbers of one trap eigenstate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeIndex {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl ModeIndex {
    pub const GROUND: ModeIndex = ModeIndex { nx: 0, ny: 0, nz: 0 };

    pub fn new(nx: usize, ny: usize, nz: usize) -> Self {
        Self { nx, ny, nz }
    }

    /// Mode excited only along the first Cartesian axis.
    pub fn axis(n: usize) -> Self {
        Self { nx: n, ny: 0, nz: 0 }
    }

    pub fn shell(&self) -> usize {
        self.nx + self.ny + self.nz
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }
}

impl std::fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.nx, self.ny, self.nz)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub index: ModeIndex,
    pub energy: f64,
}

/// All retained modes sorted by energy, then lexicographically.
pub fn enumerate_modes(spec: &TrapSpec) -> Result<Vec<Mode>, ThermoError> {
    spec.validate()?;
    if spec.e_cutoff < 0.0 {
        return Err(ThermoError::InvalidSpec("cutoff retains no modes".into()));
    }
    let smax = spec.max_shell();
    let mut modes = Vec::with_capacity(spec.mode_count() as usize);
    for s in 0..=smax {
        let mut shell: Vec<ModeIndex> = Vec::with_capacity(shell_degeneracy(s) as usize);
        for nx in 0..=s {
            for ny in 0..=(s - nx) {
                shell.push(ModeIndex::new(nx, ny, s - nx - ny));
            }
        }
        shell.sort();
        modes.extend(shell.into_iter().map(|index| Mode { index, energy: spec.omega_t * s as f64 }));
    }
    if modes.is_empty() {
        return Err(ThermoError::InvalidSpec("cutoff retains no modes".into()));
    }
    Ok(modes)
}

/// `T_c = omega_t * (N / ζ(3))^(1/3)`.
///
/// For fewer than two atoms the formula is meaningless; the value is still
/// reported inside the error.
pub fn critical_temperature(spec: &TrapSpec) -> Result<f64, ThermoError> {
    let value = spec.omega_t * (spec.atoms as f64 / ZETA3).cbrt();
    if spec.atoms < 2 {
        return Err(ThermoError::DegenerateCriticalTemperature { atoms: spec.atoms, value });
    }
    Ok(value)
}

/// Grand-canonical thermal state on the retained shells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalState {
    pub temperature: f64,
    pub mu: f64,
    pub omega_t: f64,
    pub atoms: u64,
    /// Mean occupation of a single mode in shell `s` (shell 0 is the ground mode).
    pub shell_occupations: Vec<f64>,
    /// Ground-mode occupation.
    pub n0: f64,
    /// `true` when the chemical potential was pinned just below the ground level.
    pub saturated: bool,
}

impl ThermalState {
    pub fn max_shell(&self) -> usize {
        self.shell_occupations.len() - 1
    }

    pub fn mean_occupation(&self, mode: &ModeIndex) -> f64 {
        self.shell_occupations.get(mode.shell()).copied().unwrap_or(0.0)
    }

    /// Mean occupations keyed by mode. Expands every retained mode, so only
    /// use it for small cutoffs.
    pub fn mean_occupations(&self) -> BTreeMap<ModeIndex, f64> {
        let mut out = BTreeMap::new();
        for (s, &nu) in self.shell_occupations.iter().enumerate() {
            for nx in 0..=s {
                for ny in 0..=(s - nx) {
                    out.insert(ModeIndex::new(nx, ny, s - nx - ny), nu);
                }
            }
        }
        out
    }

    pub fn n_excited(&self) -> f64 {
        self.shell_occupations
            .iter()
            .enumerate()
            .skip(1)
            .map(|(s, nu)| shell_degeneracy(s) as f64 * nu)
            .sum()
    }

    pub fn total(&self) -> f64 {
        self.n0 + self.n_excited()
    }

    pub fn n_modes(&self) -> u64 {
        modes_up_to_shell(self.max_shell())
    }

    pub fn condensate_fraction(&self) -> f64 {
        self.n0 / self.atoms as f64
    }

    pub fn summary(&self) -> ThermoSummary {
        ThermoSummary {
            t: self.temperature,
            mu: self.mu,
            n0: self.n0,
            n_excited: self.n_excited(),
            n_modes: self.n_modes(),
        }
    }
}

/// JSON record emitted per temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermoSummary {
    #[serde(rename = "T")]
    pub t: f64,
    pub mu: f64,
    #[serde(rename = "N0")]
    pub n0: f64,
    #[serde(rename = "N_excited")]
    pub n_excited: f64,
    pub n_modes: u64,
}

fn bose(x: f64) -> f64 {
    // 1 / (e^x - 1) for x > 0
    1.0 / x.exp_m1()
}

fn occupation_sum(omega_t: f64, smax: usize, temperature: f64, mu: f64) -> f64 {
    (0..=smax)
        .map(|s| shell_degeneracy(s) as f64 * bose((omega_t * s as f64 - mu) / temperature))
        .sum()
}

/// Solve `N(mu) = N` for the chemical potential with the default pinning gap.
pub fn solve_chemical_potential(spec: &TrapSpec, temperature: f64) -> Result<ThermalState, ThermoError> {
    solve_chemical_potential_with_gap(spec, temperature, DEFAULT_MU_GAP)
}

/// Bisection on `ln(-mu)`. If the root lies closer to the ground level than
/// `gap * omega_t`, mu is pinned at `-gap * omega_t` and the ground mode takes
/// whatever the excited shells leave over.
pub fn solve_chemical_potential_with_gap(
    spec: &TrapSpec,
    temperature: f64,
    gap: f64,
) -> Result<ThermalState, ThermoError> {
    spec.validate()?;
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(ThermoError::NonPositiveTemperature(temperature));
    }
    let smax = spec.max_shell();
    let target = spec.atoms as f64;
    let omega = spec.omega_t;
    let mu_pin = -gap * omega;
    let count = |mu: f64| occupation_sum(omega, smax, temperature, mu);

    let finish = |mu: f64, saturated: bool| {
        let mut shell_occupations: Vec<f64> =
            (0..=smax).map(|s| bose((omega * s as f64 - mu) / temperature)).collect();
        let excited: f64 = shell_occupations
            .iter()
            .enumerate()
            .skip(1)
            .map(|(s, nu)| shell_degeneracy(s) as f64 * nu)
            .sum();
        let n0 = if saturated { (target - excited).max(0.0) } else { shell_occupations[0] };
        shell_occupations[0] = n0;
        ThermalState {
            temperature,
            mu,
            omega_t: omega,
            atoms: spec.atoms,
            shell_occupations,
            n0,
            saturated,
        }
    };

    if count(mu_pin) <= target {
        return Ok(finish(mu_pin, true));
    }

    // N(mu) increases with mu; bracket in x = ln(-mu).
    let mut lo = mu_pin.abs().ln(); // N(-e^lo) > target
    let mut hi = (temperature * (target + 1.0).ln() + 1.0).max(omega).ln() + 1.0;
    let mut guard = 0;
    while count(-hi.exp()) > target {
        hi += 1.0;
        guard += 1;
        if guard > 200 {
            return Err(ThermoError::NoConvergence { iterations: guard, residual: f64::NAN });
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..MAX_BISECTION_ITERS {
        x = 0.5 * (lo + hi);
        if count(-x.exp()) > target {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
            break;
        }
    }
    let mu = -x.exp();
    let residual = (count(mu) - target).abs() / target;
    if residual > 1e-10 {
        return Err(ThermoError::NoConvergence { iterations: MAX_BISECTION_ITERS, residual });
    }
    Ok(finish(mu, false))
}

/// Integer occupation of every mode; absent modes are empty.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OccupationConfig {
    pub occupations: BTreeMap<ModeIndex, u64>,
}

impl OccupationConfig {
    pub fn condensate(atoms: u64) -> Self {
        let mut occupations = BTreeMap::new();
        occupations.insert(ModeIndex::GROUND, atoms);
        Self { occupations }
    }

    pub fn total(&self) -> u64 {
        self.occupations.values().sum()
    }

    pub fn get(&self, mode: &ModeIndex) -> u64 {
        self.occupations.get(mode).copied().unwrap_or(0)
    }

    /// Occupations summed over the two transverse quantum numbers.
    pub fn axis_marginal(&self) -> AxisOccupations {
        let len = self.occupations.keys().map(|m| m.nx + 1).max().unwrap_or(1);
        let mut counts = vec![0u64; len];
        for (m, &n) in &self.occupations {
            counts[m.nx] += n;
        }
        AxisOccupations { counts }
    }
}

/// Atom count per longitudinal quantum number `nx`, summed over `ny, nz`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AxisOccupations {
    pub counts: Vec<u64>,
}

impl AxisOccupations {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Largest occupied `nx`, if any.
    pub fn max_occupied(&self) -> Option<usize> {
        self.counts.iter().rposition(|&c| c > 0)
    }
}

fn geometric_draw<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    // P(k) = (1 - r) r^k with r = mean / (1 + mean); inverse CDF.
    let r = mean / (1.0 + mean);
    let u: f64 = rng.random::<f64>();
    let u = 1.0 - u; // (0, 1]
    (u.ln() / r.ln()).floor() as u64
}

/// Sum of `count` independent geometric variables of equal mean, drawn as a
/// gamma-mixed Poisson (negative binomial).
fn negative_binomial_draw<R: Rng + ?Sized>(rng: &mut R, count: u64, mean: f64) -> u64 {
    if count == 0 || mean <= 0.0 {
        return 0;
    }
    if count == 1 {
        return geometric_draw(rng, mean);
    }
    let gamma = Gamma::new(count as f64, mean).expect("positive gamma parameters");
    let lambda = gamma.sample(rng);
    if !(lambda > 0.0) {
        return 0;
    }
    Poisson::new(lambda).expect("positive poisson rate").sample(rng) as u64
}

fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Draw one occupation configuration: every excited mode independently from
/// the geometric law with its mean occupation, the ground mode fixed to
/// `round(N0)`. Visits every retained mode, so cost grows with the cutoff cubed.
pub fn sample_configuration(state: &ThermalState, seed: u64) -> OccupationConfig {
    let mut rng = seeded_rng(seed);
    let mut occupations = BTreeMap::new();
    let n0 = state.n0.round() as u64;
    if n0 > 0 {
        occupations.insert(ModeIndex::GROUND, n0);
    }
    for (s, &nu) in state.shell_occupations.iter().enumerate().skip(1) {
        for nx in 0..=s {
            for ny in 0..=(s - nx) {
                let k = geometric_draw(&mut rng, nu);
                if k > 0 {
                    occupations.insert(ModeIndex::new(nx, ny, s - nx - ny), k);
                }
            }
        }
    }
    OccupationConfig { occupations }
}

/// Draw the longitudinal marginal of a configuration with the same law as
/// [`sample_configuration`]: the `s - nx + 1` modes sharing `nx` in shell `s`
/// are aggregated into one negative-binomial draw.
pub fn sample_axis_occupations(state: &ThermalState, seed: u64) -> AxisOccupations {
    let mut rng = seeded_rng(seed);
    let smax = state.max_shell();
    let mut counts = vec![0u64; smax + 1];
    counts[0] = state.n0.round() as u64;
    for (s, &nu) in state.shell_occupations.iter().enumerate().skip(1) {
        for (nx, slot) in counts.iter_mut().enumerate().take(s + 1) {
            *slot += negative_binomial_draw(&mut rng, (s - nx + 1) as u64, nu);
        }
    }
    let keep = counts.iter().rposition(|&c| c > 0).map_or(1, |i| i + 1);
    counts.truncate(keep);
    AxisOccupations { counts }
}
