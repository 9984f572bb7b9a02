//! Mixtures of multimode coherent states.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::AmplitudeVector;

/// Log-overlaps below this are reported as exactly zero.
pub const LOG_UNDERFLOW: f64 = -700.0;

pub const WEIGHT_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum StateError {
    #[error("amplitude vectors live on different mode grids")]
    GridMismatch,
    #[error("mixture needs at least one component")]
    Empty,
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherentMixture {
    components: Vec<AmplitudeVector>,
}

impl CoherentMixture {
    /// Uses each vector's own weight.
    pub fn new(components: Vec<AmplitudeVector>) -> Result<Self, StateError> {
        let first = components.first().ok_or(StateError::Empty)?;
        if components.iter().any(|c| !c.same_grid(first)) {
            return Err(StateError::GridMismatch);
        }
        if components.iter().any(|c| !(c.weight >= 0.0)) {
            return Err(StateError::InvalidWeights("weights must be non-negative".into()));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(StateError::InvalidWeights(format!("weights sum to {total}")));
        }
        Ok(Self { components })
    }

    pub fn from_weighted(pairs: Vec<(f64, AmplitudeVector)>) -> Result<Self, StateError> {
        Self::new(pairs.into_iter().map(|(w, mut a)| {
            a.weight = w;
            a
        }).collect())
    }

    /// Equal weights `1/M`.
    pub fn equal_weights(mut vectors: Vec<AmplitudeVector>) -> Result<Self, StateError> {
        let w = 1.0 / vectors.len().max(1) as f64;
        vectors.iter_mut().for_each(|v| v.weight = w);
        Self::new(vectors)
    }

    pub fn components(&self) -> &[AmplitudeVector] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

/// `‖a − b‖²` summed over modes.
pub fn distance_sqr(a: &AmplitudeVector, b: &AmplitudeVector) -> f64 {
    a.chis.iter().zip(&b.chis).map(|(x, y)| (x - y).norm_sqr()).sum()
}

/// `exp(-d)` with the underflow cut applied.
fn gaussian(d: f64) -> f64 {
    if -d < LOG_UNDERFLOW {
        0.0
    } else {
        (-d).exp()
    }
}

/// `⟨a|b⟩ = exp(-½Σ|a|² - ½Σ|b|² + Σ conj(a) b)`.
pub fn overlap(a: &AmplitudeVector, b: &AmplitudeVector) -> Result<Complex64, StateError> {
    if !a.same_grid(b) {
        return Err(StateError::GridMismatch);
    }
    if a.chis == b.chis {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let cross: Complex64 = a.chis.iter().zip(&b.chis).map(|(x, y)| x.conj() * y).sum();
    let log = Complex64::new(-0.5 * (a.norm_sqr() + b.norm_sqr()), 0.0) + cross;
    if log.re < LOG_UNDERFLOW {
        return Ok(Complex64::new(0.0, 0.0));
    }
    Ok(log.exp())
}

/// `|⟨a|b⟩|² = exp(-‖a − b‖²)`.
pub fn overlap_sqr(a: &AmplitudeVector, b: &AmplitudeVector) -> Result<f64, StateError> {
    if !a.same_grid(b) {
        return Err(StateError::GridMismatch);
    }
    Ok(gaussian(distance_sqr(a, b)))
}

/// `Tr ρ² = Σ_jk w_j w_k |⟨χ_j|χ_k⟩|²`. Rows are summed in a fixed order.
pub fn purity(mix: &CoherentMixture) -> f64 {
    let c = mix.components();
    let mut total = 0.0;
    for (j, a) in c.iter().enumerate() {
        let mut row = a.weight * a.weight;
        for b in &c[j + 1..] {
            row += 2.0 * a.weight * b.weight * gaussian(distance_sqr(a, b));
        }
        total += row;
    }
    total
}

/// Purity of the state sampled by `M` equally likely draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PurityEstimate {
    pub value: f64,
    /// `None` when fewer than two samples make the spread unidentifiable.
    pub stderr: Option<f64>,
    pub n_samples: usize,
}

/// Unbiased U-statistic over distinct pairs of the `M` draws (weights are
/// ignored). The standard error uses the first-order Hoeffding projection,
/// `sqrt(4 Var(h₁) / M)` with `h₁(j)` the mean kernel of draw `j`.
pub fn purity_estimate(samples: &[AmplitudeVector]) -> Result<PurityEstimate, StateError> {
    let m = samples.len();
    let first = samples.first().ok_or(StateError::Empty)?;
    if samples.iter().any(|s| !s.same_grid(first)) {
        return Err(StateError::GridMismatch);
    }
    if m == 1 {
        return Ok(PurityEstimate { value: 1.0, stderr: None, n_samples: 1 });
    }
    let mut row_sums = vec![0.0; m];
    for j in 0..m {
        for k in j + 1..m {
            let kern = gaussian(distance_sqr(&samples[j], &samples[k]));
            row_sums[j] += kern;
            row_sums[k] += kern;
        }
    }
    let h1: Vec<f64> = row_sums.iter().map(|s| s / (m - 1) as f64).collect();
    let value = h1.iter().sum::<f64>() / m as f64;
    let var = h1.iter().map(|h| (h - value).powi(2)).sum::<f64>() / (m - 1) as f64;
    Ok(PurityEstimate { value, stderr: Some((4.0 * var / m as f64).sqrt()), n_samples: m })
}

/// `F = Σ_j w_j |⟨ref|χ_j⟩|²`.
pub fn fidelity_to_pure(mix: &CoherentMixture, reference: &AmplitudeVector) -> Result<f64, StateError> {
    let mut f = 0.0;
    for c in mix.components() {
        f += c.weight * overlap_sqr(reference, c)?;
    }
    Ok(f)
}

/// `⟨n_q⟩ = Σ_j w_j |χ_{j,q}|²`.
pub fn mean_photons(mix: &CoherentMixture) -> Vec<f64> {
    let n = mix.components()[0].chis.len();
    let mut out = vec![0.0; n];
    for c in mix.components() {
        for (o, x) in out.iter_mut().zip(&c.chis) {
            *o += c.weight * x.norm_sqr();
        }
    }
    out
}
