//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::num::NonZeroUsize;
use std::sync::Arc;

use bec_hhg::dynamics::{build_hsc, BasisTruncation, PulseSpec};
use bec_hhg::field::AmplitudeVector;
use bec_hhg::franck_condon::FcMatrix;
use gauss_quad::GaussLegendre;
use nalgebra::DMatrix;
use num_complex::Complex64;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Normalised Hermite functions `φ_0..=φ_n` at `x` (unit oscillator length).
pub fn hermite_functions(n: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp());
    if n >= 1 {
        out.push(std::f64::consts::SQRT_2 * x * out[0]);
    }
    for k in 1..n {
        let next = (2.0 / (k + 1) as f64).sqrt() * x * out[k] - (k as f64 / (k + 1) as f64).sqrt() * out[k - 1];
        out.push(next);
    }
    out
}

/// `∫ φ_n(x) e^{-iqx} φ_m(x) dx` by composite Gauss–Legendre on `[-L, L]`.
pub fn fc_quadrature(n: usize, m: usize, q: f64) -> Complex64 {
    let rule = GaussLegendre::new(NonZeroUsize::new(24).unwrap());
    let half = 16.0;
    let panels = 160;
    let h = 2.0 * half / panels as f64;
    let top = n.max(m);
    let mut re = 0.0;
    let mut im = 0.0;
    for p in 0..panels {
        let a = -half + p as f64 * h;
        re += rule.integrate(a, a + h, |x| {
            let phi = hermite_functions(top, x);
            phi[n] * phi[m] * (q * x).cos()
        });
        im -= rule.integrate(a, a + h, |x| {
            let phi = hermite_functions(top, x);
            phi[n] * phi[m] * (q * x).sin()
        });
    }
    c(re, im)
}

/// Time-ordered product of dense exponentials using the fourth-order
/// commutator-free Magnus scheme with `sub` substeps per grid step.
pub fn magnus4_unitary(trunc: &BasisTruncation, pulse: &PulseSpec, fc: &FcMatrix, sub: usize) -> DMatrix<Complex64> {
    let n = trunc.dim();
    let g = pulse.grid;
    let h = g.dt / sub as f64;
    let s3 = 3f64.sqrt();
    let (c1, c2) = (0.5 - s3 / 6.0, 0.5 + s3 / 6.0);
    let (a1, a2) = (0.25 + s3 / 6.0, 0.25 - s3 / 6.0);
    let mut u = DMatrix::<Complex64>::identity(n, n);
    for k in 0..g.n_steps() * sub {
        let t = g.start + k as f64 * h;
        let h1 = build_hsc(t + c1 * h, trunc, pulse, fc).unwrap();
        let h2 = build_hsc(t + c2 * h, trunc, pulse, fc).unwrap();
        let first = ((&h1 * c(a1, 0.0) + &h2 * c(a2, 0.0)) * c(0.0, -h)).exp();
        let second = ((&h1 * c(a2, 0.0) + &h2 * c(a1, 0.0)) * c(0.0, -h)).exp();
        u = second * first * u;
    }
    u
}

pub fn max_abs_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn amplitude_vector(omegas: &Arc<Vec<f64>>, chis: Vec<Complex64>, weight: f64) -> AmplitudeVector {
    AmplitudeVector { omegas: omegas.clone(), chis, config_label: String::new(), weight }
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Fock-basis coefficients of a product of coherent states, each mode cut
/// at `cutoff` photons, flattened with the first mode most significant.
pub fn coherent_fock_vector(chis: &[Complex64], cutoff: usize) -> Vec<Complex64> {
    let mut out = vec![c(1.0, 0.0)];
    for chi in chis {
        let amp: Vec<Complex64> = (0..=cutoff)
            .map(|k| {
                let mag = (-0.5 * chi.norm_sqr()).exp() * (k as f64 * chi.norm().ln() - 0.5 * ln_factorial(k)).exp();
                let mag = if chi.norm() == 0.0 { if k == 0 { 1.0 } else { 0.0 } } else { mag };
                Complex64::from_polar(mag, k as f64 * chi.arg())
            })
            .collect();
        out = out.iter().flat_map(|a| amp.iter().map(move |b| a * b)).collect();
    }
    out
}

/// Dense density matrix `Σ_j w_j |χ_j⟩⟨χ_j|` in the truncated Fock basis.
pub fn fock_density_matrix(components: &[(f64, Vec<Complex64>)], cutoff: usize) -> DMatrix<Complex64> {
    let vecs: Vec<Vec<Complex64>> = components.iter().map(|(_, chis)| coherent_fock_vector(chis, cutoff)).collect();
    let dim = vecs[0].len();
    let mut rho = DMatrix::zeros(dim, dim);
    for ((w, _), v) in components.iter().zip(&vecs) {
        let col = nalgebra::DVector::from_column_slice(v);
        rho += col.clone() * col.adjoint() * c(*w, 0.0);
    }
    rho
}
