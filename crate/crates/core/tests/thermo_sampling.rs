use bec_hhg::trap::{
    critical_temperature, sample_axis_occupations, sample_configuration, solve_chemical_potential, ModeIndex, ThermalState,
    TrapSpec,
};
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn synthetic_state(shell_occupations: Vec<f64>) -> ThermalState {
    ThermalState { temperature: 1.0, mu: -1.0, omega_t: 1.0, atoms: 0, shell_occupations, n0: 0.0, saturated: false }
}

/// Pearson statistic over bins `0..last` plus a tail bin; returns the upper p-value.
fn chi_square_p(counts: &[u64], pmf: impl Fn(u64) -> f64, last: u64) -> f64 {
    let total: u64 = counts.iter().sum();
    let mut observed = vec![0u64; last as usize + 1];
    for (k, &c) in counts.iter().enumerate() {
        observed[(k as u64).min(last) as usize] += c;
    }
    let mut expected: Vec<f64> = (0..last).map(|k| pmf(k) * total as f64).collect();
    expected.push(total as f64 - expected.iter().sum::<f64>());
    let stat: f64 = observed.iter().zip(&expected).map(|(&o, &e)| (o as f64 - e).powi(2) / e).sum();
    1.0 - ChiSquared::new(last as f64).unwrap().cdf(stat)
}

fn histogram(values: impl Iterator<Item = u64>) -> Vec<u64> {
    let mut h = Vec::new();
    for v in values {
        if h.len() <= v as usize {
            h.resize(v as usize + 1, 0);
        }
        h[v as usize] += 1;
    }
    h
}

#[test]
fn geometric_draws_pass_chi_square() {
    let state = synthetic_state(vec![0.0, 1.0]);
    let draws: Vec<_> = (0..20_000).map(|s| sample_configuration(&state, s)).collect();
    for mode in [ModeIndex::new(1, 0, 0), ModeIndex::new(0, 1, 0), ModeIndex::new(0, 0, 1)] {
        let h = histogram(draws.iter().map(|c| c.get(&mode)));
        let p = chi_square_p(&h, |k| 0.5f64.powi(k as i32 + 1), 8);
        assert!(p > 1e-4, "{mode}: p = {p}");
    }
}

#[test]
fn unit_mean_occupation_example() {
    let state = synthetic_state(vec![0.0, 1.0]);
    let mode = ModeIndex::new(0, 0, 1);
    let n = 100_000;
    let mean = (0..n).map(|s| sample_configuration(&state, s).get(&mode)).sum::<u64>() as f64 / n as f64;
    assert!((mean - 1.0).abs() < 0.02, "{mean}");
}

fn negative_binomial_pmf(r: u64, nu: f64, k: u64) -> f64 {
    // Σ of r geometric variables with mean nu
    let p = 1.0 / (1.0 + nu);
    let ln_binom: f64 = (1..=k).map(|i| ((r + i - 1) as f64 / i as f64).ln()).sum();
    (ln_binom + r as f64 * p.ln() + k as f64 * (1.0 - p).ln()).exp()
}

#[test]
fn axis_marginal_is_negative_binomial() {
    let nu = 0.7;
    let state = synthetic_state(vec![0.0, 0.0, nu]);
    let draws: Vec<_> = (0..20_000).map(|s| sample_axis_occupations(&state, s)).collect();
    // shell 2 has 3 modes with nx = 0, 2 with nx = 1 and 1 with nx = 2
    for (nx, r) in [(0usize, 3u64), (1, 2), (2, 1)] {
        let h = histogram(draws.iter().map(|c| c.counts.get(nx).copied().unwrap_or(0)));
        let p = chi_square_p(&h, |k| negative_binomial_pmf(r, nu, k), 8);
        assert!(p > 1e-4, "nx={nx}: p = {p}");
    }
}

#[test]
fn critical_temperature_example() {
    let tc = critical_temperature(&TrapSpec::new(1.0, 1000, 0.0).unwrap()).unwrap();
    let direct = (1000.0f64 / 1.2020569031595942).cbrt();
    assert!((tc - direct).abs() < 1e-12);
    assert!((tc - 9.406).abs() < 2e-3);
}

#[test]
fn fraction_at_half_tc_near_thermodynamic_limit() {
    let spec = TrapSpec::new(1.0, 1000, 0.0).unwrap();
    let tc = critical_temperature(&spec).unwrap();
    let t = 0.5 * tc;
    let state = solve_chemical_potential(&TrapSpec::with_default_cutoff(1.0, 1000, t).unwrap(), t).unwrap();
    // thermodynamic limit plus the leading finite-size shift
    let zeta2 = std::f64::consts::PI.powi(2) / 6.0;
    let zeta3 = 1.2020569031595942f64;
    let shift = 3.0 * zeta2 / (2.0 * zeta3.powf(2.0 / 3.0)) * 0.25 * 1000f64.powf(-1.0 / 3.0);
    let expected = 0.875 - shift;
    assert!((state.condensate_fraction() - expected).abs() < 0.01, "{} vs {expected}", state.condensate_fraction());
}

#[test]
fn no_condensate_at_twice_tc() {
    let spec = TrapSpec::new(1.0, 1000, 0.0).unwrap();
    let t = 2.0 * critical_temperature(&spec).unwrap();
    let state = solve_chemical_potential(&TrapSpec::with_default_cutoff(1.0, 1000, t).unwrap(), t).unwrap();
    assert!(state.condensate_fraction() < 0.01);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn normalisation_above_tc(atoms in 10u64..5000, ratio in 1.05f64..4.0) {
        let spec = TrapSpec::new(1.0, atoms, 0.0).unwrap();
        let t = ratio * critical_temperature(&spec).unwrap();
        let state = solve_chemical_potential(&TrapSpec::with_default_cutoff(1.0, atoms, t).unwrap(), t).unwrap();
        prop_assert!((state.total() - atoms as f64).abs() <= 1e-8 * atoms as f64);
        prop_assert!(!state.saturated);
    }

    #[test]
    fn occupations_fall_with_energy(atoms in 10u64..5000, ratio in 0.1f64..3.0) {
        let spec = TrapSpec::new(1.0, atoms, 0.0).unwrap();
        let t = ratio * critical_temperature(&spec).unwrap();
        let state = solve_chemical_potential(&TrapSpec::with_default_cutoff(1.0, atoms, t).unwrap(), t).unwrap();
        prop_assert!(state.shell_occupations.windows(2).skip(1).all(|w| w[1] <= w[0]));
        prop_assert!(state.n0 >= state.shell_occupations.get(1).copied().unwrap_or(0.0));
    }

    #[test]
    fn condensate_fraction_falls_with_temperature(atoms in 50u64..3000, lo in 0.05f64..2.0, step in 0.01f64..1.0) {
        let spec = TrapSpec::new(1.0, atoms, 0.0).unwrap();
        let tc = critical_temperature(&spec).unwrap();
        let frac = |r: f64| {
            let t = r * tc;
            solve_chemical_potential(&TrapSpec::with_default_cutoff(1.0, atoms, t).unwrap(), t).unwrap().condensate_fraction()
        };
        prop_assert!(frac(lo + step) <= frac(lo) + 1e-12);
    }
}
