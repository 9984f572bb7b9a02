//! Matrix elements `⟨n|exp(-i q·r)|m⟩` between harmonic-oscillator eigenstates.
//!
//! Along one axis the operator is a displacement `D(β)` with
//! `β = -i q x0 / √2`, so elements follow from the associated-Laguerre closed
//! form. The Laguerre recurrence is run on a normalised sequence with a
//! running log scale, which keeps indices of several hundred finite.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trap::ModeIndex;

#[derive(Debug, Error)]
pub enum FcError {
    #[error("oscillator length must be positive, got {0}")]
    InvalidLength(f64),
    #[error("basis must not be empty")]
    EmptyBasis,
    #[error("non-finite wavevector component")]
    NonFiniteWavevector,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatorParams {
    pub x0: f64,
}

impl OscillatorParams {
    pub fn new(x0: f64) -> Result<Self, FcError> {
        if !(x0 > 0.0) || !x0.is_finite() {
            return Err(FcError::InvalidLength(x0));
        }
        Ok(Self { x0 })
    }
}

impl Default for OscillatorParams {
    fn default() -> Self {
        Self { x0: 1.0 }
    }
}

const RESCALE_ABOVE: f64 = 1e150;

fn ln_factorial(n: usize) -> f64 {
    // exact summation is cheap for the sizes used here and avoids a gamma dependency
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// `⟨n|exp(-i q x)|m⟩` for one oscillator axis, `qx0 = q * x0`.
pub fn fc_factor_1d(n: usize, m: usize, qx0: f64) -> Complex64 {
    // the element is symmetric in (n, m) since -conj(β) = β
    let (hi, lo) = if n >= m { (n, m) } else { (m, n) };
    let p = hi - lo;
    let lambda = 0.5 * qx0 * qx0;

    if lambda == 0.0 {
        return if p == 0 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
    }

    // ℓ_k = L_k^{(p)}(λ) · sqrt(k! p! / (k+p)!), ℓ_0 = 1
    let mut log_scale = 0.0f64;
    let mut prev = 0.0f64;
    let mut cur = 1.0f64;
    for k in 0..lo {
        let kf = k as f64;
        let pf = p as f64;
        let next = ((2.0 * kf + 1.0 + pf - lambda) * cur - (kf * (kf + pf)).sqrt() * prev)
            / ((kf + 1.0) * (kf + 1.0 + pf)).sqrt();
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE_ABOVE {
            prev /= RESCALE_ABOVE;
            cur /= RESCALE_ABOVE;
            log_scale += RESCALE_ABOVE.ln();
        }
    }
    // |β|^p e^{-λ/2} / sqrt(p!) with |β|² = λ
    let log_mag = -0.5 * lambda + 0.5 * p as f64 * lambda.ln() - 0.5 * ln_factorial(p) + log_scale;
    let magnitude = cur * log_mag.exp();
    // phase of (-i sgn(q))^p
    let phase = match (p % 4, qx0 >= 0.0) {
        (0, _) => Complex64::new(1.0, 0.0),
        (2, _) => Complex64::new(-1.0, 0.0),
        (1, true) | (3, false) => Complex64::new(0.0, -1.0),
        _ => Complex64::new(0.0, 1.0),
    };
    phase * magnitude
}

/// Product of the three Cartesian one-dimensional factors.
pub fn fc_factor_3d(n: &ModeIndex, m: &ModeIndex, q: [f64; 3], params: &OscillatorParams) -> Complex64 {
    let (na, ma) = (n.as_array(), m.as_array());
    (0..3).map(|a| fc_factor_1d(na[a], ma[a], q[a] * params.x0)).product()
}

pub fn wavevector_norm(q: [f64; 3]) -> f64 {
    (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt()
}

/// Number of extra shells the excited basis needs beyond the ground basis
/// for a displacement of `|q| x0`.
pub fn default_excited_margin(q_norm_x0: f64) -> usize {
    let a = q_norm_x0.abs();
    (a * a + 4.0 * a).ceil() as usize + 1
}

/// Dense block of Franck–Condon factors, rows on the ground basis and
/// columns on the excited basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FcMatrix {
    pub q: [f64; 3],
    pub rows: Vec<ModeIndex>,
    pub cols: Vec<ModeIndex>,
    pub entries: DMatrix<Complex64>,
}

impl FcMatrix {
    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.cols.len()
    }

    /// `Σ_m |η_nm|²` for each row.
    pub fn row_norms_sq(&self) -> Vec<f64> {
        self.entries.row_iter().map(|r| r.iter().map(|z| z.norm_sqr()).sum()).collect()
    }

    /// Worst sum-rule deficit `1 - Σ_m |η_nm|²` over rows.
    pub fn max_sum_rule_deficit(&self) -> f64 {
        self.row_norms_sq().into_iter().map(|s| 1.0 - s).fold(0.0, f64::max)
    }

    /// Writes `n, m, |η_nm|²` rows.
    pub fn write_abs2_csv(&self, path: &Path) -> Result<(), FcError> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "n,m,abs2")?;
        for (i, n) in self.rows.iter().enumerate() {
            for (j, m) in self.cols.iter().enumerate() {
                writeln!(w, "\"{n}\",\"{m}\",{:.17e}", self.entries[(i, j)].norm_sqr())?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// One-dimensional factor table `t[a][i][j] = ⟨i|exp(-i q_a x)|j⟩` per axis.
fn axis_tables(max_row: [usize; 3], max_col: [usize; 3], q: [f64; 3], x0: f64) -> [Vec<Vec<Complex64>>; 3] {
    std::array::from_fn(|a| {
        (0..=max_row[a])
            .map(|i| (0..=max_col[a]).map(|j| fc_factor_1d(i, j, q[a] * x0)).collect())
            .collect()
    })
}

fn axis_max(basis: &[ModeIndex]) -> [usize; 3] {
    let mut out = [0; 3];
    for m in basis {
        for (o, v) in out.iter_mut().zip(m.as_array()) {
            *o = (*o).max(v);
        }
    }
    out
}

/// Sum-rule tolerance used to pick the default excited truncation.
pub const SUM_RULE_TOL: f64 = 1e-6;

/// Excited-basis shell count for a ground basis of shells `0..=g_shell`:
/// at least [`default_excited_margin`] extra shells, widened until every
/// ground row satisfies the sum rule to [`SUM_RULE_TOL`].
pub fn converged_excited_shell(g_shell: usize, q: [f64; 3], params: &OscillatorParams) -> Result<usize, FcError> {
    let basis_g = shell_basis(g_shell);
    let mut e_shell = g_shell + default_excited_margin(wavevector_norm(q) * params.x0);
    loop {
        let fc = build_fc_matrix(&basis_g, &shell_basis(e_shell), q, params)?;
        if fc.max_sum_rule_deficit() <= SUM_RULE_TOL {
            return Ok(e_shell);
        }
        e_shell += 1;
    }
}

/// Dense FC block over `basis_g × basis_e`. One-dimensional factors are
/// tabulated once per axis and reused for every entry.
pub fn build_fc_matrix(
    basis_g: &[ModeIndex],
    basis_e: &[ModeIndex],
    q: [f64; 3],
    params: &OscillatorParams,
) -> Result<FcMatrix, FcError> {
    if basis_g.is_empty() || basis_e.is_empty() {
        return Err(FcError::EmptyBasis);
    }
    if q.iter().any(|c| !c.is_finite()) {
        return Err(FcError::NonFiniteWavevector);
    }
    let tables = axis_tables(axis_max(basis_g), axis_max(basis_e), q, params.x0);
    let entries = DMatrix::from_fn(basis_g.len(), basis_e.len(), |i, j| {
        let (n, m) = (basis_g[i].as_array(), basis_e[j].as_array());
        tables[0][n[0]][m[0]] * tables[1][n[1]][m[1]] * tables[2][n[2]][m[2]]
    });
    Ok(FcMatrix { q, rows: basis_g.to_vec(), cols: basis_e.to_vec(), entries })
}

/// All modes with shell index `<= s`, energy-then-lexicographic order.
pub fn shell_basis(s: usize) -> Vec<ModeIndex> {
    let mut out = Vec::new();
    for shell in 0..=s {
        let mut block = Vec::new();
        for nx in 0..=shell {
            for ny in 0..=(shell - nx) {
                block.push(ModeIndex::new(nx, ny, shell - nx - ny));
            }
        }
        block.sort();
        out.extend(block);
    }
    out
}

/// Modes `(n, 0, 0)` for `n <= nmax`.
pub fn axis_basis(nmax: usize) -> Vec<ModeIndex> {
    (0..=nmax).map(ModeIndex::axis).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn ground_ground_is_gaussian() {
        let v = fc_factor_1d(0, 0, 1.0);
        assert!(close(v, Complex64::new((-0.25f64).exp(), 0.0), 1e-15));
    }

    #[test]
    fn zero_wavevector_is_identity() {
        for n in 0..8 {
            for m in 0..8 {
                let v = fc_factor_1d(n, m, 0.0);
                let e = if n == m { 1.0 } else { 0.0 };
                assert_eq!(v, Complex64::new(e, 0.0));
            }
        }
    }

    #[test]
    fn first_excited_modulus() {
        for &q in &[0.1, 0.7, 1.3, 2.0] {
            let v = fc_factor_1d(1, 0, q);
            let expect = q / 2f64.sqrt() * (-q * q / 4.0).exp();
            assert!((v.norm() - expect).abs() < 1e-15);
            // phase -i for positive q
            assert!(v.re.abs() < 1e-16 && v.im < 0.0);
        }
    }

    #[test]
    fn low_order_closed_forms() {
        // <1|D|1> = e^{-λ/2}(1-λ), <2|D|0> = e^{-λ/2} β²/√2
        let q: f64 = 0.9;
        let lam = q * q / 2.0;
        let v11 = fc_factor_1d(1, 1, q);
        assert!(close(v11, Complex64::new((-lam / 2.0).exp() * (1.0 - lam), 0.0), 1e-15));
        let v20 = fc_factor_1d(2, 0, q);
        assert!(close(v20, Complex64::new(-(-lam / 2.0).exp() * lam / 2f64.sqrt(), 0.0), 1e-15));
    }

    #[test]
    fn three_d_reduces_to_axis() {
        let p = OscillatorParams::default();
        let g = ModeIndex::GROUND;
        let v = fc_factor_3d(&g, &g, [1.0, 0.0, 0.0], &p);
        assert!(close(v, Complex64::new((-0.25f64).exp(), 0.0), 1e-15));
        // q along x: delta on y, z
        let a = ModeIndex::new(2, 1, 0);
        let b = ModeIndex::new(1, 0, 0);
        assert_eq!(fc_factor_3d(&a, &b, [0.8, 0.0, 0.0], &p), Complex64::new(0.0, 0.0));
        let c = ModeIndex::new(1, 1, 0);
        assert_eq!(fc_factor_3d(&a, &c, [0.8, 0.0, 0.0], &p), fc_factor_1d(2, 1, 0.8));
    }

    #[test]
    fn matrix_at_zero_q_is_identity() {
        let b = shell_basis(3);
        let m = build_fc_matrix(&b, &b, [0.0; 3], &OscillatorParams::default()).unwrap();
        assert_eq!(m.entries, DMatrix::identity(b.len(), b.len()));
    }

    #[test]
    fn matrix_adjoint_symmetry() {
        let b = shell_basis(3);
        let p = OscillatorParams::new(0.7).unwrap();
        let q = [0.4, -1.1, 0.3];
        let plus = build_fc_matrix(&b, &b, q, &p).unwrap();
        let minus = build_fc_matrix(&b, &b, [-0.4, 1.1, -0.3], &p).unwrap();
        assert_eq!(minus.entries, plus.entries.adjoint());
    }

    #[test]
    fn default_truncation_satisfies_sum_rule() {
        let p = OscillatorParams::default();
        for &q in &[0.1, 0.5, 1.0, 2.0] {
            let g = shell_basis(2);
            let e_shell = converged_excited_shell(2, [q, 0.0, 0.0], &p).unwrap();
            assert!(e_shell >= 2 + default_excited_margin(q));
            let m = build_fc_matrix(&g, &shell_basis(e_shell), [q, 0.0, 0.0], &p).unwrap();
            assert!(m.max_sum_rule_deficit() <= SUM_RULE_TOL, "q={q}: {}", m.max_sum_rule_deficit());
            // the bare margin already keeps the ground row well normalised
            let bare = build_fc_matrix(&g, &shell_basis(2 + default_excited_margin(q)), [q, 0.0, 0.0], &p).unwrap();
            assert!(bare.row_norms_sq()[0] >= 0.999);
        }
    }

    #[test]
    fn sum_rule_improves_with_truncation() {
        let p = OscillatorParams::default();
        let g = shell_basis(1);
        let deficits: Vec<f64> = (2..8)
            .map(|s| build_fc_matrix(&g, &shell_basis(s), [0.0, 1.0, 0.5], &p).unwrap().max_sum_rule_deficit())
            .collect();
        assert!(deficits.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn empty_basis_is_error() {
        let b = shell_basis(1);
        assert!(build_fc_matrix(&[], &b, [1.0, 0.0, 0.0], &OscillatorParams::default()).is_err());
        assert!(OscillatorParams::new(0.0).is_err());
    }

    #[test]
    fn large_indices_stay_finite_and_normalised() {
        // unitarity of the infinite matrix: row n has unit norm if the column range is wide
        let q = 0.3;
        for &n in &[100usize, 300, 500] {
            let sum: f64 = (0..n + 200).map(|m| fc_factor_1d(n, m, q).norm_sqr()).sum();
            assert!((sum - 1.0).abs() < 1e-9, "n={n}: {sum}");
        }
    }

    #[test]
    fn csv_dump_writes_every_entry() {
        let b = shell_basis(1);
        let m = build_fc_matrix(&b, &b, [0.5, 0.0, 0.0], &OscillatorParams::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fc.csv");
        m.write_abs2_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1 + b.len() * b.len());
    }

    proptest! {
        #[test]
        fn modulus_bounded(n in 0usize..40, m in 0usize..40, q in -4.0f64..4.0) {
            prop_assert!(fc_factor_1d(n, m, q).norm() <= 1.0 + 1e-12);
        }

        #[test]
        fn adjoint_elementwise(n in 0usize..30, m in 0usize..30, q in -3.0f64..3.0) {
            prop_assert_eq!(fc_factor_1d(n, m, -q), fc_factor_1d(m, n, q).conj());
        }

        #[test]
        fn matrix_is_unitary_on_wide_basis(q in -1.5f64..1.5) {
            // rows of the infinite displacement matrix are orthonormal
            let rows: Vec<Vec<Complex64>> = (0..6).map(|n| (0..60).map(|m| fc_factor_1d(n, m, q)).collect()).collect();
            for a in 0..6 {
                for b in 0..6 {
                    let dot: Complex64 = rows[a].iter().zip(&rows[b]).map(|(x, y)| x * y.conj()).sum();
                    let e = if a == b { 1.0 } else { 0.0 };
                    prop_assert!((dot - e).norm() < 1e-12);
                }
            }
        }
    }
}
