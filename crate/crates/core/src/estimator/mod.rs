//! Per-subcarrier estimation of the antenna gain/phase vector `g` from
//! measurements `R` and ideal coefficients `A` under the model
//! `R = diag(g) A diag(s) + Z` with unknown unit-modulus transmit phases `s`.
//!
//! Two estimators are provided: alternating block minimization of
//! `||Z||_F` ([`coordinate_descent`]) and the principal eigenvector of the
//! sample autocorrelation of `R / A` ([`eigenvector_estimate`]). Both return
//! `g` in the antenna-0 phase gauge (see [`normalize_global_phase`]).

mod coordinate_descent;
mod eigen;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, ArrayView1, ArrayView2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use coordinate_descent::{coordinate_descent, coordinate_descent_from, coordinate_descent_traced};
pub use eigen::{
    eigenvector_estimate, power_iteration_eigpair, principal_eigpair, sample_autocorrelation,
    DENSE_EIGEN_LIMIT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    CoordinateDescent,
    Eigenvector,
}

impl Algorithm {
    pub const ALL: [Algorithm; 2] = [Algorithm::CoordinateDescent, Algorithm::Eigenvector];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::CoordinateDescent => "iterative",
            Algorithm::Eigenvector => "eigenvector",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iterative" | "coordinate-descent" | "coordinate_descent" => {
                Ok(Algorithm::CoordinateDescent)
            }
            "eigenvector" | "eigen" => Ok(Algorithm::Eigenvector),
            other => Err(Error::invalid(
                "algorithm",
                format!("'{other}' (expected 'iterative' or 'eigenvector')"),
            )),
        }
    }
}

/// Settings for [`coordinate_descent`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Upper bound on the number of (s-block, g-block) iterations.
    pub max_iterations: usize,
    /// Stop early once the relative residual decrease of one iteration falls
    /// below this value. Zero disables early stopping.
    pub relative_residual_tolerance: f64,
    /// Seed of the random initial `g`.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iterations: 40,
            relative_residual_tolerance: 1e-10,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::invalid("solver config", "max_iterations must be at least 1"));
        }
        if !(self.relative_residual_tolerance >= 0.0) {
            return Err(Error::invalid(
                "solver config",
                format!("tolerance {} must be non-negative", self.relative_residual_tolerance),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainPhaseEstimate {
    pub g_hat: Array1<Complex64>,
    pub s_hat: Array1<Complex64>,
    /// `||diag(g_hat) A diag(s_hat) - R||_F`.
    pub residual_frobenius: f64,
    /// Zero for the eigenvector method.
    pub iterations_used: usize,
    pub algorithm: Algorithm,
    /// Columns whose s-block projection was exactly zero in the last update.
    pub uninformative_columns: Vec<usize>,
}

pub(crate) fn check_shapes(
    r: &ArrayView2<'_, Complex64>,
    a: &ArrayView2<'_, Complex64>,
) -> Result<(usize, usize)> {
    if r.dim() != a.dim() {
        return Err(Error::shape("R vs A", format!("{:?}", a.dim()), format!("{:?}", r.dim())));
    }
    let (l, d) = r.dim();
    if l == 0 || d == 0 {
        return Err(Error::shape("R", "non-empty L x D", format!("{l} x {d}")));
    }
    Ok((l, d))
}

fn check_len(context: &'static str, v: &ArrayView1<'_, Complex64>, len: usize) -> Result<()> {
    if v.len() != len {
        return Err(Error::shape(context, len, v.len()));
    }
    Ok(())
}

/// `||diag(g) A diag(s) - R||_F`.
pub fn residual_norm(
    r: ArrayView2<'_, Complex64>,
    a: ArrayView2<'_, Complex64>,
    g: ArrayView1<'_, Complex64>,
    s: ArrayView1<'_, Complex64>,
) -> Result<f64> {
    let (l, d) = check_shapes(&r, &a)?;
    check_len("g", &g, l)?;
    check_len("s", &s, d)?;
    Ok(residual_unchecked(&r, &a, &g, &s))
}

pub(crate) fn residual_unchecked(
    r: &ArrayView2<'_, Complex64>,
    a: &ArrayView2<'_, Complex64>,
    g: &ArrayView1<'_, Complex64>,
    s: &ArrayView1<'_, Complex64>,
) -> f64 {
    let mut sum = 0.0;
    for ((row_r, row_a), gl) in r.outer_iter().zip(a.outer_iter()).zip(g.iter()) {
        for ((rv, av), sd) in row_r.iter().zip(row_a.iter()).zip(s.iter()) {
            sum += (gl * av * sd - rv).norm_sqr();
        }
    }
    sum.sqrt()
}

/// Result of an s-block update.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseUpdate {
    pub phases: Array1<Complex64>,
    /// Columns where `R[:, i]^H (g . A[:, i])` was zero; their phase is set to 1.
    pub uninformative: Vec<usize>,
}

/// Optimal unit-modulus `s` for fixed `g`, column by column:
/// `s_i = exp(-j arg(R[:, i]^H (g . A[:, i])))`.
pub fn update_s_block(
    r: ArrayView2<'_, Complex64>,
    a: ArrayView2<'_, Complex64>,
    g: ArrayView1<'_, Complex64>,
) -> Result<PhaseUpdate> {
    let (l, _) = check_shapes(&r, &a)?;
    check_len("g", &g, l)?;
    Ok(s_block_unchecked(&r, &a, &g))
}

pub(crate) fn s_block_unchecked(
    r: &ArrayView2<'_, Complex64>,
    a: &ArrayView2<'_, Complex64>,
    g: &ArrayView1<'_, Complex64>,
) -> PhaseUpdate {
    let mut uninformative = Vec::new();
    let phases = r
        .columns()
        .into_iter()
        .zip(a.columns())
        .enumerate()
        .map(|(i, (col_r, col_a))| {
            let projection: Complex64 = col_r
                .iter()
                .zip(col_a.iter())
                .zip(g.iter())
                .map(|((rv, av), gl)| rv.conj() * gl * av)
                .sum();
            let magnitude = projection.norm();
            if magnitude > 0.0 {
                projection.conj() / magnitude
            } else {
                uninformative.push(i);
                Complex64::new(1.0, 0.0)
            }
        })
        .collect();
    PhaseUpdate {
        phases,
        uninformative,
    }
}

/// Least-squares `g` for fixed `s`, row by row:
/// `g_i = (A[i, :] . s)^H R[i, :] / ||A[i, :] . s||^2`.
pub fn update_g_block(
    r: ArrayView2<'_, Complex64>,
    a: ArrayView2<'_, Complex64>,
    s: ArrayView1<'_, Complex64>,
) -> Result<Array1<Complex64>> {
    let (_, d) = check_shapes(&r, &a)?;
    check_len("s", &s, d)?;
    g_block_unchecked(&r, &a, &s)
}

pub(crate) fn g_block_unchecked(
    r: &ArrayView2<'_, Complex64>,
    a: &ArrayView2<'_, Complex64>,
    s: &ArrayView1<'_, Complex64>,
) -> Result<Array1<Complex64>> {
    r.outer_iter()
        .zip(a.outer_iter())
        .enumerate()
        .map(|(i, (row_r, row_a))| {
            let mut numerator = Complex64::new(0.0, 0.0);
            let mut energy = 0.0;
            for ((rv, av), sd) in row_r.iter().zip(row_a.iter()).zip(s.iter()) {
                let basis = av * sd;
                numerator += basis.conj() * rv;
                energy += basis.norm_sqr();
            }
            if energy > 0.0 {
                Ok(numerator / energy)
            } else {
                Err(Error::Degenerate(format!("row {i} of A . s has zero norm")))
            }
        })
        .collect()
}

/// Index and unit phasor of the first nonzero entry of `g`.
pub fn global_phase_reference(g: ArrayView1<'_, Complex64>) -> Result<(usize, Complex64)> {
    g.iter()
        .position(|z| z.norm() > 0.0)
        .map(|i| (i, g[i] / g[i].norm()))
        .ok_or_else(|| Error::UndefinedPhase("gain vector is all zero".into()))
}

/// Rotates `g` so that its first nonzero entry (normally antenna 0) is real
/// and positive. Magnitudes are unchanged.
pub fn normalize_global_phase(g: ArrayView1<'_, Complex64>) -> Result<Array1<Complex64>> {
    let (index, reference) = global_phase_reference(g)?;
    let inverse = reference.conj();
    let mut out = g.mapv(|z| z * inverse);
    out[index] = Complex64::new(g[index].norm(), 0.0);
    Ok(out)
}

/// Moves the global phase of `g` into `s` so the product `g_l s_d` is unchanged.
pub(crate) fn fix_gauge(g: &mut Array1<Complex64>, s: &mut Array1<Complex64>) -> Result<()> {
    let (_, reference) = global_phase_reference(g.view())?;
    *g = normalize_global_phase(g.view())?;
    s.mapv_inplace(|z| z * reference);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use ndarray::{array, Array2};
    use rand::Rng;
    use std::f64::consts::TAU;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_matrix(l: usize, d: usize, seed: u64) -> Array2<Complex64> {
        let mut rng = stream(seed, Purpose::Scenario, 0);
        Array2::from_shape_fn((l, d), |_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn random_unit(n: usize, seed: u64) -> Array1<Complex64> {
        let mut rng = stream(seed, Purpose::Scenario, 1);
        (0..n).map(|_| Complex64::from_polar(1.0, rng.random_range(0.0..TAU))).collect()
    }

    fn model(a: &Array2<Complex64>, g: &Array1<Complex64>, s: &Array1<Complex64>) -> Array2<Complex64> {
        Array2::from_shape_fn(a.dim(), |(l, d)| g[l] * a[[l, d]] * s[d])
    }

    #[test]
    fn residual_examples() {
        let a = random_matrix(2, 3, 1);
        let g = array![c(0.5, 1.0), c(-2.0, 0.1)];
        let s = random_unit(3, 2);
        let r = model(&a, &g, &s);
        assert!(residual_norm(r.view(), a.view(), g.view(), s.view()).unwrap() < 1e-15);

        let zeros = Array1::zeros(2);
        let r_norm = r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert_eq!(residual_norm(r.view(), a.view(), zeros.view(), s.view()).unwrap(), r_norm);

        let r = random_matrix(2, 3, 3);
        let mut brute = 0.0;
        for l in 0..2 {
            for d in 0..3 {
                brute += (g[l] * a[[l, d]] * s[d] - r[[l, d]]).norm_sqr();
            }
        }
        let got = residual_norm(r.view(), a.view(), g.view(), s.view()).unwrap();
        assert!((got - brute.sqrt()).abs() <= 1e-14 * brute.sqrt());

        assert!(matches!(
            residual_norm(r.view(), a.view(), s.view(), s.view()),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn s_block_inverts_model() {
        let a = random_matrix(4, 5, 4);
        let g = random_matrix(4, 1, 5).column(0).to_owned();
        let r = model(&a, &g, &Array1::from_elem(5, c(1.0, 0.0)));
        let update = update_s_block(r.view(), a.view(), g.view()).unwrap();
        for s in &update.phases {
            assert!((s - c(1.0, 0.0)).norm() < 1e-12);
        }
        let truth = random_unit(5, 6);
        let r = model(&a, &g, &truth);
        let update = update_s_block(r.view(), a.view(), g.view()).unwrap();
        for (s, t) in update.phases.iter().zip(&truth) {
            assert!((s - t).norm() < 1e-12);
            assert!((s.norm() - 1.0).abs() < 1e-12);
        }
        assert!(update.uninformative.is_empty());
    }

    #[test]
    fn s_block_matches_grid_search() {
        let a = random_matrix(3, 1, 7);
        let r = random_matrix(3, 1, 8);
        let g = random_matrix(3, 1, 9).column(0).to_owned();
        let update = update_s_block(r.view(), a.view(), g.view()).unwrap();

        let steps = 4096;
        let cost = |phi: f64| {
            let s = Complex64::from_polar(1.0, phi);
            (0..3).map(|l| (g[l] * a[[l, 0]] * s - r[[l, 0]]).norm_sqr()).sum::<f64>()
        };
        let best = (0..steps)
            .map(|k| TAU * k as f64 / steps as f64)
            .min_by(|x, y| cost(*x).total_cmp(&cost(*y)))
            .unwrap();
        let diff = (update.phases[0].arg() - best + std::f64::consts::PI).rem_euclid(TAU)
            - std::f64::consts::PI;
        assert!(diff.abs() <= TAU / steps as f64, "{diff}");
    }

    #[test]
    fn s_block_zero_projection_tie_break() {
        let a = array![[c(1.0, 0.0), c(1.0, 0.0)]];
        let r = array![[c(0.0, 0.0), c(2.0, 0.0)]];
        let g = array![c(1.0, 0.0)];
        let update = update_s_block(r.view(), a.view(), g.view()).unwrap();
        assert_eq!(update.phases[0], c(1.0, 0.0));
        assert_eq!(update.uninformative, vec![0]);
    }

    #[test]
    fn g_block_examples() {
        let a = random_matrix(3, 4, 10);
        let ones = Array1::from_elem(4, c(1.0, 0.0));
        let g = update_g_block(a.view(), a.view(), ones.view()).unwrap();
        for z in &g {
            assert!((z - c(1.0, 0.0)).norm() < 1e-14);
        }
        let scaled = a.mapv(|z| z * c(0.0, 2.0));
        let g = update_g_block(scaled.view(), a.view(), ones.view()).unwrap();
        for z in &g {
            assert!((z - c(0.0, 2.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn g_block_matches_normal_equation() {
        // One row: minimize ||g b - r||^2 with b = A . s, written out as a
        // 2x2 real normal equation in (Re g, Im g).
        let a = random_matrix(1, 4, 11);
        let r = random_matrix(1, 4, 12);
        let s = random_unit(4, 13);
        let g = update_g_block(r.view(), a.view(), s.view()).unwrap()[0];

        let mut m = [[0.0; 2]; 2];
        let mut rhs = [0.0; 2];
        for d in 0..4 {
            let b = a[[0, d]] * s[d];
            // g b = (x + jy)(p + jq) = (xp - yq) + j(xq + yp)
            let rows = [[b.re, -b.im], [b.im, b.re]];
            let target = [r[[0, d]].re, r[[0, d]].im];
            for (row, t) in rows.iter().zip(target) {
                for i in 0..2 {
                    for j in 0..2 {
                        m[i][j] += row[i] * row[j];
                    }
                    rhs[i] += row[i] * t;
                }
            }
        }
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let x = (rhs[0] * m[1][1] - m[0][1] * rhs[1]) / det;
        let y = (m[0][0] * rhs[1] - m[1][0] * rhs[0]) / det;
        assert!((g - c(x, y)).norm() < 1e-12, "{g} vs {x} {y}");
    }

    #[test]
    fn g_block_zero_row_is_degenerate() {
        let a = array![[c(0.0, 0.0), c(0.0, 0.0)]];
        let s = array![c(1.0, 0.0), c(1.0, 0.0)];
        assert!(matches!(
            update_g_block(a.view(), a.view(), s.view()),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn normalize_examples() {
        let g = array![c(0.0, 1.0), c(1.0, 0.0)];
        let n = normalize_global_phase(g.view()).unwrap();
        assert!((n[0] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((n[1] - c(0.0, -1.0)).norm() < 1e-15);

        let g = array![c(2.0, 0.0), c(3.0, 0.0)];
        assert_eq!(normalize_global_phase(g.view()).unwrap(), g);

        let g = array![c(0.0, 0.0), c(0.0, -2.0)];
        let n = normalize_global_phase(g.view()).unwrap();
        assert!((n[1] - c(2.0, 0.0)).norm() < 1e-15);

        let zero = Array1::<Complex64>::zeros(3);
        assert!(normalize_global_phase(zero.view()).is_err());
    }

    #[test]
    fn algorithm_parsing() {
        assert_eq!("iterative".parse::<Algorithm>().unwrap(), Algorithm::CoordinateDescent);
        assert_eq!("eigenvector".parse::<Algorithm>().unwrap(), Algorithm::Eigenvector);
        assert!("svd".parse::<Algorithm>().is_err());
    }
}
