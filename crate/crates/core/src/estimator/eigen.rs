use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView2};
use num_complex::Complex64;

use super::{check_shapes, fix_gauge, residual_unchecked, s_block_unchecked, Algorithm, GainPhaseEstimate};
use crate::error::{Error, Result};

/// Matrices up to this size use a full Hermitian eigendecomposition; larger
/// ones fall back to power iteration.
pub const DENSE_EIGEN_LIMIT: usize = 512;

const HERMITIAN_TOL: f64 = 1e-10;
const POWER_RAYLEIGH_TOL: f64 = 1e-12;
const POWER_RESIDUAL_TOL: f64 = 1e-11;
const POWER_MAX_ITERATIONS: usize = 100_000;

/// `C = (1/D) sum_d v_d v_d^H` with `v_d = R[:, d] / A[:, d]` elementwise,
/// symmetrized to be exactly Hermitian.
pub fn sample_autocorrelation(
    r: ArrayView2<'_, Complex64>,
    a: ArrayView2<'_, Complex64>,
) -> Result<Array2<Complex64>> {
    let (l, d) = check_shapes(&r, &a)?;
    if let Some(((li, di), _)) = a.indexed_iter().find(|(_, z)| z.norm() == 0.0) {
        return Err(Error::Degenerate(format!("ideal coefficient ({li}, {di}) is zero")));
    }
    let ratio = &r / &a;
    let mut c = Array2::<Complex64>::zeros((l, l));
    for column in ratio.columns() {
        for i in 0..l {
            let vi = column[i];
            for j in i..l {
                c[[i, j]] += vi * column[j].conj();
            }
        }
    }
    let scale = 1.0 / d as f64;
    for i in 0..l {
        c[[i, i]] = Complex64::new(c[[i, i]].re * scale, 0.0);
        for j in i + 1..l {
            let z = c[[i, j]] * scale;
            c[[i, j]] = z;
            c[[j, i]] = z.conj();
        }
    }
    Ok(c)
}

fn frobenius(c: &ArrayView2<'_, Complex64>) -> f64 {
    c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn check_hermitian(c: &ArrayView2<'_, Complex64>) -> Result<()> {
    let (rows, cols) = c.dim();
    if rows != cols || rows == 0 {
        return Err(Error::shape("Hermitian matrix", "non-empty square", format!("{rows} x {cols}")));
    }
    let mut skew = 0.0;
    for i in 0..rows {
        for j in 0..rows {
            skew += (c[[i, j]] - c[[j, i]].conj()).norm_sqr();
        }
    }
    if skew.sqrt() > HERMITIAN_TOL * frobenius(c) {
        return Err(Error::invalid(
            "Hermitian matrix",
            format!("||C - C^H||_F = {:e} exceeds tolerance", skew.sqrt()),
        ));
    }
    Ok(())
}

/// Largest eigenvalue and a unit-norm eigenvector of a Hermitian matrix.
///
/// Up to [`DENSE_EIGEN_LIMIT`] rows this is a full eigendecomposition; among
/// equal largest eigenvalues the one the decomposition lists first wins.
pub fn principal_eigpair(c: ArrayView2<'_, Complex64>) -> Result<(f64, Array1<Complex64>)> {
    check_hermitian(&c)?;
    if c.nrows() > DENSE_EIGEN_LIMIT {
        return power_iteration_eigpair(c);
    }
    let l = c.nrows();
    let eig = DMatrix::from_fn(l, l, |i, j| c[[i, j]]).symmetric_eigen();
    let mut best = 0;
    for (k, &value) in eig.eigenvalues.iter().enumerate() {
        if value > eig.eigenvalues[best] {
            best = k;
        }
    }
    let column = eig.eigenvectors.column(best);
    let norm = column.norm();
    let vector = column.iter().map(|z| z / norm).collect();
    Ok((eig.eigenvalues[best], vector))
}

/// Power iteration for the largest eigenvalue of a Hermitian matrix.
///
/// The spectrum is shifted by a Gershgorin bound when it may contain negative
/// eigenvalues, so the iteration targets the largest rather than the
/// largest-magnitude eigenvalue. Iterates until the Rayleigh quotient changes
/// by less than 1e-12 (relative) and the eigen-residual is below
/// 1e-11 * ||C||_F.
pub fn power_iteration_eigpair(c: ArrayView2<'_, Complex64>) -> Result<(f64, Array1<Complex64>)> {
    check_hermitian(&c)?;
    let l = c.nrows();
    let norm_c = frobenius(&c);
    if norm_c == 0.0 {
        let mut v = Array1::zeros(l);
        v[0] = Complex64::new(1.0, 0.0);
        return Ok((0.0, v));
    }

    let lower_bound = (0..l)
        .map(|i| {
            let radius: f64 = (0..l).filter(|&j| j != i).map(|j| c[[i, j]].norm()).sum();
            c[[i, i]].re - radius
        })
        .fold(f64::INFINITY, f64::min);
    let shift = (-lower_bound).max(0.0);

    // Start from the column with the largest diagonal entry; it always has a
    // component along the dominant eigenvector unless C is zero there.
    let start = (0..l)
        .max_by(|&i, &j| c[[i, i]].re.total_cmp(&c[[j, j]].re))
        .expect("non-empty");
    let mut v: Array1<Complex64> = c.column(start).to_owned();
    v[start] += shift;
    if v.iter().all(|z| z.norm() == 0.0) {
        v[start] = Complex64::new(1.0, 0.0);
    }
    normalize(&mut v);

    let mut rayleigh = f64::NAN;
    for _ in 0..POWER_MAX_ITERATIONS {
        let cv = c.dot(&v);
        let next_rayleigh = v.iter().zip(cv.iter()).map(|(x, y)| (x.conj() * y).re).sum::<f64>();
        let residual = cv
            .iter()
            .zip(v.iter())
            .map(|(y, x)| (y - x * next_rayleigh).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let converged = (next_rayleigh - rayleigh).abs() <= POWER_RAYLEIGH_TOL * next_rayleigh.abs()
            && residual <= POWER_RESIDUAL_TOL * norm_c;
        rayleigh = next_rayleigh;
        if converged {
            return Ok((rayleigh, v));
        }
        let mut next = cv;
        next.scaled_add(Complex64::new(shift, 0.0), &v);
        normalize(&mut next);
        v = next;
    }
    Err(Error::Degenerate(format!(
        "power iteration did not converge in {POWER_MAX_ITERATIONS} iterations"
    )))
}

fn normalize(v: &mut Array1<Complex64>) {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.mapv_inplace(|z| z / norm);
}

/// Estimates `g` as `sqrt(lambda) * u` for the principal eigenpair of the
/// sample autocorrelation, then derives `s` with one s-block update.
pub fn eigenvector_estimate(
    r: ArrayView2<'_, Complex64>,
    a: ArrayView2<'_, Complex64>,
) -> Result<GainPhaseEstimate> {
    let c = sample_autocorrelation(r, a)?;
    let (lambda, vector) = principal_eigpair(c.view())?;
    if !(lambda > 0.0) {
        return Err(Error::Degenerate(format!(
            "principal eigenvalue {lambda:e} of the autocorrelation is not positive"
        )));
    }
    let mut g = vector.mapv(|z| z * lambda.sqrt());
    let update = s_block_unchecked(&r, &a, &g.view());
    let mut s = update.phases;
    fix_gauge(&mut g, &mut s)?;
    let residual_frobenius = residual_unchecked(&r, &a, &g.view(), &s.view());
    Ok(GainPhaseEstimate {
        g_hat: g,
        s_hat: s,
        residual_frobenius,
        iterations_used: 0,
        algorithm: Algorithm::Eigenvector,
        uninformative_columns: update.uninformative,
    })
}
