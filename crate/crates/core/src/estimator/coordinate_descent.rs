use ndarray::{Array1, ArrayView2};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{
    check_shapes, fix_gauge, g_block_unchecked, residual_unchecked, s_block_unchecked, Algorithm,
    GainPhaseEstimate, SolverConfig,
};
use crate::error::{Error, Result};
use crate::rng::{self, Purpose};

/// Alternating minimization of `||diag(g) A diag(s) - R||_F`: each iteration
/// updates the whole s-block, then the whole g-block, both in closed form.
///
/// The initial `g` is complex standard normal, drawn from stream 0 of
/// `config.seed`.
pub fn coordinate_descent(
    r: ArrayView2<'_, Complex64>,
    a: ArrayView2<'_, Complex64>,
    config: &SolverConfig,
) -> Result<GainPhaseEstimate> {
    let mut rng = rng::stream(config.seed, Purpose::SolverInit, 0);
    coordinate_descent_traced(r, a, config, &mut rng).map(|(estimate, _)| estimate)
}

/// Like [`coordinate_descent`] but draws the initial `g` from `rng` and also
/// returns the residual after every iteration.
pub fn coordinate_descent_traced<R: Rng + ?Sized>(
    r: ArrayView2<'_, Complex64>,
    a: ArrayView2<'_, Complex64>,
    config: &SolverConfig,
    rng: &mut R,
) -> Result<(GainPhaseEstimate, Vec<f64>)> {
    let (l, _) = check_shapes(&r, &a)?;
    let half = std::f64::consts::FRAC_1_SQRT_2;
    let initial: Array1<Complex64> = (0..l)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re * half, im * half)
        })
        .collect();
    coordinate_descent_from(r, a, initial, config)
}

/// Runs the iteration from a given initial `g`.
pub fn coordinate_descent_from(
    r: ArrayView2<'_, Complex64>,
    a: ArrayView2<'_, Complex64>,
    initial: Array1<Complex64>,
    config: &SolverConfig,
) -> Result<(GainPhaseEstimate, Vec<f64>)> {
    config.validate()?;
    let (l, _) = check_shapes(&r, &a)?;
    if initial.len() != l {
        return Err(Error::shape("initial g", l, initial.len()));
    }

    let mut g = initial;
    let mut s;
    let mut uninformative;
    let mut trace = Vec::with_capacity(config.max_iterations);
    loop {
        let update = s_block_unchecked(&r, &a, &g.view());
        s = update.phases;
        uninformative = update.uninformative;
        g = g_block_unchecked(&r, &a, &s.view())?;

        let residual = residual_unchecked(&r, &a, &g.view(), &s.view());
        let previous = trace.last().copied();
        trace.push(residual);
        if trace.len() >= config.max_iterations {
            break;
        }
        if let Some(previous) = previous {
            if previous <= 0.0
                || (previous - residual) / previous < config.relative_residual_tolerance
            {
                break;
            }
        }
    }

    fix_gauge(&mut g, &mut s)?;
    let residual_frobenius = residual_unchecked(&r, &a, &g.view(), &s.view());
    Ok((
        GainPhaseEstimate {
            g_hat: g,
            s_hat: s,
            residual_frobenius,
            iterations_used: trace.len(),
            algorithm: Algorithm::CoordinateDescent,
            uninformative_columns: uninformative,
        },
        trace,
    ))
}
