//! Additive white circular-complex Gaussian noise at a per-element SNR.
//!
//! SNR is defined per matrix: the mean power over all `L * D` entries of the
//! noiseless matrix divided by the noise variance of one complex entry.

use ndarray::{Array2, ArrayView2, ArrayViewMut2};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{self, Purpose};
use crate::tensor::MeasurementTensor;

/// Mean per-entry power of `m`.
pub fn mean_power(m: ArrayView2<'_, Complex64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.iter().map(|z| z.norm_sqr()).sum::<f64>() / m.len() as f64
}

/// Noise variance per complex entry for the given signal power and SNR.
pub fn noise_variance(signal_power: f64, snr_db: f64) -> f64 {
    signal_power / 10f64.powf(snr_db / 10.0)
}

fn check_snr(snr_db: f64) -> Result<()> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::invalid("SNR", format!("{snr_db} dB")));
    }
    Ok(())
}

/// Adds noise to `m` in place with variance set from `reference` (usually `m`
/// itself before noise). `snr_db = +inf` leaves `m` untouched.
pub fn add_noise_in_place<R: Rng + ?Sized>(
    mut m: ArrayViewMut2<'_, Complex64>,
    reference_power: f64,
    snr_db: f64,
    rng: &mut R,
) {
    if snr_db == f64::INFINITY {
        return;
    }
    let sigma = (noise_variance(reference_power, snr_db) / 2.0).sqrt();
    for z in m.iter_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *z += Complex64::new(sigma * re, sigma * im);
    }
}

/// Returns a noisy copy of a single `L x D` matrix.
pub fn add_noise(m: ArrayView2<'_, Complex64>, snr_db: f64, seed: u64) -> Result<Array2<Complex64>> {
    check_snr(snr_db)?;
    let mut out = m.to_owned();
    let power = mean_power(m);
    let mut rng = rng::stream(seed, Purpose::MeasurementNoise, 0);
    add_noise_in_place(out.view_mut(), power, snr_db, &mut rng);
    Ok(out)
}

/// Returns a noisy copy of a tensor. Each subcarrier gets its own noise
/// stream and its own reference power.
pub fn add_noise_tensor(r: &MeasurementTensor, snr_db: f64, seed: u64) -> Result<MeasurementTensor> {
    check_snr(snr_db)?;
    let mut out = r.clone();
    out.as_array_mut()
        .outer_iter_mut()
        .into_par_iter()
        .enumerate()
        .for_each(|(n, mut m)| {
            let power = mean_power(m.view());
            let mut rng = rng::stream(seed, Purpose::MeasurementNoise, n as u64);
            add_noise_in_place(m.view_mut(), power, snr_db, &mut rng);
        });
    Ok(out)
}

/// Empirical SNR of `noisy` against `clean`, dB.
pub fn measured_snr_db(clean: ArrayView2<'_, Complex64>, noisy: ArrayView2<'_, Complex64>) -> f64 {
    let noise = &noisy - &clean;
    10.0 * (mean_power(clean) / mean_power(noise.view())).log10()
}
