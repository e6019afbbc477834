//! Monte-Carlo comparison of the two estimators over an SNR grid.
//!
//! Every `(snr point, trial)` key owns one noise stream and one solver
//! initialization stream, and both estimators see the same noisy matrix, so
//! the comparison is paired and results do not depend on thread scheduling.

use std::fmt::Write as _;

use ndarray::{ArrayView1, ArrayView2};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{check_shapes, coordinate_descent_traced, eigenvector_estimate, Algorithm, SolverConfig};
use crate::metrics::{cosine_similarity_db, quantile_sorted};
use crate::noise;
use crate::rng::{self, pair_index, Purpose};

/// Stand-in dB value for an estimate orthogonal to the truth.
pub const ORTHOGONAL_FLOOR_DB: f64 = -300.0;

/// Column names of the tabular sweep output, in order.
pub const SWEEP_COLUMNS: [&str; 6] = [
    "snr_db",
    "algorithm",
    "mean_p_db",
    "q1_p_db",
    "q3_p_db",
    "n_realizations",
];

/// Number of noise realizations per SNR point used by full-scale studies.
pub const FULL_SCALE_REALIZATIONS: usize = 5000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub snr_db: f64,
    pub algorithm: Algorithm,
    pub mean_p_db: f64,
    pub q1_p_db: f64,
    pub q3_p_db: f64,
    pub n_realizations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub num_antennas: usize,
    pub num_positions: usize,
    pub seed: u64,
    pub max_iterations: usize,
    pub realizations: usize,
}

impl SweepResult {
    pub fn row(&self, snr_db: f64, algorithm: Algorithm) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.snr_db == snr_db && r.algorithm == algorithm)
    }

    /// Comma-separated table with a `#`-prefixed configuration header.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# phasecal snr sweep").unwrap();
        writeln!(
            out,
            "# L={} D={} seed={} max_iterations={}",
            self.num_antennas, self.num_positions, self.seed, self.max_iterations
        )
        .unwrap();
        writeln!(
            out,
            "# realizations_per_point={} (full-scale runs use {})",
            self.realizations, FULL_SCALE_REALIZATIONS
        )
        .unwrap();
        writeln!(out, "{}", SWEEP_COLUMNS.join(",")).unwrap();
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.snr_db, r.algorithm, r.mean_p_db, r.q1_p_db, r.q3_p_db, r.n_realizations
            )
            .unwrap();
        }
        out
    }
}

/// Parses the rows of a table written by [`SweepResult::to_table`].
pub fn parse_sweep_table(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some((_, header)) if header.trim() == SWEEP_COLUMNS.join(",") => {}
        _ => return Err(Error::invalid("sweep table", "missing column header")),
    }
    lines
        .map(|(i, line)| {
            let bad = |what: &str| Error::invalid("sweep table", format!("line {}: {what}", i + 1));
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != SWEEP_COLUMNS.len() {
                return Err(bad("wrong number of columns"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
            Ok(SweepRow {
                snr_db: num(fields[0])?,
                algorithm: fields[1].parse()?,
                mean_p_db: num(fields[2])?,
                q1_p_db: num(fields[3])?,
                q3_p_db: num(fields[4])?,
                n_realizations: fields[5].parse().map_err(|_| bad("bad count"))?,
            })
        })
        .collect()
}

/// Paired Monte-Carlo sweep. For every SNR in `snr_grid` and every trial,
/// noise at that per-element SNR (relative to `r_clean`) is added, both
/// estimators run on the same noisy matrix, and the squared cosine
/// similarity to `g_true` is aggregated. `config.seed` is the master seed.
pub fn snr_sweep(
    r_clean: ArrayView2<'_, Complex64>,
    a: ArrayView2<'_, Complex64>,
    g_true: ArrayView1<'_, Complex64>,
    snr_grid: &[f64],
    realizations: usize,
    config: &SolverConfig,
) -> Result<SweepResult> {
    if snr_grid.is_empty() {
        return Err(Error::invalid("sweep", "empty SNR grid"));
    }
    if realizations == 0 {
        return Err(Error::invalid("sweep", "at least one realization is required"));
    }
    if let Some(bad) = snr_grid.iter().find(|s| !s.is_finite()) {
        return Err(Error::invalid("sweep", format!("SNR {bad} dB is not finite")));
    }
    config.validate()?;
    let (l, d) = check_shapes(&r_clean, &a)?;
    if g_true.len() != l {
        return Err(Error::shape("true gain vector", l, g_true.len()));
    }
    let reference_power = noise::mean_power(r_clean);

    let jobs: Vec<(usize, usize)> = (0..snr_grid.len())
        .flat_map(|i| (0..realizations).map(move |t| (i, t)))
        .collect();
    let scores = jobs
        .par_iter()
        .map(|&(i, trial)| {
            let key = pair_index(i, trial);
            let mut noisy = r_clean.to_owned();
            let mut noise_rng = rng::stream(config.seed, Purpose::SweepNoise, key);
            noise::add_noise_in_place(noisy.view_mut(), reference_power, snr_grid[i], &mut noise_rng);

            let mut init_rng = rng::stream(config.seed, Purpose::SweepSolverInit, key);
            let (iterative, _) = coordinate_descent_traced(noisy.view(), a, config, &mut init_rng)?;
            let eigen = eigenvector_estimate(noisy.view(), a)?;
            let p_iterative = cosine_similarity_db(iterative.g_hat.view(), g_true)?;
            let p_eigen = cosine_similarity_db(eigen.g_hat.view(), g_true)?;
            Ok([
                p_iterative.db_or(ORTHOGONAL_FLOOR_DB),
                p_eigen.db_or(ORTHOGONAL_FLOOR_DB),
            ])
        })
        .collect::<Result<Vec<[f64; 2]>>>()?;

    let mut rows = Vec::with_capacity(2 * snr_grid.len());
    for (i, &snr_db) in snr_grid.iter().enumerate() {
        let block = &scores[i * realizations..(i + 1) * realizations];
        for (k, algorithm) in Algorithm::ALL.into_iter().enumerate() {
            let mut values: Vec<f64> = block.iter().map(|s| s[k]).collect();
            let mean = values.iter().sum::<f64>() / realizations as f64;
            values.sort_by(f64::total_cmp);
            rows.push(SweepRow {
                snr_db,
                algorithm,
                mean_p_db: mean,
                q1_p_db: quantile_sorted(&values, 0.25),
                q3_p_db: quantile_sorted(&values, 0.75),
                n_realizations: realizations,
            });
        }
    }
    Ok(SweepResult {
        rows,
        num_antennas: l,
        num_positions: d,
        seed: config.seed,
        max_iterations: config.max_iterations,
        realizations,
    })
}

/// Parses an SNR grid given as `start:step:stop` (inclusive) or as a
/// comma-separated list.
pub fn parse_snr_grid(text: &str) -> Result<Vec<f64>> {
    let bad = |reason: &str| Error::invalid("SNR grid", format!("'{text}': {reason}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("not a number"));
    let parts: Vec<&str> = text.split(':').collect();
    let grid = match parts.as_slice() {
        [start, step, stop] => {
            let (start, step, stop) = (num(start)?, num(step)?, num(stop)?);
            if !(step > 0.0) || stop < start {
                return Err(bad("need step > 0 and stop >= start"));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            (0..count).map(|k| start + k as f64 * step).collect()
        }
        [list] => list.split(',').map(num).collect::<Result<Vec<_>>>()?,
        _ => return Err(bad("expected start:step:stop or a comma-separated list")),
    };
    if grid.is_empty() {
        return Err(bad("empty"));
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let grid = parse_snr_grid("-12:1:5").unwrap();
        assert_eq!(grid.len(), 18);
        assert_eq!(grid[0], -12.0);
        assert_eq!(grid[17], 5.0);
        assert_eq!(parse_snr_grid("0:0.5:1").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_snr_grid("3, -2").unwrap(), vec![3.0, -2.0]);
        assert!(parse_snr_grid("1:0:3").is_err());
        assert!(parse_snr_grid("a").is_err());
        assert!(parse_snr_grid("1:2").is_err());
    }

    #[test]
    fn table_round_trip() {
        let result = SweepResult {
            rows: vec![SweepRow {
                snr_db: -3.0,
                algorithm: Algorithm::Eigenvector,
                mean_p_db: -0.123456789,
                q1_p_db: -0.2,
                q3_p_db: -0.05,
                n_realizations: 7,
            }],
            num_antennas: 4,
            num_positions: 9,
            seed: 1,
            max_iterations: 40,
            realizations: 7,
        };
        let table = result.to_table();
        assert!(table.contains("snr_db,algorithm,mean_p_db,q1_p_db,q3_p_db,n_realizations"));
        assert!(table.contains("full-scale runs use 5000"));
        assert_eq!(parse_sweep_table(&table).unwrap(), result.rows);
    }
}
