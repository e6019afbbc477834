//! Quality measures for gain estimates: squared cosine similarity in dB,
//! agreement of transmit-phase estimates between two subarrays, and
//! residual traces of the iterative solver over random restarts.

use std::fmt;

use ndarray::{ArrayView1, ArrayView2};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_index, Error, Result};
use crate::estimator::{check_shapes, coordinate_descent_traced, eigenvector_estimate, SolverConfig};
use crate::geometry::Subarray;
use crate::rng::{self, Purpose};

/// Squared cosine similarity in dB. Orthogonal vectors have no finite value
/// and are reported as [`Similarity::Orthogonal`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Similarity {
    Db(f64),
    Orthogonal,
}

impl Similarity {
    pub fn db(self) -> Option<f64> {
        match self {
            Similarity::Db(v) => Some(v),
            Similarity::Orthogonal => None,
        }
    }

    /// The dB value, with orthogonal vectors mapped to `floor`.
    pub fn db_or(self, floor: f64) -> f64 {
        self.db().unwrap_or(floor)
    }
}

impl fmt::Display for Similarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Similarity::Db(v) => write!(f, "{v}"),
            Similarity::Orthogonal => f.write_str("orthogonal"),
        }
    }
}

/// `10 log10(|g_hat^H g|^2 / (||g_hat||^2 ||g||^2))`. Never positive; zero
/// exactly when the vectors are proportional (up to rounding).
pub fn cosine_similarity_db(
    g_hat: ArrayView1<'_, Complex64>,
    g_true: ArrayView1<'_, Complex64>,
) -> Result<Similarity> {
    if g_hat.len() != g_true.len() {
        return Err(Error::shape("cosine similarity", g_true.len(), g_hat.len()));
    }
    let energy_hat: f64 = g_hat.iter().map(|z| z.norm_sqr()).sum();
    let energy_true: f64 = g_true.iter().map(|z| z.norm_sqr()).sum();
    if !(energy_hat > 0.0 && energy_true > 0.0) {
        return Err(Error::invalid("cosine similarity", "zero vector"));
    }
    let inner: Complex64 = g_hat.iter().zip(g_true.iter()).map(|(x, y)| x.conj() * y).sum();
    let ratio = (inner.norm_sqr() / (energy_hat * energy_true)).min(1.0);
    if ratio == 0.0 {
        return Ok(Similarity::Orthogonal);
    }
    Ok(Similarity::Db(10.0 * ratio.log10()))
}

/// Per time instance `|s_C,d - s_B,d|`, where each starting phase is
/// estimated only from the antennas of one subarray.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementSeries {
    pub label_b: String,
    pub label_c: String,
    /// `None` where one of the two phase sums vanished.
    pub values: Vec<Option<f64>>,
}

fn subset_phase(
    r: &ArrayView2<'_, Complex64>,
    a: &ArrayView2<'_, Complex64>,
    g: &ArrayView1<'_, Complex64>,
    antennas: &[usize],
    d: usize,
) -> Option<Complex64> {
    let sum: Complex64 = antennas.iter().map(|&l| r[[l, d]].conj() * g[l] * a[[l, d]]).sum();
    let magnitude = sum.norm();
    (magnitude > 0.0).then(|| sum / magnitude)
}

pub fn starting_phase_agreement(
    r: ArrayView2<'_, Complex64>,
    a: ArrayView2<'_, Complex64>,
    g: ArrayView1<'_, Complex64>,
    subset_b: &Subarray,
    subset_c: &Subarray,
) -> Result<AgreementSeries> {
    let (l, d) = check_shapes(&r, &a)?;
    if g.len() != l {
        return Err(Error::shape("g", l, g.len()));
    }
    for subset in [subset_b, subset_c] {
        if subset.antennas.is_empty() {
            return Err(Error::invalid("subarray", format!("'{}' is empty", subset.label)));
        }
        for &antenna in &subset.antennas {
            check_index("antenna", antenna, l)?;
        }
    }
    if subset_b.antennas.iter().any(|x| subset_c.antennas.contains(x)) {
        return Err(Error::invalid(
            "subarray",
            format!("'{}' and '{}' overlap", subset_b.label, subset_c.label),
        ));
    }

    let values = (0..d)
        .map(|di| {
            let sb = subset_phase(&r, &a, &g, &subset_b.antennas, di)?;
            let sc = subset_phase(&r, &a, &g, &subset_c.antennas, di)?;
            Some((sc - sb).norm().min(2.0))
        })
        .collect();
    Ok(AgreementSeries {
        label_b: subset_b.label.clone(),
        label_c: subset_c.label.clone(),
        values,
    })
}

/// Linear-interpolation quantile of sorted data, `p` in `[0, 1]`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Box-plot summary; whiskers reach the most extreme samples within
/// 1.5 inter-quartile ranges of the box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
}

pub fn box_stats(values: &[f64]) -> Option<BoxStats> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    let reach = 1.5 * (q3 - q1);
    let whisker_low = *sorted.iter().find(|&&v| v >= q1 - reach).expect("q1 is inside");
    let whisker_high = *sorted.iter().rev().find(|&&v| v <= q3 + reach).expect("q3 is inside");
    Some(BoxStats {
        q1,
        median: quantile_sorted(&sorted, 0.5),
        q3,
        whisker_low,
        whisker_high,
    })
}

/// Residual of the iterative solver per iteration for several random
/// initializations, with the eigenvector method and `||R||_F` as references.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualTrace {
    pub sequences: Vec<Vec<f64>>,
    pub eigenvector_residual: f64,
    pub measurement_norm: f64,
}

impl ResidualTrace {
    pub fn final_residuals(&self) -> Vec<f64> {
        self.sequences.iter().filter_map(|s| s.last().copied()).collect()
    }

    /// `(max - min) / median` of the final residuals.
    pub fn final_spread(&self) -> f64 {
        let mut finals = self.final_residuals();
        finals.sort_by(f64::total_cmp);
        let median = quantile_sorted(&finals, 0.5);
        (finals[finals.len() - 1] - finals[0]) / median
    }

    /// Box statistics over restarts for each iteration index. Sequences that
    /// stopped early contribute their last value.
    pub fn iteration_boxes(&self) -> Vec<BoxStats> {
        let longest = self.sequences.iter().map(Vec::len).max().unwrap_or(0);
        (0..longest)
            .filter_map(|m| {
                let column: Vec<f64> = self
                    .sequences
                    .iter()
                    .filter_map(|s| s.get(m).or(s.last()).copied())
                    .collect();
                box_stats(&column)
            })
            .collect()
    }
}

/// Runs the iterative solver from `restarts` independent initializations
/// (streams `0..restarts` of `config.seed`).
pub fn residual_trace(
    r: ArrayView2<'_, Complex64>,
    a: ArrayView2<'_, Complex64>,
    config: &SolverConfig,
    restarts: usize,
) -> Result<ResidualTrace> {
    if restarts == 0 {
        return Err(Error::invalid("residual trace", "at least one restart is required"));
    }
    config.validate()?;
    check_shapes(&r, &a)?;
    let sequences = (0..restarts)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng::stream(config.seed, Purpose::SolverInit, k as u64);
            coordinate_descent_traced(r, a, config, &mut rng).map(|(_, trace)| trace)
        })
        .collect::<Result<Vec<_>>>()?;
    let eigenvector_residual = eigenvector_estimate(r, a)?.residual_frobenius;
    Ok(ResidualTrace {
        sequences,
        eigenvector_residual,
        measurement_norm: r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn cosine_examples() {
        let g = array![c(1.0, 2.0), c(-0.5, 0.1), c(0.3, -0.7)];
        assert_eq!(cosine_similarity_db(g.view(), g.view()).unwrap(), Similarity::Db(0.0));

        let scaled = g.mapv(|z| z * Complex64::from_polar(3.5, 1.1));
        let p = cosine_similarity_db(scaled.view(), g.view()).unwrap().db().unwrap();
        assert!(p.abs() < 1e-12 && p <= 0.0);

        let e1 = array![c(1.0, 0.0), c(0.0, 0.0)];
        let diag = array![c(1.0, 0.0), c(1.0, 0.0)].mapv(|z| z / 2f64.sqrt());
        let p = cosine_similarity_db(diag.view(), e1.view()).unwrap().db().unwrap();
        assert!((p - 10.0 * 0.5f64.log10()).abs() < 1e-12);
        assert!((p + 3.0103).abs() < 1e-4);
    }

    #[test]
    fn cosine_edge_cases() {
        let e1 = array![c(1.0, 0.0), c(0.0, 0.0)];
        let e2 = array![c(0.0, 0.0), c(0.0, 1.0)];
        assert_eq!(cosine_similarity_db(e1.view(), e2.view()).unwrap(), Similarity::Orthogonal);
        let zero = Array1::<Complex64>::zeros(2);
        assert!(cosine_similarity_db(zero.view(), e1.view()).is_err());
        assert!(cosine_similarity_db(e1.view(), array![c(1.0, 0.0)].view()).is_err());
    }

    #[test]
    fn agreement_extremes() {
        // Antenna 0 alone sees phase +1, antenna 1 alone sees phase -1.
        let a = array![[c(1.0, 0.0)], [c(1.0, 0.0)]];
        let r = array![[c(1.0, 0.0)], [c(-1.0, 0.0)]];
        let g = array![c(1.0, 0.0), c(1.0, 0.0)];
        let b = Subarray { label: "B".into(), antennas: vec![0] };
        let cc = Subarray { label: "C".into(), antennas: vec![1] };
        let series = starting_phase_agreement(r.view(), a.view(), g.view(), &b, &cc).unwrap();
        assert_eq!(series.values, vec![Some(2.0)]);

        let r = array![[c(0.0, 0.0)], [c(-1.0, 0.0)]];
        let series = starting_phase_agreement(r.view(), a.view(), g.view(), &b, &cc).unwrap();
        assert_eq!(series.values, vec![None]);

        let overlap = Subarray { label: "C".into(), antennas: vec![0, 1] };
        assert!(starting_phase_agreement(r.view(), a.view(), g.view(), &b, &overlap).is_err());
        let empty = Subarray { label: "C".into(), antennas: vec![] };
        assert!(starting_phase_agreement(r.view(), a.view(), g.view(), &b, &empty).is_err());
    }

    #[test]
    fn quantiles_and_boxes() {
        let sorted = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&sorted, 0.25), 1.75);
        assert_eq!(quantile_sorted(&sorted, 0.5), 2.5);
        assert_eq!(quantile_sorted(&[5.0], 0.75), 5.0);

        let stats = box_stats(&[1.0, 2.0, 3.0, 4.0, 100.0]).unwrap();
        assert_eq!(stats.median, 3.0);
        assert_eq!((stats.q1, stats.q3), (2.0, 4.0));
        assert_eq!(stats.whisker_low, 1.0);
        assert_eq!(stats.whisker_high, 4.0);
        assert!(box_stats(&[]).is_none());
    }
}
