//! Effect distributions: order statistics and histograms.
//!
//! Quantiles use linear interpolation between closest ranks (Hyndman–Fan
//! type 7): for probability p over n sorted values, h = (n − 1)p and the
//! result is x[⌊h⌋] + (h − ⌊h⌋)(x[⌊h⌋+1] − x[⌊h⌋]).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::direction::Cell;
use super::{AnalysisError, Variable};
use crate::runner::Effect;

pub const QUANTILE_RULE: &str = "linear interpolation between closest ranks (type 7)";
pub const QUANTILE_PROBS: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

/// Type-7 quantile of already sorted, nonempty values.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator); 0 for a single value.
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    /// Values at [`QUANTILE_PROBS`].
    pub quantiles: [f64; 5],
}

impl Summary {
    pub fn median(&self) -> f64 {
        self.quantiles[2]
    }
}

/// Bin counts over half-open intervals [e_i, e_{i+1}); the last bin also
/// takes values equal to the top edge. Values outside go to the under- and
/// overflow counters, so every input is counted once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub underflow: usize,
    pub overflow: usize,
}

impl Histogram {
    pub fn new(edges: &[f64], values: &[f64]) -> Result<Self, AnalysisError> {
        if edges.len() < 2 || edges.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
            return Err(AnalysisError::Invalid("histogram edges must be at least two strictly increasing values".into()));
        }
        let mut h = Histogram { edges: edges.to_vec(), counts: vec![0; edges.len() - 1], underflow: 0, overflow: 0 };
        let top = edges[edges.len() - 1];
        for &x in values {
            if x < edges[0] {
                h.underflow += 1;
            } else if x > top {
                h.overflow += 1;
            } else if x == top {
                *h.counts.last_mut().expect("at least one bin") += 1;
            } else {
                // First edge strictly greater than x closes x's bin.
                let i = edges.partition_point(|&e| e <= x);
                h.counts[i - 1] += 1;
            }
        }
        Ok(h)
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum::<usize>() + self.underflow + self.overflow
    }
}

/// `bins` equal-width edges spanning [lo, hi].
pub fn uniform_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let bins = bins.max(1);
    (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectDistribution {
    pub sorted: Vec<f64>,
    pub summary: Summary,
    pub histogram: Histogram,
}

/// Summary and histogram of one set of values.
pub fn effect_distribution(values: &[f64], edges: &[f64]) -> Result<EffectDistribution, AnalysisError> {
    if values.is_empty() {
        return Err(AnalysisError::Invalid("distribution of no values".into()));
    }
    if values.iter().any(|x| !x.is_finite()) {
        return Err(AnalysisError::Invalid("non-finite value in distribution".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let quantiles = QUANTILE_PROBS.map(|p| quantile_sorted(&sorted, p));
    let summary = Summary { n, mean, sd, min: sorted[0], max: sorted[n - 1], quantiles };
    let histogram = Histogram::new(edges, &sorted)?;
    Ok(EffectDistribution { sorted, summary, histogram })
}

/// Distributions of merged Δ per (population, vignette, variable).
pub fn effect_distributions(
    merged: &[Effect],
    edges: &[f64],
) -> Result<BTreeMap<Cell, EffectDistribution>, AnalysisError> {
    let mut values: BTreeMap<Cell, Vec<f64>> = BTreeMap::new();
    for e in merged {
        for var in Variable::ALL {
            values.entry((e.kind, e.vignette.clone(), var)).or_default().push(var.delta(e).as_f64());
        }
    }
    values.into_iter().map(|(cell, v)| Ok((cell, effect_distribution(&v, edges)?))).collect()
}

pub fn summaries_csv(dists: &BTreeMap<Cell, EffectDistribution>) -> String {
    let mut out = String::from("population,vignette,variable,n,mean,sd,min,q05,q25,q50,q75,q95,max\n");
    for ((kind, v, var), d) in dists {
        let s = &d.summary;
        let q = s.quantiles;
        let _ = writeln!(
            out,
            "{kind},{v},{},{},{},{},{},{},{},{},{},{},{}",
            var.as_str(), s.n, s.mean, s.sd, s.min, q[0], q[1], q[2], q[3], q[4], s.max
        );
    }
    out
}

/// Long-format histogram CSV, one row per bin plus under/overflow rows.
pub fn histograms_csv(dists: &BTreeMap<Cell, EffectDistribution>) -> String {
    let mut out = String::from("population,vignette,variable,bin_lo,bin_hi,count\n");
    for ((kind, v, var), d) in dists {
        let h = &d.histogram;
        let var = var.as_str();
        let _ = writeln!(out, "{kind},{v},{var},-inf,{},{}", h.edges[0], h.underflow);
        for (i, c) in h.counts.iter().enumerate() {
            let _ = writeln!(out, "{kind},{v},{var},{},{},{c}", h.edges[i], h.edges[i + 1]);
        }
        let _ = writeln!(out, "{kind},{v},{var},{},inf,{}", h.edges[h.edges.len() - 1], h.overflow);
    }
    out
}

/// Raw merged values for plotting, one row per effect.
pub fn values_csv(dists: &BTreeMap<Cell, EffectDistribution>) -> String {
    let mut out = String::from("population,vignette,variable,value\n");
    for ((kind, v, var), d) in dists {
        for x in &d.sorted {
            let _ = writeln!(out, "{kind},{v},{},{x}", var.as_str());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type7_examples() {
        let d = effect_distribution(&[4.0, 1.0, 3.0, 2.0], &[0.0, 5.0]).unwrap();
        assert_eq!(d.summary.median(), 2.5);
        assert_eq!((d.summary.quantiles[1], d.summary.quantiles[3]), (1.75, 3.25));
        let single = effect_distribution(&[0.7], &[0.0, 1.0]).unwrap();
        assert!(single.summary.quantiles.iter().all(|&q| q == 0.7));
        assert_eq!(single.summary.sd, 0.0);
    }

    #[test]
    fn histogram_example_and_edges() {
        let h = Histogram::new(&[0.0, 0.5, 1.01], &[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(h.counts, vec![2, 1]);
        let h = Histogram::new(&[0.0, 1.0, 2.0], &[-1.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!((h.underflow, h.counts.clone(), h.overflow), (1, vec![0, 2], 1));
        assert!(Histogram::new(&[1.0, 1.0], &[]).is_err());
        assert!(effect_distribution(&[], &[0.0, 1.0]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn quantiles_monotone_and_counts_conserved(
            values in proptest::collection::vec(-5.0f64..5.0, 1..80),
            bins in 1usize..12,
        ) {
            let d = effect_distribution(&values, &uniform_edges(-3.0, 3.0, bins)).unwrap();
            proptest::prop_assert!(d.summary.quantiles.windows(2).all(|w| w[0] <= w[1]));
            proptest::prop_assert!(d.summary.min <= d.summary.quantiles[0] && d.summary.quantiles[4] <= d.summary.max);
            proptest::prop_assert_eq!(d.histogram.total(), values.len());
            proptest::prop_assert_eq!(d.summary.n, values.len());
        }
    }
}
