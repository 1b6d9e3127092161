use std::collections::BTreeSet;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_delta, LipschitzSampler, PartitionSampler};
use crate::metric::{fmt_num, write_commented, PointSet};
use crate::rng::{derive_seed, rng};
use crate::{Error, Result};

/// Empirical separation parameter of a sampler at one scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaReport {
    pub delta: f64,
    pub beta_hat: f64,
    pub pairs_tested: usize,
    pub draws: usize,
    /// Ids of the pair attaining `beta_hat`, if any pair was separated.
    pub worst_pair: Option<(u64, u64)>,
    /// `beta_hat` of each recursion iterate, outermost last. Empty for plain samplers.
    pub series: Vec<f64>,
}

/// Row pairs `(i, j)`, `i < j`, in ascending order: all of them when
/// `n(n−1)/2 ≤ budget`, otherwise `budget` distinct uniform pairs.
pub fn sample_pairs(n: usize, budget: usize, seed: u64) -> Vec<(usize, usize)> {
    let total = n.saturating_mul(n.saturating_sub(1)) / 2;
    if total <= budget {
        return (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    }
    let mut r = rng(seed);
    let mut set = BTreeSet::new();
    while set.len() < budget {
        let i = r.gen_range(0..n);
        let j = r.gen_range(0..n);
        if i != j {
            set.insert((i.min(j), i.max(j)));
        }
    }
    set.into_iter().collect()
}

/// How many of `draws` partitions separate each pair. Draw `t` uses seed
/// `derive_seed(seed, t)`.
pub fn separation_counts(
    sampler: &dyn PartitionSampler,
    points: &PointSet,
    pairs: &[(usize, usize)],
    delta: f64,
    draws: usize,
    seed: u64,
) -> Result<Vec<u32>> {
    let m = pairs.len();
    crate::par::fold_range(
        draws,
        || Ok(vec![0u32; m]),
        |acc: Result<Vec<u32>>, t| {
            let mut counts = acc?;
            let part = sampler.sample(points, delta, derive_seed(seed, t as u64))?;
            for (c, &(i, j)) in counts.iter_mut().zip(pairs) {
                *c += u32::from(part.separates(i, j));
            }
            Ok(counts)
        },
        |a, b| {
            let (mut a, b) = (a?, b?);
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            Ok(a)
        },
    )
}

fn check_counts(draws: usize, pair_budget: usize) -> Result<()> {
    if draws == 0 || pair_budget == 0 {
        return Err(Error::param("draws and pair_budget must be at least 1"));
    }
    Ok(())
}

fn summarize(
    points: &PointSet,
    pairs: &[(usize, usize)],
    counts: &[u32],
    delta: f64,
    draws: usize,
) -> (f64, Option<(u64, u64)>) {
    let mut best = 0.0f64;
    let mut worst = None;
    for (&(i, j), &c) in pairs.iter().zip(counts) {
        let d = points.dist(i, j);
        if d <= 0.0 || c == 0 {
            continue;
        }
        let v = f64::from(c) / draws as f64 * delta / d;
        if v > best {
            best = v;
            worst = Some((points.id(i), points.id(j)));
        }
    }
    (best, worst)
}

/// `beta_hat = max over tested pairs of (separation frequency)·Δ/d(x, y)`.
///
/// The pair sample uses `derive_seed(seed, u64::MAX)`; draws are independent
/// of it, so two samplers estimated with one seed see the same pairs and the
/// same per-draw seeds.
pub fn estimate_beta(
    sampler: &dyn PartitionSampler,
    points: &PointSet,
    delta: f64,
    draws: usize,
    pair_budget: usize,
    seed: u64,
) -> Result<BetaReport> {
    check_delta(delta)?;
    check_counts(draws, pair_budget)?;
    let pairs = sample_pairs(points.len(), pair_budget, derive_seed(seed, u64::MAX));
    let counts = separation_counts(sampler, points, &pairs, delta, draws, seed)?;
    let (beta_hat, worst_pair) = summarize(points, &pairs, &counts, delta, draws);
    Ok(BetaReport {
        delta,
        beta_hat,
        pairs_tested: pairs.len(),
        draws,
        worst_pair,
        series: Vec::new(),
    })
}

/// [`estimate_beta`] for the full sampler, with `series` holding the
/// estimate of every top-level iterate (base first) on the same pairs and seeds.
pub fn estimate_beta_series(
    sampler: &LipschitzSampler<'_>,
    delta: f64,
    draws: usize,
    pair_budget: usize,
    seed: u64,
) -> Result<BetaReport> {
    let mut report = estimate_beta(sampler, sampler.points(), delta, draws, pair_budget, seed)?;
    let points = sampler.points();
    let pairs = sample_pairs(points.len(), pair_budget, derive_seed(seed, u64::MAX));
    for node in sampler.iterates() {
        let counts = separation_counts(node.as_ref(), points, &pairs, delta, draws, seed)?;
        report.series.push(summarize(points, &pairs, &counts, delta, draws).0);
    }
    Ok(report)
}

/// CSV `delta,draws,pairs,beta_hat,worst_i,worst_j`, one row per report.
/// The worst-pair ids are left empty when no tested pair was ever separated.
pub fn write_beta_csv(path: &Path, reports: &[BetaReport], comments: &[String]) -> Result<()> {
    let mut body = String::from("delta,draws,pairs,beta_hat,worst_i,worst_j\n");
    for r in reports {
        let (wi, wj) = r
            .worst_pair
            .map_or((String::new(), String::new()), |(i, j)| (i.to_string(), j.to_string()));
        body.push_str(&format!(
            "{},{},{},{},{wi},{wj}\n",
            fmt_num(r.delta),
            r.draws,
            r.pairs_tested,
            fmt_num(r.beta_hat)
        ));
    }
    write_commented(path, comments, &body)
}

/// CSV `iteration,beta_hat` from a report's per-iterate series.
pub fn write_beta_series_csv(path: &Path, report: &BetaReport, comments: &[String]) -> Result<()> {
    let mut body = String::from("iteration,beta_hat\n");
    for (i, b) in report.series.iter().enumerate() {
        body.push_str(&format!("{i},{}\n", fmt_num(*b)));
    }
    write_commented(path, comments, &body)
}
