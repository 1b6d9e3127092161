use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{ann_query, brute_force_nn, RecursiveAnnStructure};
use crate::metric::{fmt_num, quantile_sorted, write_commented, PointSet};
use crate::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub query_id: u64,
    pub true_dist: f64,
    pub got_dist: f64,
    pub ratio: f64,
    pub success_at_theory: bool,
    pub micros_query: u64,
    /// Distance and ratio of the base index's own answer.
    pub base_dist: f64,
    pub base_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub r: f64,
    /// `ĉ_k`; success means `got_dist ≤ ĉ_k·r`.
    pub c_theory: f64,
    pub success_rate: f64,
    pub base_success_rate: f64,
    pub median_ratio: f64,
    pub base_median_ratio: f64,
    pub p90_ratio: f64,
    pub max_ratio: f64,
    pub never_worse: bool,
    pub rows: Vec<BenchRow>,
}

fn ratio(got: f64, truth: f64) -> f64 {
    if truth > 0.0 {
        got / truth
    } else if got == 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}

/// Run every query against the structure and the brute-force oracle.
pub fn ann_bench(structure: &RecursiveAnnStructure, queries: &PointSet, r: f64) -> Result<BenchReport> {
    let c_theory = structure.advertised_c();
    let threshold = c_theory * r;
    let rows = crate::par::try_map_range(queries.len(), |i| {
        let q = queries.row(i);
        let start = Instant::now();
        let out = ann_query(structure, q, Some(threshold))?;
        let micros_query = start.elapsed().as_micros() as u64;
        let (_, true_dist) = brute_force_nn(&structure.dataset, q)?;
        Ok(BenchRow {
            query_id: queries.id(i),
            true_dist,
            got_dist: out.distance,
            ratio: ratio(out.distance, true_dist),
            success_at_theory: out.distance <= threshold,
            micros_query,
            base_dist: out.base_distance,
            base_ratio: ratio(out.base_distance, true_dist),
        })
    })?;
    let m = rows.len().max(1) as f64;
    let rate = |f: &dyn Fn(&BenchRow) -> bool| rows.iter().filter(|r| f(r)).count() as f64 / m;
    let sorted = |f: &dyn Fn(&BenchRow) -> f64| {
        let mut v: Vec<f64> = rows.iter().map(f).collect();
        v.sort_by(f64::total_cmp);
        v
    };
    let ratios = sorted(&|r| r.ratio);
    let base_ratios = sorted(&|r| r.base_ratio);
    let q = |v: &[f64], x: f64| if v.is_empty() { f64::NAN } else { quantile_sorted(v, x) };
    Ok(BenchReport {
        r,
        c_theory,
        success_rate: rate(&|row| row.success_at_theory),
        base_success_rate: rate(&|row| row.base_dist <= threshold),
        median_ratio: q(&ratios, 0.5),
        base_median_ratio: q(&base_ratios, 0.5),
        p90_ratio: q(&ratios, 0.9),
        max_ratio: ratios.last().copied().unwrap_or(f64::NAN),
        never_worse: rows.iter().all(|row| row.got_dist <= row.base_dist),
        rows,
    })
}

/// CSV with header `query_id,true_dist,got_dist,ratio,success_at_theory,micros_query`,
/// preceded by `# key=value` comment lines.
pub fn write_bench_csv(path: &Path, report: &BenchReport, comments: &[String]) -> Result<()> {
    let mut out = String::from("query_id,true_dist,got_dist,ratio,success_at_theory,micros_query\n");
    for row in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.query_id,
            fmt_num(row.true_dist),
            fmt_num(row.got_dist),
            fmt_num(row.ratio),
            u8::from(row.success_at_theory),
            row.micros_query
        ));
    }
    write_commented(path, comments, &out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ann::{build_recursive_ann, AnnConfig, BaseStrategy};
    use crate::metric::{generate_dataset, DatasetKind, NormExponent};

    #[test]
    fn exact_base_gives_unit_ratios() {
        let ds = generate_dataset(DatasetKind::PlantedClusters, 100, 16, NormExponent::Finite(4.0), 1).unwrap();
        let mut cfg = AnnConfig::new(4.0, 1.0);
        cfg.base = BaseStrategy::ExactOracle;
        let s = build_recursive_ann(&ds.points, cfg, 0).unwrap();
        let queries = ds.planted.unwrap().queries;
        let rep = ann_bench(&s, &queries, 1.0).unwrap();
        assert_eq!(rep.rows.len(), queries.len());
        assert!(rep.rows.iter().all(|r| r.ratio == 1.0));
        assert_eq!(rep.success_rate, 1.0);
        assert!(rep.never_worse);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bench.csv");
        write_bench_csv(&path, &rep, &["seed=0".into()]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), queries.len() + 2);
        assert!(text.starts_with("# seed=0\nquery_id,true_dist"));
    }
}
