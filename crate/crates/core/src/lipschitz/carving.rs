use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_delta, Partition, PartitionSampler, Provenance};
use crate::metric::{JlProjection, NormExponent, PointSet};
use crate::rng::{derive_seed, rng};
use crate::{Error, Result};

/// `true` when `2·max_j d(x_0, x_j) ≤ delta`, which bounds the diameter.
fn fits_in_one(points: &PointSet, delta: f64) -> bool {
    let reach = (1..points.len()).fold(0.0f64, |m, j| m.max(points.dist(0, j)));
    2.0 * reach <= delta
}

/// Each row joins the first center (in `order`) within `radius`. Every row
/// is itself a center, so the search always terminates.
fn carve(points: &PointSet, order: &[usize], radius: f64) -> Vec<usize> {
    crate::par::map_range(points.len(), |x| {
        let row = points.row(x);
        order
            .iter()
            .position(|&c| points.dist_to(c, row) <= radius)
            .expect("every row lies within radius of itself")
    })
}

/// CKR-style random ball carving: one radius uniform in `[Δ/4, Δ/2]`,
/// centers visited in a uniformly random order. Works for any norm.
pub fn ckr_partition(points: &PointSet, delta: f64, seed: u64) -> Result<Partition> {
    check_delta(delta)?;
    let tag = vec![Provenance::new(0, "ckr")];
    if fits_in_one(points, delta) {
        return Ok(Partition::single(points.len(), delta, seed, tag));
    }
    let mut r = rng(seed);
    let radius = r.gen_range(delta / 4.0..=delta / 2.0);
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.shuffle(&mut r);
    let labels = carve(points, &order, radius);
    Ok(Partition::from_labels(&labels, delta, seed, tag))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum L2Strategy {
    /// Randomly shifted axis grid, cell side `Δ/√d`.
    Grid,
    /// Ball carving with fixed radius `Δ/2` and random center order.
    BallCarve,
}

impl FromStr for L2Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid" | "l2-grid" => Ok(L2Strategy::Grid),
            "ballcarve" | "l2-ballcarve" => Ok(L2Strategy::BallCarve),
            _ => Err(Error::Unknown {
                what: "l2 strategy",
                value: s.to_string(),
            }),
        }
    }
}

impl fmt::Display for L2Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            L2Strategy::Grid => "l2-grid",
            L2Strategy::BallCarve => "l2-ballcarve",
        })
    }
}

/// Projection target used by the optional JL step: `⌈8 ln n⌉`.
pub(crate) fn jl_dim(n: usize) -> usize {
    ((8.0 * (n.max(2) as f64).ln()).ceil() as usize).max(1)
}

/// ℓ_2 base partition. With `jl`, sets with `d > ⌈8 ln n⌉` are first
/// projected; the scale used in the projected space is shrunk by the
/// measured worst contraction, so the diameter bound holds in the original
/// coordinates.
pub fn l2_base_partition(
    points: &PointSet,
    delta: f64,
    strategy: L2Strategy,
    jl: bool,
    seed: u64,
) -> Result<Partition> {
    check_delta(delta)?;
    if points.norm() != NormExponent::Finite(2.0) {
        return Err(Error::param(format!(
            "l2 base partition needs p = 2, got p = {}",
            points.norm()
        )));
    }
    let tag = vec![Provenance::new(0, strategy.to_string())];
    if fits_in_one(points, delta) {
        return Ok(Partition::single(points.len(), delta, seed, tag));
    }
    let target = jl_dim(points.len());
    if jl && points.dim() > target {
        let proj = JlProjection::gaussian(points.dim(), target, derive_seed(seed, 0x4a4c))?;
        let projected = proj.apply_set(points)?;
        let contraction = worst_contraction(points, &projected);
        if contraction > 0.0 {
            let labels = l2_labels(&projected, delta * contraction, strategy, seed);
            let mut tag = tag;
            tag.push(Provenance::new(0, format!("jl {}->{}", points.dim(), target)));
            return Ok(Partition::from_labels(&labels, delta, seed, tag));
        }
    }
    let labels = l2_labels(points, delta, strategy, seed);
    Ok(Partition::from_labels(&labels, delta, seed, tag))
}

/// `min over pairs of ‖Px − Py‖ / ‖x − y‖` (pairs at distance zero skipped).
fn worst_contraction(orig: &PointSet, projected: &PointSet) -> f64 {
    let n = orig.len();
    crate::par::fold_range(
        n,
        || f64::INFINITY,
        |acc, i| {
            (i + 1..n).fold(acc, |m, j| {
                let d = orig.dist(i, j);
                if d > 0.0 {
                    m.min(projected.dist(i, j) / d)
                } else {
                    m
                }
            })
        },
        f64::min,
    )
}

fn l2_labels(points: &PointSet, delta: f64, strategy: L2Strategy, seed: u64) -> Vec<usize> {
    let mut r = rng(seed);
    match strategy {
        L2Strategy::Grid => {
            let side = delta / (points.dim() as f64).sqrt();
            let shift: Vec<f64> = (0..points.dim()).map(|_| r.gen::<f64>() * side).collect();
            let mut cells: HashMap<Vec<i64>, usize> = HashMap::new();
            points
                .rows()
                .map(|row| {
                    let key: Vec<i64> = row
                        .iter()
                        .zip(&shift)
                        .map(|(x, s)| ((x + s) / side).floor() as i64)
                        .collect();
                    let next = cells.len();
                    *cells.entry(key).or_insert(next)
                })
                .collect()
        }
        L2Strategy::BallCarve => {
            let mut order: Vec<usize> = (0..points.len()).collect();
            order.shuffle(&mut r);
            carve(points, &order, delta / 2.0)
        }
    }
}

/// CKR carving as a sampler.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Ckr;

impl PartitionSampler for Ckr {
    fn sample(&self, points: &PointSet, delta: f64, seed: u64) -> Result<Partition> {
        ckr_partition(points, delta, seed)
    }

    fn name(&self) -> String {
        "ckr".into()
    }
}

/// ℓ_2 base construction as a sampler.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct L2Base {
    pub strategy: L2Strategy,
    pub jl: bool,
}

impl PartitionSampler for L2Base {
    fn sample(&self, points: &PointSet, delta: f64, seed: u64) -> Result<Partition> {
        l2_base_partition(points, delta, self.strategy, self.jl, seed)
    }

    fn name(&self) -> String {
        self.strategy.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{generate_dataset, DatasetKind};

    fn l2() -> NormExponent {
        NormExponent::Finite(2.0)
    }

    #[test]
    fn close_points_form_one_cluster() {
        let pts = PointSet::from_rows(&[vec![0.0, 0.0], vec![0.1, 0.0], vec![0.0, 0.1]], l2()).unwrap();
        for seed in 0..50 {
            assert_eq!(ckr_partition(&pts, 1.0, seed).unwrap().num_clusters(), 1);
        }
    }

    #[test]
    fn far_points_always_separate() {
        let pts = PointSet::from_rows(&[vec![0.0], vec![1.5]], l2()).unwrap();
        for seed in 0..50 {
            assert!(ckr_partition(&pts, 1.0, seed).unwrap().separates(0, 1));
            for s in [L2Strategy::Grid, L2Strategy::BallCarve] {
                assert!(l2_base_partition(&pts, 1.0, s, false, seed).unwrap().separates(0, 1));
            }
        }
    }

    #[test]
    fn duplicates_share_clusters() {
        let pts = PointSet::from_rows(&[vec![0.0, 0.0], vec![3.0, 1.0], vec![0.0, 0.0], vec![5.0, 5.0]], l2()).unwrap();
        for seed in 0..30 {
            assert!(!ckr_partition(&pts, 1.0, seed).unwrap().separates(0, 2));
            assert!(!l2_base_partition(&pts, 1.0, L2Strategy::Grid, false, seed)
                .unwrap()
                .separates(0, 2));
        }
    }

    #[test]
    fn singleton_and_domain_errors() {
        let one = PointSet::from_rows(&[vec![1.0, 2.0]], l2()).unwrap();
        assert_eq!(ckr_partition(&one, 0.5, 1).unwrap().labels(), &[0]);
        assert_eq!(
            l2_base_partition(&one, 0.5, L2Strategy::Grid, false, 1)
                .unwrap()
                .labels(),
            &[0]
        );
        assert!(ckr_partition(&one, 0.0, 1).is_err());
        assert!(ckr_partition(&one, -1.0, 1).is_err());
        let l4 = one.with_norm(NormExponent::Finite(4.0));
        assert!(l2_base_partition(&l4, 1.0, L2Strategy::Grid, false, 1).is_err());
    }

    #[test]
    fn diameters_hold_for_all_base_samplers() {
        let ds = generate_dataset(DatasetKind::Gaussian, 150, 12, l2(), 4).unwrap();
        let pts = &ds.points;
        for seed in 0..10 {
            for delta in [0.5, 2.0, 5.0] {
                ckr_partition(pts, delta, seed).unwrap().audit_diameter(pts).unwrap();
                for s in [L2Strategy::Grid, L2Strategy::BallCarve] {
                    for jl in [false, true] {
                        l2_base_partition(pts, delta, s, jl, seed)
                            .unwrap()
                            .audit_diameter(pts)
                            .unwrap();
                    }
                }
            }
        }
    }

    #[test]
    fn jl_step_keeps_diameter_in_original_space() {
        // 40 points in 100 dimensions: jl_dim(40) = 30 < 100, projection active
        let ds = generate_dataset(DatasetKind::Gaussian, 40, 100, l2(), 2).unwrap();
        let delta = crate::metric::distance_quantile(&ds.points, 0.5).unwrap();
        for seed in 0..20 {
            let part = l2_base_partition(&ds.points, delta, L2Strategy::BallCarve, true, seed).unwrap();
            assert!(part.provenance().iter().any(|t| t.mechanism.starts_with("jl")));
            part.audit_diameter(&ds.points).unwrap();
        }
    }

    #[test]
    fn deterministic_in_seed() {
        let ds = generate_dataset(DatasetKind::UniformCube, 60, 4, l2(), 9).unwrap();
        let a = ckr_partition(&ds.points, 0.7, 3).unwrap();
        assert_eq!(a, ckr_partition(&ds.points, 0.7, 3).unwrap());
        let g = l2_base_partition(&ds.points, 0.7, L2Strategy::Grid, false, 3).unwrap();
        assert_eq!(
            g,
            l2_base_partition(&ds.points, 0.7, L2Strategy::Grid, false, 3).unwrap()
        );
    }
}
