use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{norm, NormExponent, PointSet};
use crate::rng::{derive_seed, rng};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    UniformCube,
    Gaussian,
    HypercubeCorners,
    PlantedClusters,
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform-cube" => Ok(DatasetKind::UniformCube),
            "gaussian" => Ok(DatasetKind::Gaussian),
            "hypercube-corners" => Ok(DatasetKind::HypercubeCorners),
            "planted-clusters" => Ok(DatasetKind::PlantedClusters),
            _ => Err(Error::Unknown {
                what: "dataset kind",
                value: s.to_string(),
            }),
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetKind::UniformCube => "uniform-cube",
            DatasetKind::Gaussian => "gaussian",
            DatasetKind::HypercubeCorners => "hypercube-corners",
            DatasetKind::PlantedClusters => "planted-clusters",
        })
    }
}

/// Shape of a planted-clusters instance. Cluster centers are uniform in
/// `[0, separation]^d`, members are Gaussian with per-coordinate standard
/// deviation `spread`, and each query sits within `r` of a dataset point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedConfig {
    pub clusters: usize,
    pub spread: f64,
    pub separation: f64,
    pub r: f64,
    pub queries: usize,
}

impl PlantedConfig {
    pub fn for_size(n: usize, d: usize) -> Self {
        PlantedConfig {
            clusters: (n / 40).max(1),
            spread: 1.0,
            separation: 100.0 * (d as f64).sqrt(),
            r: 1.0,
            queries: 200,
        }
    }
}

/// Ground truth recorded by the planted-clusters generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Planted {
    pub centers: Vec<Vec<f64>>,
    pub queries: PointSet,
    /// Dataset id each query was planted next to.
    pub anchors: Vec<u64>,
    pub r: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub points: PointSet,
    pub planted: Option<Planted>,
}

pub fn generate_dataset(kind: DatasetKind, n: usize, d: usize, p: NormExponent, seed: u64) -> Result<Dataset> {
    generate_with(kind, n, d, p, seed, &PlantedConfig::for_size(n, d))
}

pub fn generate_with(
    kind: DatasetKind,
    n: usize,
    d: usize,
    p: NormExponent,
    seed: u64,
    planted: &PlantedConfig,
) -> Result<Dataset> {
    if n == 0 || d == 0 {
        return Err(Error::param("n and d must be at least 1"));
    }
    let mut r = rng(derive_seed(seed, 0));
    let mut data = Vec::with_capacity(n * d);
    match kind {
        DatasetKind::UniformCube => data.extend((0..n * d).map(|_| r.gen::<f64>())),
        DatasetKind::Gaussian => data.extend((0..n * d).map(|_| r.sample::<f64, _>(StandardNormal))),
        DatasetKind::HypercubeCorners => data.extend((0..n * d).map(|_| if r.gen::<bool>() { 1.0 } else { 0.0 })),
        DatasetKind::PlantedClusters => return planted_clusters(n, d, p, seed, planted),
    }
    Ok(Dataset {
        points: PointSet::new(data, d, p)?,
        planted: None,
    })
}

fn planted_clusters(n: usize, d: usize, p: NormExponent, seed: u64, cfg: &PlantedConfig) -> Result<Dataset> {
    if cfg.clusters == 0 || cfg.spread < 0.0 || cfg.r <= 0.0 || cfg.separation < 0.0 {
        return Err(Error::param(
            "planted config needs clusters >= 1, r > 0, spread, separation >= 0",
        ));
    }
    let mut r = rng(derive_seed(seed, 1));
    let centers: Vec<Vec<f64>> = (0..cfg.clusters)
        .map(|_| (0..d).map(|_| r.gen::<f64>() * cfg.separation).collect())
        .collect();
    let mut data = Vec::with_capacity(n * d);
    for i in 0..n {
        let c = &centers[i % cfg.clusters];
        data.extend(c.iter().map(|&x| x + cfg.spread * r.sample::<f64, _>(StandardNormal)));
    }
    let points = PointSet::new(data, d, p)?;

    let mut qr = rng(derive_seed(seed, 2));
    let mut qdata = Vec::with_capacity(cfg.queries * d);
    let mut anchors = Vec::with_capacity(cfg.queries);
    let rows: Vec<usize> = (0..n).collect();
    for _ in 0..cfg.queries {
        let anchor = *rows.choose(&mut qr).expect("n >= 1");
        let dir = random_direction(&mut qr, d, p);
        let radius = cfg.r * qr.gen_range(0.5..=1.0);
        qdata.extend(points.row(anchor).iter().zip(&dir).map(|(a, u)| a + radius * u));
        anchors.push(points.id(anchor));
    }
    let queries = if cfg.queries == 0 {
        // keep the type total: a zero-query instance carries its first point as a stand-in
        points.subset(&[0])?
    } else {
        PointSet::new(qdata, d, p)?
    };
    Ok(Dataset {
        points,
        planted: Some(Planted {
            centers,
            queries,
            anchors,
            r: cfg.r,
        }),
    })
}

/// Gaussian direction rescaled to unit `p`-norm.
pub(crate) fn random_direction<R: Rng>(r: &mut R, d: usize, p: NormExponent) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
        let len = norm(&v, p);
        if len > 1e-12 {
            return v.into_iter().map(|x| x / len).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l2() -> NormExponent {
        NormExponent::Finite(2.0)
    }

    #[test]
    fn deterministic_in_seed() {
        let a = generate_dataset(DatasetKind::UniformCube, 4, 2, l2(), 7).unwrap();
        let b = generate_dataset(DatasetKind::UniformCube, 4, 2, l2(), 7).unwrap();
        assert_eq!(a, b);
        let c = generate_dataset(DatasetKind::UniformCube, 4, 2, l2(), 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn corners_are_corners() {
        let s = generate_dataset(DatasetKind::HypercubeCorners, 4, 2, l2(), 3).unwrap();
        assert!(s.points.data().iter().all(|&v| v == 0.0 || v == 1.0));
        assert_eq!(s.points.len(), 4);
    }

    #[test]
    fn unknown_kind_rejected() {
        assert!(matches!("spiral".parse::<DatasetKind>(), Err(Error::Unknown { .. })));
        assert!(generate_dataset(DatasetKind::Gaussian, 0, 2, l2(), 1).is_err());
    }

    #[test]
    fn planted_queries_have_recorded_anchor_within_r() {
        let p = NormExponent::Finite(4.0);
        let ds = generate_dataset(DatasetKind::PlantedClusters, 120, 5, p, 11).unwrap();
        let planted = ds.planted.unwrap();
        assert_eq!(planted.queries.len(), 200);
        for (qi, &anchor) in planted.anchors.iter().enumerate() {
            let row = ds.points.row_of(anchor).unwrap();
            let dist = ds.points.dist_to(row, planted.queries.row(qi));
            assert!(dist <= planted.r * (1.0 + 1e-12));
        }
    }
}
