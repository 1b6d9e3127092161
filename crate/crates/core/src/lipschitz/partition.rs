use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::DIAMETER_SLACK;
use crate::metric::PointSet;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub level: usize,
    pub mechanism: String,
}

impl Provenance {
    pub fn new(level: usize, mechanism: impl Into<String>) -> Self {
        Provenance {
            level,
            mechanism: mechanism.into(),
        }
    }
}

/// Cluster labels for the rows of a point set at scale `delta`.
///
/// Labels are canonical: cluster `k` is the `k`-th distinct cluster met in
/// row order, so two partitions are equal iff they group rows identically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    delta: f64,
    seed: u64,
    labels: Vec<usize>,
    provenance: Vec<Provenance>,
}

impl Partition {
    pub fn from_labels<K>(raw: &[K], delta: f64, seed: u64, provenance: Vec<Provenance>) -> Self
    where
        K: std::hash::Hash + Eq + Clone,
    {
        let mut map: HashMap<K, usize> = HashMap::new();
        let labels = raw
            .iter()
            .map(|k| {
                let next = map.len();
                *map.entry(k.clone()).or_insert(next)
            })
            .collect();
        Partition {
            delta,
            seed,
            labels,
            provenance,
        }
    }

    pub fn single(n: usize, delta: f64, seed: u64, provenance: Vec<Provenance>) -> Self {
        Partition {
            delta,
            seed,
            labels: vec![0; n],
            provenance,
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_clusters(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    #[inline]
    pub fn separates(&self, i: usize, j: usize) -> bool {
        self.labels[i] != self.labels[j]
    }

    /// Rows of each cluster, ascending, clusters in label order.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_clusters()];
        for (row, &l) in self.labels.iter().enumerate() {
            out[l].push(row);
        }
        out
    }

    /// Per-cluster diameters under `points`' norm.
    pub fn cluster_diameters(&self, points: &PointSet) -> Vec<f64> {
        let clusters = self.clusters();
        crate::par::map_slice(&clusters, |rows| {
            let mut m = 0.0f64;
            for (a, &i) in rows.iter().enumerate() {
                for &j in &rows[a + 1..] {
                    m = m.max(points.dist(i, j));
                }
            }
            m
        })
    }

    /// Errors with the first cluster whose diameter exceeds `delta·(1 + 1e-9)`.
    pub fn audit_diameter(&self, points: &PointSet) -> Result<()> {
        if points.len() != self.labels.len() {
            return Err(Error::param(format!(
                "partition has {} labels for {} points",
                self.labels.len(),
                points.len()
            )));
        }
        for (cluster, diameter) in self.cluster_diameters(points).into_iter().enumerate() {
            if diameter > self.delta * (1.0 + DIAMETER_SLACK) {
                return Err(Error::ClusterTooWide {
                    cluster,
                    diameter,
                    delta: self.delta,
                });
            }
        }
        Ok(())
    }

    /// True when every cluster of `self` lies inside one cluster of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        if coarser.len() != self.len() {
            return false;
        }
        let mut owner: HashMap<usize, usize> = HashMap::new();
        self.labels
            .iter()
            .zip(&coarser.labels)
            .all(|(&fine, &coarse)| *owner.entry(fine).or_insert(coarse) == coarse)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::NormExponent;

    #[test]
    fn labels_are_canonical() {
        let a = Partition::from_labels(&[7, 7, 3, 9, 3], 1.0, 0, vec![]);
        assert_eq!(a.labels(), &[0, 0, 1, 2, 1]);
        assert_eq!(a.num_clusters(), 3);
        assert_eq!(a.clusters(), vec![vec![0, 1], vec![2, 4], vec![3]]);
        assert!(a.separates(0, 2));
        assert!(!a.separates(2, 4));
    }

    #[test]
    fn refinement_check() {
        let coarse = Partition::from_labels(&[0, 0, 0, 1], 2.0, 0, vec![]);
        let fine = Partition::from_labels(&[0, 1, 1, 2], 1.0, 0, vec![]);
        let cross = Partition::from_labels(&[0, 0, 1, 1], 1.0, 0, vec![]);
        assert!(fine.refines(&coarse));
        assert!(!cross.refines(&coarse));
        assert!(coarse.refines(&coarse));
    }

    #[test]
    fn diameter_audit_flags_wide_cluster() {
        let pts = PointSet::from_rows(&[vec![0.0], vec![1.0], vec![3.0]], NormExponent::Finite(2.0)).unwrap();
        let ok = Partition::from_labels(&[0, 0, 1], 1.0, 0, vec![]);
        assert!(ok.audit_diameter(&pts).is_ok());
        let bad = Partition::from_labels(&[0, 1, 0], 1.0, 0, vec![]);
        assert!(matches!(
            bad.audit_diameter(&pts),
            Err(Error::ClusterTooWide { cluster: 0, .. })
        ));
    }

    #[test]
    fn json_layout() {
        let p = Partition::from_labels(&[1, 1, 2], 0.5, 9, vec![Provenance::new(0, "ckr")]);
        let j = serde_json::to_string(&p).unwrap();
        assert_eq!(
            j,
            r#"{"delta":0.5,"seed":9,"labels":[0,0,1],"provenance":[{"level":0,"mechanism":"ckr"}]}"#
        );
    }
}
