use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{NormExponent, PointSet};
use crate::rng::rng;
use crate::{Error, Result};

/// Target exponent of the Hölder reduction: `max(2, log2 d)`.
pub fn holder_target(d: usize) -> f64 {
    (d as f64).log2().max(2.0)
}

/// Result of re-norming a point set with [`holder_map`].
#[derive(Clone, Debug, PartialEq)]
pub struct HolderMap {
    pub points: PointSet,
    /// Upper bound `d^{1/p' − 1/p}` on `‖x−y‖_{p'} / ‖x−y‖_p`.
    pub ratio_bound: f64,
    /// Set when `d = 1` and the map returned the input unchanged.
    pub noop: bool,
}

/// Re-interpret `S ⊂ ℓ_p^d` (p = ∞ or p > log2 d) under `ℓ_{p'}`,
/// `p' = max(2, log2 d)`. Coordinates are untouched; every pairwise ratio
/// `‖·‖_{p'} / ‖·‖_p` lies in `[1, d^{1/p' − 1/p}] ⊆ [1, 2]`.
pub fn holder_map(points: &PointSet) -> Result<HolderMap> {
    let d = points.dim();
    if d == 1 {
        return Ok(HolderMap {
            points: points.clone(),
            ratio_bound: 1.0,
            noop: true,
        });
    }
    let target = holder_target(d);
    let source = points.norm();
    if source.as_f64() <= target {
        return Err(Error::param(format!(
            "hölder reduction needs p > max(2, log2 d) = {target}, got p = {source}"
        )));
    }
    let ratio_bound = (d as f64).powf(1.0 / target - source.reciprocal());
    Ok(HolderMap {
        points: points.with_norm(NormExponent::Finite(target)),
        ratio_bound,
        noop: false,
    })
}

/// Dense Gaussian projection `x ↦ G x / √k`, `G` with i.i.d. N(0, 1) entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JlProjection {
    in_dim: usize,
    out_dim: usize,
    /// Row-major `out_dim × in_dim`; empty for the identity map.
    matrix: Vec<f64>,
}

impl JlProjection {
    pub fn gaussian(in_dim: usize, out_dim: usize, seed: u64) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::param("projection dimensions must be at least 1"));
        }
        let mut r = rng(seed);
        let scale = 1.0 / (out_dim as f64).sqrt();
        let matrix = (0..in_dim * out_dim)
            .map(|_| r.sample::<f64, _>(StandardNormal) * scale)
            .collect();
        Ok(JlProjection {
            in_dim,
            out_dim,
            matrix,
        })
    }

    pub fn identity(dim: usize) -> Self {
        JlProjection {
            in_dim: dim,
            out_dim: dim,
            matrix: Vec::new(),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.in_dim);
        if self.matrix.is_empty() {
            return x.to_vec();
        }
        self.matrix
            .chunks_exact(self.in_dim)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn apply_set(&self, points: &PointSet) -> Result<PointSet> {
        points.check_dim(&vec![0.0; self.in_dim])?;
        let mut data = Vec::with_capacity(points.len() * self.out_dim);
        for row in points.rows() {
            data.extend(self.apply(row));
        }
        PointSet::with_ids(data, self.out_dim, points.norm(), points.ids().to_vec())
    }
}

/// Project an ℓ_2 set to `target_dim` dimensions. With `identity_check` and
/// `target_dim == d` the map is the identity, bypassing randomness.
pub fn jl_project(points: &PointSet, target_dim: usize, seed: u64, identity_check: bool) -> Result<PointSet> {
    if points.norm() != NormExponent::Finite(2.0) {
        return Err(Error::param(format!(
            "random projection needs p = 2, got p = {}",
            points.norm()
        )));
    }
    if target_dim == 0 {
        return Err(Error::param("target dimension must be at least 1"));
    }
    let proj = if identity_check {
        if target_dim != points.dim() {
            return Err(Error::param("identity check requires target_dim = d"));
        }
        JlProjection::identity(target_dim)
    } else {
        JlProjection::gaussian(points.dim(), target_dim, seed)?
    };
    proj.apply_set(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{distance, generate_dataset, DatasetKind};

    #[test]
    fn holder_all_ones_example() {
        let s = PointSet::from_rows(&[vec![1.0; 16], vec![0.0; 16]], NormExponent::Infinity).unwrap();
        assert_eq!(s.dist(0, 1), 1.0);
        let h = holder_map(&s).unwrap();
        assert_eq!(h.points.norm(), NormExponent::Finite(4.0));
        assert!((h.points.dist(0, 1) - 2.0).abs() < 1e-15);
        assert_eq!(h.points.data(), s.data());
        assert!((h.ratio_bound - 2.0).abs() < 1e-15);
    }

    #[test]
    fn holder_rejects_small_p_and_flags_d1() {
        let s = PointSet::from_rows(&[vec![1.0; 16]], NormExponent::Finite(3.0)).unwrap();
        assert!(holder_map(&s).is_err());
        let one = PointSet::from_rows(&[vec![1.0], vec![2.0]], NormExponent::Infinity).unwrap();
        assert!(holder_map(&one).unwrap().noop);
    }

    #[test]
    fn jl_requires_l2_and_is_deterministic() {
        let s = generate_dataset(DatasetKind::Gaussian, 10, 8, NormExponent::Finite(4.0), 1).unwrap();
        assert!(jl_project(&s.points, 4, 1, false).is_err());
        let s2 = s.points.with_norm(NormExponent::Finite(2.0));
        assert_eq!(
            jl_project(&s2, 4, 9, false).unwrap(),
            jl_project(&s2, 4, 9, false).unwrap()
        );
        assert_ne!(
            jl_project(&s2, 4, 9, false).unwrap(),
            jl_project(&s2, 4, 10, false).unwrap()
        );
    }

    #[test]
    fn jl_identity_check_preserves_distances() {
        let s = generate_dataset(DatasetKind::Gaussian, 10, 8, NormExponent::Finite(2.0), 1).unwrap();
        let id = jl_project(&s.points, 8, 0, true).unwrap();
        assert_eq!(id, s.points);
        assert!(jl_project(&s.points, 7, 0, true).is_err());
    }

    #[test]
    fn jl_equal_points_stay_equal() {
        let s = PointSet::from_rows(&[vec![0.5, -1.0, 2.0], vec![0.5, -1.0, 2.0]], NormExponent::Finite(2.0)).unwrap();
        let p = jl_project(&s, 2, 5, false).unwrap();
        assert_eq!(distance(p.row(0), p.row(1), p.norm()), 0.0);
    }
}
