//! Finite point sets in lp, distances, dataset generation, and the two
//! cheap reductions (Hölder re-norming and Gaussian random projection).

mod dataset;
mod io;
mod points;
mod reduce;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

pub(crate) use dataset::random_direction;
pub use dataset::{generate_dataset, generate_with, Dataset, DatasetKind, Planted, PlantedConfig};
pub use io::{atomic_write, fmt_num, read_point_set, sidecar_path, write_commented, write_point_set, PointSetHeader};
pub use points::PointSet;
pub use reduce::{holder_map, holder_target, jl_project, HolderMap, JlProjection};

/// Norm exponent `p ∈ [1, ∞]`. Infinity is its own variant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NormExponent {
    Finite(f64),
    Infinity,
}

impl NormExponent {
    /// Accepts `p >= 1`; `f64::INFINITY` maps to [`NormExponent::Infinity`].
    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::InvalidExponent(p));
        }
        if p.is_infinite() {
            Ok(NormExponent::Infinity)
        } else {
            Ok(NormExponent::Finite(p))
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            NormExponent::Finite(p) => Some(p),
            NormExponent::Infinity => None,
        }
    }

    /// Finite value, or an error naming `what` for operations that exclude ∞.
    pub fn require_finite(self, what: &str) -> Result<f64> {
        self.finite()
            .ok_or_else(|| Error::param(format!("{what} requires a finite exponent")))
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, NormExponent::Infinity)
    }

    /// `1/p`, zero for ∞.
    pub fn reciprocal(self) -> f64 {
        match self {
            NormExponent::Finite(p) => 1.0 / p,
            NormExponent::Infinity => 0.0,
        }
    }

    /// The value as `f64` (∞ becomes `f64::INFINITY`). Only for comparisons.
    pub fn as_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl fmt::Display for NormExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormExponent::Finite(p) => write!(f, "{p}"),
            NormExponent::Infinity => f.write_str("inf"),
        }
    }
}

impl FromStr for NormExponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(NormExponent::Infinity),
            other => {
                let p: f64 = other.parse().map_err(|_| Error::Unknown {
                    what: "norm exponent",
                    value: s.to_string(),
                })?;
                NormExponent::new(p)
            }
        }
    }
}

impl Serialize for NormExponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            NormExponent::Finite(p) => s.serialize_f64(*p),
            NormExponent::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for NormExponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        let parsed = match Raw::deserialize(d)? {
            Raw::Num(p) => NormExponent::new(p),
            Raw::Str(s) => s.parse(),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

/// `‖x − y‖_p` without argument checks. Single pass, no compensated summation.
#[inline]
pub fn distance(x: &[f64], y: &[f64], p: NormExponent) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let diffs = x.iter().zip(y).map(|(a, b)| (a - b).abs());
    match p {
        NormExponent::Infinity => diffs.fold(0.0, f64::max),
        NormExponent::Finite(p) => power_sum_root(diffs, p),
    }
}

/// `‖x‖_p` without argument checks.
#[inline]
pub fn norm(x: &[f64], p: NormExponent) -> f64 {
    let abs = x.iter().map(|a| a.abs());
    match p {
        NormExponent::Infinity => abs.fold(0.0, f64::max),
        NormExponent::Finite(p) => power_sum_root(abs, p),
    }
}

#[inline]
fn power_sum_root(abs: impl Iterator<Item = f64>, p: f64) -> f64 {
    if p == 1.0 {
        abs.sum()
    } else if p == 2.0 {
        abs.map(|a| a * a).sum::<f64>().sqrt()
    } else if p == 4.0 {
        abs.map(|a| {
            let s = a * a;
            s * s
        })
        .sum::<f64>()
        .sqrt()
        .sqrt()
    } else if p.fract() == 0.0 && p <= 16.0 {
        let k = p as i32;
        abs.map(|a| a.powi(k)).sum::<f64>().powf(1.0 / p)
    } else {
        abs.map(|a| a.powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// Checked `‖x − y‖_p`.
pub fn lp_distance(x: &[f64], y: &[f64], p: NormExponent) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if let NormExponent::Finite(v) = p {
        if v.is_nan() || v < 1.0 {
            return Err(Error::InvalidExponent(v));
        }
    }
    Ok(distance(x, y, p))
}

/// Largest pairwise distance; zero for a singleton.
pub fn set_diameter(points: &PointSet) -> f64 {
    let n = points.len();
    crate::par::fold_range(
        n,
        || 0.0f64,
        |acc, i| {
            let xi = points.row(i);
            (i + 1..n).fold(acc, |m, j| m.max(distance(xi, points.row(j), points.norm())))
        },
        f64::max,
    )
}

/// All `n(n−1)/2` pairwise distances in row-major upper-triangle order.
pub fn pairwise_distances(points: &PointSet) -> Vec<f64> {
    let n = points.len();
    let rows = crate::par::map_range(n, |i| {
        let xi = points.row(i);
        (i + 1..n)
            .map(|j| distance(xi, points.row(j), points.norm()))
            .collect::<Vec<_>>()
    });
    rows.into_iter().flatten().collect()
}

/// Exact `q`-quantile (nearest-rank, `q ∈ [0, 1]`) of pairwise distances.
/// `q = 0.5` is the median used as the default scale. Needs two points.
pub fn distance_quantile(points: &PointSet, q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::param(format!("quantile {q} outside [0, 1]")));
    }
    if points.len() < 2 {
        return Err(Error::param("distance quantile needs at least two points"));
    }
    let mut all = pairwise_distances(points);
    all.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&all, q))
}

/// Nearest-rank quantile of an already sorted, nonempty slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let m = sorted.len();
    let rank = ((q * m as f64).ceil() as usize).clamp(1, m);
    sorted[rank - 1]
}
