//! Recursive (c, r)-approximate near-neighbor search in ℓ_p, p > 2.
//!
//! A base index answers with some advertised approximation `ĉ₀`. Each level
//! of the recursion keeps, for every dataset point `x`, a child index over
//! the Mazur image of the ball `B_p(x, 2rĉ)` in a smaller `ℓ_t`. Queries walk
//! the levels, re-centering on the best candidate so far, and return the
//! candidate with the smallest recomputed distance.

mod bench;
mod dump;
mod index;
mod recursive;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::metric::PointSet;
use crate::{Error, Result};

pub use bench::{ann_bench, write_bench_csv, BenchReport, BenchRow};
pub use dump::{load_structure, save_structure};
pub use index::{build_base_ann, AnnIndex, CrudeGrid, ExactIndex};
pub use recursive::{
    ann_query, build_recursive_ann, AnnLevel, BuildStats, Child, QueryOutcome, RecursiveAnn, RecursiveAnnStructure,
    TraceStep,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseStrategy {
    ExactOracle,
    CrudeGrid,
}

impl FromStr for BaseStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact-oracle" | "exact" => Ok(BaseStrategy::ExactOracle),
            "crude-grid" | "grid" => Ok(BaseStrategy::CrudeGrid),
            _ => Err(Error::Unknown {
                what: "ann base strategy",
                value: s.to_string(),
            }),
        }
    }
}

impl fmt::Display for BaseStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaseStrategy::ExactOracle => "exact-oracle",
            BaseStrategy::CrudeGrid => "crude-grid",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum TSchedule {
    /// `t = p/2`, passing through the largest power of two below `p` first.
    Halving,
    /// `t = (1 − ε)p`, clamped at 2.
    Geometric { eps: f64 },
}

impl TSchedule {
    /// Exponents from `p` down to 2, inclusive.
    pub fn chain(&self, p: f64) -> Result<Vec<f64>> {
        match *self {
            TSchedule::Halving => crate::lipschitz::default_chain(p),
            TSchedule::Geometric { eps } => {
                if !(eps > 0.0 && eps < 1.0) {
                    return Err(Error::param(format!("epsilon must lie in (0, 1), got {eps}")));
                }
                if !(p >= 2.0 && p.is_finite()) {
                    return Err(Error::param(format!("t-schedule needs 2 <= p < inf, got {p}")));
                }
                let mut chain = vec![p];
                let mut t = p;
                while t > 2.0 {
                    t = ((1.0 - eps) * t).max(2.0);
                    chain.push(t);
                }
                Ok(chain)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnConfig {
    pub p: f64,
    pub r: f64,
    pub t_schedule: TSchedule,
    /// Levels per exponent step; `None` uses `⌈log2(log2 p · log2 ĉ₀)⌉`.
    pub inner_k: Option<usize>,
    /// Repetitions of each child index; `None` uses `⌈log2(3k)⌉`.
    pub reps_inner: Option<usize>,
    /// Repetitions of recursive children; `None` uses `⌈log2(3·log2 p)⌉`.
    pub reps_outer: Option<usize>,
    /// Index at the top of every `ℓ_p` node, `p > 2`.
    pub base: BaseStrategy,
    /// Index used for `ℓ_2` nodes.
    pub floor: BaseStrategy,
    /// Project `ℓ_2` grid indexes to `O(log n)` dimensions.
    pub jl: bool,
    /// Planted-style queries used to measure a grid's advertised c.
    pub audit_queries: usize,
    /// Re-norm to `ℓ_{max(2, log2 d)}` when `p` exceeds it.
    pub holder: bool,
}

impl AnnConfig {
    pub fn new(p: f64, r: f64) -> Self {
        AnnConfig {
            p,
            r,
            t_schedule: TSchedule::Halving,
            inner_k: None,
            reps_inner: None,
            reps_outer: None,
            base: BaseStrategy::CrudeGrid,
            floor: BaseStrategy::ExactOracle,
            jl: true,
            audit_queries: 200,
            holder: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p.is_nan() || self.p <= 2.0 {
            return Err(Error::param(format!("recursive ANN needs p > 2, got {}", self.p)));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::param(format!("r must be positive and finite, got {}", self.r)));
        }
        if self.reps_inner == Some(0) || self.reps_outer == Some(0) {
            return Err(Error::param("repetition counts must be at least 1"));
        }
        if self.audit_queries == 0 {
            return Err(Error::param("audit_queries must be at least 1"));
        }
        if let TSchedule::Geometric { eps } = self.t_schedule {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(Error::param(format!("epsilon must lie in (0, 1), got {eps}")));
            }
        }
        Ok(())
    }
}

/// Default amplification count `⌈log2(3m)⌉`, at least 1.
pub fn default_reps(m: f64) -> usize {
    ((3.0 * m.max(1.0)).log2().ceil() as usize).max(1)
}

/// Exact nearest neighbor of `q`; ties go to the smallest id.
pub fn brute_force_nn(points: &PointSet, q: &[f64]) -> Result<(u64, f64)> {
    points.check_dim(q)?;
    let row = nearest_row(points, q);
    Ok((points.id(row), points.dist_to(row, q)))
}

pub(crate) fn nearest_row(points: &PointSet, q: &[f64]) -> usize {
    let mut best = (f64::INFINITY, u64::MAX, 0usize);
    for i in 0..points.len() {
        let d = points.dist_to(i, q);
        let id = points.id(i);
        if d < best.0 || (d == best.0 && id < best.1) {
            best = (d, id, i);
        }
    }
    best.2
}

/// Approximation after one Mazur step:
/// `c_new = (p/t)^{t/p} · c_t^{t/p} · (4c_p)^{1−t/p}`.
pub fn predict_c(p: f64, t: f64, c_p: f64, c_t: f64) -> Result<f64> {
    if !(p.is_finite() && t >= 2.0 && t < p) {
        return Err(Error::param(format!("need 2 <= t < p < inf, got p = {p}, t = {t}")));
    }
    if !(c_p >= 1.0 && c_t >= 1.0 && c_p.is_finite() && c_t.is_finite()) {
        return Err(Error::param(format!(
            "approximations must be >= 1, got c_p = {c_p}, c_t = {c_t}"
        )));
    }
    if p == 2.0 * t {
        return Ok((2.0 * c_t * 4.0 * c_p).sqrt());
    }
    let e = t / p;
    Ok(((p / t) * c_t).powf(e) * (4.0 * c_p).powf(1.0 - e))
}

/// Iterates `ĉ_i = √(8c·ĉ_{i−1})`, `i = 1..=k`, starting from `c0`.
pub fn c_hat_iterates(c: f64, c0: f64, k: u32) -> Vec<f64> {
    let mut out = Vec::with_capacity(k as usize);
    let mut cur = c0;
    for _ in 0..k {
        cur = (8.0 * c * cur).sqrt();
        out.push(cur);
    }
    out
}

/// Exact value of the `k`-th iterate: `(8c)^{1−2^{−k}} · ĉ₀^{2^{−k}}`.
pub fn c_hat_partial_product(c: f64, c0: f64, k: u32) -> f64 {
    let h = 0.5f64.powi(k as i32);
    (8.0 * c).powf(1.0 - h) * c0.powf(h)
}

/// Upper bound `8c · ĉ₀^{2^{−k}}` on [`c_hat_partial_product`] (for `8c ≥ 1`).
pub fn c_hat_closed_form(c: f64, c0: f64, k: u32) -> f64 {
    8.0 * c * c0.powf(0.5f64.powi(k as i32))
}
