use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{nearest_row, BaseStrategy, RecursiveAnn};
use crate::metric::{random_direction, JlProjection, NormExponent, PointSet};
use crate::rng::{derive_seed, rng};
use crate::{Error, Result};

/// Brute-force index, advertised `c = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactIndex {
    pub points: PointSet,
}

/// Multi-resolution randomly shifted grid. Level 0 has cell side
/// `2r / d^{1/p}` (cells of ℓ_p diameter `2r`), each further level doubles
/// the side, and every nonempty cell keeps its smallest-id point. A query is
/// answered by the representative of the finest nonempty cell containing it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrudeGrid {
    pub points: PointSet,
    pub projection: Option<JlProjection>,
    pub side0: f64,
    pub shift: Vec<f64>,
    /// Per level, `(cell key, row)` sorted by key.
    pub levels: Vec<Vec<(Vec<i64>, usize)>>,
    /// Worst `distance / r` seen on the build-time audit, at least 1.
    pub audit_factor: f64,
    /// `√d · audit_factor`.
    pub advertised_c: f64,
}

const MAX_GRID_LEVELS: usize = 64;

fn cell_key(x: &[f64], shift: &[f64], side: f64) -> Vec<i64> {
    x.iter()
        .zip(shift)
        .map(|(v, s)| ((v + s) / side).floor() as i64)
        .collect()
}

impl CrudeGrid {
    pub fn build(points: &PointSet, r: f64, jl: bool, audit_queries: usize, seed: u64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::param(format!("r must be positive and finite, got {r}")));
        }
        let n = points.len();
        let projection =
            if jl && points.norm() == NormExponent::Finite(2.0) && points.dim() > crate::lipschitz::jl_dim(n) {
                Some(JlProjection::gaussian(
                    points.dim(),
                    crate::lipschitz::jl_dim(n),
                    derive_seed(seed, 1),
                )?)
            } else {
                None
            };
        let coords: Vec<Vec<f64>> = points
            .rows()
            .map(|x| projection.as_ref().map_or_else(|| x.to_vec(), |pr| pr.apply(x)))
            .collect();
        let dim = coords[0].len();
        let side0 = 2.0 * r / (dim as f64).powf(points.norm().reciprocal());
        let mut g = rng(derive_seed(seed, 0));
        let shift: Vec<f64> = (0..dim).map(|_| g.gen::<f64>() * side0).collect();

        let mut levels = Vec::new();
        let mut side = side0;
        for _ in 0..MAX_GRID_LEVELS {
            let mut cells: Vec<(Vec<i64>, usize)> = coords
                .iter()
                .enumerate()
                .map(|(row, x)| (cell_key(x, &shift, side), row))
                .collect();
            cells.sort_by(|a, b| a.0.cmp(&b.0).then(points.id(a.1).cmp(&points.id(b.1))));
            cells.dedup_by(|later, first| later.0 == first.0);
            let single = cells.len() == 1;
            levels.push(cells);
            if single {
                break;
            }
            side *= 2.0;
        }

        let mut grid = CrudeGrid {
            points: points.clone(),
            projection,
            side0,
            shift,
            levels,
            audit_factor: 1.0,
            advertised_c: 1.0,
        };
        grid.audit_factor = grid.audit(r, audit_queries, derive_seed(seed, 2));
        grid.advertised_c = (points.dim() as f64).sqrt() * grid.audit_factor;
        Ok(grid)
    }

    /// Worst `‖answer − q‖ / r` over queries placed at distance exactly `r`
    /// from random dataset points, floored at 1.
    fn audit(&self, r: f64, queries: usize, seed: u64) -> f64 {
        let mut g = rng(seed);
        let norm = self.points.norm();
        let mut worst = 1.0f64;
        for _ in 0..queries {
            let row = g.gen_range(0..self.points.len());
            let dir = random_direction(&mut g, self.points.dim(), norm);
            let q: Vec<f64> = self.points.row(row).iter().zip(&dir).map(|(a, u)| a + r * u).collect();
            let got = self.query_row(&q);
            worst = worst.max(self.points.dist_to(got, &q) / r);
        }
        worst
    }

    pub fn query_row(&self, q: &[f64]) -> usize {
        let x = self.projection.as_ref().map_or_else(|| q.to_vec(), |pr| pr.apply(q));
        let mut side = self.side0;
        for level in &self.levels {
            let key = cell_key(&x, &self.shift, side);
            if let Ok(i) = level.binary_search_by(|(k, _)| k.cmp(&key)) {
                return level[i].1;
            }
            side *= 2.0;
        }
        self.levels.last().and_then(|l| l.first()).map_or(0, |c| c.1)
    }

    pub fn stored_points(&self) -> usize {
        self.levels.first().map_or(0, Vec::len)
    }
}

/// Any index the recursion can query.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AnnIndex {
    Exact(ExactIndex),
    Grid(CrudeGrid),
    Recursive(Box<RecursiveAnn>),
}

impl AnnIndex {
    pub fn points(&self) -> &PointSet {
        match self {
            AnnIndex::Exact(e) => &e.points,
            AnnIndex::Grid(g) => &g.points,
            AnnIndex::Recursive(r) => &r.points,
        }
    }

    pub fn advertised_c(&self) -> f64 {
        match self {
            AnnIndex::Exact(_) => 1.0,
            AnnIndex::Grid(g) => g.advertised_c,
            AnnIndex::Recursive(r) => r.advertised_c(),
        }
    }

    /// Row of the returned point. Distances are the caller's business.
    pub fn query_row(&self, q: &[f64]) -> usize {
        match self {
            AnnIndex::Exact(e) => nearest_row(&e.points, q),
            AnnIndex::Grid(g) => g.query_row(q),
            AnnIndex::Recursive(r) => r.query_trace(q).0,
        }
    }

    /// Points held by this index and everything below it.
    pub fn stored_points(&self) -> usize {
        match self {
            AnnIndex::Exact(e) => e.points.len(),
            AnnIndex::Grid(g) => g.stored_points(),
            AnnIndex::Recursive(r) => r.stored_points(),
        }
    }
}

/// Base index with default options: JL for ℓ_2 grids, 200 audit queries.
pub fn build_base_ann(points: &PointSet, r: f64, strategy: BaseStrategy, seed: u64) -> Result<AnnIndex> {
    build_base_with(points, r, strategy, true, 200, seed)
}

pub(crate) fn build_base_with(
    points: &PointSet,
    r: f64,
    strategy: BaseStrategy,
    jl: bool,
    audit_queries: usize,
    seed: u64,
) -> Result<AnnIndex> {
    match strategy {
        BaseStrategy::ExactOracle => Ok(AnnIndex::Exact(ExactIndex { points: points.clone() })),
        BaseStrategy::CrudeGrid => Ok(AnnIndex::Grid(CrudeGrid::build(points, r, jl, audit_queries, seed)?)),
    }
}
