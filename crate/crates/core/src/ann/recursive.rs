use serde::{Deserialize, Serialize};

use super::index::build_base_with;
use super::{default_reps, predict_c, AnnConfig, AnnIndex, BaseStrategy};
use crate::lipschitz::iteration_count;
use crate::mazur::{MazurSpec, RADIUS_SLACK};
use crate::metric::{holder_target, norm, NormExponent, PointSet};
use crate::rng::{derive_path, derive_seed};
use crate::{Error, Result};

/// Child index of one dataset point at one level: the Mazur image of the
/// ball around it, indexed `reps` times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Child {
    /// Parent rows of the ball members, in child-row order.
    pub members: Vec<usize>,
    pub reps: Vec<AnnIndex>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnLevel {
    pub t: f64,
    /// `ĉ_{i−1}`, which fixes the ball radius `2r·ĉ_{i−1}`.
    pub c_in: f64,
    /// Largest advertised c among the children.
    pub c_t: f64,
    /// `ĉ_i` from [`predict_c`].
    pub c_out: f64,
    /// Centered map with `C0 = 2r·ĉ_{i−1}`; queries are translated first.
    pub spec: MazurSpec,
    /// One per parent row.
    pub children: Vec<Child>,
}

/// One node of the recursion: a base index for `ℓ_p` plus its levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecursiveAnn {
    pub p: f64,
    pub r: f64,
    pub points: PointSet,
    pub base: AnnIndex,
    pub levels: Vec<AnnLevel>,
    /// `ĉ₀, ĉ₁, …`, one more than there are levels.
    pub c_hat: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub level: usize,
    pub id: u64,
    pub distance: f64,
    /// The query was farther than `C0` from the level's center, so the
    /// map was applied outside its ball.
    pub out_of_ball: bool,
    /// No child answered at this level; the candidate was kept.
    pub skipped: bool,
    #[serde(skip)]
    pub(crate) row: usize,
}

impl RecursiveAnn {
    pub fn advertised_c(&self) -> f64 {
        *self.c_hat.last().expect("c_hat is never empty")
    }

    pub fn stored_points(&self) -> usize {
        self.base.stored_points()
            + self
                .levels
                .iter()
                .flat_map(|l| &l.children)
                .flat_map(|c| &c.reps)
                .map(AnnIndex::stored_points)
                .sum::<usize>()
    }

    /// Walk the levels. Each level re-centers on the best candidate so far;
    /// the returned row minimizes the recomputed distance over the trace.
    pub fn query_trace(&self, q: &[f64]) -> (usize, Vec<TraceStep>) {
        let first = self.base.query_row(q);
        let mut best = (self.points.dist_to(first, q), first);
        let mut trace = vec![TraceStep {
            level: 0,
            id: self.points.id(first),
            distance: best.0,
            out_of_ball: false,
            skipped: false,
            row: first,
        }];
        for (li, level) in self.levels.iter().enumerate() {
            let center = best.1;
            let v: Vec<f64> = q.iter().zip(self.points.row(center)).map(|(a, b)| a - b).collect();
            let out_of_ball = norm(&v, self.points.norm()) > level.spec.c0() * (1.0 + RADIUS_SLACK);
            let image = level.spec.apply_unchecked(&v);
            let child = &level.children[center];
            let answer = child
                .reps
                .iter()
                .map(|rep| child.members[rep.query_row(&image)])
                .map(|row| (self.points.dist_to(row, q), row))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(self.points.id(a.1).cmp(&self.points.id(b.1))));
            match answer {
                Some((d, row)) => {
                    trace.push(TraceStep {
                        level: li + 1,
                        id: self.points.id(row),
                        distance: d,
                        out_of_ball,
                        skipped: false,
                        row,
                    });
                    if d < best.0 {
                        best = (d, row);
                    }
                }
                None => trace.push(TraceStep {
                    level: li + 1,
                    id: self.points.id(center),
                    distance: best.0,
                    out_of_ball,
                    skipped: true,
                    row: center,
                }),
            }
        }
        (best.1, trace)
    }
}

/// Size of the finished structure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildStats {
    /// Points held across the base, every child and every repetition.
    pub stored_points: usize,
    /// Levels of the top node.
    pub levels: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecursiveAnnStructure {
    pub config: AnnConfig,
    pub seed: u64,
    pub dataset: PointSet,
    /// Exponent the recursion runs in; smaller than `config.p` after a
    /// Hölder reduction.
    pub working_p: f64,
    pub holder_applied: bool,
    pub root: AnnIndex,
    pub stats: BuildStats,
}

impl RecursiveAnnStructure {
    /// `ĉ₀, …, ĉ_k` of the top node.
    pub fn c_hat(&self) -> Vec<f64> {
        match &self.root {
            AnnIndex::Recursive(r) => r.c_hat.clone(),
            other => vec![other.advertised_c()],
        }
    }

    /// Advertised approximation of the whole structure, `ĉ_k`.
    pub fn advertised_c(&self) -> f64 {
        self.root.advertised_c()
    }

    pub fn levels(&self) -> &[AnnLevel] {
        match &self.root {
            AnnIndex::Recursive(r) => &r.levels,
            _ => &[],
        }
    }
}

/// Result of one query; distances use the dataset's own norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryOutcome {
    pub id: u64,
    pub distance: f64,
    pub base_id: u64,
    pub base_distance: f64,
    pub trace: Vec<TraceStep>,
    /// Some level mapped the query from outside its ball.
    pub out_of_contract: bool,
    /// `distance ≤ threshold` when a threshold was supplied.
    pub success: Option<bool>,
}

fn build_node(points: &PointSet, chain: &[f64], cfg: &AnnConfig, seed: u64) -> Result<AnnIndex> {
    if chain.len() < 2 {
        return build_base_with(points, cfg.r, cfg.floor, cfg.jl, cfg.audit_queries, seed);
    }
    Ok(AnnIndex::Recursive(Box::new(build_levels(points, chain, cfg, seed)?)))
}

fn build_levels(points: &PointSet, chain: &[f64], cfg: &AnnConfig, seed: u64) -> Result<RecursiveAnn> {
    let (p, t) = (chain[0], chain[1]);
    let r = cfg.r;
    let base = build_base_with(points, r, cfg.base, cfg.jl, cfg.audit_queries, derive_seed(seed, 0))?;
    let mut c_hat = vec![base.advertised_c()];
    let k = cfg.inner_k.unwrap_or_else(|| iteration_count(p, c_hat[0]));
    let child_is_floor = chain.len() == 2;
    let reps = match (child_is_floor, cfg.floor) {
        (true, BaseStrategy::ExactOracle) => 1,
        (true, _) => cfg.reps_inner.unwrap_or_else(|| default_reps(k as f64)),
        (false, _) => cfg.reps_outer.unwrap_or_else(|| default_reps(p.log2())),
    };
    let n = points.len();
    let mut levels = Vec::new();
    for i in 1..=k {
        let c_in = c_hat[i - 1];
        let c0 = 2.0 * r * c_in;
        let spec = MazurSpec::centered(p, t, c0, points.dim())?;
        let children = crate::par::try_map_range(n, |x| {
            let center = points.row(x);
            let members: Vec<usize> = (0..n).filter(|&y| points.dist(x, y) <= c0).collect();
            let mut data = Vec::with_capacity(members.len() * points.dim());
            for &y in &members {
                let v: Vec<f64> = points.row(y).iter().zip(center).map(|(a, b)| a - b).collect();
                data.extend(spec.apply(&v)?);
            }
            let ids = members.iter().map(|&y| points.id(y)).collect();
            let image = PointSet::with_ids(data, points.dim(), NormExponent::Finite(t), ids)?;
            let reps = (0..reps)
                .map(|j| {
                    build_node(
                        &image,
                        &chain[1..],
                        cfg,
                        derive_path(seed, &[i as u64, x as u64, j as u64]),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Child { members, reps })
        })?;
        let c_t = children
            .iter()
            .flat_map(|c| &c.reps)
            .map(AnnIndex::advertised_c)
            .fold(1.0f64, f64::max);
        let c_out = predict_c(p, t, c_in, c_t)?;
        if c_out >= c_in {
            break;
        }
        levels.push(AnnLevel {
            t,
            c_in,
            c_t,
            c_out,
            spec,
            children,
        });
        c_hat.push(c_out);
    }
    Ok(RecursiveAnn {
        p,
        r,
        points: points.clone(),
        base,
        levels,
        c_hat,
    })
}

/// Build the full structure. Sets with `p = ∞` or `p > log2 d` are first
/// re-normed to `ℓ_{max(2, log2 d)}`.
pub fn build_recursive_ann(points: &PointSet, cfg: AnnConfig, seed: u64) -> Result<RecursiveAnnStructure> {
    cfg.validate()?;
    if points.norm().as_f64() != cfg.p {
        return Err(Error::param(format!(
            "config has p = {} but the points live in l{}",
            cfg.p,
            points.norm()
        )));
    }
    let target = holder_target(points.dim());
    let holder_applied = cfg.holder && points.dim() > 1 && cfg.p > target;
    let working_p = if holder_applied { target } else { cfg.p };
    let working = points.with_norm(NormExponent::Finite(working_p));
    let chain = if working_p > 2.0 {
        cfg.t_schedule.chain(working_p)?
    } else {
        vec![working_p]
    };
    let root = build_node(&working, &chain, &cfg, seed)?;
    let stats = BuildStats {
        stored_points: root.stored_points(),
        levels: match &root {
            AnnIndex::Recursive(r) => r.levels.len(),
            _ => 0,
        },
    };
    Ok(RecursiveAnnStructure {
        config: cfg,
        seed,
        dataset: points.clone(),
        working_p,
        holder_applied,
        root,
        stats,
    })
}

/// Answer `q`. The reported point minimizes the dataset-norm distance over
/// the whole trace, so it is never worse than the base index's answer.
pub fn ann_query(s: &RecursiveAnnStructure, q: &[f64], threshold: Option<f64>) -> Result<QueryOutcome> {
    s.dataset.check_dim(q)?;
    let mut trace = match &s.root {
        AnnIndex::Recursive(r) => r.query_trace(q).1,
        other => {
            let row = other.query_row(q);
            vec![TraceStep {
                level: 0,
                id: s.dataset.id(row),
                distance: 0.0,
                out_of_ball: false,
                skipped: false,
                row,
            }]
        }
    };
    for step in &mut trace {
        step.distance = s.dataset.dist_to(step.row, q);
    }
    let best = trace
        .iter()
        .min_by(|a, b| a.distance.total_cmp(&b.distance).then(a.level.cmp(&b.level)))
        .expect("trace holds the base answer");
    let (id, distance) = (best.id, best.distance);
    Ok(QueryOutcome {
        id,
        distance,
        base_id: trace[0].id,
        base_distance: trace[0].distance,
        out_of_contract: trace.iter().any(|t| t.out_of_ball),
        success: threshold.map(|c| distance <= c),
        trace,
    })
}
