use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    beta_new_with, ckr_partition, estimate_beta, iteration_count, refine_once, step_params, Ckr, L2Base, L2Strategy,
    Partition, PartitionSampler, StepParams, DEFAULT_STEP_FACTOR,
};
use crate::mazur::MazurSpec;
use crate::metric::{distance_quantile, NormExponent, PointSet};
use crate::rng::derive_seed;
use crate::{Error, Result};

/// A node of a composed sampler tree.
#[derive(Clone, Debug)]
pub enum SamplerNode {
    Ckr,
    L2(L2Base),
    Refine {
        p: f64,
        q: f64,
        params: StepParams,
        level: usize,
        outer: Arc<SamplerNode>,
        inner: Arc<SamplerNode>,
    },
}

impl PartitionSampler for SamplerNode {
    fn sample(&self, points: &PointSet, delta: f64, seed: u64) -> Result<Partition> {
        match self {
            SamplerNode::Ckr => ckr_partition(points, delta, seed),
            SamplerNode::L2(base) => base.sample(points, delta, seed),
            SamplerNode::Refine {
                p,
                q,
                params,
                level,
                outer,
                inner,
            } => {
                if points.norm() != NormExponent::Finite(*p) {
                    return Err(Error::param(format!(
                        "sampler built for l{p} applied to points in l{}",
                        points.norm()
                    )));
                }
                refine_once(outer.as_ref(), inner.as_ref(), points, *q, delta, *params, seed, *level)
            }
        }
    }

    fn name(&self) -> String {
        match self {
            SamplerNode::Ckr => "ckr".into(),
            SamplerNode::L2(base) => base.name(),
            SamplerNode::Refine { p, q, level, .. } => format!("refine[l{p}->l{q}, level {level}]"),
        }
    }
}

impl SamplerNode {
    /// Number of nested refinement steps on the outer spine.
    pub fn depth(&self) -> usize {
        match self {
            SamplerNode::Refine { outer, .. } => 1 + outer.depth(),
            _ => 0,
        }
    }
}

/// Sampler used at the bottom of the chain, on ℓ_2 images.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseKind {
    Ckr,
    L2Grid,
    L2BallCarve,
    /// Pick per instance: by calibration when available, ball carving otherwise.
    Auto,
}

impl FromStr for BaseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ckr" => Ok(BaseKind::Ckr),
            "l2-grid" => Ok(BaseKind::L2Grid),
            "l2-ballcarve" => Ok(BaseKind::L2BallCarve),
            "auto" => Ok(BaseKind::Auto),
            _ => Err(Error::Unknown {
                what: "base sampler",
                value: s.to_string(),
            }),
        }
    }
}

impl fmt::Display for BaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaseKind::Ckr => "ckr",
            BaseKind::L2Grid => "l2-grid",
            BaseKind::L2BallCarve => "l2-ballcarve",
            BaseKind::Auto => "auto",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionPlan {
    /// Strictly descending exponents from `p` down to 2, ratios in `(1, 2]`.
    pub p_chain: Vec<f64>,
    /// Refinement steps per level; `None` uses `⌈log2(log2 p · log2 β₀)⌉`.
    pub inner_k: Option<usize>,
    pub base: BaseKind,
    pub abort_on_worse: bool,
    /// JL pre-projection inside the ℓ_2 base.
    pub jl: bool,
}

impl DecompositionPlan {
    pub fn for_p(p: f64) -> Result<Self> {
        Ok(DecompositionPlan {
            p_chain: default_chain(p)?,
            inner_k: None,
            base: BaseKind::Auto,
            abort_on_worse: false,
            jl: false,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let chain = &self.p_chain;
        if chain.is_empty() {
            return Err(Error::param("decomposition chain is empty"));
        }
        if *chain.last().expect("nonempty") != 2.0 {
            return Err(Error::param("decomposition chain must end at 2"));
        }
        for w in chain.windows(2) {
            let r = w[0] / w[1];
            if !(r > 1.0 && r <= 2.0) {
                return Err(Error::param(format!(
                    "consecutive chain ratio {} / {} is outside (1, 2]",
                    w[0], w[1]
                )));
            }
        }
        if self.inner_k == Some(0) {
            return Err(Error::param("inner_k must be at least 1"));
        }
        Ok(())
    }
}

/// `p`, then the largest power of two below `p` when `p` is not one, then
/// halving down to 2.
pub fn default_chain(p: f64) -> Result<Vec<f64>> {
    if !(p >= 2.0 && p.is_finite()) {
        return Err(Error::param(format!("decomposition needs 2 <= p < inf, got {p}")));
    }
    let mut chain = vec![p];
    let mut pow = 2f64.powf(p.log2().floor());
    if pow == p {
        pow /= 2.0;
    }
    while pow >= 2.0 {
        chain.push(pow);
        pow /= 2.0;
    }
    Ok(chain)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BetaSource {
    Formula,
    Calibrated,
}

impl FromStr for BetaSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "formula" => Ok(BetaSource::Formula),
            "calibrated" => Ok(BetaSource::Calibrated),
            _ => Err(Error::Unknown {
                what: "beta source",
                value: s.to_string(),
            }),
        }
    }
}

/// Monte-Carlo budget for calibrated estimates, measured at the median
/// pairwise distance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub draws: usize,
    pub pair_budget: usize,
    pub seed: u64,
}

impl Default for Calibration {
    fn default() -> Self {
        Calibration {
            draws: 40,
            pair_budget: 4000,
            seed: 0,
        }
    }
}

/// Concrete values for the separation parameters the recursion needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaEstimates {
    /// Explicit `(q, β*_n(ℓ_q))` overrides; they win over any other source.
    pub table: Vec<(f64, f64)>,
    /// Override for the base sampler's β₀ at every level.
    pub beta0: Option<f64>,
    /// Constant `c` in `β*(ℓ_2) = c·min(√d, √ln n)`.
    pub l2_constant: f64,
    pub step_factor: f64,
    pub source: BetaSource,
    pub calibration: Calibration,
}

impl Default for BetaEstimates {
    fn default() -> Self {
        BetaEstimates {
            table: Vec::new(),
            beta0: None,
            l2_constant: 1.0,
            step_factor: DEFAULT_STEP_FACTOR,
            source: BetaSource::Formula,
            calibration: Calibration::default(),
        }
    }
}

impl BetaEstimates {
    pub fn validate(&self) -> Result<()> {
        let bad = |v: f64| !(v >= 1.0 && v.is_finite());
        if self.table.iter().any(|&(_, b)| bad(b)) || self.beta0.is_some_and(bad) {
            return Err(Error::param("beta estimates must be finite and >= 1"));
        }
        if !(self.l2_constant > 0.0 && self.step_factor > 0.0) {
            return Err(Error::param("l2_constant and step_factor must be positive"));
        }
        Ok(())
    }

    pub fn lookup(&self, q: f64) -> Option<f64> {
        self.table.iter().find(|&&(k, _)| k == q).map(|&(_, b)| b)
    }

    /// `max(1, min(d, ln n))`.
    pub fn formula_beta0(n: usize, d: usize) -> f64 {
        (d as f64).min((n.max(1) as f64).ln()).max(1.0)
    }

    /// `max(1, c·min(√d, √ln n))`.
    pub fn formula_l2(&self, n: usize, d: usize) -> f64 {
        (self.l2_constant * (d as f64).sqrt().min((n.max(1) as f64).ln().sqrt())).max(1.0)
    }
}

/// Bookkeeping for one level `ℓ_p → ℓ_q` of the chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub p: f64,
    pub q: f64,
    pub inner_k: usize,
    pub beta0: f64,
    pub beta_star_q: f64,
    /// Predicted β after each applied step, starting with `beta0`.
    pub betas: Vec<f64>,
    /// Step index at which the abort rule fired.
    pub aborted_at: Option<usize>,
    pub params: Vec<StepParams>,
}

/// A built decomposition: draws partitions of its point set at any scale.
#[derive(Clone, Debug)]
pub struct LipschitzSampler<'a> {
    points: &'a PointSet,
    plan: DecompositionPlan,
    estimates: BetaEstimates,
    root: Arc<SamplerNode>,
    iterates: Vec<Arc<SamplerNode>>,
    levels: Vec<LevelReport>,
    floor: BaseKind,
}

impl<'a> LipschitzSampler<'a> {
    pub fn draw(&self, delta: f64, seed: u64) -> Result<Partition> {
        self.root.sample(self.points, delta, seed)
    }

    pub fn points(&self) -> &'a PointSet {
        self.points
    }

    pub fn plan(&self) -> &DecompositionPlan {
        &self.plan
    }

    pub fn estimates(&self) -> &BetaEstimates {
        &self.estimates
    }

    pub fn root(&self) -> &Arc<SamplerNode> {
        &self.root
    }

    /// Top-level samplers: the base, then one per applied refinement step.
    pub fn iterates(&self) -> &[Arc<SamplerNode>] {
        &self.iterates
    }

    /// Levels from the top of the chain down.
    pub fn levels(&self) -> &[LevelReport] {
        &self.levels
    }

    /// Base sampler actually used on ℓ_2 (never `Auto`).
    pub fn floor(&self) -> BaseKind {
        self.floor
    }

    /// Predicted β of the root sampler.
    pub fn predicted_beta(&self) -> Option<f64> {
        self.levels.first().and_then(|l| l.betas.last().copied())
    }
}

impl PartitionSampler for LipschitzSampler<'_> {
    fn sample(&self, points: &PointSet, delta: f64, seed: u64) -> Result<Partition> {
        self.root.sample(points, delta, seed)
    }

    fn name(&self) -> String {
        self.root.name()
    }
}

fn base_node(kind: BaseKind, jl: bool) -> SamplerNode {
    match kind {
        BaseKind::Ckr => SamplerNode::Ckr,
        BaseKind::L2Grid => SamplerNode::L2(L2Base {
            strategy: L2Strategy::Grid,
            jl,
        }),
        BaseKind::L2BallCarve | BaseKind::Auto => SamplerNode::L2(L2Base {
            strategy: L2Strategy::BallCarve,
            jl,
        }),
    }
}

/// Whole-set Mazur image into `ℓ_q`, centered at the smallest-id point with
/// `C0` equal to the largest distance from it.
fn whole_set_image(points: &PointSet, q: f64) -> Result<PointSet> {
    let p = points.norm().require_finite("calibration")?;
    let z = points.min_id_row();
    let c0 = (0..points.len()).fold(0.0f64, |m, j| m.max(points.dist(z, j)));
    if c0 == 0.0 {
        return Ok(points.with_norm(NormExponent::Finite(q)));
    }
    let spec = MazurSpec::new(p, q, c0, points.row(z).to_vec())?;
    let mut data = Vec::with_capacity(points.data().len());
    for x in points.rows() {
        data.extend(spec.apply(x)?);
    }
    PointSet::with_ids(data, points.dim(), NormExponent::Finite(q), points.ids().to_vec())
}

fn calibrate(sampler: &dyn PartitionSampler, points: &PointSet, cal: &Calibration, tag: u64) -> Result<f64> {
    if points.len() < 2 {
        return Ok(1.0);
    }
    let delta = distance_quantile(points, 0.5)?;
    if delta <= 0.0 {
        return Ok(1.0);
    }
    let report = estimate_beta(
        sampler,
        points,
        delta,
        cal.draws,
        cal.pair_budget,
        derive_seed(cal.seed, tag),
    )?;
    Ok(report.beta_hat.max(1.0))
}

/// Compose refinement steps along `plan.p_chain`, bottom-up: the ℓ_2 floor
/// first, then for each level `ℓ_p → ℓ_q` a CKR base at `ℓ_p` refined
/// `inner_k` times against the sampler already built for `ℓ_q`.
pub fn build_decomposer<'a>(
    points: &'a PointSet,
    plan: DecompositionPlan,
    estimates: BetaEstimates,
) -> Result<LipschitzSampler<'a>> {
    let p = match points.norm() {
        NormExponent::Infinity => {
            return Err(Error::param(
                "decomposition needs finite p; apply the hölder reduction first",
            ))
        }
        NormExponent::Finite(p) => p,
    };
    if p < 2.0 {
        return Err(Error::param(format!("decomposition needs p >= 2, got {p}")));
    }
    plan.validate()?;
    estimates.validate()?;
    if plan.p_chain[0] != p {
        return Err(Error::param(format!(
            "chain starts at {} but the points live in l{p}",
            plan.p_chain[0]
        )));
    }
    let (n, d) = (points.len(), points.dim());
    let calibrated = estimates.source == BetaSource::Calibrated;
    let cal = estimates.calibration;

    let images = if calibrated {
        let mut v = vec![points.clone()];
        for &q in &plan.p_chain[1..] {
            let next = whole_set_image(v.last().expect("nonempty"), q)?;
            v.push(next);
        }
        v
    } else {
        Vec::new()
    };

    let floor = match (plan.base, calibrated) {
        (BaseKind::Auto, true) => {
            let img = images.last().expect("nonempty");
            let mut best = (f64::INFINITY, BaseKind::L2BallCarve);
            for (i, kind) in [BaseKind::L2BallCarve, BaseKind::L2Grid, BaseKind::Ckr]
                .into_iter()
                .enumerate()
            {
                let b = calibrate(&base_node(kind, plan.jl), img, &cal, 100 + i as u64)?;
                if b < best.0 {
                    best = (b, kind);
                }
            }
            best.1
        }
        (BaseKind::Auto, false) => BaseKind::L2BallCarve,
        (kind, _) => kind,
    };
    let floor_node = Arc::new(base_node(floor, plan.jl));
    let mut beta_below = match estimates.lookup(2.0) {
        Some(b) => b,
        None if calibrated => calibrate(floor_node.as_ref(), images.last().expect("nonempty"), &cal, 1)?,
        None => estimates.formula_l2(n, d),
    };

    let mut below = floor_node.clone();
    let mut iterates = vec![floor_node];
    let mut levels = Vec::new();
    let chain = &plan.p_chain;
    for li in (0..chain.len() - 1).rev() {
        let (lp, lq) = (chain[li], chain[li + 1]);
        let level = li + 1;
        let beta_star = estimates.lookup(lq).unwrap_or(beta_below);
        let base = Arc::new(SamplerNode::Ckr);
        let beta0 = match estimates.beta0 {
            Some(b) => b,
            None if calibrated => calibrate(&Ckr, &images[li], &cal, 200 + li as u64)?,
            None => BetaEstimates::formula_beta0(n, d),
        };
        let k = plan.inner_k.unwrap_or_else(|| iteration_count(lp, beta0));
        let mut report = LevelReport {
            p: lp,
            q: lq,
            inner_k: k,
            beta0,
            beta_star_q: beta_star,
            betas: vec![beta0],
            aborted_at: None,
            params: Vec::new(),
        };
        let mut current = base.clone();
        let mut level_iterates = vec![base];
        let mut beta = beta0;
        for step in 0..k {
            if plan.abort_on_worse && beta_star > beta {
                report.aborted_at = Some(step);
                break;
            }
            let params = step_params(lp, lq, beta, beta_star)?;
            current = Arc::new(SamplerNode::Refine {
                p: lp,
                q: lq,
                params,
                level,
                outer: current,
                inner: below.clone(),
            });
            beta = beta_new_with(estimates.step_factor, lp, lq, beta, beta_star)?;
            report.betas.push(beta);
            report.params.push(params);
            level_iterates.push(current.clone());
        }
        levels.push(report);
        below = current;
        beta_below = beta;
        iterates = level_iterates;
    }
    levels.reverse();
    Ok(LipschitzSampler {
        points,
        plan,
        estimates,
        root: below,
        iterates,
        levels,
        floor,
    })
}
