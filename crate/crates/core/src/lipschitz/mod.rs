//! Lipschitz decompositions of finite lp point sets.
//!
//! A sampler draws random partitions whose clusters all have diameter at
//! most Δ. Two base samplers (CKR ball carving for any norm, shifted grids
//! and ball carving for ℓ_2) feed a refinement step that coarsens the scale,
//! maps each cluster through a Mazur map into ℓ_q and partitions the image.
//! [`build_decomposer`] composes that step along a chain of exponents.

mod carving;
mod decomposer;
mod estimate;
mod params;
mod partition;
mod refine;

use crate::metric::PointSet;
use crate::Result;

pub(crate) use carving::jl_dim;
pub use carving::{ckr_partition, l2_base_partition, Ckr, L2Base, L2Strategy};
pub use decomposer::{
    build_decomposer, default_chain, BaseKind, BetaEstimates, BetaSource, Calibration, DecompositionPlan, LevelReport,
    LipschitzSampler, SamplerNode,
};
pub use estimate::{
    estimate_beta, estimate_beta_series, sample_pairs, separation_counts, write_beta_csv, write_beta_series_csv,
    BetaReport,
};
pub use params::{
    beta_new, beta_new_with, halving_closed_form, halving_partial_product, iteration_count, predict_fixpoint,
    predict_fixpoint_with, step_params, StepParams, DEFAULT_STEP_FACTOR,
};
pub use partition::{Partition, Provenance};
pub use refine::{refine_once, refine_traced, Refined};

/// Relative slack on the cluster-diameter invariant.
pub const DIAMETER_SLACK: f64 = 1e-9;

/// Something that draws random partitions of an arbitrary point set at any
/// scale. Implementations must be deterministic in `seed`.
pub trait PartitionSampler: Send + Sync {
    fn sample(&self, points: &PointSet, delta: f64, seed: u64) -> Result<Partition>;

    /// Short mechanism name recorded in provenance tags.
    fn name(&self) -> String;
}

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(crate::Error::param(format!(
            "delta must be positive and finite, got {delta}"
        )))
    }
}
