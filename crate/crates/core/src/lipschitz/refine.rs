use super::{check_delta, Partition, PartitionSampler, Provenance, StepParams};
use crate::mazur::MazurSpec;
use crate::metric::{NormExponent, PointSet};
use crate::rng::{derive_path, derive_seed};
use crate::{Error, Result};

/// Output of one refinement step together with the coarse partition it refines.
#[derive(Clone, Debug, PartialEq)]
pub struct Refined {
    pub output: Partition,
    pub init: Partition,
}

/// One refinement step at scale `delta`:
///
/// 1. draw `P_init` from `outer` at `a·Δ`;
/// 2. map each cluster `K` into ℓ_q with the Mazur map for `C0 = a·Δ`
///    centered at the cluster's smallest-id point;
/// 3. partition each image with `inner` at `b·Δ`;
/// 4. pull the image clusters back by row.
///
/// With `params` from [`super::step_params`] every output cluster has ℓ_p
/// diameter at most Δ. A Mazur radius violation means `outer` returned a
/// cluster wider than `a·Δ` and is reported as an error.
#[allow(clippy::too_many_arguments)]
pub fn refine_once(
    outer: &dyn PartitionSampler,
    inner: &dyn PartitionSampler,
    points: &PointSet,
    q: f64,
    delta: f64,
    params: StepParams,
    seed: u64,
    level: usize,
) -> Result<Partition> {
    refine_traced(outer, inner, points, q, delta, params, seed, level).map(|r| r.output)
}

#[allow(clippy::too_many_arguments)]
pub fn refine_traced(
    outer: &dyn PartitionSampler,
    inner: &dyn PartitionSampler,
    points: &PointSet,
    q: f64,
    delta: f64,
    params: StepParams,
    seed: u64,
    level: usize,
) -> Result<Refined> {
    check_delta(delta)?;
    let p = points.norm().require_finite("refinement")?;
    if !(q >= 1.0 && q < p) {
        return Err(Error::param(format!(
            "refinement needs 1 <= q < p, got p = {p}, q = {q}"
        )));
    }
    if !(params.a > 0.0 && params.b > 0.0) {
        return Err(Error::param("refinement scales a, b must be positive"));
    }
    let c0 = params.a * delta;
    let init = outer.sample(points, c0, derive_seed(seed, 1))?;
    let clusters = init.clusters();

    let inner_labels = crate::par::try_map_range(clusters.len(), |ci| {
        let rows = &clusters[ci];
        if rows.len() == 1 {
            return Ok(vec![0usize]);
        }
        let members = points.subset(rows)?;
        let z_row = members.min_id_row();
        let spec = MazurSpec::new(p, q, c0, members.row(z_row).to_vec())?;
        let mut image = Vec::with_capacity(rows.len() * points.dim());
        for x in members.rows() {
            image.extend(spec.apply(x)?);
        }
        let image = PointSet::with_ids(image, points.dim(), NormExponent::Finite(q), members.ids().to_vec())?;
        let min_id = members.id(z_row);
        let part = inner.sample(&image, params.b * delta, derive_path(seed, &[2, min_id]))?;
        Ok(part.labels().to_vec())
    })?;

    let mut combined = vec![(0usize, 0usize); points.len()];
    for (ci, rows) in clusters.iter().enumerate() {
        for (k, &row) in rows.iter().enumerate() {
            combined[row] = (ci, inner_labels[ci][k]);
        }
    }
    let mut provenance = init.provenance().to_vec();
    provenance.push(Provenance::new(
        level,
        format!("mazur l{p}->l{q} C0={:.6}*delta", params.a),
    ));
    provenance.push(Provenance::new(
        level,
        format!("inner {} at {:.6}*delta", inner.name(), params.b),
    ));
    provenance.push(Provenance::new(level, "pull-back"));
    let output = Partition::from_labels(&combined, delta, seed, provenance);
    Ok(Refined { output, init })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lipschitz::{step_params, Ckr, L2Base, L2Strategy};
    use crate::metric::{generate_dataset, DatasetKind};

    #[test]
    fn singleton_stays_single() {
        let pts = PointSet::from_rows(&[vec![0.3, 0.2]], NormExponent::Finite(4.0)).unwrap();
        let params = step_params(4.0, 2.0, 6.0, 2.0).unwrap();
        let inner = L2Base {
            strategy: L2Strategy::Grid,
            jl: false,
        };
        let part = refine_once(&Ckr, &inner, &pts, 2.0, 1.0, params, 5, 1).unwrap();
        assert_eq!(part.labels(), &[0]);
    }

    #[test]
    fn output_refines_init_and_respects_delta() {
        let p4 = NormExponent::Finite(4.0);
        let ds = generate_dataset(DatasetKind::UniformCube, 120, 6, p4, 2).unwrap();
        let params = step_params(4.0, 2.0, 6.0, 2.5).unwrap();
        let inner = L2Base {
            strategy: L2Strategy::BallCarve,
            jl: false,
        };
        for seed in 0..10 {
            for delta in [0.3, 0.6, 1.2] {
                let r = refine_traced(&Ckr, &inner, &ds.points, 2.0, delta, params, seed, 1).unwrap();
                assert!(r.output.refines(&r.init));
                r.output.audit_diameter(&ds.points).unwrap();
                r.init.audit_diameter(&ds.points.clone()).ok();
                assert!(r.output.provenance().iter().any(|t| t.mechanism == "pull-back"));
            }
        }
    }

    /// An outer sampler that ignores the scale and returns one cluster.
    struct Lump;

    impl PartitionSampler for Lump {
        fn sample(&self, points: &PointSet, delta: f64, seed: u64) -> Result<Partition> {
            Ok(Partition::single(points.len(), delta, seed, vec![]))
        }
        fn name(&self) -> String {
            "lump".into()
        }
    }

    #[test]
    fn wide_outer_cluster_is_a_hard_error() {
        let pts = PointSet::from_rows(&[vec![0.0], vec![10.0]], NormExponent::Finite(4.0)).unwrap();
        let params = step_params(4.0, 2.0, 6.0, 2.5).unwrap();
        let err = refine_once(&Lump, &Ckr, &pts, 2.0, 1.0, params, 0, 1).unwrap_err();
        assert!(matches!(err, Error::RadiusViolation { .. }));
    }
}
