//! Localized weakly bi-Lipschitz maps and the exponent arithmetic of the
//! ℓ_p → ℓ_2 recursion.
//!
//! A localized map sends a bounded subset `C` (diameter ≤ KΔ) through the
//! scaled Mazur map into `ℓ_q`. [`verify_localized`] certifies on a finite
//! set that the map is Lipschitz and keeps every pair farther than Δ at
//! image distance above `(Lip/D)·Δ`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::mazur::MazurSpec;
use crate::metric::{fmt_num, set_diameter, write_commented, NormExponent, PointSet};
use crate::{Error, Result};

/// Relative slack on the diameter precondition.
pub const DIAMETER_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizedMapSpec {
    pub k: f64,
    pub delta: f64,
    pub p: f64,
    pub q: f64,
    pub ids: Vec<u64>,
    pub diameter: f64,
    /// Mazur map with `C0 = KΔ`, translated to the smallest-id point.
    pub spec: MazurSpec,
}

/// Localized map of `subset` into `ℓ_q` at scale `delta`, with images.
pub fn localized_map(subset: &PointSet, k: f64, delta: f64, q: f64) -> Result<(LocalizedMapSpec, PointSet)> {
    if !(k > 1.0 && k.is_finite()) {
        return Err(Error::param(format!("K must be a finite value > 1, got {k}")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::param(format!("delta must be positive and finite, got {delta}")));
    }
    let p = subset.norm().require_finite("localized map")?;
    let bound = k * delta;
    let diameter = set_diameter(subset);
    if diameter > bound * (1.0 + DIAMETER_SLACK) {
        return Err(Error::DiameterExceeded { diameter, bound });
    }
    let z = subset.min_id_row();
    let spec = MazurSpec::new(p, q, bound, subset.row(z).to_vec())?;
    let mut data = Vec::with_capacity(subset.data().len());
    for x in subset.rows() {
        data.extend(spec.apply(x)?);
    }
    let images = PointSet::with_ids(data, subset.dim(), NormExponent::Finite(q), subset.ids().to_vec())?;
    let map = LocalizedMapSpec {
        k,
        delta,
        p,
        q,
        ids: subset.ids().to_vec(),
        diameter,
        spec,
    };
    Ok((map, images))
}

/// Constant `(p/q)·2^{p/q−1}` such that a localized Mazur map passes at
/// `D = c·K^{p/q−1}`; equals 4 for `p/q = 2`.
pub fn localized_constant(p: f64, q: f64) -> f64 {
    let e = p / q;
    e * 2f64.powf(e - 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingCertificate {
    /// Exact finite-set Lipschitz constant (max pair ratio).
    pub lip_hat: f64,
    /// Smallest image distance over pairs with source distance > Δ.
    pub min_sep_image: Option<f64>,
    /// `lip_hat·Δ / min_sep_image`, or 1 when no pair is separated.
    pub achieved_d: f64,
    pub d: f64,
    pub pass: bool,
    pub pairs: usize,
    pub separated_pairs: usize,
    pub reason: Option<String>,
}

#[derive(Clone, Copy)]
struct PairStats {
    lip: f64,
    min_sep: f64,
    separated: usize,
}

fn pair_stats(source: &PointSet, images: &PointSet, delta: f64) -> PairStats {
    let n = source.len();
    crate::par::fold_range(
        n,
        || PairStats {
            lip: 0.0,
            min_sep: f64::INFINITY,
            separated: 0,
        },
        |mut acc, i| {
            for j in i + 1..n {
                let d = source.dist(i, j);
                if d <= 0.0 {
                    continue;
                }
                let e = images.dist(i, j);
                acc.lip = acc.lip.max(e / d);
                if d > delta {
                    acc.min_sep = acc.min_sep.min(e);
                    acc.separated += 1;
                }
            }
            acc
        },
        |a, b| PairStats {
            lip: a.lip.max(b.lip),
            min_sep: a.min_sep.min(b.min_sep),
            separated: a.separated + b.separated,
        },
    )
}

fn check_aligned(source: &PointSet, images: &PointSet) -> Result<()> {
    if source.len() != images.len() {
        return Err(Error::DimensionMismatch {
            expected: source.len(),
            got: images.len(),
        });
    }
    if source.ids() != images.ids() {
        return Err(Error::param("images are not aligned with the source ids"));
    }
    Ok(())
}

/// Brute-force certificate over all pairs of `source`.
pub fn verify_localized(source: &PointSet, images: &PointSet, delta: f64, d: f64) -> Result<EmbeddingCertificate> {
    if source.len() < 2 {
        return Err(Error::param("certification needs at least two points"));
    }
    if !(delta > 0.0 && d > 0.0) {
        return Err(Error::param("delta and D must be positive"));
    }
    check_aligned(source, images)?;
    let n = source.len();
    let stats = pair_stats(source, images, delta);
    let mut cert = EmbeddingCertificate {
        lip_hat: stats.lip,
        min_sep_image: (stats.separated > 0).then_some(stats.min_sep),
        achieved_d: 1.0,
        d,
        pass: true,
        pairs: n * (n - 1) / 2,
        separated_pairs: stats.separated,
        reason: None,
    };
    if stats.lip == 0.0 {
        cert.pass = false;
        cert.reason = Some("map is constant on the set; non-constant required".into());
        return Ok(cert);
    }
    if let Some(sep) = cert.min_sep_image {
        cert.achieved_d = if sep > 0.0 {
            stats.lip * delta / sep
        } else {
            f64::INFINITY
        };
        cert.pass = cert.achieved_d < d;
        if !cert.pass {
            cert.reason = Some(format!("achieved D = {} is not below {d}", cert.achieved_d));
        }
    }
    Ok(cert)
}

/// A map applied to a whole image set after a localized map.
pub trait GlobalMap: Sync {
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>>;
    fn target_norm(&self, source: NormExponent) -> NormExponent;
    fn name(&self) -> String;
}

pub struct Identity;

impl GlobalMap for Identity {
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(x.to_vec())
    }

    fn target_norm(&self, source: NormExponent) -> NormExponent {
        source
    }

    fn name(&self) -> String {
        "identity".into()
    }
}

pub struct Scaling(pub f64);

impl GlobalMap for Scaling {
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(x.iter().map(|v| v * self.0).collect())
    }

    fn target_norm(&self, source: NormExponent) -> NormExponent {
        source
    }

    fn name(&self) -> String {
        format!("scaling {}", self.0)
    }
}

/// Whole-set scaled Mazur map into `ℓ_target`.
pub struct GlobalMazur(pub MazurSpec);

impl GlobalMazur {
    /// Centered at the smallest-id point with `C0` the largest distance from it.
    pub fn fit(points: &PointSet, target: f64) -> Result<Self> {
        let p = points.norm().require_finite("global mazur map")?;
        let z = points.min_id_row();
        let c0 = (0..points.len()).fold(0.0f64, |m, j| m.max(points.dist(z, j)));
        let c0 = if c0 > 0.0 { c0 } else { 1.0 };
        Ok(GlobalMazur(MazurSpec::new(p, target, c0, points.row(z).to_vec())?))
    }
}

impl GlobalMap for GlobalMazur {
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.0.apply(x)
    }

    fn target_norm(&self, _source: NormExponent) -> NormExponent {
        self.0.target_norm()
    }

    fn name(&self) -> String {
        format!("mazur l{}->l{}", self.0.p(), self.0.q())
    }
}

/// `max ratio / min ratio` of `after` against `before` over all pairs with
/// positive distance in `before`; 1 for sets without such pairs.
pub fn measured_distortion(before: &PointSet, after: &PointSet) -> f64 {
    let n = before.len();
    let (hi, lo) = crate::par::fold_range(
        n,
        || (0.0f64, f64::INFINITY),
        |(mut hi, mut lo), i| {
            for j in i + 1..n {
                let d = before.dist(i, j);
                if d > 0.0 {
                    let r = after.dist(i, j) / d;
                    hi = hi.max(r);
                    lo = lo.min(r);
                }
            }
            (hi, lo)
        },
        |a, b| (a.0.max(b.0), a.1.min(b.1)),
    );
    if hi == 0.0 && lo.is_infinite() {
        1.0
    } else {
        hi / lo
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Composed {
    pub images: PointSet,
    /// Distortion of `g` measured on the inner image set.
    pub d2: f64,
}

/// `g ∘ f` on the images of a localized map.
pub fn compose_localized(map: &LocalizedMapSpec, images: &PointSet, g: &dyn GlobalMap) -> Result<Composed> {
    if images.ids() != map.ids.as_slice() {
        return Err(Error::param("images do not belong to this localized map"));
    }
    let rows = crate::par::try_map_range(images.len(), |i| g.apply(images.row(i)))?;
    let dim = rows.first().map_or(images.dim(), Vec::len);
    let data: Vec<f64> = rows.into_iter().flatten().collect();
    let out = PointSet::with_ids(data, dim, g.target_norm(images.norm()), images.ids().to_vec())?;
    let d2 = measured_distortion(images, &out);
    Ok(Composed { images: out, d2 })
}

/// `max{½, ξ_q} + p/q − 1`.
pub fn xi_bound(p: f64, q: f64, xi_q: f64) -> Result<f64> {
    if !(q >= 2.0 && q < p && p.is_finite()) {
        return Err(Error::param(format!("need 2 <= q < p < inf, got p = {p}, q = {q}")));
    }
    if !(0.0..=1.0).contains(&xi_q) {
        return Err(Error::param(format!("xi_q must lie in [0, 1], got {xi_q}")));
    }
    Ok(xi_q.max(0.5) + p / q - 1.0)
}

/// Upper end `3√e` of the range where the exponent bound applies.
pub fn p_max() -> f64 {
    3.0 * 0.5f64.exp()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentBound {
    pub p: f64,
    pub k: u64,
    /// `½ − k + k(p/3)^{1/k}`.
    pub value: f64,
    /// `½ + ln(p/3)`.
    pub limit: f64,
    /// `½` for `p ≤ 3`, `p/2 − 1` above, capped at the trivial exponent 1.
    pub nr25: f64,
    /// `p/4`, capped at 1.
    pub bg14: f64,
}

pub fn nr25_exponent(p: f64) -> f64 {
    if p <= 3.0 {
        0.5
    } else {
        (p / 2.0 - 1.0).min(1.0)
    }
}

pub fn bg14_exponent(p: f64) -> f64 {
    (p / 4.0).min(1.0)
}

pub fn theorem_exponent(p: f64, k: u64) -> Result<ExponentBound> {
    if !(p > 3.0 && p < p_max()) {
        return Err(Error::param(format!("p must lie in (3, 3·sqrt(e)), got {p}")));
    }
    if k == 0 {
        return Err(Error::param("k must be at least 1"));
    }
    Ok(exponent_unchecked(p, k))
}

fn exponent_unchecked(p: f64, k: u64) -> ExponentBound {
    let l = (p / 3.0).ln();
    let kf = k as f64;
    ExponentBound {
        p,
        k,
        // k·((p/3)^{1/k} − 1) via expm1 keeps precision for large k
        value: 0.5 + kf * (l / kf).exp_m1(),
        limit: 0.5 + l,
        nr25: nr25_exponent(p),
        bg14: bg14_exponent(p),
    }
}

/// Limit exponent `½ + ln(p/3)` without the domain check; equals 1 at `3√e`.
pub fn limit_exponent(p: f64) -> f64 {
    0.5 + (p / 3.0).ln()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentRow {
    pub p: f64,
    pub ours_k: f64,
    pub ours_limit: f64,
    pub nr25: f64,
    pub bg14: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentTable {
    pub rows: Vec<ExponentRow>,
    /// Grid points in `(3, min(3√e, 4))`.
    pub checked: usize,
    /// Of those, how many satisfy `ours_limit + eps < nr25`.
    pub dominated: usize,
}

/// `steps` evenly spaced points from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..steps)
            .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
            .collect(),
    }
}

pub fn exponent_table(p_grid: &[f64], k: u64, eps: f64) -> Result<ExponentTable> {
    let mut rows = Vec::with_capacity(p_grid.len());
    let (mut checked, mut dominated) = (0, 0);
    for &p in p_grid {
        let b = theorem_exponent(p, k)?;
        if p < 4.0 {
            checked += 1;
            if b.limit + eps < b.nr25 {
                dominated += 1;
            }
        }
        rows.push(ExponentRow {
            p,
            ours_k: b.value,
            ours_limit: b.limit,
            nr25: b.nr25,
            bg14: b.bg14,
        });
    }
    Ok(ExponentTable {
        rows,
        checked,
        dominated,
    })
}

/// CSV `p,ours_k,ours_limit,nr25,bg14`.
pub fn write_exponent_csv(path: &Path, table: &ExponentTable, comments: &[String]) -> Result<()> {
    let mut body = String::from("p,ours_k,ours_limit,nr25,bg14\n");
    for r in &table.rows {
        body.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_num(r.p),
            fmt_num(r.ours_k),
            fmt_num(r.ours_limit),
            fmt_num(r.nr25),
            fmt_num(r.bg14)
        ));
    }
    write_commented(path, comments, &body)
}
