//! Scaled Mazur maps `ℓ_p → ℓ_q` (`q < p`) on a ball of radius `C0` around a
//! base point `z`.
//!
//! The map is `x ↦ M(x − z) / ((p/q)·C0^{p/q−1})` where `M` raises every
//! coordinate's magnitude to `p/q` and keeps its sign. On the ball it is
//! non-expanding and satisfies
//!
//! ```text
//! (q/p)(2C0)^{1−p/q} ‖x−y‖_p^{p/q}  ≤  ‖f(x) − f(y)‖_q  ≤  ‖x−y‖_p
//! ```
//!
//! There is deliberately no inverse: everything that needs to go back from
//! image space carries point ids instead.

use serde::{Deserialize, Serialize};

use crate::metric::{distance, norm, NormExponent};
use crate::{Error, Result};

/// Relative slack on the ball precondition, for float noise at the boundary.
pub const RADIUS_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec")]
pub struct MazurSpec {
    p: f64,
    q: f64,
    c0: f64,
    z: Vec<f64>,
}

#[derive(Deserialize)]
struct RawSpec {
    p: f64,
    q: f64,
    c0: f64,
    z: Vec<f64>,
}

impl TryFrom<RawSpec> for MazurSpec {
    type Error = Error;

    fn try_from(r: RawSpec) -> Result<Self> {
        MazurSpec::new(r.p, r.q, r.c0, r.z)
    }
}

impl MazurSpec {
    /// Requires `1 ≤ q < p < ∞` and `C0 > 0`.
    pub fn new(p: f64, q: f64, c0: f64, z: Vec<f64>) -> Result<Self> {
        if !(p.is_finite() && q >= 1.0 && q < p) {
            return Err(Error::param(format!(
                "mazur map needs 1 <= q < p < inf, got p = {p}, q = {q}"
            )));
        }
        if !(c0 > 0.0 && c0.is_finite()) {
            return Err(Error::param(format!("mazur radius C0 must be positive, got {c0}")));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("mazur base point must be finite"));
        }
        Ok(MazurSpec { p, q, c0, z })
    }

    /// Map centered at the origin of `dim`-dimensional space.
    pub fn centered(p: f64, q: f64, c0: f64, dim: usize) -> Result<Self> {
        MazurSpec::new(p, q, c0, vec![0.0; dim])
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn source_norm(&self) -> NormExponent {
        NormExponent::Finite(self.p)
    }

    pub fn target_norm(&self) -> NormExponent {
        NormExponent::Finite(self.q)
    }

    /// Divisor `(p/q)·C0^{p/q−1}`.
    pub fn scale(&self) -> f64 {
        let e = self.p / self.q;
        e * self.c0.powf(e - 1.0)
    }

    /// `‖x − z‖_p`, erroring on a dimension mismatch.
    pub fn radius_of(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.z.len() {
            return Err(Error::DimensionMismatch {
                expected: self.z.len(),
                got: x.len(),
            });
        }
        Ok(distance(x, &self.z, self.source_norm()))
    }

    pub fn admits(&self, x: &[f64]) -> bool {
        self.radius_of(x)
            .map(|r| r <= self.c0 * (1.0 + RADIUS_SLACK))
            .unwrap_or(false)
    }

    /// Apply the map, enforcing `‖x − z‖_p ≤ C0`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let r = self.radius_of(x)?;
        if r > self.c0 * (1.0 + RADIUS_SLACK) {
            return Err(Error::RadiusViolation { norm: r, c0: self.c0 });
        }
        Ok(self.apply_unchecked(x))
    }

    /// The same formula without the ball check. Outside the ball none of the
    /// distortion guarantees hold; used for out-of-contract ANN queries.
    pub fn apply_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let e = self.p / self.q;
        let inv = 1.0 / self.scale();
        x.iter()
            .zip(&self.z)
            .map(|(a, b)| signed_power(a - b, e) * inv)
            .collect()
    }
}

#[inline]
fn signed_power(v: f64, e: f64) -> f64 {
    let m = v.abs();
    let powered = if e == 2.0 { m * m } else { m.powf(e) };
    powered.copysign(v)
}

/// The three sides of the distortion sandwich for one pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MazurBounds {
    pub lower: f64,
    pub actual: f64,
    pub upper: f64,
}

impl MazurBounds {
    /// `lower ≤ actual ≤ upper`, each comparison with relative slack `rel`.
    pub fn holds(&self, rel: f64) -> bool {
        self.lower <= self.actual * (1.0 + rel) && self.actual <= self.upper * (1.0 + rel)
    }
}

pub fn mazur_bounds(spec: &MazurSpec, x: &[f64], y: &[f64]) -> Result<MazurBounds> {
    let fx = spec.apply(x)?;
    let fy = spec.apply(y)?;
    let e = spec.p / spec.q;
    let upper = distance(x, y, spec.source_norm());
    let lower = (1.0 / e) * (2.0 * spec.c0).powf(1.0 - e) * upper.powf(e);
    let actual = distance(&fx, &fy, spec.target_norm());
    Ok(MazurBounds { lower, actual, upper })
}

/// `‖v‖_p` in the source norm of this map, for callers building balls.
pub fn source_norm_of(spec: &MazurSpec, v: &[f64]) -> f64 {
    norm(v, spec.source_norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec42() -> MazurSpec {
        MazurSpec::centered(4.0, 2.0, 1.0, 2).unwrap()
    }

    #[test]
    fn apply_examples() {
        let s = spec42();
        assert_eq!(s.scale(), 2.0);
        assert_eq!(s.apply(&[1.0, 0.0]).unwrap(), vec![0.5, 0.0]);
        assert_eq!(s.apply(&[-1.0, 0.0]).unwrap(), vec![-0.5, 0.0]);
        let t = MazurSpec::new(4.0, 2.0, 3.0, vec![0.7, -0.2]).unwrap();
        assert_eq!(t.apply(&[0.7, -0.2]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn bounds_example() {
        let b = mazur_bounds(&spec42(), &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        // lower = (1/2)(2)^{-1}(2^{1/4})^2 = sqrt(2)/4
        assert!((b.lower - 2f64.sqrt() / 4.0).abs() < 1e-15);
        assert!((b.actual - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((b.upper - 2f64.powf(0.25)).abs() < 1e-15);
        assert!((b.lower - 0.353553).abs() < 1e-6);
        assert!((b.actual - 0.707107).abs() < 1e-6);
        assert!((b.upper - 1.189207).abs() < 1e-6);
        let same = mazur_bounds(&spec42(), &[0.3, 0.1], &[0.3, 0.1]).unwrap();
        assert_eq!((same.lower, same.actual, same.upper), (0.0, 0.0, 0.0));
    }

    #[test]
    fn radius_and_domain_errors() {
        let s = spec42();
        match s.apply(&[1.0, 1.0]) {
            Err(Error::RadiusViolation { norm, c0 }) => {
                assert!((norm - 2f64.powf(0.25)).abs() < 1e-12);
                assert_eq!(c0, 1.0);
            }
            other => panic!("expected radius violation, got {other:?}"),
        }
        assert!(s.apply(&[1.0 + 1e-13, 0.0]).is_ok());
        assert!(MazurSpec::centered(2.0, 2.0, 1.0, 2).is_err());
        assert!(MazurSpec::centered(2.0, 4.0, 1.0, 2).is_err());
        assert!(MazurSpec::centered(4.0, 0.5, 1.0, 2).is_err());
        assert!(MazurSpec::centered(4.0, 2.0, 0.0, 2).is_err());
        assert!(MazurSpec::centered(f64::INFINITY, 2.0, 1.0, 2).is_err());
        assert!(matches!(s.apply(&[0.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn json_layout() {
        let s = MazurSpec::new(4.0, 2.0, 1.5, vec![1.0, -2.0]).unwrap();
        let j = serde_json::to_value(&s).unwrap();
        assert_eq!(j, serde_json::json!({"p": 4.0, "q": 2.0, "c0": 1.5, "z": [1.0, -2.0]}));
        let back: MazurSpec = serde_json::from_value(j).unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<MazurSpec>(r#"{"p":2,"q":4,"c0":1,"z":[0]}"#).is_err());
    }
}
