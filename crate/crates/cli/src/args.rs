use std::fmt;
use std::str::FromStr;

use recembed::ann::TSchedule;
use recembed::metric::{distance_quantile, PointSet};
use serde::{Serialize, Serializer};

/// Scale argument: an absolute distance, `median`, or a pairwise-distance
/// quantile written `qX` with `X` in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DeltaArg {
    Absolute(f64),
    Quantile(f64),
}

impl DeltaArg {
    pub fn resolve(self, points: &PointSet) -> recembed::Result<f64> {
        match self {
            DeltaArg::Absolute(v) => Ok(v),
            DeltaArg::Quantile(q) => distance_quantile(points, q),
        }
    }
}

impl FromStr for DeltaArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "median" {
            return Ok(DeltaArg::Quantile(0.5));
        }
        if let Some(rest) = s.strip_prefix('q') {
            let q: f64 = rest
                .parse()
                .map_err(|_| format!("bad quantile {s:?}; expected qX with X in [0, 1]"))?;
            return if (0.0..=1.0).contains(&q) {
                Ok(DeltaArg::Quantile(q))
            } else {
                Err(format!("quantile {q} outside [0, 1]"))
            };
        }
        match s.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(DeltaArg::Absolute(v)),
            _ => Err(format!("bad delta {s:?}; expected a positive number, `median` or qX")),
        }
    }
}

impl fmt::Display for DeltaArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            DeltaArg::Quantile(0.5) => f.write_str("median"),
            DeltaArg::Quantile(q) => write!(f, "q{q}"),
            DeltaArg::Absolute(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for DeltaArg {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// `halving` or `geometric:EPS`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduleArg(pub TSchedule);

impl FromStr for ScheduleArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "halving" {
            return Ok(ScheduleArg(TSchedule::Halving));
        }
        let eps = s
            .strip_prefix("geometric:")
            .and_then(|e| e.parse::<f64>().ok())
            .ok_or_else(|| format!("bad schedule {s:?}; expected `halving` or `geometric:EPS`"))?;
        if eps > 0.0 && eps < 1.0 {
            Ok(ScheduleArg(TSchedule::Geometric { eps }))
        } else {
            Err(format!("epsilon {eps} outside (0, 1)"))
        }
    }
}

impl fmt::Display for ScheduleArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            TSchedule::Halving => f.write_str("halving"),
            TSchedule::Geometric { eps } => write!(f, "geometric:{eps}"),
        }
    }
}

impl Serialize for ScheduleArg {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Map applied after the localized map in `embed-verify`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GlobalArg {
    None,
    Identity,
    Scale(f64),
    /// Global Mazur map into `ℓ_t`.
    Mazur(f64),
}

impl FromStr for GlobalArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let num = |v: &str| v.parse::<f64>().map_err(|_| format!("bad number in {s:?}"));
        match s.split_once(':') {
            None if s == "none" => Ok(GlobalArg::None),
            None if s == "identity" => Ok(GlobalArg::Identity),
            Some(("scale", v)) => Ok(GlobalArg::Scale(num(v)?)),
            Some(("mazur", v)) => Ok(GlobalArg::Mazur(num(v)?)),
            _ => Err(format!(
                "bad global map {s:?}; expected none, identity, scale:F or mazur:T"
            )),
        }
    }
}

impl fmt::Display for GlobalArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            GlobalArg::None => f.write_str("none"),
            GlobalArg::Identity => f.write_str("identity"),
            GlobalArg::Scale(v) => write!(f, "scale:{v}"),
            GlobalArg::Mazur(t) => write!(f, "mazur:{t}"),
        }
    }
}

impl Serialize for GlobalArg {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Comma-separated list of exponents, e.g. `8,4,2`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainArg(pub Vec<f64>);

impl FromStr for ChainArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("bad exponent {t:?} in chain"))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(ChainArg)
    }
}
