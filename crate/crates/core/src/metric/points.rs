use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{distance, NormExponent};
use crate::{Error, Result};

/// `n × d` matrix of finite reals tagged with a norm exponent, one stable
/// id per row. Rows are stored contiguously.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPointSet")]
pub struct PointSet {
    n: usize,
    d: usize,
    norm: NormExponent,
    ids: Vec<u64>,
    data: Vec<f64>,
}

#[derive(Deserialize)]
struct RawPointSet {
    n: usize,
    d: usize,
    norm: NormExponent,
    ids: Vec<u64>,
    data: Vec<f64>,
}

impl TryFrom<RawPointSet> for PointSet {
    type Error = Error;

    fn try_from(raw: RawPointSet) -> Result<Self> {
        if raw.n * raw.d != raw.data.len() {
            return Err(Error::param(format!(
                "point set declares {}x{} but carries {} values",
                raw.n,
                raw.d,
                raw.data.len()
            )));
        }
        PointSet::with_ids(raw.data, raw.d, raw.norm, raw.ids)
    }
}

impl PointSet {
    /// Row-major `data` with ids `0..n`.
    pub fn new(data: Vec<f64>, d: usize, norm: NormExponent) -> Result<Self> {
        let n = data.len().checked_div(d).unwrap_or(0);
        PointSet::with_ids(data, d, norm, (0..n as u64).collect())
    }

    pub fn with_ids(data: Vec<f64>, d: usize, norm: NormExponent, ids: Vec<u64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::param("dimension must be at least 1"));
        }
        if data.is_empty() {
            return Err(Error::EmptySet);
        }
        if !data.len().is_multiple_of(d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: data.len() % d,
            });
        }
        let n = data.len() / d;
        if ids.len() != n {
            return Err(Error::param(format!("{} ids for {} points", ids.len(), n)));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / d,
                col: pos % d,
            });
        }
        let mut seen = HashSet::with_capacity(n);
        for &id in &ids {
            if !seen.insert(id) {
                return Err(Error::DuplicateId(id));
            }
        }
        Ok(PointSet { n, d, norm, ids, data })
    }

    pub fn from_rows(rows: &[Vec<f64>], norm: NormExponent) -> Result<Self> {
        let d = rows.first().map(Vec::len).ok_or(Error::EmptySet)?;
        let mut data = Vec::with_capacity(rows.len() * d);
        for row in rows {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        PointSet::new(data, d, norm)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn norm(&self) -> NormExponent {
        self.norm
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn id(&self, row: usize) -> u64 {
        self.ids[row]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    /// Distance between rows `i` and `j` under the set's norm.
    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        distance(self.row(i), self.row(j), self.norm)
    }

    /// Distance from row `i` to an external vector of matching dimension.
    #[inline]
    pub fn dist_to(&self, i: usize, q: &[f64]) -> f64 {
        distance(self.row(i), q, self.norm)
    }

    /// Same coordinates and ids under a different norm.
    pub fn with_norm(&self, norm: NormExponent) -> PointSet {
        PointSet { norm, ..self.clone() }
    }

    /// Rows `rows` (in the given order), keeping their ids.
    pub fn subset(&self, rows: &[usize]) -> Result<PointSet> {
        let mut data = Vec::with_capacity(rows.len() * self.d);
        let mut ids = Vec::with_capacity(rows.len());
        for &r in rows {
            data.extend_from_slice(self.row(r));
            ids.push(self.ids[r]);
        }
        PointSet::with_ids(data, self.d, self.norm, ids)
    }

    /// Row holding the smallest id.
    pub fn min_id_row(&self) -> usize {
        (0..self.n).min_by_key(|&i| self.ids[i]).unwrap_or(0)
    }

    /// Row index of `id`, if present.
    pub fn row_of(&self, id: u64) -> Option<usize> {
        self.ids.iter().position(|&x| x == id)
    }

    pub fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: v.len(),
            });
        }
        Ok(())
    }
}
