//! Point-set files: a headerless CSV with one point per row plus a JSON
//! sidecar `{"n", "d", "p", "ids"}` next to it (same stem, `.json`).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{NormExponent, PointSet};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointSetHeader {
    pub n: usize,
    pub d: usize,
    pub p: NormExponent,
    pub ids: Vec<u64>,
    /// Free-form provenance (generator config, seed). Ignored by readers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// Write `bytes` to `path` through a temp file in the same directory and a rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Nine significant digits in scientific notation; `inf`, `-inf` and `nan`
/// for non-finite values.
pub fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.8e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Atomically write `# `-prefixed comment lines followed by `body`.
pub fn write_commented(path: &Path, comments: &[String], body: &str) -> Result<()> {
    let mut out = String::with_capacity(body.len() + 64 * comments.len());
    for c in comments {
        out.push_str("# ");
        out.push_str(c);
        out.push('\n');
    }
    out.push_str(body);
    atomic_write(path, out.as_bytes())
}

/// Coordinates are written with Rust's shortest round-trip formatting, so a
/// read-back reproduces every value bit for bit.
pub fn write_point_set(csv_path: &Path, points: &PointSet, config: Option<serde_json::Value>) -> Result<()> {
    let mut body = String::with_capacity(points.len() * points.dim() * 12);
    for row in points.rows() {
        let mut first = true;
        for v in row {
            if !first {
                body.push(',');
            }
            first = false;
            body.push_str(&format!("{v}"));
        }
        body.push('\n');
    }
    let header = PointSetHeader {
        n: points.len(),
        d: points.dim(),
        p: points.norm(),
        ids: points.ids().to_vec(),
        config,
    };
    atomic_write(csv_path, body.as_bytes())?;
    atomic_write(
        &sidecar_path(csv_path),
        serde_json::to_string_pretty(&header)?.as_bytes(),
    )?;
    Ok(())
}

pub fn read_point_set(csv_path: &Path) -> Result<PointSet> {
    let side = sidecar_path(csv_path);
    let header: PointSetHeader = serde_json::from_slice(&fs::read(&side)?)?;
    let fail = |reason: String| Error::Format {
        path: csv_path.to_path_buf(),
        reason,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(csv_path)?;
    let mut data = Vec::with_capacity(header.n * header.d);
    let mut rows = 0usize;
    for record in reader.records() {
        let record = record?;
        if record.len() != header.d {
            return Err(fail(format!(
                "row {rows} has {} columns, sidecar says d = {}",
                record.len(),
                header.d
            )));
        }
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| fail(format!("row {rows}: cannot parse {field:?}")))?;
            data.push(v);
        }
        rows += 1;
    }
    if rows != header.n {
        return Err(fail(format!("{rows} rows, sidecar says n = {}", header.n)));
    }
    PointSet::with_ids(data, header.d, header.p, header.ids)
}
