//! Structure dumps: `manifest.json` holds the whole structure with every
//! embedded point set replaced by a reference into `points.csv`, which stores
//! the coordinates of all of them back to back.

use std::fs;
use std::path::Path;

use serde_json::{json, Map, Value};

use super::RecursiveAnnStructure;
use crate::metric::atomic_write;
use crate::{Error, Result};

const MANIFEST: &str = "manifest.json";
const STORE: &str = "points.csv";
const REF_KEY: &str = "points_ref";

fn is_point_set(m: &Map<String, Value>) -> bool {
    m.len() == 5 && ["n", "d", "norm", "ids", "data"].iter().all(|k| m.contains_key(*k))
}

fn extract(v: &mut Value, store: &mut String, rows: &mut usize) {
    match v {
        Value::Object(m) if is_point_set(m) => {
            let d = m["d"].as_u64().unwrap_or(1).max(1) as usize;
            let data = m["data"].as_array().cloned().unwrap_or_default();
            for chunk in data.chunks(d) {
                let line: Vec<String> = chunk
                    .iter()
                    .map(|x| format!("{}", x.as_f64().unwrap_or(f64::NAN)))
                    .collect();
                store.push_str(&line.join(","));
                store.push('\n');
            }
            let n = data.len() / d;
            *v = json!({ REF_KEY: { "offset": *rows, "n": n, "d": d, "norm": m["norm"], "ids": m["ids"] } });
            *rows += n;
        }
        Value::Object(m) => m.values_mut().for_each(|x| extract(x, store, rows)),
        Value::Array(a) => a.iter_mut().for_each(|x| extract(x, store, rows)),
        _ => {}
    }
}

fn restore(v: &mut Value, store: &[Vec<f64>], path: &Path) -> Result<()> {
    let bad = |reason: &str| Error::Format {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    match v {
        Value::Object(m) if m.len() == 1 && m.contains_key(REF_KEY) => {
            let r = &m[REF_KEY];
            let field = |k: &str| {
                r[k].as_u64()
                    .map(|x| x as usize)
                    .ok_or_else(|| bad("malformed point reference"))
            };
            let (offset, n, d) = (field("offset")?, field("n")?, field("d")?);
            let rows = store
                .get(offset..offset + n)
                .ok_or_else(|| bad("point reference out of range"))?;
            let mut data = Vec::with_capacity(n * d);
            for row in rows {
                if row.len() != d {
                    return Err(bad("point store row has the wrong width"));
                }
                data.extend_from_slice(row);
            }
            *v = json!({ "n": n, "d": d, "norm": r["norm"], "ids": r["ids"], "data": data });
        }
        Value::Object(m) => {
            for x in m.values_mut() {
                restore(x, store, path)?;
            }
        }
        Value::Array(a) => {
            for x in a.iter_mut() {
                restore(x, store, path)?;
            }
        }
        _ => {}
    }
    Ok(())
}

pub fn save_structure(dir: &Path, structure: &RecursiveAnnStructure) -> Result<()> {
    let mut manifest = serde_json::to_value(structure)?;
    let mut store = String::new();
    let mut rows = 0usize;
    extract(&mut manifest, &mut store, &mut rows);
    fs::create_dir_all(dir)?;
    atomic_write(&dir.join(STORE), store.as_bytes())?;
    atomic_write(&dir.join(MANIFEST), serde_json::to_string(&manifest)?.as_bytes())
}

pub fn load_structure(dir: &Path) -> Result<RecursiveAnnStructure> {
    let store_path = dir.join(STORE);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(&store_path)?;
    let mut store = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row = record
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Format {
                path: store_path.clone(),
                reason: e.to_string(),
            })?;
        store.push(row);
    }
    let mut manifest: Value = serde_json::from_slice(&fs::read(dir.join(MANIFEST))?)?;
    restore(&mut manifest, &store, &store_path)?;
    Ok(serde_json::from_value(manifest)?)
}
