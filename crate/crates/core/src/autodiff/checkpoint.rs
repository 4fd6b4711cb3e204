//! Named-tensor checkpoints.
//!
//! A checkpoint directory holds two files:
//!
//! * `params.csv`: one line per tensor, `name,RxC,v0,v1,...` with values in
//!   row-major order.
//! * `manifest.json`: `{"format": .., "tensors": [{"name", "shape"}], "metadata": ..}`
//!   where `metadata` is free-form (the model stores its architecture there).

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Matrix, ParamStore};
use crate::error::{Error, Result};
use crate::io;

pub const PARAMS_FILE: &str = "params.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
const FORMAT_TAG: &str = "dmbn-named-tensors/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: [usize; 2],
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    tensors: Vec<TensorEntry>,
    metadata: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ParamStore,
    pub metadata: serde_json::Value,
}

pub fn save_checkpoint(dir: &Path, params: &ParamStore, metadata: serde_json::Value) -> Result<()> {
    io::create_dir(dir)?;
    let mut csv = String::new();
    let mut tensors = Vec::with_capacity(params.len());
    for (name, m) in params.iter() {
        write!(csv, "{name},{}x{}", m.rows(), m.cols()).unwrap();
        for v in m.as_slice() {
            write!(csv, ",{v}").unwrap();
        }
        csv.push('\n');
        tensors.push(TensorEntry {
            name: name.to_owned(),
            shape: m.shape(),
        });
    }
    io::write_text(&dir.join(PARAMS_FILE), &csv)?;
    let manifest = Manifest {
        format: FORMAT_TAG.to_owned(),
        tensors,
        metadata,
    };
    io::write_json(&dir.join(MANIFEST_FILE), &manifest)
}

pub fn load_checkpoint(dir: &Path) -> Result<Checkpoint> {
    let manifest: Manifest = io::read_json(&dir.join(MANIFEST_FILE))?;
    if manifest.format != FORMAT_TAG {
        return Err(Error::Format(format!(
            "unsupported checkpoint format `{}`",
            manifest.format
        )));
    }
    let csv_path = dir.join(PARAMS_FILE);
    let text = io::read_text(&csv_path)?;
    let bad =
        |line: usize, msg: &str| Error::Format(format!("{}:{line}: {msg}", csv_path.display()));

    let mut params = ParamStore::new();
    let mut lines = text.lines().filter(|l| !l.is_empty()).enumerate();
    for entry in &manifest.tensors {
        let (n, line) = lines
            .next()
            .ok_or_else(|| bad(0, &format!("missing tensor `{}`", entry.name)))?;
        let mut cells = line.split(',');
        let name = cells.next().unwrap_or_default();
        if name != entry.name {
            return Err(bad(
                n + 1,
                &format!("expected tensor `{}`, found `{name}`", entry.name),
            ));
        }
        let shape = cells
            .next()
            .and_then(|s| s.split_once('x'))
            .and_then(|(r, c)| Some([r.parse().ok()?, c.parse().ok()?]))
            .ok_or_else(|| bad(n + 1, "malformed shape"))?;
        if shape != entry.shape {
            return Err(bad(n + 1, "shape disagrees with manifest"));
        }
        let values = cells
            .map(str::parse::<f64>)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| bad(n + 1, &e.to_string()))?;
        if values.len() != shape[0] * shape[1] {
            return Err(bad(n + 1, "value count disagrees with shape"));
        }
        params.add(name, Matrix::from_vec(shape[0], shape[1], values));
    }
    if let Some((n, _)) = lines.next() {
        return Err(bad(n + 1, "tensor not listed in manifest"));
    }
    Ok(Checkpoint {
        params,
        metadata: manifest.metadata,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_bits_and_metadata() {
        let dir = tempfile::tempdir().unwrap();
        let mut params = ParamStore::new();
        params.add(
            "w",
            Matrix::from_fn(2, 3, |i, j| (i as f64 + 1.0) / (j as f64 + 3.0)),
        );
        params.add("alpha", Matrix::scalar(-1e-300));
        let meta = serde_json::json!({"heads": 2});
        save_checkpoint(dir.path(), &params, meta.clone()).unwrap();
        let back = load_checkpoint(dir.path()).unwrap();
        assert_eq!(back.params, params);
        assert_eq!(back.metadata, meta);
    }

    #[test]
    fn shape_disagreement_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut params = ParamStore::new();
        params.add("w", Matrix::zeros(2, 2));
        save_checkpoint(dir.path(), &params, serde_json::Value::Null).unwrap();
        let csv = dir.path().join(PARAMS_FILE);
        std::fs::write(&csv, "w,1x4,0,0,0,0\n").unwrap();
        assert!(load_checkpoint(dir.path()).is_err());
    }
}
