use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
}

/// Named, ordered collection of trainable tensors.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: Vec<Parameter>,
    index: BTreeMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::InvalidArgument(format!("duplicate parameter {name}")));
        }
        let id = ParamId(self.params.len());
        let grad = Tensor::zeros(value.shape());
        self.params.push(Parameter {
            name: name.clone(),
            value,
            grad,
        });
        self.index.insert(name, id);
        Ok(id)
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.iter_mut()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    pub fn scale_grads(&mut self, factor: f64) {
        for p in &mut self.params {
            p.grad.data_mut().iter_mut().for_each(|g| *g *= factor);
        }
    }

    pub fn num_values(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.value.all_finite())
    }

    /// Copy every value from `other`, which must have identical names and shapes.
    pub fn copy_values_from(&mut self, other: &ParamStore) -> Result<()> {
        if other.params.len() != self.params.len() {
            return Err(Error::Shape("parameter count differs".into()));
        }
        for (dst, src) in self.params.iter_mut().zip(&other.params) {
            if dst.name != src.name || dst.value.shape() != src.value.shape() {
                return Err(Error::Shape(format!("parameter {} differs", dst.name)));
            }
            dst.value = src.value.clone();
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    shape: Vec<usize>,
    /// Byte offset into the blob.
    offset: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    format: u32,
    meta: serde_json::Value,
    params: Vec<ManifestEntry>,
}

const CHECKPOINT_FORMAT: u32 = 1;

/// Serialize parameters as `[u64 LE manifest length][manifest JSON][f64 LE blob]`.
///
/// Parameters are written in sorted name order; `meta` carries whatever the
/// owning model needs to rebuild itself (config, vocabularies).
pub fn encode_checkpoint(store: &ParamStore, meta: serde_json::Value) -> Result<Vec<u8>> {
    let mut entries = Vec::with_capacity(store.len());
    let mut blob = Vec::with_capacity(store.num_values() * 8);
    for (name, id) in &store.index {
        let p = store.get(*id);
        entries.push(ManifestEntry {
            name: name.clone(),
            shape: p.value.shape().to_vec(),
            offset: blob.len(),
        });
        for v in p.value.data() {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    let manifest = Manifest {
        format: CHECKPOINT_FORMAT,
        meta,
        params: entries,
    };
    let header = serde_json::to_vec(&manifest)?;
    let mut out = Vec::with_capacity(8 + header.len() + blob.len());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&blob);
    Ok(out)
}

/// Read the `meta` section without touching the parameter blob.
pub fn checkpoint_meta(bytes: &[u8]) -> Result<serde_json::Value> {
    Ok(read_manifest(bytes)?.0.meta)
}

fn read_manifest(bytes: &[u8]) -> Result<(Manifest, &[u8])> {
    if bytes.len() < 8 {
        return Err(Error::Checkpoint("truncated header".into()));
    }
    let len = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
    let end = 8usize
        .checked_add(len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::Checkpoint("manifest length exceeds file".into()))?;
    let manifest: Manifest = serde_json::from_slice(&bytes[8..end])?;
    if manifest.format != CHECKPOINT_FORMAT {
        return Err(Error::Checkpoint(format!(
            "unsupported format {}",
            manifest.format
        )));
    }
    Ok((manifest, &bytes[end..]))
}

/// Load values into an already-constructed store; every name and shape must agree.
pub fn decode_checkpoint_into(bytes: &[u8], store: &mut ParamStore) -> Result<serde_json::Value> {
    let (manifest, blob) = read_manifest(bytes)?;
    if manifest.params.len() != store.len() {
        return Err(Error::Checkpoint(format!(
            "checkpoint has {} parameters, model expects {}",
            manifest.params.len(),
            store.len()
        )));
    }
    for entry in &manifest.params {
        let id = store
            .id(&entry.name)
            .ok_or_else(|| Error::Checkpoint(format!("unknown parameter {}", entry.name)))?;
        let param = store.get_mut(id);
        if param.value.shape() != entry.shape.as_slice() {
            return Err(Error::Checkpoint(format!(
                "shape mismatch for {}: checkpoint {:?}, model {:?}",
                entry.name,
                entry.shape,
                param.value.shape()
            )));
        }
        let n = param.value.len();
        let bytes = blob
            .get(entry.offset..entry.offset + n * 8)
            .ok_or_else(|| Error::Checkpoint(format!("blob truncated at {}", entry.name)))?;
        for (dst, chunk) in param.value.data_mut().iter_mut().zip(bytes.chunks_exact(8)) {
            *dst = f64::from_le_bytes(chunk.try_into().unwrap());
        }
    }
    Ok(manifest.meta)
}

pub fn save_checkpoint(path: &Path, store: &ParamStore, meta: serde_json::Value) -> Result<()> {
    fs::write(path, encode_checkpoint(store, meta)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> ParamStore {
        let mut s = ParamStore::new();
        s.add("b", Tensor::vector(vec![1.0, -2.5])).unwrap();
        s.add("a", Tensor::matrix(2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap())
            .unwrap();
        s
    }

    #[test]
    fn checkpoint_round_trip() {
        let s = store();
        let bytes = encode_checkpoint(&s, serde_json::json!({"k": 1})).unwrap();
        let mut t = store();
        t.iter_mut().for_each(|p| p.value.fill(0.0));
        let meta = decode_checkpoint_into(&bytes, &mut t).unwrap();
        assert_eq!(meta["k"], 1);
        for (x, y) in s.iter().zip(t.iter()) {
            assert_eq!(x.value, y.value);
        }
    }

    #[test]
    fn manifest_is_sorted_by_name() {
        let bytes = encode_checkpoint(&store(), serde_json::Value::Null).unwrap();
        let (m, blob) = read_manifest(&bytes).unwrap();
        let names: Vec<_> = m.params.iter().map(|e| e.name.as_str()).collect();
        assert_eq!(names, ["a", "b"]);
        assert_eq!(m.params[1].offset, 32);
        assert_eq!(blob.len(), 48);
    }

    #[test]
    fn loader_rejects_shape_disagreement() {
        let bytes = encode_checkpoint(&store(), serde_json::Value::Null).unwrap();
        let mut other = ParamStore::new();
        other.add("b", Tensor::vector(vec![0.0; 3])).unwrap();
        other.add("a", Tensor::zeros(&[2, 2])).unwrap();
        assert!(matches!(
            decode_checkpoint_into(&bytes, &mut other),
            Err(Error::Checkpoint(_))
        ));
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut s = ParamStore::new();
        s.add("w", Tensor::zeros(&[1])).unwrap();
        assert!(s.add("w", Tensor::zeros(&[1])).is_err());
    }
}
