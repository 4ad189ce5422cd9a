//! Binary checkpoint format:
//!
//! ```text
//! "HPO1" | u64 LE metadata length | UTF-8 JSON metadata | payload
//! ```
//!
//! The payload is the concatenation of every tensor as little-endian
//! IEEE-754 doubles; the metadata manifest records each tensor's name,
//! shape and byte range within the payload.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{Params, Tensor};

pub const MAGIC: [u8; 4] = *b"HPO1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset within the payload.
    pub offset: usize,
    /// Byte length.
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub config_hash: String,
    pub seed: u64,
    pub epoch: u64,
    #[serde(default)]
    pub extra: serde_json::Value,
    #[serde(default)]
    pub tensors: Vec<ManifestEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub params: Params,
}

impl Checkpoint {
    pub fn new(config_hash: impl Into<String>, seed: u64, epoch: u64, params: Params) -> Self {
        Self {
            meta: CheckpointMeta {
                config_hash: config_hash.into(),
                seed,
                epoch,
                extra: serde_json::Value::Null,
                tensors: Vec::new(),
            },
            params,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut meta = self.meta.clone();
        meta.tensors.clear();
        let mut payload = Vec::new();
        for (name, t) in self.params.iter() {
            t.check_finite(name)?;
            let offset = payload.len();
            for v in t.data() {
                payload.extend_from_slice(&v.to_le_bytes());
            }
            meta.tensors.push(ManifestEntry {
                name: name.clone(),
                shape: t.shape().to_vec(),
                offset,
                len: payload.len() - offset,
            });
        }
        let json = serde_json::to_vec(&meta)?;
        let mut out = Vec::with_capacity(12 + json.len() + payload.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&payload);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 {
            return Err(Error::Truncated("missing magic".into()));
        }
        let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
        if magic != MAGIC {
            return Err(Error::BadMagic(magic));
        }
        if bytes.len() < 12 {
            return Err(Error::Truncated("missing metadata length".into()));
        }
        let meta_len = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes")) as usize;
        let meta_end = 12usize
            .checked_add(meta_len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| Error::Truncated("metadata extends past end of file".into()))?;
        let meta: CheckpointMeta = serde_json::from_slice(&bytes[12..meta_end])?;
        let payload = &bytes[meta_end..];

        let mut spans: Vec<(usize, usize, &str)> = Vec::new();
        let mut params = Params::new();
        for e in &meta.tensors {
            let n: usize = e.shape.iter().product();
            if e.shape.is_empty() || n * 8 != e.len {
                return Err(Error::Manifest(format!(
                    "tensor `{}` has shape {:?} but {} bytes",
                    e.name, e.shape, e.len
                )));
            }
            let end = e.offset.saturating_add(e.len);
            if end > payload.len() {
                return Err(Error::Truncated(format!(
                    "tensor `{}` ends at byte {end}, payload has {}",
                    e.name,
                    payload.len()
                )));
            }
            spans.push((e.offset, end, &e.name));
            let data = payload[e.offset..end]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            if params.contains(&e.name) {
                return Err(Error::Manifest(format!("tensor `{}` listed twice", e.name)));
            }
            params.insert(e.name.clone(), Tensor::new(e.shape.clone(), data)?);
        }
        spans.sort_unstable();
        for w in spans.windows(2) {
            if w[1].0 < w[0].1 {
                return Err(Error::Manifest(format!(
                    "tensors `{}` and `{}` overlap",
                    w[0].2, w[1].2
                )));
            }
        }
        Ok(Self { meta, params })
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, ckpt.to_bytes()?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}

/// Loads and checks the stored config hash against `expected`.
pub fn load_checkpoint_checked(path: impl AsRef<Path>, expected_hash: &str) -> Result<Checkpoint> {
    let c = load_checkpoint(path)?;
    if c.meta.config_hash != expected_hash {
        return Err(Error::ConfigMismatch {
            checkpoint: c.meta.config_hash,
            current: expected_hash.to_string(),
        });
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let mut p = Params::new();
        p.insert("a.w", Tensor::matrix(2, 2, vec![0.1, -2.5, 1e-300, 3.0]).unwrap());
        p.insert("b", Tensor::vector(vec![std::f64::consts::PI]));
        Checkpoint::new("abc123", 7, 3, p)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let c = sample();
        let back = Checkpoint::from_bytes(&c.to_bytes().unwrap()).unwrap();
        assert_eq!(back.params, c.params);
        for (name, t) in c.params.iter() {
            let u = back.params.get(name).unwrap();
            for (x, y) in t.data().iter().zip(u.data()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        assert_eq!(back.meta.seed, 7);
        assert_eq!(back.meta.tensors.len(), 2);
    }

    #[test]
    fn bad_magic() {
        let mut b = sample().to_bytes().unwrap();
        b[..4].copy_from_slice(b"XXXX");
        assert!(matches!(Checkpoint::from_bytes(&b), Err(Error::BadMagic(m)) if &m == b"XXXX"));
    }

    #[test]
    fn truncated_payload() {
        let b = sample().to_bytes().unwrap();
        assert!(matches!(
            Checkpoint::from_bytes(&b[..b.len() - 3]),
            Err(Error::Truncated(_))
        ));
        assert!(matches!(Checkpoint::from_bytes(&b[..6]), Err(Error::Truncated(_))));
    }

    #[test]
    fn manifest_shape_mismatch() {
        let c = sample();
        let bytes = c.to_bytes().unwrap();
        let meta_len = u64::from_le_bytes(bytes[4..12].try_into().unwrap()) as usize;
        let mut meta: CheckpointMeta = serde_json::from_slice(&bytes[12..12 + meta_len]).unwrap();
        meta.tensors[0].shape = vec![3, 2];
        let json = serde_json::to_vec(&meta).unwrap();
        let mut out = b"HPO1".to_vec();
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&bytes[12 + meta_len..]);
        assert!(matches!(Checkpoint::from_bytes(&out), Err(Error::Manifest(_))));
    }

    #[test]
    fn config_hash_mismatch_names_both() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&sample(), &path).unwrap();
        let err = load_checkpoint_checked(&path, "zzz999").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("abc123") && msg.contains("zzz999"), "{msg}");
        assert!(load_checkpoint_checked(&path, "abc123").is_ok());
    }
}
