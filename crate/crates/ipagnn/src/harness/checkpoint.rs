//! Checkpoint files: a flat list of named tensors (name, shape, raw
//! little-endian values) plus scalar metadata, finished with a SHA-256
//! checksum over the whole payload.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::autodiff::{Element, Tensor};
use crate::models::ModelKind;

const MAGIC: &[u8; 8] = b"IPAGNNCK";
const VERSION: u8 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    BadVersion(u8),
    #[error("checksum mismatch: file is corrupt")]
    BadChecksum,
    #[error("checkpoint stores {stored}-byte values but {requested}-byte were requested")]
    WrongPrecision { stored: u8, requested: u8 },
    #[error("unknown model kind tag {0}")]
    BadKind(u8),
    #[error("truncated checkpoint")]
    Truncated,
}

/// Everything a checkpoint stores.
#[derive(Clone, Debug)]
pub struct CheckpointData<E> {
    pub kind: ModelKind,
    pub hidden: usize,
    /// Scalar metadata (step counters, learning rate, seeds).
    pub meta: Vec<(String, f64)>,
    pub tensors: Vec<(String, Tensor<E>)>,
}

impl<E: Element> CheckpointData<E> {
    pub fn meta_value(&self, key: &str) -> Option<f64> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }
}

fn push_str(out: &mut Vec<u8>, s: &str) {
    let bytes = s.as_bytes();
    out.extend_from_slice(&(bytes.len() as u16).to_le_bytes());
    out.extend_from_slice(bytes);
}

pub fn save_checkpoint<E: Element>(
    path: &Path,
    data: &CheckpointData<E>,
) -> Result<(), CheckpointError> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.push(VERSION);
    buf.push(E::BYTES as u8);
    buf.push(data.kind.tag());
    buf.extend_from_slice(&(data.hidden as u32).to_le_bytes());

    buf.extend_from_slice(&(data.meta.len() as u32).to_le_bytes());
    for (key, value) in &data.meta {
        push_str(&mut buf, key);
        buf.extend_from_slice(&value.to_le_bytes());
    }

    buf.extend_from_slice(&(data.tensors.len() as u32).to_le_bytes());
    for (name, tensor) in &data.tensors {
        push_str(&mut buf, name);
        buf.push(tensor.rank() as u8);
        for &d in tensor.shape() {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in tensor.data() {
            v.write_le(&mut buf);
        }
    }

    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);

    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|source| CheckpointError::Io {
                path: path.to_path_buf(),
                source,
            })?;
        }
    }
    let mut file = std::fs::File::create(path).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    file.write_all(&buf).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.pos + n > self.buf.len() {
            return Err(CheckpointError::Truncated);
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, CheckpointError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String, CheckpointError> {
        let len = self.u16()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| CheckpointError::Truncated)
    }
}

/// Byte width of the stored element type, without reading the whole file.
pub fn stored_precision(path: &Path) -> Result<u8, CheckpointError> {
    let mut file = std::fs::File::open(path).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut head = [0u8; 10];
    file.read_exact(&mut head)
        .map_err(|_| CheckpointError::Truncated)?;
    if &head[..8] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    if head[8] != VERSION {
        return Err(CheckpointError::BadVersion(head[8]));
    }
    Ok(head[9])
}

pub fn load_checkpoint<E: Element>(path: &Path) -> Result<CheckpointData<E>, CheckpointError> {
    let buf = std::fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if buf.len() < MAGIC.len() + 32 {
        return Err(CheckpointError::Truncated);
    }
    let (payload, digest) = buf.split_at(buf.len() - 32);
    if Sha256::digest(payload).as_slice() != digest {
        return Err(CheckpointError::BadChecksum);
    }

    let mut r = Reader {
        buf: payload,
        pos: 0,
    };
    if r.take(8)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u8()?;
    if version != VERSION {
        return Err(CheckpointError::BadVersion(version));
    }
    let precision = r.u8()?;
    if precision as usize != E::BYTES {
        return Err(CheckpointError::WrongPrecision {
            stored: precision,
            requested: E::BYTES as u8,
        });
    }
    let kind_tag = r.u8()?;
    let kind = ModelKind::from_tag(kind_tag).ok_or(CheckpointError::BadKind(kind_tag))?;
    let hidden = r.u32()? as usize;

    let meta_count = r.u32()? as usize;
    let mut meta = Vec::with_capacity(meta_count);
    for _ in 0..meta_count {
        let key = r.string()?;
        let value = r.f64()?;
        meta.push((key, value));
    }

    let tensor_count = r.u32()? as usize;
    let mut tensors = Vec::with_capacity(tensor_count);
    for _ in 0..tensor_count {
        let name = r.string()?;
        let rank = r.u8()? as usize;
        if rank > 3 {
            return Err(CheckpointError::Truncated);
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32()? as usize);
        }
        let len: usize = if shape.is_empty() {
            1
        } else {
            shape.iter().product()
        };
        let raw = r.take(len * E::BYTES)?;
        let data = raw.chunks_exact(E::BYTES).map(E::read_le).collect();
        tensors.push((name, Tensor::from_vec(&shape, data)));
    }

    Ok(CheckpointData {
        kind,
        hidden,
        meta,
        tensors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CheckpointData<f64> {
        CheckpointData {
            kind: ModelKind::IpaGnn,
            hidden: 8,
            meta: vec![("adam.step".into(), 12.0), ("lr".into(), 1e-3)],
            tensors: vec![
                ("w".into(), Tensor::from_vec(&[2, 3], vec![1.0, -2.0, 0.5, 3.0, 4.0, -5.5])),
                ("b".into(), Tensor::from_vec(&[3], vec![0.0, 0.1, 0.2])),
            ],
        }
    }

    #[test]
    fn checkpoints_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let data = sample();
        save_checkpoint(&path, &data).unwrap();
        assert_eq!(stored_precision(&path).unwrap(), 8);
        let back: CheckpointData<f64> = load_checkpoint(&path).unwrap();
        assert_eq!(back.kind, data.kind);
        assert_eq!(back.hidden, data.hidden);
        assert_eq!(back.meta, data.meta);
        assert_eq!(back.tensors.len(), 2);
        assert_eq!(back.tensors[0].1.data(), data.tensors[0].1.data());
    }

    #[test]
    fn corruption_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&path, &sample()).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0xff;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_checkpoint::<f64>(&path),
            Err(CheckpointError::BadChecksum)
        ));
    }

    #[test]
    fn precision_mismatch_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&path, &sample()).unwrap();
        assert!(matches!(
            load_checkpoint::<f32>(&path),
            Err(CheckpointError::WrongPrecision {
                stored: 8,
                requested: 4
            })
        ));
    }
}
