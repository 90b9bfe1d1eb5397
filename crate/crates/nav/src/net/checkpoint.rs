//! Binary checkpoints: a magic header, a JSON metadata block, and the
//! named parameter tensors in little-endian order. Loading validates
//! tensor names and shapes against the receiving network and casts
//! between f32 and f64 storage as needed.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::{ParamGroup, Scalar};

const MAGIC: &[u8; 8] = b"SGNAVCK1";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad checkpoint: {0}")]
    Format(String),
    #[error("metadata error: {0}")]
    Meta(#[from] serde_json::Error),
    #[error("tensor {name}: expected shape {expected:?}, found {found:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("tensor {0} missing from checkpoint")]
    MissingTensor(String),
}

/// One stored tensor; data is held as f64 regardless of on-disk dtype.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// A parsed checkpoint file.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub meta: serde_json::Value,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn read(path: &Path) -> Result<Self, CheckpointError> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(CheckpointError::Format("bad magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(CheckpointError::Format(format!("unsupported version {version}")));
        }
        let meta_len = read_u32(&mut r)? as usize;
        let mut meta_buf = vec![0u8; meta_len];
        r.read_exact(&mut meta_buf)?;
        let meta: serde_json::Value = serde_json::from_slice(&meta_buf)?;
        let count = read_u32(&mut r)? as usize;
        let mut tensors = Vec::with_capacity(count);
        for _ in 0..count {
            let name_len = read_u32(&mut r)? as usize;
            let mut name_buf = vec![0u8; name_len];
            r.read_exact(&mut name_buf)?;
            let name = String::from_utf8(name_buf)
                .map_err(|_| CheckpointError::Format("tensor name not utf-8".into()))?;
            let mut dtype = [0u8; 1];
            r.read_exact(&mut dtype)?;
            let ndim = read_u32(&mut r)? as usize;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                shape.push(read_u32(&mut r)? as usize);
            }
            let len: usize = shape.iter().product();
            let data = match dtype[0] {
                4 => {
                    let mut buf = vec![0u8; len * 4];
                    r.read_exact(&mut buf)?;
                    buf.chunks_exact(4)
                        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                        .collect()
                }
                8 => {
                    let mut buf = vec![0u8; len * 8];
                    r.read_exact(&mut buf)?;
                    buf.chunks_exact(8)
                        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                        .collect()
                }
                d => return Err(CheckpointError::Format(format!("unknown dtype {d}"))),
            };
            tensors.push(NamedTensor { name, shape, data });
        }
        Ok(Self { meta, tensors })
    }

    pub fn tensor(&self, name: &str) -> Option<&NamedTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    /// Copies the stored tensors into `params`, validating every name and
    /// shape. Extra tensors in the file are an error too.
    pub fn restore<F: Scalar, P: ParamGroup<F>>(&self, params: &mut P) -> Result<(), CheckpointError> {
        let expected = params.tensors().len();
        if self.tensors.len() != expected {
            return Err(CheckpointError::Format(format!(
                "tensor count mismatch: file has {}, network has {}",
                self.tensors.len(),
                expected
            )));
        }
        for t in params.tensors_mut() {
            let stored = self
                .tensor(&t.name)
                .ok_or_else(|| CheckpointError::MissingTensor(t.name.clone()))?;
            if stored.shape != t.shape {
                return Err(CheckpointError::ShapeMismatch {
                    name: t.name.clone(),
                    expected: t.shape.clone(),
                    found: stored.shape.clone(),
                });
            }
            for (dst, &src) in t.data.iter_mut().zip(&stored.data) {
                *dst = F::c(src);
            }
        }
        Ok(())
    }
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn write_u32(w: &mut impl Write, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

/// Writes `params` with the given JSON metadata. The on-disk dtype is the
/// element size of `F`.
pub fn save_checkpoint<F: Scalar, P: ParamGroup<F>>(
    path: &Path,
    meta: &serde_json::Value,
    params: &P,
) -> Result<(), CheckpointError> {
    let dtype = std::mem::size_of::<F>() as u8;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    write_u32(&mut w, VERSION)?;
    let meta_buf = serde_json::to_vec(meta)?;
    write_u32(&mut w, meta_buf.len() as u32)?;
    w.write_all(&meta_buf)?;
    let tensors = params.tensors();
    write_u32(&mut w, tensors.len() as u32)?;
    for t in tensors {
        write_u32(&mut w, t.name.len() as u32)?;
        w.write_all(t.name.as_bytes())?;
        w.write_all(&[dtype])?;
        write_u32(&mut w, t.shape.len() as u32)?;
        for &d in &t.shape {
            write_u32(&mut w, d as u32)?;
        }
        for &v in t.data {
            let v = Scalar::to_f64(v);
            match dtype {
                4 => w.write_all(&(v as f32).to_le_bytes())?,
                _ => w.write_all(&v.to_le_bytes())?,
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a checkpoint into `params` and returns its metadata.
pub fn load_checkpoint<F: Scalar, P: ParamGroup<F>>(
    path: &Path,
    params: &mut P,
) -> Result<serde_json::Value, CheckpointError> {
    let ck = Checkpoint::read(path)?;
    ck.restore(params)?;
    Ok(ck.meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{Mlp, MlpSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use serde_json::json;

    #[test]
    fn f64_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let net = Mlp::<f64>::init(&MlpSpec::relu(5, &[8, 4]), &mut rng);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        save_checkpoint(&path, &json!({"kind": "test", "step": 7}), &net).unwrap();
        let mut restored = Mlp::<f64>::init(&MlpSpec::relu(5, &[8, 4]), &mut rng);
        let meta = load_checkpoint(&path, &mut restored).unwrap();
        assert_eq!(meta["kind"], "test");
        assert_eq!(meta["step"], 7);
        for (a, b) in net.tensors().iter().zip(restored.tensors()) {
            assert_eq!(a.name, b.name);
            for (x, y) in a.data.iter().zip(b.data) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn f32_file_loads_into_f64_network() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let net32 = Mlp::<f32>::init(&MlpSpec::relu(3, &[4]), &mut rng);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net32.ckpt");
        save_checkpoint(&path, &json!({}), &net32).unwrap();
        let mut net64 = Mlp::<f64>::init(&MlpSpec::relu(3, &[4]), &mut rng);
        load_checkpoint(&path, &mut net64).unwrap();
        for (a, b) in net32.tensors().iter().zip(net64.tensors()) {
            for (x, y) in a.data.iter().zip(b.data) {
                assert_eq!(*x as f64, *y);
            }
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let net = Mlp::<f64>::init(&MlpSpec::relu(3, &[4]), &mut rng);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        save_checkpoint(&path, &json!({}), &net).unwrap();
        let mut other = Mlp::<f64>::init(&MlpSpec::relu(3, &[5]), &mut rng);
        let err = load_checkpoint(&path, &mut other).unwrap_err();
        assert!(matches!(err, CheckpointError::ShapeMismatch { .. }), "{err}");
    }

    #[test]
    fn truncated_file_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let net = Mlp::<f64>::init(&MlpSpec::relu(3, &[4]), &mut rng);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        save_checkpoint(&path, &json!({}), &net).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 10]).unwrap();
        let mut restored = Mlp::<f64>::init(&MlpSpec::relu(3, &[4]), &mut rng);
        assert!(load_checkpoint(&path, &mut restored).is_err());
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.ckpt");
        std::fs::write(&path, b"NOTACKPT0000").unwrap();
        assert!(Checkpoint::read(&path).is_err());
    }
}
