//! Checkpoint layout:
//!
//! ```text
//! "TQCK" | u32 version | u32 header length | JSON header
//!        | f32 params | u64 adam step | f32 m | f32 v | sha256 of all preceding bytes
//! ```
//!
//! All integers and floats are little-endian.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{AdamConfig, AdamState, NeuralError, QNetwork, QNetworkConfig};

const MAGIC: &[u8; 4] = b"TQCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub d: usize,
    pub perspective_convention: String,
    pub config_hash: String,
    pub seed: u64,
    pub step: u64,
    pub init: String,
    #[serde(default)]
    pub extra: serde_json::Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    architecture: QNetworkConfig,
    adam: AdamConfig,
    parameter_count: usize,
    metadata: CheckpointMeta,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub net: QNetwork<f32>,
    pub adam: AdamState<f32>,
    pub meta: CheckpointMeta,
}

fn f32s(out: &mut Vec<u8>, xs: &[f32]) {
    for x in xs {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

pub fn save_checkpoint(
    path: &Path,
    net: &QNetwork<f32>,
    adam: &AdamState<f32>,
    meta: &CheckpointMeta,
) -> Result<(), NeuralError> {
    let header = Header {
        architecture: net.config().clone(),
        adam: adam.config,
        parameter_count: net.parameter_count(),
        metadata: meta.clone(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| NeuralError::CorruptFile(e.to_string()))?;
    let n = net.parameter_count();
    let mut buf = Vec::with_capacity(12 + json.len() + 12 * n + 40);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&json);
    f32s(&mut buf, net.params());
    buf.extend_from_slice(&adam.step.to_le_bytes());
    f32s(&mut buf, &adam.m);
    f32s(&mut buf, &adam.v);
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, buf)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NeuralError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| NeuralError::CorruptFile("truncated".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, NeuralError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>, NeuralError> {
        Ok(self.take(4 * n)?.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

/// Reads a checkpoint; when `expected_d` is given, a checkpoint trained for a
/// different distance is rejected with `VersionMismatch`.
pub fn load_checkpoint(path: &Path, expected_d: Option<usize>) -> Result<Checkpoint, NeuralError> {
    let bytes = fs::read(path)?;
    if bytes.len() < 44 {
        return Err(NeuralError::CorruptFile("file too short".into()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(NeuralError::CorruptFile("checksum mismatch".into()));
    }
    let mut cur = Cursor { bytes: body, pos: 0 };
    if cur.take(4)? != MAGIC {
        return Err(NeuralError::CorruptFile("bad magic".into()));
    }
    let version = cur.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(NeuralError::VersionMismatch(format!("format {version}, expected {CHECKPOINT_VERSION}")));
    }
    let len = cur.u32()? as usize;
    let header: Header =
        serde_json::from_slice(cur.take(len)?).map_err(|e| NeuralError::CorruptFile(e.to_string()))?;
    if let Some(d) = expected_d {
        if header.architecture.d != d || header.metadata.d != d {
            return Err(NeuralError::VersionMismatch(format!(
                "checkpoint is for d={}, session uses d={d}",
                header.architecture.d
            )));
        }
    }
    let mut net = QNetwork::<f32>::zeros(header.architecture)?;
    let n = net.parameter_count();
    if n != header.parameter_count {
        return Err(NeuralError::CorruptFile(format!("{} parameters declared, {n} expected", header.parameter_count)));
    }
    net.set_params(cur.f32s(n)?)?;
    let step = u64::from_le_bytes(cur.take(8)?.try_into().unwrap());
    let m = cur.f32s(n)?;
    let v = cur.f32s(n)?;
    if cur.pos != body.len() {
        return Err(NeuralError::CorruptFile("trailing bytes".into()));
    }
    Ok(Checkpoint { net, adam: AdamState { config: header.adam, step, m, v }, meta: header.metadata })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::worker_stream;
    use rand::Rng;

    fn meta(d: usize) -> CheckpointMeta {
        CheckpointMeta {
            d,
            perspective_convention: crate::perspectives::PERSPECTIVE_CONVENTION.into(),
            config_hash: "abc".into(),
            seed: 7,
            step: 0,
            init: "uniform".into(),
            extra: serde_json::Value::Null,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ckpt");
        let mut rng = worker_stream(1, 0);
        let net = QNetwork::<f32>::new(QNetworkConfig::desk(3), &mut rng).unwrap();
        let mut adam = AdamState::new(net.parameter_count(), AdamConfig::default());
        let mut p = net.params().to_vec();
        let g: Vec<f32> = (0..p.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        adam.step(&mut p, &g).unwrap();
        save_checkpoint(&path, &net, &adam, &meta(3)).unwrap();
        let ck = load_checkpoint(&path, Some(3)).unwrap();
        assert_eq!(ck.adam, adam);
        assert_eq!(ck.meta, meta(3));
        let input: Vec<f32> = (0..18).map(|k| (k % 2) as f32).collect();
        let a = net.predict(&input, 1).unwrap();
        let b = ck.net.predict(&input, 1).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn distance_and_corruption_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ckpt");
        let net = QNetwork::<f32>::zeros(QNetworkConfig::desk(5)).unwrap();
        let adam = AdamState::new(net.parameter_count(), AdamConfig::default());
        save_checkpoint(&path, &net, &adam, &meta(5)).unwrap();
        assert!(matches!(load_checkpoint(&path, Some(7)), Err(NeuralError::VersionMismatch(_))));
        let mut bytes = fs::read(&path).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x10;
        fs::write(&path, bytes).unwrap();
        assert!(matches!(load_checkpoint(&path, None), Err(NeuralError::CorruptFile(_))));
    }
}
