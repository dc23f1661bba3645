//! Binary checkpoint layout (all integers little-endian):
//!
//! ```text
//! magic "PGSUMCKP" | version u32
//! hidden, embedding, vocab, max_decode_len, max_input_len: u64 each
//! step u64 | best_valid_loss f64 | steps_since_best u64
//! tensor count u32, then per tensor: name length u16, name, rows u64, cols u64, values f64
//! SHA-256 of everything above
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{TrainError, TrainState};
use crate::autodiff::Tensor;
use crate::model::{ModelConfig, ModelParams, ParamKey};

const MAGIC: &[u8; 8] = b"PGSUMCKP";
pub const CHECKPOINT_VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

pub fn encode_checkpoint(state: &TrainState) -> Vec<u8> {
    let cfg = state.params.config();
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for v in [
        cfg.hidden_size,
        cfg.embedding_size,
        cfg.vocab_size,
        cfg.max_decode_len,
        cfg.max_input_len,
    ] {
        buf.extend_from_slice(&(v as u64).to_le_bytes());
    }
    buf.extend_from_slice(&(state.step as u64).to_le_bytes());
    buf.extend_from_slice(&state.best_valid_loss.to_le_bytes());
    buf.extend_from_slice(&(state.steps_since_best as u64).to_le_bytes());
    buf.extend_from_slice(&(ParamKey::ALL.len() as u32).to_le_bytes());
    for key in ParamKey::ALL {
        let t = state.params.get(key);
        let name = key.name().as_bytes();
        buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
        buf.extend_from_slice(name);
        buf.extend_from_slice(&(t.rows() as u64).to_le_bytes());
        buf.extend_from_slice(&(t.cols() as u64).to_le_bytes());
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], TrainError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| TrainError::Checkpoint("truncated".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u16(&mut self) -> Result<u16, TrainError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, TrainError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, TrainError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn usize(&mut self) -> Result<usize, TrainError> {
        usize::try_from(self.u64()?).map_err(|_| TrainError::Checkpoint("size overflow".into()))
    }

    fn f64(&mut self) -> Result<f64, TrainError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<TrainState, TrainError> {
    if bytes.len() < MAGIC.len() + 4 + DIGEST_LEN {
        return Err(TrainError::Checkpoint("truncated".into()));
    }
    if &bytes[..MAGIC.len()] != MAGIC {
        return Err(TrainError::Checkpoint("not a checkpoint file".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(TrainError::Checkpoint(format!(
            "version {version}, expected {CHECKPOINT_VERSION}"
        )));
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(body).as_slice() != digest {
        return Err(TrainError::Checkpoint("checksum mismatch (corrupt or truncated)".into()));
    }

    let mut r = Reader { bytes: body, pos: 12 };
    let config = ModelConfig {
        hidden_size: r.usize()?,
        embedding_size: r.usize()?,
        vocab_size: r.usize()?,
        max_decode_len: r.usize()?,
        max_input_len: r.usize()?,
    };
    config
        .validate()
        .map_err(|e| TrainError::Checkpoint(e.to_string()))?;
    let step = r.usize()?;
    let best_valid_loss = r.f64()?;
    let steps_since_best = r.usize()?;
    let count = r.u32()? as usize;
    if count != ParamKey::ALL.len() {
        return Err(TrainError::Checkpoint(format!("{count} tensors, expected {}", ParamKey::ALL.len())));
    }
    let mut tensors = Vec::with_capacity(count);
    for key in ParamKey::ALL {
        let len = r.u16()? as usize;
        let name = r.take(len)?;
        if name != key.name().as_bytes() {
            return Err(TrainError::Checkpoint(format!(
                "expected tensor {}, found {}",
                key.name(),
                String::from_utf8_lossy(name)
            )));
        }
        let rows = r.usize()?;
        let cols = r.usize()?;
        if [rows, cols] != key.shape(&config) {
            return Err(TrainError::Checkpoint(format!("tensor {} has wrong shape", key.name())));
        }
        let data = (0..rows * cols).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
        tensors.push(Tensor::matrix(rows, cols, data));
    }
    if r.pos != body.len() {
        return Err(TrainError::Checkpoint("trailing bytes".into()));
    }
    let params = ModelParams::from_tensors(config, tensors).map_err(|e| TrainError::Checkpoint(e.to_string()))?;
    Ok(TrainState {
        params,
        step,
        best_valid_loss,
        steps_since_best,
    })
}

/// Writes through a temporary sibling file and renames, so a failed write
/// never leaves a partial checkpoint at `path`.
pub fn save_checkpoint(state: &TrainState, path: &Path) -> Result<(), TrainError> {
    let bytes = encode_checkpoint(state);
    let io_err = |source| TrainError::Io {
        path: path.to_path_buf(),
        source,
    };
    let tmp = path.with_extension("ckpt.tmp");
    let mut f = fs::File::create(&tmp).map_err(io_err)?;
    f.write_all(&bytes).map_err(io_err)?;
    f.sync_all().map_err(io_err)?;
    fs::rename(&tmp, path).map_err(io_err)
}

pub fn load_checkpoint(path: &Path) -> Result<TrainState, TrainError> {
    let bytes = fs::read(path).map_err(|source| TrainError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_checkpoint(&bytes)
}
