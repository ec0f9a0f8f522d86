//! The `.lnck` checkpoint format.
//!
//! All integers are little-endian.
//!
//! ```text
//! "LNCK"                      4 bytes
//! format version              u32
//! num_classes                 u32
//! parameter count             u32
//! per parameter:
//!     name length             u32
//!     name                    UTF-8 bytes
//!     rank                    u32
//!     dims                    rank x u32
//!     values                  f64 (IEEE-754), row-major
//! metadata length             u32
//! metadata                    UTF-8 JSON: class names, training config, final epoch
//! CRC-64/XZ                   u64 over every preceding byte
//! ```

use std::path::Path;

use crc::{Crc, CRC_64_XZ};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::LeNetModel;
use crate::tensor::Tensor;
use crate::train::{EpochRecord, TrainConfig};

pub const MAGIC: &[u8; 4] = b"LNCK";
pub const FORMAT_VERSION: u32 = 1;

const CHECKSUM: Crc<u64> = Crc::<u64>::new(&CRC_64_XZ);

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: LeNetModel,
    pub class_names: Vec<String>,
    pub config: Option<TrainConfig>,
    pub final_record: Option<EpochRecord>,
}

#[derive(Serialize, Deserialize)]
struct Metadata {
    class_names: Vec<String>,
    config: Option<TrainConfig>,
    final_record: Option<EpochRecord>,
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v)
        .map_err(|_| Error::InvalidConfig(format!("{v} does not fit the checkpoint u32 field")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

pub fn encode_checkpoint(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    let model = &ckpt.model;
    if !ckpt.class_names.is_empty() && ckpt.class_names.len() != model.num_classes() {
        return Err(Error::InvalidConfig(format!(
            "{} class names for a {}-class model",
            ckpt.class_names.len(),
            model.num_classes()
        )));
    }
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    put_u32(&mut out, model.num_classes())?;
    put_u32(&mut out, model.params().len())?;
    for p in model.params() {
        put_u32(&mut out, p.name().len())?;
        out.extend_from_slice(p.name().as_bytes());
        put_u32(&mut out, p.shape().len())?;
        for &d in p.shape() {
            put_u32(&mut out, d)?;
        }
        for v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let meta = serde_json::to_vec(&Metadata {
        class_names: ckpt.class_names.clone(),
        config: ckpt.config.clone(),
        final_record: ckpt.final_record.clone(),
    })
    .map_err(|e| Error::InvalidConfig(format!("cannot serialize checkpoint metadata: {e}")))?;
    put_u32(&mut out, meta.len())?;
    out.extend_from_slice(&meta);
    let crc = CHECKSUM.checksum(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptCheckpoint(msg.into())
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| corrupt(format!("truncated while reading {what}")))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(corrupt("bad magic (not an LNCK checkpoint)"));
    }
    if bytes.len() < 8 {
        return Err(corrupt("truncated before format version"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    if bytes.len() < 8 + 8 {
        return Err(corrupt("truncated checkpoint"));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().expect("8 bytes"));
    if CHECKSUM.checksum(body) != stored {
        return Err(corrupt("checksum mismatch (truncated or damaged file)"));
    }

    let mut r = Reader {
        bytes: body,
        pos: 8,
    };
    let num_classes = r.u32("num_classes")?;
    let count = r.u32("parameter count")?;
    let mut values = Vec::with_capacity(count.min(64));
    for _ in 0..count {
        let name_len = r.u32("name length")?;
        let name = std::str::from_utf8(r.take(name_len, "parameter name")?)
            .map_err(|_| corrupt("parameter name is not UTF-8"))?
            .to_string();
        let rank = r.u32("rank")?;
        let dims = (0..rank)
            .map(|_| r.u32("dimension"))
            .collect::<Result<Vec<_>>>()?;
        let n = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| corrupt(format!("{name}: dimensions overflow")))?;
        let raw = r.take(
            n.checked_mul(8)
                .ok_or_else(|| corrupt("value block overflows"))?,
            "parameter values",
        )?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let t = Tensor::new(&dims, data).map_err(|e| corrupt(format!("{name}: {e}")))?;
        values.push((name, t));
    }
    let meta_len = r.u32("metadata length")?;
    let meta: Metadata = serde_json::from_slice(r.take(meta_len, "metadata")?)
        .map_err(|e| corrupt(format!("metadata: {e}")))?;
    if r.pos != body.len() {
        return Err(corrupt("trailing bytes after metadata"));
    }
    if !meta.class_names.is_empty() && meta.class_names.len() != num_classes {
        return Err(corrupt(format!(
            "{} class names for {num_classes} classes",
            meta.class_names.len()
        )));
    }
    let model = LeNetModel::from_params(num_classes, values).map_err(|e| corrupt(e.to_string()))?;
    Ok(Checkpoint {
        model,
        class_names: meta.class_names,
        config: meta.config,
        final_record: meta.final_record,
    })
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let bytes = encode_checkpoint(ckpt)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path)
        .map_err(|e| corrupt(format!("cannot read checkpoint {}: {e}", path.display())))?;
    decode_checkpoint(&bytes)
}
