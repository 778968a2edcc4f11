//! Binary checkpoint format. All integers little-endian.
//!
//! ```text
//! magic      8 bytes  "HTRCKPT\0"
//! version    u32      = 1
//! elem_size  u8       4 (f32) or 8 (f64)
//! config     u32 byte length + UTF-8 `key=value` lines
//! alphabet   u32 byte length + UTF-8 characters in index order
//! count      u32      number of tensors
//! tensor     u32 name length + UTF-8 name
//!            u32 rank, rank x u64 extents
//!            extents-product x elem_size bytes, row-major
//! checksum   32 bytes SHA-256 of everything above
//! ```

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::data::Alphabet;
use crate::error::{Error, Result};
use crate::optim::ParamSet;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::{Model, ModelConfig};

const MAGIC: &[u8; 8] = b"HTRCKPT\0";
pub const VERSION: u32 = 1;
const CHECKSUM_LEN: usize = 32;

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len());
    out.extend_from_slice(s.as_bytes());
}

pub fn encode_checkpoint<F: Scalar>(model: &Model<F>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(F::BYTES as u8);
    put_str(&mut out, &model.config.to_kv());
    put_str(&mut out, &model.alphabet.as_string());
    let tensors = model.params.named_tensors();
    put_u32(&mut out, tensors.len());
    for (name, t) in tensors {
        put_str(&mut out, &name);
        put_u32(&mut out, t.rank());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in t.data() {
            v.write_le(&mut out);
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::CorruptCheckpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn u64(&mut self) -> Result<usize> {
        usize::try_from(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
            .map_err(|_| Error::CorruptCheckpoint("extent overflow".into()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::CorruptCheckpoint("invalid UTF-8".into()))
    }
}

pub fn decode_checkpoint<F: Scalar>(bytes: &[u8]) -> Result<Model<F>> {
    let body_len = bytes
        .len()
        .checked_sub(CHECKSUM_LEN)
        .ok_or_else(|| Error::CorruptCheckpoint("file too short".into()))?;
    let mut r = Reader { buf: &bytes[..body_len], pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(Error::CorruptCheckpoint("bad magic".into()));
    }
    let version = r.u32()? as u32;
    if version != VERSION {
        return Err(Error::CheckpointVersion {
            found: version,
            expected: VERSION,
        });
    }
    let elem = r.take(1)?[0] as usize;
    let config = ModelConfig::from_kv(&r.string()?).map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
    let alphabet = Alphabet::new(r.string()?.chars().collect()).map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
    let count = r.u32()?;
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        let name = r.string()?;
        let rank = r.u32()?;
        if rank == 0 || rank > 8 {
            return Err(Error::CorruptCheckpoint(format!("tensor `{name}` has rank {rank}")));
        }
        let shape = (0..rank).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
        let n = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| Error::CorruptCheckpoint("tensor size overflow".into()))?;
        let raw = r.take(n.checked_mul(elem).ok_or_else(|| Error::CorruptCheckpoint("tensor size overflow".into()))?)?;
        tensors.push((name, shape, raw));
    }
    if r.pos != body_len {
        return Err(Error::CorruptCheckpoint("trailing bytes before checksum".into()));
    }
    if Sha256::digest(&bytes[..body_len]).as_slice() != &bytes[body_len..] {
        return Err(Error::Checksum);
    }
    if elem != F::BYTES || config.precision != F::PRECISION {
        return Err(Error::Config(format!(
            "checkpoint holds {} values, requested {}",
            config.precision.as_str(),
            F::PRECISION.as_str()
        )));
    }

    let mut model = Model::<F>::new(config, alphabet, 0).map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
    let mut slots = model.params.named_tensors_mut();
    if slots.len() != tensors.len() {
        return Err(Error::CorruptCheckpoint(format!(
            "{} tensors stored, architecture has {}",
            tensors.len(),
            slots.len()
        )));
    }
    for ((name, shape, raw), (slot_name, slot)) in tensors.into_iter().zip(slots.iter_mut()) {
        if name != *slot_name || shape != slot.shape() {
            return Err(Error::CorruptCheckpoint(format!(
                "tensor `{name}` {shape:?} does not match `{slot_name}` {:?}",
                slot.shape()
            )));
        }
        let data = raw.chunks_exact(elem).map(F::read_le).collect();
        **slot = Tensor::from_vec(&shape, data)?;
    }
    Ok(model)
}

pub fn save_checkpoint<F: Scalar>(model: &Model<F>, path: &Path) -> Result<()> {
    fs::write(path, encode_checkpoint(model)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<F: Scalar>(path: &Path) -> Result<Model<F>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

/// Precision and config stored in a checkpoint, without loading tensors.
pub fn peek_config(path: &Path) -> Result<ModelConfig> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader { buf: &bytes, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(Error::CorruptCheckpoint("bad magic".into()));
    }
    let version = r.u32()? as u32;
    if version != VERSION {
        return Err(Error::CheckpointVersion {
            found: version,
            expected: VERSION,
        });
    }
    r.take(1)?;
    ModelConfig::from_kv(&r.string()?).map_err(|e| Error::CorruptCheckpoint(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Model<f64> {
        let alphabet = Alphabet::from_transcripts(["zyx ab"]);
        Model::new(ModelConfig::reduced(0), alphabet, 5).unwrap()
    }

    #[test]
    fn roundtrip_is_bit_identical() {
        let m = small();
        let bytes = encode_checkpoint(&m);
        let back: Model<f64> = decode_checkpoint(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.alphabet.chars(), &[' ', 'a', 'b', 'x', 'y', 'z']);
        assert_eq!(encode_checkpoint(&back), bytes);
    }

    #[test]
    fn f32_roundtrip_and_precision_guard() {
        let alphabet = Alphabet::from_transcripts(["abc"]);
        let m = Model::<f32>::new(ModelConfig::reduced(0), alphabet, 1).unwrap();
        let bytes = encode_checkpoint(&m);
        assert_eq!(decode_checkpoint::<f32>(&bytes).unwrap(), m);
        assert!(matches!(decode_checkpoint::<f64>(&bytes), Err(Error::Config(_))));
    }

    #[test]
    fn corruption_is_detected() {
        let bytes = encode_checkpoint(&small());
        for cut in [0, 10, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(decode_checkpoint::<f64>(&bytes[..cut]), Err(Error::CorruptCheckpoint(_))), "cut {cut}");
        }
        let mut flipped = bytes.clone();
        let k = flipped.len() - 33;
        flipped[k] ^= 1;
        let r = decode_checkpoint::<f64>(&flipped);
        assert!(matches!(r, Err(Error::Checksum)), "{r:?}");
        let mut versioned = bytes.clone();
        versioned[8] = 9;
        assert!(matches!(
            decode_checkpoint::<f64>(&versioned),
            Err(Error::CheckpointVersion { found: 9, .. })
        ));
    }
}
