//! Self-describing weight checkpoint container.
//!
//! Layout: magic `QCKP`, format version (u32 LE), header length (u64 LE),
//! header JSON, then the raw little-endian tensor payload in the order the
//! header lists. The header carries the model variant, its full config, the
//! numeric precision, per-tensor metadata, and a free-form `extra` object
//! (epoch, validation accuracy, …). Round-trips are bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::{ParamSet, Tensor};

const MAGIC: &[u8; 4] = b"QCKP";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TensorMeta {
    name: String,
    shape: Vec<usize>,
    trainable: bool,
    byte_offset: u64,
    byte_len: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    variant: String,
    config: serde_json::Value,
    precision: String,
    tensors: Vec<TensorMeta>,
    #[serde(default)]
    extra: serde_json::Value,
}

/// A checkpoint read back from disk.
#[derive(Debug)]
pub struct LoadedCheckpoint<R: Real> {
    pub variant: String,
    pub config: serde_json::Value,
    pub extra: serde_json::Value,
    pub params: ParamSet<R>,
}

/// Writes `params` with its identifying metadata. Overwrites the target.
pub fn save_checkpoint<R: Real>(
    path: &Path,
    variant: &str,
    config: &serde_json::Value,
    extra: &serde_json::Value,
    params: &ParamSet<R>,
) -> Result<()> {
    let mut tensors = Vec::with_capacity(params.len());
    let mut offset = 0u64;
    for p in params.iter() {
        let byte_len = (p.value.len() * R::BYTES) as u64;
        tensors.push(TensorMeta {
            name: p.name.clone(),
            shape: p.value.shape().to_vec(),
            trainable: p.trainable,
            byte_offset: offset,
            byte_len,
        });
        offset += byte_len;
    }
    let header = Header {
        variant: variant.to_string(),
        config: config.clone(),
        precision: R::NAME.to_string(),
        tensors,
        extra: extra.clone(),
    };
    let header_bytes =
        serde_json::to_vec(&header).map_err(|e| Error::Format(e.to_string()))?;

    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(header_bytes.len() as u64).to_le_bytes())?;
    w.write_all(&header_bytes)?;
    let mut payload = Vec::with_capacity(offset as usize);
    for p in params.iter() {
        for &v in p.value.data() {
            v.write_le(&mut payload);
        }
    }
    w.write_all(&payload)?;
    w.flush()?;
    Ok(())
}

/// Reads a checkpoint written by [`save_checkpoint`] at the same precision.
pub fn load_checkpoint<R: Real>(path: &Path) -> Result<LoadedCheckpoint<R>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!(
            "{} is not a checkpoint file (bad magic)",
            path.display()
        )));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let mut long = [0u8; 8];
    r.read_exact(&mut long)?;
    let header_len = u64::from_le_bytes(long) as usize;
    let mut header_bytes = vec![0u8; header_len];
    r.read_exact(&mut header_bytes)?;
    let header: Header =
        serde_json::from_slice(&header_bytes).map_err(|e| Error::Format(e.to_string()))?;
    if header.precision != R::NAME {
        return Err(Error::config(format!(
            "checkpoint precision is {}, loader expects {}",
            header.precision,
            R::NAME
        )));
    }

    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;

    let mut params = ParamSet::new();
    for meta in &header.tensors {
        let start = meta.byte_offset as usize;
        let end = start + meta.byte_len as usize;
        if end > payload.len() {
            return Err(Error::Format(format!(
                "tensor {:?} extends past the payload ({} > {})",
                meta.name,
                end,
                payload.len()
            )));
        }
        let n: usize = meta.shape.iter().product();
        if n * R::BYTES != meta.byte_len as usize {
            return Err(Error::Format(format!(
                "tensor {:?} byte length disagrees with shape {:?}",
                meta.name, meta.shape
            )));
        }
        let mut data = Vec::with_capacity(n);
        for i in 0..n {
            data.push(R::read_le(&payload[start + i * R::BYTES..start + (i + 1) * R::BYTES]));
        }
        let t = Tensor::from_vec(&meta.shape, data)?;
        if meta.trainable {
            params.add(&meta.name, t)?;
        } else {
            params.add_buffer(&meta.name, t)?;
        }
    }
    Ok(LoadedCheckpoint {
        variant: header.variant,
        config: header.config,
        extra: header.extra,
        params,
    })
}
