//! On-disk snapshot container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    4 bytes  "QSNP"
//! version  u32      currently 1
//! rows     u32      snapshot grid rows
//! cols     u32      snapshot grid cols
//! count    u64      number of snapshots
//! meta_len u32      byte length of the metadata JSON
//! meta     meta_len bytes of UTF-8 JSON (generator name, parameters, seed)
//! payload  count × rows × ceil(cols/8) bytes
//! ```
//!
//! Each snapshot is stored row-major, one row at a time, each row packed
//! into `ceil(cols/8)` bytes with little-endian bit order: column `j` lands
//! in byte `j / 8` at bit position `j % 8`. Padding bits are zero. The
//! format round-trips bit-exactly and is the ingestion point for externally
//! produced bitstrings.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::data::snapshot::Snapshot;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"QSNP";
const VERSION: u32 = 1;

/// Bytes per packed snapshot row.
fn row_bytes(cols: usize) -> usize {
    cols.div_ceil(8)
}

/// Writes `snapshots` (all with identical geometry) plus provenance
/// metadata. Fails on an empty list — the geometry would be unrecoverable.
pub fn write_snapshots(
    path: &Path,
    snapshots: &[Snapshot],
    meta: &serde_json::Value,
) -> Result<()> {
    let first = snapshots
        .first()
        .ok_or_else(|| Error::config("cannot write a snapshot file with zero snapshots"))?;
    let (rows, cols) = (first.rows(), first.cols());
    if let Some(bad) = snapshots.iter().find(|s| s.rows() != rows || s.cols() != cols) {
        return Err(Error::shape(
            "write_snapshots",
            format!("mixed geometries {}×{} and {}×{}", rows, cols, bad.rows(), bad.cols()),
        ));
    }
    let meta_bytes = serde_json::to_vec(meta).map_err(|e| Error::Format(e.to_string()))?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(rows as u32).to_le_bytes())?;
    w.write_all(&(cols as u32).to_le_bytes())?;
    w.write_all(&(snapshots.len() as u64).to_le_bytes())?;
    w.write_all(&(meta_bytes.len() as u32).to_le_bytes())?;
    w.write_all(&meta_bytes)?;
    let mut row = vec![0u8; row_bytes(cols)];
    for snap in snapshots {
        for r in 0..rows {
            row.iter_mut().for_each(|b| *b = 0);
            for c in 0..cols {
                if snap.get(r, c) == 1 {
                    row[c / 8] |= 1 << (c % 8);
                }
            }
            w.write_all(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a snapshot file back, returning the snapshots and their metadata.
pub fn read_snapshots(path: &Path) -> Result<(Vec<Snapshot>, serde_json::Value)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(Error::Format(format!(
            "not a snapshot file: magic {magic:?}, expected {MAGIC:?}"
        )));
    }
    let version = read_u32(&mut r, "version")?;
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported snapshot file version {version}, expected {VERSION}"
        )));
    }
    let rows = read_u32(&mut r, "rows")? as usize;
    let cols = read_u32(&mut r, "cols")? as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::Format(format!("invalid snapshot geometry {rows}×{cols}")));
    }
    let count = {
        let mut buf = [0u8; 8];
        read_exact(&mut r, &mut buf, "count")?;
        u64::from_le_bytes(buf) as usize
    };
    let meta_len = read_u32(&mut r, "meta_len")? as usize;
    let mut meta_bytes = vec![0u8; meta_len];
    read_exact(&mut r, &mut meta_bytes, "metadata")?;
    let meta: serde_json::Value = serde_json::from_slice(&meta_bytes)
        .map_err(|e| Error::Format(format!("snapshot metadata is not valid JSON: {e}")))?;

    let rb = row_bytes(cols);
    let mut snapshots = Vec::with_capacity(count);
    let mut row = vec![0u8; rb];
    for i in 0..count {
        let mut bits = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            read_exact(&mut r, &mut row, "payload")?;
            for c in 0..cols {
                bits.push((row[c / 8] >> (c % 8)) & 1);
            }
            for (b, byte) in row.iter().enumerate() {
                let used = (cols.saturating_sub(b * 8)).min(8);
                if used < 8 && byte >> used != 0 {
                    return Err(Error::Format(format!(
                        "snapshot {i}: nonzero padding bits in packed row"
                    )));
                }
            }
        }
        snapshots.push(Snapshot::new(rows, cols, bits)?);
    }
    let mut tail = [0u8; 1];
    if r.read(&mut tail)? != 0 {
        return Err(Error::Format("trailing bytes after snapshot payload".into()));
    }
    Ok((snapshots, meta))
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::Format(format!("snapshot file truncated while reading {what}")))
}

fn read_u32(r: &mut impl Read, what: &str) -> Result<u32> {
    let mut buf = [0u8; 4];
    read_exact(r, &mut buf, what)?;
    Ok(u32::from_le_bytes(buf))
}
