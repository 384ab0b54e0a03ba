//! Binary feature cache: little-endian, documented layout.
//!
//! `SCTQM\x01` magic, u32 fingerprint length + bytes, u32 schema count,
//! per identifier u32 length + UTF-8, u32 rows, u32 cols, rows x cols
//! f64 row-major feature values, then `rows` f64 labels.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::PipelineError;

pub const CACHE_MAGIC: &[u8; 6] = b"SCTQM\x01";

pub struct CachePayload {
    pub fingerprint: String,
    pub schema: Vec<String>,
    pub features: Array2<f64>,
    pub labels: Vec<f64>,
}

pub fn write_cache(path: &Path, payload: &CachePayload) -> Result<(), PipelineError> {
    let n = payload.features.nrows();
    let d = payload.features.ncols();
    if payload.labels.len() != n {
        return Err(PipelineError::LabelMismatch { rows: n, labels: payload.labels.len() });
    }
    if payload.schema.len() != d {
        return Err(PipelineError::CorruptCache(format!(
            "schema has {} entries for {} columns",
            payload.schema.len(),
            d
        )));
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(CACHE_MAGIC)?;
    let fp = payload.fingerprint.as_bytes();
    f.write_all(&(fp.len() as u32).to_le_bytes())?;
    f.write_all(fp)?;
    f.write_all(&(d as u32).to_le_bytes())?;
    for id in &payload.schema {
        let b = id.as_bytes();
        f.write_all(&(b.len() as u32).to_le_bytes())?;
        f.write_all(b)?;
    }
    f.write_all(&(n as u32).to_le_bytes())?;
    f.write_all(&(d as u32).to_le_bytes())?;
    for v in payload.features.iter() {
        f.write_all(&v.to_le_bytes())?;
    }
    for v in &payload.labels {
        f.write_all(&v.to_le_bytes())?;
    }
    f.flush()?;
    Ok(())
}

/// Load a cache, refusing it when the fingerprint differs from
/// `expected_fingerprint`.
pub fn read_cache(path: &Path, expected_fingerprint: &str) -> Result<CachePayload, PipelineError> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 6];
    f.read_exact(&mut magic)
        .map_err(|_| PipelineError::CorruptCache("truncated magic".into()))?;
    if &magic != CACHE_MAGIC {
        return Err(PipelineError::CorruptCache("bad magic".into()));
    }
    let fingerprint = read_string(&mut f, "fingerprint")?;
    if fingerprint != expected_fingerprint {
        return Err(PipelineError::FingerprintMismatch);
    }
    let d_schema = read_u32(&mut f, "schema count")? as usize;
    if d_schema > 1 << 24 {
        return Err(PipelineError::CorruptCache("implausible schema count".into()));
    }
    let mut schema = Vec::with_capacity(d_schema);
    for _ in 0..d_schema {
        schema.push(read_string(&mut f, "schema id")?);
    }
    let n = read_u32(&mut f, "row count")? as usize;
    let d = read_u32(&mut f, "column count")? as usize;
    if d != d_schema {
        return Err(PipelineError::CorruptCache(format!(
            "column count {d} does not match schema count {d_schema}"
        )));
    }
    let mut values = Vec::with_capacity(n * d);
    for _ in 0..n * d {
        values.push(read_f64(&mut f, "feature value")?);
    }
    let features = Array2::from_shape_vec((n, d), values)
        .map_err(|e| PipelineError::CorruptCache(e.to_string()))?;
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        labels.push(read_f64(&mut f, "label")?);
    }
    let mut rest = Vec::new();
    f.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(PipelineError::CorruptCache(format!("{} trailing bytes", rest.len())));
    }
    Ok(CachePayload { fingerprint, schema, features, labels })
}

fn read_u32(f: &mut impl Read, what: &str) -> Result<u32, PipelineError> {
    let mut b = [0u8; 4];
    f.read_exact(&mut b)
        .map_err(|_| PipelineError::CorruptCache(format!("truncated {what}")))?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(f: &mut impl Read, what: &str) -> Result<f64, PipelineError> {
    let mut b = [0u8; 8];
    f.read_exact(&mut b)
        .map_err(|_| PipelineError::CorruptCache(format!("truncated {what}")))?;
    Ok(f64::from_le_bytes(b))
}

fn read_string(f: &mut impl Read, what: &str) -> Result<String, PipelineError> {
    let len = read_u32(f, what)? as usize;
    if len > 1 << 20 {
        return Err(PipelineError::CorruptCache(format!("implausible {what} length {len}")));
    }
    let mut b = vec![0u8; len];
    f.read_exact(&mut b)
        .map_err(|_| PipelineError::CorruptCache(format!("truncated {what}")))?;
    String::from_utf8(b).map_err(|_| PipelineError::CorruptCache(format!("non-UTF-8 {what}")))
}
