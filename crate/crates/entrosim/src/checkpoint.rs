//! The `.ntc` named-tensor checkpoint format.
//!
//! Layout: magic `NTC1`, little-endian `u32` header length, UTF-8 JSON header
//! `{format_version, encoder_config, alpha, tensors:[{name, dtype:"f32",
//! shape, offset, byte_len}]}`, then the raw little-endian tensor blobs,
//! contiguous in header order. Offsets are relative to the end of the header.
//!
//! Save -> load -> save is byte-identical: the header is regenerated from the
//! same structures in the same order and tensor data is copied verbatim.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::model::{Model, ModelConfig};

pub const NTC_MAGIC: [u8; 4] = *b"NTC1";
pub const NTC_FORMAT_VERSION: u32 = 1;

/// Keep fuzzed/corrupt headers from over-allocating before validation.
const MAX_HEADER_LEN: usize = 16 * 1024 * 1024;

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    encoder_config: ModelConfig,
    alpha: f64,
    tensors: Vec<TensorMeta>,
}

#[derive(Serialize, Deserialize, Clone)]
struct TensorMeta {
    name: String,
    dtype: String,
    shape: Vec<usize>,
    offset: u64,
    byte_len: u64,
}

/// A loaded checkpoint: full parameter set plus the loss-balance alpha.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: Model<f32>,
    pub alpha: f64,
}

pub fn encode_checkpoint(model: &Model<f32>, alpha: f64) -> Vec<u8> {
    let mut tensors = Vec::with_capacity(model.entries().len());
    let mut offset = 0u64;
    for e in model.entries() {
        let byte_len = (e.len * 4) as u64;
        tensors.push(TensorMeta {
            name: e.name.clone(),
            dtype: "f32".into(),
            shape: e.shape.clone(),
            offset,
            byte_len,
        });
        offset += byte_len;
    }
    let header = Header {
        format_version: NTC_FORMAT_VERSION,
        encoder_config: model.config.clone(),
        alpha,
        tensors,
    };
    let header_json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(8 + header_json.len() + offset as usize);
    out.extend_from_slice(&NTC_MAGIC);
    out.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&header_json);
    for v in model.params() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn parse_header(bytes: &[u8]) -> Result<(Header, &[u8])> {
    if bytes.len() < 8 {
        return Err(Error::Format("ntc: truncated".into()));
    }
    if bytes[0..4] != NTC_MAGIC {
        return Err(Error::Format("ntc: bad magic".into()));
    }
    let header_len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    if header_len > MAX_HEADER_LEN {
        return Err(Error::Format(format!("ntc: header length {header_len} too large")));
    }
    if bytes.len() < 8 + header_len {
        return Err(Error::Format("ntc: truncated header".into()));
    }
    let header: Header = serde_json::from_slice(&bytes[8..8 + header_len])
        .map_err(|e| Error::Format(format!("ntc header: {e}")))?;
    if header.format_version != NTC_FORMAT_VERSION {
        return Err(Error::Format(format!(
            "ntc: unsupported format version {}",
            header.format_version
        )));
    }
    Ok((header, &bytes[8 + header_len..]))
}

fn tensor_blob<'a>(blob: &'a [u8], meta: &TensorMeta) -> Result<&'a [u8]> {
    let numel: usize = meta
        .shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Format(format!("ntc: shape overflow in {}", meta.name)))?;
    if meta.dtype != "f32" {
        return Err(Error::Format(format!(
            "ntc: tensor {} has unsupported dtype {}",
            meta.name, meta.dtype
        )));
    }
    if meta.byte_len as usize != numel * 4 {
        return Err(Error::Format(format!(
            "ntc: tensor {} byte_len {} != 4 * numel {}",
            meta.name, meta.byte_len, numel
        )));
    }
    let start = meta.offset as usize;
    let end = start
        .checked_add(meta.byte_len as usize)
        .ok_or_else(|| Error::Format(format!("ntc: offset overflow in {}", meta.name)))?;
    if end > blob.len() {
        return Err(Error::Format(format!(
            "ntc: tensor {} extends past the blob",
            meta.name
        )));
    }
    Ok(&blob[start..end])
}

fn read_f32s(raw: &[u8], out: &mut [f32]) {
    for (chunk, dst) in raw.chunks_exact(4).zip(out.iter_mut()) {
        *dst = f32::from_le_bytes(chunk.try_into().unwrap());
    }
}

/// Strict full load: the tensor set must exactly match the layout derived
/// from the embedded config; any missing or extra names are listed.
pub fn parse_checkpoint_bytes(bytes: &[u8]) -> Result<Checkpoint> {
    let (header, blob) = parse_header(bytes)?;
    let mut model = Model::<f32>::from_parts(
        header.encoder_config.clone(),
        vec![0.0; expected_param_len(&header.encoder_config)?],
    )?;
    let expected: Vec<String> = model.entries().iter().map(|e| e.name.clone()).collect();
    let present: Vec<&str> = header.tensors.iter().map(|t| t.name.as_str()).collect();
    let missing: Vec<&String> = expected
        .iter()
        .filter(|n| !present.contains(&n.as_str()))
        .collect();
    let extra: Vec<&&str> = present
        .iter()
        .filter(|n| !expected.iter().any(|e| e == **n))
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(Error::Format(format!(
            "ntc: tensor set mismatch; missing {missing:?}, unexpected {extra:?}"
        )));
    }
    for meta in &header.tensors {
        let entry = model
            .entry(&meta.name)
            .expect("name checked above")
            .clone();
        if entry.shape != meta.shape {
            return Err(Error::Format(format!(
                "ntc: tensor {} has shape {:?}, layout expects {:?}",
                meta.name, meta.shape, entry.shape
            )));
        }
        let raw = tensor_blob(blob, meta)?;
        read_f32s(raw, &mut model.params_mut()[entry.offset..entry.offset + entry.len]);
    }
    for v in model.params() {
        if !v.is_finite() {
            return Err(Error::Format("ntc: non-finite parameter value".into()));
        }
    }
    Ok(Checkpoint {
        model,
        alpha: header.alpha,
    })
}

fn expected_param_len(config: &ModelConfig) -> Result<usize> {
    // Build a zero model once to learn the layout size.
    let probe = Model::<f32>::init(config.clone(), 0)?;
    Ok(probe.params().len())
}

pub fn save_checkpoint(path: &Path, model: &Model<f32>, alpha: f64) -> Result<()> {
    std::fs::write(path, encode_checkpoint(model, alpha)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_checkpoint_bytes(&bytes)
}

/// What a partial import touched.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ImportReport {
    pub imported: Vec<String>,
    pub skipped_unknown: Vec<String>,
}

/// Partial import by tensor name: every file tensor whose name exists in the
/// model is copied in (shapes must match exactly); unknown names are skipped
/// and reported; model tensors absent from the file keep their values.
pub fn import_tensors(model: &mut Model<f32>, bytes: &[u8]) -> Result<ImportReport> {
    let (header, blob) = parse_header(bytes)?;
    let mut report = ImportReport::default();
    for meta in &header.tensors {
        let Some(entry) = model.entry(&meta.name).cloned() else {
            report.skipped_unknown.push(meta.name.clone());
            continue;
        };
        if entry.shape != meta.shape {
            return Err(Error::Format(format!(
                "ntc import: tensor {} has shape {:?}, model expects {:?}",
                meta.name, meta.shape, entry.shape
            )));
        }
        let raw = tensor_blob(blob, meta)?;
        read_f32s(raw, &mut model.params_mut()[entry.offset..entry.offset + entry.len]);
        report.imported.push(meta.name.clone());
    }
    Ok(report)
}
