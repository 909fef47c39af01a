use std::path::Path;

use super::{ActivationRecord, DataError, Result};

pub const DUMP_MAGIC: &[u8; 4] = b"OODA";
pub const DUMP_VERSION: u32 = 1;
/// Magic (4) + version (4) + record count (8) + classes (4) + feature dim (4) + flags (4).
pub const DUMP_HEADER_LEN: usize = 28;
pub const FLAG_LABELS: u32 = 1;
pub const FLAG_FEATURES: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DumpHeader {
    pub num_records: u64,
    pub num_classes: u32,
    pub feature_dim: u32,
    pub flags: u32,
}

impl DumpHeader {
    fn record_len(&self) -> usize {
        let label = if self.flags & FLAG_LABELS != 0 { 4 } else { 0 };
        label + 4 * (self.num_classes as usize + self.feature_dim as usize)
    }
}

fn format_err(offset: usize, message: impl Into<String>) -> DataError {
    DataError::Format {
        offset,
        message: message.into(),
    }
}

fn header_for(records: &[ActivationRecord]) -> Result<DumpHeader> {
    let num_classes = records.first().map_or(0, |r| r.logits.len());
    let feature_dim = records
        .first()
        .and_then(|r| r.features.as_ref())
        .map_or(0, Vec::len);
    let has_features = records.first().is_some_and(|r| r.features.is_some());
    for (i, r) in records.iter().enumerate() {
        if r.logits.len() != num_classes {
            return Err(DataError::Invalid(format!(
                "record {i}: {} logits, expected {num_classes}",
                r.logits.len()
            )));
        }
        if r.features.is_some() != has_features
            || r.features.as_ref().map_or(0, Vec::len) != feature_dim
        {
            return Err(DataError::Invalid(format!(
                "record {i}: feature dimension differs from first record"
            )));
        }
        if r.label < -1 {
            return Err(DataError::Invalid(format!("record {i}: label {}", r.label)));
        }
    }
    if has_features && feature_dim == 0 {
        return Err(DataError::Invalid("features present but empty".into()));
    }
    let mut flags = 0;
    if records.iter().any(|r| r.label >= 0) {
        flags |= FLAG_LABELS;
    }
    if has_features {
        flags |= FLAG_FEATURES;
    }
    Ok(DumpHeader {
        num_records: records.len() as u64,
        num_classes: u32::try_from(num_classes)
            .map_err(|_| DataError::Invalid("too many classes".into()))?,
        feature_dim: u32::try_from(feature_dim)
            .map_err(|_| DataError::Invalid("feature dim too large".into()))?,
        flags,
    })
}

fn push_f32s(out: &mut Vec<u8>, values: &[f64], record: usize) -> Result<()> {
    for &v in values {
        let f = v as f32;
        if !f.is_finite() {
            return Err(DataError::Invalid(format!(
                "record {record}: value {v} is not representable as a finite f32"
            )));
        }
        out.extend_from_slice(&f.to_le_bytes());
    }
    Ok(())
}

/// Serializes records; values are stored as `f32`.
pub fn encode_dump(records: &[ActivationRecord]) -> Result<Vec<u8>> {
    let header = header_for(records)?;
    let mut out = Vec::with_capacity(DUMP_HEADER_LEN + records.len() * header.record_len());
    out.extend_from_slice(DUMP_MAGIC);
    out.extend_from_slice(&DUMP_VERSION.to_le_bytes());
    out.extend_from_slice(&header.num_records.to_le_bytes());
    out.extend_from_slice(&header.num_classes.to_le_bytes());
    out.extend_from_slice(&header.feature_dim.to_le_bytes());
    out.extend_from_slice(&header.flags.to_le_bytes());
    for (i, r) in records.iter().enumerate() {
        if header.flags & FLAG_LABELS != 0 {
            out.extend_from_slice(&r.label.to_le_bytes());
        }
        push_f32s(&mut out, &r.logits, i)?;
        if let Some(f) = &r.features {
            push_f32s(&mut out, f, i)?;
        }
    }
    Ok(out)
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

fn f32s_at(bytes: &[u8], at: usize, n: usize) -> Result<Vec<f64>> {
    bytes[at..at + 4 * n]
        .chunks_exact(4)
        .enumerate()
        .map(|(k, c)| {
            let v = f32::from_le_bytes(c.try_into().unwrap());
            if v.is_finite() {
                Ok(f64::from(v))
            } else {
                Err(format_err(at + 4 * k, "non-finite value"))
            }
        })
        .collect()
}

pub fn decode_header(bytes: &[u8]) -> Result<DumpHeader> {
    if bytes.len() < DUMP_HEADER_LEN {
        return Err(format_err(
            bytes.len(),
            format!("truncated header, {} of {DUMP_HEADER_LEN} bytes", bytes.len()),
        ));
    }
    if &bytes[..4] != DUMP_MAGIC {
        return Err(format_err(0, format!("bad magic {:?}", &bytes[..4])));
    }
    let version = u32_at(bytes, 4);
    if version != DUMP_VERSION {
        return Err(format_err(4, format!("unsupported version {version}")));
    }
    let header = DumpHeader {
        num_records: u64::from_le_bytes(bytes[8..16].try_into().unwrap()),
        num_classes: u32_at(bytes, 16),
        feature_dim: u32_at(bytes, 20),
        flags: u32_at(bytes, 24),
    };
    if header.flags & !(FLAG_LABELS | FLAG_FEATURES) != 0 {
        return Err(format_err(24, format!("unknown flags {:#x}", header.flags)));
    }
    if (header.flags & FLAG_FEATURES != 0) != (header.feature_dim > 0) {
        return Err(format_err(
            20,
            "feature flag and feature_dim disagree".to_string(),
        ));
    }
    Ok(header)
}

pub fn decode_dump(bytes: &[u8]) -> Result<Vec<ActivationRecord>> {
    let header = decode_header(bytes)?;
    let record_len = header.record_len();
    let expected = usize::try_from(header.num_records)
        .ok()
        .and_then(|n| n.checked_mul(record_len))
        .and_then(|p| p.checked_add(DUMP_HEADER_LEN))
        .ok_or_else(|| format_err(8, "record count overflows"))?;
    if bytes.len() < expected {
        let complete = (bytes.len() - DUMP_HEADER_LEN) / record_len.max(1);
        return Err(format_err(
            DUMP_HEADER_LEN + complete * record_len,
            format!(
                "truncated: {} records declared, {complete} complete",
                header.num_records
            ),
        ));
    }
    if bytes.len() > expected {
        return Err(format_err(expected, "trailing bytes after last record"));
    }
    let labels = header.flags & FLAG_LABELS != 0;
    let n_cls = header.num_classes as usize;
    let n_feat = header.feature_dim as usize;
    let mut records = Vec::with_capacity(header.num_records as usize);
    let mut at = DUMP_HEADER_LEN;
    for _ in 0..header.num_records {
        let label = if labels {
            let l = u32_at(bytes, at) as i32;
            if l < -1 {
                return Err(format_err(at, format!("invalid label {l}")));
            }
            at += 4;
            l
        } else {
            -1
        };
        let logits = f32s_at(bytes, at, n_cls)?;
        at += 4 * n_cls;
        let features = if n_feat > 0 {
            let f = f32s_at(bytes, at, n_feat)?;
            at += 4 * n_feat;
            Some(f)
        } else {
            None
        };
        records.push(ActivationRecord::new(label, logits, features));
    }
    Ok(records)
}

pub fn write_dump(path: impl AsRef<Path>, records: &[ActivationRecord]) -> Result<()> {
    std::fs::write(path, encode_dump(records)?)?;
    Ok(())
}

pub fn read_dump(path: impl AsRef<Path>) -> Result<Vec<ActivationRecord>> {
    decode_dump(&std::fs::read(path)?)
}
