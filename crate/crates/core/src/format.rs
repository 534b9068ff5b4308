//! The `FSEB` embedding container.
//!
//! ```text
//! "FSEB" | version: u16 LE (=1) | header_len: u32 LE | header: UTF-8 JSON
//! count × { id_len: u16 LE, id, source_len: u16 LE, source, label: u8, dimension × f32 LE }
//! ```
//!
//! Header fields: `dimension`, `backbone`, `layer`, `normalized`, `count`, and
//! for persisted caches an extra `cache` object.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embedding::{EmbeddingRecord, EmbeddingSet, Label};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"FSEB";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CacheHeader {
    pub alpha: f64,
    pub k: usize,
    pub seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    dimension: usize,
    backbone: String,
    layer: i64,
    normalized: bool,
    count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cache: Option<CacheHeader>,
}

pub fn encode(set: &EmbeddingSet, cache: Option<CacheHeader>) -> Result<Vec<u8>> {
    set.validate()?;
    let header = Header {
        dimension: set.dimension,
        backbone: set.backbone.clone(),
        layer: set.layer,
        normalized: set.normalized,
        count: set.records.len(),
        cache,
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::InvalidHeader(e.to_string()))?;
    let header_len = u32::try_from(json.len())
        .map_err(|_| Error::InvalidHeader("header longer than u32::MAX".into()))?;

    let per_record = 5 + 4 * set.dimension;
    let mut out = Vec::with_capacity(10 + json.len() + set.records.len() * (per_record + 32));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&header_len.to_le_bytes());
    out.extend_from_slice(&json);
    for r in &set.records {
        put_str(&mut out, &r.id, &r.id)?;
        put_str(&mut out, &r.source, &r.id)?;
        out.push(r.label.to_byte());
        for x in &r.vector {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

fn put_str(out: &mut Vec<u8>, s: &str, id: &str) -> Result<()> {
    let len = u16::try_from(s.len()).map_err(|_| Error::InvalidRecord {
        id: id.to_string(),
        reason: format!("string field of {} bytes exceeds u16 length", s.len()),
    })?;
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let s = self.buf.get(self.pos..end)?;
        self.pos = end;
        Some(s)
    }

    fn u16(&mut self) -> Option<u16> {
        self.take(2).map(|b| u16::from_le_bytes([b[0], b[1]]))
    }

    fn string(&mut self) -> std::result::Result<String, String> {
        let len = self.u16().ok_or("truncated string length")? as usize;
        let bytes = self.take(len).ok_or("truncated string")?;
        String::from_utf8(bytes.to_vec()).map_err(|_| "string is not valid UTF-8".to_string())
    }
}

pub fn decode(bytes: &[u8]) -> Result<(EmbeddingSet, Option<CacheHeader>)> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    let magic = cur.take(4).ok_or(Error::BadMagic { found: [0; 4] })?;
    if magic != MAGIC {
        return Err(Error::BadMagic {
            found: [magic[0], magic[1], magic[2], magic[3]],
        });
    }
    let version = cur
        .u16()
        .ok_or_else(|| Error::InvalidHeader("truncated version".into()))?;
    if version != FORMAT_VERSION {
        return Err(Error::VersionUnsupported(version));
    }
    let header_len = cur
        .take(4)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
        .ok_or_else(|| Error::InvalidHeader("truncated header length".into()))?;
    let json = cur
        .take(header_len)
        .ok_or_else(|| Error::InvalidHeader("truncated header".into()))?;
    let header: Header =
        serde_json::from_slice(json).map_err(|e| Error::InvalidHeader(e.to_string()))?;
    if header.dimension == 0 {
        return Err(Error::InvalidHeader("dimension must be positive".into()));
    }

    let mut set = EmbeddingSet::new(
        header.dimension,
        header.backbone,
        header.layer,
        header.normalized,
    );
    set.records.reserve(header.count.min(1 << 20));
    let mut seen = std::collections::HashSet::new();
    for index in 0..header.count {
        let record =
            read_record(&mut cur, header.dimension).map_err(|r| Error::corrupt(index, r))?;
        record
            .check(header.dimension, header.normalized)
            .map_err(|r| Error::corrupt(index, r))?;
        if !seen.insert(record.id.clone()) {
            return Err(Error::corrupt(
                index,
                format!("duplicate id {:?}", record.id),
            ));
        }
        set.records.push(record);
    }
    if cur.pos != bytes.len() {
        return Err(Error::corrupt(
            header.count,
            format!("{} trailing bytes after last record", bytes.len() - cur.pos),
        ));
    }
    Ok((set, header.cache))
}

fn read_record(
    cur: &mut Cursor<'_>,
    dimension: usize,
) -> std::result::Result<EmbeddingRecord, String> {
    let id = cur.string()?;
    let source = cur.string()?;
    let label_byte = *cur.take(1).ok_or("truncated label")?.first().unwrap();
    let label =
        Label::from_byte(label_byte).ok_or_else(|| format!("invalid label byte {label_byte}"))?;
    let raw = cur.take(4 * dimension).ok_or("truncated vector")?;
    let vector = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(EmbeddingRecord {
        id,
        source,
        label,
        vector,
    })
}

pub fn read_embedding_file(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    Ok(read_with_cache_header(path)?.0)
}

pub fn read_with_cache_header(
    path: impl AsRef<Path>,
) -> Result<(EmbeddingSet, Option<CacheHeader>)> {
    decode(&fs::read(path)?)
}

pub fn write_embedding_file(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<()> {
    write_with_cache_header(set, None, path)
}

pub fn write_with_cache_header(
    set: &EmbeddingSet,
    cache: Option<CacheHeader>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let bytes = encode(set, cache)?;
    fs::write(path, bytes)?;
    Ok(())
}
