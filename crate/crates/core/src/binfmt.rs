//! Shared framing for the little-endian HSE1/HST1 embedding files.
//!
//! Both formats start with `magic · u32 version · u32 count · u32 dim ·
//! u32 id_blob_len · id_blob`, where the id blob is a compact JSON array of
//! strings. Everything after the header is format-specific.

use crate::error::{Error, Result};

pub(crate) const VERSION: u32 = 1;

pub(crate) struct Header {
    pub count: usize,
    pub dim: usize,
    pub ids: Vec<String>,
}

pub(crate) fn encode_header(out: &mut Vec<u8>, magic: &[u8; 4], dim: usize, ids: &[String]) -> Result<()> {
    let blob = serde_json::to_vec(ids).map_err(|e| Error::Format(e.to_string()))?;
    out.extend_from_slice(magic);
    put_u32(out, VERSION);
    put_u32(out, to_u32(ids.len(), "row count")?);
    put_u32(out, to_u32(dim, "dim")?);
    put_u32(out, to_u32(blob.len(), "id blob length")?);
    out.extend_from_slice(&blob);
    Ok(())
}

pub(crate) fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_f32s(out: &mut Vec<u8>, values: &[f32]) {
    out.reserve(values.len() * 4);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Format(format!("{what} {v} does not fit in u32")))
}

/// Cursor over an in-memory file image.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&end| end <= self.buf.len())
            .ok_or_else(|| {
                Error::Format(format!(
                    "truncated payload: need {n} bytes for {what} at offset {}, file has {}",
                    self.pos,
                    self.buf.len()
                ))
            })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f32>> {
        let bytes = n
            .checked_mul(4)
            .ok_or_else(|| Error::Format(format!("{what} size overflow")))?;
        let raw = self.take(bytes, what)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }

    pub fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after payload",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }

    pub fn header(&mut self, magic: &[u8; 4]) -> Result<Header> {
        let found = self.take(4, "magic")?;
        if found != magic {
            return Err(Error::BadMagic {
                expected: String::from_utf8_lossy(magic).into_owned(),
                found: String::from_utf8_lossy(found).into_owned(),
            });
        }
        let version = self.u32("version")?;
        if version != VERSION {
            return Err(Error::UnsupportedVersion {
                what: "embedding file",
                version: version.into(),
            });
        }
        let count = self.u32("row count")? as usize;
        let dim = self.u32("dim")? as usize;
        if dim == 0 {
            return Err(Error::Format("dim must be positive".into()));
        }
        let blob_len = self.u32("id blob length")? as usize;
        let blob = self.take(blob_len, "id blob")?;
        let ids: Vec<String> = serde_json::from_slice(blob)
            .map_err(|e| Error::Format(format!("id blob is not a JSON string array: {e}")))?;
        if ids.len() != count {
            return Err(Error::Format(format!(
                "id blob holds {} ids but header declares {count}",
                ids.len()
            )));
        }
        Ok(Header { count, dim, ids })
    }
}
