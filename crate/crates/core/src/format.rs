//! Binary container shared by model, codebook and feature files:
//!
//! ```text
//! magic     8 bytes
//! length    u64 little-endian, size of the JSON header in bytes
//! header    UTF-8 JSON
//! payload   little-endian 32-bit blocks, layout declared by the header
//! ```

use serde::{de::DeserializeOwned, Serialize};

use crate::error::{Error, Result};

pub fn encode<H: Serialize>(magic: &[u8; 8], header: &H, payload: &[u8]) -> Result<Vec<u8>> {
    let json = serde_json::to_vec(header)?;
    let mut out = Vec::with_capacity(16 + json.len() + payload.len());
    out.extend_from_slice(magic);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(payload);
    Ok(out)
}

pub fn decode<'a, H: DeserializeOwned>(magic: &[u8; 8], bytes: &'a [u8]) -> Result<(H, &'a [u8])> {
    let corrupt = |reason: &str| Error::Corrupt {
        path: Default::default(),
        reason: reason.to_string(),
    };
    if bytes.len() < 16 || &bytes[..8] != magic {
        return Err(corrupt("bad magic"));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let end = 16usize
        .checked_add(len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| corrupt("truncated header"))?;
    let header = serde_json::from_slice(&bytes[16..end])?;
    Ok((header, &bytes[end..]))
}

pub fn push_f32s(out: &mut Vec<u8>, values: impl IntoIterator<Item = f32>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn push_u32s(out: &mut Vec<u8>, values: impl IntoIterator<Item = u32>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Sequential reader over a little-endian payload.
pub struct PayloadReader<'a> {
    bytes: &'a [u8],
}

impl<'a> PayloadReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < n * 4 {
            return Err(Error::Corrupt {
                path: Default::default(),
                reason: format!("payload ends early: need {} bytes, have {}", n * 4, self.bytes.len()),
            });
        }
        let (head, rest) = self.bytes.split_at(n * 4);
        self.bytes = rest;
        Ok(head)
    }

    pub fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        Ok(self
            .take(n)?
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
            .collect())
    }

    pub fn u32s(&mut self, n: usize) -> Result<Vec<u32>> {
        Ok(self
            .take(n)?
            .chunks_exact(4)
            .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
            .collect())
    }

    pub fn finish(self) -> Result<()> {
        if self.bytes.is_empty() {
            Ok(())
        } else {
            Err(Error::Corrupt {
                path: Default::default(),
                reason: format!("{} trailing bytes", self.bytes.len()),
            })
        }
    }
}
