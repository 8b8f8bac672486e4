//! Cached bag-of-codewords features: a JSON header followed by
//! little-endian `u32` count rows, one row of `4 * D` per chunk.

use serde::{Deserialize, Serialize};

use super::manifest::Split;
use crate::codebook::FeatureVector;
use crate::error::{Error, Result};
use crate::format::{self, PayloadReader};

const MAGIC: &[u8; 8] = b"BOWTAGFT";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClipFeatures {
    pub clip_id: String,
    pub chunks: Vec<FeatureVector>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureTable {
    pub split: Split,
    pub compression: u32,
    pub codebook_size: usize,
    pub clips: Vec<ClipFeatures>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    split: Split,
    compression: u32,
    codebook_size: usize,
    clips: Vec<(String, usize)>,
}

impl FeatureTable {
    pub fn file_name(split: Split) -> String {
        format!("features_{split}.bin")
    }

    pub fn chunk_count(&self) -> usize {
        self.clips.iter().map(|c| c.chunks.len()).sum()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            split: self.split,
            compression: self.compression,
            codebook_size: self.codebook_size,
            clips: self.clips.iter().map(|c| (c.clip_id.clone(), c.chunks.len())).collect(),
        };
        let mut payload = Vec::with_capacity(self.chunk_count() * 16 * self.codebook_size);
        for fv in self.clips.iter().flat_map(|c| &c.chunks) {
            if fv.codebook_size() != self.codebook_size {
                return Err(Error::shape(self.codebook_size, fv.codebook_size()));
            }
            format::push_u32s(&mut payload, fv.counts().iter().copied());
        }
        format::encode(MAGIC, &header, &payload)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (header, payload): (Header, _) = format::decode(MAGIC, bytes)?;
        let mut reader = PayloadReader::new(payload);
        let width = 4 * header.codebook_size;
        let mut clips = Vec::with_capacity(header.clips.len());
        for (clip_id, n) in header.clips {
            let mut chunks = Vec::with_capacity(n);
            for _ in 0..n {
                chunks.push(FeatureVector::new(header.codebook_size, reader.u32s(width)?)?);
            }
            clips.push(ClipFeatures { clip_id, chunks });
        }
        reader.finish()?;
        Ok(Self {
            split: header.split,
            compression: header.compression,
            codebook_size: header.codebook_size,
            clips,
        })
    }
}
