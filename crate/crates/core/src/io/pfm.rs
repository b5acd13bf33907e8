// Copyright 2026 The DAV Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
// implied. See the License for the specific language governing
// permissions and limitations under the License.

//! Single-channel PFM.
//!
//! Header `Pf\n<width> <height>\n<scale>\n`, then `f32` samples row by row
//! from the bottom image row to the top. A negative scale marks
//! little-endian samples, a positive one big-endian.

use std::path::Path;

use super::{read_file, write_file};
use crate::error::{Error, Result};
use crate::geometry::DepthMap;

#[derive(Clone, Debug, PartialEq)]
pub struct PfmImage {
    pub width: usize,
    pub height: usize,
    /// Non-zero; its sign selects the byte order.
    pub scale: f32,
    /// Row-major, top row first.
    pub samples: Vec<f32>,
}

/// Upper bound on `width · height` accepted by the reader.
pub const MAX_PFM_PIXELS: usize = 1 << 28;

impl PfmImage {
    pub fn little_endian(&self) -> bool {
        self.scale.is_sign_negative()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        if !(self.scale.is_finite() && self.scale != 0.0) {
            return Err(Error::config("PFM scale must be finite and non-zero"));
        }
        if self.samples.len() != self.width * self.height {
            return Err(Error::config("PFM sample count does not match its size"));
        }
        let mut out = format!("Pf\n{} {}\n{}\n", self.width, self.height, self.scale).into_bytes();
        out.reserve(4 * self.samples.len());
        for row in (0..self.height).rev() {
            for v in &self.samples[row * self.width..(row + 1) * self.width] {
                let b = if self.little_endian() {
                    v.to_le_bytes()
                } else {
                    v.to_be_bytes()
                };
                out.extend_from_slice(&b);
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let magic = token(bytes, &mut pos)?;
        if magic != "Pf" {
            return Err(Error::format(0, format!("expected Pf magic, found {magic:?}")));
        }
        let at = pos;
        let width = parse_dim(&token(bytes, &mut pos)?, at)?;
        let at = pos;
        let height = parse_dim(&token(bytes, &mut pos)?, at)?;
        let at = pos;
        let scale_text = token(bytes, &mut pos)?;
        let scale: f32 = scale_text
            .parse()
            .map_err(|_| Error::format(at, format!("bad scale {scale_text:?}")))?;
        if !(scale.is_finite() && scale != 0.0) {
            return Err(Error::format(at, "scale must be finite and non-zero"));
        }
        // Exactly one whitespace byte separates the header from the payload.
        if bytes.get(pos).is_none_or(|b| !b.is_ascii_whitespace()) {
            return Err(Error::format(pos, "missing separator after scale"));
        }
        pos += 1;
        let count = width
            .checked_mul(height)
            .filter(|n| *n <= MAX_PFM_PIXELS)
            .ok_or_else(|| Error::format(at, "image too large"))?;
        let payload = &bytes[pos..];
        if payload.len() != 4 * count {
            return Err(Error::format(
                pos + payload.len().min(4 * count),
                format!("payload is {} bytes, expected {}", payload.len(), 4 * count),
            ));
        }
        let le = scale.is_sign_negative();
        let mut samples = vec![0f32; count];
        for (k, chunk) in payload.chunks_exact(4).enumerate() {
            let b: [u8; 4] = chunk.try_into().unwrap();
            let v = if le { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
            let (file_row, col) = (k / width, k % width);
            samples[(height - 1 - file_row) * width + col] = v;
        }
        Ok(Self {
            width,
            height,
            scale,
            samples,
        })
    }

    /// Invalid pixels become `0.0`.
    pub fn from_depth(depth: &DepthMap, little_endian: bool) -> Self {
        let samples = (0..depth.len())
            .map(|i| if depth.mask()[i] { depth.values()[i] as f32 } else { 0.0 })
            .collect();
        Self {
            width: depth.width(),
            height: depth.height(),
            scale: if little_endian { -1.0 } else { 1.0 },
            samples,
        }
    }

    /// Finite positive samples are valid, everything else invalid.
    pub fn to_depth(&self) -> Result<DepthMap> {
        DepthMap::from_values(
            self.height,
            self.width,
            self.samples.iter().map(|v| *v as f64).collect(),
        )
    }
}

fn token(bytes: &[u8], pos: &mut usize) -> Result<String> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() && *pos - start < 64 {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::format(start, "truncated header"));
    }
    std::str::from_utf8(&bytes[start..*pos])
        .map(str::to_string)
        .map_err(|_| Error::format(start, "header is not ASCII"))
}

fn parse_dim(text: &str, at: usize) -> Result<usize> {
    match text.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(Error::format(at, format!("bad dimension {text:?}"))),
    }
}

/// Little-endian PFM of `depth`; invalid pixels are written as `0.0`.
pub fn write_pfm(depth: &DepthMap, path: &Path) -> Result<()> {
    write_file(path, &PfmImage::from_depth(depth, true).to_bytes()?)
}

pub fn read_pfm(path: &Path) -> Result<DepthMap> {
    PfmImage::from_bytes(&read_file(path)?)?.to_depth()
}
