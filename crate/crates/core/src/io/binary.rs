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

//! The DAV binary: magic `DAV1`, four `u32` (H, W, H, W), then `(HW)²`
//! `f32` scores, row-major over `(p_row, p_col, q_row, q_col)`.

use std::path::Path;

use super::{read_file, write_file, Cursor};
use crate::dav::DAVolume;
use crate::error::{Error, Result};

pub const DAV_MAGIC: &[u8; 4] = b"DAV1";
/// Magic plus four header integers.
pub const DAV_HEADER_LEN: usize = 20;

/// Scores are narrowed to `f32`.
pub fn dav_to_bytes(dav: &DAVolume) -> Vec<u8> {
    let mut out = Vec::with_capacity(DAV_HEADER_LEN + 4 * dav.values().len());
    out.extend_from_slice(DAV_MAGIC);
    for d in [dav.h, dav.w, dav.h, dav.w] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in dav.values() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn dav_from_bytes(bytes: &[u8]) -> Result<DAVolume> {
    let mut cur = Cursor::new(bytes);
    if cur.take(4, "magic")? != DAV_MAGIC {
        return Err(Error::format(0, "bad magic, expected DAV1"));
    }
    let dims = [cur.u32("H")?, cur.u32("W")?, cur.u32("H")?, cur.u32("W")?];
    if dims[0] != dims[2] || dims[1] != dims[3] {
        return Err(Error::format(4, format!("inconsistent dimensions {dims:?}")));
    }
    let (h, w) = (dims[0] as usize, dims[1] as usize);
    let count = h
        .checked_mul(w)
        .and_then(|n| n.checked_mul(n))
        .filter(|n| n.checked_mul(4).is_some())
        .ok_or_else(|| Error::format(4, "dimensions overflow"))?;
    if cur.remaining() != 4 * count {
        return Err(Error::format(
            DAV_HEADER_LEN,
            format!(
                "size mismatch: header implies {} payload bytes, found {}",
                4 * count,
                cur.remaining()
            ),
        ));
    }
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        values.push(cur.f32("score")? as f64);
    }
    DAVolume::from_values(h, w, values)
}

pub fn write_dav(dav: &DAVolume, path: &Path) -> Result<()> {
    write_file(path, &dav_to_bytes(dav))
}

pub fn read_dav(path: &Path) -> Result<DAVolume> {
    dav_from_bytes(&read_file(path)?)
}
