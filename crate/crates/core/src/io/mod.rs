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

//! Readers and writers for every on-disk artifact.
//!
//! Each binary format has a pure `*_bytes` pair plus path-based wrappers.
//! Binary integers are little-endian throughout.
//!
//! | artifact        | format                                              |
//! |-----------------|-----------------------------------------------------|
//! | depth map       | PFM, single channel                                 |
//! | DAV             | `DAV1`, `u32` H W H W, `f32` values row-major       |
//! | block params    | `DAVP`, see [`params`]                              |
//! | heatmap, labels | binary PGM / PPM                                    |
//! | intrinsics, plane lists, configs, reports | TOML                      |

pub mod binary;
pub mod params;
pub mod pfm;
pub mod pnm;
pub mod text;

pub use binary::{dav_from_bytes, dav_to_bytes, read_dav, write_dav};
pub use params::{params_from_bytes, params_to_bytes, read_params, write_params};
pub use pfm::{read_pfm, write_pfm, PfmImage};
pub use pnm::{
    heatmap, labels_image, read_pnm, write_heatmap, write_pnm, Colormap, HeatmapStyle, Image,
};
pub use text::{
    from_toml, read_intrinsics, read_plane_list, read_toml, to_toml, write_intrinsics,
    write_plane_list, write_toml, PlaneList, PlaneRecord,
};

use std::path::Path;

use crate::error::{Error, Result};

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// Little-endian cursor over a byte slice that reports offsets on failure.
pub(crate) struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub(crate) fn position(&self) -> usize {
        self.pos
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    pub(crate) fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::format(
                self.bytes.len(),
                format!("truncated {what}: need {n} bytes, {} left", self.remaining()),
            ));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub(crate) fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub(crate) fn f32(&mut self, what: &str) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(Error::format(
                self.pos,
                format!("{} trailing bytes", self.remaining()),
            ));
        }
        Ok(())
    }
}
