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

//! TOML text files: intrinsics, plane lists, configs and reports.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{read_file, write_file};
use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, Plane};
use crate::plane_detection::DetectedPlane;

/// One plane `nx·a + ny·b + nd·c3 + c = 0` with its support.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaneRecord {
    pub nx: f64,
    pub ny: f64,
    pub nd: f64,
    pub c: f64,
    pub inlier_count: usize,
    pub coverage: f64,
}

impl PlaneRecord {
    pub fn new(plane: &Plane, inlier_count: usize, coverage: f64) -> Self {
        Self {
            nx: plane.normal[0],
            ny: plane.normal[1],
            nd: plane.normal[2],
            c: plane.offset,
            inlier_count,
            coverage,
        }
    }

    pub fn plane(&self) -> Plane {
        Plane {
            normal: [self.nx, self.ny, self.nd],
            offset: self.c,
        }
    }
}

impl From<&DetectedPlane> for PlaneRecord {
    fn from(p: &DetectedPlane) -> Self {
        Self::new(&p.plane, p.inlier_count(), p.coverage)
    }
}

/// `[[plane]]` tables in order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlaneList {
    /// `"metric"` for camera-frame planes, `"normalized"` for planes in
    /// `(x_norm, y_norm, depth)` space.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<String>,
    #[serde(default, rename = "plane")]
    pub planes: Vec<PlaneRecord>,
}

pub fn to_toml<T: Serialize>(value: &T) -> Result<String> {
    toml::to_string(value).map_err(|e| Error::config(format!("cannot encode TOML: {e}")))
}

pub fn from_toml<T: DeserializeOwned>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| {
        let offset = e.span().map_or(0, |s| s.start);
        Error::format(offset, e.message().to_string())
    })
}

pub fn write_toml<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    write_file(path, to_toml(value)?.as_bytes())
}

pub fn read_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = read_file(path)?;
    let text = std::str::from_utf8(&bytes).map_err(|e| Error::format(e.valid_up_to(), "not UTF-8"))?;
    from_toml(text)
}

pub fn write_intrinsics(k: &CameraIntrinsics, path: &Path) -> Result<()> {
    write_toml(k, path)
}

pub fn read_intrinsics(path: &Path) -> Result<CameraIntrinsics> {
    let k: CameraIntrinsics = read_toml(path)?;
    k.validate()?;
    Ok(k)
}

pub fn write_plane_list(list: &PlaneList, path: &Path) -> Result<()> {
    write_toml(list, path)
}

pub fn read_plane_list(path: &Path) -> Result<PlaneList> {
    read_toml(path)
}
