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

//! Depth-attention volumes (DAV) for monocular depth estimation.
//!
//! The crate covers the full desk-scale pipeline:
//!
//! * [`geometry`]: pinhole back-projection, plane algebra and Sobel normals.
//! * [`plane_detection`]: sequential RANSAC extraction of prominent planes.
//! * [`dav`]: ground-truth attention volumes built from depth and planes.
//! * [`block`]: the non-local depth-attention block with exact gradients.
//! * [`losses`]: attention and depth training losses with gradients.
//! * [`metrics`]: the depth evaluation suite (REL, RMSE, δ, SI, planarity,
//!   boundary and directed errors).
//! * [`synth`]: procedural planar scenes with exact plane labels.
//! * [`io`]: PFM, PGM/PPM, DAV and parameter binaries, TOML text files.
//! * [`cli`]: the `dav` command-line tool.

pub mod block;
pub mod cli;
pub mod dav;
pub mod error;
pub mod geometry;
pub mod gradcheck;
pub mod io;
pub mod losses;
pub mod metrics;
pub mod plane_detection;
pub mod synth;

pub use error::{Error, Result};
