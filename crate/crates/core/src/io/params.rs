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

//! Block parameter binary.
//!
//! ```text
//! "DAVP"
//! u32 c_in, u32 c_embed, u32 c_orange, u32 scale_logits (0 or 1)
//! f64 eps_bn
//! 26 × { u32 n, n × f32 }     tensors in BlockParams::tensors() order
//! ```
//!
//! Weight matrices are `out × in` and stored column-major (the element at
//! `(r, c)` sits at index `c·out + r`); vectors are stored in order.

use std::path::Path;

use super::{read_file, write_file, Cursor};
use crate::block::{BlockConfig, BlockParams};
use crate::error::{Error, Result};

pub const PARAMS_MAGIC: &[u8; 4] = b"DAVP";
/// Readers refuse channel counts above this.
pub const MAX_CHANNELS: u32 = 1 << 16;

pub fn params_to_bytes(cfg: &BlockConfig, params: &BlockParams) -> Result<Vec<u8>> {
    if !params.config_matches(cfg) {
        return Err(Error::config("parameters do not match the block configuration"));
    }
    let mut out = Vec::new();
    out.extend_from_slice(PARAMS_MAGIC);
    for v in [cfg.c_in, cfg.c_embed, cfg.c_orange, cfg.scale_logits as usize] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&cfg.eps_bn.to_le_bytes());
    for (_, t) in params.tensors() {
        out.extend_from_slice(&(t.len() as u32).to_le_bytes());
        for v in t {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn params_from_bytes(bytes: &[u8]) -> Result<(BlockConfig, BlockParams)> {
    let mut cur = Cursor::new(bytes);
    if cur.take(4, "magic")? != PARAMS_MAGIC {
        return Err(Error::format(0, "bad magic, expected DAVP"));
    }
    let mut channels = [0usize; 3];
    for (slot, name) in channels.iter_mut().zip(["c_in", "c_embed", "c_orange"]) {
        let at = cur.position();
        let v = cur.u32(name)?;
        if v == 0 || v > MAX_CHANNELS {
            return Err(Error::format(at, format!("{name} = {v} out of range")));
        }
        *slot = v as usize;
    }
    let at = cur.position();
    let scale_logits = match cur.u32("scale flag")? {
        0 => false,
        1 => true,
        other => return Err(Error::format(at, format!("scale flag must be 0 or 1, got {other}"))),
    };
    let at = cur.position();
    let eps_bn = cur.f64("eps")?;
    let cfg = BlockConfig {
        c_in: channels[0],
        c_embed: channels[1],
        c_orange: channels[2],
        eps_bn,
        scale_logits,
    };
    cfg.validate().map_err(|e| Error::format(at, e.to_string()))?;
    let mut tensors = Vec::new();
    for (i, (r, c)) in BlockParams::shapes(&cfg).into_iter().enumerate() {
        let at = cur.position();
        let n = cur.u32("tensor length")? as usize;
        if n != r * c {
            return Err(Error::format(at, format!("tensor {i} has length {n}, expected {}", r * c)));
        }
        let raw = cur.take(4 * n, "tensor data")?;
        tensors.push(
            raw.chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
                .collect::<Vec<f64>>(),
        );
    }
    cur.finish()?;
    let params = BlockParams::from_tensors(&cfg, &tensors)?;
    Ok((cfg, params))
}

pub fn write_params(cfg: &BlockConfig, params: &BlockParams, path: &Path) -> Result<()> {
    write_file(path, &params_to_bytes(cfg, params)?)
}

pub fn read_params(path: &Path) -> Result<(BlockConfig, BlockParams)> {
    params_from_bytes(&read_file(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_bytes() {
        let cfg = BlockConfig {
            c_in: 3,
            c_embed: 4,
            c_orange: 2,
            ..Default::default()
        };
        let p = BlockParams::random(&cfg, &mut ChaCha8Rng::seed_from_u64(1));
        let bytes = params_to_bytes(&cfg, &p).unwrap();
        let (cfg2, p2) = params_from_bytes(&bytes).unwrap();
        assert_eq!(cfg2, cfg);
        assert_eq!(params_to_bytes(&cfg2, &p2).unwrap(), bytes);
        assert!(params_from_bytes(&bytes[..bytes.len() - 2]).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(params_from_bytes(&extra).is_err());
    }
}
