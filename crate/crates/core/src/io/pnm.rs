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

//! Binary PGM (`P5`) and PPM (`P6`) images with 8-bit samples, and the
//! heatmap renderer that feeds them.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_file, write_file};
use crate::error::{Error, Result};

/// 8-bit image, one (gray) or three (RGB) channels, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

/// Upper bound on samples accepted by the reader.
pub const MAX_PNM_SAMPLES: usize = 1 << 28;

impl Image {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let magic = match self.channels {
            1 => "P5",
            3 => "P6",
            c => return Err(Error::config(format!("images have 1 or 3 channels, not {c}"))),
        };
        if self.width == 0 || self.height == 0 || self.data.len() != self.width * self.height * self.channels {
            return Err(Error::config("image size does not match its data"));
        }
        let mut out = format!("{magic}\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let channels = match bytes.get(..2) {
            Some(b"P5") => 1,
            Some(b"P6") => 3,
            _ => return Err(Error::format(0, "expected P5 or P6 magic")),
        };
        pos += 2;
        let mut fields = [0usize; 3];
        for (slot, name) in fields.iter_mut().zip(["width", "height", "maxval"]) {
            *slot = header_number(bytes, &mut pos, name)?;
        }
        let [width, height, maxval] = fields;
        if width == 0 || height == 0 {
            return Err(Error::format(pos, "zero image dimension"));
        }
        if maxval != 255 {
            return Err(Error::format(pos, format!("only maxval 255 is supported, got {maxval}")));
        }
        if bytes.get(pos).is_none_or(|b| !b.is_ascii_whitespace()) {
            return Err(Error::format(pos, "missing separator after maxval"));
        }
        pos += 1;
        let count = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(channels))
            .filter(|n| *n <= MAX_PNM_SAMPLES)
            .ok_or_else(|| Error::format(pos, "image too large"))?;
        let payload = &bytes[pos..];
        if payload.len() != count {
            return Err(Error::format(
                pos + payload.len().min(count),
                format!("payload is {} bytes, expected {count}", payload.len()),
            ));
        }
        Ok(Self {
            width,
            height,
            channels,
            data: payload.to_vec(),
        })
    }
}

/// Skips whitespace and `#` comments, then reads a decimal number.
fn header_number(bytes: &[u8], pos: &mut usize, name: &str) -> Result<usize> {
    loop {
        match bytes.get(*pos) {
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(b'#') => {
                while bytes.get(*pos).is_some_and(|b| *b != b'\n') {
                    *pos += 1;
                }
            }
            _ => break,
        }
    }
    let start = *pos;
    let mut value: usize = 0;
    while let Some(b) = bytes.get(*pos).filter(|b| b.is_ascii_digit()) {
        value = value
            .checked_mul(10)
            .and_then(|v| v.checked_add((b - b'0') as usize))
            .ok_or_else(|| Error::format(start, format!("{name} overflows")))?;
        *pos += 1;
    }
    if *pos == start {
        return Err(Error::format(start, format!("expected {name}")));
    }
    Ok(value)
}

pub fn write_pnm(image: &Image, path: &Path) -> Result<()> {
    write_file(path, &image.to_bytes()?)
}

pub fn read_pnm(path: &Path) -> Result<Image> {
    Image::from_bytes(&read_file(path)?)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Colormap {
    #[default]
    Grayscale,
    /// Blue through white to red; warm marks high values.
    WarmCool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatmapStyle {
    pub min: f64,
    pub max: f64,
    pub colormap: Colormap,
}

impl HeatmapStyle {
    pub fn validate(&self) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max) {
            return Err(Error::config(format!(
                "heatmap range needs finite min < max, got [{}, {}]",
                self.min, self.max
            )));
        }
        Ok(())
    }

    fn quantize(t: f64) -> u8 {
        (255.0 * t).round() as u8
    }

    /// Color of `value` after clamping to `[min, max]`.
    pub fn color(&self, value: f64) -> [u8; 3] {
        let t = ((value - self.min) / (self.max - self.min)).clamp(0.0, 1.0);
        match self.colormap {
            Colormap::Grayscale => [Self::quantize(t); 3],
            Colormap::WarmCool if t < 0.5 => {
                let s = Self::quantize(2.0 * t);
                [s, s, 255]
            }
            Colormap::WarmCool => {
                let s = Self::quantize(2.0 - 2.0 * t);
                [255, s, s]
            }
        }
    }
}

/// Renders a row-major grid; grayscale gives a PGM-ready image, warm-cool a PPM.
pub fn heatmap(values: &[f64], height: usize, width: usize, style: &HeatmapStyle) -> Result<Image> {
    style.validate()?;
    if values.len() != height * width || values.is_empty() {
        return Err(Error::config("heatmap grid size mismatch"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::config("heatmap values must be finite"));
    }
    let channels = match style.colormap {
        Colormap::Grayscale => 1,
        Colormap::WarmCool => 3,
    };
    let mut data = Vec::with_capacity(values.len() * channels);
    for v in values {
        let c = style.color(*v);
        data.extend_from_slice(&c[..channels]);
    }
    Ok(Image {
        width,
        height,
        channels,
        data,
    })
}

pub fn write_heatmap(values: &[f64], height: usize, width: usize, style: &HeatmapStyle, path: &Path) -> Result<()> {
    write_pnm(&heatmap(values, height, width, style)?, path)
}

/// Label grid as an 8-bit PGM; unlabeled pixels are 255.
pub fn labels_image(labels: &[Option<usize>], height: usize, width: usize) -> Result<Image> {
    if labels.len() != height * width {
        return Err(Error::config("label grid size mismatch"));
    }
    let data = labels
        .iter()
        .map(|l| match l {
            Some(i) if *i < 255 => Ok(*i as u8),
            Some(i) => Err(Error::config(format!("label {i} does not fit in 8 bits"))),
            None => Ok(255),
        })
        .collect::<Result<Vec<u8>>>()?;
    Ok(Image {
        width,
        height,
        channels: 1,
        data,
    })
}
