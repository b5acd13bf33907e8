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

use std::path::PathBuf;

/// Errors produced anywhere in the pipeline.
#[derive(thiserror::Error, Debug)]
pub enum Error {
    /// Shapes, sizes or parameters that do not fit together.
    #[error("configuration error: {0}")]
    Config(String),
    /// Input that carries too little information (too few points, empty masks).
    #[error("degenerate input: {0}")]
    Degenerate(String),
    /// Index outside a container.
    #[error("index out of bounds: {0}")]
    Bounds(String),
    /// Malformed file content; `offset` is the byte position of the problem.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },
    /// Training produced a non-finite loss.
    #[error("divergence: non-finite loss at step {step}")]
    Divergence { step: usize },
    /// Scene generation gave up.
    #[error("generation error: {0}")]
    Generation(String),
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }

    pub(crate) fn format(offset: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: msg.into(),
        }
    }
}
