// SPDX-License-Identifier: Apache-2.0

//! Cycle-level model of a parametric FP16 GEMM accelerator built from a
//! semi-systolic array of fused multiply-add units, together with its memory
//! streamer, a bit-exact reference, and analytical performance, energy and
//! area models.

pub mod config;
pub mod cost;
pub mod datapath;
pub mod error;
pub mod fp16;
pub mod golden;
pub mod matrix;
pub mod perf;
pub mod streamer;
pub mod tiler;
pub mod trace;
pub mod workloads;

pub use config::Geometry;
pub use error::{Error, Result};
pub use fp16::F16;
pub use golden::GemmProblem;
pub use matrix::MatF16;
