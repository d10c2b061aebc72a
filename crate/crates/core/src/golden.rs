// SPDX-License-Identifier: Apache-2.0

//! Untimed GEMM reference.
//!
//! Each output element is a left fold of fused multiply-adds along the
//! reduction dimension, starting from +0. This is the order in which the
//! array's FMA chain and ring feedback visit `n`, so the cycle model must
//! agree with it bit for bit.

use crate::config::Geometry;
use crate::error::{Error, Result};
use crate::fp16::{fma, F16};
pub use crate::matrix::MatF16;

/// `Z = X * W` with `X: M x N` and `W: N x K`.
#[derive(Clone, Debug)]
pub struct GemmProblem {
    pub x: MatF16,
    pub w: MatF16,
}

impl GemmProblem {
    pub fn new(x: MatF16, w: MatF16) -> Result<Self> {
        if x.cols() != w.rows() {
            return Err(Error::Dimension(format!(
                "X is {}x{} but W is {}x{}",
                x.rows(),
                x.cols(),
                w.rows(),
                w.cols()
            )));
        }
        Ok(GemmProblem { x, w })
    }

    pub fn m(&self) -> usize {
        self.x.rows()
    }

    pub fn n(&self) -> usize {
        self.x.cols()
    }

    pub fn k(&self) -> usize {
        self.w.cols()
    }

    pub fn macs(&self) -> u64 {
        (self.m() * self.n() * self.k()) as u64
    }
}

fn reduce(p: &GemmProblem, pad_steps: usize) -> MatF16 {
    let (m, n, k) = (p.m(), p.n(), p.k());
    let mut z = MatF16::zeros(m, k);
    let mut acc = vec![F16::ZERO; k];
    for row in 0..m {
        acc.fill(F16::ZERO);
        let xr = p.x.row(row);
        for (step, &x) in xr.iter().enumerate().take(n) {
            let wr = p.w.row(step);
            for (a, &w) in acc.iter_mut().zip(wr) {
                *a = fma(x, w, *a);
            }
        }
        for _ in 0..pad_steps {
            for a in acc.iter_mut() {
                *a = fma(F16::ZERO, F16::ZERO, *a);
            }
        }
        for (col, &a) in acc.iter().enumerate() {
            z.set(row, col, a);
        }
    }
    z
}

/// Reference product with one rounding per reduction step.
pub fn gemm_ordered(p: &GemmProblem) -> Result<MatF16> {
    check(p)?;
    Ok(reduce(p, 0))
}

/// Same as [`gemm_ordered`] followed by the zero steps the array executes when
/// the reduction length is padded up to a multiple of `H`.
///
/// A padding step computes `fma(+0, +0, acc)`, which is the identity except
/// that it turns a `-0` accumulator into `+0`.
pub fn gemm_padded(p: &GemmProblem, g: &Geometry) -> Result<MatF16> {
    check(p)?;
    let n_pad = p.n().div_ceil(g.h) * g.h;
    Ok(reduce(p, n_pad - p.n()))
}

fn check(p: &GemmProblem) -> Result<()> {
    if p.x.cols() != p.w.rows() {
        return Err(Error::Dimension(format!(
            "X has {} columns but W has {} rows",
            p.x.cols(),
            p.w.rows()
        )));
    }
    Ok(())
}
