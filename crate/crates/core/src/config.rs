// SPDX-License-Identifier: Apache-2.0

//! Accelerator geometry.
//!
//! The array has `L` rows of `H` chained FMA units, each with `P` internal
//! pipeline registers. One memory line carries `H * (P + 1)` half-precision
//! elements, which is also the number of output columns a row keeps in
//! flight.

use serde::Serialize;

use crate::error::{Error, Result};

/// Operand width in bits. The engine only computes in binary16.
pub const ELEM_BITS: usize = 16;
/// Width of one memory port of the shallow interconnect branch.
pub const PORT_BITS: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Geometry {
    /// FMA units chained along a row.
    pub h: usize,
    /// Rows of FMA units.
    pub l: usize,
    /// Pipeline registers inside each FMA.
    pub p: usize,
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry::DEFAULT
    }
}

impl Geometry {
    /// The 32-FMA, 9-port design point.
    pub const DEFAULT: Geometry = Geometry { h: 4, l: 8, p: 3 };

    pub fn new(h: usize, l: usize, p: usize) -> Result<Self> {
        validate(Geometry { h, l, p })
    }

    /// Builds a geometry from signed values, as read from a config file.
    pub fn from_signed(h: i64, l: i64, p: i64) -> Result<Self> {
        let check = |field, value: i64, min: i64, requirement| {
            if value < min {
                Err(Error::InvalidGeometry {
                    field,
                    value,
                    requirement,
                })
            } else {
                Ok(value as usize)
            }
        };
        Ok(Geometry {
            h: check("H", h, 1, ">= 1")?,
            l: check("L", l, 1, ">= 1")?,
            p: check("P", p, 0, ">= 0")?,
        })
    }

    /// Cycles an operand spends inside one FMA.
    #[inline]
    pub fn fma_latency(&self) -> usize {
        self.p + 1
    }

    #[inline]
    pub fn line_elems(&self) -> usize {
        line_elems(self)
    }

    #[inline]
    pub fn fma_count(&self) -> usize {
        self.h * self.l
    }

    #[inline]
    pub fn required_ports(&self) -> usize {
        required_ports(self)
    }

    pub fn port_width_bits(&self) -> usize {
        self.required_ports() * PORT_BITS
    }
}

pub fn line_elems(g: &Geometry) -> usize {
    g.h * (g.p + 1)
}

/// 32-bit ports needed to move one line per cycle, plus the spare port used
/// for non-word-aligned accesses.
pub fn required_ports(g: &Geometry) -> usize {
    (line_elems(g) * ELEM_BITS).div_ceil(PORT_BITS) + 1
}

pub fn validate(g: Geometry) -> Result<Geometry> {
    if g.h == 0 {
        return Err(Error::InvalidGeometry {
            field: "H",
            value: 0,
            requirement: ">= 1",
        });
    }
    if g.l == 0 {
        return Err(Error::InvalidGeometry {
            field: "L",
            value: 0,
            requirement: ">= 1",
        });
    }
    Ok(g)
}
