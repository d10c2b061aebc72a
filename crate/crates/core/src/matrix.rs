// SPDX-License-Identifier: Apache-2.0

//! Dense row-major half-precision matrices and their on-disk formats.
//!
//! Two formats are understood:
//!
//! - `RMAT`: the 4-byte magic `RMAT`, little-endian `u32` rows and cols, then
//!   `rows * cols` little-endian 16-bit patterns in row-major order.
//! - CSV: one matrix row per line, comma-separated literals accepted by
//!   [`F16::parse_literal`].

use std::io::{BufRead, Read, Write};
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::fp16::F16;

pub const RMAT_MAGIC: &[u8; 4] = b"RMAT";

#[derive(Clone, PartialEq, Eq)]
pub struct MatF16 {
    rows: usize,
    cols: usize,
    data: Vec<F16>,
}

impl std::fmt::Debug for MatF16 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "MatF16({}x{})", self.rows, self.cols)
    }
}

impl MatF16 {
    pub fn new(rows: usize, cols: usize, data: Vec<F16>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} elements, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(MatF16 { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        MatF16 {
            rows,
            cols,
            data: vec![F16::ZERO; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> F16) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        MatF16 { rows, cols, data }
    }

    pub fn from_bits(rows: usize, cols: usize, bits: &[u16]) -> Result<Self> {
        Self::new(
            rows,
            cols,
            bits.iter().copied().map(F16::from_bits).collect(),
        )
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |r, c| if r == c { F16::ONE } else { F16::ZERO })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> F16 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: F16) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[F16] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[F16] {
        &self.data
    }

    pub fn transpose(&self) -> MatF16 {
        MatF16::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    /// Positions whose bit patterns differ, in row-major order.
    pub fn bit_diff(&self, other: &MatF16) -> Vec<(usize, usize)> {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .enumerate()
            .filter(|(_, (a, b))| a.to_bits() != b.to_bits())
            .map(|(i, _)| (i / self.cols, i % self.cols))
            .collect()
    }

    pub fn random(rows: usize, cols: usize, mix: ValueMix, rng: &mut impl Rng) -> MatF16 {
        MatF16::from_fn(rows, cols, |_, _| mix.sample(rng))
    }

    pub fn write_rmat(&self, mut w: impl Write) -> Result<()> {
        w.write_all(RMAT_MAGIC)?;
        w.write_all(&(self.rows as u32).to_le_bytes())?;
        w.write_all(&(self.cols as u32).to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.data.len() * 2);
        for v in &self.data {
            buf.extend_from_slice(&v.to_bits().to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_rmat(mut r: impl Read) -> Result<MatF16> {
        let mut header = [0u8; 12];
        r.read_exact(&mut header)
            .map_err(|_| Error::Format("truncated RMAT header".into()))?;
        if &header[..4] != RMAT_MAGIC {
            return Err(Error::Format("missing RMAT magic".into()));
        }
        let rows = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
        let cols = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Format("RMAT shape overflows".into()))?;
        let mut payload = Vec::new();
        r.read_to_end(&mut payload)?;
        if payload.len() != n * 2 {
            return Err(Error::Format(format!(
                "RMAT {rows}x{cols} expects {} payload bytes, found {}",
                n * 2,
                payload.len()
            )));
        }
        let data = payload
            .chunks_exact(2)
            .map(|b| F16::from_bits(u16::from_le_bytes([b[0], b[1]])))
            .collect();
        MatF16::new(rows, cols, data)
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        for r in 0..self.rows {
            let line: Vec<String> = self
                .row(r)
                .iter()
                .map(|v| format!("{:#06x}", v.to_bits()))
                .collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv(r: impl BufRead) -> Result<MatF16> {
        let mut data = Vec::new();
        let mut rows = 0;
        let mut cols = None;
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            match cols {
                None => cols = Some(fields.len()),
                Some(c) if c != fields.len() => {
                    return Err(Error::Format(format!(
                        "CSV line {} has {} fields, expected {c}",
                        i + 1,
                        fields.len()
                    )))
                }
                _ => {}
            }
            for f in fields {
                data.push(F16::parse_literal(f)?);
            }
            rows += 1;
        }
        MatF16::new(rows, cols.unwrap_or(0), data)
    }

    /// Loads a matrix, picking the format from the file's leading bytes.
    pub fn load(path: impl AsRef<Path>) -> Result<MatF16> {
        let bytes = std::fs::read(path)?;
        if bytes.starts_with(RMAT_MAGIC) {
            MatF16::read_rmat(&bytes[..])
        } else {
            MatF16::read_csv(&bytes[..])
        }
    }

    /// Saves as RMAT, or as CSV when the path ends in `.csv`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
        {
            self.write_csv(file)
        } else {
            self.write_rmat(file)
        }
    }
}

/// Distribution of random operand values.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValueMix {
    /// Normal values with magnitudes in [2^-4, 2^2); keeps long reductions
    /// finite.
    Moderate,
    /// Mostly normals across the whole range, with subnormals, signed zeros
    /// and the occasional infinity.
    Corners,
}

impl ValueMix {
    pub fn sample(self, rng: &mut impl Rng) -> F16 {
        let sign: u16 = if rng.gen::<bool>() { 0x8000 } else { 0 };
        let mant: u16 = rng.gen_range(0..0x400);
        match self {
            ValueMix::Moderate => {
                let exp: u16 = rng.gen_range(11..17);
                F16::from_bits(sign | exp << 10 | mant)
            }
            ValueMix::Corners => {
                let pick = rng.gen_range(0..100);
                let bits = match pick {
                    0..=59 => rng.gen_range(9u16..22) << 10 | mant,
                    60..=74 => rng.gen_range(1u16..31) << 10 | mant,
                    75..=87 => mant.max(1),
                    88..=98 => 0,
                    _ => 0x7C00,
                };
                F16::from_bits(sign | bits)
            }
        }
    }
}
