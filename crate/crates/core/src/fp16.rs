// SPDX-License-Identifier: Apache-2.0

//! IEEE 754 binary16 scalars.
//!
//! Only round-to-nearest-even is implemented. Subnormals are produced and
//! consumed exactly (no flush-to-zero) and every NaN result is the canonical
//! quiet NaN `0x7E00`.
//!
//! Internally a finite half is handled as an integer multiple of the smallest
//! subnormal, 2^-24. A product of two halves is then an exact multiple of
//! 2^-48 below 2^81, so the fused multiply-add keeps the whole product-sum in
//! an `i128`-sized magnitude and rounds exactly once.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

const SIGN_MASK: u16 = 0x8000;
const EXP_MASK: u16 = 0x7C00;
const MANT_MASK: u16 = 0x03FF;
const MANT_BITS: u32 = 10;
/// Largest finite magnitude in units of 2^-24.
const MAX_FINITE_UNITS: u64 = 0x7FF << 29;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct F16(u16);

impl F16 {
    pub const ZERO: F16 = F16(0x0000);
    pub const NEG_ZERO: F16 = F16(0x8000);
    pub const ONE: F16 = F16(0x3C00);
    pub const INFINITY: F16 = F16(0x7C00);
    pub const NEG_INFINITY: F16 = F16(0xFC00);
    /// The canonical quiet NaN returned by every operation that yields NaN.
    pub const NAN: F16 = F16(0x7E00);
    pub const MAX: F16 = F16(0x7BFF);
    pub const MIN_POSITIVE_SUBNORMAL: F16 = F16(0x0001);

    #[inline]
    pub const fn from_bits(bits: u16) -> Self {
        F16(bits)
    }

    #[inline]
    pub const fn to_bits(self) -> u16 {
        self.0
    }

    #[inline]
    pub const fn is_sign_negative(self) -> bool {
        self.0 & SIGN_MASK != 0
    }

    #[inline]
    pub const fn is_nan(self) -> bool {
        self.0 & EXP_MASK == EXP_MASK && self.0 & MANT_MASK != 0
    }

    #[inline]
    pub const fn is_infinite(self) -> bool {
        self.0 & !SIGN_MASK == EXP_MASK
    }

    #[inline]
    pub const fn is_zero(self) -> bool {
        self.0 & !SIGN_MASK == 0
    }

    #[inline]
    pub const fn neg(self) -> Self {
        F16(self.0 ^ SIGN_MASK)
    }

    pub fn classify(self) -> (FpClass, Sign) {
        classify(self)
    }

    /// Magnitude of a finite value as an integer multiple of 2^-24.
    #[inline]
    fn units(self) -> u64 {
        let exp = (self.0 & EXP_MASK) >> MANT_BITS;
        let mant = (self.0 & MANT_MASK) as u64;
        if exp == 0 {
            mant
        } else {
            (mant | 1 << MANT_BITS) << (exp - 1)
        }
    }

    /// Exact widening conversion.
    pub fn to_f64(self) -> f64 {
        if self.is_nan() {
            return f64::NAN;
        }
        let mag = if self.is_infinite() {
            f64::INFINITY
        } else {
            self.units() as f64 * 2f64.powi(-24)
        };
        if self.is_sign_negative() {
            -mag
        } else {
            mag
        }
    }

    /// Accepts either a decimal literal (see [`from_decimal`]) or a raw
    /// `0x`-prefixed bit pattern.
    pub fn parse_literal(text: &str) -> Result<Self> {
        let t = text.trim();
        if let Some(hex) = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
            return u16::from_str_radix(hex, 16)
                .map(F16)
                .map_err(|_| Error::MalformedLiteral(text.to_string()));
        }
        from_decimal(t)
    }
}

impl fmt::Debug for F16 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F16({:#06x} = {:?})", self.0, self.to_f64())
    }
}

impl fmt::Display for F16 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.to_f64(), f)
    }
}

impl FromStr for F16 {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        F16::parse_literal(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FpClass {
    Zero,
    Subnormal,
    Normal,
    Infinite,
    Nan,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Positive,
    Negative,
}

/// Rounding modes accepted by configuration. Anything other than
/// round-to-nearest-even is rejected when parsed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RoundingMode {
    #[default]
    NearestEven,
}

impl FromStr for RoundingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rne" | "nearest_even" | "nearest-even" => Ok(RoundingMode::NearestEven),
            other => Err(Error::Config(format!(
                "unsupported rounding mode '{other}', only round-to-nearest-even is available"
            ))),
        }
    }
}

pub fn classify(a: F16) -> (FpClass, Sign) {
    let sign = if a.is_sign_negative() {
        Sign::Negative
    } else {
        Sign::Positive
    };
    let exp = a.0 & EXP_MASK;
    let mant = a.0 & MANT_MASK;
    let class = match (exp, mant) {
        (0, 0) => FpClass::Zero,
        (0, _) => FpClass::Subnormal,
        (EXP_MASK, 0) => FpClass::Infinite,
        (EXP_MASK, _) => FpClass::Nan,
        _ => FpClass::Normal,
    };
    (class, sign)
}

#[inline]
fn signed_zero(negative: bool) -> F16 {
    if negative {
        F16::NEG_ZERO
    } else {
        F16::ZERO
    }
}

/// Encodes an exactly representable magnitude given in units of 2^-24.
/// Magnitudes past the finite range encode as infinity.
#[inline]
fn encode_units(negative: bool, units: u64) -> F16 {
    let sign = if negative { SIGN_MASK } else { 0 };
    if units < 1 << MANT_BITS {
        return F16(sign | units as u16);
    }
    if units > MAX_FINITE_UNITS {
        return F16(sign | EXP_MASK);
    }
    let msb = 63 - units.leading_zeros();
    let shift = msb - MANT_BITS;
    debug_assert_eq!(units & ((1 << shift) - 1), 0, "inexact encode");
    let biased = (shift + 1) as u16;
    let mant = ((units >> shift) as u16) & MANT_MASK;
    F16(sign | biased << MANT_BITS | mant)
}

/// Rounds a non-zero magnitude given in units of 2^-48 to the nearest half,
/// ties to even.
#[inline]
fn round_units48(negative: bool, mag: u128) -> F16 {
    debug_assert!(mag != 0);
    let msb = 127 - mag.leading_zeros();
    // Subnormal spacing is 2^-24 = 2^24 units; normal spacing keeps 11
    // significant bits.
    let shift = (msb.saturating_sub(MANT_BITS)).max(24);
    let mut q = mag >> shift;
    let rem = mag & ((1u128 << shift) - 1);
    let half = 1u128 << (shift - 1);
    if rem > half || (rem == half && q & 1 == 1) {
        q += 1;
    }
    if q == 0 {
        return signed_zero(negative);
    }
    // q has at most 12 bits and shift is below 72, so this fits a u64.
    encode_units(negative, (q << (shift - 24)) as u64)
}

/// Fused multiply-add: `a * b + c` with a single rounding of the exact result.
pub fn fma(a: F16, b: F16, c: F16) -> F16 {
    if a.is_nan() || b.is_nan() || c.is_nan() {
        return F16::NAN;
    }
    let prod_neg = a.is_sign_negative() ^ b.is_sign_negative();
    if a.is_infinite() || b.is_infinite() {
        if a.is_zero() || b.is_zero() {
            return F16::NAN;
        }
        if c.is_infinite() && c.is_sign_negative() != prod_neg {
            return F16::NAN;
        }
        return if prod_neg {
            F16::NEG_INFINITY
        } else {
            F16::INFINITY
        };
    }
    if c.is_infinite() {
        return c;
    }

    let prod = a.units() as u128 * b.units() as u128;
    let addend = (c.units() as u128) << 24;
    let c_neg = c.is_sign_negative();
    let (neg, mag) = if prod_neg == c_neg {
        (prod_neg, prod + addend)
    } else if prod >= addend {
        (prod_neg, prod - addend)
    } else {
        (c_neg, addend - prod)
    };
    if mag == 0 {
        // Exact zero: the sum of two zeros keeps their common sign, any other
        // cancellation is +0 under round-to-nearest.
        return signed_zero(prod == 0 && addend == 0 && prod_neg && c_neg);
    }
    round_units48(neg, mag)
}

/// Rounded product, `a * b`.
pub fn mul(a: F16, b: F16) -> F16 {
    fma(a, b, F16::NEG_ZERO)
}

/// Rounded sum, `a + b`.
pub fn add(a: F16, b: F16) -> F16 {
    fma(a, F16::ONE, b)
}

/// Parses a decimal literal and rounds it to the nearest half, ties to even.
///
/// Accepts an optional sign, digits with an optional fraction and exponent,
/// and the words `inf`, `infinity` and `nan` in any case.
pub fn from_decimal(text: &str) -> Result<F16> {
    let malformed = || Error::MalformedLiteral(text.to_string());
    let t = text.trim();
    let (negative, body) = match t.as_bytes().first() {
        Some(b'-') => (true, &t[1..]),
        Some(b'+') => (false, &t[1..]),
        _ => (false, t),
    };
    let lower = body.to_ascii_lowercase();
    match lower.as_str() {
        "inf" | "infinity" => {
            return Ok(if negative {
                F16::NEG_INFINITY
            } else {
                F16::INFINITY
            })
        }
        "nan" => return Ok(F16::NAN),
        _ => {}
    }

    let (mantissa, exp10) = match lower.find('e') {
        Some(i) => {
            let e: i64 = lower[i + 1..].parse().map_err(|_| malformed())?;
            (&lower[..i], e)
        }
        None => (lower.as_str(), 0),
    };
    let (int_part, frac_part) = match mantissa.find('.') {
        Some(i) => (&mantissa[..i], &mantissa[i + 1..]),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(malformed());
    }
    if !int_part
        .bytes()
        .chain(frac_part.bytes())
        .all(|b| b.is_ascii_digit())
    {
        return Err(malformed());
    }
    // Anything this far out is zero or infinity; clamping keeps the bignum
    // arithmetic bounded.
    let exp10 = exp10.clamp(-400, 400) - frac_part.len() as i64;
    let digits = format!("{int_part}{frac_part}");
    let digits = BigUint::parse_bytes(digits.as_bytes(), 10).ok_or_else(malformed)?;
    if digits.is_zero() {
        return Ok(signed_zero(negative));
    }

    // value * 2^24 = num / den, i.e. the value measured in subnormal units.
    let ten = BigUint::from(10u32);
    let mut num = digits << 24usize;
    let mut den = BigUint::one();
    if exp10 >= 0 {
        num *= ten.pow(exp10 as u32);
    } else {
        den = ten.pow((-exp10) as u32);
    }

    let limit = BigUint::from(MAX_FINITE_UNITS + (1 << 28)); // halfway to 2^16
    if num >= &limit * &den {
        return Ok(F16::INFINITY.with_sign(negative));
    }

    // floor(log2(num / den))
    let mut msb = num.bits() as i64 - den.bits() as i64;
    let below = if msb >= 0 {
        num < (&den << msb as usize)
    } else {
        (&num << (-msb) as usize) < den
    };
    if below {
        msb -= 1;
    }
    let shift = (msb - MANT_BITS as i64).max(0) as usize;
    let step = &den << shift;
    let mut q = &num / &step;
    let rem = &num - &q * &step;
    let twice = rem << 1usize;
    if twice > step || (twice == step && q.bit(0)) {
        q += 1u32;
    }
    let q: u64 = q.try_into().map_err(|_| malformed())?;
    if q == 0 {
        return Ok(signed_zero(negative));
    }
    Ok(encode_units(negative, q << shift))
}

impl F16 {
    #[inline]
    fn with_sign(self, negative: bool) -> F16 {
        if negative {
            F16(self.0 | SIGN_MASK)
        } else {
            F16(self.0 & !SIGN_MASK)
        }
    }
}
