// SPDX-License-Identifier: Apache-2.0

mod common;

use num_bigint::BigUint;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use redmule::fp16::{add, fma, from_decimal, mul, F16};

fn lib_fma(a: u16, b: u16, c: u16) -> u16 {
    fma(F16::from_bits(a), F16::from_bits(b), F16::from_bits(c)).to_bits()
}

#[test]
fn oracle_known_values() {
    assert_eq!(common::fma(0x3C00, 0x3C00, 0x3C00), 0x4000);
    assert_eq!(common::fma(0x3C01, 0x3C01, 0x0000), 0x3C02);
    assert_eq!(common::fma(0x7C00, 0x0000, 0x0000), common::QNAN);
    assert_eq!(common::fma(0x7BFF, 0x3C00, 0x7BFF), common::PINF);
    assert_eq!(common::fma(0x8000, 0x3C00, 0x8000), 0x8000);
    assert_eq!(common::fma(0x3C00, 0x3C00, 0xBC00), 0x0000);
    // 2^-25 is exactly half the smallest subnormal: ties to +0.
    assert_eq!(common::fma(0x0001, 0x3800, 0x0000), 0x0000);
    assert_eq!(common::fma(0x0003, 0x3800, 0x0000), 0x0002);
}

#[test]
fn corner_triples_match() {
    let corners = common::corner_values();
    for &a in &corners {
        for &b in &corners {
            for &c in &corners {
                assert_eq!(
                    lib_fma(a, b, c),
                    common::fma(a, b, c),
                    "{a:#06x} {b:#06x} {c:#06x}"
                );
            }
        }
    }
}

#[test]
fn random_triples_match() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xF16);
    for _ in 0..1_000_000 {
        let (a, b, c) = common::random_triple(&mut rng);
        assert_eq!(
            lib_fma(a, b, c),
            common::fma(a, b, c),
            "{a:#06x} {b:#06x} {c:#06x}"
        );
    }
}

#[test]
fn fused_differs_from_two_roundings() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let witness = (0..100_000)
        .map(|_| common::random_triple(&mut rng))
        .find(|&(a, b, c)| {
            let f = common::fma(a, b, c);
            f & 0x7C00 != 0x7C00 && f != common::mul_then_add(a, b, c)
        })
        .expect("a single-rounding witness");
    let (a, b, c) = witness;
    assert_eq!(lib_fma(a, b, c), common::fma(a, b, c));
    let unfused = add(mul(F16::from_bits(a), F16::from_bits(b)), F16::from_bits(c));
    assert_eq!(unfused.to_bits(), common::mul_then_add(a, b, c));
    assert_ne!(unfused.to_bits(), lib_fma(a, b, c));
}

#[test]
fn every_pattern_is_an_fma_identity() {
    // x * 1 + (-0) == x for every non-NaN pattern.
    for bits in 0..=u16::MAX {
        let v = decode_nan(bits);
        let want = if v { common::QNAN } else { bits };
        assert_eq!(lib_fma(bits, 0x3C00, 0x8000), want);
        assert_eq!(common::fma(bits, 0x3C00, 0x8000), want);
    }
}

fn decode_nan(bits: u16) -> bool {
    matches!(common::decode(bits), common::Val::Nan)
}

/// Nearest half to `digits * 10^exp10`, from exact big-integer comparisons
/// against the table of finite values.
fn decimal_oracle(negative: bool, digits: u64, exp10: i32) -> u16 {
    let t = common::finite_table();
    let ten = BigUint::from(10u32);
    let mut num = BigUint::from(digits) << 24usize;
    let mut den = BigUint::from(1u32);
    if exp10 >= 0 {
        num *= ten.pow(exp10 as u32);
    } else {
        den = ten.pow((-exp10) as u32);
    }
    let at = |i: usize| BigUint::from(t[i] as u128) * &den;
    let max = t.len() - 1;
    let ulp = (t[max] - t[max - 1]) as u128;
    let mag = if &num * 2u32 >= BigUint::from(2 * t[max] as u128 + ulp) * &den {
        common::PINF
    } else {
        let (mut lo, mut hi) = (0usize, max);
        while lo < hi {
            let mid = (lo + hi).div_ceil(2);
            if at(mid) <= num {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        if lo == max || at(lo) == num {
            lo as u16
        } else {
            let twice = &num * 2u32;
            let mid = at(lo) + at(lo + 1);
            if twice < mid || (twice == mid && lo % 2 == 0) {
                lo as u16
            } else {
                lo as u16 + 1
            }
        }
    };
    if negative {
        mag | 0x8000
    } else {
        mag
    }
}

#[test]
fn decimal_examples_against_oracle() {
    for (text, neg, d, e) in [
        ("0.1", false, 1, -1),
        ("65519", false, 65519, 0),
        ("65520", false, 65520, 0),
        ("-2.98e-8", true, 298, -10),
        ("5.96e-8", false, 596, -10),
        ("1.0009765625", false, 10009765625, -10),
    ] {
        assert_eq!(
            from_decimal(text).unwrap().to_bits(),
            decimal_oracle(neg, d, e),
            "{text}"
        );
    }
}

proptest! {
    #[test]
    fn decimal_parse_matches_oracle(
        negative in any::<bool>(),
        digits in 1u64..10_000_000_000,
        exp10 in -20i32..8,
    ) {
        let text = format!("{}{digits}e{exp10}", if negative { "-" } else { "" });
        prop_assert_eq!(
            from_decimal(&text).unwrap().to_bits(),
            decimal_oracle(negative, digits, exp10)
        );
    }

    #[test]
    fn fma_matches_oracle(a in any::<u16>(), b in any::<u16>(), c in any::<u16>()) {
        prop_assert_eq!(lib_fma(a, b, c), common::fma(a, b, c));
    }
}

#[test]
fn random_decimal_near_halfway_points() {
    // Midpoints between neighbouring halves are exact decimals; they must go
    // to the even neighbour, and nudging them must go the other way.
    let t = common::finite_table();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..2000 {
        let i = rng.gen_range(0..t.len() - 1);
        // twice_mid is in units of 2^-25, so value = twice_mid * 5^25 * 10^-25
        let twice_mid = (t[i] + t[i + 1]) as u128;
        let digits = BigUint::from(twice_mid) * BigUint::from(5u32).pow(25);
        let text = format!("{digits}e-25");
        let want = if i % 2 == 0 { i } else { i + 1 } as u16;
        assert_eq!(from_decimal(&text).unwrap().to_bits(), want, "{text}");
        let above = format!("{digits}1e-26");
        assert_eq!(from_decimal(&above).unwrap().to_bits(), (i + 1) as u16);
    }
}
