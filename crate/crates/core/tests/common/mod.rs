// SPDX-License-Identifier: Apache-2.0

//! Test-side oracles, written without using the crate's arithmetic.
#![allow(dead_code)]

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use redmule::golden::GemmProblem;
use redmule::matrix::{MatF16, ValueMix};
use redmule::streamer::Slot;
use redmule::trace::{CycleTrace, Event};

pub const QNAN: u16 = 0x7E00;
pub const PINF: u16 = 0x7C00;

#[derive(Clone, Copy, Debug)]
pub enum Val {
    Nan,
    Inf(bool),
    /// Sign and magnitude in units of 2^-24.
    Fin(bool, i128),
}

pub fn decode(bits: u16) -> Val {
    let neg = bits & 0x8000 != 0;
    let exp = (bits >> 10) & 0x1F;
    let man = (bits & 0x3FF) as i128;
    match exp {
        0x1F if man != 0 => Val::Nan,
        0x1F => Val::Inf(neg),
        0 => Val::Fin(neg, man),
        e => Val::Fin(neg, (1024 + man) << (e - 1)),
    }
}

/// Every non-negative finite half, magnitude in units of 2^-24, indexed by
/// bit pattern. Built from the encoding definition alone.
pub fn finite_table() -> &'static [i128] {
    static T: OnceLock<Vec<i128>> = OnceLock::new();
    T.get_or_init(|| {
        (0u16..=0x7BFF)
            .map(|b| match decode(b) {
                Val::Fin(_, m) => m,
                _ => unreachable!(),
            })
            .collect()
    })
}

/// Rounds `mag * 2^-shift` (in units of 2^-24) to the nearest half, ties to
/// the even bit pattern. Returns the unsigned bit pattern, 0x7C00 on overflow.
fn round_mag(mag: i128, shift: u32) -> u16 {
    let t = finite_table();
    // Compare mag / 2^shift against t[i] exactly: mag vs t[i] << shift.
    let scaled = |i: usize| t[i] << shift;
    let max = t.len() - 1;
    // Overflow threshold: max + half an ulp of max, i.e. 65520.
    let ulp = t[max] - t[max - 1];
    let limit = (2 * t[max] + ulp) << shift;
    if 2 * mag >= limit {
        return PINF;
    }
    // Largest i with t[i] << shift <= mag.
    let (mut lo, mut hi) = (0usize, max);
    while lo < hi {
        let mid = (lo + hi).div_ceil(2);
        if scaled(mid) <= mag {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    if scaled(lo) == mag || lo == max {
        return lo as u16;
    }
    let below = mag - scaled(lo);
    let above = scaled(lo + 1) - mag;
    let pick = match below.cmp(&above) {
        std::cmp::Ordering::Less => lo,
        std::cmp::Ordering::Greater => lo + 1,
        std::cmp::Ordering::Equal => {
            if lo % 2 == 0 {
                lo
            } else {
                lo + 1
            }
        }
    };
    pick as u16
}

fn signed(neg: bool, mag_bits: u16) -> u16 {
    if neg {
        mag_bits | 0x8000
    } else {
        mag_bits
    }
}

/// `round(a * b + c)` with one rounding of the exact value.
pub fn fma(a: u16, b: u16, c: u16) -> u16 {
    let (va, vb, vc) = (decode(a), decode(b), decode(c));
    if matches!(va, Val::Nan) || matches!(vb, Val::Nan) || matches!(vc, Val::Nan) {
        return QNAN;
    }
    let psign = (a ^ b) & 0x8000 != 0;
    // Product as special or finite (units 2^-48).
    let prod_inf = match (va, vb) {
        (Val::Inf(_), Val::Fin(_, 0)) | (Val::Fin(_, 0), Val::Inf(_)) => return QNAN,
        (Val::Inf(_), _) | (_, Val::Inf(_)) => true,
        _ => false,
    };
    if prod_inf {
        return match vc {
            Val::Inf(cn) if cn != psign => QNAN,
            _ => signed(psign, PINF),
        };
    }
    if let Val::Inf(cn) = vc {
        return signed(cn, PINF);
    }
    let (Val::Fin(_, ma), Val::Fin(_, mb), Val::Fin(cn, mc)) = (va, vb, vc) else {
        unreachable!()
    };
    let p = ma * mb;
    let s = if psign { -p } else { p } + if cn { -(mc << 24) } else { mc << 24 };
    if s == 0 {
        // Two zeros keep a negative sign only if both are negative; exact
        // cancellation of non-zero terms gives +0.
        return if p == 0 && mc == 0 && psign && cn {
            0x8000
        } else {
            0
        };
    }
    signed(s < 0, round_mag(s.abs(), 24))
}

/// `round(round(a * b) + c)`: the unfused sequence.
pub fn mul_then_add(a: u16, b: u16, c: u16) -> u16 {
    let neg_zero = 0x8000;
    let prod = fma(a, b, neg_zero);
    fma(prod, 0x3C00, c)
}

/// Corner operands for exhaustive triple sweeps.
pub fn corner_values() -> Vec<u16> {
    let mut v = vec![
        0x0000, 0x0001, 0x0002, 0x01FF, 0x0200, 0x03FF, 0x0400, 0x0401, 0x07FF, 0x0800, 0x1400,
        0x2E66, 0x3800, 0x3BFF, 0x3C00, 0x3C01, 0x3E00, 0x4000, 0x4001, 0x57FF, 0x5800, 0x7800,
        0x7BFE, 0x7BFF, 0x7C00, 0x7E00, 0x7C01, 0x1001, 0x23FF, 0x5BFF,
    ];
    let neg: Vec<u16> = v.iter().map(|b| b | 0x8000).collect();
    v.extend(neg);
    v
}

pub fn random_problem(m: usize, n: usize, k: usize, mix: ValueMix, seed: u64) -> GemmProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = MatF16::random(m, n, mix, &mut rng);
    let w = MatF16::random(n, k, mix, &mut rng);
    GemmProblem::new(x, w).unwrap()
}

/// Random operand triples, half uniform bit patterns and half with the
/// addend scaled close to the product so that cancellation and ties occur.
pub fn random_triple(rng: &mut impl Rng) -> (u16, u16, u16) {
    let a: u16 = rng.gen();
    let b: u16 = rng.gen();
    if rng.gen_bool(0.5) {
        return (a, b, rng.gen());
    }
    let ea = ((a >> 10) & 0x1F) as i32;
    let eb = ((b >> 10) & 0x1F) as i32;
    let ec = (ea + eb - 15 + rng.gen_range(-12..=12)).clamp(0, 30) as u16;
    let c = (rng.gen::<u16>() & 0x83FF) | ec << 10;
    (a, b, c)
}

/// Cycles with a stall or a bubble, ascending.
fn disturbances(trace: &CycleTrace) -> Vec<u64> {
    trace
        .events
        .iter()
        .filter_map(|e| match *e {
            Event::Stall { cycle, .. } | Event::Bubble { cycle, .. } => Some(cycle),
            _ => None,
        })
        .collect()
}

fn any_in(sorted: &[u64], from: u64, to: u64) -> bool {
    let i = sorted.partition_point(|&c| c < from);
    i < sorted.len() && sorted[i] <= to
}

/// Gaps between W loads of consecutive lines after the registers have been
/// primed, in stretches without stalls or bubbles.
///
/// A line reuses the register slot of the line `2h` before it, so a stall or
/// bubble any time after that line arrived can still shift the load.
pub fn w_cadence_gaps(trace: &CycleTrace, h: usize) -> Vec<u64> {
    let dist = disturbances(trace);
    let loads: Vec<(u64, u64)> = trace
        .port_events()
        .filter(|(_, s, _)| *s == Slot::WLoad)
        .map(|(c, _, i)| (c, i))
        .collect();
    // Padding lines never hit the port; the last real load before the slot
    // owner is an earlier bound on when it arrived.
    let arrived = |index: u64| {
        let j = loads.partition_point(|&(_, i)| i <= index);
        loads[j.saturating_sub(1)].0
    };
    let depth = 2 * h as u64;
    loads
        .windows(2)
        .filter(|w| w[1].1 == w[0].1 + 1 && w[0].1 >= depth)
        .filter(|w| !any_in(&dist, arrived(w[1].1 - depth), w[1].0))
        .map(|w| w[1].0 - w[0].0)
        .collect()
}

/// Per-column gaps between X operand changes in stretches without stalls or
/// bubbles.
pub fn x_hold_gaps(trace: &CycleTrace, h: usize) -> Vec<u64> {
    let dist = disturbances(trace);
    let mut last = vec![None; h];
    let mut gaps = Vec::new();
    for e in &trace.events {
        if let Event::XLatch { cycle, col, .. } = *e {
            if let Some(prev) = last[col] {
                if !any_in(&dist, prev, cycle) {
                    gaps.push(cycle - prev);
                }
            }
            last[col] = Some(cycle);
        }
    }
    gaps
}

pub fn stall_count(trace: &CycleTrace) -> usize {
    trace
        .events
        .iter()
        .filter(|e| matches!(e, Event::Stall { .. }))
        .count()
}
