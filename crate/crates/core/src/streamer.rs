// SPDX-License-Identifier: Apache-2.0

//! The streamer's single wide memory port.
//!
//! One transaction per cycle, load or store, one cycle of latency. W lines
//! have priority whenever a shift register has room for the next one, which
//! in steady state is once every `P + 1` cycles. The remaining slots go to Z
//! stores first and then X loads.

use serde::Serialize;

use crate::config::{Geometry, PORT_BITS};
use crate::trace::CycleTrace;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PortModel {
    pub width_bits: usize,
    pub latency_cycles: usize,
    pub transactions_per_cycle: usize,
}

impl PortModel {
    pub fn new(g: &Geometry) -> Self {
        PortModel {
            width_bits: g.required_ports() * PORT_BITS,
            latency_cycles: 1,
            transactions_per_cycle: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Slot {
    WLoad,
    XLoad,
    ZStore,
    Idle,
}

impl Slot {
    pub fn name(self) -> &'static str {
        match self {
            Slot::WLoad => "W_load",
            Slot::XLoad => "X_load",
            Slot::ZStore => "Z_store",
            Slot::Idle => "idle",
        }
    }
}

/// What the buffers could accept or hand over this cycle.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Demands {
    /// The next W line has a free shift-register slot.
    pub w_due: bool,
    /// X lines that could be loaded now.
    pub x_pending: usize,
    /// Finished Z lines waiting to be stored.
    pub z_pending: usize,
}

pub fn plan_cycle(d: &Demands) -> Slot {
    if d.w_due {
        Slot::WLoad
    } else if d.z_pending > 0 {
        Slot::ZStore
    } else if d.x_pending > 0 {
        Slot::XLoad
    } else {
        Slot::Idle
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct TrafficTotals {
    pub w_lines: u64,
    pub x_lines: u64,
    pub z_lines: u64,
    pub idle_cycles: u64,
    pub bytes: u64,
}

pub fn traffic_totals(trace: &CycleTrace) -> TrafficTotals {
    let c = &trace.counters;
    TrafficTotals {
        w_lines: c.w_lines,
        x_lines: c.x_lines,
        z_lines: c.z_lines,
        idle_cycles: c.cycles - c.w_lines - c.x_lines - c.z_lines,
        bytes: c.bytes,
    }
}

/// Cycles carrying more than one port transaction. Needs a per-cycle trace.
pub fn port_conflicts(trace: &CycleTrace) -> Vec<u64> {
    let mut cycles: Vec<u64> = trace.port_events().map(|(c, _, _)| c).collect();
    cycles.sort_unstable();
    let mut out: Vec<u64> = cycles
        .windows(2)
        .filter(|w| w[0] == w[1])
        .map(|w| w[0])
        .collect();
    out.dedup();
    out
}
