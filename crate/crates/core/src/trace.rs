// SPDX-License-Identifier: Apache-2.0

//! Event log and counters of one simulated GEMM.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::Serialize;

use crate::datapath::StallReason;
use crate::error::{Error, Result};
use crate::streamer::Slot;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceLevel {
    /// Counters only.
    Off,
    /// Counters and per-tile spans.
    #[default]
    Summary,
    /// Everything, one record per event.
    PerCycle,
}

impl FromStr for TraceLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "off" => Ok(TraceLevel::Off),
            "summary" => Ok(TraceLevel::Summary),
            "per_cycle" | "per-cycle" => Ok(TraceLevel::PerCycle),
            _ => Err(Error::Config(format!(
                "trace level '{s}' (expected off, summary or per_cycle)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Counters {
    pub cycles: u64,
    /// Cycles in which the array advanced.
    pub active_cycles: u64,
    pub stall_cycles: u64,
    /// Cycles in which column 0 waited to start a tile.
    pub bubble_cycles: u64,
    pub useful_macs: u64,
    /// FMA completions including padded lanes.
    pub fma_completions: u64,
    pub w_lines: u64,
    pub x_lines: u64,
    pub z_lines: u64,
    /// Lines that reached the buffers without a port transaction: zero
    /// padding and lines kept resident between tiles.
    pub free_lines: u64,
    /// Real (non-padding) bytes moved through the port.
    pub bytes: u64,
}

/// Cycles attributed to one tile: from its first operation at column 0 to the
/// next tile's, or to the end of the run for the last tile.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TileSpan {
    pub tile: usize,
    pub start: u64,
    pub end: u64,
}

impl TileSpan {
    pub fn cycles(&self) -> u64 {
        self.end - self.start
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Event {
    Port {
        cycle: u64,
        slot: Slot,
        index: u64,
    },
    XLatch {
        cycle: u64,
        col: usize,
        tile: usize,
        n: usize,
    },
    Stall {
        cycle: u64,
        reason: StallReason,
    },
    Bubble {
        cycle: u64,
        reason: StallReason,
    },
    ZComplete {
        cycle: u64,
        lines: usize,
    },
}

impl Event {
    pub fn cycle(&self) -> u64 {
        match *self {
            Event::Port { cycle, .. }
            | Event::XLatch { cycle, .. }
            | Event::Stall { cycle, .. }
            | Event::Bubble { cycle, .. }
            | Event::ZComplete { cycle, .. } => cycle,
        }
    }
}

impl fmt::Display for StallReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StallReason::XOperand { col } => write!(f, "x_operand col={col}"),
            StallReason::WLine { col } => write!(f, "w_line col={col}"),
            StallReason::ZBufferFull => f.write_str("z_buffer_full"),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct CycleTrace {
    pub level: TraceLevel,
    pub counters: Counters,
    pub tiles: Vec<TileSpan>,
    pub events: Vec<Event>,
}

impl CycleTrace {
    pub fn new(level: TraceLevel) -> Self {
        CycleTrace {
            level,
            ..Default::default()
        }
    }

    #[inline]
    pub fn per_cycle(&self) -> bool {
        self.level == TraceLevel::PerCycle
    }

    pub fn port_events(&self) -> impl Iterator<Item = (u64, Slot, u64)> + '_ {
        self.events.iter().filter_map(|e| match *e {
            Event::Port { cycle, slot, index } => Some((cycle, slot, index)),
            _ => None,
        })
    }

    /// Port transactions as `cycle,kind,index`.
    pub fn write_port_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "cycle,kind,index")?;
        for (cycle, slot, index) in self.port_events() {
            writeln!(w, "{cycle},{},{index}", slot.name())?;
        }
        Ok(())
    }

    /// Every recorded event as `cycle,unit,event,detail`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "cycle,unit,event,detail")?;
        for e in &self.events {
            match *e {
                Event::Port { cycle, slot, index } => {
                    writeln!(w, "{cycle},port,{},line={index}", slot.name())?
                }
                Event::XLatch {
                    cycle,
                    col,
                    tile,
                    n,
                } => writeln!(w, "{cycle},x_buffer,latch,col={col} tile={tile} n={n}")?,
                Event::Stall { cycle, reason } => writeln!(w, "{cycle},array,stall,{reason}")?,
                Event::Bubble { cycle, reason } => writeln!(w, "{cycle},array,bubble,{reason}")?,
                Event::ZComplete { cycle, lines } => {
                    writeln!(w, "{cycle},z_buffer,complete,lines={lines}")?
                }
            }
        }
        if self.level != TraceLevel::Off {
            for t in &self.tiles {
                writeln!(
                    w,
                    "{},tiler,tile,tile={} cycles={}",
                    t.start,
                    t.tile,
                    t.cycles()
                )?;
            }
        }
        Ok(())
    }
}
