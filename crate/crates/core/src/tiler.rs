// SPDX-License-Identifier: Apache-2.0

//! Splits a GEMM into array-sized tiles and drives the datapath and the
//! memory port through it, cycle by cycle.
//!
//! A tile covers up to `L` rows of X and up to `line_elems` columns of W. The
//! reduction dimension is never split: a tile runs `ceil(N / H)` ring loops,
//! padding the reduction with zeros up to a multiple of `H`. Padded rows and
//! columns are computed on zeros and masked at store time.

use std::str::FromStr;

use serde::Serialize;

use crate::config::Geometry;
use crate::datapath::{Datapath, Feed, StepStatus, TileJob, WLine, XLine};
use crate::error::{Error, Result};
use crate::fp16::F16;
use crate::golden::GemmProblem;
use crate::matrix::MatF16;
use crate::streamer::{plan_cycle, Demands, Slot};
use crate::trace::{CycleTrace, Event, TileSpan, TraceLevel};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stationarity {
    /// M-tiles outer, K-tiles inner: X rows stay, W is re-read per M-tile.
    #[default]
    XStationary,
    /// K-tiles outer, M-tiles inner: W columns stay, X is re-read per K-tile.
    WStationary,
}

impl FromStr for Stationarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x_stationary" | "x" | "input" => Ok(Stationarity::XStationary),
            "w_stationary" | "w" | "weight" => Ok(Stationarity::WStationary),
            _ => Err(Error::Config(format!(
                "stationarity '{s}' (expected x_stationary or w_stationary)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Tile {
    pub m0: usize,
    pub m_rows: usize,
    pub k0: usize,
    pub k_cols: usize,
    pub n_total: usize,
    pub pad_rows: usize,
    pub pad_cols: usize,
    pub pad_n: usize,
}

impl Tile {
    pub fn n_padded(&self) -> usize {
        self.n_total + self.pad_n
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TilePlan {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub geometry: Geometry,
    pub stationarity: Stationarity,
    pub tiles: Vec<Tile>,
}

pub fn plan(m: usize, n: usize, k: usize, g: &Geometry, st: Stationarity) -> Result<TilePlan> {
    if m == 0 || n == 0 || k == 0 {
        return Err(Error::Dimension(format!(
            "GEMM dimensions must be positive, got {m}x{n}x{k}"
        )));
    }
    let e = g.line_elems();
    let n_pad = n.div_ceil(g.h) * g.h;
    let tile = |mi: usize, ki: usize| {
        let m0 = mi * g.l;
        let k0 = ki * e;
        let m_rows = (m - m0).min(g.l);
        let k_cols = (k - k0).min(e);
        Tile {
            m0,
            m_rows,
            k0,
            k_cols,
            n_total: n,
            pad_rows: g.l - m_rows,
            pad_cols: e - k_cols,
            pad_n: n_pad - n,
        }
    };
    let (mt, kt) = (m.div_ceil(g.l), k.div_ceil(e));
    let mut tiles = Vec::with_capacity(mt * kt);
    match st {
        Stationarity::XStationary => {
            for mi in 0..mt {
                for ki in 0..kt {
                    tiles.push(tile(mi, ki));
                }
            }
        }
        Stationarity::WStationary => {
            for ki in 0..kt {
                for mi in 0..mt {
                    tiles.push(tile(mi, ki));
                }
            }
        }
    }
    Ok(TilePlan {
        m,
        n,
        k,
        geometry: *g,
        stationarity: st,
        tiles,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub stationarity: Stationarity,
    pub trace: TraceLevel,
}

#[derive(Clone, Debug)]
pub struct GemmRun {
    pub z: MatF16,
    pub plan: TilePlan,
    pub trace: CycleTrace,
}

#[derive(Clone, Copy, Debug)]
struct WItem {
    tile: usize,
    n: usize,
    /// Reaches the register without a port transaction.
    free: bool,
}

#[derive(Clone, Copy, Debug)]
struct XItem {
    tile: usize,
    line: usize,
    row: usize,
    free: bool,
}

/// Cycles without any progress after which the run is declared stuck.
const WATCHDOG: u64 = 100_000;

/// Simulates `Z = X * W` on the array.
pub fn run_gemm(p: &GemmProblem, g: &Geometry, opts: &RunOptions) -> Result<GemmRun> {
    let plan = plan(p.m(), p.n(), p.k(), g, opts.stationarity)?;
    let e = g.line_elems();
    let n = p.n();
    let n_pad = n.div_ceil(g.h) * g.h;
    let x_lines_per_row = n_pad.div_ceil(e);

    let mut dp = Datapath::new(g);
    for t in &plan.tiles {
        dp.push_tile(TileJob {
            loops: n_pad / g.h,
            valid_rows: t.m_rows,
            valid_cols: t.k_cols,
            valid_n: n,
        });
    }

    // In-order line sequences the buffers are filled from.
    let mut w_seq = Vec::with_capacity(plan.tiles.len() * n_pad);
    let mut x_seq = Vec::with_capacity(plan.tiles.len() * x_lines_per_row * g.l);
    for (i, t) in plan.tiles.iter().enumerate() {
        let prev = i.checked_sub(1).map(|j| plan.tiles[j]);
        // A single-line X row can stay in its buffer for the next tile of the
        // same rows; same for W when every register holds one line.
        let x_resident = opts.stationarity == Stationarity::XStationary
            && x_lines_per_row == 1
            && prev.is_some_and(|q| q.m0 == t.m0);
        let w_resident = opts.stationarity == Stationarity::WStationary
            && n_pad == g.h
            && prev.is_some_and(|q| q.k0 == t.k0);
        for nn in 0..n_pad {
            w_seq.push(WItem {
                tile: i,
                n: nn,
                free: nn >= n || w_resident,
            });
        }
        for line in 0..x_lines_per_row {
            for row in 0..g.l {
                x_seq.push(XItem {
                    tile: i,
                    line,
                    row,
                    free: row >= t.m_rows || x_resident,
                });
            }
        }
    }

    let w_line = |it: &WItem| -> WLine {
        let t = &plan.tiles[it.tile];
        let mut data = vec![F16::ZERO; e];
        if it.n < n {
            data[..t.k_cols].copy_from_slice(&p.w.row(it.n)[t.k0..t.k0 + t.k_cols]);
        }
        WLine {
            tile: it.tile,
            n: it.n,
            data,
        }
    };
    let x_line = |it: &XItem| -> XLine {
        let t = &plan.tiles[it.tile];
        let mut data = vec![F16::ZERO; e];
        if it.row < t.m_rows {
            let start = it.line * e;
            let end = (start + e).min(n);
            if start < end {
                data[..end - start].copy_from_slice(&p.x.row(t.m0 + it.row)[start..end]);
            }
        }
        XLine {
            tile: it.tile,
            line: it.line,
            row: it.row,
            data,
        }
    };
    let x_bytes = |it: &XItem| -> u64 {
        let start = it.line * e;
        2 * ((start + e).min(n).saturating_sub(start)) as u64
    };

    let mut z = MatF16::zeros(p.m(), p.k());
    let mut written = vec![false; p.m() * p.k()];
    let mut trace = CycleTrace::new(opts.trace);
    let per_cycle = trace.per_cycle();
    let mut tile_starts: Vec<u64> = Vec::with_capacity(plan.tiles.len());
    let (mut wi, mut xi) = (0usize, 0usize);
    let mut idle_run = 0u64;
    let mut cycle = 0u64;

    loop {
        // Lines that need no port slot go in as soon as there is room.
        while wi < w_seq.len() && w_seq[wi].free && dp.w_has_room(w_seq[wi].n % g.h) {
            dp.install_w(w_line(&w_seq[wi]));
            trace.counters.free_lines += 1;
            wi += 1;
        }
        while xi < x_seq.len() && x_seq[xi].free && dp.x_has_room(x_seq[xi].row) {
            dp.install_x(x_line(&x_seq[xi]));
            trace.counters.free_lines += 1;
            xi += 1;
        }

        let demands = Demands {
            w_due: wi < w_seq.len() && dp.w_has_room(w_seq[wi].n % g.h),
            x_pending: usize::from(xi < x_seq.len() && dp.x_has_room(x_seq[xi].row)),
            z_pending: dp.z_pending(),
        };
        let slot = plan_cycle(&demands);
        let mut feed = Feed::default();
        let index;
        match slot {
            Slot::WLoad => {
                let it = w_seq[wi];
                let wl = w_line(&it);
                trace.counters.w_lines += 1;
                trace.counters.bytes += 2 * plan.tiles[it.tile].k_cols as u64;
                index = wi as u64;
                feed.w = Some(wl);
                wi += 1;
            }
            Slot::XLoad => {
                let it = x_seq[xi];
                trace.counters.x_lines += 1;
                trace.counters.bytes += x_bytes(&it);
                index = xi as u64;
                feed.x = Some(x_line(&it));
                xi += 1;
            }
            Slot::ZStore => {
                index = trace.counters.z_lines;
                trace.counters.z_lines += 1;
                feed.drain = true;
            }
            Slot::Idle => index = 0,
        }
        if per_cycle && slot != Slot::Idle {
            trace.events.push(Event::Port { cycle, slot, index });
        }

        let out = dp.step(feed);
        let c = &mut trace.counters;
        c.useful_macs += out.valid_macs as u64;
        c.fma_completions += out.completions as u64;
        match out.status {
            StepStatus::Active => c.active_cycles += 1,
            StepStatus::Stalled(reason) => {
                c.stall_cycles += 1;
                if per_cycle {
                    trace.events.push(Event::Stall { cycle, reason });
                }
            }
            StepStatus::Idle => {}
        }
        if let Some(reason) = out.bubble {
            trace.counters.bubble_cycles += 1;
            if per_cycle {
                trace.events.push(Event::Bubble { cycle, reason });
            }
        }
        for l in dp.latches() {
            if l.col == 0 && l.n == 0 {
                tile_starts.push(cycle);
            }
            if per_cycle {
                trace.events.push(Event::XLatch {
                    cycle,
                    col: l.col,
                    tile: l.tile,
                    n: l.n,
                });
            }
        }
        if per_cycle && out.completed_lines > 0 {
            trace.events.push(Event::ZComplete {
                cycle,
                lines: out.completed_lines,
            });
        }
        if let Some(zl) = &out.drained {
            let t = &plan.tiles[zl.tile];
            trace.counters.bytes += 2 * t.k_cols as u64;
            let m = t.m0 + zl.row;
            for s in 0..t.k_cols {
                let idx = m * p.k() + t.k0 + s;
                if written[idx] {
                    return Err(Error::Simulation(format!(
                        "output ({m}, {}) stored twice",
                        t.k0 + s
                    )));
                }
                written[idx] = true;
                z.set(m, t.k0 + s, zl.data[s]);
            }
        }
        cycle += 1;

        let progressed = slot != Slot::Idle
            || out.valid_macs > 0
            || out.completions > 0
            || !dp.latches().is_empty();
        idle_run = if progressed { 0 } else { idle_run + 1 };
        if wi == w_seq.len() && xi == x_seq.len() && dp.is_quiescent() {
            break;
        }
        if idle_run > WATCHDOG {
            return Err(Error::Simulation(format!(
                "no progress for {WATCHDOG} cycles at cycle {cycle}"
            )));
        }
    }

    if let Some(i) = written.iter().position(|w| !w) {
        return Err(Error::Simulation(format!(
            "output ({}, {}) never stored",
            i / p.k(),
            i % p.k()
        )));
    }
    trace.counters.cycles = cycle;
    if opts.trace != TraceLevel::Off {
        trace.tiles = tile_starts
            .iter()
            .enumerate()
            .map(|(i, &start)| TileSpan {
                tile: i,
                start,
                end: tile_starts.get(i + 1).copied().unwrap_or(cycle),
            })
            .collect();
    }
    Ok(GemmRun { z, plan, trace })
}
