// SPDX-License-Identifier: Apache-2.0

//! Cycle model of the `L x H` semi-systolic FMA array.
//!
//! Every row is a chain of `H` FMA units with latency `D = P + 1`. Column `c`
//! holds one X operand per row for `E = H * D` cycles and receives one W
//! element per cycle from its shift register, broadcast to all rows. An
//! operation entering column `c` at cycle `t` leaves it at `t + D` and enters
//! column `c + 1` in the same cycle, so a row keeps `E` partial sums (one per
//! output column, the "k-slots") circulating around the ring. The last
//! column's results either go back into column 0 for the next `H` reduction
//! steps or, after the final ring loop, into the Z buffer.
//!
//! A ring loop `j` of a tile makes column `c` consume reduction index
//! `n = j * H + c` for every k-slot `s = 0..E`:
//!
//! ```text
//! column c issues (loop j, slot s) at t0 + c*D + j*E + s
//! ```
//!
//! so the array is fully busy once it is filled. The next tile enters column
//! 0 in the cycle the previous tile's final loop leaves it.
//!
//! The datapath never reorders anything. When an operand is missing at the
//! moment a column needs it, or a finished row would overwrite a Z line that
//! has not been stored yet, the whole array stalls for that cycle. The only
//! exception is the first operation of a new tile at column 0: nothing is in
//! flight behind it, so column 0 simply idles (a bubble) and the rest of the
//! array keeps draining.
//!
//! Lines delivered through a [`Feed`] land at the end of the cycle, one cycle
//! of memory latency.

use std::collections::VecDeque;

use crate::config::Geometry;
use crate::fp16::{fma, F16};

/// Shape of one output tile as the array sees it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TileJob {
    /// Ring loops, i.e. padded reduction length divided by `H`.
    pub loops: usize,
    /// Rows holding real X rows; the rest compute on zeros and are dropped.
    pub valid_rows: usize,
    /// k-slots holding real output columns.
    pub valid_cols: usize,
    /// Reduction steps that are not padding.
    pub valid_n: usize,
}

/// One row's slice of X: `line_elems` consecutive reduction indices.
#[derive(Clone, Debug, PartialEq)]
pub struct XLine {
    pub tile: usize,
    pub line: usize,
    pub row: usize,
    pub data: Vec<F16>,
}

/// One row of W restricted to the tile's output columns.
#[derive(Clone, Debug, PartialEq)]
pub struct WLine {
    pub tile: usize,
    pub n: usize,
    pub data: Vec<F16>,
}

/// A finished row of the output tile.
#[derive(Clone, Debug, PartialEq)]
pub struct ZLine {
    pub tile: usize,
    pub row: usize,
    pub data: Vec<F16>,
}

/// Memory traffic arriving at the array in one cycle.
#[derive(Clone, Debug, Default)]
pub struct Feed {
    pub x: Option<XLine>,
    pub w: Option<WLine>,
    /// Store the oldest finished Z line this cycle.
    pub drain: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StallReason {
    /// Column could not latch its X operand.
    XOperand { col: usize },
    /// Column's W shift register does not hold the line it needs.
    WLine { col: usize },
    /// A row finished while its previous Z line is still waiting for the port.
    ZBufferFull,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepStatus {
    /// The array advanced.
    Active,
    /// Nothing in flight and nothing to start.
    Idle,
    /// The array held its state for the cycle.
    Stalled(StallReason),
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub status: StepStatus,
    /// Column 0 wanted to start a tile but its operands were not there yet.
    pub bubble: Option<StallReason>,
    /// FMA completions with real operands.
    pub valid_macs: usize,
    /// All FMA completions, padding included.
    pub completions: usize,
    /// Z lines that became complete (and valid) this cycle.
    pub completed_lines: usize,
    /// The Z line stored through the drain grant, if any.
    pub drained: Option<ZLine>,
}

/// An X operand change at one column.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Latch {
    pub col: usize,
    pub tile: usize,
    pub n: usize,
}

/// One operation waiting inside an FMA pipeline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StageSlot {
    pub x: F16,
    pub w: F16,
    pub acc_in: F16,
    pub k_slot: usize,
    pub valid: bool,
}

/// Snapshot of one FMA unit, oldest slot first.
#[derive(Clone, Debug, PartialEq)]
pub struct FmaStage {
    pub row: usize,
    pub col: usize,
    pub pipeline: Vec<Option<StageSlot>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct SlotTag {
    tile: usize,
    ring: usize,
    slot: usize,
}

#[derive(Clone, Debug)]
struct XEntry {
    tile: usize,
    line: usize,
    data: Vec<F16>,
    last_pos: usize,
}

/// Per-row X line storage (two lines deep) and the per-column operand
/// registers that hold one X element for a whole ring loop.
#[derive(Clone, Debug)]
pub struct XBufferState {
    lines: Vec<VecDeque<XEntry>>,
    /// Column-major `[col * L + row]`.
    operands: Vec<F16>,
    /// Active cycle of each column's last operand change.
    latched_at: Vec<Option<u64>>,
}

/// `H` shift registers, each double-buffered by one line.
#[derive(Clone, Debug)]
pub struct WBufferState {
    regs: Vec<VecDeque<WLine>>,
}

#[derive(Clone, Debug)]
struct ZEntry {
    tile: usize,
    data: Vec<F16>,
    filled: usize,
}

/// One finished-or-filling output line per row.
#[derive(Clone, Debug)]
pub struct ZBufferState {
    rows: Vec<Option<ZEntry>>,
}

const LINE_DEPTH: usize = 2;

#[derive(Clone, Debug)]
pub struct Datapath {
    g: Geometry,
    depth: usize,
    line: usize,
    jobs: Vec<TileJob>,
    next_tile: usize,
    /// Tile whose first ring loop column 0 is still entering, and the next slot.
    col0_fill: Option<(usize, usize)>,

    // Pipelines, indexed `[col * depth + pos]` and `[(col * depth + pos) * L + row]`.
    pipe_tag: Vec<Option<SlotTag>>,
    pipe_w: Vec<F16>,
    pipe_x: Vec<F16>,
    pipe_acc: Vec<F16>,
    in_flight: usize,

    xbuf: XBufferState,
    wbuf: WBufferState,
    zbuf: ZBufferState,

    active: u64,
    last_macs: usize,

    // scratch
    out_tag: Vec<Option<SlotTag>>,
    out_val: Vec<F16>,
    latches: Vec<Latch>,
}

impl Datapath {
    pub fn new(g: &Geometry) -> Self {
        let (h, l) = (g.h, g.l);
        let depth = g.fma_latency();
        let line = g.line_elems();
        Datapath {
            g: *g,
            depth,
            line,
            jobs: Vec::new(),
            next_tile: 0,
            col0_fill: None,
            pipe_tag: vec![None; h * depth],
            pipe_w: vec![F16::ZERO; h * depth],
            pipe_x: vec![F16::ZERO; h * depth * l],
            pipe_acc: vec![F16::ZERO; h * depth * l],
            in_flight: 0,
            xbuf: XBufferState {
                lines: vec![VecDeque::with_capacity(LINE_DEPTH); l],
                operands: vec![F16::ZERO; h * l],
                latched_at: vec![None; h],
            },
            wbuf: WBufferState {
                regs: vec![VecDeque::with_capacity(LINE_DEPTH); h],
            },
            zbuf: ZBufferState {
                rows: vec![None; l],
            },
            active: 0,
            last_macs: 0,
            out_tag: vec![None; h],
            out_val: vec![F16::ZERO; h * l],
            latches: Vec::with_capacity(h),
        }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.g
    }

    pub fn fma_stages(&self) -> usize {
        self.g.h * self.g.l
    }

    pub fn w_registers(&self) -> usize {
        self.wbuf.regs.len()
    }

    /// Queues a tile; tiles start in the order they are pushed.
    pub fn push_tile(&mut self, job: TileJob) -> usize {
        assert!(job.loops >= 1, "a tile needs at least one ring loop");
        assert!(job.valid_rows <= self.g.l && job.valid_cols <= self.line);
        self.jobs.push(job);
        self.jobs.len() - 1
    }

    pub fn x_has_room(&self, row: usize) -> bool {
        self.xbuf.lines[row].len() < LINE_DEPTH
    }

    pub fn w_has_room(&self, reg: usize) -> bool {
        self.wbuf.regs[reg].len() < LINE_DEPTH
    }

    /// Finished Z lines waiting for the port.
    pub fn z_pending(&self) -> usize {
        self.zbuf
            .rows
            .iter()
            .flatten()
            .filter(|z| z.filled == self.line)
            .count()
    }

    /// Puts an X line into its row's buffer right away.
    pub fn install_x(&mut self, x: XLine) {
        assert_eq!(x.data.len(), self.line);
        assert!(self.x_has_room(x.row), "X buffer overflow on row {}", x.row);
        let job = self.jobs[x.tile];
        let n_pad = job.loops * self.g.h;
        let used = (n_pad - x.line * self.line).min(self.line);
        self.xbuf.lines[x.row].push_back(XEntry {
            tile: x.tile,
            line: x.line,
            data: x.data,
            last_pos: used - 1,
        });
    }

    /// Puts a W line into shift register `n % H` right away.
    pub fn install_w(&mut self, w: WLine) {
        assert_eq!(w.data.len(), self.line);
        let reg = w.n % self.g.h;
        assert!(self.w_has_room(reg), "W register {reg} overflow");
        self.wbuf.regs[reg].push_back(w);
    }

    /// True once every queued tile has left the array and been stored.
    pub fn is_quiescent(&self) -> bool {
        self.in_flight == 0
            && self.col0_fill.is_none()
            && self.next_tile == self.jobs.len()
            && self.zbuf.rows.iter().all(Option::is_none)
    }

    /// Valid FMA completions in the last cycle.
    pub fn busy_macs(&self) -> usize {
        self.last_macs
    }

    /// Cycles in which the array advanced.
    pub fn active_cycles(&self) -> u64 {
        self.active
    }

    /// X operand changes made in the last cycle.
    pub fn latches(&self) -> &[Latch] {
        &self.latches
    }

    pub fn x_operand(&self, row: usize, col: usize) -> F16 {
        self.xbuf.operands[col * self.g.l + row]
    }

    pub fn stage(&self, row: usize, col: usize) -> FmaStage {
        let l = self.g.l;
        let pipeline = (0..self.depth)
            .map(|i| {
                let pos = ((self.active + i as u64) % self.depth as u64) as usize;
                let idx = col * self.depth + pos;
                self.pipe_tag[idx].map(|t| {
                    let job = self.jobs[t.tile];
                    StageSlot {
                        x: self.pipe_x[idx * l + row],
                        w: self.pipe_w[idx],
                        acc_in: self.pipe_acc[idx * l + row],
                        k_slot: t.slot,
                        valid: self.op_valid(&job, t, col) && row < job.valid_rows,
                    }
                })
            })
            .collect();
        FmaStage { row, col, pipeline }
    }

    #[inline]
    fn op_valid(&self, job: &TileJob, t: SlotTag, col: usize) -> bool {
        t.ring * self.g.h + col < job.valid_n && t.slot < job.valid_cols
    }

    fn x_ready(&self, tile: usize, n: usize) -> bool {
        let line = n / self.line;
        self.xbuf
            .lines
            .iter()
            .all(|q| q.iter().any(|e| e.tile == tile && e.line == line))
    }

    fn w_ready(&self, col: usize, tile: usize, n: usize) -> bool {
        self.wbuf.regs[col]
            .front()
            .is_some_and(|w| w.tile == tile && w.n == n)
    }

    fn latch_x(&mut self, col: usize, tile: usize, n: usize) {
        let line = n / self.line;
        let pos = n % self.line;
        let l = self.g.l;
        for row in 0..l {
            let q = &mut self.xbuf.lines[row];
            let i = q
                .iter()
                .position(|e| e.tile == tile && e.line == line)
                .expect("X line checked before latch");
            self.xbuf.operands[col * l + row] = q[i].data[pos];
            if pos == q[i].last_pos {
                q.remove(i);
            }
        }
        self.xbuf.latched_at[col] = Some(self.active);
        self.latches.push(Latch { col, tile, n });
    }

    fn apply_feed(&mut self, feed: Feed) -> Option<ZLine> {
        let drained = if feed.drain {
            let row = self
                .zbuf
                .rows
                .iter()
                .position(|z| z.as_ref().is_some_and(|z| z.filled == self.line))
                .expect("drain granted with no finished Z line");
            let z = self.zbuf.rows[row].take().unwrap();
            Some(ZLine {
                tile: z.tile,
                row,
                data: z.data,
            })
        } else {
            None
        };
        if let Some(x) = feed.x {
            self.install_x(x);
        }
        if let Some(w) = feed.w {
            self.install_w(w);
        }
        drained
    }

    /// Advances the array by one clock cycle.
    pub fn step(&mut self, feed: Feed) -> StepOutcome {
        let (h, l, depth) = (self.g.h, self.g.l, self.depth);
        let pos = (self.active % depth as u64) as usize;
        self.latches.clear();
        self.last_macs = 0;

        for c in 0..h {
            self.out_tag[c] = self.pipe_tag[c * depth + pos];
        }

        // What each column would start this cycle.
        let mut issue: Vec<Option<SlotTag>> = Vec::with_capacity(h);
        let mut fresh = false;
        let mut from_ring = false;
        let last = self.out_tag[h - 1];
        let col0 = match last {
            Some(t) if t.ring + 1 < self.jobs[t.tile].loops => {
                from_ring = true;
                Some(SlotTag {
                    tile: t.tile,
                    ring: t.ring + 1,
                    slot: t.slot,
                })
            }
            _ => match self.col0_fill {
                Some((tile, slot)) => Some(SlotTag {
                    tile,
                    ring: 0,
                    slot,
                }),
                None if self.next_tile < self.jobs.len() => {
                    fresh = true;
                    Some(SlotTag {
                        tile: self.next_tile,
                        ring: 0,
                        slot: 0,
                    })
                }
                None => None,
            },
        };
        debug_assert!(
            !(from_ring && self.col0_fill.is_some()),
            "ring feedback collided with a tile start"
        );
        issue.push(col0);
        for c in 1..h {
            issue.push(self.out_tag[c - 1]);
        }
        let to_z = last.filter(|t| t.ring + 1 == self.jobs[t.tile].loops);

        // Operand and buffer checks.
        let mut stall = None;
        let mut bubble = None;
        for (c, op) in issue.iter_mut().enumerate() {
            let Some(t) = *op else { continue };
            if t.slot != 0 {
                continue;
            }
            let n = t.ring * h + c;
            let reason = if !self.x_ready(t.tile, n) {
                Some(StallReason::XOperand { col: c })
            } else if !self.w_ready(c, t.tile, n) {
                Some(StallReason::WLine { col: c })
            } else {
                None
            };
            if let Some(r) = reason {
                if c == 0 && fresh {
                    bubble = Some(r);
                    *op = None;
                } else if stall.is_none() {
                    stall = Some(r);
                }
            }
        }
        if let Some(t) = to_z {
            if t.slot == 0 && self.zbuf.rows.iter().any(Option::is_some) && stall.is_none() {
                stall = Some(StallReason::ZBufferFull);
            }
        }

        if let Some(reason) = stall {
            let drained = self.apply_feed(feed);
            return StepOutcome {
                status: StepStatus::Stalled(reason),
                bubble: None,
                valid_macs: 0,
                completions: 0,
                completed_lines: 0,
                drained,
            };
        }

        let idle = self.in_flight == 0 && issue.iter().all(Option::is_none);

        // Completions.
        let mut valid_macs = 0;
        let mut completions = 0;
        for c in 0..h {
            let Some(t) = self.out_tag[c] else { continue };
            let idx = c * depth + pos;
            let w = self.pipe_w[idx];
            for r in 0..l {
                let k = idx * l + r;
                self.out_val[c * l + r] = fma(self.pipe_x[k], w, self.pipe_acc[k]);
            }
            let job = self.jobs[t.tile];
            completions += l;
            if self.op_valid(&job, t, c) {
                valid_macs += job.valid_rows;
            }
            self.pipe_tag[idx] = None;
            self.in_flight -= 1;
        }

        // Issues.
        for (c, op) in issue.iter().enumerate() {
            let Some(t) = *op else { continue };
            let idx = c * depth + pos;
            let n = t.ring * h + c;
            if t.slot == 0 {
                self.latch_x(c, t.tile, n);
            }
            let reg = &mut self.wbuf.regs[c];
            let wl = reg.front().expect("W line checked before issue");
            debug_assert!(wl.tile == t.tile && wl.n == n);
            self.pipe_w[idx] = wl.data[t.slot];
            if t.slot + 1 == self.line {
                reg.pop_front();
            }
            for r in 0..l {
                let k = idx * l + r;
                self.pipe_x[k] = self.xbuf.operands[c * l + r];
                self.pipe_acc[k] = if c > 0 {
                    self.out_val[(c - 1) * l + r]
                } else if from_ring {
                    self.out_val[(h - 1) * l + r]
                } else {
                    F16::ZERO
                };
            }
            self.pipe_tag[idx] = Some(t);
            self.in_flight += 1;
        }

        // Column 0 start bookkeeping.
        if let Some(t) = issue[0] {
            if !from_ring {
                if fresh {
                    self.next_tile += 1;
                }
                self.col0_fill = if t.slot + 1 < self.line {
                    Some((t.tile, t.slot + 1))
                } else {
                    None
                };
            }
        }

        // Final ring loop results land in the Z buffer.
        let mut completed_lines = 0;
        if let Some(t) = to_z {
            let valid_rows = self.jobs[t.tile].valid_rows;
            for r in 0..l {
                let v = self.out_val[(h - 1) * l + r];
                let entry = self.zbuf.rows[r].get_or_insert_with(|| ZEntry {
                    tile: t.tile,
                    data: vec![F16::ZERO; self.line],
                    filled: 0,
                });
                debug_assert_eq!(entry.tile, t.tile);
                debug_assert_eq!(entry.filled, t.slot);
                entry.data[t.slot] = v;
                entry.filled += 1;
                if entry.filled == self.line {
                    if r < valid_rows {
                        completed_lines += 1;
                    } else {
                        self.zbuf.rows[r] = None;
                    }
                }
            }
        }

        self.last_macs = valid_macs;
        self.active += 1;
        let drained = self.apply_feed(feed);
        StepOutcome {
            status: if idle {
                StepStatus::Idle
            } else {
                StepStatus::Active
            },
            bubble,
            valid_macs,
            completions,
            completed_lines,
            drained,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones(n: usize) -> Vec<F16> {
        vec![F16::ONE; n]
    }

    /// Preloads everything one tile needs and runs it to completion, draining
    /// Z lines as soon as they are complete.
    fn run_single_tile(g: &Geometry, loops: usize) -> (Datapath, Vec<StepOutcome>) {
        let e = g.line_elems();
        let mut dp = Datapath::new(g);
        let tile = dp.push_tile(TileJob {
            loops,
            valid_rows: g.l,
            valid_cols: e,
            valid_n: loops * g.h,
        });
        let n_pad = loops * g.h;
        let mut next_x_line = 0;
        let mut next_n = 0;
        let mut outcomes = Vec::new();
        for _ in 0..10_000 {
            while next_x_line * e < n_pad && (0..g.l).all(|r| dp.x_has_room(r)) {
                for row in 0..g.l {
                    dp.install_x(XLine {
                        tile,
                        line: next_x_line,
                        row,
                        data: ones(e),
                    });
                }
                next_x_line += 1;
            }
            while next_n < n_pad && dp.w_has_room(next_n % g.h) {
                dp.install_w(WLine {
                    tile,
                    n: next_n,
                    data: ones(e),
                });
                next_n += 1;
            }
            let drain = dp.z_pending() > 0;
            let out = dp.step(Feed {
                drain,
                ..Default::default()
            });
            outcomes.push(out);
            if dp.is_quiescent() {
                break;
            }
        }
        (dp, outcomes)
    }

    #[test]
    fn construction_matches_geometry() {
        let dp = Datapath::new(&Geometry::DEFAULT);
        assert_eq!(dp.fma_stages(), 32);
        assert_eq!(dp.w_registers(), 4);
        assert_eq!(dp.geometry().line_elems(), 16);
        assert_eq!(dp.busy_macs(), 0);
        assert!(dp.is_quiescent());

        let tiny = Datapath::new(&Geometry::new(1, 1, 0).unwrap());
        assert_eq!(tiny.fma_stages(), 1);
        assert_eq!(tiny.stage(0, 0).pipeline.len(), 1);

        let big = Datapath::new(&Geometry::new(16, 32, 3).unwrap());
        assert_eq!(big.fma_stages(), 512);
    }

    #[test]
    fn first_column_outputs_after_fma_latency() {
        let g = Geometry::DEFAULT;
        let (_, outs) = run_single_tile(&g, 4);
        let first = outs.iter().position(|o| o.completions > 0).unwrap();
        let start = outs
            .iter()
            .position(|o| o.status == StepStatus::Active)
            .unwrap();
        assert_eq!(first - start, g.p + 1);
    }

    #[test]
    fn full_tile_runs_at_peak() {
        // M = L = 8, N = 16, K = 16: 2048 MACs over N * D = 64 issue cycles.
        let g = Geometry::DEFAULT;
        let (dp, outs) = run_single_tile(&g, 4);
        let macs: usize = outs.iter().map(|o| o.valid_macs).sum();
        assert_eq!(macs, 8 * 16 * 16);
        // Once filled, every cycle completes all 32 FMAs.
        let full = outs.iter().filter(|o| o.valid_macs == 32).count();
        let start = outs.iter().position(|o| o.completions > 0).unwrap();
        assert!(full >= 64 - 2 * 16, "{full}");
        assert!(outs[start..].iter().all(|o| o.valid_macs <= 32));
        // Active span: 64 issue cycles at column 0, then the last column
        // finishes (H - 1) * D + D cycles later.
        let active = outs
            .iter()
            .filter(|o| matches!(o.status, StepStatus::Active))
            .count();
        assert_eq!(active, 64 + 4 * 4);
        assert!(dp.is_quiescent());
    }

    #[test]
    fn x_operand_held_for_a_ring_loop() {
        let g = Geometry::DEFAULT;
        let e = g.line_elems() as u64;
        let mut dp = Datapath::new(&g);
        dp.push_tile(TileJob {
            loops: 8,
            valid_rows: 8,
            valid_cols: 16,
            valid_n: 32,
        });
        for line in 0..2 {
            for row in 0..8 {
                dp.install_x(XLine {
                    tile: 0,
                    line,
                    row,
                    data: ones(16),
                });
            }
        }
        let mut next_n = 0;
        let mut latch_cycles = vec![Vec::new(); g.h];
        for cycle in 0..400u64 {
            while next_n < 32 && dp.w_has_room(next_n % g.h) {
                dp.install_w(WLine {
                    tile: 0,
                    n: next_n,
                    data: ones(16),
                });
                next_n += 1;
            }
            let drain = dp.z_pending() > 0;
            let out = dp.step(Feed {
                drain,
                ..Default::default()
            });
            assert!(!matches!(out.status, StepStatus::Stalled(_)));
            for l in dp.latches() {
                latch_cycles[l.col].push(cycle);
            }
        }
        for (c, cycles) in latch_cycles.iter().enumerate() {
            assert_eq!(cycles.len(), 8, "column {c}");
            assert!(cycles.windows(2).all(|w| w[1] - w[0] == e));
            // column c trails column 0 by c * D
            assert_eq!(cycles[0] - latch_cycles[0][0], (c * (g.p + 1)) as u64);
        }
    }

    #[test]
    fn missing_w_line_stalls_the_array() {
        let g = Geometry::new(2, 1, 1).unwrap();
        let mut dp = Datapath::new(&g);
        dp.push_tile(TileJob {
            loops: 1,
            valid_rows: 1,
            valid_cols: 4,
            valid_n: 2,
        });
        dp.install_x(XLine {
            tile: 0,
            line: 0,
            row: 0,
            data: ones(4),
        });
        dp.install_w(WLine {
            tile: 0,
            n: 0,
            data: ones(4),
        });
        // Column 0 runs until column 1 needs the n = 1 line.
        let mut statuses = Vec::new();
        for _ in 0..3 {
            statuses.push(dp.step(Feed::default()).status);
        }
        assert_eq!(statuses[0], StepStatus::Active);
        assert_eq!(
            statuses[2],
            StepStatus::Stalled(StallReason::WLine { col: 1 })
        );
        let frozen = dp.stage(0, 0);
        assert_eq!(dp.step(Feed::default()).status, statuses[2]);
        assert_eq!(dp.stage(0, 0), frozen);
        // Delivering the line releases the stall one cycle later.
        let out = dp.step(Feed {
            w: Some(WLine {
                tile: 0,
                n: 1,
                data: ones(4),
            }),
            ..Default::default()
        });
        assert!(matches!(out.status, StepStatus::Stalled(_)));
        assert_eq!(dp.step(Feed::default()).status, StepStatus::Active);
    }

    #[test]
    fn tile_start_waits_as_a_bubble() {
        let g = Geometry::new(1, 1, 0).unwrap();
        let mut dp = Datapath::new(&g);
        dp.push_tile(TileJob {
            loops: 1,
            valid_rows: 1,
            valid_cols: 1,
            valid_n: 1,
        });
        let out = dp.step(Feed::default());
        assert_eq!(out.bubble, Some(StallReason::XOperand { col: 0 }));
        assert_eq!(out.status, StepStatus::Idle);
        dp.install_x(XLine {
            tile: 0,
            line: 0,
            row: 0,
            data: vec![F16::from_bits(0x4000)],
        });
        dp.install_w(WLine {
            tile: 0,
            n: 0,
            data: vec![F16::from_bits(0x4200)],
        });
        let out = dp.step(Feed::default());
        assert_eq!(out.bubble, None);
        let out = dp.step(Feed::default());
        assert_eq!(out.valid_macs, 1);
        assert_eq!(out.completed_lines, 1);
        let out = dp.step(Feed {
            drain: true,
            ..Default::default()
        });
        let z = out.drained.unwrap();
        assert_eq!(z.data[0].to_bits(), 0x4600); // 2 * 3
        assert!(dp.is_quiescent());
    }

    #[test]
    fn single_k_slot_limits_throughput() {
        // K = 1: only one of the 16 k-slots carries a real output column.
        let g = Geometry::DEFAULT;
        let mut dp = Datapath::new(&g);
        dp.push_tile(TileJob {
            loops: 4,
            valid_rows: 8,
            valid_cols: 1,
            valid_n: 16,
        });
        for row in 0..8 {
            dp.install_x(XLine {
                tile: 0,
                line: 0,
                row,
                data: ones(16),
            });
        }
        let mut next_n = 0;
        let mut per_cycle = Vec::new();
        while !dp.is_quiescent() {
            while next_n < 16 && dp.w_has_room(next_n % 4) {
                dp.install_w(WLine {
                    tile: 0,
                    n: next_n,
                    data: ones(16),
                });
                next_n += 1;
            }
            let drain = dp.z_pending() > 0;
            per_cycle.push(dp.step(Feed {
                drain,
                ..Default::default()
            }));
        }
        let total: usize = per_cycle.iter().map(|o| o.valid_macs).sum();
        assert_eq!(total, 8 * 16);
        // Over any 16-cycle ring loop at most 32 of the 512 FMA slots are useful.
        for win in per_cycle.windows(16) {
            let macs: usize = win.iter().map(|o| o.valid_macs).sum();
            assert!(macs * 16 <= 32 * 16, "{macs}");
        }
    }
}
