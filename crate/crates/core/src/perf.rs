// SPDX-License-Identifier: Apache-2.0

//! Throughput, speedup and energy figures derived from a run's counters.

use serde::Serialize;

use crate::config::Geometry;
use crate::error::{Error, Result};
use crate::streamer::{traffic_totals, TrafficTotals};
use crate::trace::CycleTrace;

/// Closed-form model of the 8-core cluster running the same GEMM in software.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SwBaseline {
    pub cores: u32,
    /// 31.6 MAC/cycle at peak over a 22x speedup, spread over 8 cores.
    pub macs_per_cycle_per_core: f64,
}

impl Default for SwBaseline {
    fn default() -> Self {
        SwBaseline {
            cores: 8,
            macs_per_cycle_per_core: 0.18,
        }
    }
}

impl SwBaseline {
    pub fn macs_per_cycle(&self) -> f64 {
        self.cores as f64 * self.macs_per_cycle_per_core
    }

    pub fn cycles(&self, macs: u64) -> u64 {
        if macs == 0 {
            return 0;
        }
        (macs as f64 / self.macs_per_cycle()).ceil() as u64
    }

    pub fn validate(&self) -> Result<()> {
        if self.cores == 0
            || self.macs_per_cycle_per_core.is_nan()
            || self.macs_per_cycle_per_core <= 0.0
        {
            return Err(Error::Config(format!(
                "software baseline needs cores >= 1 and a positive MAC rate, got {} x {}",
                self.cores, self.macs_per_cycle_per_core
            )));
        }
        Ok(())
    }
}

/// Voltage/frequency point with its measured cluster power.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OperatingPoint {
    pub freq_hz: f64,
    pub power_mw: f64,
}

impl OperatingPoint {
    /// 0.65 V, best energy efficiency.
    pub const EFFICIENT: OperatingPoint = OperatingPoint {
        freq_hz: 476e6,
        power_mw: 43.5,
    };
    /// 0.8 V, best performance.
    pub const FAST: OperatingPoint = OperatingPoint {
        freq_hz: 666e6,
        power_mw: 90.7,
    };
}

impl Default for OperatingPoint {
    fn default() -> Self {
        OperatingPoint::FAST
    }
}

/// Share of cluster power spent in the accelerator.
pub const ACCEL_POWER_SHARE: f64 = 0.69;
/// Share spent in the data memory and its interconnect.
pub const TCDM_HCI_POWER_SHARE: f64 = 0.171;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerBreakdown {
    pub accelerator_mw: f64,
    pub tcdm_hci_mw: f64,
    pub other_mw: f64,
}

pub fn power_breakdown(power_mw: f64) -> PowerBreakdown {
    let accelerator_mw = power_mw * ACCEL_POWER_SHARE;
    let tcdm_hci_mw = power_mw * TCDM_HCI_POWER_SHARE;
    PowerBreakdown {
        accelerator_mw,
        tcdm_hci_mw,
        other_mw: power_mw - accelerator_mw - tcdm_hci_mw,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PerfReport {
    pub cycles: u64,
    pub useful_macs: u64,
    pub macs_per_cycle: f64,
    pub utilization: f64,
    pub gflops: f64,
    pub sw_cycles: u64,
    pub speedup: f64,
    pub energy_j: f64,
    pub traffic: TrafficTotals,
}

impl PerfReport {
    pub fn gflops_at(&self, freq_hz: f64) -> f64 {
        2.0 * self.macs_per_cycle * freq_hz / 1e9
    }

    pub const CSV_HEADER: &'static str =
        "cycles,useful_macs,macs_per_cycle,utilization,gflops,sw_cycles,speedup,energy_j,w_lines,x_lines,z_lines,idle_cycles,bytes";

    pub fn csv_row(&self) -> String {
        let t = &self.traffic;
        format!(
            "{},{},{:.6},{:.6},{:.6},{},{:.6},{:.6e},{},{},{},{},{}",
            self.cycles,
            self.useful_macs,
            self.macs_per_cycle,
            self.utilization,
            self.gflops,
            self.sw_cycles,
            self.speedup,
            self.energy_j,
            t.w_lines,
            t.x_lines,
            t.z_lines,
            t.idle_cycles,
            t.bytes
        )
    }
}

pub fn analyze(
    trace: &CycleTrace,
    g: &Geometry,
    freq_hz: f64,
    power_mw: f64,
    baseline: &SwBaseline,
) -> Result<PerfReport> {
    if freq_hz.is_nan() || freq_hz <= 0.0 {
        return Err(Error::Config(format!(
            "frequency must be positive, got {freq_hz}"
        )));
    }
    if power_mw.is_nan() || power_mw < 0.0 {
        return Err(Error::Config(format!(
            "power must be non-negative, got {power_mw}"
        )));
    }
    baseline.validate()?;
    let c = &trace.counters;
    let macs_per_cycle = if c.cycles == 0 {
        0.0
    } else {
        c.useful_macs as f64 / c.cycles as f64
    };
    let sw_cycles = baseline.cycles(c.useful_macs);
    Ok(PerfReport {
        cycles: c.cycles,
        useful_macs: c.useful_macs,
        macs_per_cycle,
        utilization: macs_per_cycle / g.fma_count() as f64,
        gflops: 2.0 * macs_per_cycle * freq_hz / 1e9,
        sw_cycles,
        speedup: if c.cycles == 0 {
            0.0
        } else {
            sw_cycles as f64 / c.cycles as f64
        },
        energy_j: power_mw / 1000.0 * c.cycles as f64 / freq_hz,
        traffic: traffic_totals(trace),
    })
}

pub fn energy_per_mac(r: &PerfReport) -> Result<f64> {
    if r.useful_macs == 0 {
        return Err(Error::UndefinedMetric(
            "energy per MAC of a run without MACs",
        ));
    }
    Ok(r.energy_j / r.useful_macs as f64)
}

/// FLOP per joule / 1e9, counting a MAC as two operations.
pub fn gflops_per_watt(r: &PerfReport, freq_hz: f64, power_mw: f64) -> f64 {
    r.gflops_at(freq_hz) / (power_mw / 1000.0)
}
