// SPDX-License-Identifier: Apache-2.0

//! Dense-autoencoder training step expressed as GEMMs.
//!
//! For a layer `y = W a` with `W: n_out x n_in` and a batch of `B` column
//! activations `a: n_in x B`:
//!
//! - forward: `W * a` is `(n_out, n_in, B)`
//! - input gradient: `W^T * dy` is `(n_in, n_out, B)`
//! - weight gradient: `dy * a^T` is `(n_out, B, n_in)`
//!
//! Transposes are materialized before the run and cost nothing.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::Geometry;
use crate::error::{Error, Result};
use crate::golden::{gemm_padded, GemmProblem};
use crate::matrix::{MatF16, ValueMix};
use crate::perf::{analyze, OperatingPoint, PerfReport, SwBaseline};
use crate::tiler::{run_gemm, RunOptions, Stationarity};
use crate::trace::TraceLevel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct DenseLayer {
    pub n_in: usize,
    pub n_out: usize,
}

impl DenseLayer {
    pub fn new(n_in: usize, n_out: usize) -> Result<Self> {
        if n_in == 0 || n_out == 0 {
            return Err(Error::Dimension(format!("layer {n_in} -> {n_out}")));
        }
        Ok(DenseLayer { n_in, n_out })
    }
}

/// MLPerf Tiny anomaly-detection autoencoder: 640 -> 128 x4 -> 8 -> 128 x4 -> 640.
pub fn default_autoencoder() -> Vec<DenseLayer> {
    let widths = [640, 128, 128, 128, 128, 8, 128, 128, 128, 128, 640];
    widths
        .windows(2)
        .map(|w| DenseLayer {
            n_in: w[0],
            n_out: w[1],
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Forward,
    BackwardDx,
    BackwardDw,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Forward => "forward",
            Phase::BackwardDx => "backward_dx",
            Phase::BackwardDw => "backward_dw",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct GemmShape {
    pub phase: Phase,
    pub layer: usize,
    pub m: usize,
    pub n: usize,
    pub k: usize,
}

impl GemmShape {
    pub fn macs(&self) -> u64 {
        (self.m * self.n * self.k) as u64
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TrainingStep {
    pub batch: usize,
    pub gemms: Vec<GemmShape>,
    /// Weights plus every layer's activations at batch `B`, two bytes each.
    pub footprint_bytes: u64,
}

/// Forward through all layers, then backward from the last layer to the first.
pub fn autoencoder_step(batch: usize, layers: &[DenseLayer]) -> Result<TrainingStep> {
    if batch == 0 {
        return Err(Error::Dimension("batch size must be at least 1".into()));
    }
    if layers.is_empty() {
        return Err(Error::Dimension("empty layer stack".into()));
    }
    for l in layers {
        DenseLayer::new(l.n_in, l.n_out)?;
    }
    let mut gemms = Vec::with_capacity(3 * layers.len());
    for (i, l) in layers.iter().enumerate() {
        gemms.push(GemmShape {
            phase: Phase::Forward,
            layer: i,
            m: l.n_out,
            n: l.n_in,
            k: batch,
        });
    }
    for (i, l) in layers.iter().enumerate().rev() {
        gemms.push(GemmShape {
            phase: Phase::BackwardDx,
            layer: i,
            m: l.n_in,
            n: l.n_out,
            k: batch,
        });
        gemms.push(GemmShape {
            phase: Phase::BackwardDw,
            layer: i,
            m: l.n_out,
            n: batch,
            k: l.n_in,
        });
    }
    let weights: usize = layers.iter().map(|l| l.n_in * l.n_out).sum();
    let activations: usize = layers[0].n_in + layers.iter().map(|l| l.n_out).sum::<usize>();
    Ok(TrainingStep {
        batch,
        gemms,
        footprint_bytes: 2 * (weights + activations * batch) as u64,
    })
}

/// Operand matrices for one GEMM of the step, in the orientation the array
/// consumes them.
fn operands(s: &GemmShape, layers: &[DenseLayer], batch: usize, seed: u64) -> GemmProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = layers[s.layer];
    let mut rand = |r, c| MatF16::random(r, c, ValueMix::Moderate, &mut rng);
    let (x, w) = match s.phase {
        Phase::Forward => (rand(l.n_out, l.n_in), rand(l.n_in, batch)),
        Phase::BackwardDx => {
            let weights = rand(l.n_out, l.n_in);
            (weights.transpose(), rand(l.n_out, batch))
        }
        Phase::BackwardDw => {
            let acts = rand(l.n_in, batch);
            (rand(l.n_out, batch), acts.transpose())
        }
    };
    GemmProblem::new(x, w).expect("shapes built to match")
}

#[derive(Clone, Debug, Serialize)]
pub struct GemmResult {
    pub shape: GemmShape,
    pub report: PerfReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub batch: usize,
    pub seed: u64,
    pub footprint_bytes: u64,
    pub cycles: u64,
    pub sw_cycles: u64,
    pub useful_macs: u64,
    /// Accelerator MAC/cycle over the whole step.
    pub macs_per_cycle: f64,
    pub speedup: f64,
    #[serde(skip)]
    pub gemms: Vec<GemmResult>,
}

impl BenchReport {
    /// Baseline over accelerator cycles, restricted to one phase.
    pub fn phase_speedup(&self, phase: Phase) -> f64 {
        let (sw, hw) = self
            .gemms
            .iter()
            .filter(|r| r.shape.phase == phase)
            .fold((0u64, 0u64), |(s, h), r| {
                (s + r.report.sw_cycles, h + r.report.cycles)
            });
        sw as f64 / hw as f64
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "phase,layer,M,N,K,cycles,macs_per_cycle,speedup")?;
        for r in &self.gemms {
            let s = &r.shape;
            writeln!(
                w,
                "{},{},{},{},{},{},{:.6},{:.6}",
                s.phase.name(),
                s.layer,
                s.m,
                s.n,
                s.k,
                r.report.cycles,
                r.report.macs_per_cycle,
                r.report.speedup
            )?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BenchOptions {
    pub geometry: Geometry,
    pub baseline: SwBaseline,
    pub point: OperatingPoint,
    pub stationarity: Stationarity,
    pub seed: u64,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            geometry: Geometry::DEFAULT,
            baseline: SwBaseline::default(),
            point: OperatingPoint::default(),
            stationarity: Stationarity::default(),
            seed: 0,
        }
    }
}

/// Simulates every GEMM of one training step on random data, checking each
/// result against the reference.
pub fn bench(batch: usize, layers: &[DenseLayer], opts: &BenchOptions) -> Result<BenchReport> {
    let step = autoencoder_step(batch, layers)?;
    let run_opts = RunOptions {
        stationarity: opts.stationarity,
        trace: TraceLevel::Off,
    };
    let g = &opts.geometry;
    let gemms = step
        .gemms
        .par_iter()
        .enumerate()
        .map(|(i, shape)| {
            let seed = opts
                .seed
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add(i as u64);
            let p = operands(shape, layers, batch, seed);
            let run = run_gemm(&p, g, &run_opts)?;
            let diff = run.z.bit_diff(&gemm_padded(&p, g)?);
            if let Some(&(r, c)) = diff.first() {
                return Err(Error::Mismatch(format!(
                    "{} layer {}: {} elements differ, first at ({r}, {c})",
                    shape.phase.name(),
                    shape.layer,
                    diff.len()
                )));
            }
            let report = analyze(
                &run.trace,
                g,
                opts.point.freq_hz,
                opts.point.power_mw,
                &opts.baseline,
            )?;
            Ok(GemmResult {
                shape: *shape,
                report,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let cycles: u64 = gemms.iter().map(|r| r.report.cycles).sum();
    let sw_cycles: u64 = gemms.iter().map(|r| r.report.sw_cycles).sum();
    let useful_macs: u64 = gemms.iter().map(|r| r.report.useful_macs).sum();
    Ok(BenchReport {
        batch,
        seed: opts.seed,
        footprint_bytes: step.footprint_bytes,
        cycles,
        sw_cycles,
        useful_macs,
        macs_per_cycle: useful_macs as f64 / cycles as f64,
        speedup: sw_cycles as f64 / cycles as f64,
        gemms,
    })
}
