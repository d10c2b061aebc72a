// SPDX-License-Identifier: Apache-2.0

//! Run configuration: built-in defaults, then the config file, then flags.
//!
//! The config file is TOML with flat keys:
//!
//! ```toml
//! H = 4
//! L = 8
//! P = 3
//! frequency_hz = 666e6
//! power_mw = 90.7
//! sw_cores = 8
//! sw_macs_per_cycle_per_core = 0.18
//! stationarity = "x_stationary"
//! seed = 0
//! # optional
//! rounding = "rne"
//! trace = "summary"
//! format = "json"
//! area_fixed_mm2 = 0.0086
//! area_per_fma_mm2 = 0.00192
//! ```

use std::path::Path;

use redmule::cost::AreaModel;
use redmule::fp16::RoundingMode;
use redmule::perf::{OperatingPoint, SwBaseline};
use redmule::tiler::Stationarity;
use redmule::trace::TraceLevel;
use redmule::{Error, Geometry, Result};
use serde::Deserialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            _ => Err(Error::Config(format!(
                "format '{s}' (expected json or csv)"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub geometry: Geometry,
    pub frequency_hz: f64,
    pub power_mw: f64,
    pub baseline: SwBaseline,
    pub stationarity: Stationarity,
    pub seed: u64,
    pub format: Option<Format>,
    pub trace: TraceLevel,
    pub area: AreaModel,
}

/// Everything a config file may set. Unknown keys are rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(rename = "H")]
    pub h: Option<i64>,
    #[serde(rename = "L")]
    pub l: Option<i64>,
    #[serde(rename = "P")]
    pub p: Option<i64>,
    pub frequency_hz: Option<f64>,
    pub power_mw: Option<f64>,
    pub sw_cores: Option<i64>,
    pub sw_macs_per_cycle_per_core: Option<f64>,
    pub stationarity: Option<String>,
    pub seed: Option<u64>,
    pub rounding: Option<String>,
    pub trace: Option<String>,
    pub format: Option<String>,
    pub area_fixed_mm2: Option<f64>,
    pub area_per_fma_mm2: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

/// Values given on the command line; `None` means "not given".
#[derive(Debug, Default)]
pub struct Overrides {
    pub h: Option<i64>,
    pub l: Option<i64>,
    pub p: Option<i64>,
    pub frequency_hz: Option<f64>,
    pub power_mw: Option<f64>,
    pub stationarity: Option<String>,
    pub seed: Option<u64>,
    pub trace: Option<String>,
    pub format: Option<String>,
}

impl RunConfig {
    pub fn resolve(file: FileConfig, flags: Overrides) -> Result<RunConfig> {
        let d = Geometry::DEFAULT;
        let h = flags.h.or(file.h).unwrap_or(d.h as i64);
        let l = flags.l.or(file.l).unwrap_or(d.l as i64);
        let p = flags.p.or(file.p).unwrap_or(d.p as i64);
        let geometry = Geometry::from_signed(h, l, p)?;

        let op = OperatingPoint::default();
        let frequency_hz = flags
            .frequency_hz
            .or(file.frequency_hz)
            .unwrap_or(op.freq_hz);
        if frequency_hz.is_nan() || frequency_hz <= 0.0 {
            return Err(Error::Config(format!(
                "frequency_hz must be positive, got {frequency_hz}"
            )));
        }
        let power_mw = flags.power_mw.or(file.power_mw).unwrap_or(op.power_mw);
        if power_mw.is_nan() || power_mw < 0.0 {
            return Err(Error::Config(format!(
                "power_mw must be non-negative, got {power_mw}"
            )));
        }

        let base = SwBaseline::default();
        let cores = file.sw_cores.unwrap_or(base.cores as i64);
        let baseline = SwBaseline {
            cores: u32::try_from(cores)
                .map_err(|_| Error::Config(format!("sw_cores = {cores}")))?,
            macs_per_cycle_per_core: file
                .sw_macs_per_cycle_per_core
                .unwrap_or(base.macs_per_cycle_per_core),
        };
        baseline.validate()?;

        if let Some(r) = &file.rounding {
            r.parse::<RoundingMode>()?;
        }
        let stationarity = match flags.stationarity.or(file.stationarity) {
            Some(s) => s.parse()?,
            None => Stationarity::default(),
        };
        let trace = match flags.trace.or(file.trace) {
            Some(s) => s.parse()?,
            None => TraceLevel::Summary,
        };
        let format = flags
            .format
            .or(file.format)
            .map(|s| s.parse())
            .transpose()?;

        let area_default = AreaModel::default();
        let area = AreaModel {
            fixed_mm2: file.area_fixed_mm2.unwrap_or(area_default.fixed_mm2),
            per_fma_mm2: file.area_per_fma_mm2.unwrap_or(area_default.per_fma_mm2),
        };

        Ok(RunConfig {
            geometry,
            frequency_hz,
            power_mw,
            baseline,
            stationarity,
            seed: flags.seed.or(file.seed).unwrap_or(0),
            format,
            trace,
            area,
        })
    }
}
