// SPDX-License-Identifier: Apache-2.0

//! Linear area model and geometry sweeps.

use std::io::Write;

use serde::Serialize;

use crate::config::Geometry;
use crate::error::{Error, Result};

/// Area as a fixed part (controller, streamer, buffers' control) plus a
/// per-FMA increment. Pipeline depth is folded into the per-FMA figure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AreaModel {
    pub fixed_mm2: f64,
    pub per_fma_mm2: f64,
}

impl Default for AreaModel {
    fn default() -> Self {
        AreaModel {
            fixed_mm2: 0.0086,
            per_fma_mm2: 0.00192,
        }
    }
}

pub fn area_mm2(g: &Geometry, m: &AreaModel) -> f64 {
    m.fixed_mm2 + m.per_fma_mm2 * g.fma_count() as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    #[serde(rename = "H")]
    pub h: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub fma_count: usize,
    pub area_mm2: f64,
    pub ports: usize,
    pub peak_macs_per_cycle: usize,
}

impl SweepRow {
    pub const CSV_HEADER: &'static str = "H,L,fma_count,area_mm2,ports,peak_macs_per_cycle";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:.6},{},{}",
            self.h, self.l, self.fma_count, self.area_mm2, self.ports, self.peak_macs_per_cycle
        )
    }
}

/// One row per `(H, L)` pair, H-major.
pub fn sweep(hs: &[usize], ls: &[usize], p: usize, model: &AreaModel) -> Result<Vec<SweepRow>> {
    if hs.is_empty() {
        return Err(Error::EmptyRange("H"));
    }
    if ls.is_empty() {
        return Err(Error::EmptyRange("L"));
    }
    let mut rows = Vec::with_capacity(hs.len() * ls.len());
    for &h in hs {
        for &l in ls {
            let g = Geometry::new(h, l, p)?;
            rows.push(SweepRow {
                h,
                l,
                fma_count: g.fma_count(),
                area_mm2: area_mm2(&g, model),
                ports: g.required_ports(),
                peak_macs_per_cycle: g.fma_count(),
            });
        }
    }
    Ok(rows)
}

pub fn write_sweep_csv(rows: &[SweepRow], mut w: impl Write) -> Result<()> {
    writeln!(w, "{}", SweepRow::CSV_HEADER)?;
    for r in rows {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn area(h: usize, l: usize) -> f64 {
        area_mm2(&Geometry::new(h, l, 3).unwrap(), &AreaModel::default())
    }

    #[test]
    fn anchors() {
        assert!((area(4, 8) - 0.070).abs() < 0.005);
        assert!((area(16, 16) - 0.50).abs() < 0.05);
        assert!((area(16, 32) - 0.99).abs() < 0.10);
    }

    #[test]
    fn sweep_rows() {
        let m = AreaModel::default();
        let rows = sweep(&[4], &[8], 3, &m).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(
            (
                rows[0].fma_count,
                rows[0].ports,
                rows[0].peak_macs_per_cycle
            ),
            (32, 9, 32)
        );

        let rows = sweep(&[4, 5], &[8], 3, &m).unwrap();
        assert_eq!(rows[1].ports, 11);

        assert!(matches!(
            sweep(&[], &[8], 3, &m),
            Err(Error::EmptyRange("H"))
        ));
        assert!(matches!(
            sweep(&[4], &[], 3, &m),
            Err(Error::EmptyRange("L"))
        ));
    }

    #[test]
    fn csv_layout() {
        let rows = sweep(&[4], &[8], 3, &AreaModel::default()).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "H,L,fma_count,area_mm2,ports,peak_macs_per_cycle\n4,8,32,0.070040,9,32\n"
        );
    }
}
