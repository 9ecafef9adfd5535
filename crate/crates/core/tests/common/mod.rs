//! A synthetic stand-in for the propulsion table: the canonical shape
//! (9 speeds x 51 compressor decay x 26 turbine decay = 11934 rows), the
//! documented value ranges and the two constant columns, with smooth
//! speed- and wear-dependent values elsewhere.

#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use codlag_gp::data::{Column, Dataset, N_COLUMNS};

const LEVER: [f64; 9] = [1.138, 2.088, 3.144, 4.161, 5.14, 6.175, 7.148, 8.206, 9.3];

fn scaled(column: Column, x: f64) -> f64 {
    let (lo, hi) = column.range();
    lo + (hi - lo) * x.clamp(0.0, 1.0)
}

pub fn surrogate_rows() -> Vec<[f64; N_COLUMNS]> {
    let mut rows = Vec::with_capacity(11934);
    for (k, &lp) in LEVER.iter().enumerate() {
        let v = 3.0 * (k as f64 + 1.0);
        let s = (v - 3.0) / 24.0;
        for i in 0..=50 {
            let kmc = (950 + i) as f64 / 1000.0;
            for j in 0..=25 {
                let kmt = (975 + j) as f64 / 1000.0;
                let wear = 0.5 * (1.0 - kmc) / 0.05 + 0.5 * (1.0 - kmt) / 0.025;
                let health = 1.0 - 0.02 * wear;
                let mut r = [0.0; N_COLUMNS];
                let mut set = |c: Column, x: f64| r[c.index()] = scaled(c, x);
                set(Column::GtShaftTorque, s.powf(2.2) * (1.0 - 0.01 * wear));
                set(Column::GtRevolutions, s.powf(0.9) * health);
                set(Column::GgRevolutions, s.powf(0.7) * health);
                set(Column::StarboardTorque, s.powf(2.0) * health);
                set(Column::PortTorque, s.powf(2.0) * health);
                set(Column::HpExitTemp, s.powf(1.1) * (1.0 - 0.01 * wear));
                set(Column::CompressorOutletTemp, s.powf(0.8) * health);
                set(Column::HpExitPressure, s.powf(1.5) * health);
                set(Column::CompressorOutletPressure, s.powf(1.2) * health);
                set(Column::ExhaustPressure, s * (1.0 - 0.05 * wear));
                set(
                    Column::TurbineInjectionControl,
                    s.powf(1.3) * (1.0 - 0.03 * wear),
                );
                set(Column::FuelFlow, s.powf(1.8) * (0.98 + 0.02 * wear));
                r[Column::LeverPosition.index()] = lp;
                r[Column::ShipSpeed.index()] = v;
                r[Column::CompressorInletTemp.index()] = 288.0;
                r[Column::CompressorInletPressure.index()] = 0.998;
                r[Column::CompressorDecay.index()] = kmc;
                r[Column::TurbineDecay.index()] = kmt;
                rows.push(r);
            }
        }
    }
    rows
}

pub fn surrogate() -> Dataset {
    Dataset::from_rows(&surrogate_rows())
}

/// Whitespace-separated text in the layout of the canonical file.
pub fn surrogate_text(rows: &[[f64; N_COLUMNS]]) -> String {
    let mut s = String::new();
    for r in rows {
        let fields: Vec<String> = r.iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(s, "   {}", fields.join("   "));
    }
    s
}

pub fn write_surrogate(dir: &Path) -> PathBuf {
    let path = dir.join("data.txt");
    std::fs::write(&path, surrogate_text(&surrogate_rows())).unwrap();
    path
}
