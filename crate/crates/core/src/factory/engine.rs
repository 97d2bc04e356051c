//! Bundled engine-assembly line.
//!
//! Topology: 12 workshops with 14 equipment options across eight segments
//! (parts, datum milling, crankshaft grinding, crankshaft mounting, cylinder
//! mounting, piston assembly, belt mounting, testing). Grinding and cylinder
//! mounting can run in either order: the regular route grinds first
//! (`grind` -> `crank_mount` -> `cyl_mount`), the reordered one mounts the
//! cylinder first (`cyl_first` -> `grind_second`). A piston-line machine
//! diverts assembled blocks to the `liners` by-product outlet.
//!
//! Every number below is a synthetic default (quantities in parts, times in
//! hours, energy in kWh, prices in currency units). None is plant data.

use super::{Buffer, EnergySystem, EquipmentOption, FactoryGraph, Workshop};

const HORIZON: usize = 24;

/// Real-time price per kWh: night valley, morning and evening peaks.
const RTP: [f64; HORIZON] = [
    0.22, 0.20, 0.20, 0.20, 0.21, 0.24, 0.32, 0.45, 0.62, 0.70, 0.72, 0.66, //
    0.50, 0.46, 0.48, 0.55, 0.68, 0.74, 0.76, 0.70, 0.55, 0.40, 0.30, 0.25,
];

/// Rooftop PV plus a small gas unit, kWh available per hour.
const DER: [f64; HORIZON] = [
    10.0, 10.0, 10.0, 10.0, 10.0, 12.0, 18.0, 30.0, 45.0, 58.0, 66.0, 70.0, //
    70.0, 66.0, 58.0, 45.0, 30.0, 18.0, 12.0, 10.0, 10.0, 10.0, 10.0, 10.0,
];

fn opt(id: &str, time: f64, energy: f64, qty: f64, uptime: usize, yield_rate: f64) -> EquipmentOption {
    EquipmentOption {
        id: id.into(),
        time_cost: time,
        energy_cost: energy,
        output_qty: qty,
        input_qty: qty,
        min_uptime: uptime,
        max_daily_uses: 18,
        yield_rate,
    }
}

fn shop(id: &str, options: Vec<EquipmentOption>, location: [f64; 2], up: &str, down: &str) -> Workshop {
    Workshop {
        id: id.into(),
        options,
        location,
        upstream_buffers: vec![up.into()],
        downstream_buffers: vec![down.into()],
    }
}

fn buffer(id: &str, initial: f64, batch: f64, transport_time: f64) -> Buffer {
    Buffer {
        id: id.into(),
        initial_stock: Some(initial),
        transport_batch: batch,
        transport_time,
        is_byproduct_outlet: false,
        main_output: false,
    }
}

pub fn build_engine_case() -> FactoryGraph {
    let workshops = vec![
        shop("stamping", vec![opt("SM", 1.0, 60.0, 12.0, 2, 1.0)], [0.0, 0.0], "raw", "parts"),
        shop(
            "milling",
            vec![opt("mill", 1.0, 35.0, 10.0, 1, 0.98), opt("face_mill", 0.8, 42.0, 12.0, 1, 0.97)],
            [1.0, 0.0],
            "parts",
            "milled",
        ),
        shop("grind", vec![opt("CG", 1.0, 50.0, 10.0, 2, 0.95)], [2.0, 1.0], "milled", "ground"),
        shop(
            "crank_mount",
            vec![opt("AAL1", 0.9, 30.0, 10.0, 1, 0.94), opt("RAL1", 0.7, 38.0, 10.0, 1, 0.96)],
            [3.0, 1.0],
            "ground",
            "crank_mounted",
        ),
        shop("cyl_mount", vec![opt("AAL2", 0.9, 32.0, 10.0, 1, 0.95)], [4.0, 1.0], "crank_mounted", "assembled"),
        shop("cyl_first", vec![opt("RAL2", 0.8, 36.0, 8.0, 1, 0.93)], [2.0, -1.0], "milled", "cyl_first"),
        shop("grind_second", vec![opt("CNC_grinder", 1.0, 55.0, 8.0, 2, 0.94)], [3.0, -1.0], "cyl_first", "assembled"),
        shop("piston", vec![opt("PAM", 0.8, 25.0, 10.0, 1, 0.97)], [5.0, 0.0], "assembled", "pistoned"),
        shop("piston_liner", vec![opt("AAM1", 0.6, 20.0, 6.0, 1, 0.9)], [5.0, -2.0], "assembled", "liners"),
        shop("belt", vec![opt("BMM", 0.7, 18.0, 10.0, 1, 0.98)], [6.0, 0.5], "pistoned", "belted"),
        shop("belt_alt", vec![opt("AAM2", 0.6, 22.0, 10.0, 1, 0.97)], [6.0, -0.5], "pistoned", "belted"),
        shop("testing", vec![opt("test_platform", 0.5, 15.0, 10.0, 1, 0.99)], [7.0, 0.0], "belted", "engines"),
    ];
    let mut buffers = vec![
        buffer("raw", 400.0, 20.0, 0.2),
        buffer("parts", 20.0, 20.0, 0.1),
        buffer("milled", 20.0, 20.0, 0.1),
        buffer("ground", 20.0, 20.0, 0.1),
        buffer("crank_mounted", 20.0, 20.0, 0.1),
        buffer("cyl_first", 10.0, 20.0, 0.1),
        buffer("assembled", 20.0, 20.0, 0.1),
        buffer("pistoned", 20.0, 20.0, 0.1),
        buffer("belted", 20.0, 20.0, 0.1),
        buffer("liners", 0.0, 10.0, 0.2),
        buffer("engines", 0.0, 10.0, 0.2),
    ];
    buffers[9].is_byproduct_outlet = true;
    buffers[10].main_output = true;
    FactoryGraph {
        horizon: HORIZON,
        workshops,
        buffers,
        energy: EnergySystem {
            bess_capacity: 200.0,
            bess_initial: 100.0,
            discharge_eff: 0.95,
            charge_eff: 0.95,
            ramp_lo: 0.0,
            ramp_hi: 50.0,
            rtp: RTP.to_vec(),
            der_output: DER.to_vec(),
            degr_coeff: 0.002,
            sale_price_main: 12.0,
            sale_price_by: 4.0,
            equipment_rate: 2.0,
            fr_weight: 0.1,
            grid_cap: None,
        },
    }
}

/// The engine case restricted to its first `hours` hours (at least 1).
pub fn engine_window(hours: usize) -> FactoryGraph {
    let mut g = build_engine_case();
    let hours = hours.clamp(1, HORIZON);
    g.horizon = hours;
    g.energy.rtp.truncate(hours);
    g.energy.der_output.truncate(hours);
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factory::load_factory;

    #[test]
    fn engine_shape() {
        let g = build_engine_case();
        assert_eq!(g.workshops.len(), 12);
        assert_eq!(g.option_refs().len(), 14);
        assert_eq!(g.buffers.iter().filter(|b| b.is_byproduct_outlet).count(), 1);
        assert_eq!(g.buffers[g.main_buffer().unwrap()].id, "engines");
        assert!(g.check().is_empty(), "{:?}", g.check());
    }

    #[test]
    fn reorderable_branch_reaches_assembled() {
        let g = build_engine_case();
        let assembled = g.buffer_index("assembled").unwrap();
        let names: Vec<&str> = g.producers(assembled).iter().map(|&n| g.workshops[n].id.as_str()).collect();
        assert_eq!(names, ["cyl_mount", "grind_second"]);
    }

    #[test]
    fn document_round_trip() {
        let g = build_engine_case();
        assert_eq!(load_factory(&g.to_json(), false).unwrap(), g);
    }

    #[test]
    fn window_truncates_series() {
        let g = engine_window(4);
        assert_eq!((g.horizon, g.energy.rtp.len(), g.energy.der_output.len()), (4, 4, 4));
        assert!(g.check().is_empty());
    }
}
