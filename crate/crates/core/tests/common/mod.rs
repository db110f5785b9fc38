//! Benchmark drivers shared by the integration tests.
#![allow(dead_code)]

use cryoflow::constitutive::{thermal_conductivity, volumetric_heat_capacity, LATENT_HEAT_FUSION, RHO_WATER};
use cryoflow::heat::{heat_step, BottomHeat, HeatBoundary, HeatSettings, WaterTransport};
use cryoflow::mesh::{build_mesh, sample_profile};
use cryoflow::oracles::erfc_profile;
use cryoflow::{ColumnMesh, ColumnState, SoilLayer, SoilProfile, StefanProblem};

pub const DAY: f64 = 86_400.0;

/// Saturated, single-conductivity soil that maps cleanly onto the one-phase
/// Stefan problem.
pub fn stefan_layer(depth: f64) -> SoilLayer {
    let mut l = SoilLayer::with_defaults(0.0, depth);
    l.theta_r = 0.0;
    l.theta_s = 0.4;
    l.k_solid = 2.0;
    l.k_water = 2.0;
    l.k_ice = 2.0;
    l.freeze_w = 0.02;
    l
}

/// Surface temperature giving Stefan number `st` for [`stefan_layer`].
pub fn stefan_surface_temperature(layer: &SoilLayer, st: f64) -> f64 {
    let c_frozen = volumetric_heat_capacity(layer.theta_r, layer.theta_s - layer.theta_r, layer);
    -st * LATENT_HEAT_FUSION * RHO_WATER * (layer.theta_s - layer.theta_r) / c_frozen
}

/// Depth of the `iso` isotherm, linear between the surface value and the
/// cell centers; the column depth when it is never crossed.
pub fn isotherm_depth(t: &[f64], mesh: &ColumnMesh, t_surface: f64, iso: f64) -> f64 {
    let mut z_prev = 0.0;
    let mut t_prev = t_surface;
    for (&z, &ti) in mesh.z_center().iter().zip(t) {
        if ti >= iso {
            if t_prev >= iso {
                return z_prev;
            }
            return z_prev + (iso - t_prev) / (ti - t_prev) * (z - z_prev);
        }
        z_prev = z;
        t_prev = ti;
    }
    mesh.depth()
}

pub struct StefanRun {
    pub problem: StefanProblem,
    /// `(time, simulated front, analytical front)` at the end of every day.
    pub daily: Vec<(f64, f64, f64)>,
}

impl StefanRun {
    pub fn relative_error_at_day(&self, day: usize) -> f64 {
        let (_, sim, exact) = self.daily[day - 1];
        (sim - exact).abs() / exact
    }

    pub fn daily_rms_relative_error(&self) -> f64 {
        let sum: f64 = self.daily.iter().map(|(_, s, e)| ((s - e) / e).powi(2)).sum();
        (sum / self.daily.len() as f64).sqrt()
    }
}

/// Freezes a 2 m column initially at 0 °C from a surface held at the
/// temperature giving Stefan number 0.2, for `days` days.
pub fn run_stefan(n_cells: usize, days: usize, dt: f64) -> StefanRun {
    let depth = 2.0;
    let layer = stefan_layer(depth);
    let ts = stefan_surface_temperature(&layer, 0.2);
    let problem = StefanProblem::from_layer(&layer, layer.theta_s, ts).unwrap();
    let mesh = build_mesh(depth, n_cells, 1.0).unwrap();
    let cells = sample_profile(&SoilProfile::uniform(layer, depth).unwrap(), &mesh).unwrap();
    let mut state = ColumnState::from_head_and_temperature(&cells, vec![0.0; n_cells], vec![0.0; n_cells]).unwrap();
    let boundary = HeatBoundary { top_temperature: ts, bottom: BottomHeat::Flux(0.0) };
    let settings = HeatSettings::default();
    // half-frozen contour of the freezing curve
    let iso = layer.freeze_w * 0.5f64.ln();
    let steps_per_day = (DAY / dt).round() as usize;
    let mut daily = Vec::with_capacity(days);
    for day in 1..=days {
        for _ in 0..steps_per_day {
            let water = WaterTransport::at_rest(&state);
            state = heat_step(&state, &mesh, &cells, &boundary, &water, dt, &settings).unwrap().0;
        }
        let t = day as f64 * DAY;
        daily.push((t, isotherm_depth(&state.temperature, &mesh, ts, iso), problem.front(t)));
    }
    StefanRun { problem, daily }
}

/// Relative L2 error over `z <= 1 m` of an unfrozen column warmed from 0 °C
/// by a 5 °C surface, after each of `check_days`.
pub fn run_conduction(dz: f64, dt: f64, check_days: &[f64]) -> Vec<f64> {
    let depth = 4.0;
    let n = (depth / dz).round() as usize;
    let layer = SoilLayer::with_defaults(0.0, depth);
    let mesh = build_mesh(depth, n, 1.0).unwrap();
    let cells = sample_profile(&SoilProfile::uniform(layer, depth).unwrap(), &mesh).unwrap();
    let mut state = ColumnState::from_head_and_temperature(&cells, vec![0.0; n], vec![0.0; n]).unwrap();
    let kappa = thermal_conductivity(layer.theta_s, 0.0, &layer) / volumetric_heat_capacity(layer.theta_s, 0.0, &layer);
    let ts = 5.0;
    let boundary = HeatBoundary { top_temperature: ts, bottom: BottomHeat::Flux(0.0) };
    let settings = HeatSettings::default();
    let mut time = 0.0;
    let mut errors = Vec::new();
    for &day in check_days {
        let end = day * DAY;
        while time < end - 1e-9 {
            let step = dt.min(end - time);
            let water = WaterTransport::at_rest(&state);
            state = heat_step(&state, &mesh, &cells, &boundary, &water, step, &settings).unwrap().0;
            time += step;
        }
        let (mut num, mut den) = (0.0, 0.0);
        for (&z, &t) in mesh.z_center().iter().zip(&state.temperature) {
            if z <= 1.0 {
                let exact = erfc_profile(ts, kappa, z, time);
                num += (t - exact).powi(2);
                den += exact * exact;
            }
        }
        errors.push((num / den).sqrt());
    }
    errors
}

/// Coarse, short scenario for end-to-end tests: a 2 m column of 20 cells
/// with no spin-up, so one run integrates a single year.
pub fn quick_scenario(name: &str) -> cryoflow::ScenarioConfig {
    let mut s = cryoflow::ScenarioConfig::with_defaults(name);
    s.mesh.depth = 2.0;
    s.mesh.n_cells = 20;
    s.profile = SoilProfile::uniform(SoilLayer::with_defaults(0.0, 2.0), 2.0).unwrap();
    s.spinup.max_years = 0;
    s
}
