//! Heat conduction and advection with freeze/thaw, one implicit time step.
//!
//! The energy equation is solved in conservative enthalpy form, with the
//! iteration matrix built from the apparent heat capacity. Between Picard
//! iterates that moved more than a tenth of the freezing-curve width the
//! capacity is replaced by the chord `ΔE/ΔT`, so latent heat released across a
//! large temperature jump is not undercounted. Advection by the Darcy flux is
//! first-order upwind.

use crate::constitutive::{
    apparent_heat_capacity, enthalpy, freezing_partition, thermal_conductivity, C_WATER, RHO_WATER,
};
use crate::error::{Error, Result};
use crate::mesh::{ColumnMesh, ColumnState, SoilLayer};
use crate::real::{max_abs, Real};
use crate::tridiag::Tridiagonal;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BottomHeat<R> {
    /// Heat flux entering the column from below, W/m².
    Flux(R),
    /// Prescribed temperature at the bottom face, °C.
    Temperature(R),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatBoundary<R> {
    /// Ground surface temperature, °C.
    pub top_temperature: R,
    pub bottom: BottomHeat<R>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatSettings<R> {
    /// Convergence threshold on the max-norm of the Picard temperature increment, K.
    pub tol_t: R,
    /// Convergence threshold on the step energy residual, J/m².
    pub tol_energy: R,
    pub max_picard: usize,
}

impl<R: Real> Default for HeatSettings<R> {
    fn default() -> Self {
        Self { tol_t: R::lit(1e-4), tol_energy: R::lit(1e-2), max_picard: 50 }
    }
}

/// Water movement during the step, taken from the preceding flow step.
#[derive(Debug, Clone, PartialEq)]
pub struct WaterTransport<R> {
    /// Downward Darcy flux at each face (`n + 1` values), m/s.
    pub face_flux: Vec<R>,
    /// Root/evaporation sink per cell, 1/s. Extracted water leaves at the cell temperature.
    pub sink: Vec<R>,
    /// Total water content of each cell at the start of the step.
    pub theta_total_before: Vec<R>,
}

impl<R: Real> WaterTransport<R> {
    /// No water movement; storage taken from `state`.
    pub fn at_rest(state: &ColumnState<R>) -> Self {
        let n = state.n_cells();
        Self {
            face_flux: vec![R::zero(); n + 1],
            sink: vec![R::zero(); n],
            theta_total_before: (0..n).map(|i| state.theta_total(i)).collect(),
        }
    }
}

/// Energy exchanged with the surroundings during a step, W/m².
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundaryHeat<R> {
    /// Conductive plus advective flux entering at the surface.
    pub into_top: R,
    /// Conductive plus advective flux leaving at the bottom.
    pub out_bottom: R,
    /// Sensible heat carried away by the sink.
    pub sink_loss: R,
}

impl<R: Real> BoundaryHeat<R> {
    pub fn net_in(&self) -> R {
        self.into_top - self.out_bottom - self.sink_loss
    }

    pub fn gross(&self) -> R {
        self.into_top.abs() + self.out_bottom.abs() + self.sink_loss.abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatStepReport<R> {
    pub iterations: usize,
    /// Residual of the step energy budget, J/m².
    pub energy_balance_error: R,
    pub converged: bool,
    pub fluxes: BoundaryHeat<R>,
}

/// Advances temperature and the phase partition by `dt`.
pub fn heat_step<R: Real>(
    state: &ColumnState<R>,
    mesh: &ColumnMesh<R>,
    cells: &[SoilLayer<R>],
    boundary: &HeatBoundary<R>,
    water: &WaterTransport<R>,
    dt: R,
    settings: &HeatSettings<R>,
) -> Result<(ColumnState<R>, HeatStepReport<R>)> {
    let n = mesh.n_cells();
    if !(dt > R::zero()) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if cells.len() != n || state.n_cells() != n {
        return Err(Error::InvalidArgument("state, cells and mesh sizes differ".into()));
    }
    if water.face_flux.len() != n + 1 || water.sink.len() != n || water.theta_total_before.len() != n {
        return Err(Error::InvalidArgument("water transport arrays do not match the mesh".into()));
    }
    if let Some(cell) = state.first_non_finite() {
        return Err(Error::NonFinite { solver: "heat", cell });
    }

    let dz = mesh.dz();
    let half = R::lit(0.5);
    let rho_c = R::lit(RHO_WATER * C_WATER);
    let t_surface = boundary.top_temperature;
    let theta_total: Vec<R> = (0..n).map(|i| state.theta_total(i)).collect();
    let energy_old: Vec<R> =
        (0..n).map(|i| enthalpy(state.temperature[i], water.theta_total_before[i], &cells[i])).collect();

    let mut t = state.temperature.clone();
    let mut t_next = vec![R::zero(); n];
    let mut previous: Option<Vec<R>> = None;
    let mut energy = vec![R::zero(); n];
    let mut capacity = vec![R::zero(); n];
    let mut conductivity = vec![R::zero(); n];
    let mut system = Tridiagonal::zeros(n);

    for iteration in 1..=settings.max_picard {
        for i in 0..n {
            let layer = &cells[i];
            energy[i] = enthalpy(t[i], theta_total[i], layer);
            let tangent = apparent_heat_capacity(t[i], theta_total[i], layer);
            capacity[i] = match &previous {
                Some(prev) if (t[i] - prev[i]).abs() > layer.freeze_w * R::lit(0.1) => {
                    let chord = (energy[i] - enthalpy(prev[i], theta_total[i], layer)) / (t[i] - prev[i]);
                    chord.max(tangent)
                }
                _ => tangent,
            };
            let p = freezing_partition(t[i], theta_total[i], layer);
            conductivity[i] = thermal_conductivity(p.theta_liq, p.theta_ice, layer);
        }

        system.clear();
        for i in 0..n {
            let storage = dz[i] * capacity[i] / dt;
            system.diag[i] = storage + rho_c * water.sink[i] * dz[i];
            system.rhs[i] = storage * t[i] - dz[i] * (energy[i] - energy_old[i]) / dt;
        }
        for i in 0..n - 1 {
            let g = face_conductance(mesh, &conductivity, i);
            let a = rho_c * water.face_flux[i + 1];
            system.diag[i] = system.diag[i] + g;
            system.upper[i] = -g;
            system.diag[i + 1] = system.diag[i + 1] + g;
            system.lower[i + 1] = -g;
            if a > R::zero() {
                system.diag[i] = system.diag[i] + a;
                system.lower[i + 1] = system.lower[i + 1] - a;
            } else {
                system.upper[i] = system.upper[i] + a;
                system.diag[i + 1] = system.diag[i + 1] - a;
            }
        }
        let g_top = conductivity[0] / (dz[0] * half);
        let a_top = rho_c * water.face_flux[0];
        system.diag[0] = system.diag[0] + g_top;
        system.rhs[0] = system.rhs[0] + g_top * t_surface;
        if a_top > R::zero() {
            system.rhs[0] = system.rhs[0] + a_top * t_surface;
        } else {
            system.diag[0] = system.diag[0] - a_top;
        }
        let last = n - 1;
        let a_bot = rho_c * water.face_flux[n];
        match boundary.bottom {
            BottomHeat::Flux(g_in) => {
                system.diag[last] = system.diag[last] + a_bot;
                system.rhs[last] = system.rhs[last] + g_in;
            }
            BottomHeat::Temperature(t_b) => {
                let g = conductivity[last] / (dz[last] * half);
                system.diag[last] = system.diag[last] + g;
                system.rhs[last] = system.rhs[last] + g * t_b;
                if a_bot > R::zero() {
                    system.diag[last] = system.diag[last] + a_bot;
                } else {
                    system.rhs[last] = system.rhs[last] - a_bot * t_b;
                }
            }
        }
        system.solve_into(&mut t_next);
        if let Some(cell) = t_next.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { solver: "heat", cell });
        }
        // Enthalpy has a kink at 0 °C and is convex below it. An iterate that
        // jumps from thawed to frozen restarts just below the kink, where the
        // tangent is steepest, so the following iterations approach monotonically.
        for i in 0..n {
            if t[i] >= R::zero() && t_next[i] < R::zero() {
                t_next[i] = t_next[i].max(-cells[i].freeze_w * R::lit(1e-6));
            }
        }

        let increment = max_abs(t.iter().zip(&t_next).map(|(a, b)| *b - *a));
        let fluxes = boundary_fluxes(mesh, &conductivity, boundary, water, &t_next);
        let mut stored = R::zero();
        for i in 0..n {
            stored = stored + (enthalpy(t_next[i], theta_total[i], &cells[i]) - energy_old[i]) * dz[i];
        }
        let energy_balance_error = (stored - fluxes.net_in() * dt).abs();
        previous = Some(std::mem::replace(&mut t, t_next.clone()));

        if increment < settings.tol_t && energy_balance_error < settings.tol_energy {
            let mut next = state.clone();
            for i in 0..n {
                let p = freezing_partition(t[i], theta_total[i], &cells[i]);
                next.theta_liq[i] = p.theta_liq;
                next.theta_ice[i] = p.theta_ice;
            }
            next.temperature = t;
            let report = HeatStepReport { iterations: iteration, energy_balance_error, converged: true, fluxes };
            return Ok((next, report));
        }
    }
    Err(Error::NotConverged { solver: "heat", iterations: settings.max_picard })
}

/// `k_face / Δz` between cells `i` and `i + 1`, with a series (harmonic) face conductivity.
fn face_conductance<R: Real>(mesh: &ColumnMesh<R>, k: &[R], i: usize) -> R {
    let half = R::lit(0.5);
    let dz = mesh.dz();
    R::one() / (dz[i] * half / k[i] + dz[i + 1] * half / k[i + 1])
}

fn boundary_fluxes<R: Real>(
    mesh: &ColumnMesh<R>,
    conductivity: &[R],
    boundary: &HeatBoundary<R>,
    water: &WaterTransport<R>,
    t: &[R],
) -> BoundaryHeat<R> {
    let n = t.len();
    let dz = mesh.dz();
    let half = R::lit(0.5);
    let rho_c = R::lit(RHO_WATER * C_WATER);
    let t_s = boundary.top_temperature;
    let q_top = water.face_flux[0];
    let conduction_top = -conductivity[0] * (t[0] - t_s) / (dz[0] * half);
    let upwind_top = if q_top > R::zero() { t_s } else { t[0] };
    let into_top = conduction_top + rho_c * q_top * upwind_top;

    let q_bot = water.face_flux[n];
    let out_bottom = match boundary.bottom {
        BottomHeat::Flux(g_in) => -g_in + rho_c * q_bot * t[n - 1],
        BottomHeat::Temperature(t_b) => {
            let conduction = -conductivity[n - 1] * (t_b - t[n - 1]) / (dz[n - 1] * half);
            let upwind = if q_bot > R::zero() { t[n - 1] } else { t_b };
            conduction + rho_c * q_bot * upwind
        }
    };
    let sink_loss = (0..n).fold(R::zero(), |acc, i| acc + rho_c * water.sink[i] * t[i] * dz[i]);
    BoundaryHeat { into_top, out_bottom, sink_loss }
}

/// Total enthalpy of a column state, J/m².
pub fn column_enthalpy<R: Real>(state: &ColumnState<R>, mesh: &ColumnMesh<R>, cells: &[SoilLayer<R>]) -> R {
    (0..mesh.n_cells())
        .fold(R::zero(), |acc, i| acc + enthalpy(state.temperature[i], state.theta_total(i), &cells[i]) * mesh.dz()[i])
}

/// Absolute error of the step energy budget, J/m².
///
/// Stored energy is sensible heat plus `-L_f ρ_w θ_ice` relative to the fully
/// liquid medium at 0 °C.
pub fn energy_balance<R: Real>(
    before: &ColumnState<R>,
    after: &ColumnState<R>,
    fluxes: &BoundaryHeat<R>,
    dt: R,
    mesh: &ColumnMesh<R>,
    cells: &[SoilLayer<R>],
) -> R {
    let stored = column_enthalpy(after, mesh, cells) - column_enthalpy(before, mesh, cells);
    (stored - fluxes.net_in() * dt).abs()
}
