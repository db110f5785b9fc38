//! Mixed-form Richards equation on a column, one implicit time step.
//!
//! Cell-centered finite volumes, depth positive downward, Darcy flux
//! `q = -K (∂h/∂z - 1)` positive downward. Nonlinearity is handled by a
//! modified Picard iteration: conductivity lagged one iterate, storage
//! updated from the retention curve. Ice content is held fixed.

use crate::constitutive::{cell_conductivity, retention_with_capacity};
use crate::error::{Error, Result};
use crate::mesh::{ColumnMesh, ColumnState, SoilLayer};
use crate::real::{max_abs, Real};
use crate::tridiag::Tridiagonal;

/// Surface condition for water.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TopFlow<R> {
    /// Prescribed flux (m/s, positive = infiltration). Switches to a head
    /// condition at `h_pond_max` when the soil cannot take the flux.
    Flux { flux: R, h_pond_max: R },
    /// Prescribed surface pressure head, m.
    Head(R),
}

/// Bottom condition for water.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BottomFlow<R> {
    /// Unit hydraulic gradient: outflow equals the bottom cell conductivity.
    FreeDrainage,
    /// Prescribed pressure head at the bottom face, m.
    Head(R),
    /// Prescribed outflow, m/s (positive = leaving downward; 0 = impermeable).
    Flux(R),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowBoundary<R> {
    pub top: TopFlow<R>,
    pub bottom: BottomFlow<R>,
}

impl<R: Real> FlowBoundary<R> {
    /// Impermeable top and bottom.
    pub fn no_flux() -> Self {
        Self { top: TopFlow::Flux { flux: R::zero(), h_pond_max: R::zero() }, bottom: BottomFlow::Flux(R::zero()) }
    }
}

/// Head change beyond which the chord capacity is considered, m.
const CHORD_SPAN: f64 = 1e-3;

/// Weight of the conductance-scaled iteration regularizer.
const RELAXATION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowSettings<R> {
    /// Convergence threshold on the max-norm of the Picard head increment, m.
    pub tol_h: R,
    /// Convergence threshold on the step mass-balance residual, m of water.
    pub tol_mb: R,
    pub max_picard: usize,
    /// Extra capacity in the iteration matrix only, halved every iterate;
    /// damps the first iterates near the ice-locked floor, 1/m.
    pub min_capacity: R,
}

impl<R: Real> Default for FlowSettings<R> {
    fn default() -> Self {
        Self { tol_h: R::lit(1e-7), tol_mb: R::lit(1e-10), max_picard: 50, min_capacity: R::lit(1e-6) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowStepReport<R> {
    pub iterations: usize,
    /// Residual of the step water balance, m.
    pub mass_balance_error: R,
    /// Water actually entering through the surface, m/s.
    pub surface_flux_actual: R,
    /// Water leaving through the bottom, m/s.
    pub bottom_flux: R,
    pub converged: bool,
    /// True when the surface ended the step under the ponding head condition.
    pub ponded: bool,
    /// Downward Darcy flux at every face (`n + 1` values), m/s.
    pub face_flux: Vec<R>,
    /// Sink actually applied during the final iterate, 1/s.
    pub sink: Vec<R>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum SurfaceMode<R> {
    Flux(R),
    Head(R),
}

/// Advances the water state by `dt` with a fixed sink field (1/s per cell).
pub fn flow_step<R: Real>(
    state: &ColumnState<R>,
    mesh: &ColumnMesh<R>,
    cells: &[SoilLayer<R>],
    boundary: &FlowBoundary<R>,
    sink: &[R],
    dt: R,
    settings: &FlowSettings<R>,
) -> Result<(ColumnState<R>, FlowStepReport<R>)> {
    if sink.len() != mesh.n_cells() {
        return Err(Error::InvalidArgument("sink must have one value per cell".into()));
    }
    if let Some(i) = sink.iter().position(|s| !(*s >= R::zero())) {
        return Err(Error::InvalidArgument(format!("sink must be non-negative (cell {i})")));
    }
    let mut fixed = |_: &[R], out: &mut [R]| out.copy_from_slice(sink);
    flow_step_with(state, mesh, cells, boundary, &mut fixed, dt, settings)
}

/// Like [`flow_step`], with the sink re-evaluated from each Picard head
/// iterate by `sink_at(h, out)`.
pub fn flow_step_with<R: Real>(
    state: &ColumnState<R>,
    mesh: &ColumnMesh<R>,
    cells: &[SoilLayer<R>],
    boundary: &FlowBoundary<R>,
    sink_at: &mut dyn FnMut(&[R], &mut [R]),
    dt: R,
    settings: &FlowSettings<R>,
) -> Result<(ColumnState<R>, FlowStepReport<R>)> {
    let n = mesh.n_cells();
    if !(dt > R::zero()) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if cells.len() != n || state.n_cells() != n {
        return Err(Error::InvalidArgument("state, cells and mesh sizes differ".into()));
    }
    if let Some(cell) = state.first_non_finite() {
        return Err(Error::NonFinite { solver: "flow", cell });
    }

    let solver = PicardFlow::new(state, mesh, cells, boundary.bottom, dt, settings);
    match boundary.top {
        TopFlow::Head(h_s) => solver.solve(SurfaceMode::Head(h_s), sink_at),
        TopFlow::Flux { flux, h_pond_max } => {
            let free = match solver.solve(SurfaceMode::Flux(flux), sink_at) {
                Ok(free) => free,
                // a flux the soil cannot take may stall the iteration; the
                // ponded condition is the physical answer in that case
                Err(Error::NotConverged { solver: name, iterations }) => {
                    let stalled = || Error::NotConverged { solver: name, iterations };
                    let ponded = solver.solve(SurfaceMode::Head(h_pond_max), sink_at).map_err(|_| stalled())?;
                    return if ponded.1.surface_flux_actual <= flux { Ok(ponded) } else { Err(stalled()) };
                }
                Err(err) => return Err(err),
            };
            // the surface head exceeds h_pond_max exactly when the flux is
            // larger than what a ponded surface would deliver
            if flux <= solver.ponded_capacity(&free.0, h_pond_max) {
                return Ok(free);
            }
            let ponded = solver.solve(SurfaceMode::Head(h_pond_max), sink_at)?;
            if ponded.1.surface_flux_actual > flux {
                // switching back would oscillate; near the threshold both agree
                Ok(free)
            } else {
                Ok(ponded)
            }
        }
    }
}

struct PicardFlow<'a, R> {
    state: &'a ColumnState<R>,
    mesh: &'a ColumnMesh<R>,
    cells: &'a [SoilLayer<R>],
    bottom: BottomFlow<R>,
    dt: R,
    settings: &'a FlowSettings<R>,
}

impl<'a, R: Real> PicardFlow<'a, R> {
    fn new(
        state: &'a ColumnState<R>,
        mesh: &'a ColumnMesh<R>,
        cells: &'a [SoilLayer<R>],
        bottom: BottomFlow<R>,
        dt: R,
        settings: &'a FlowSettings<R>,
    ) -> Self {
        Self { state, mesh, cells, bottom, dt, settings }
    }

    /// Liquid content and its head derivative with the cell's ice held fixed.
    fn liquid(&self, i: usize, h: R) -> (R, R) {
        let layer = &self.cells[i];
        let (total, capacity) = retention_with_capacity(h, layer);
        let liq = total - self.state.theta_ice[i];
        if liq > layer.theta_r {
            (liq, capacity)
        } else {
            (layer.theta_r, R::zero())
        }
    }

    /// One-sided difference of the cell conductivity in head; zero where the
    /// liquid content does not respond.
    fn conductivity_slope(&self, i: usize, h: R) -> R {
        let delta = (h.abs() * R::lit(1e-6)).max(R::lit(1e-8));
        let k = |h: R| cell_conductivity(self.liquid(i, h).0, self.state.theta_ice[i], &self.cells[i]);
        ((k(h) - k(h - delta)) / delta).max(R::zero())
    }

    /// Conductivity of the surface face under a head `h_s`: geometric mean of
    /// the top cell and the top soil at `h_s` with the cell's ice.
    fn surface_conductivity(&self, k0: R, h_s: R) -> R {
        let layer = &self.cells[0];
        let ice = self.state.theta_ice[0];
        let liq = (retention_with_capacity(h_s, layer).0 - ice).max(layer.theta_r);
        interface_conductivity(cell_conductivity(liq, ice, layer), k0)
    }

    /// Infiltration a surface held at `h_s` would admit into `state`, m/s.
    fn ponded_capacity(&self, state: &ColumnState<R>, h_s: R) -> R {
        let k0 = cell_conductivity(state.theta_liq[0], state.theta_ice[0], &self.cells[0]);
        let kf = self.surface_conductivity(k0, h_s);
        -kf * ((state.h[0] - h_s) / (self.mesh.dz()[0] * R::lit(0.5)) - R::one())
    }

    /// Downward fluxes at all faces for heads `h` and cell conductivities `k`.
    fn face_fluxes(&self, h: &[R], k: &[R], mode: SurfaceMode<R>, out: &mut [R]) {
        let n = h.len();
        let half = R::lit(0.5);
        out[0] = match mode {
            SurfaceMode::Flux(q) => q,
            SurfaceMode::Head(h_s) => {
                -self.surface_conductivity(k[0], h_s) * ((h[0] - h_s) / (self.mesh.dz()[0] * half) - R::one())
            }
        };
        for i in 0..n - 1 {
            let kf = interface_conductivity(k[i], k[i + 1]);
            out[i + 1] = -kf * ((h[i + 1] - h[i]) / self.mesh.center_spacing(i) - R::one());
        }
        out[n] = match self.bottom {
            BottomFlow::FreeDrainage => k[n - 1],
            BottomFlow::Head(h_b) => -k[n - 1] * ((h_b - h[n - 1]) / (self.mesh.dz()[n - 1] * half) - R::one()),
            BottomFlow::Flux(q) => q,
        };
    }

    fn solve(
        &self,
        mode: SurfaceMode<R>,
        sink_at: &mut dyn FnMut(&[R], &mut [R]),
    ) -> Result<(ColumnState<R>, FlowStepReport<R>)> {
        let n = self.mesh.n_cells();
        let dz = self.mesh.dz();
        let dt = self.dt;
        let half = R::lit(0.5);
        let theta_old = &self.state.theta_liq;

        let mut h = self.state.h.clone();
        let mut h_next = vec![R::zero(); n];
        let mut theta = vec![R::zero(); n];
        let mut capacity = vec![R::zero(); n];
        let mut k = vec![R::zero(); n];
        let mut sink = vec![R::zero(); n];
        let mut flux = vec![R::zero(); n + 1];
        let mut system = Tridiagonal::zeros(n);

        let mut damping = self.settings.min_capacity;
        for iteration in 1..=self.settings.max_picard {
            for i in 0..n {
                let (liq, c) = self.liquid(i, h[i]);
                theta[i] = liq;
                // across the saturation kink the tangent vanishes and the
                // iterates cycle; the chord back to the old state does not
                let span = h[i] - self.state.h[i];
                capacity[i] = if span.abs() > R::lit(CHORD_SPAN) { c.max((liq - theta_old[i]) / span) } else { c };
                k[i] = cell_conductivity(liq, self.state.theta_ice[i], &self.cells[i]);
            }
            sink_at(&h, &mut sink);

            system.clear();
            for i in 0..n {
                let storage = dz[i] * (capacity[i] + damping) / dt;
                system.diag[i] = storage;
                system.rhs[i] = storage * h[i] - dz[i] * (theta[i] - theta_old[i]) / dt - sink[i] * dz[i];
            }
            for i in 0..n - 1 {
                let kf = interface_conductivity(k[i], k[i + 1]);
                let g = kf / self.mesh.center_spacing(i);
                // relative pseudo-storage on h^(k+1) - h^k: regular matrix for
                // saturated cells, contraction ~RELAXATION per iterate
                let r = g * R::lit(RELAXATION);
                system.diag[i] = system.diag[i] + g + r;
                system.rhs[i] = system.rhs[i] + r * h[i];
                system.upper[i] = -g;
                system.diag[i + 1] = system.diag[i + 1] + g + r;
                system.rhs[i + 1] = system.rhs[i + 1] + r * h[i + 1];
                system.lower[i + 1] = -g;
                // gravity part of the face flux leaves cell i and enters i + 1
                system.rhs[i] = system.rhs[i] - kf;
                system.rhs[i + 1] = system.rhs[i + 1] + kf;
            }
            match mode {
                SurfaceMode::Flux(q) => system.rhs[0] = system.rhs[0] + q,
                SurfaceMode::Head(h_s) => {
                    let kf = self.surface_conductivity(k[0], h_s);
                    let g = kf / (dz[0] * half);
                    system.diag[0] = system.diag[0] + g;
                    system.rhs[0] = system.rhs[0] + g * h_s + kf;
                }
            }
            let last = n - 1;
            match self.bottom {
                BottomFlow::FreeDrainage => {
                    // outflow linearized in the bottom head; a lagged K cycles
                    // near saturation at long steps
                    let slope = self.conductivity_slope(last, h[last]);
                    system.diag[last] = system.diag[last] + slope;
                    system.rhs[last] = system.rhs[last] - k[last] + slope * h[last];
                }
                BottomFlow::Flux(q) => system.rhs[last] = system.rhs[last] - q,
                BottomFlow::Head(h_b) => {
                    let g = k[last] / (dz[last] * half);
                    system.diag[last] = system.diag[last] + g;
                    system.rhs[last] = system.rhs[last] + g * h_b - k[last];
                }
            }
            damping = damping * R::lit(0.5);
            system.solve_into(&mut h_next);
            if let Some(cell) = h_next.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { solver: "flow", cell });
            }

            let increment = max_abs(h.iter().zip(&h_next).map(|(a, b)| *b - *a));
            self.face_fluxes(&h_next, &k, mode, &mut flux);
            let mut storage_change = R::zero();
            let mut extracted = R::zero();
            for i in 0..n {
                theta[i] = self.liquid(i, h_next[i]).0;
                storage_change = storage_change + (theta[i] - theta_old[i]) * dz[i];
                extracted = extracted + sink[i] * dz[i];
            }
            let mass_balance_error = (storage_change - (flux[0] - flux[n] - extracted) * dt).abs();
            std::mem::swap(&mut h, &mut h_next);

            if increment < self.settings.tol_h && mass_balance_error < self.settings.tol_mb {
                let mut next = self.state.clone();
                next.h = h;
                next.theta_liq = theta;
                let report = FlowStepReport {
                    iterations: iteration,
                    mass_balance_error,
                    surface_flux_actual: flux[0],
                    bottom_flux: flux[n],
                    converged: true,
                    ponded: matches!(mode, SurfaceMode::Head(_)),
                    face_flux: flux,
                    sink,
                };
                return Ok((next, report));
            }
        }
        Err(Error::NotConverged { solver: "flow", iterations: self.settings.max_picard })
    }
}

/// Face conductivity between two cells: geometric mean.
pub fn interface_conductivity<R: Real>(k_upper: R, k_lower: R) -> R {
    (k_upper * k_lower).sqrt()
}

/// Absolute error of the step water budget, m.
pub fn water_mass_balance<R: Real>(
    before: &ColumnState<R>,
    after: &ColumnState<R>,
    report: &FlowStepReport<R>,
    sink: &[R],
    dt: R,
    mesh: &ColumnMesh<R>,
) -> R {
    let dz = mesh.dz();
    let mut storage = R::zero();
    let mut extracted = R::zero();
    for i in 0..mesh.n_cells() {
        storage = storage + (after.theta_total(i) - before.theta_total(i)) * dz[i];
        extracted = extracted + sink[i] * dz[i];
    }
    (storage - (report.surface_flux_actual - report.bottom_flux - extracted) * dt).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, sample_profile, SoilProfile};

    fn setup(n: usize) -> (ColumnMesh<f64>, Vec<SoilLayer<f64>>) {
        let mesh = build_mesh(1.0, n, 1.0).unwrap();
        let profile = SoilProfile::uniform(SoilLayer::with_defaults(0.0, 1.0), 1.0).unwrap();
        let cells = sample_profile(&profile, &mesh).unwrap();
        (mesh, cells)
    }

    #[test]
    fn interface_conductivity_examples() {
        assert_eq!(interface_conductivity(1e-5, 1e-5), 1e-5);
        assert!((interface_conductivity(1e-4f64, 1e-6) - 1e-5).abs() < 1e-20);
        let k = 3e-6f64;
        let r = 0.37f64;
        assert!((interface_conductivity(k, k * r) - k * r.sqrt()).abs() < 1e-20);
    }

    #[test]
    fn rejects_bad_inputs() {
        let (mesh, cells) = setup(4);
        let state = ColumnState::from_head_and_temperature(&cells, vec![-1.0; 4], vec![5.0; 4]).unwrap();
        let b = FlowBoundary::no_flux();
        let s = FlowSettings::default();
        assert!(matches!(flow_step(&state, &mesh, &cells, &b, &[0.0; 4], 0.0, &s), Err(Error::InvalidArgument(_))));
        assert!(matches!(
            flow_step(&state, &mesh, &cells, &b, &[0.0, -1e-9, 0.0, 0.0], 10.0, &s),
            Err(Error::InvalidArgument(_))
        ));
        let mut broken = state.clone();
        broken.h[2] = f64::NAN;
        assert!(matches!(
            flow_step(&broken, &mesh, &cells, &b, &[0.0; 4], 10.0, &s),
            Err(Error::NonFinite { cell: 2, .. })
        ));
    }

    #[test]
    fn identical_states_have_zero_balance_error() {
        let (mesh, cells) = setup(4);
        let state = ColumnState::from_head_and_temperature(&cells, vec![-1.0; 4], vec![5.0; 4]).unwrap();
        let report = FlowStepReport {
            iterations: 1,
            mass_balance_error: 0.0,
            surface_flux_actual: 0.0,
            bottom_flux: 0.0,
            converged: true,
            ponded: false,
            face_flux: vec![0.0; 5],
            sink: vec![0.0; 4],
        };
        assert_eq!(water_mass_balance(&state, &state, &report, &[0.0; 4], 100.0, &mesh), 0.0);
        // storage gain exactly matching net inflow
        let mut after = state.clone();
        after.theta_liq[0] += 0.01;
        let inflow = FlowStepReport { surface_flux_actual: 0.25 * 0.01 / 100.0, ..report };
        assert!(water_mass_balance(&state, &after, &inflow, &[0.0; 4], 100.0, &mesh) < 1e-15);
    }

    #[test]
    fn no_flux_column_conserves_water() {
        let (mesh, cells) = setup(20);
        let h: Vec<f64> = (0..20).map(|i| -3.0 + 0.2 * (i as f64 * 0.7).sin()).collect();
        let mut state = ColumnState::from_head_and_temperature(&cells, h, vec![5.0; 20]).unwrap();
        let b = FlowBoundary::no_flux();
        for _ in 0..20 {
            let (next, report) =
                flow_step(&state, &mesh, &cells, &b, &[0.0; 20], 3600.0, &FlowSettings::default()).unwrap();
            assert!(report.converged);
            let total = next.water_storage(&mesh);
            // any drift is the reported residual, bounded by the tolerance
            let drift = total - state.water_storage(&mesh);
            assert!((drift.abs() - report.mass_balance_error).abs() < 1e-15);
            assert!(drift.abs() < FlowSettings::<f64>::default().tol_mb);
            state = next;
        }
    }

    #[test]
    fn face_fluxes_share_boundary_values() {
        let (mesh, cells) = setup(10);
        let state = ColumnState::from_head_and_temperature(&cells, vec![-2.0; 10], vec![5.0; 10]).unwrap();
        let b = FlowBoundary { top: TopFlow::Flux { flux: 1e-7, h_pond_max: 0.0 }, bottom: BottomFlow::FreeDrainage };
        let (_, report) = flow_step(&state, &mesh, &cells, &b, &[0.0; 10], 600.0, &FlowSettings::default()).unwrap();
        assert_eq!(report.face_flux.len(), 11);
        assert_eq!(report.face_flux[0], report.surface_flux_actual);
        assert_eq!(report.face_flux[10], report.bottom_flux);
    }
}
