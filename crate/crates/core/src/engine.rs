//! Operator-split coupling of ET, flow and heat, adaptive time stepping, and
//! annual diagnostics.
//!
//! Each step builds the ET sink, advances water with it, then advances heat
//! with the resulting Darcy fluxes; the heat step re-partitions ice. A failed
//! sub-solve discards the attempt and retries from the untouched start state
//! with a smaller step.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::et::{partition_pet, root_fractions, sink_from_roots, split_applied_sink, EtReport, VegetationParams};
use crate::flow::{flow_step_with, FlowBoundary, FlowSettings, FlowStepReport, TopFlow};
use crate::forcing::{Aspect, ClimateForcing, YEAR_SECONDS};
use crate::heat::{column_enthalpy, heat_step, HeatBoundary, HeatSettings, HeatStepReport, WaterTransport};
use crate::mesh::{sample_profile, ColumnMesh, ColumnState, SoilLayer};
use crate::real::Real;
use crate::scenario::{BoundarySpec, ScenarioConfig, TimeControl};

/// Largest surface temperature change allowed within one step, K.
pub const MAX_SURFACE_CHANGE: f64 = 1.0;

/// Mesh with per-cell soil parameters and root fractions.
#[derive(Debug, Clone)]
pub struct Column<R> {
    pub mesh: ColumnMesh<R>,
    pub cells: Vec<SoilLayer<R>>,
    pub roots: Vec<R>,
}

impl<R: Real> Column<R> {
    pub fn new(mesh: ColumnMesh<R>, cells: Vec<SoilLayer<R>>, veg: &VegetationParams<R>) -> Result<Self> {
        if cells.len() != mesh.n_cells() {
            return Err(Error::InvalidArgument("one soil layer per cell required".into()));
        }
        let roots = root_fractions(veg, &mesh)?;
        Ok(Self { mesh, cells, roots })
    }

    pub fn from_scenario(scenario: &ScenarioConfig<R>) -> Result<Self> {
        let mesh = scenario.mesh.build()?;
        let cells = sample_profile(&scenario.profile, &mesh)?;
        Self::new(mesh, cells, &scenario.veg)
    }

    pub fn initial_state(&self, scenario: &ScenarioConfig<R>) -> Result<ColumnState<R>> {
        let z = self.mesh.z_center();
        let h = z.iter().map(|&z| scenario.initial.head.at(z)).collect();
        let t = z.iter().map(|&z| scenario.initial.temperature.at(z)).collect();
        ColumnState::from_head_and_temperature(&self.cells, h, t)
    }
}

/// Everything a coupled step needs besides the state and the forcing.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a, R> {
    pub column: &'a Column<R>,
    pub veg: &'a VegetationParams<R>,
    pub stand_density: R,
    pub boundary: BoundarySpec<R>,
    pub flow: FlowSettings<R>,
    pub heat: HeatSettings<R>,
}

impl<'a, R: Real> StepContext<'a, R> {
    pub fn for_scenario(column: &'a Column<R>, scenario: &'a ScenarioConfig<R>) -> Self {
        Self {
            column,
            veg: &scenario.veg,
            stand_density: scenario.stand_density,
            boundary: scenario.boundary,
            flow: scenario.flow_settings,
            heat: scenario.heat_settings,
        }
    }
}

/// Forcing applied over one step: rates are step means, the surface
/// temperature is the end-of-step value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepForcing<R> {
    pub precip: R,
    pub pet: R,
    pub surface_temperature: R,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport<R> {
    pub dt: R,
    pub flow: FlowStepReport<R>,
    pub heat: HeatStepReport<R>,
    pub et: EtReport<R>,
    pub precip: R,
    /// Rejected infiltration (and any exfiltration), m/s.
    pub runoff: R,
    /// Failed attempts discarded before this step was accepted.
    pub rejected_attempts: usize,
}

/// The two sub-solvers, behind a seam so failures can be injected.
pub trait SubSolvers<R: Real> {
    #[allow(clippy::too_many_arguments)]
    fn flow(
        &mut self,
        state: &ColumnState<R>,
        mesh: &ColumnMesh<R>,
        cells: &[SoilLayer<R>],
        boundary: &FlowBoundary<R>,
        sink_at: &mut dyn FnMut(&[R], &mut [R]),
        dt: R,
        settings: &FlowSettings<R>,
    ) -> Result<(ColumnState<R>, FlowStepReport<R>)>;

    #[allow(clippy::too_many_arguments)]
    fn heat(
        &mut self,
        state: &ColumnState<R>,
        mesh: &ColumnMesh<R>,
        cells: &[SoilLayer<R>],
        boundary: &HeatBoundary<R>,
        water: &WaterTransport<R>,
        dt: R,
        settings: &HeatSettings<R>,
    ) -> Result<(ColumnState<R>, HeatStepReport<R>)>;
}

/// The production solvers.
#[derive(Debug, Clone, Copy, Default)]
pub struct Solvers;

impl<R: Real> SubSolvers<R> for Solvers {
    fn flow(
        &mut self,
        state: &ColumnState<R>,
        mesh: &ColumnMesh<R>,
        cells: &[SoilLayer<R>],
        boundary: &FlowBoundary<R>,
        sink_at: &mut dyn FnMut(&[R], &mut [R]),
        dt: R,
        settings: &FlowSettings<R>,
    ) -> Result<(ColumnState<R>, FlowStepReport<R>)> {
        flow_step_with(state, mesh, cells, boundary, sink_at, dt, settings)
    }

    fn heat(
        &mut self,
        state: &ColumnState<R>,
        mesh: &ColumnMesh<R>,
        cells: &[SoilLayer<R>],
        boundary: &HeatBoundary<R>,
        water: &WaterTransport<R>,
        dt: R,
        settings: &HeatSettings<R>,
    ) -> Result<(ColumnState<R>, HeatStepReport<R>)> {
        heat_step(state, mesh, cells, boundary, water, dt, settings)
    }
}

/// One attempt at a coupled step of length `dt`. `state` is never modified.
pub fn coupled_step<R: Real>(
    state: &ColumnState<R>,
    ctx: &StepContext<'_, R>,
    forcing: &StepForcing<R>,
    dt: R,
    solvers: &mut dyn SubSolvers<R>,
) -> Result<(ColumnState<R>, StepReport<R>)> {
    let column = ctx.column;
    let mesh = &column.mesh;
    let (tp, ep) = partition_pet(forcing.pet, ctx.stand_density, ctx.veg);

    // stress is re-evaluated at each head iterate; thermal status is the start-of-step one
    let mut sink_at = |h: &[R], out: &mut [R]| {
        sink_from_roots(tp, ep, h, &state.temperature, mesh, &column.roots, ctx.veg, out);
    };
    let flow_boundary = FlowBoundary {
        top: TopFlow::Flux { flux: forcing.precip, h_pond_max: ctx.boundary.h_pond_max },
        bottom: ctx.boundary.bottom_flow,
    };
    let (wet, flow) = solvers.flow(state, mesh, &column.cells, &flow_boundary, &mut sink_at, dt, &ctx.flow)?;
    let et = split_applied_sink(tp, ep, &column.roots, &flow.sink, mesh);

    let water = WaterTransport {
        face_flux: flow.face_flux.clone(),
        sink: flow.sink.clone(),
        theta_total_before: (0..mesh.n_cells()).map(|i| state.theta_total(i)).collect(),
    };
    let heat_boundary = HeatBoundary { top_temperature: forcing.surface_temperature, bottom: ctx.boundary.bottom_heat };
    let (mut next, heat) = solvers.heat(&wet, mesh, &column.cells, &heat_boundary, &water, dt, &ctx.heat)?;
    next.time = state.time + dt;

    let runoff = forcing.precip - flow.surface_flux_actual;
    let report = StepReport { dt, flow, heat, et, precip: forcing.precip, runoff, rejected_attempts: 0 };
    Ok((next, report))
}

/// Adaptive step-size controller state carried between steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stepper<R> {
    pub control: TimeControl<R>,
    /// Step length to try next, before clipping.
    pub dt_next: R,
}

impl<R: Real> Stepper<R> {
    pub fn new(control: TimeControl<R>) -> Self {
        Self { control, dt_next: control.dt_init }
    }

    /// Takes one accepted step from `state` towards `target` (never past it).
    ///
    /// The trial length is clipped to `target`, the next forcing breakpoint
    /// and the surface-temperature cap. On a retryable failure the length is
    /// multiplied by `shrink_factor` and the step is redone from `state`.
    #[allow(clippy::too_many_arguments)]
    pub fn advance(
        &mut self,
        state: &ColumnState<R>,
        ctx: &StepContext<'_, R>,
        forcing: &ClimateForcing<R>,
        aspect: Aspect,
        pet_multiplier: R,
        target: R,
        solvers: &mut dyn SubSolvers<R>,
    ) -> Result<(ColumnState<R>, StepReport<R>)> {
        let t = state.time;
        let natural = self.dt_next.min(self.control.dt_max);
        let limit = (target - t).min(forcing.next_breakpoint(t) - t);
        let clipped = natural >= limit;
        let mut dt = if clipped { limit } else { natural };
        let surface = |time: R| forcing.at(time).surface_temperature(aspect);
        let t_now = surface(t);
        while (surface(t + dt) - t_now).abs() > R::lit(MAX_SURFACE_CHANGE) && dt > self.control.dt_min {
            dt = (dt * R::lit(0.5)).max(self.control.dt_min);
        }

        let mut rejected = 0;
        loop {
            // land exactly on the clipping point
            let end = if dt == limit { t + limit } else { t + dt };
            let step_forcing = step_forcing(forcing, aspect, pet_multiplier, t, end);
            match coupled_step(state, ctx, &step_forcing, end - t, solvers) {
                Ok((mut next, mut report)) => {
                    if dt == limit {
                        next.time = if limit == target - t { target } else { forcing.next_breakpoint(t) };
                    }
                    report.rejected_attempts = rejected;
                    self.dt_next = if rejected == 0 && (clipped || dt < natural) {
                        natural
                    } else {
                        (dt * self.control.grow_factor).min(self.control.dt_max)
                    };
                    return Ok((next, report));
                }
                Err(err) if err.is_retryable() => {
                    rejected += 1;
                    dt = dt * self.control.shrink_factor;
                    if dt < self.control.dt_min {
                        return Err(Error::DtUnderflow {
                            time: t.as_f64(),
                            dt: dt.as_f64(),
                            dump: state_dump(state, &ctx.column.mesh, &err),
                        });
                    }
                }
                Err(err) => return Err(err),
            }
        }
    }
}

/// Mean precipitation and PET over `[t0, t1]` (forcing is linear in between)
/// and the surface temperature at `t1`.
pub fn step_forcing<R: Real>(
    forcing: &ClimateForcing<R>,
    aspect: Aspect,
    pet_multiplier: R,
    t0: R,
    t1: R,
) -> StepForcing<R> {
    let a = forcing.at(t0);
    let b = forcing.at(t1);
    let half = R::lit(0.5);
    StepForcing {
        precip: (a.precip + b.precip) * half,
        pet: (a.pet + b.pet) * half * pet_multiplier,
        surface_temperature: b.surface_temperature(aspect),
    }
}

fn state_dump<R: Real>(state: &ColumnState<R>, mesh: &ColumnMesh<R>, cause: &Error) -> String {
    let mut out = format!("last failure: {cause}\nz_m,h_m,t_c,theta_liq,theta_ice\n");
    for i in 0..state.n_cells() {
        let _ = writeln!(
            out,
            "{:.6e},{:.6e},{:.6e},{:.6e},{:.6e}",
            mesh.z_center()[i].as_f64(),
            state.h[i].as_f64(),
            state.temperature[i].as_f64(),
            state.theta_liq[i].as_f64(),
            state.theta_ice[i].as_f64()
        );
    }
    out
}

/// Depth of the shallowest 0 °C crossing with thawed soil above and frozen
/// below, interpolated linearly between cell centers. Zero when the top cell
/// is not thawed; `None` when the whole column is thawed.
pub fn thaw_depth<R: Real>(temperature: &[R], mesh: &ColumnMesh<R>) -> Option<R> {
    if !(temperature[0] > R::zero()) {
        return Some(R::zero());
    }
    crossing(temperature, mesh, |t| t > R::zero())
}

/// Depth reached by freezing from the surface: the first crossing from
/// frozen to unfrozen below a frozen top cell, zero if the top cell is not
/// frozen, `None` if the column is frozen throughout.
pub fn frost_depth<R: Real>(temperature: &[R], mesh: &ColumnMesh<R>) -> Option<R> {
    if !(temperature[0] < R::zero()) {
        return Some(R::zero());
    }
    crossing(temperature, mesh, |t| t < R::zero())
}

fn crossing<R: Real>(temperature: &[R], mesh: &ColumnMesh<R>, upper: impl Fn(R) -> bool) -> Option<R> {
    let z = mesh.z_center();
    (0..temperature.len() - 1).find(|&i| upper(temperature[i]) && !upper(temperature[i + 1])).map(|i| {
        let (a, b) = (temperature[i], temperature[i + 1]);
        z[i] + (z[i + 1] - z[i]) * a / (a - b)
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActiveLayer<R> {
    pub thickness: R,
    /// Set when the thaw reached the bottom of the column.
    pub no_permafrost_table: bool,
}

impl<R: Real> ActiveLayer<R> {
    pub fn none() -> Self {
        Self { thickness: R::zero(), no_permafrost_table: false }
    }

    /// Extends the running maximum with one temperature profile.
    pub fn observe(&mut self, temperature: &[R], mesh: &ColumnMesh<R>) {
        match thaw_depth(temperature, mesh) {
            Some(d) => self.thickness = self.thickness.max(d),
            None => {
                self.thickness = mesh.depth();
                self.no_permafrost_table = true;
            }
        }
    }
}

/// Active layer thickness over a year of temperature profiles.
pub fn active_layer_thickness<'a, R: Real>(
    profiles: impl IntoIterator<Item = &'a [R]>,
    mesh: &ColumnMesh<R>,
) -> ActiveLayer<R> {
    let mut alt = ActiveLayer::none();
    for t in profiles {
        alt.observe(t, mesh);
    }
    alt
}

/// Per-step diagnostics of the reporting year. Rates in m/s; times are
/// seconds since the start of the reporting year, at the end of each step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiagnosticsSeries<R> {
    pub time: Vec<R>,
    pub dt: Vec<R>,
    /// Active layer thickness to date, m.
    pub alt: Vec<R>,
    pub pet: Vec<R>,
    pub aet: Vec<R>,
    pub transpiration: Vec<R>,
    pub evaporation: Vec<R>,
    pub precip: Vec<R>,
    pub runoff: Vec<R>,
    pub drainage: Vec<R>,
    /// Flow-step water balance residual, m.
    pub water_balance_error: Vec<R>,
    /// Heat-step energy residual, J/m².
    pub energy_balance_error: Vec<R>,
    pub picard_flow: Vec<usize>,
    pub picard_heat: Vec<usize>,
    pub rejected_attempts: Vec<usize>,
    /// Depth reached by surface freezing, m.
    pub frost_depth: Vec<R>,
    /// Cumulative water budget components since the start of the year, m.
    pub cumulative_precip: Vec<R>,
    pub cumulative_aet: Vec<R>,
    pub cumulative_pet: Vec<R>,
    pub cumulative_drainage: Vec<R>,
}

impl<R: Real> DiagnosticsSeries<R> {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    fn push(&mut self, time: R, report: &StepReport<R>, alt: R, frost: R) {
        let dt = report.dt;
        let last = |v: &Vec<R>| v.last().copied().unwrap_or(R::zero());
        let aet = report.et.aet();
        self.cumulative_precip.push(last(&self.cumulative_precip) + report.precip * dt);
        self.cumulative_aet.push(last(&self.cumulative_aet) + aet * dt);
        self.cumulative_pet.push(last(&self.cumulative_pet) + report.et.pet * dt);
        self.cumulative_drainage.push(last(&self.cumulative_drainage) + report.flow.bottom_flux * dt);
        self.time.push(time);
        self.dt.push(dt);
        self.alt.push(alt);
        self.pet.push(report.et.pet);
        self.aet.push(aet);
        self.transpiration.push(report.et.actual_transpiration);
        self.evaporation.push(report.et.actual_evaporation);
        self.precip.push(report.precip);
        self.runoff.push(report.runoff);
        self.drainage.push(report.flow.bottom_flux);
        self.water_balance_error.push(report.flow.mass_balance_error);
        self.energy_balance_error.push(report.heat.energy_balance_error);
        self.picard_flow.push(report.flow.iterations);
        self.picard_heat.push(report.heat.iterations);
        self.rejected_attempts.push(report.rejected_attempts);
        self.frost_depth.push(frost);
    }
}

/// Trapezoidal integral of `values` over `times`.
pub fn trapezoid<R: Real>(times: &[R], values: &[R]) -> R {
    let half = R::lit(0.5);
    times.windows(2).zip(values.windows(2)).fold(R::zero(), |acc, (t, v)| acc + (v[0] + v[1]) * half * (t[1] - t[0]))
}

/// Annual budgets of the reporting year.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AnnualTotals<R> {
    /// Water amounts, m.
    pub precip: R,
    pub runoff: R,
    pub pet: R,
    /// Step-exact integral of the applied sink.
    pub aet: R,
    pub transpiration: R,
    pub evaporation: R,
    pub drainage: R,
    pub storage_change: R,
    /// `|Δstorage - (precip - runoff - aet - drainage)|`, m.
    pub water_closure: R,
    /// Energy amounts, J/m².
    pub enthalpy_change: R,
    pub net_heat_in: R,
    pub gross_heat_exchange: R,
    pub energy_closure: R,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot<R> {
    /// Seconds since the start of the reporting year.
    pub time: R,
    pub state: ColumnState<R>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput<R> {
    pub series: DiagnosticsSeries<R>,
    pub snapshots: Vec<Snapshot<R>>,
    pub final_state: ColumnState<R>,
    pub totals: AnnualTotals<R>,
    pub alt: ActiveLayer<R>,
    pub spinup_years: usize,
    pub spinup_converged: bool,
    pub rejected_attempts: usize,
}

/// Runs spin-up years until the year-end temperature profile repeats within
/// the tolerance (or the year limit is hit), then one recorded year.
pub fn run_column<R: Real>(scenario: &ScenarioConfig<R>, forcing: &ClimateForcing<R>) -> Result<RunOutput<R>> {
    run_column_with(scenario, forcing, &mut Solvers)
}

pub fn run_column_with<R: Real>(
    scenario: &ScenarioConfig<R>,
    forcing: &ClimateForcing<R>,
    solvers: &mut dyn SubSolvers<R>,
) -> Result<RunOutput<R>> {
    let mut inner = || -> Result<RunOutput<R>> {
        scenario.validate()?;
        let column = Column::from_scenario(scenario)?;
        let ctx = StepContext::for_scenario(&column, scenario);
        let mut stepper = Stepper::new(scenario.time);
        let mut state = column.initial_state(scenario)?;

        let mut spinup_years = 0;
        let mut spinup_converged = false;
        while spinup_years < scenario.spinup.max_years {
            let start = state.temperature.clone();
            state = run_year(state, &ctx, scenario, forcing, &mut stepper, solvers, None)?;
            spinup_years += 1;
            let change = start.iter().zip(&state.temperature).fold(R::zero(), |m, (a, b)| m.max((*a - *b).abs()));
            if change < scenario.spinup.tolerance {
                spinup_converged = true;
                break;
            }
        }

        let mut record = Recorder::new(&state, &column);
        let final_state = run_year(state, &ctx, scenario, forcing, &mut stepper, solvers, Some(&mut record))?;
        let totals = record.totals(&final_state, &column);
        let rejected_attempts = record.series.rejected_attempts.iter().sum();
        Ok(RunOutput {
            series: record.series,
            snapshots: record.snapshots,
            final_state,
            totals,
            alt: record.alt,
            spinup_years,
            spinup_converged,
            rejected_attempts,
        })
    };
    inner().map_err(|e| e.in_scenario(&scenario.name))
}

struct Recorder<R> {
    series: DiagnosticsSeries<R>,
    snapshots: Vec<Snapshot<R>>,
    alt: ActiveLayer<R>,
    storage_start: R,
    enthalpy_start: R,
    net_heat: R,
    gross_heat: R,
    totals: AnnualTotals<R>,
}

impl<R: Real> Recorder<R> {
    fn new(state: &ColumnState<R>, column: &Column<R>) -> Self {
        Self {
            series: DiagnosticsSeries::default(),
            snapshots: Vec::new(),
            alt: ActiveLayer::none(),
            storage_start: state.water_storage(&column.mesh),
            enthalpy_start: column_enthalpy(state, &column.mesh, &column.cells),
            net_heat: R::zero(),
            gross_heat: R::zero(),
            totals: AnnualTotals::default(),
        }
    }

    fn step(&mut self, state: &ColumnState<R>, report: &StepReport<R>, mesh: &ColumnMesh<R>) {
        self.alt.observe(&state.temperature, mesh);
        let frost = frost_depth(&state.temperature, mesh).unwrap_or_else(|| mesh.depth());
        self.series.push(state.time, report, self.alt.thickness, frost);
        let dt = report.dt;
        let t = &mut self.totals;
        t.precip = t.precip + report.precip * dt;
        t.runoff = t.runoff + report.runoff * dt;
        t.pet = t.pet + report.et.pet * dt;
        t.aet = t.aet + report.et.aet() * dt;
        t.transpiration = t.transpiration + report.et.actual_transpiration * dt;
        t.evaporation = t.evaporation + report.et.actual_evaporation * dt;
        t.drainage = t.drainage + report.flow.bottom_flux * dt;
        self.net_heat = self.net_heat + report.heat.fluxes.net_in() * dt;
        self.gross_heat = self.gross_heat + report.heat.fluxes.gross() * dt;
    }

    fn totals(&self, end: &ColumnState<R>, column: &Column<R>) -> AnnualTotals<R> {
        let mut t = self.totals;
        t.storage_change = end.water_storage(&column.mesh) - self.storage_start;
        t.water_closure = (t.storage_change - (t.precip - t.runoff - t.aet - t.drainage)).abs();
        t.enthalpy_change = column_enthalpy(end, &column.mesh, &column.cells) - self.enthalpy_start;
        t.net_heat_in = self.net_heat;
        t.gross_heat_exchange = self.gross_heat;
        t.energy_closure = (t.enthalpy_change - t.net_heat_in).abs();
        t
    }
}

/// Integrates one forcing year starting from `state` (whose clock is reset
/// to 0) and returns the year-end state.
fn run_year<R: Real>(
    mut state: ColumnState<R>,
    ctx: &StepContext<'_, R>,
    scenario: &ScenarioConfig<R>,
    forcing: &ClimateForcing<R>,
    stepper: &mut Stepper<R>,
    solvers: &mut dyn SubSolvers<R>,
    mut record: Option<&mut Recorder<R>>,
) -> Result<ColumnState<R>> {
    let year = R::lit(YEAR_SECONDS);
    state.time = R::zero();
    let mut next_snapshot = scenario.snapshot_interval;
    while state.time < year {
        let target = if record.is_some() { next_snapshot.min(year) } else { year };
        let (next, report) =
            stepper.advance(&state, ctx, forcing, scenario.aspect, scenario.pet_multiplier, target, solvers)?;
        state = next;
        if let Some(rec) = record.as_deref_mut() {
            rec.step(&state, &report, &ctx.column.mesh);
            if state.time == next_snapshot {
                rec.snapshots.push(Snapshot { time: state.time, state: state.clone() });
                next_snapshot = next_snapshot + scenario.snapshot_interval;
            }
        }
    }
    Ok(state)
}
