//! Step control, rollback and recorded output of full runs.

mod common;

use common::quick_scenario;
use cryoflow::engine::{
    coupled_step, run_column, run_column_with, step_forcing, Column, Solvers, StepContext, Stepper, SubSolvers,
};
use cryoflow::flow::{FlowBoundary, FlowSettings, FlowStepReport};
use cryoflow::forcing::{SinusoidalForcing, YEAR_SECONDS};
use cryoflow::heat::{HeatBoundary, HeatSettings, HeatStepReport, WaterTransport};
use cryoflow::output::{parse_summary, profiles_csv, series_csv, summary_text};
use cryoflow::{ColumnMesh, ColumnState, Error, SoilLayer};

/// Production solvers that report non-convergence on chosen calls, after
/// doing the real work, so any leaked partial state would show up.
#[derive(Default)]
struct Flaky {
    fail_flow: Vec<usize>,
    fail_heat: Vec<usize>,
    flow_calls: usize,
    heat_calls: usize,
}

impl SubSolvers<f64> for Flaky {
    fn flow(
        &mut self,
        state: &ColumnState,
        mesh: &ColumnMesh,
        cells: &[SoilLayer],
        boundary: &FlowBoundary<f64>,
        sink_at: &mut dyn FnMut(&[f64], &mut [f64]),
        dt: f64,
        settings: &FlowSettings<f64>,
    ) -> cryoflow::Result<(ColumnState, FlowStepReport<f64>)> {
        self.flow_calls += 1;
        let out = Solvers.flow(state, mesh, cells, boundary, sink_at, dt, settings)?;
        if self.fail_flow.contains(&self.flow_calls) {
            return Err(Error::NotConverged { solver: "flow", iterations: 0 });
        }
        Ok(out)
    }

    fn heat(
        &mut self,
        state: &ColumnState,
        mesh: &ColumnMesh,
        cells: &[SoilLayer],
        boundary: &HeatBoundary<f64>,
        water: &WaterTransport<f64>,
        dt: f64,
        settings: &HeatSettings<f64>,
    ) -> cryoflow::Result<(ColumnState, HeatStepReport<f64>)> {
        self.heat_calls += 1;
        let out = Solvers.heat(state, mesh, cells, boundary, water, dt, settings)?;
        if self.fail_heat.contains(&self.heat_calls) {
            return Err(Error::NotConverged { solver: "heat", iterations: 0 });
        }
        Ok(out)
    }
}

struct Fixture {
    scenario: cryoflow::ScenarioConfig,
    column: Column<f64>,
    forcing: cryoflow::ClimateForcing,
}

fn fixture() -> Fixture {
    let scenario = quick_scenario("rollback");
    let column = Column::from_scenario(&scenario).unwrap();
    Fixture { scenario, column, forcing: SinusoidalForcing::default().build().unwrap() }
}

/// A retried step must equal a clean step of the accepted length taken from
/// the original state.
fn assert_rollback_is_pure(mut flaky: Flaky, expected_rejections: usize) {
    let f = fixture();
    let ctx = StepContext::for_scenario(&f.column, &f.scenario);
    let state = f.column.initial_state(&f.scenario).unwrap();
    let before = state.clone();
    let mut stepper = Stepper::new(f.scenario.time);
    let (next, report) =
        stepper.advance(&state, &ctx, &f.forcing, f.scenario.aspect, 1.0, YEAR_SECONDS, &mut flaky).unwrap();
    assert_eq!(state, before, "the input state is never touched");
    assert_eq!(report.rejected_attempts, expected_rejections);
    let expected_dt = f.scenario.time.dt_init * f.scenario.time.shrink_factor.powi(expected_rejections as i32);
    assert!((report.dt - expected_dt).abs() <= 1e-9 * expected_dt);

    let forcing = step_forcing(&f.forcing, f.scenario.aspect, 1.0, 0.0, report.dt);
    let (clean, _) = coupled_step(&state, &ctx, &forcing, report.dt, &mut Solvers).unwrap();
    assert_eq!(next, clean);
}

#[test]
fn flow_failure_is_rolled_back() {
    assert_rollback_is_pure(Flaky { fail_flow: vec![1], ..Default::default() }, 1);
}

#[test]
fn heat_failure_after_successful_flow_is_rolled_back() {
    assert_rollback_is_pure(Flaky { fail_heat: vec![1, 2], ..Default::default() }, 2);
}

#[test]
fn persistent_failure_ends_in_dt_underflow_with_state_dump() {
    let f = fixture();
    let ctx = StepContext::for_scenario(&f.column, &f.scenario);
    let state = f.column.initial_state(&f.scenario).unwrap();
    let mut flaky = Flaky { fail_flow: (1..1000).collect(), ..Default::default() };
    let mut stepper = Stepper::new(f.scenario.time);
    let err = stepper.advance(&state, &ctx, &f.forcing, f.scenario.aspect, 1.0, YEAR_SECONDS, &mut flaky).unwrap_err();
    let Error::DtUnderflow { dt, dump, .. } = err else { panic!("expected dt underflow, got {err}") };
    assert!(dt < f.scenario.time.dt_min);
    // halvings from dt_init until below dt_min
    let t = f.scenario.time;
    let expected = ((t.dt_min / t.dt_init).ln() / t.shrink_factor.ln()).floor() as usize + 1;
    assert_eq!(flaky.flow_calls, expected);
    assert!(dump.starts_with("last failure: flow solver did not converge"));
    assert_eq!(dump.lines().count(), 2 + f.column.mesh.n_cells());
}

#[test]
fn run_failure_names_the_scenario() {
    let f = fixture();
    let mut flaky = Flaky { fail_flow: (1..1000).collect(), ..Default::default() };
    let err = run_column_with(&f.scenario, &f.forcing, &mut flaky).unwrap_err();
    assert!(err.to_string().starts_with("scenario 'rollback': time step underflow"), "{err}");
}

#[test]
fn recorded_year_is_consistent() {
    let mut scenario = quick_scenario("record");
    scenario.snapshot_interval = 91.0 * 86_400.0;
    let forcing = SinusoidalForcing::default().build().unwrap();
    let run = run_column(&scenario, &forcing).unwrap();
    let s = &run.series;
    let n = scenario.mesh.n_cells;

    // the clock covers the year exactly and dt matches the time increments
    assert_eq!(*s.time.last().unwrap(), YEAR_SECONDS);
    let mut prev = 0.0;
    for (t, dt) in s.time.iter().zip(&s.dt) {
        assert!((t - prev - dt).abs() <= 1e-6 * dt, "t={t} prev={prev} dt={dt}");
        assert!(*dt <= scenario.time.dt_max * (1.0 + 1e-12));
        prev = *t;
    }
    // snapshots at 91, 182, 273 and 364 days
    let times: Vec<f64> = run.snapshots.iter().map(|s| s.time / 86_400.0).collect();
    assert_eq!(times, [91.0, 182.0, 273.0, 364.0]);

    let mesh = scenario.mesh.build().unwrap();
    let series = series_csv(s);
    assert_eq!(series.lines().count(), s.len() + 1);
    let profiles = profiles_csv(&run.snapshots, &mesh);
    assert_eq!(profiles.lines().count(), 4 * n + 1);

    // applied totals are step sums; the summary also carries the trapezoid AET
    let applied: f64 = s.aet.iter().zip(&s.dt).map(|(a, dt)| a * dt).sum();
    assert!((applied - run.totals.aet).abs() <= 1e-12 * applied.max(1e-30));
    let mut trapezoid = 0.0;
    let mut t0 = 0.0;
    let mut a0 = s.aet[0];
    for (t, a) in s.time.iter().zip(&s.aet) {
        trapezoid += 0.5 * (a0 + a) * (t - t0);
        t0 = *t;
        a0 = *a;
    }
    let kv = parse_summary(&summary_text("record", &run));
    let get = |k: &str| kv.iter().find(|(key, _)| key == k).unwrap().1.clone();
    let reported: f64 = get("aet_total_m").parse().unwrap();
    assert!((reported - trapezoid).abs() <= 1e-12 * trapezoid.abs().max(1e-30), "{reported} vs {trapezoid}");
    assert_eq!(get("steps"), s.len().to_string());
    assert_eq!(get("spinup_years"), "0");

    // component split of the applied sink
    for i in 0..s.len() {
        let parts = s.transpiration[i] + s.evaporation[i];
        assert!((parts - s.aet[i]).abs() <= 1e-12 * s.aet[i].abs().max(1e-20));
        assert!(s.aet[i] <= s.pet[i] * (1.0 + 1e-12) + 1e-30);
    }
}

#[test]
fn identical_runs_are_bitwise_identical() {
    let scenario = quick_scenario("twice");
    let forcing = SinusoidalForcing::default().build().unwrap();
    let a = run_column(&scenario, &forcing).unwrap();
    let b = run_column(&scenario, &forcing).unwrap();
    assert_eq!(series_csv(&a.series), series_csv(&b.series));
    assert_eq!(a.final_state, b.final_state);
}

#[test]
fn single_precision_tracks_double_over_ten_days() {
    fn ten_days<R: cryoflow::real::Real>(scenario: &cryoflow::scenario::ScenarioConfig<R>) -> Vec<f64> {
        let forcing = SinusoidalForcing::<R>::default().build().unwrap();
        let column = Column::from_scenario(scenario).unwrap();
        let ctx = StepContext::for_scenario(&column, scenario);
        let mut state = column.initial_state(scenario).unwrap();
        let mut stepper = Stepper::new(scenario.time);
        // early summer, thawing from the top
        state.time = R::lit(160.0 * 86_400.0);
        let end = R::lit(170.0 * 86_400.0);
        while state.time < end {
            state = stepper.advance(&state, &ctx, &forcing, scenario.aspect, R::one(), end, &mut Solvers).unwrap().0;
        }
        state.temperature.iter().map(|t| t.as_f64()).collect()
    }
    let double = quick_scenario("f64");
    let mut single: cryoflow::scenario::ScenarioConfig<f32> = cryoflow::scenario::ScenarioConfig::with_defaults("f32");
    single.mesh.depth = 2.0;
    single.mesh.n_cells = double.mesh.n_cells;
    single.profile =
        cryoflow::mesh::SoilProfile::uniform(cryoflow::mesh::SoilLayer::<f32>::with_defaults(0.0, 2.0), 2.0).unwrap();
    // column enthalpy is ~1e8 J/m2, so single precision resolves only ~10 J/m2
    single.heat_settings.tol_energy = 100.0;
    single.heat_settings.tol_t = 1e-3;
    single.flow_settings.tol_h = 1e-4;
    single.flow_settings.tol_mb = 1e-6;
    let a = ten_days(&double);
    let b = ten_days(&single);
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 0.05, "{x} vs {y}");
    }
}
