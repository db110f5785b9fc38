//! Per-scenario result files.
//!
//! * `<name>_series.csv`: one row per accepted step of the reporting year.
//! * `<name>_profiles.csv`: long-format snapshots (`time_s, z_m, ...`).
//! * `<name>_summary.txt`: `key = value` annual totals and run statistics.
//! * `<name>_plot.py` (optional): matplotlib script for the two CSVs.
//!
//! Numbers use `{:.16e}` so identical runs give byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::engine::{trapezoid, DiagnosticsSeries, RunOutput, Snapshot};
use crate::error::{Error, Result};
use crate::mesh::ColumnMesh;
use crate::scenario::ScenarioConfig;

pub const SERIES_HEADER: &str = "time_s,dt_s,alt_m,pet_m_s,aet_m_s,precip_m_s,drainage_m_s,water_balance_err_m,\
energy_balance_err_j_m2,picard_flow,picard_heat,runoff_m_s,transpiration_m_s,evaporation_m_s,frost_depth_m";

pub const PROFILES_HEADER: &str = "time_s,z_m,h_m,t_c,theta_liq,theta_ice";

fn e(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn series_csv(series: &DiagnosticsSeries<f64>) -> String {
    let mut out = String::with_capacity(series.len() * 360);
    out.push_str(SERIES_HEADER);
    out.push('\n');
    for i in 0..series.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            e(series.time[i]),
            e(series.dt[i]),
            e(series.alt[i]),
            e(series.pet[i]),
            e(series.aet[i]),
            e(series.precip[i]),
            e(series.drainage[i]),
            e(series.water_balance_error[i]),
            e(series.energy_balance_error[i]),
            series.picard_flow[i],
            series.picard_heat[i],
            e(series.runoff[i]),
            e(series.transpiration[i]),
            e(series.evaporation[i]),
            e(series.frost_depth[i]),
        );
    }
    out
}

pub fn profiles_csv(snapshots: &[Snapshot<f64>], mesh: &ColumnMesh<f64>) -> String {
    let mut out = String::new();
    out.push_str(PROFILES_HEADER);
    out.push('\n');
    for snap in snapshots {
        let s = &snap.state;
        for (i, &z) in mesh.z_center().iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                e(snap.time),
                e(z),
                e(s.h[i]),
                e(s.temperature[i]),
                e(s.theta_liq[i]),
                e(s.theta_ice[i])
            );
        }
    }
    out
}

pub fn summary_text(name: &str, run: &RunOutput<f64>) -> String {
    let t = &run.totals;
    let s = &run.series;
    let mut out = String::new();
    let mut line = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    line("scenario", name.to_string());
    line("status", "ok".into());
    line("precip_total_m", e(t.precip));
    line("runoff_total_m", e(t.runoff));
    line("pet_total_m", e(t.pet));
    line("aet_total_m", e(trapezoid(&s.time, &s.aet)));
    line("aet_applied_m", e(t.aet));
    line("transpiration_total_m", e(t.transpiration));
    line("evaporation_total_m", e(t.evaporation));
    line("drainage_total_m", e(t.drainage));
    line("storage_change_m", e(t.storage_change));
    line("water_closure_m", e(t.water_closure));
    line("enthalpy_change_j_m2", e(t.enthalpy_change));
    line("net_heat_in_j_m2", e(t.net_heat_in));
    line("gross_heat_exchange_j_m2", e(t.gross_heat_exchange));
    line("energy_closure_j_m2", e(t.energy_closure));
    line("alt_m", e(run.alt.thickness));
    line("no_permafrost_table", run.alt.no_permafrost_table.to_string());
    line("spinup_years", run.spinup_years.to_string());
    line("spinup_converged", run.spinup_converged.to_string());
    line("steps", s.len().to_string());
    line("rejected_attempts", run.rejected_attempts.to_string());
    out
}

pub fn failure_summary(name: &str, error: &Error) -> String {
    let message = error.to_string().replace('\n', "\n# ");
    format!("scenario = {name}\nstatus = failed\nerror = {message}\n")
}

pub fn plot_script(name: &str) -> String {
    format!(
        r#"import csv
import matplotlib.pyplot as plt

def load(path):
    with open(path) as f:
        rows = list(csv.DictReader(f))
    return {{k: [float(r[k]) for r in rows] for k in rows[0]}}

s = load("{name}_series.csv")
days = [t / 86400 for t in s["time_s"]]
fig, ax = plt.subplots(3, 1, sharex=True, figsize=(8, 9))
ax[0].plot(days, s["alt_m"], label="active layer")
ax[0].plot(days, s["frost_depth_m"], label="frost depth")
ax[0].invert_yaxis()
ax[0].set_ylabel("depth (m)")
ax[0].legend()
ax[1].plot(days, [v * 86400e3 for v in s["pet_m_s"]], label="PET")
ax[1].plot(days, [v * 86400e3 for v in s["aet_m_s"]], label="AET")
ax[1].set_ylabel("mm/day")
ax[1].legend()
ax[2].plot(days, [v * 86400e3 for v in s["drainage_m_s"]])
ax[2].set_ylabel("drainage (mm/day)")
ax[2].set_xlabel("day of year")
fig.savefig("{name}_series.png", dpi=120)

p = load("{name}_profiles.csv")
fig, ax = plt.subplots(figsize=(5, 7))
for t in sorted(set(p["time_s"])):
    z = [z for z, tt in zip(p["z_m"], p["time_s"]) if tt == t]
    temp = [v for v, tt in zip(p["t_c"], p["time_s"]) if tt == t]
    ax.plot(temp, z, label=f"day {{t / 86400:.0f}}")
ax.axvline(0, color="k", lw=0.5)
ax.invert_yaxis()
ax.set_xlabel("temperature (C)")
ax.set_ylabel("depth (m)")
ax.legend(fontsize=6)
fig.savefig("{name}_profiles.png", dpi=120)
"#
    )
}

pub fn series_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}_series.csv"))
}

pub fn profiles_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}_profiles.csv"))
}

pub fn summary_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}_summary.txt"))
}

/// Writes the result files of a successful run.
pub fn write_outputs(dir: &Path, scenario: &ScenarioConfig<f64>, run: &RunOutput<f64>, plot: bool) -> Result<()> {
    let name = &scenario.name;
    let mesh = scenario.mesh.build()?;
    fs::write(series_path(dir, name), series_csv(&run.series))?;
    fs::write(profiles_path(dir, name), profiles_csv(&run.snapshots, &mesh))?;
    fs::write(summary_path(dir, name), summary_text(name, run))?;
    if plot {
        fs::write(dir.join(format!("{name}_plot.py")), plot_script(name))?;
    }
    Ok(())
}

/// Reads a `key = value` summary back into pairs.
pub fn parse_summary(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}
