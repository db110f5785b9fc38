//! Ensemble configuration files.
//!
//! Line-oriented `key = value` text with `[section]` headers; `#` starts a
//! comment. Sections:
//!
//! * `[run]`: `workers`, `plot_scripts`.
//! * `[forcing]`: either `file = <csv>` (relative to the config file) or the
//!   sinusoidal generator keys (`mean_temperature`, `amplitude`,
//!   `south_offset`, `precip_annual`, `precip_seasonality`, `pet_peak`,
//!   `breakpoints`). Without the section the generator defaults apply.
//! * `[scenario]` (repeatable): `name` plus dotted keys such as
//!   `mesh.depth`, `veg.root_depth`, `boundary.bottom_flow`.
//! * `[layer]` (repeatable): soil layer of the preceding scenario. `z_top`
//!   defaults to the previous layer's bottom and the last layer's `z_bottom` to
//!   the column depth. Without any layer, one default layer spans the column.
//! * `[sweep]` (repeatable): `base = <scenario>` and comma-separated value
//!   lists for scenario keys (or `layer.<key>`, applied to every layer). The
//!   base is replaced by the cross product, named
//!   `<base>__<key>-<value>__...` with the first key varying slowest.
//!
//! Unknown keys, duplicates and invalid values are errors with file and line.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{ConfigError, Error, Result};
use crate::et::RootShape;
use crate::flow::BottomFlow;
use crate::forcing::{load_forcing, Aspect, ClimateForcing, SinusoidalForcing, YEAR_SECONDS};
use crate::heat::BottomHeat;
use crate::mesh::{SoilLayer, SoilProfile};
use crate::scenario::{is_identifier, DepthProfile, ScenarioConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub workers: usize,
    pub plot_scripts: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { workers: 1, plot_scripts: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ForcingSource {
    File(PathBuf),
    Sinusoidal(SinusoidalForcing<f64>),
}

impl ForcingSource {
    pub fn load(&self) -> Result<ClimateForcing<f64>> {
        match self {
            ForcingSource::File(path) => load_forcing(path),
            ForcingSource::Sinusoidal(s) => s.build(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub run: RunOptions,
    pub forcing: ForcingSource,
    pub scenarios: Vec<ScenarioConfig<f64>>,
}

#[derive(Debug, Clone)]
struct Entry {
    key: String,
    value: String,
    line: usize,
}

#[derive(Debug, Clone)]
struct Section {
    kind: String,
    line: usize,
    entries: Vec<Entry>,
}

#[derive(Debug, Clone)]
struct RawScenario {
    line: usize,
    entries: Vec<Entry>,
    layers: Vec<Section>,
}

/// Reads and validates an ensemble configuration.
pub fn parse_config(path: &Path) -> Result<EnsembleConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(ConfigError::new(path, 0, format!("cannot read config: {e}"))))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config_str(&text, path, base)
}

/// Parses configuration text; `path` labels errors and `base_dir` resolves
/// relative forcing paths.
pub fn parse_config_str(text: &str, path: &Path, base_dir: &Path) -> Result<EnsembleConfig> {
    Parser { path }.parse(text, base_dir).map_err(Error::Config)
}

struct Parser<'a> {
    path: &'a Path,
}

type Parsed<T> = std::result::Result<T, ConfigError>;

impl Parser<'_> {
    fn err(&self, line: usize, message: impl Into<String>) -> ConfigError {
        ConfigError::new(self.path, line, message)
    }

    fn sections(&self, text: &str) -> Parsed<Vec<Section>> {
        let mut sections: Vec<Section> = Vec::new();
        for (index, raw) in text.lines().enumerate() {
            let line = index + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let kind = rest
                    .strip_suffix(']')
                    .ok_or_else(|| self.err(line, format!("malformed section header '{content}'")))?
                    .trim();
                if !matches!(kind, "run" | "forcing" | "scenario" | "layer" | "sweep") {
                    return Err(self.err(line, format!("unknown section [{kind}]")));
                }
                sections.push(Section { kind: kind.to_string(), line, entries: Vec::new() });
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| self.err(line, format!("expected 'key = value', got '{content}'")))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(self.err(line, "empty key or value"));
            }
            let section = sections.last_mut().ok_or_else(|| self.err(line, "key outside of any section"))?;
            if section.entries.iter().any(|e| e.key == key) {
                return Err(self.err(line, format!("duplicate key '{key}'")));
            }
            section.entries.push(Entry { key: key.to_string(), value: value.to_string(), line });
        }
        Ok(sections)
    }

    fn parse(&self, text: &str, base_dir: &Path) -> Parsed<EnsembleConfig> {
        let mut run = None;
        let mut forcing = None;
        let mut raws: Vec<RawScenario> = Vec::new();
        let mut sweeps: Vec<Section> = Vec::new();
        for section in self.sections(text)? {
            match section.kind.as_str() {
                "run" => {
                    if run.is_some() {
                        return Err(self.err(section.line, "duplicate [run] section"));
                    }
                    run = Some(self.run_options(&section)?);
                }
                "forcing" => {
                    if forcing.is_some() {
                        return Err(self.err(section.line, "duplicate [forcing] section"));
                    }
                    forcing = Some(self.forcing(&section, base_dir)?);
                }
                "scenario" => {
                    raws.push(RawScenario { line: section.line, entries: section.entries, layers: Vec::new() })
                }
                "layer" => match raws.last_mut() {
                    Some(raw) if sweeps.is_empty() || raw.line > sweeps.last().map_or(0, |s| s.line) => {
                        raw.layers.push(section)
                    }
                    _ => return Err(self.err(section.line, "[layer] must follow a [scenario]")),
                },
                _ => sweeps.push(section),
            }
        }
        if raws.is_empty() {
            return Err(self.err(0, "no [scenario] section"));
        }

        let mut named: Vec<(String, RawScenario)> = Vec::new();
        for raw in raws {
            let name = raw
                .entries
                .iter()
                .find(|e| e.key == "name")
                .ok_or_else(|| self.err(raw.line, "scenario is missing required key 'name'"))?
                .value
                .clone();
            named.push((name, raw));
        }
        for sweep in &sweeps {
            named = self.expand(sweep, named)?;
        }

        let mut scenarios = Vec::with_capacity(named.len());
        let mut seen = HashSet::new();
        for (name, raw) in &named {
            if !seen.insert(name.clone()) {
                return Err(self.err(raw.line, format!("duplicate scenario name '{name}'")));
            }
            scenarios.push(self.scenario(name, raw)?);
        }
        Ok(EnsembleConfig {
            run: run.unwrap_or_default(),
            forcing: forcing.unwrap_or_else(|| ForcingSource::Sinusoidal(SinusoidalForcing::default())),
            scenarios,
        })
    }

    fn run_options(&self, section: &Section) -> Parsed<RunOptions> {
        let mut run = RunOptions::default();
        for e in &section.entries {
            match e.key.as_str() {
                "workers" => {
                    run.workers = self.value(e)?;
                    if run.workers == 0 {
                        return Err(self.err(e.line, "workers must be >= 1"));
                    }
                }
                "plot_scripts" => run.plot_scripts = self.value(e)?,
                other => return Err(self.err(e.line, format!("unknown key '{other}' in [run]"))),
            }
        }
        Ok(run)
    }

    fn forcing(&self, section: &Section, base_dir: &Path) -> Parsed<ForcingSource> {
        if let Some(file) = section.entries.iter().find(|e| e.key == "file") {
            if let Some(other) = section.entries.iter().find(|e| e.key != "file") {
                return Err(self.err(other.line, format!("key '{}' cannot be combined with 'file'", other.key)));
            }
            return Ok(ForcingSource::File(base_dir.join(&file.value)));
        }
        let mut s = SinusoidalForcing::default();
        for e in &section.entries {
            match e.key.as_str() {
                "mean_temperature" => s.mean_temperature = self.value(e)?,
                "amplitude" => s.amplitude = self.value(e)?,
                "south_offset" => s.south_offset = self.value(e)?,
                "precip_annual" => s.precip_annual = self.value(e)?,
                "precip_seasonality" => s.precip_seasonality = self.value(e)?,
                "pet_peak" => s.pet_peak = self.value(e)?,
                "breakpoints" => s.breakpoints = self.value(e)?,
                other => return Err(self.err(e.line, format!("unknown key '{other}' in [forcing]"))),
            }
        }
        s.validate().map_err(|err| self.err(section.line, bare(err)))?;
        Ok(ForcingSource::Sinusoidal(s))
    }

    fn value<T: std::str::FromStr>(&self, e: &Entry) -> Parsed<T> {
        e.value.parse().map_err(|_| self.err(e.line, format!("invalid value '{}' for '{}'", e.value, e.key)))
    }

    fn expand(&self, sweep: &Section, named: Vec<(String, RawScenario)>) -> Parsed<Vec<(String, RawScenario)>> {
        let mut base_name = None;
        let mut axes: Vec<(&Entry, Vec<String>)> = Vec::new();
        for e in &sweep.entries {
            if e.key == "base" {
                base_name = Some(e.value.clone());
                continue;
            }
            if e.key == "name" {
                return Err(self.err(e.line, "'name' cannot be swept"));
            }
            let values: Vec<String> = e.value.split(',').map(|v| v.trim().to_string()).collect();
            if values.iter().any(|v| v.is_empty()) {
                return Err(self.err(e.line, format!("empty value in sweep list for '{}'", e.key)));
            }
            // validate the key name (values are checked when the scenarios are built)
            let probe = if let Some(layer_key) = e.key.strip_prefix("layer.") {
                let mut layer = SoilLayer::with_defaults(0.0, 1.0);
                set_layer_key(&mut layer, layer_key, &values[0])
            } else {
                let mut s = ScenarioConfig::with_defaults("probe");
                set_scenario_key(&mut s, &e.key, &values[0])
            };
            if let Err(KeyError::Unknown) = probe {
                return Err(self.err(e.line, format!("unknown key '{}' in [sweep]", e.key)));
            }
            axes.push((e, values));
        }
        let base_name = match base_name {
            Some(b) => b,
            None if named.len() == 1 => named[0].0.clone(),
            None => return Err(self.err(sweep.line, "[sweep] needs 'base' when several scenarios exist")),
        };
        let position = named
            .iter()
            .position(|(n, _)| *n == base_name)
            .ok_or_else(|| self.err(sweep.line, format!("sweep base '{base_name}' is not a defined scenario")))?;
        if axes.is_empty() {
            return Err(self.err(sweep.line, "[sweep] has no axes"));
        }

        let (_, base) = &named[position];
        let mut expanded = vec![(base_name.clone(), base.clone())];
        for (axis, values) in &axes {
            let short = axis.key.rsplit('.').next().unwrap_or(&axis.key);
            let mut next = Vec::with_capacity(expanded.len() * values.len());
            for (name, raw) in &expanded {
                for v in values {
                    let mut raw = raw.clone();
                    raw.line = axis.line;
                    let entry = Entry { key: axis.key.clone(), value: v.clone(), line: axis.line };
                    if let Some(layer_key) = axis.key.strip_prefix("layer.") {
                        if raw.layers.is_empty() {
                            raw.layers.push(Section { kind: "layer".into(), line: axis.line, entries: Vec::new() });
                        }
                        for layer in &mut raw.layers {
                            let e = Entry { key: layer_key.to_string(), ..entry.clone() };
                            replace_entry(&mut layer.entries, e);
                        }
                    } else {
                        replace_entry(&mut raw.entries, entry);
                    }
                    next.push((format!("{name}__{short}-{}", sanitize(v)), raw));
                }
            }
            expanded = next;
        }
        let mut out = named;
        out.splice(position..=position, expanded);
        Ok(out)
    }

    fn scenario(&self, name: &str, raw: &RawScenario) -> Parsed<ScenarioConfig<f64>> {
        let mut s = ScenarioConfig::with_defaults(name);
        for e in &raw.entries {
            if e.key == "name" {
                continue;
            }
            set_scenario_key(&mut s, &e.key, &e.value).map_err(|k| self.key_error(e, k, "[scenario]"))?;
        }
        let mut layers = Vec::with_capacity(raw.layers.len().max(1));
        if raw.layers.is_empty() {
            layers.push(SoilLayer::with_defaults(0.0, s.mesh.depth));
        }
        for (k, section) in raw.layers.iter().enumerate() {
            let top = layers.last().map_or(0.0, |l: &SoilLayer<f64>| l.z_bottom);
            let mut layer = SoilLayer::with_defaults(top, f64::NAN);
            for e in &section.entries {
                set_layer_key(&mut layer, &e.key, &e.value).map_err(|k| self.key_error(e, k, "[layer]"))?;
            }
            if layer.z_bottom.is_nan() && k + 1 == raw.layers.len() {
                layer.z_bottom = s.mesh.depth;
            }
            if layer.z_bottom.is_nan() {
                return Err(self.err(section.line, "layer is missing required key 'z_bottom'"));
            }
            layer.validate().map_err(|err| self.err(section.line, bare(err)))?;
            if layer.z_top != top {
                let message = format!("layer starts at {} but the layer above ends at {top}", layer.z_top);
                return Err(self.err(section.line, message));
            }
            layers.push(layer);
        }
        s.profile = SoilProfile::new(layers).map_err(|err| self.err(raw.line, bare(err)))?;
        s.validate().map_err(|err| self.err(raw.line, format!("scenario '{name}': {}", bare(err))))?;
        Ok(s)
    }

    fn key_error(&self, e: &Entry, k: KeyError, section: &str) -> ConfigError {
        match k {
            KeyError::Unknown => self.err(e.line, format!("unknown key '{}' in {section}", e.key)),
            KeyError::Invalid(msg) => self.err(e.line, format!("invalid value '{}' for '{}': {msg}", e.value, e.key)),
        }
    }
}

fn replace_entry(entries: &mut Vec<Entry>, entry: Entry) {
    match entries.iter_mut().find(|e| e.key == entry.key) {
        Some(existing) => *existing = entry,
        None => entries.push(entry),
    }
}

fn sanitize(value: &str) -> String {
    value.chars().map(|c| if is_identifier(&c.to_string()) { c } else { '_' }).collect()
}

/// Error text without the variant prefix.
fn bare(err: Error) -> String {
    match err {
        Error::Configuration(m) | Error::InvalidArgument(m) | Error::Domain(m) => m,
        other => other.to_string(),
    }
}

enum KeyError {
    Unknown,
    Invalid(String),
}

fn num<T: std::str::FromStr>(value: &str) -> std::result::Result<T, KeyError> {
    value.parse().map_err(|_| KeyError::Invalid("not a number".into()))
}

fn depth_profile(value: &str) -> std::result::Result<DepthProfile<f64>, KeyError> {
    if !value.contains(':') {
        return num(value).map(DepthProfile::Uniform);
    }
    let mut points = Vec::new();
    for pair in value.split(',') {
        let (z, v) = pair.split_once(':').ok_or_else(|| KeyError::Invalid("expected depth:value pairs".into()))?;
        points.push((num(z.trim())?, num(v.trim())?));
    }
    Ok(DepthProfile::Table(points))
}

fn depth_profile_text(p: &DepthProfile<f64>) -> String {
    match p {
        DepthProfile::Uniform(v) => format!("{v:?}"),
        DepthProfile::Table(points) => {
            points.iter().map(|(z, v)| format!("{z:?}:{v:?}")).collect::<Vec<_>>().join(", ")
        }
    }
}

fn tagged(value: &str) -> std::result::Result<(&str, f64), KeyError> {
    let (tag, v) = value.split_once(':').ok_or_else(|| KeyError::Invalid("expected '<kind>:<value>'".into()))?;
    Ok((tag.trim(), num(v.trim())?))
}

fn set_scenario_key(s: &mut ScenarioConfig<f64>, key: &str, value: &str) -> std::result::Result<(), KeyError> {
    match key {
        "aspect" => s.aspect = value.parse::<Aspect>().map_err(KeyError::Invalid)?,
        "stand_density" => s.stand_density = num(value)?,
        "pet_multiplier" => s.pet_multiplier = num(value)?,
        "snapshot_interval" => {
            s.snapshot_interval = if value == "yearly" { YEAR_SECONDS } else { num(value)? };
        }
        "mesh.depth" => s.mesh.depth = num(value)?,
        "mesh.n_cells" => s.mesh.n_cells = num(value)?,
        "mesh.grading" => s.mesh.grading = num(value)?,
        "time.dt_init" => s.time.dt_init = num(value)?,
        "time.dt_min" => s.time.dt_min = num(value)?,
        "time.dt_max" => s.time.dt_max = num(value)?,
        "time.grow_factor" => s.time.grow_factor = num(value)?,
        "time.shrink_factor" => s.time.shrink_factor = num(value)?,
        "veg.root_depth" => s.veg.root_depth = num(value)?,
        "veg.root_shape" => s.veg.root_shape = value.parse::<RootShape>().map_err(KeyError::Invalid)?,
        "veg.feddes_h_start" => s.veg.feddes_h_start = num(value)?,
        "veg.feddes_h_wilt" => s.veg.feddes_h_wilt = num(value)?,
        "veg.t_crit" => s.veg.t_crit = num(value)?,
        "veg.t_ramp" => s.veg.t_ramp = num(value)?,
        "veg.k_ext" => s.veg.k_ext = num(value)?,
        "veg.lai_per_density" => s.veg.lai_per_density = num(value)?,
        "initial.temperature" => s.initial.temperature = depth_profile(value)?,
        "initial.head" => s.initial.head = depth_profile(value)?,
        "boundary.h_pond_max" => s.boundary.h_pond_max = num(value)?,
        "boundary.bottom_flow" => {
            s.boundary.bottom_flow = match value {
                "free-drainage" => BottomFlow::FreeDrainage,
                _ => match tagged(value)? {
                    ("head", v) => BottomFlow::Head(v),
                    ("flux", v) => BottomFlow::Flux(v),
                    _ => return Err(KeyError::Invalid("expected free-drainage, head:<m> or flux:<m/s>".into())),
                },
            }
        }
        "boundary.bottom_heat" => {
            s.boundary.bottom_heat = match tagged(value)? {
                ("flux", v) => BottomHeat::Flux(v),
                ("temperature", v) => BottomHeat::Temperature(v),
                _ => return Err(KeyError::Invalid("expected flux:<W/m2> or temperature:<C>".into())),
            }
        }
        "solver.tol_h" => s.flow_settings.tol_h = num(value)?,
        "solver.tol_mb" => s.flow_settings.tol_mb = num(value)?,
        "solver.flow_max_picard" => s.flow_settings.max_picard = num(value)?,
        "solver.min_capacity" => s.flow_settings.min_capacity = num(value)?,
        "solver.tol_t" => s.heat_settings.tol_t = num(value)?,
        "solver.tol_energy" => s.heat_settings.tol_energy = num(value)?,
        "solver.heat_max_picard" => s.heat_settings.max_picard = num(value)?,
        "spinup.max_years" => s.spinup.max_years = num(value)?,
        "spinup.tolerance" => s.spinup.tolerance = num(value)?,
        _ => return Err(KeyError::Unknown),
    }
    Ok(())
}

fn set_layer_key(l: &mut SoilLayer<f64>, key: &str, value: &str) -> std::result::Result<(), KeyError> {
    let v: f64 = match num(value) {
        Ok(v) => v,
        Err(e) => return if layer_fields(l).iter().any(|(k, _)| *k == key) { Err(e) } else { Err(KeyError::Unknown) },
    };
    let slot = match key {
        "z_top" => &mut l.z_top,
        "z_bottom" => &mut l.z_bottom,
        "k_sat" => &mut l.k_sat,
        "theta_r" => &mut l.theta_r,
        "theta_s" => &mut l.theta_s,
        "vg_alpha" => &mut l.vg_alpha,
        "vg_n" => &mut l.vg_n,
        "c_solid" => &mut l.c_solid,
        "k_solid" => &mut l.k_solid,
        "k_water" => &mut l.k_water,
        "k_ice" => &mut l.k_ice,
        "freeze_w" => &mut l.freeze_w,
        "impedance_omega" => &mut l.impedance_omega,
        _ => return Err(KeyError::Unknown),
    };
    *slot = v;
    Ok(())
}

fn layer_fields(l: &SoilLayer<f64>) -> [(&'static str, f64); 13] {
    [
        ("z_top", l.z_top),
        ("z_bottom", l.z_bottom),
        ("k_sat", l.k_sat),
        ("theta_r", l.theta_r),
        ("theta_s", l.theta_s),
        ("vg_alpha", l.vg_alpha),
        ("vg_n", l.vg_n),
        ("c_solid", l.c_solid),
        ("k_solid", l.k_solid),
        ("k_water", l.k_water),
        ("k_ice", l.k_ice),
        ("freeze_w", l.freeze_w),
        ("impedance_omega", l.impedance_omega),
    ]
}

fn scenario_fields(s: &ScenarioConfig<f64>) -> Vec<(&'static str, String)> {
    let f = |v: f64| format!("{v:?}");
    let bottom_flow = match s.boundary.bottom_flow {
        BottomFlow::FreeDrainage => "free-drainage".to_string(),
        BottomFlow::Head(v) => format!("head:{v:?}"),
        BottomFlow::Flux(v) => format!("flux:{v:?}"),
    };
    let bottom_heat = match s.boundary.bottom_heat {
        BottomHeat::Flux(v) => format!("flux:{v:?}"),
        BottomHeat::Temperature(v) => format!("temperature:{v:?}"),
    };
    vec![
        ("name", s.name.clone()),
        ("aspect", s.aspect.as_str().to_string()),
        ("stand_density", f(s.stand_density)),
        ("pet_multiplier", f(s.pet_multiplier)),
        ("snapshot_interval", f(s.snapshot_interval)),
        ("mesh.depth", f(s.mesh.depth)),
        ("mesh.n_cells", s.mesh.n_cells.to_string()),
        ("mesh.grading", f(s.mesh.grading)),
        ("time.dt_init", f(s.time.dt_init)),
        ("time.dt_min", f(s.time.dt_min)),
        ("time.dt_max", f(s.time.dt_max)),
        ("time.grow_factor", f(s.time.grow_factor)),
        ("time.shrink_factor", f(s.time.shrink_factor)),
        ("veg.root_depth", f(s.veg.root_depth)),
        ("veg.root_shape", s.veg.root_shape.as_str().to_string()),
        ("veg.feddes_h_start", f(s.veg.feddes_h_start)),
        ("veg.feddes_h_wilt", f(s.veg.feddes_h_wilt)),
        ("veg.t_crit", f(s.veg.t_crit)),
        ("veg.t_ramp", f(s.veg.t_ramp)),
        ("veg.k_ext", f(s.veg.k_ext)),
        ("veg.lai_per_density", f(s.veg.lai_per_density)),
        ("initial.temperature", depth_profile_text(&s.initial.temperature)),
        ("initial.head", depth_profile_text(&s.initial.head)),
        ("boundary.h_pond_max", f(s.boundary.h_pond_max)),
        ("boundary.bottom_flow", bottom_flow),
        ("boundary.bottom_heat", bottom_heat),
        ("solver.tol_h", f(s.flow_settings.tol_h)),
        ("solver.tol_mb", f(s.flow_settings.tol_mb)),
        ("solver.flow_max_picard", s.flow_settings.max_picard.to_string()),
        ("solver.min_capacity", f(s.flow_settings.min_capacity)),
        ("solver.tol_t", f(s.heat_settings.tol_t)),
        ("solver.tol_energy", f(s.heat_settings.tol_energy)),
        ("solver.heat_max_picard", s.heat_settings.max_picard.to_string()),
        ("spinup.max_years", s.spinup.max_years.to_string()),
        ("spinup.tolerance", f(s.spinup.tolerance)),
    ]
}

/// Normalized configuration text: every key explicit, sweeps expanded.
/// Parsing it reproduces an equal [`EnsembleConfig`].
pub fn dump_config(config: &EnsembleConfig) -> String {
    let mut out = String::from("# normalized cryoflow configuration\n\n[run]\n");
    let _ = writeln!(out, "workers = {}", config.run.workers);
    let _ = writeln!(out, "plot_scripts = {}", config.run.plot_scripts);
    out.push_str("\n[forcing]\n");
    match &config.forcing {
        ForcingSource::File(p) => {
            let _ = writeln!(out, "file = {}", p.display());
        }
        ForcingSource::Sinusoidal(s) => {
            for (k, v) in [
                ("mean_temperature", s.mean_temperature),
                ("amplitude", s.amplitude),
                ("south_offset", s.south_offset),
                ("precip_annual", s.precip_annual),
                ("precip_seasonality", s.precip_seasonality),
                ("pet_peak", s.pet_peak),
            ] {
                let _ = writeln!(out, "{k} = {v:?}");
            }
            let _ = writeln!(out, "breakpoints = {}", s.breakpoints);
        }
    }
    for s in &config.scenarios {
        out.push_str("\n[scenario]\n");
        for (k, v) in scenario_fields(s) {
            let _ = writeln!(out, "{k} = {v}");
        }
        for layer in s.profile.layers() {
            out.push_str("\n[layer]\n");
            for (k, v) in layer_fields(layer) {
                let _ = writeln!(out, "{k} = {v:?}");
            }
        }
    }
    out
}
