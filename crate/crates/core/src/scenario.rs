//! One slope realization: soil, vegetation, exposure and run controls.

use crate::error::{Error, Result};
use crate::et::VegetationParams;
use crate::flow::{BottomFlow, FlowSettings};
use crate::forcing::Aspect;
use crate::heat::{BottomHeat, HeatSettings};
use crate::mesh::{build_mesh, ColumnMesh, SoilLayer, SoilProfile};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshSpec<R> {
    pub depth: R,
    pub n_cells: usize,
    /// Bottom/top cell-size ratio.
    pub grading: R,
}

impl<R: Real> Default for MeshSpec<R> {
    fn default() -> Self {
        Self { depth: R::lit(10.0), n_cells: 60, grading: R::lit(10.0) }
    }
}

impl<R: Real> MeshSpec<R> {
    pub fn build(&self) -> Result<ColumnMesh<R>> {
        build_mesh(self.depth, self.n_cells, self.grading)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeControl<R> {
    pub dt_init: R,
    pub dt_min: R,
    pub dt_max: R,
    pub grow_factor: R,
    pub shrink_factor: R,
}

impl<R: Real> Default for TimeControl<R> {
    fn default() -> Self {
        Self {
            dt_init: R::lit(600.0),
            dt_min: R::lit(1.0),
            dt_max: R::lit(21_600.0),
            grow_factor: R::lit(1.3),
            shrink_factor: R::lit(0.5),
        }
    }
}

impl<R: Real> TimeControl<R> {
    pub fn validate(&self) -> Result<()> {
        if !(R::zero() < self.dt_min && self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return Err(Error::Configuration("time control violates 0 < dt_min <= dt_init <= dt_max".into()));
        }
        if !(self.grow_factor > R::one()) {
            return Err(Error::Configuration("time control violates grow_factor > 1".into()));
        }
        if !(self.shrink_factor > R::zero() && self.shrink_factor < R::one()) {
            return Err(Error::Configuration("time control violates 0 < shrink_factor < 1".into()));
        }
        Ok(())
    }
}

/// Initial value as a function of depth.
#[derive(Debug, Clone, PartialEq)]
pub enum DepthProfile<R> {
    Uniform(R),
    /// `(depth, value)` pairs with increasing depth, linearly interpolated and
    /// held constant beyond the ends.
    Table(Vec<(R, R)>),
}

impl<R: Real> DepthProfile<R> {
    pub fn validate(&self) -> Result<()> {
        match self {
            DepthProfile::Uniform(v) if v.is_finite() => Ok(()),
            DepthProfile::Uniform(_) => Err(Error::Configuration("initial value must be finite".into())),
            DepthProfile::Table(points) => {
                if points.is_empty() {
                    return Err(Error::Configuration("initial profile table is empty".into()));
                }
                if points.iter().any(|(z, v)| !z.is_finite() || !v.is_finite()) {
                    return Err(Error::Configuration("initial profile values must be finite".into()));
                }
                if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                    return Err(Error::Configuration("initial profile depths must increase".into()));
                }
                Ok(())
            }
        }
    }

    pub fn at(&self, z: R) -> R {
        match self {
            DepthProfile::Uniform(v) => *v,
            DepthProfile::Table(points) => {
                let k = points.partition_point(|p| p.0 <= z);
                if k == 0 {
                    points[0].1
                } else if k == points.len() {
                    points[k - 1].1
                } else {
                    let (z0, v0) = points[k - 1];
                    let (z1, v1) = points[k];
                    v0 + (v1 - v0) * (z - z0) / (z1 - z0)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialCondition<R> {
    pub temperature: DepthProfile<R>,
    pub head: DepthProfile<R>,
}

impl<R: Real> Default for InitialCondition<R> {
    fn default() -> Self {
        Self { temperature: DepthProfile::Uniform(R::lit(-1.0)), head: DepthProfile::Uniform(R::lit(-1.0)) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySpec<R> {
    pub h_pond_max: R,
    pub bottom_flow: BottomFlow<R>,
    pub bottom_heat: BottomHeat<R>,
}

impl<R: Real> Default for BoundarySpec<R> {
    fn default() -> Self {
        Self { h_pond_max: R::zero(), bottom_flow: BottomFlow::FreeDrainage, bottom_heat: BottomHeat::Flux(R::zero()) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinUp<R> {
    pub max_years: usize,
    /// Year-over-year max |ΔT| that counts as periodic steady state, K.
    pub tolerance: R,
}

impl<R: Real> Default for SpinUp<R> {
    fn default() -> Self {
        Self { max_years: 50, tolerance: R::lit(0.05) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig<R> {
    pub name: String,
    pub aspect: Aspect,
    pub stand_density: R,
    /// Scales the forcing PET for this slope.
    pub pet_multiplier: R,
    pub veg: VegetationParams<R>,
    pub profile: SoilProfile<R>,
    pub mesh: MeshSpec<R>,
    pub time: TimeControl<R>,
    pub initial: InitialCondition<R>,
    pub boundary: BoundarySpec<R>,
    pub flow_settings: FlowSettings<R>,
    pub heat_settings: HeatSettings<R>,
    pub spinup: SpinUp<R>,
    /// Spacing of profile snapshots in the reporting year, s.
    pub snapshot_interval: R,
}

impl<R: Real> ScenarioConfig<R> {
    /// Defaults everywhere, one default soil layer over the column.
    pub fn with_defaults(name: &str) -> Self {
        let mesh = MeshSpec::default();
        let layer = SoilLayer::with_defaults(R::zero(), mesh.depth);
        Self {
            name: name.to_string(),
            aspect: Aspect::North,
            stand_density: R::one(),
            pet_multiplier: R::one(),
            veg: VegetationParams::default(),
            profile: SoilProfile::uniform(layer, mesh.depth).expect("default layer is valid"),
            mesh,
            time: TimeControl::default(),
            initial: InitialCondition::default(),
            boundary: BoundarySpec::default(),
            flow_settings: FlowSettings::default(),
            heat_settings: HeatSettings::default(),
            spinup: SpinUp::default(),
            snapshot_interval: R::lit(30.0 * 86_400.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Configuration(m));
        if !is_identifier(&self.name) {
            return bad(format!("scenario name '{}' must be non-empty and use only [A-Za-z0-9_.-]", self.name));
        }
        if !(self.stand_density >= R::zero()) || !self.stand_density.is_finite() {
            return bad("stand_density must be >= 0".into());
        }
        if !(self.pet_multiplier >= R::zero()) || !self.pet_multiplier.is_finite() {
            return bad("pet_multiplier must be >= 0".into());
        }
        if !(self.boundary.h_pond_max >= R::zero()) {
            return bad("boundary violates h_pond_max >= 0".into());
        }
        if !(self.snapshot_interval > R::zero()) {
            return bad("snapshot_interval must be positive".into());
        }
        if !(self.spinup.tolerance > R::zero()) {
            return bad("spin-up tolerance must be positive".into());
        }
        let flow = &self.flow_settings;
        let heat = &self.heat_settings;
        if !(flow.tol_h > R::zero()
            && flow.tol_mb > R::zero()
            && flow.max_picard >= 1
            && flow.min_capacity >= R::zero())
        {
            return bad("flow solver settings must be positive".into());
        }
        if !(heat.tol_t > R::zero() && heat.tol_energy > R::zero() && heat.max_picard >= 1) {
            return bad("heat solver settings must be positive".into());
        }
        self.veg.validate()?;
        self.time.validate()?;
        self.initial.temperature.validate()?;
        self.initial.head.validate()?;
        for layer in self.profile.layers() {
            layer.validate()?;
        }
        let mesh = self.mesh.build()?;
        crate::mesh::sample_profile(&self.profile, &mesh)?;
        crate::et::root_fractions(&self.veg, &mesh)?;
        Ok(())
    }
}

pub(crate) fn is_identifier(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-'))
}
