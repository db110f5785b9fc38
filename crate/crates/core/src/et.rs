//! Potential-to-actual evapotranspiration: canopy partition by stand density,
//! root distribution, and multiplicative water-availability and thermal
//! limiters evaluated per cell.

use crate::error::{Error, Result};
use crate::mesh::{ColumnMesh, ColumnState};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootShape {
    Uniform,
    /// Root density proportional to `1 - z / root_depth`.
    LinearDecreasing,
}

impl RootShape {
    pub fn as_str(&self) -> &'static str {
        match self {
            RootShape::Uniform => "uniform",
            RootShape::LinearDecreasing => "linear-decreasing",
        }
    }
}

impl std::str::FromStr for RootShape {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(RootShape::Uniform),
            "linear-decreasing" => Ok(RootShape::LinearDecreasing),
            other => Err(format!("unknown root shape '{other}' (expected uniform or linear-decreasing)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VegetationParams<R> {
    /// Root layer thickness, m.
    pub root_depth: R,
    pub root_shape: RootShape,
    /// Head below which water stress starts, m.
    pub feddes_h_start: R,
    /// Wilting head, m.
    pub feddes_h_wilt: R,
    /// Soil temperature at and below which uptake stops, °C.
    pub t_crit: R,
    /// Width of the thermal ramp above `t_crit`, K.
    pub t_ramp: R,
    /// Canopy light extinction coefficient.
    pub k_ext: R,
    /// Leaf area index per unit stand-density index.
    pub lai_per_density: R,
}

impl<R: Real> Default for VegetationParams<R> {
    fn default() -> Self {
        Self {
            root_depth: R::lit(0.3),
            root_shape: RootShape::LinearDecreasing,
            feddes_h_start: R::lit(-4.0),
            feddes_h_wilt: R::lit(-150.0),
            t_crit: R::zero(),
            t_ramp: R::lit(2.0),
            k_ext: R::lit(0.5),
            lai_per_density: R::lit(1.0),
        }
    }
}

impl<R: Real> VegetationParams<R> {
    pub fn validate(&self) -> Result<()> {
        let fail = |what: &str| Err(Error::Configuration(format!("vegetation violates {what}")));
        if !(self.root_depth > R::zero()) {
            return fail("root_depth > 0");
        }
        if !(self.feddes_h_start < R::zero()) {
            return fail("feddes_h_start < 0");
        }
        if !(self.feddes_h_wilt < self.feddes_h_start) {
            return fail("feddes_h_wilt < feddes_h_start");
        }
        if !(self.t_ramp > R::zero()) {
            return fail("t_ramp > 0");
        }
        if !(self.k_ext > R::zero()) {
            return fail("k_ext > 0");
        }
        if !(self.lai_per_density >= R::zero()) {
            return fail("lai_per_density >= 0");
        }
        if !self.t_crit.is_finite() {
            return fail("finite t_crit");
        }
        Ok(())
    }
}

/// Potential and actual evapotranspiration components for one step, m/s.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EtReport<R> {
    pub pet: R,
    pub potential_transpiration: R,
    pub potential_evaporation: R,
    pub actual_transpiration: R,
    pub actual_evaporation: R,
}

impl<R: Real> EtReport<R> {
    pub fn aet(&self) -> R {
        self.actual_transpiration + self.actual_evaporation
    }
}

/// Splits PET into potential transpiration and soil evaporation with a
/// Beer–Lambert canopy cover `1 - exp(-k_ext · LAI)`.
pub fn partition_pet<R: Real>(pet: R, stand_density: R, veg: &VegetationParams<R>) -> (R, R) {
    let cover = -(-veg.k_ext * veg.lai_per_density * stand_density).exp_m1();
    let tp = cover * pet;
    (tp, pet - tp)
}

/// Fraction of the root system in each cell; sums to one.
pub fn root_fractions<R: Real>(veg: &VegetationParams<R>, mesh: &ColumnMesh<R>) -> Result<Vec<R>> {
    let d = veg.root_depth;
    if d > mesh.depth() {
        return Err(Error::Configuration(format!("root_depth {} exceeds column depth {}", d, mesh.depth())));
    }
    let faces = mesh.z_face();
    let two = R::lit(2.0);
    let mut weights: Vec<R> = faces
        .windows(2)
        .map(|w| {
            let a = w[0].min(d);
            let b = w[1].min(d);
            match veg.root_shape {
                RootShape::Uniform => b - a,
                RootShape::LinearDecreasing => (b - a) - (b * b - a * a) / (two * d),
            }
        })
        .collect();
    let total = weights.iter().fold(R::zero(), |s, &w| s + w);
    let last = weights.iter().rposition(|&w| w > R::zero()).unwrap_or(0);
    let mut prefix = R::zero();
    for (i, w) in weights.iter_mut().enumerate() {
        if i < last {
            *w = *w / total;
            prefix = prefix + *w;
        } else if i == last {
            *w = R::one() - prefix;
        } else {
            *w = R::zero();
        }
    }
    Ok(weights)
}

/// Feddes-type reduction: 1 above `feddes_h_start`, 0 below wilting, linear between.
pub fn water_stress<R: Real>(h: R, veg: &VegetationParams<R>) -> R {
    if h >= veg.feddes_h_start {
        R::one()
    } else if h <= veg.feddes_h_wilt {
        R::zero()
    } else {
        (veg.feddes_h_wilt - h) / (veg.feddes_h_wilt - veg.feddes_h_start)
    }
}

/// Linear ramp from 0 at `t_crit` to 1 at `t_crit + t_ramp`.
pub fn thermal_limiter<R: Real>(t: R, veg: &VegetationParams<R>) -> R {
    if t <= veg.t_crit {
        R::zero()
    } else if t >= veg.t_crit + veg.t_ramp {
        R::one()
    } else {
        (t - veg.t_crit) / veg.t_ramp
    }
}

/// Distributed sink (1/s) and ET report for potential rates `tp`, `ep`.
pub fn build_sink<R: Real>(
    tp: R,
    ep: R,
    state: &ColumnState<R>,
    mesh: &ColumnMesh<R>,
    veg: &VegetationParams<R>,
) -> Result<(Vec<R>, EtReport<R>)> {
    let roots = root_fractions(veg, mesh)?;
    let mut sink = vec![R::zero(); mesh.n_cells()];
    let report = sink_from_roots(tp, ep, &state.h, &state.temperature, mesh, &roots, veg, &mut sink);
    Ok((sink, report))
}

/// [`build_sink`] with precomputed root fractions, writing into `sink`.
#[allow(clippy::too_many_arguments)]
pub fn sink_from_roots<R: Real>(
    tp: R,
    ep: R,
    h: &[R],
    temperature: &[R],
    mesh: &ColumnMesh<R>,
    roots: &[R],
    veg: &VegetationParams<R>,
    sink: &mut [R],
) -> EtReport<R> {
    let dz = mesh.dz();
    let mut transpiration = R::zero();
    for i in 0..sink.len() {
        let uptake = if roots[i] > R::zero() {
            tp * roots[i] * water_stress(h[i], veg) * thermal_limiter(temperature[i], veg)
        } else {
            R::zero()
        };
        sink[i] = uptake / dz[i];
        transpiration = transpiration + uptake;
    }
    let evaporation = ep * water_stress(h[0], veg) * thermal_limiter(temperature[0], veg);
    sink[0] = sink[0] + evaporation / dz[0];
    EtReport {
        pet: tp + ep,
        potential_transpiration: tp,
        potential_evaporation: ep,
        actual_transpiration: transpiration,
        actual_evaporation: evaporation,
    }
}

/// ET report for a sink field built by [`sink_from_roots`] from potentials
/// `tp`, `ep`, recovered from the sink alone.
///
/// Evaporation and top-cell transpiration share the limiter of cell 0, so the
/// top-cell sink splits in the ratio `ep : tp·r₀`.
pub fn split_applied_sink<R: Real>(tp: R, ep: R, roots: &[R], sink: &[R], mesh: &ColumnMesh<R>) -> EtReport<R> {
    let dz = mesh.dz();
    let total = sink.iter().zip(dz).fold(R::zero(), |acc, (s, d)| acc + *s * *d);
    let top_weight = tp * roots[0] + ep;
    let evaporation = if top_weight > R::zero() { sink[0] * dz[0] * (ep / top_weight) } else { R::zero() };
    EtReport {
        pet: tp + ep,
        potential_transpiration: tp,
        potential_evaporation: ep,
        actual_transpiration: (total - evaporation).max(R::zero()),
        actual_evaporation: evaporation,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, sample_profile, SoilLayer, SoilProfile};
    use proptest::prelude::*;

    #[test]
    fn bare_ground_and_closed_canopy() {
        let veg = VegetationParams::<f64>::default();
        assert_eq!(partition_pet(4.0, 0.0, &veg), (0.0, 4.0));
        let (tp, ep) = partition_pet(4.0, 1e4, &veg);
        assert!((tp - 4.0).abs() < 1e-12 && ep.abs() < 1e-12);
    }

    #[test]
    fn uniform_roots_over_four_cells() {
        let mesh = build_mesh(0.2, 4, 1.0).unwrap();
        let veg = VegetationParams::<f64> { root_depth: 0.2, root_shape: RootShape::Uniform, ..Default::default() };
        let r = root_fractions(&veg, &mesh).unwrap();
        for v in &r {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn shallow_roots_in_first_cell() {
        let mesh = build_mesh(1.0, 10, 1.0).unwrap();
        let veg = VegetationParams { root_depth: 0.05, ..Default::default() };
        let r = root_fractions(&veg, &mesh).unwrap();
        assert_eq!(r[0], 1.0);
        assert!(r[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn roots_deeper_than_column_rejected() {
        let mesh = build_mesh(0.5, 10, 1.0).unwrap();
        let veg = VegetationParams { root_depth: 0.6, ..Default::default() };
        assert!(matches!(root_fractions(&veg, &mesh), Err(Error::Configuration(_))));
    }

    #[test]
    fn limiter_endpoints() {
        let veg = VegetationParams::<f64>::default();
        assert_eq!(water_stress(-1.0, &veg), 1.0);
        assert_eq!(water_stress(-200.0, &veg), 0.0);
        assert_eq!(thermal_limiter(-5.0, &veg), 0.0);
        assert_eq!(thermal_limiter(10.0, &veg), 1.0);
    }

    fn column(t: f64, h: f64) -> (ColumnMesh<f64>, ColumnState<f64>) {
        let mesh = build_mesh(1.0, 10, 1.0).unwrap();
        let profile = SoilProfile::uniform(SoilLayer::with_defaults(0.0, 1.0), 1.0).unwrap();
        let cells = sample_profile(&profile, &mesh).unwrap();
        let state = ColumnState::from_head_and_temperature(&cells, vec![h; 10], vec![t; 10]).unwrap();
        (mesh, state)
    }

    #[test]
    fn frozen_root_zone_has_no_uptake() {
        let (mesh, state) = column(-3.0, -1.0);
        let (sink, report) = build_sink(1e-8, 1e-8, &state, &mesh, &VegetationParams::default()).unwrap();
        assert_eq!(report.aet(), 0.0);
        assert!(sink.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn unlimited_uptake_equals_potential() {
        let (mesh, state) = column(15.0, -1.0);
        let (sink, report) = build_sink(3e-8, 1e-8, &state, &mesh, &VegetationParams::default()).unwrap();
        assert!((report.actual_transpiration - 3e-8).abs() < 1e-20);
        assert_eq!(report.actual_evaporation, 1e-8);
        let integrated: f64 = sink.iter().zip(mesh.dz()).map(|(s, d)| s * d).sum();
        assert!((integrated - 4e-8).abs() < 1e-20);
        // sink confined to the root zone (0.3 m -> first three cells)
        assert!(sink[3..].iter().all(|&s| s == 0.0));
    }

    #[test]
    fn applied_sink_split_recovers_components() {
        let (mesh, mut state) = column(15.0, -1.0);
        state.temperature[0] = 1.0;
        state.h[1] = -40.0;
        let veg = VegetationParams::default();
        let roots = root_fractions(&veg, &mesh).unwrap();
        let (sink, direct) = build_sink(3e-8, 1e-8, &state, &mesh, &veg).unwrap();
        let split = split_applied_sink(3e-8, 1e-8, &roots, &sink, &mesh);
        assert!((split.actual_evaporation - direct.actual_evaporation).abs() < 1e-22);
        assert!((split.actual_transpiration - direct.actual_transpiration).abs() < 1e-22);
    }

    proptest! {
        #[test]
        fn root_fractions_sum_to_one(n in 2usize..300, grading in 0.2f64..5.0, depth_frac in 0.001f64..=1.0, uniform in any::<bool>()) {
            let mesh = build_mesh(2.0, n, grading).unwrap();
            let shape = if uniform { RootShape::Uniform } else { RootShape::LinearDecreasing };
            let veg = VegetationParams { root_depth: 2.0 * depth_frac, root_shape: shape, ..Default::default() };
            let r = root_fractions(&veg, &mesh).unwrap();
            let total: f64 = r.iter().sum();
            prop_assert_eq!(total, 1.0);
            prop_assert!(r.iter().all(|&v| v >= 0.0));
        }

        #[test]
        fn stress_functions_in_unit_interval(h in -1000.0f64..10.0, t in -30.0f64..30.0) {
            let veg = VegetationParams::<f64>::default();
            let a = water_stress(h, &veg);
            let b = thermal_limiter(t, &veg);
            prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
        }

        #[test]
        fn sink_monotone_in_limiters(t1 in 0.0f64..3.0, dt1 in 0.0f64..2.0, h1 in -160.0f64..0.0, dh in 0.0f64..50.0) {
            let mesh = build_mesh(0.4, 4, 1.0).unwrap();
            let veg = VegetationParams { root_depth: 0.4, ..Default::default() };
            let roots = root_fractions(&veg, &mesh).unwrap();
            let mut sink = vec![0.0; 4];
            let base = sink_from_roots(1e-7, 0.0, &[h1; 4], &[t1; 4], &mesh, &roots, &veg, &mut sink);
            let more = sink_from_roots(1e-7, 0.0, &[h1 + dh; 4], &[t1 + dt1; 4], &mesh, &roots, &veg, &mut sink);
            prop_assert!(more.actual_transpiration >= base.actual_transpiration);
            prop_assert!(base.actual_transpiration <= base.potential_transpiration * (1.0 + 1e-12));
        }
    }
}
