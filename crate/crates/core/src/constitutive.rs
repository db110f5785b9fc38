//! Closed-form constitutive laws: van Genuchten–Mualem hydraulics with ice
//! impedance, an exponential soil freezing curve, and the thermal properties
//! derived from the phase partition.
//!
//! All functions are pure.

use crate::error::{Error, Result};
use crate::mesh::SoilLayer;
use crate::real::Real;

/// Latent heat of fusion of water, J/kg.
pub const LATENT_HEAT_FUSION: f64 = 3.34e5;
/// Density of liquid water, kg/m³. Also used for ice in mass accounting.
pub const RHO_WATER: f64 = 1000.0;
/// Density of ice, kg/m³ (heat capacity only).
pub const RHO_ICE: f64 = 917.0;
/// Specific heat of liquid water, J/(kg·K).
pub const C_WATER: f64 = 4182.0;
/// Specific heat of ice, J/(kg·K).
pub const C_ICE: f64 = 2108.0;
/// Thermal conductivity of pore air, W/(m·K).
pub const K_AIR: f64 = 0.025;

/// Relative floor applied to the hydraulic conductivity so it stays strictly positive.
const K_FLOOR: f64 = 1e-30;

/// Liquid/ice split of the pore water at a given temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreezeThawPartition<R> {
    pub theta_liq: R,
    pub theta_ice: R,
    /// Sensitivity of liquid content to temperature, 1/K.
    pub d_theta_liq_dt: R,
}

/// van Genuchten relative saturation `[1 + (α|h|)^n]^(-m)` and its derivative
/// with respect to `h`.
pub fn relative_saturation<R: Real>(h: R, layer: &SoilLayer<R>) -> (R, R) {
    if h >= R::zero() {
        return (R::one(), R::zero());
    }
    let n = layer.vg_n;
    let m = layer.vg_m();
    let ah = layer.vg_alpha * h.abs();
    let y = ah.powf(n);
    let base = R::one() + y;
    let s = base.powf(-m);
    // dS/dh = m n α (α|h|)^(n-1) (1 + y)^(-m-1), positive for h < 0
    let ds = m * n * layer.vg_alpha * ah.powf(n - R::one()) * base.powf(-m - R::one());
    (s, ds)
}

/// Volumetric water content at pressure head `h`.
pub fn water_retention<R: Real>(h: R, layer: &SoilLayer<R>) -> R {
    let (s, _) = relative_saturation(h, layer);
    layer.theta_r + (layer.theta_s - layer.theta_r) * s
}

/// Water content and specific moisture capacity `dθ/dh`, 1/m.
pub fn retention_with_capacity<R: Real>(h: R, layer: &SoilLayer<R>) -> (R, R) {
    let (s, ds) = relative_saturation(h, layer);
    let span = layer.theta_s - layer.theta_r;
    (layer.theta_r + span * s, span * ds)
}

/// `Se = (θ - θ_r) / (θ_s - θ_r)`.
pub fn effective_saturation<R: Real>(theta: R, layer: &SoilLayer<R>) -> Result<R> {
    if !(theta >= layer.theta_r && theta <= layer.theta_s) {
        return Err(Error::Domain(format!("water content {theta} outside [{}, {}]", layer.theta_r, layer.theta_s)));
    }
    Ok(((theta - layer.theta_r) / (layer.theta_s - layer.theta_r)).min(R::one()))
}

/// Ice impedance factor `10^(-Ω·Q)` with `Q` the ice fraction of the pore water.
pub fn impedance_factor<R: Real>(theta_liq: R, theta_ice: R, layer: &SoilLayer<R>) -> R {
    let total = theta_ice + theta_liq;
    let q = if total > R::zero() { theta_ice / total } else { R::zero() };
    R::lit(10.0).powf(-layer.impedance_omega * q)
}

/// Mualem conductivity with ice impedance, m/s.
pub fn hydraulic_conductivity<R: Real>(se: R, theta_liq: R, theta_ice: R, layer: &SoilLayer<R>) -> R {
    let se = se.max(R::zero()).min(R::one());
    let m = layer.vg_m();
    // 1 - (1 - Se^(1/m))^m, written to avoid cancellation at small Se
    let x = se.powf(R::one() / m);
    let bracket = if x < R::one() { -(m * (-x).ln_1p()).exp_m1() } else { R::one() };
    let relative = se.sqrt() * bracket * bracket;
    let k = layer.k_sat * relative * impedance_factor(theta_liq, theta_ice, layer);
    k.max(layer.k_sat * R::lit(K_FLOOR))
}

/// Conductivity of a cell from its stored liquid and ice contents.
pub fn cell_conductivity<R: Real>(theta_liq: R, theta_ice: R, layer: &SoilLayer<R>) -> R {
    let se = ((theta_liq - layer.theta_r) / (layer.theta_s - layer.theta_r)).max(R::zero()).min(R::one());
    hydraulic_conductivity(se, theta_liq, theta_ice, layer)
}

/// Exponential soil freezing characteristic.
pub fn freezing_partition<R: Real>(t: R, theta_total: R, layer: &SoilLayer<R>) -> FreezeThawPartition<R> {
    if t >= R::zero() {
        return FreezeThawPartition { theta_liq: theta_total, theta_ice: R::zero(), d_theta_liq_dt: R::zero() };
    }
    let mobile = (theta_total - layer.theta_r).max(R::zero());
    let e = (t / layer.freeze_w).exp();
    let theta_liq = (layer.theta_r + mobile * e).min(theta_total);
    FreezeThawPartition { theta_liq, theta_ice: theta_total - theta_liq, d_theta_liq_dt: mobile * e / layer.freeze_w }
}

/// Heat capacity of the bulk medium, J/(m³·K), excluding latent effects.
pub fn volumetric_heat_capacity<R: Real>(theta_liq: R, theta_ice: R, layer: &SoilLayer<R>) -> R {
    (R::one() - layer.theta_s) * layer.c_solid
        + theta_liq * R::lit(C_WATER * RHO_WATER)
        + theta_ice * R::lit(C_ICE * RHO_ICE)
}

/// `C_vol + L_f ρ_w dθ_liq/dT`, J/(m³·K).
pub fn apparent_heat_capacity<R: Real>(t: R, theta_total: R, layer: &SoilLayer<R>) -> R {
    let p = freezing_partition(t, theta_total, layer);
    volumetric_heat_capacity(p.theta_liq, p.theta_ice, layer)
        + R::lit(LATENT_HEAT_FUSION * RHO_WATER) * p.d_theta_liq_dt
}

/// Volumetric enthalpy, J/m³, relative to the fully liquid medium at 0 °C.
///
/// The latent part is `-L_f ρ_w θ_ice`; the sensible part integrates
/// `C_vol` along the freezing curve, so `dE/dT` equals
/// [`apparent_heat_capacity`].
pub fn enthalpy<R: Real>(t: R, theta_total: R, layer: &SoilLayer<R>) -> R {
    let c_matrix = (R::one() - layer.theta_s) * layer.c_solid;
    let cw = R::lit(C_WATER * RHO_WATER);
    if t >= R::zero() {
        return (c_matrix + theta_total * cw) * t;
    }
    let ci = R::lit(C_ICE * RHO_ICE);
    let lf = R::lit(LATENT_HEAT_FUSION * RHO_WATER);
    let w = layer.freeze_w;
    let mobile = (theta_total - layer.theta_r).max(R::zero());
    let em1 = (t / w).exp_m1();
    let liq_integral = layer.theta_r.min(theta_total) * t + mobile * w * em1;
    let ice_integral = theta_total * t - liq_integral;
    c_matrix * t + cw * liq_integral + ci * ice_integral + lf * mobile * em1
}

/// Geometric-mean mixing of phase conductivities, W/(m·K).
pub fn thermal_conductivity<R: Real>(theta_liq: R, theta_ice: R, layer: &SoilLayer<R>) -> R {
    let air = (layer.theta_s - theta_liq - theta_ice).max(R::zero());
    layer.k_solid.powf(R::one() - layer.theta_s)
        * layer.k_water.powf(theta_liq)
        * layer.k_ice.powf(theta_ice)
        * R::lit(K_AIR).powf(air)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn layer() -> SoilLayer<f64> {
        let mut l = SoilLayer::with_defaults(0.0, 1.0);
        l.theta_r = 0.05;
        l.theta_s = 0.45;
        l.vg_alpha = 1.0;
        l.vg_n = 2.0;
        l.freeze_w = 1.0;
        l
    }

    #[test]
    fn retention_saturated_and_asymptote() {
        let l = layer();
        assert_eq!(water_retention(0.0, &l), 0.45);
        assert_eq!(water_retention(3.0, &l), 0.45);
        assert!((water_retention(-1e6, &l) - 0.05).abs() < 1e-6);
    }

    #[test]
    fn effective_saturation_bounds_and_domain() {
        let l = layer();
        assert_eq!(effective_saturation(0.45, &l).unwrap(), 1.0);
        assert_eq!(effective_saturation(0.05, &l).unwrap(), 0.0);
        assert!(matches!(effective_saturation(0.5, &l), Err(Error::Domain(_))));
        assert!(matches!(effective_saturation(0.01, &l), Err(Error::Domain(_))));
    }

    #[test]
    fn conductivity_at_saturation_is_ksat() {
        let l = layer();
        assert_eq!(hydraulic_conductivity(1.0, 0.45, 0.0, &l), l.k_sat);
    }

    #[test]
    fn impedance_half_ice() {
        let l = layer();
        let free = hydraulic_conductivity(0.5, 0.2, 0.0, &l);
        let iced = hydraulic_conductivity(0.5, 0.2, 0.2, &l);
        assert_relative_eq!(iced / free, 10f64.powf(-3.5), max_relative = 1e-12);
    }

    #[test]
    fn partition_unfrozen_and_deep_frozen() {
        let l = layer();
        let p = freezing_partition(0.0, 0.33284, &l);
        assert_eq!((p.theta_liq, p.theta_ice, p.d_theta_liq_dt), (0.33284, 0.0, 0.0));
        let cold = freezing_partition(-200.0, 0.33284, &l);
        assert!((cold.theta_liq - l.theta_r).abs() < 1e-12);
    }

    #[test]
    fn latent_term_vanishes_above_zero_and_when_fully_frozen() {
        let l = layer();
        let p = freezing_partition(5.0, 0.3, &l);
        assert_eq!(apparent_heat_capacity(5.0, 0.3, &l), volumetric_heat_capacity(p.theta_liq, p.theta_ice, &l));
        let deep = freezing_partition(-60.0, 0.3, &l);
        let latent =
            apparent_heat_capacity(-60.0, 0.3, &l) - volumetric_heat_capacity(deep.theta_liq, deep.theta_ice, &l);
        assert!(latent < 1e-12 * LATENT_HEAT_FUSION * RHO_WATER);
    }

    #[test]
    fn conductivity_mixing_limits() {
        let mut l = layer();
        l.k_solid = 0.57;
        l.k_water = 0.57;
        assert_relative_eq!(thermal_conductivity(l.theta_s, 0.0, &l), 0.57, max_relative = 1e-14);
        let dry = thermal_conductivity(0.0, 0.0, &l);
        assert_relative_eq!(dry, 0.57f64.powf(1.0 - l.theta_s) * K_AIR.powf(l.theta_s), max_relative = 1e-14);
    }

    #[test]
    fn enthalpy_is_continuous_at_freezing() {
        let l = layer();
        let below = enthalpy(-1e-12, 0.3, &l);
        let above = enthalpy(1e-12, 0.3, &l);
        assert!((above - below).abs() < 1e-3);
        assert_eq!(enthalpy(0.0, 0.3, &l), 0.0);
    }

    #[test]
    fn enthalpy_derivative_is_apparent_capacity() {
        let l = layer();
        for &t in &[-5.0, -1.0, -0.1, 2.0] {
            let h = 1e-5;
            let fd = (enthalpy(t + h, 0.3, &l) - enthalpy(t - h, 0.3, &l)) / (2.0 * h);
            assert_relative_eq!(fd, apparent_heat_capacity(t, 0.3, &l), max_relative = 1e-6);
        }
    }

    #[test]
    fn pure_functions_are_bitwise_repeatable() {
        let l = layer();
        let a = (water_retention(-0.37, &l), hydraulic_conductivity(0.4, 0.2, 0.1, &l), enthalpy(-0.3, 0.3, &l));
        let b = (water_retention(-0.37, &l), hydraulic_conductivity(0.4, 0.2, 0.1, &l), enthalpy(-0.3, 0.3, &l));
        assert_eq!(a.0.to_bits(), b.0.to_bits());
        assert_eq!(a.1.to_bits(), b.1.to_bits());
        assert_eq!(a.2.to_bits(), b.2.to_bits());
    }

    #[test]
    fn retention_monotone_and_continuous_on_grid() {
        let l = layer();
        let n = 10_000;
        // log-spaced suction plus linear near zero to cover [-1e6, 10]
        let mut hs: Vec<f64> = (0..n).map(|i| -(10f64.powf(6.0 - 9.0 * i as f64 / (n - 1) as f64))).collect();
        hs.extend((0..=100).map(|i| i as f64 * 0.1));
        let mut prev = f64::NEG_INFINITY;
        let mut prev_h = f64::NEG_INFINITY;
        for &h in &hs {
            let th = water_retention(h, &l);
            assert!(th >= prev, "not monotone at h = {h}");
            if prev_h.is_finite() && (h - prev_h).abs() < 1e-2 {
                assert!(th - prev < 1e-2, "jump at h = {h}");
            }
            prev = th;
            prev_h = h;
        }
    }

    #[test]
    fn freezing_slope_matches_finite_differences() {
        let l = layer();
        for &t in &[-5.0, -1.0, -0.1] {
            let step = 1e-6;
            let up = freezing_partition(t + step, 0.3, &l).theta_liq;
            let down = freezing_partition(t - step, 0.3, &l).theta_liq;
            let fd = (up - down) / (2.0 * step);
            let analytic = freezing_partition(t, 0.3, &l).d_theta_liq_dt;
            assert!(((fd - analytic) / analytic).abs() < 1e-4);
        }
    }

    proptest! {
        #[test]
        fn partition_conserves_water(t in -50.0f64..20.0, frac in 0.0f64..=1.0) {
            let l = layer();
            let total = l.theta_r + frac * (l.theta_s - l.theta_r);
            let p = freezing_partition(t, total, &l);
            prop_assert!((p.theta_liq + p.theta_ice - total).abs() <= 2.0 * f64::EPSILON * total);
            prop_assert!(p.theta_ice >= 0.0 && p.theta_liq >= l.theta_r && p.d_theta_liq_dt >= 0.0);
        }

        #[test]
        fn conductivity_bounded_and_decreasing_in_ice(se in 0.01f64..=1.0, liq in 0.06f64..0.3, ice in 0.0f64..0.1, extra in 0.001f64..0.05) {
            let l = layer();
            let k0 = hydraulic_conductivity(se, liq, ice, &l);
            let k1 = hydraulic_conductivity(se, liq, ice + extra, &l);
            prop_assert!(k0 <= l.k_sat && k0 > 0.0);
            prop_assert!(k1 < k0);
        }

        #[test]
        fn thermal_conductivity_within_component_bounds(liq in 0.0f64..0.45, ice_frac in 0.0f64..1.0) {
            let l = layer();
            let ice = (l.theta_s - liq) * ice_frac;
            let k = thermal_conductivity(liq, ice, &l);
            let lo = [l.k_solid, l.k_water, l.k_ice, K_AIR].into_iter().fold(f64::INFINITY, f64::min);
            let hi = [l.k_solid, l.k_water, l.k_ice, K_AIR].into_iter().fold(0.0, f64::max);
            prop_assert!(k >= lo * (1.0 - 1e-12) && k <= hi * (1.0 + 1e-12));
        }
    }
}
