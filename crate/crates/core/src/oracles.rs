//! Analytical reference solutions used to verify the solvers.
//!
//! * `erf`/`erfc`: power series `erf(x) = 2/√π · e^(-x²) Σ 2^k x^(2k+1) / (2k+1)!!`
//!   (all terms positive) for `|x| < 3`, and the classical continued fraction
//!   for `erfc` beyond, evaluated bottom-up with 80 terms. Absolute accuracy is
//!   better than 1e-15 in double precision.
//! * One-phase Stefan problem: a column initially at the freezing point with the
//!   surface held at `Ts < 0`. The front sits at `X(t) = 2λ√(κ_f t)` where `λ`
//!   solves `λ e^(λ²) erf(λ) = St/√π`.
//! * Semi-infinite conduction after a surface step: `T = Ts·erfc(z / 2√(κt))`.
//! * Hydrostatic equilibrium: `h(z) = h_surface + z` (depth positive downward).

use crate::constitutive::{hydraulic_conductivity, thermal_conductivity, volumetric_heat_capacity, water_retention};
use crate::constitutive::{LATENT_HEAT_FUSION, RHO_WATER};
use crate::error::{Error, Result};
use crate::mesh::SoilLayer;
use crate::real::Real;

const SERIES_LIMIT: f64 = 3.0;
const CONTINUED_FRACTION_TERMS: usize = 80;

/// Error function.
pub fn erf<R: Real>(x: R) -> R {
    if x < R::zero() {
        return -erf(-x);
    }
    if x < R::lit(SERIES_LIMIT) {
        erf_series(x)
    } else {
        R::one() - erfc_continued_fraction(x)
    }
}

/// Complementary error function.
pub fn erfc<R: Real>(x: R) -> R {
    if x < R::zero() {
        return R::lit(2.0) - erfc(-x);
    }
    if x < R::lit(SERIES_LIMIT) {
        R::one() - erf_series(x)
    } else {
        erfc_continued_fraction(x)
    }
}

fn erf_series<R: Real>(x: R) -> R {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut k = 0usize;
    let eps = R::epsilon() * R::lit(0.25);
    while term > eps * sum {
        k += 1;
        term = term * R::lit(2.0) * x2 / R::from_usize_lossy(2 * k + 1);
        sum = sum + term;
        if k > 500 {
            break;
        }
    }
    R::FRAC_2_SQRT_PI() * (-x2).exp() * sum
}

fn erfc_continued_fraction<R: Real>(x: R) -> R {
    // erfc(x) = e^(-x²)/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    let half = R::lit(0.5);
    let mut f = x;
    for k in (1..=CONTINUED_FRACTION_TERMS).rev() {
        f = x + R::from_usize_lossy(k) * half / f;
    }
    (-x * x).exp() * (R::FRAC_2_SQRT_PI() * R::lit(0.5)) / f
}

/// One-phase Stefan problem parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StefanProblem<R> {
    /// Surface temperature, °C (below freezing).
    pub ts: R,
    /// Thermal diffusivity of the frozen zone, m²/s.
    pub kappa_f: R,
    pub stefan_number: R,
}

impl<R: Real> StefanProblem<R> {
    pub fn new(ts: R, kappa_f: R, stefan_number: R) -> Result<Self> {
        if !(ts < R::zero()) {
            return Err(Error::InvalidArgument("Stefan surface temperature must be below 0 °C".into()));
        }
        if !(kappa_f > R::zero()) || !(stefan_number > R::zero()) {
            return Err(Error::InvalidArgument("Stefan diffusivity and Stefan number must be positive".into()));
        }
        Ok(Self { ts, kappa_f, stefan_number })
    }

    /// Maps a uniform soil layer holding `theta_total` of water onto the
    /// one-phase problem: the frozen zone keeps `θ_r` liquid and `θ_total - θ_r`
    /// ice, `κ_f = k_f / C_f` with the frozen conductivity and heat capacity, and
    /// `St = C_f |Ts| / (L_f ρ_w (θ_total - θ_r))`.
    pub fn from_layer(layer: &SoilLayer<R>, theta_total: R, ts: R) -> Result<Self> {
        let ice = theta_total - layer.theta_r;
        let c_f = volumetric_heat_capacity(layer.theta_r, ice, layer);
        let k_f = thermal_conductivity(layer.theta_r, ice, layer);
        let latent = R::lit(LATENT_HEAT_FUSION * RHO_WATER) * ice;
        Self::new(ts, k_f / c_f, c_f * ts.abs() / latent)
    }

    pub fn lambda(&self) -> R {
        stefan_lambda(self.stefan_number)
    }

    pub fn front(&self, t: R) -> R {
        stefan_front(self, t)
    }
}

/// Root of `λ e^(λ²) erf(λ) = St/√π` by bisection on `[1e-8, 5]`, refined to
/// the resolution of the scalar type.
pub fn stefan_lambda<R: Real>(st: R) -> R {
    let target = st * (R::FRAC_2_SQRT_PI() * R::lit(0.5));
    let f = |l: R| l * (l * l).exp() * erf(l) - target;
    let mut lo = R::lit(1e-8);
    let mut hi = R::lit(5.0);
    for _ in 0..400 {
        let mid = (lo + hi) * R::lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > R::zero() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    if f(hi).abs() < f(lo).abs() {
        hi
    } else {
        lo
    }
}

/// Front depth `2λ√(κ_f t)`, m.
pub fn stefan_front<R: Real>(problem: &StefanProblem<R>, t: R) -> R {
    R::lit(2.0) * problem.lambda() * (problem.kappa_f * t.max(R::zero())).sqrt()
}

/// Semi-infinite conduction profile after a surface step to `ts` from 0 °C.
pub fn erfc_profile<R: Real>(ts: R, kappa: R, z: R, t: R) -> R {
    ts * erfc(z / (R::lit(2.0) * (kappa * t).sqrt()))
}

/// Pressure head at depth `z` in hydrostatic equilibrium.
pub fn hydrostatic_head<R: Real>(h_surface: R, z: R) -> R {
    h_surface + z
}

/// Darcy flux under a unit hydraulic gradient at uniform head `h`, m/s.
pub fn unit_gradient_flux<R: Real>(h: R, layer: &SoilLayer<R>) -> R {
    let theta = water_retention(h, layer);
    let se = (theta - layer.theta_r) / (layer.theta_s - layer.theta_r);
    hydraulic_conductivity(se, theta, R::zero(), layer)
}
