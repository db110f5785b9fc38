//! Vertical column discretization and the state evolved on it.
//!
//! Depth is positive downward with the ground surface at `z = 0`. Temperatures
//! are in °C with pure-water freezing at 0 °C.

use crate::constitutive;
use crate::error::{Error, Result};
use crate::real::Real;

/// Cell-centered finite-volume mesh of a soil column.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnMesh<R> {
    z_face: Vec<R>,
    z_center: Vec<R>,
    dz: Vec<R>,
}

impl<R: Real> ColumnMesh<R> {
    /// Builds a mesh from explicit face depths (first face at 0, strictly increasing).
    pub fn from_faces(z_face: Vec<R>) -> Result<Self> {
        if z_face.len() < 3 {
            return Err(Error::InvalidArgument("a column needs at least 2 cells".into()));
        }
        if z_face[0] != R::zero() {
            return Err(Error::InvalidArgument("first face must be at the ground surface (z = 0)".into()));
        }
        if z_face.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("face depths must be strictly increasing".into()));
        }
        let half = R::lit(0.5);
        let dz = z_face.windows(2).map(|w| w[1] - w[0]).collect();
        let z_center = z_face.windows(2).map(|w| (w[0] + w[1]) * half).collect();
        Ok(Self { z_face, z_center, dz })
    }

    pub fn n_cells(&self) -> usize {
        self.dz.len()
    }

    pub fn z_face(&self) -> &[R] {
        &self.z_face
    }

    pub fn z_center(&self) -> &[R] {
        &self.z_center
    }

    pub fn dz(&self) -> &[R] {
        &self.dz
    }

    pub fn depth(&self) -> R {
        *self.z_face.last().expect("mesh has faces")
    }

    /// Distance between the centers of cells `i` and `i + 1`.
    pub fn center_spacing(&self, i: usize) -> R {
        self.z_center[i + 1] - self.z_center[i]
    }
}

/// Geometrically graded mesh over `[0, depth]`.
///
/// `grading` is the ratio of the bottom cell thickness to the top cell
/// thickness; `1` gives a uniform mesh.
pub fn build_mesh<R: Real>(depth: R, n_cells: usize, grading: R) -> Result<ColumnMesh<R>> {
    if !(depth > R::zero()) || !depth.is_finite() {
        return Err(Error::InvalidArgument(format!("column depth must be positive, got {depth}")));
    }
    if n_cells < 2 {
        return Err(Error::InvalidArgument(format!("n_cells must be at least 2, got {n_cells}")));
    }
    if !(grading > R::zero()) || !grading.is_finite() {
        return Err(Error::InvalidArgument(format!("grading must be positive, got {grading}")));
    }

    let mut faces = Vec::with_capacity(n_cells + 1);
    faces.push(R::zero());
    if grading == R::one() {
        let n = R::from_usize_lossy(n_cells);
        faces.extend((1..n_cells).map(|i| R::from_usize_lossy(i) * depth / n));
    } else {
        let ratio = grading.powf(R::one() / R::from_usize_lossy(n_cells - 1));
        let weights: Vec<R> = (0..n_cells).map(|i| ratio.powi(i as i32)).collect();
        let total = weights.iter().fold(R::zero(), |a, &w| a + w);
        let mut acc = R::zero();
        for w in &weights[..n_cells - 1] {
            acc = acc + *w;
            faces.push(acc / total * depth);
        }
    }
    faces.push(depth);
    ColumnMesh::from_faces(faces)
}

/// Hydraulic, thermal and freezing parameters of one soil horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoilLayer<R> {
    pub z_top: R,
    pub z_bottom: R,
    /// Saturated hydraulic conductivity, m/s.
    pub k_sat: R,
    pub theta_r: R,
    pub theta_s: R,
    /// van Genuchten alpha, 1/m.
    pub vg_alpha: R,
    pub vg_n: R,
    /// Volumetric heat capacity of the dry matrix, J/(m³·K).
    pub c_solid: R,
    /// Thermal conductivities of the solid, liquid water and ice phases, W/(m·K).
    pub k_solid: R,
    pub k_water: R,
    pub k_ice: R,
    /// Width of the exponential freezing curve, K.
    pub freeze_w: R,
    pub impedance_omega: R,
}

impl<R: Real> SoilLayer<R> {
    /// Layer with loam-like defaults spanning `[z_top, z_bottom]`.
    pub fn with_defaults(z_top: R, z_bottom: R) -> Self {
        Self {
            z_top,
            z_bottom,
            k_sat: R::lit(1e-5),
            theta_r: R::lit(0.05),
            theta_s: R::lit(0.45),
            vg_alpha: R::lit(1.0),
            vg_n: R::lit(2.0),
            c_solid: R::lit(2.0e6),
            k_solid: R::lit(2.0),
            k_water: R::lit(0.57),
            k_ice: R::lit(2.2),
            freeze_w: R::lit(0.5),
            impedance_omega: R::lit(7.0),
        }
    }

    /// Van Genuchten `m = 1 - 1/n`.
    pub fn vg_m(&self) -> R {
        R::one() - R::one() / self.vg_n
    }

    /// Checks the parameter invariants; the error names the violated condition.
    pub fn validate(&self) -> Result<()> {
        let zero = R::zero();
        let fail = |what: &str| Err(Error::Configuration(format!("soil layer violates {what}")));
        let values = [
            self.z_top,
            self.z_bottom,
            self.k_sat,
            self.theta_r,
            self.theta_s,
            self.vg_alpha,
            self.vg_n,
            self.c_solid,
            self.k_solid,
            self.k_water,
            self.k_ice,
            self.freeze_w,
            self.impedance_omega,
        ];
        if values.iter().any(|v| !v.is_finite()) {
            return fail("finite parameter values");
        }
        if !(self.z_bottom > self.z_top) {
            return fail("z_bottom > z_top");
        }
        if !(self.theta_r >= zero) {
            return fail("theta_r >= 0");
        }
        if !(self.theta_r < self.theta_s) {
            return fail("theta_r < theta_s");
        }
        if !(self.theta_s <= R::one()) {
            return fail("theta_s <= 1");
        }
        if !(self.vg_n > R::one()) {
            return fail("vg_n > 1");
        }
        if !(self.vg_alpha > zero) {
            return fail("vg_alpha > 0");
        }
        if !(self.k_sat > zero) {
            return fail("k_sat > 0");
        }
        if !(self.freeze_w > zero) {
            return fail("freeze_w > 0");
        }
        if !(self.impedance_omega >= zero) {
            return fail("impedance_omega >= 0");
        }
        if !(self.c_solid > zero && self.k_solid > zero && self.k_water > zero && self.k_ice > zero) {
            return fail("thermal properties > 0");
        }
        Ok(())
    }
}

/// Ordered, contiguous stack of soil layers starting at the surface.
#[derive(Debug, Clone, PartialEq)]
pub struct SoilProfile<R> {
    layers: Vec<SoilLayer<R>>,
}

impl<R: Real> SoilProfile<R> {
    pub fn new(layers: Vec<SoilLayer<R>>) -> Result<Self> {
        let Some(first) = layers.first() else {
            return Err(Error::Configuration("soil profile has no layers".into()));
        };
        if first.z_top != R::zero() {
            return Err(Error::Configuration(format!("first layer must start at z = 0, starts at {}", first.z_top)));
        }
        for (i, layer) in layers.iter().enumerate() {
            layer.validate().map_err(|e| Error::Configuration(format!("layer {}: {}", i + 1, strip(e))))?;
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[1].z_top != pair[0].z_bottom {
                return Err(Error::Configuration(format!(
                    "layers {} and {} are not contiguous ({} != {})",
                    i + 1,
                    i + 2,
                    pair[0].z_bottom,
                    pair[1].z_top
                )));
            }
        }
        Ok(Self { layers })
    }

    /// Single layer covering `[0, depth]`.
    pub fn uniform(layer: SoilLayer<R>, depth: R) -> Result<Self> {
        Self::new(vec![SoilLayer { z_top: R::zero(), z_bottom: depth, ..layer }])
    }

    pub fn layers(&self) -> &[SoilLayer<R>] {
        &self.layers
    }

    pub fn depth(&self) -> R {
        self.layers.last().expect("validated non-empty").z_bottom
    }
}

fn strip(e: Error) -> String {
    match e {
        Error::Configuration(m) => m,
        other => other.to_string(),
    }
}

/// Assigns each cell the parameters of the layer containing its center.
///
/// A center lying exactly on a layer boundary belongs to the upper layer.
pub fn sample_profile<R: Real>(profile: &SoilProfile<R>, mesh: &ColumnMesh<R>) -> Result<Vec<SoilLayer<R>>> {
    if profile.depth() < mesh.depth() {
        return Err(Error::Configuration(format!(
            "soil profile does not cover the column: depth range [{}, {}] m has no layer",
            profile.depth(),
            mesh.depth()
        )));
    }
    let layers = profile.layers();
    let mut cells = Vec::with_capacity(mesh.n_cells());
    let mut k = 0;
    for &zc in mesh.z_center() {
        while zc > layers[k].z_bottom {
            k += 1;
        }
        cells.push(layers[k]);
    }
    Ok(cells)
}

/// Evolving physical state of one column.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnState<R> {
    /// Pressure head, m.
    pub h: Vec<R>,
    /// Temperature, °C.
    pub temperature: Vec<R>,
    pub theta_liq: Vec<R>,
    pub theta_ice: Vec<R>,
    /// Simulation time, s.
    pub time: R,
}

impl<R: Real> ColumnState<R> {
    /// Consistent state from head and temperature fields: the retention curve
    /// gives the total water content, which the freezing curve then splits
    /// into liquid and ice.
    pub fn from_head_and_temperature(cells: &[SoilLayer<R>], h: Vec<R>, temperature: Vec<R>) -> Result<Self> {
        let n = cells.len();
        if h.len() != n || temperature.len() != n {
            return Err(Error::InvalidArgument("initial fields must have one value per cell".into()));
        }
        if h.iter().chain(&temperature).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("initial fields must be finite".into()));
        }
        let mut state =
            Self { h, temperature, theta_liq: vec![R::zero(); n], theta_ice: vec![R::zero(); n], time: R::zero() };
        for (i, layer) in cells.iter().enumerate() {
            let total = constitutive::water_retention(state.h[i], layer);
            let part = constitutive::freezing_partition(state.temperature[i], total, layer);
            state.theta_liq[i] = part.theta_liq;
            state.theta_ice[i] = part.theta_ice;
        }
        Ok(state)
    }

    pub fn n_cells(&self) -> usize {
        self.h.len()
    }

    pub fn theta_total(&self, i: usize) -> R {
        self.theta_liq[i] + self.theta_ice[i]
    }

    /// Water stored in the column, m of water.
    pub fn water_storage(&self, mesh: &ColumnMesh<R>) -> R {
        (0..self.n_cells()).fold(R::zero(), |acc, i| acc + self.theta_total(i) * mesh.dz()[i])
    }

    /// Index of the first non-finite entry of any field.
    pub fn first_non_finite(&self) -> Option<usize> {
        (0..self.n_cells()).find(|&i| {
            !(self.h[i].is_finite()
                && self.temperature[i].is_finite()
                && self.theta_liq[i].is_finite()
                && self.theta_ice[i].is_finite())
        })
    }
}
