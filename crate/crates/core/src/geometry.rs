//! Imaging geometry and spatial-variant point-spread functions.
//!
//! Coordinates are in metres with the array center at the origin. The rail
//! runs along the azimuth axis; the range axis points away from the rail
//! towards the scene. A target at `(azimuth, range)` is seen from the array
//! center along the line of sight `(sin θ, cos θ)`, where θ is the
//! observation angle measured from boresight.
//!
//! The degradation operation for a target is the 2D sinc obtained from the
//! inverse Fourier transform of a rectangular spatial spectrum. The spectrum
//! is aligned with the line of sight, so the range sidelobes follow the
//! observation direction and the azimuth sidelobes lie across it. The range
//! resolution is fixed by the transmit bandwidth and the azimuth resolution
//! grows linearly with slant range.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Regular image grid. Row index is azimuth, column index is range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_azimuth: usize,
    pub n_range: usize,
    pub spacing_azimuth_m: f64,
    pub spacing_range_m: f64,
    pub origin_azimuth_m: f64,
    pub origin_range_m: f64,
}

impl GridSpec {
    /// Grid whose node `(n_azimuth / 2, n_range / 2)` sits at azimuth 0 and
    /// range `center_range_m`.
    pub fn centered(
        n_azimuth: usize,
        n_range: usize,
        spacing_azimuth_m: f64,
        spacing_range_m: f64,
        center_range_m: f64,
    ) -> Self {
        Self {
            n_azimuth,
            n_range,
            spacing_azimuth_m,
            spacing_range_m,
            origin_azimuth_m: -((n_azimuth / 2) as f64) * spacing_azimuth_m,
            origin_range_m: center_range_m - (n_range / 2) as f64 * spacing_range_m,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_azimuth == 0 || self.n_range == 0 {
            return domain("grid dimensions must be at least 1");
        }
        if !(self.spacing_azimuth_m > 0.0 && self.spacing_range_m > 0.0)
            || !self.spacing_azimuth_m.is_finite()
            || !self.spacing_range_m.is_finite()
        {
            return domain("grid spacings must be positive and finite");
        }
        if !self.origin_azimuth_m.is_finite() || !self.origin_range_m.is_finite() {
            return domain("grid origin must be finite");
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n_azimuth * self.n_range
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_azimuth, self.n_range)
    }

    pub fn azimuth_of(&self, ia: usize) -> f64 {
        self.origin_azimuth_m + ia as f64 * self.spacing_azimuth_m
    }

    pub fn range_of(&self, ir: usize) -> f64 {
        self.origin_range_m + ir as f64 * self.spacing_range_m
    }

    pub fn position(&self, ia: usize, ir: usize) -> (f64, f64) {
        (self.azimuth_of(ia), self.range_of(ir))
    }

    pub fn center_cell(&self) -> (usize, usize) {
        (self.n_azimuth / 2, self.n_range / 2)
    }

    /// Nearest grid node, or `None` when the point lies outside the half-cell
    /// border around the outermost nodes.
    pub fn nearest_cell(&self, azimuth_m: f64, range_m: f64) -> Option<(usize, usize)> {
        let fa = (azimuth_m - self.origin_azimuth_m) / self.spacing_azimuth_m;
        let fr = (range_m - self.origin_range_m) / self.spacing_range_m;
        if !fa.is_finite() || !fr.is_finite() {
            return None;
        }
        let (ia, ir) = (fa.round(), fr.round());
        if ia < 0.0 || ir < 0.0 || ia >= self.n_azimuth as f64 || ir >= self.n_range as f64 {
            return None;
        }
        Some((ia as usize, ir as usize))
    }

    pub fn linear_index(&self, ia: usize, ir: usize) -> usize {
        ia * self.n_range + ir
    }
}

/// Radar and aperture parameters plus the image grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImagingGeometry {
    pub center_frequency_hz: f64,
    pub transmit_bandwidth_hz: f64,
    pub rail_length_m: f64,
    pub grid: GridSpec,
}

impl ImagingGeometry {
    pub fn new(
        center_frequency_hz: f64,
        transmit_bandwidth_hz: f64,
        rail_length_m: f64,
        grid: GridSpec,
    ) -> Result<Self> {
        let geometry = Self {
            center_frequency_hz,
            transmit_bandwidth_hz,
            rail_length_m,
            grid,
        };
        geometry.validate()?;
        Ok(geometry)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("center frequency", self.center_frequency_hz),
            ("transmit bandwidth", self.transmit_bandwidth_hz),
            ("rail length", self.rail_length_m),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return domain(format!("{name} must be positive and finite, got {v}"));
            }
        }
        self.grid.validate()?;
        // The observation angle needs a strictly positive range coordinate,
        // which also guarantees R > 0 for every cell.
        if self.grid.origin_range_m <= 0.0 {
            return domain(format!(
                "grid starts at range {} m; every cell must lie in front of the array",
                self.grid.origin_range_m
            ));
        }
        Ok(())
    }

    /// Setup of the simulated experiment: 10 GHz, 2 GHz bandwidth, 5 m rail,
    /// an `n`×`n` grid spanning 20.48 m centered at 25 m range.
    pub fn paper1(n: usize) -> Self {
        let spacing = 20.48 / n as f64;
        Self {
            center_frequency_hz: 10e9,
            transmit_bandwidth_hz: 2e9,
            rail_length_m: 5.0,
            grid: GridSpec::centered(n, n, spacing, spacing, 25.0),
        }
    }

    /// Narrow boresight strip around 14-28 m range, sampled finely enough
    /// (≤ ρ/8 on both axes) to measure mainlobe widths at 14, 21 and 28 m.
    /// Those three ranges fall on grid nodes.
    pub fn paper2() -> Self {
        let spacing_range = 7.0 / 750.0;
        Self {
            center_frequency_hz: 10e9,
            transmit_bandwidth_hz: 2e9,
            rail_length_m: 5.0,
            grid: GridSpec::centered(129, 1561, 0.005, spacing_range, 21.0),
        }
    }

    /// RF wavelength c / f0.
    pub fn lambda_rf(&self) -> f64 {
        SPEED_OF_LIGHT / self.center_frequency_hz
    }

    pub fn range_resolution(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.transmit_bandwidth_hz)
    }

    pub fn azimuth_resolution(&self, slant_range_m: f64) -> Result<f64> {
        if !(slant_range_m > 0.0 && slant_range_m.is_finite()) {
            return domain(format!("slant range must be positive, got {slant_range_m}"));
        }
        Ok(self.lambda_rf() * slant_range_m / (2.0 * self.rail_length_m))
    }

    /// `(rho_range, rho_azimuth)` at the given slant range.
    pub fn resolutions(&self, slant_range_m: f64) -> Result<(f64, f64)> {
        self.validate()?;
        Ok((
            self.range_resolution(),
            self.azimuth_resolution(slant_range_m)?,
        ))
    }

    pub fn slant_range(&self, azimuth_m: f64, range_m: f64) -> f64 {
        azimuth_m.hypot(range_m)
    }

    /// Line-of-sight angle from boresight, in (-π/2, π/2).
    pub fn observation_angle(&self, azimuth_m: f64, range_m: f64) -> Result<f64> {
        if !azimuth_m.is_finite() || !range_m.is_finite() {
            return domain("target position must be finite");
        }
        if range_m <= 0.0 {
            return domain(format!(
                "target at range {range_m} m is not in front of the array"
            ));
        }
        Ok((azimuth_m / range_m).atan())
    }

    /// Largest slant range over the grid corners.
    pub fn max_slant_range(&self) -> f64 {
        let g = &self.grid;
        let az = [g.azimuth_of(0), g.azimuth_of(g.n_azimuth - 1)];
        let rg = [g.range_of(0), g.range_of(g.n_range - 1)];
        az.iter()
            .flat_map(|a| rg.iter().map(move |r| a.hypot(*r)))
            .fold(0.0, f64::max)
    }

    pub fn min_slant_range(&self) -> f64 {
        let g = &self.grid;
        let a0 = g.azimuth_of(0);
        let a1 = g.azimuth_of(g.n_azimuth - 1);
        let closest_az = if a0 <= 0.0 && a1 >= 0.0 {
            0.0
        } else {
            a0.abs().min(a1.abs())
        };
        closest_az.hypot(g.origin_range_m)
    }
}

/// sin(πt)/(πt) with sinc(0) = 1.
pub fn sinc(t: f64) -> f64 {
    if t == 0.0 {
        1.0
    } else {
        let x = PI * t;
        x.sin() / x
    }
}

/// Untruncated rotated-sinc PSF at an offset from the target.
pub fn rotated_sinc(
    d_azimuth_m: f64,
    d_range_m: f64,
    angle_rad: f64,
    rho_range_m: f64,
    rho_azimuth_m: f64,
) -> f64 {
    let (s, c) = angle_rad.sin_cos();
    let along = d_range_m * c + d_azimuth_m * s;
    let across = -d_range_m * s + d_azimuth_m * c;
    sinc(along / rho_range_m) * sinc(across / rho_azimuth_m)
}

/// How far a PSF patch extends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truncation {
    /// Keep samples whose rotated coordinates stay inside the region where
    /// the 1/(π|t|) sinc envelope is above this level (dB, negative).
    MinLevelDb(f64),
    /// Square patch of this many cells per side (odd, ≥ 3), no masking.
    FixedCells(usize),
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation::MinLevelDb(-40.0)
    }
}

/// Truncated, peak-normalized PSF sampled on the grid.
///
/// `samples[[half_azimuth + da, half_range + dr]]` is the response at cell
/// offset `(da, dr)` from the target.
#[derive(Debug, Clone, PartialEq)]
pub struct PsfPatch {
    pub samples: Array2<f64>,
    pub center_slant_range_m: f64,
    pub observation_angle_rad: f64,
    pub resolution_range_m: f64,
    pub resolution_azimuth_m: f64,
    /// Half extent in cells `(azimuth, range)`.
    pub truncation_radius_cells: (usize, usize),
    /// Set when the requested extent was larger than the grid and cut back.
    pub clamped: bool,
}

impl PsfPatch {
    pub fn half_azimuth(&self) -> usize {
        self.truncation_radius_cells.0
    }

    pub fn half_range(&self) -> usize {
        self.truncation_radius_cells.1
    }

    pub fn center_value(&self) -> f64 {
        self.samples[[self.half_azimuth(), self.half_range()]]
    }

    pub fn squared_norm(&self) -> f64 {
        self.samples.iter().map(|v| v * v).sum()
    }

    /// Synthesize the patch for slant range `slant_range_m` and angle
    /// `angle_rad` on `geometry`'s grid.
    pub fn synthesize_at(
        geometry: &ImagingGeometry,
        slant_range_m: f64,
        angle_rad: f64,
        truncation: Truncation,
    ) -> Result<Self> {
        if !slant_range_m.is_finite() || !angle_rad.is_finite() {
            return domain("PSF range and angle must be finite");
        }
        let (rho_r, rho_a) = geometry.resolutions(slant_range_m)?;
        let grid = &geometry.grid;
        let (sin_t, cos_t) = angle_rad.sin_cos();

        let (mut half_a, mut half_r, mask) = match truncation {
            Truncation::MinLevelDb(level_db) => {
                if !(level_db < 0.0 && level_db.is_finite()) {
                    return domain(format!(
                        "truncation level must be negative dB, got {level_db}"
                    ));
                }
                let level = 10f64.powf(level_db / 20.0);
                // |sinc(t)| <= 1/(π|t|) drops below `level` beyond this.
                let extent = 1.0 / (PI * level);
                let along = extent * rho_r;
                let across = extent * rho_a;
                let ext_az = along * sin_t.abs() + across * cos_t.abs();
                let ext_rg = along * cos_t.abs() + across * sin_t.abs();
                let ha = ((ext_az / grid.spacing_azimuth_m).ceil() as usize).max(1);
                let hr = ((ext_rg / grid.spacing_range_m).ceil() as usize).max(1);
                (ha, hr, Some((along, across)))
            }
            Truncation::FixedCells(n) => {
                if n < 3 || n % 2 == 0 {
                    return domain(format!("fixed patch size must be odd and >= 3, got {n}"));
                }
                (n / 2, n / 2, None)
            }
        };

        let mut clamped = false;
        if half_a > grid.n_azimuth.saturating_sub(1).max(1) {
            half_a = grid.n_azimuth.saturating_sub(1).max(1);
            clamped = true;
        }
        if half_r > grid.n_range.saturating_sub(1).max(1) {
            half_r = grid.n_range.saturating_sub(1).max(1);
            clamped = true;
        }

        let mut samples = Array2::<f64>::zeros((2 * half_a + 1, 2 * half_r + 1));
        for ((i, k), v) in samples.indexed_iter_mut() {
            let d_az = (i as f64 - half_a as f64) * grid.spacing_azimuth_m;
            let d_rg = (k as f64 - half_r as f64) * grid.spacing_range_m;
            let along = d_rg * cos_t + d_az * sin_t;
            let across = -d_rg * sin_t + d_az * cos_t;
            if let Some((max_along, max_across)) = mask {
                if along.abs() > max_along || across.abs() > max_across {
                    continue;
                }
            }
            *v = sinc(along / rho_r) * sinc(across / rho_a);
        }
        samples[[half_a, half_r]] = 1.0;

        Ok(Self {
            samples,
            center_slant_range_m: slant_range_m,
            observation_angle_rad: angle_rad,
            resolution_range_m: rho_r,
            resolution_azimuth_m: rho_a,
            truncation_radius_cells: (half_a, half_r),
            clamped,
        })
    }
}

/// Patch for the target at `(azimuth, range)`, which must lie inside the
/// grid.
pub fn synthesize_psf(
    geometry: &ImagingGeometry,
    target_azimuth_m: f64,
    target_range_m: f64,
    truncation: Truncation,
) -> Result<PsfPatch> {
    geometry.validate()?;
    let angle = geometry.observation_angle(target_azimuth_m, target_range_m)?;
    if geometry
        .grid
        .nearest_cell(target_azimuth_m, target_range_m)
        .is_none()
    {
        return domain(format!(
            "target ({target_azimuth_m}, {target_range_m}) is outside the imaging grid"
        ));
    }
    let slant = geometry.slant_range(target_azimuth_m, target_range_m);
    PsfPatch::synthesize_at(geometry, slant, angle, truncation)
}

/// Bin widths for sharing PSFs among nearby cells. Infinite steps collapse
/// the corresponding axis to a single bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantization {
    pub range_step_m: f64,
    pub angle_step_rad: f64,
}

impl Default for Quantization {
    fn default() -> Self {
        Self {
            range_step_m: 1.0,
            angle_step_rad: 1f64.to_radians(),
        }
    }
}

impl Quantization {
    /// Single bin for the whole scene.
    pub fn invariant() -> Self {
        Self {
            range_step_m: f64::INFINITY,
            angle_step_rad: f64::INFINITY,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.range_step_m > 0.0 && self.angle_step_rad > 0.0) {
            return Err(Error::Config(format!(
                "quantization steps must be positive, got ({}, {})",
                self.range_step_m, self.angle_step_rad
            )));
        }
        Ok(())
    }
}

/// Quantized bin index relative to the grid-center reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BinKey {
    pub range_bin: i64,
    pub angle_bin: i64,
}

fn bin_of(value: f64, reference: f64, step: f64) -> i64 {
    if step.is_infinite() {
        0
    } else {
        ((value - reference) / step).round() as i64
    }
}

fn bin_center(bin: i64, reference: f64, step: f64) -> f64 {
    if bin == 0 {
        reference
    } else {
        reference + bin as f64 * step
    }
}

/// Memoized spatial-variant PSFs covering every cell of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PsfBank {
    geometry: ImagingGeometry,
    quantization: Quantization,
    truncation: Truncation,
    reference: (f64, f64),
    keys: BTreeMap<BinKey, usize>,
    patches: Vec<PsfPatch>,
    cell_patch: Vec<u32>,
}

impl PsfBank {
    pub fn build(
        geometry: &ImagingGeometry,
        quantization: Quantization,
        truncation: Truncation,
    ) -> Result<Self> {
        geometry.validate()?;
        quantization.validate()?;
        let grid = &geometry.grid;
        let (ca, cr) = grid.center_cell();
        let (az_c, rg_c) = grid.position(ca, cr);
        let reference = (
            geometry.slant_range(az_c, rg_c),
            geometry.observation_angle(az_c, rg_c)?,
        );

        let mut cell_keys = Vec::with_capacity(grid.len());
        let mut keys = BTreeMap::new();
        for ia in 0..grid.n_azimuth {
            for ir in 0..grid.n_range {
                let (az, rg) = grid.position(ia, ir);
                let key = BinKey {
                    range_bin: bin_of(
                        geometry.slant_range(az, rg),
                        reference.0,
                        quantization.range_step_m,
                    ),
                    angle_bin: bin_of(
                        geometry.observation_angle(az, rg)?,
                        reference.1,
                        quantization.angle_step_rad,
                    ),
                };
                keys.insert(key, 0);
                cell_keys.push(key);
            }
        }

        let mut patches = Vec::with_capacity(keys.len());
        for (slot, (key, index)) in keys.iter_mut().enumerate() {
            *index = slot;
            let range = bin_center(key.range_bin, reference.0, quantization.range_step_m);
            let angle = bin_center(key.angle_bin, reference.1, quantization.angle_step_rad);
            if range <= 0.0 {
                return domain(format!("range bin {} centers at {range} m", key.range_bin));
            }
            patches.push(PsfPatch::synthesize_at(geometry, range, angle, truncation)?);
        }
        let cell_patch = cell_keys.iter().map(|k| keys[k] as u32).collect();

        Ok(Self {
            geometry: *geometry,
            quantization,
            truncation,
            reference,
            keys,
            patches,
            cell_patch,
        })
    }

    pub fn geometry(&self) -> &ImagingGeometry {
        &self.geometry
    }

    pub fn quantization(&self) -> Quantization {
        self.quantization
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    /// Slant range and angle of the grid center, which anchors the bins.
    pub fn reference(&self) -> (f64, f64) {
        self.reference
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn patches(&self) -> &[PsfPatch] {
        &self.patches
    }

    pub fn keys(&self) -> impl Iterator<Item = &BinKey> {
        self.keys.keys()
    }

    pub fn patch_index(&self, ia: usize, ir: usize) -> usize {
        self.cell_patch[self.geometry.grid.linear_index(ia, ir)] as usize
    }

    pub fn lookup(&self, ia: usize, ir: usize) -> &PsfPatch {
        &self.patches[self.patch_index(ia, ir)]
    }

    pub fn any_clamped(&self) -> bool {
        self.patches.iter().any(|p| p.clamped)
    }
}
