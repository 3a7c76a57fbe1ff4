//! Run configuration, stored as TOML. Every field has a default, so an empty
//! file is a valid configuration for the simulated experiment.

use serde::{Deserialize, Serialize};

use crate::baselines::{CleanConfig, IstaConfig};
use crate::error::{Error, Result};
use crate::geometry::{GridSpec, ImagingGeometry, Quantization, Truncation};
use crate::simulate::{NoiseSpec, SceneSpec};
use crate::solver::{SolverConfig, StepMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: String,
    pub geometry: GeometrySection,
    pub psf: PsfSection,
    pub solver: SolverSection,
    pub ista: IstaSection,
    pub clean: CleanSection,
    pub noise: NoiseSection,
    pub metrics: MetricsSection,
    pub bench: BenchSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 20_231_028,
            output_dir: "out".into(),
            geometry: GeometrySection::default(),
            psf: PsfSection::default(),
            solver: SolverSection::default(),
            ista: IstaSection::default(),
            clean: CleanSection::default(),
            noise: NoiseSection::default(),
            metrics: MetricsSection::default(),
            bench: BenchSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySection {
    pub f0_hz: f64,
    pub bandwidth_hz: f64,
    pub rail_length_m: f64,
    /// Range of the grid-center node.
    pub standoff_m: f64,
    pub n_azimuth: usize,
    pub n_range: usize,
    pub spacing_azimuth_m: f64,
    pub spacing_range_m: f64,
    /// Overrides the centered placement when set.
    pub origin_azimuth_m: Option<f64>,
    pub origin_range_m: Option<f64>,
}

impl Default for GeometrySection {
    fn default() -> Self {
        Self::from_geometry(&ImagingGeometry::paper1(256), 25.0)
    }
}

impl GeometrySection {
    pub fn from_geometry(g: &ImagingGeometry, standoff_m: f64) -> Self {
        let centered = GridSpec::centered(
            g.grid.n_azimuth,
            g.grid.n_range,
            g.grid.spacing_azimuth_m,
            g.grid.spacing_range_m,
            standoff_m,
        );
        let differs = |a: f64, b: f64| (a != b).then_some(a);
        Self {
            f0_hz: g.center_frequency_hz,
            bandwidth_hz: g.transmit_bandwidth_hz,
            rail_length_m: g.rail_length_m,
            standoff_m,
            n_azimuth: g.grid.n_azimuth,
            n_range: g.grid.n_range,
            spacing_azimuth_m: g.grid.spacing_azimuth_m,
            spacing_range_m: g.grid.spacing_range_m,
            origin_azimuth_m: differs(g.grid.origin_azimuth_m, centered.origin_azimuth_m),
            origin_range_m: differs(g.grid.origin_range_m, centered.origin_range_m),
        }
    }

    /// Square `n`×`n` grid keeping the 20.48 m extent.
    pub fn with_grid(mut self, n: usize) -> Self {
        let extent_az = self.spacing_azimuth_m * self.n_azimuth as f64;
        let extent_rg = self.spacing_range_m * self.n_range as f64;
        self.n_azimuth = n;
        self.n_range = n;
        self.spacing_azimuth_m = extent_az / n as f64;
        self.spacing_range_m = extent_rg / n as f64;
        self.origin_azimuth_m = None;
        self.origin_range_m = None;
        self
    }

    pub fn build(&self) -> Result<ImagingGeometry> {
        let mut grid = GridSpec::centered(
            self.n_azimuth,
            self.n_range,
            self.spacing_azimuth_m,
            self.spacing_range_m,
            self.standoff_m,
        );
        if let Some(o) = self.origin_azimuth_m {
            grid.origin_azimuth_m = o;
        }
        if let Some(o) = self.origin_range_m {
            grid.origin_range_m = o;
        }
        ImagingGeometry::new(self.f0_hz, self.bandwidth_hz, self.rail_length_m, grid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsfSection {
    pub min_level_db: f64,
    pub fixed_patch_cells: Option<usize>,
    pub range_step_m: f64,
    pub angle_step_deg: f64,
}

impl Default for PsfSection {
    fn default() -> Self {
        let q = Quantization::default();
        Self {
            min_level_db: -40.0,
            fixed_patch_cells: None,
            range_step_m: q.range_step_m,
            angle_step_deg: q.angle_step_rad.to_degrees(),
        }
    }
}

impl PsfSection {
    pub fn truncation(&self) -> Truncation {
        match self.fixed_patch_cells {
            Some(n) => Truncation::FixedCells(n),
            None => Truncation::MinLevelDb(self.min_level_db),
        }
    }

    pub fn quantization(&self) -> Quantization {
        Quantization {
            range_step_m: self.range_step_m,
            angle_step_rad: self.angle_step_deg.to_radians(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Exact,
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    /// λ as a fraction of max|Dᴴy|.
    pub lambda_rel: f64,
    pub step: StepKind,
    /// Global step; defaults to 1/max‖d_j‖² when `step = "global"`.
    pub mu: Option<f64>,
    pub max_sweeps: usize,
    pub objective_tolerance: f64,
    /// Active-set threshold as a fraction of λ.
    pub active_set_rel: f64,
    pub full_pass_interval: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            lambda_rel: 0.05,
            step: StepKind::Exact,
            mu: None,
            max_sweeps: d.max_sweeps,
            objective_tolerance: d.objective_tolerance,
            active_set_rel: 0.1,
            full_pass_interval: d.full_pass_interval,
        }
    }
}

impl SolverSection {
    /// Solver settings for an absolute λ; `max_sq_norm` is max_j‖d_j‖².
    pub fn to_config(&self, lambda_reg: f64, max_sq_norm: f64) -> SolverConfig {
        SolverConfig {
            lambda_reg,
            step_mode: match self.step {
                StepKind::Exact => StepMode::Exact,
                StepKind::Global => StepMode::Global(self.mu.unwrap_or(1.0 / max_sq_norm)),
            },
            max_sweeps: self.max_sweeps,
            objective_tolerance: self.objective_tolerance,
            active_set_threshold: (lambda_reg > 0.0).then(|| self.active_set_rel * lambda_reg),
            full_pass_interval: self.full_pass_interval,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IstaSection {
    pub lambda_rel: f64,
    pub mu: Option<f64>,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for IstaSection {
    fn default() -> Self {
        let d = IstaConfig::default();
        Self {
            lambda_rel: 0.05,
            mu: d.mu,
            max_iterations: d.max_iterations,
            tolerance: d.tolerance,
        }
    }
}

impl IstaSection {
    pub fn to_config(&self, lambda_reg: f64) -> IstaConfig {
        IstaConfig {
            lambda_reg,
            mu: self.mu,
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CleanSection {
    pub loop_gain: f64,
    pub stop_threshold_db: f64,
    /// Defaults to ten times the number of scatterers in the scene.
    pub max_components: Option<usize>,
}

impl Default for CleanSection {
    fn default() -> Self {
        let d = CleanConfig::default();
        Self {
            loop_gain: d.loop_gain,
            stop_threshold_db: d.stop_threshold_db,
            max_components: None,
        }
    }
}

impl CleanSection {
    pub fn to_config(&self, scene_size: usize) -> CleanConfig {
        CleanConfig {
            loop_gain: self.loop_gain,
            stop_threshold_db: self.stop_threshold_db,
            max_components: self
                .max_components
                .unwrap_or_else(|| (10 * scene_size).max(1)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub enabled: bool,
    /// Defaults to 15 dB below the weakest scatterer.
    pub clutter_power_db: Option<f64>,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            enabled: true,
            clutter_power_db: None,
        }
    }
}

impl NoiseSection {
    /// An empty scene gets no clutter unless a power is given explicitly,
    /// since the default level is relative to the weakest scatterer.
    pub fn to_spec(&self, scene: &SceneSpec, seed: u64) -> Option<NoiseSpec> {
        if !self.enabled || (scene.is_empty() && self.clutter_power_db.is_none()) {
            return None;
        }
        let mut spec = NoiseSpec::default_for(scene, seed);
        if let Some(p) = self.clutter_power_db {
            spec.clutter_power_db = p;
        }
        Some(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    pub extract_min_level_db: f64,
    /// Defaults to 3·max(ρ_r, ρ_a(R_max)).
    pub gate_radius_m: Option<f64>,
    pub heatmap_range_db: f64,
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self {
            extract_min_level_db: -30.0,
            gate_radius_m: None,
            heatmap_range_db: 40.0,
        }
    }
}

impl MetricsSection {
    pub fn gate_radius(&self, geometry: &ImagingGeometry) -> f64 {
        self.gate_radius_m.unwrap_or_else(|| {
            let rho_a = geometry
                .azimuth_resolution(geometry.max_slant_range())
                .unwrap_or(0.0);
            3.0 * geometry.range_resolution().max(rho_a)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    /// λ fractions of max|adjoint(y)| tried for the proposed solver and ISTA.
    pub lambda_grid: Vec<f64>,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            lambda_grid: vec![0.003, 0.01, 0.03, 0.1],
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(0);
            Error::Parse {
                line,
                message: e.message().to_string(),
            }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configuration always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.build()?;
        if !(self.psf.range_step_m > 0.0 && self.psf.angle_step_deg > 0.0) {
            return Err(Error::Config("PSF quantization steps must be positive".into()));
        }
        if self.bench.lambda_grid.is_empty()
            || self.bench.lambda_grid.iter().any(|v| !(*v > 0.0 && v.is_finite()))
        {
            return Err(Error::Config(
                "bench lambda grid must be non-empty with positive entries".into(),
            ));
        }
        if !(self.solver.lambda_rel >= 0.0 && self.ista.lambda_rel >= 0.0) {
            return Err(Error::Config("lambda fractions must be non-negative".into()));
        }
        if !(self.metrics.heatmap_range_db > 0.0) {
            return Err(Error::Config("heatmap range must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn default_geometry_is_the_simulated_setup() {
        let g = RunConfig::default().geometry.build().unwrap();
        assert_eq!(g, ImagingGeometry::paper1(256));
        assert_eq!(g.center_frequency_hz, 10e9);
        assert_eq!(g.transmit_bandwidth_hz, 2e9);
        assert_eq!(g.rail_length_m, 5.0);
    }

    #[test]
    fn round_trip_is_stable() {
        let mut c = RunConfig::default();
        c.seed = 7;
        c.geometry.origin_range_m = Some(3.25);
        c.psf.fixed_patch_cells = Some(31);
        c.solver.step = StepKind::Global;
        c.clean.max_components = Some(12);
        c.noise.clutter_power_db = Some(-41.5);
        let text = c.to_toml();
        let parsed = RunConfig::from_toml(&text).unwrap();
        assert_eq!(parsed, c);
        assert_eq!(parsed.to_toml(), text);
    }

    #[test]
    fn unknown_fields_and_bad_values_rejected() {
        assert!(RunConfig::from_toml("bogus = 1\n").is_err());
        assert!(RunConfig::from_toml("[geometry]\nf0_hz = -1.0\n").is_err());
        let err = RunConfig::from_toml("seed = 1\n[solver]\nmax_sweeps = \"x\"\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn grid_override_keeps_extent() {
        let g = GeometrySection::default().with_grid(64).build().unwrap();
        assert_eq!(g, ImagingGeometry::paper1(64));
    }
}
