//! Forward degradation model: a point-scatterer scene rendered as a sum of
//! spatial-variant PSFs plus circular Gaussian clutter.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GridSpec, ImagingGeometry, PsfBank, PsfPatch};
use crate::image::ComplexImage;

/// Ideal point target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub azimuth_m: f64,
    pub range_m: f64,
    pub amplitude_dbsm: f64,
    pub phase_rad: f64,
}

impl Scatterer {
    pub fn new(azimuth_m: f64, range_m: f64, amplitude_dbsm: f64, phase_rad: f64) -> Self {
        Self {
            azimuth_m,
            range_m,
            amplitude_dbsm,
            phase_rad,
        }
    }

    pub fn linear_amplitude(&self) -> f64 {
        10f64.powf(self.amplitude_dbsm / 20.0)
    }

    pub fn complex_amplitude(&self) -> Complex64 {
        Complex64::from_polar(self.linear_amplitude(), self.phase_rad)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SceneSpec {
    pub label: String,
    pub scatterers: Vec<Scatterer>,
}

/// A scatterer snapped onto the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacedScatterer {
    pub index: usize,
    pub cell: (usize, usize),
    pub amplitude: Complex64,
}

impl SceneSpec {
    pub fn new(label: impl Into<String>, scatterers: Vec<Scatterer>) -> Self {
        Self {
            label: label.into(),
            scatterers,
        }
    }

    pub fn len(&self) -> usize {
        self.scatterers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scatterers.is_empty()
    }

    /// Snaps every scatterer to its nearest node, rejecting out-of-grid
    /// positions, non-finite fields and shared cells.
    pub fn place(&self, grid: &GridSpec) -> Result<Vec<PlacedScatterer>> {
        let mut placed: Vec<PlacedScatterer> = Vec::with_capacity(self.len());
        let mut owner = std::collections::HashMap::new();
        for (index, s) in self.scatterers.iter().enumerate() {
            if !s.amplitude_dbsm.is_finite() || !s.phase_rad.is_finite() {
                return Err(Error::Domain(format!(
                    "scatterer {index} has non-finite amplitude or phase"
                )));
            }
            let out_of_grid = || Error::OutOfGrid {
                index,
                azimuth_m: s.azimuth_m,
                range_m: s.range_m,
            };
            if s.range_m <= 0.0 {
                return Err(out_of_grid());
            }
            let cell = grid
                .nearest_cell(s.azimuth_m, s.range_m)
                .ok_or_else(out_of_grid)?;
            if let Some(first) = owner.insert(cell, index) {
                return Err(Error::DuplicateCell {
                    first,
                    second: index,
                    azimuth_index: cell.0,
                    range_index: cell.1,
                });
            }
            placed.push(PlacedScatterer {
                index,
                cell,
                amplitude: s.complex_amplitude(),
            });
        }
        Ok(placed)
    }

    pub fn min_amplitude_dbsm(&self) -> Option<f64> {
        self.scatterers
            .iter()
            .map(|s| s.amplitude_dbsm)
            .min_by(f64::total_cmp)
    }
}

/// Additive clutter. Power is relative to the peak of a 0 dBsm scatterer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub clutter_power_db: f64,
    pub rng_seed: u64,
}

impl NoiseSpec {
    /// Clutter 15 dB below the weakest scatterer's peak.
    pub fn default_for(scene: &SceneSpec, rng_seed: u64) -> Self {
        Self {
            clutter_power_db: scene.min_amplitude_dbsm().unwrap_or(0.0) - 15.0,
            rng_seed,
        }
    }

    pub fn power_linear(&self) -> f64 {
        10f64.powf(self.clutter_power_db / 10.0)
    }
}

/// Ideal (non-degraded) image: one impulse per scatterer.
pub fn render_ideal(scene: &SceneSpec, geometry: &ImagingGeometry) -> Result<ComplexImage> {
    geometry.validate()?;
    let mut image = ComplexImage::zeros(geometry.grid);
    for p in scene.place(&geometry.grid)? {
        image.data_mut()[[p.cell.0, p.cell.1]] = p.amplitude;
    }
    Ok(image)
}

/// Adds `amplitude · patch` centered at `cell`, clipped to the grid.
pub fn deposit_patch(
    image: &mut ComplexImage,
    cell: (usize, usize),
    amplitude: Complex64,
    patch: &PsfPatch,
) {
    let (n_az, n_rg) = image.grid().shape();
    let (ha, hr) = patch.truncation_radius_cells;
    let data = image.data_mut();
    for ((pa, pr), &w) in patch.samples.indexed_iter() {
        let ia = cell.0 as isize + pa as isize - ha as isize;
        let ir = cell.1 as isize + pr as isize - hr as isize;
        if ia < 0 || ir < 0 || ia >= n_az as isize || ir >= n_rg as isize || w == 0.0 {
            continue;
        }
        data[[ia as usize, ir as usize]] += amplitude * w;
    }
}

/// Degraded image `Σ aᵢ·PSFᵢ + N`.
pub fn degrade(
    scene: &SceneSpec,
    geometry: &ImagingGeometry,
    bank: &PsfBank,
    noise: Option<&NoiseSpec>,
) -> Result<ComplexImage> {
    geometry.validate()?;
    if bank.geometry() != geometry {
        return Err(Error::GridMismatch(
            "PSF bank was built for a different geometry".into(),
        ));
    }
    let mut image = ComplexImage::zeros(geometry.grid);
    for p in scene.place(&geometry.grid)? {
        deposit_patch(&mut image, p.cell, p.amplitude, bank.lookup(p.cell.0, p.cell.1));
    }
    if let Some(noise) = noise {
        add_clutter(&mut image, noise)?;
    }
    Ok(image)
}

/// Adds i.i.d. circular complex Gaussian samples with E|n|² equal to the
/// configured power. Samples are drawn in row-major order.
pub fn add_clutter(image: &mut ComplexImage, noise: &NoiseSpec) -> Result<()> {
    if !noise.clutter_power_db.is_finite() {
        return Err(Error::Config("clutter power must be finite".into()));
    }
    let sigma = (noise.power_linear() / 2.0).sqrt();
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.rng_seed);
    for v in image.as_mut_slice() {
        let re = normal.sample(&mut rng);
        let im = normal.sample(&mut rng);
        *v += Complex64::new(re, im);
    }
    Ok(())
}

/// Simulated wide scene: eight −10 dBsm targets on the corners and edge
/// midpoints of a 16 m square centered at 25 m range, four −10 dBsm targets
/// on a cross of half-width 0.32 m at the center, and a −20 dBsm target
/// 0.16 m beyond the +azimuth arm of the cross. All positions are multiples
/// of 0.08 m so they coincide with nodes of the 256-cell default grid.
pub fn paper_scene_1() -> SceneSpec {
    let c = 25.0;
    let perimeter = [
        (-8.0, c - 8.0),
        (0.0, c - 8.0),
        (8.0, c - 8.0),
        (-8.0, c),
        (8.0, c),
        (-8.0, c + 8.0),
        (0.0, c + 8.0),
        (8.0, c + 8.0),
    ];
    let cross = [(-0.32, c), (0.32, c), (0.0, c - 0.32), (0.0, c + 0.32)];
    let phases_deg = [
        0.0, 45.0, 90.0, 135.0, 180.0, 225.0, 270.0, 315.0, 30.0, 120.0, 210.0, 300.0, 60.0,
    ];
    let mut scatterers: Vec<Scatterer> = perimeter
        .iter()
        .chain(cross.iter())
        .map(|&(az, rg)| Scatterer::new(az, rg, -10.0, 0.0))
        .collect();
    scatterers.push(Scatterer::new(0.48, c, -20.0, 0.0));
    for (s, p) in scatterers.iter_mut().zip(phases_deg) {
        s.phase_rad = f64::to_radians(p);
    }
    SceneSpec::new("paper1", scatterers)
}

/// Three −30 dBsm targets on boresight at 14, 21 and 28 m.
pub fn paper_scene_2() -> SceneSpec {
    SceneSpec::new(
        "paper2",
        [14.0, 21.0, 28.0]
            .iter()
            .map(|&r| Scatterer::new(0.0, r, -30.0, 0.0))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Quantization, Truncation};

    fn small() -> (ImagingGeometry, PsfBank) {
        let g = ImagingGeometry::paper1(64);
        let bank = PsfBank::build(&g, Quantization::default(), Truncation::FixedCells(15)).unwrap();
        (g, bank)
    }

    #[test]
    fn empty_scene_renders_zero() {
        let (g, bank) = small();
        let scene = SceneSpec::default();
        assert_eq!(render_ideal(&scene, &g).unwrap().max_abs(), 0.0);
        assert_eq!(degrade(&scene, &g, &bank, None).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn ideal_amplitudes() {
        let g = ImagingGeometry::paper1(64);
        let scene = SceneSpec::new("one", vec![Scatterer::new(0.0, 25.0, 0.0, 0.0)]);
        let img = render_ideal(&scene, &g).unwrap();
        let (ca, cr) = g.grid.center_cell();
        assert_eq!(img.get(ca, cr), Complex64::new(1.0, 0.0));
        assert_eq!(img.count_nonzero(), 1);

        let scene = SceneSpec::new("weak", vec![Scatterer::new(0.0, 25.0, -10.0, 0.0)]);
        let img = render_ideal(&scene, &g).unwrap();
        assert!((img.get(ca, cr).norm() - 0.316_228).abs() < 1e-6);
    }

    #[test]
    fn single_scatterer_degrades_to_its_patch() {
        let (g, bank) = small();
        let scene = SceneSpec::new("one", vec![Scatterer::new(0.0, 25.0, 0.0, 0.0)]);
        let img = degrade(&scene, &g, &bank, None).unwrap();
        let (ca, cr) = g.grid.center_cell();
        assert_eq!(img.get(ca, cr), Complex64::new(1.0, 0.0));
        let patch = bank.lookup(ca, cr);
        let (ha, hr) = patch.truncation_radius_cells;
        for ((pa, pr), w) in patch.samples.indexed_iter() {
            assert_eq!(img.get(ca + pa - ha, cr + pr - hr).re, *w);
        }
    }

    #[test]
    fn out_of_grid_and_duplicates_are_rejected() {
        let g = ImagingGeometry::paper1(64);
        let scene = SceneSpec::new("far", vec![Scatterer::new(30.0, 25.0, 0.0, 0.0)]);
        match render_ideal(&scene, &g) {
            Err(Error::OutOfGrid { index: 0, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        let scene = SceneSpec::new(
            "dup",
            vec![
                Scatterer::new(0.0, 25.0, 0.0, 0.0),
                Scatterer::new(0.01, 25.01, 0.0, 0.0),
            ],
        );
        assert!(matches!(
            render_ideal(&scene, &g),
            Err(Error::DuplicateCell { first: 0, second: 1, .. })
        ));
    }

    #[test]
    fn bank_geometry_mismatch() {
        let (_, bank) = small();
        let other = ImagingGeometry::paper1(32);
        assert!(degrade(&SceneSpec::default(), &other, &bank, None).is_err());
    }

    #[test]
    fn clutter_is_seeded_and_calibrated() {
        let g = ImagingGeometry::paper1(128);
        let noise = NoiseSpec {
            clutter_power_db: -20.0,
            rng_seed: 9,
        };
        let mut a = ComplexImage::zeros(g.grid);
        let mut b = ComplexImage::zeros(g.grid);
        add_clutter(&mut a, &noise).unwrap();
        add_clutter(&mut b, &noise).unwrap();
        assert_eq!(a, b);
        let mean_power = a.squared_norm() / g.grid.len() as f64;
        let db = 10.0 * mean_power.log10();
        assert!((db + 20.0).abs() < 0.2, "{db}");
    }

    #[test]
    fn paper_scene_1_composition() {
        let scene = paper_scene_1();
        assert_eq!(scene.len(), 13);
        let strongest = scene
            .scatterers
            .iter()
            .map(|s| s.amplitude_dbsm)
            .fold(f64::MIN, f64::max);
        assert_eq!(scene.min_amplitude_dbsm().unwrap(), strongest - 10.0);
        for s in &scene.scatterers {
            assert!(s.azimuth_m.abs() <= 10.0);
            assert!((s.range_m - 25.0).abs() <= 10.0);
        }
        // fits the default grid without collisions
        let placed = scene.place(&ImagingGeometry::paper1(256).grid).unwrap();
        assert_eq!(placed.len(), 13);
    }

    #[test]
    fn default_clutter_sits_below_weakest() {
        let noise = NoiseSpec::default_for(&paper_scene_1(), 1);
        assert_eq!(noise.clutter_power_db, -35.0);
    }
}
