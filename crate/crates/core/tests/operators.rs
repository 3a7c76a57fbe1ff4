mod common;

use common::*;
use nfsar_core::geometry::{synthesize_psf, PsfPatch, Quantization, Truncation};
use nfsar_core::metrics::half_power_width;
use nfsar_core::simulate::degrade;
use nfsar_core::{ComplexImage, ImagingGeometry, PsfBank, Scatterer, SceneSpec, VariantDictionary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn off_axis_bank(n: usize) -> PsfBank {
    // 5 m wide patch 2 m off boresight, so angles and ranges vary.
    let geometry = radar(grid(n, n, 0.08, 2.0, 22.0));
    PsfBank::build(&geometry, Quantization::default(), Truncation::default()).unwrap()
}

#[test]
fn adjoint_identity_on_random_pairs() {
    let bank = off_axis_bank(64);
    assert!(bank.len() > 10);
    let dict = VariantDictionary::new(&bank);
    let grid = bank.geometry().grid;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let x = random_image(grid, &mut rng);
        let y = random_image(grid, &mut rng);
        let lhs = dict.apply(&x).unwrap().inner(&y);
        let rhs = x.inner(&dict.adjoint(&y).unwrap());
        let rel = (lhs - rhs).norm() / lhs.norm();
        assert!(rel < 1e-10, "relative error {rel:e}");
    }
}

/// Scatterers at random distinct grid nodes.
fn random_scene(geometry: &ImagingGeometry, count: usize, rng: &mut ChaCha8Rng) -> SceneSpec {
    let g = geometry.grid;
    let mut used = std::collections::BTreeSet::new();
    let mut scatterers = Vec::new();
    while scatterers.len() < count {
        let cell = (rng.gen_range(0..g.n_azimuth), rng.gen_range(0..g.n_range));
        if !used.insert(cell) {
            continue;
        }
        let (az, rg) = g.position(cell.0, cell.1);
        scatterers.push(Scatterer::new(
            az,
            rg,
            rng.gen_range(-30.0..0.0),
            rng.gen_range(-3.2..3.2),
        ));
    }
    SceneSpec::new("random", scatterers)
}

fn coefficients_of(scene: &SceneSpec, geometry: &ImagingGeometry) -> ComplexImage {
    let mut x = ComplexImage::zeros(geometry.grid);
    for s in &scene.scatterers {
        let (ia, ir) = geometry.grid.nearest_cell(s.azimuth_m, s.range_m).unwrap();
        x.data_mut()[[ia, ir]] += s.complex_amplitude();
    }
    x
}

#[test]
fn dictionary_apply_matches_simulator() {
    let bank = off_axis_bank(48);
    let geometry = *bank.geometry();
    let dict = VariantDictionary::new(&bank);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let scene = random_scene(&geometry, 20, &mut rng);
        let simulated = degrade(&scene, &geometry, &bank, None).unwrap();
        let applied = dict.apply(&coefficients_of(&scene, &geometry)).unwrap();
        assert!(max_abs_diff(&simulated, &applied) < 1e-12);
    }
}

#[test]
fn simulator_is_linear_in_the_scene() {
    let bank = off_axis_bank(48);
    let geometry = *bank.geometry();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let all = random_scene(&geometry, 30, &mut rng);
    let a = SceneSpec::new("a", all.scatterers[..12].to_vec());
    let b = SceneSpec::new("b", all.scatterers[12..].to_vec());
    let whole = degrade(&all, &geometry, &bank, None).unwrap();
    let parts = &degrade(&a, &geometry, &bank, None).unwrap()
        + &degrade(&b, &geometry, &bank, None).unwrap();
    assert!(max_abs_diff(&whole, &parts) < 1e-12);
}

#[test]
fn boresight_lookup_equals_direct_synthesis() {
    let geometry = ImagingGeometry::paper1(128);
    let q = Quantization {
        range_step_m: geometry.grid.spacing_range_m,
        angle_step_rad: 1f64.to_radians(),
    };
    let bank = PsfBank::build(&geometry, q, Truncation::default()).unwrap();
    let (ca, _) = geometry.grid.center_cell();
    assert_eq!(geometry.grid.azimuth_of(ca), 0.0);
    for ir in 0..geometry.grid.n_range {
        let direct =
            synthesize_psf(&geometry, 0.0, geometry.grid.range_of(ir), Truncation::default())
                .unwrap();
        let looked_up = bank.lookup(ca, ir);
        assert_eq!(direct.samples.dim(), looked_up.samples.dim());
        let diff = direct
            .samples
            .iter()
            .zip(looked_up.samples.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-12, "cell {ir}: {diff:e}");
    }
}

fn bilinear(patch: &PsfPatch, spacing: f64, d_az: f64, d_rg: f64) -> f64 {
    let (ha, hr) = patch.truncation_radius_cells;
    let fa = d_az / spacing + ha as f64;
    let fr = d_rg / spacing + hr as f64;
    let (ia, ir) = (fa.floor() as usize, fr.floor() as usize);
    let (ta, tr) = (fa - ia as f64, fr - ir as f64);
    let s = &patch.samples;
    (1.0 - ta) * (1.0 - tr) * s[[ia, ir]]
        + ta * (1.0 - tr) * s[[ia + 1, ir]]
        + (1.0 - ta) * tr * s[[ia, ir + 1]]
        + ta * tr * s[[ia + 1, ir + 1]]
}

#[test]
fn rotated_patch_is_rotated_boresight_patch() {
    let range = 25.0;
    let rho = rho_range(2e9).min(rho_azimuth(10e9, 5.0, range));
    let coarse = rho / 8.0;
    let fine = coarse / 4.0;
    let g_coarse = radar(grid(41, 41, coarse, 0.0, 20.0));
    let g_fine = radar(grid(400, 400, fine, 0.0, 20.0));
    let reference =
        PsfPatch::synthesize_at(&g_fine, range, 0.0, Truncation::FixedCells(241)).unwrap();
    for deg in [10.0f64, 25.0, 40.0] {
        let angle = deg.to_radians();
        let patch =
            PsfPatch::synthesize_at(&g_coarse, range, angle, Truncation::FixedCells(41)).unwrap();
        let (sin, cos) = angle.sin_cos();
        let (ha, hr) = patch.truncation_radius_cells;
        let mut worst: f64 = 0.0;
        for ((i, k), &v) in patch.samples.indexed_iter() {
            let d_az = (i as f64 - ha as f64) * coarse;
            let d_rg = (k as f64 - hr as f64) * coarse;
            // Line of sight maps to the range axis at boresight.
            let along = d_rg * cos + d_az * sin;
            let across = -d_rg * sin + d_az * cos;
            worst = worst.max((v - bilinear(&reference, fine, across, along)).abs());
        }
        assert!(worst < 1e-3, "{deg} deg: {worst:e}");
    }
}

#[test]
fn azimuth_width_doubles_from_14_to_28_m() {
    let geometry = ImagingGeometry::paper2();
    let width = |range: f64| {
        let p = synthesize_psf(&geometry, 0.0, range, Truncation::default()).unwrap();
        let (ha, hr) = p.truncation_radius_cells;
        let az: Vec<f64> = p.samples.column(hr).iter().map(|v| v.abs()).collect();
        let rg: Vec<f64> = p.samples.row(ha).iter().map(|v| v.abs()).collect();
        (
            half_power_width(&az, ha, geometry.grid.spacing_azimuth_m).unwrap(),
            half_power_width(&rg, hr, geometry.grid.spacing_range_m).unwrap(),
        )
    };
    let (az14, rg14) = width(14.0);
    let (az28, rg28) = width(28.0);
    let ratio = az28 / az14;
    assert!((ratio - 2.0).abs() <= 0.1, "ratio {ratio}");
    assert!((rg28 / rg14 - 1.0).abs() < 0.05);
    // Half-power width of sinc(x/ρ) is about 0.886ρ.
    let rho_a = rho_azimuth(10e9, 5.0, 28.0);
    assert!((az28 / rho_a - 0.886).abs() < 0.02);
}
