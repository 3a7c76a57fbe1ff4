//! The closed-form PSF against a numerical inverse Fourier transform of a
//! rotated rectangular spectrum.

mod common;

use std::f64::consts::PI;

use common::*;
use nfsar_core::geometry::{PsfPatch, Truncation};

/// Inverse transform of the unit-height rectangle with half-widths
/// 1/(2ρ_r) along the line of sight and 1/(2ρ_a) across it, scaled so the
/// peak is 1. Spectral points are rotated into the (azimuth, range) frame
/// before the phase is taken.
fn inverse_transform(
    d_az: f64,
    d_rg: f64,
    angle: f64,
    rho_r: f64,
    rho_a: f64,
    rule_s: &[(f64, f64)],
    rule_t: &[(f64, f64)],
) -> f64 {
    let (sin, cos) = angle.sin_cos();
    let mut re = 0.0;
    for &(s, ws) in rule_s {
        for &(t, wt) in rule_t {
            let k_az = s * sin + t * cos;
            let k_rg = s * cos - t * sin;
            re += ws * wt * (2.0 * PI * (k_az * d_az + k_rg * d_rg)).cos();
        }
    }
    re * rho_r * rho_a
}

#[test]
fn patch_matches_inverse_fourier_transform() {
    let geometry = radar(grid(64, 64, 0.03, -0.96, 20.0));
    let rho_r = rho_range(2e9);
    let mut worst: f64 = 0.0;
    for &range in &[14.0, 21.0, 25.0, 28.0] {
        let rho_a = rho_azimuth(10e9, 5.0, range);
        let rule_s = composite_rule(-0.5 / rho_r, 0.5 / rho_r, 12, 16);
        let rule_t = composite_rule(-0.5 / rho_a, 0.5 / rho_a, 12, 16);
        for &deg in &[0.0f64, 15.0, 30.0, 45.0] {
            let angle = deg.to_radians();
            let patch =
                PsfPatch::synthesize_at(&geometry, range, angle, Truncation::FixedCells(17)).unwrap();
            assert!(!patch.clamped);
            let (ha, hr) = patch.truncation_radius_cells;
            for ((i, k), &v) in patch.samples.indexed_iter() {
                let d_az = (i as f64 - ha as f64) * 0.03;
                let d_rg = (k as f64 - hr as f64) * 0.03;
                let expected = inverse_transform(d_az, d_rg, angle, rho_r, rho_a, &rule_s, &rule_t);
                worst = worst.max((v - expected).abs());
            }
        }
    }
    assert!(worst < 1e-6, "max deviation {worst:e}");
}

#[test]
fn quadrature_rule_is_exact_for_polynomials() {
    let rule = gauss_legendre(8);
    let integral: f64 = rule.iter().map(|(x, w)| w * x.powi(14)).sum();
    assert!((integral - 2.0 / 15.0).abs() < 1e-14);
    let total: f64 = composite_rule(0.0, 3.0, 5, 4).iter().map(|(_, w)| w).sum();
    assert!((total - 3.0).abs() < 1e-14);
}

#[test]
fn masked_patch_keeps_closed_form_inside_support() {
    let geometry = radar(grid(200, 200, 0.04, 2.0, 20.0));
    let range = 25.0;
    let angle = 20f64.to_radians();
    let patch =
        PsfPatch::synthesize_at(&geometry, range, angle, Truncation::MinLevelDb(-30.0)).unwrap();
    let rho_r = rho_range(2e9);
    let rho_a = rho_azimuth(10e9, 5.0, range);
    let extent = 1.0 / (PI * 10f64.powf(-1.5));
    let (ha, hr) = patch.truncation_radius_cells;
    let (sin, cos) = angle.sin_cos();
    let mut inside = 0;
    for ((i, k), &v) in patch.samples.indexed_iter() {
        let d_az = (i as f64 - ha as f64) * 0.04;
        let d_rg = (k as f64 - hr as f64) * 0.04;
        let along = d_rg * cos + d_az * sin;
        let across = -d_rg * sin + d_az * cos;
        if along.abs() <= extent * rho_r && across.abs() <= extent * rho_a {
            inside += 1;
            let t1 = along / rho_r;
            let t2 = across / rho_a;
            let s1 = if t1 == 0.0 { 1.0 } else { (PI * t1).sin() / (PI * t1) };
            let s2 = if t2 == 0.0 { 1.0 } else { (PI * t2).sin() / (PI * t2) };
            assert!((v - s1 * s2).abs() < 1e-12);
        } else {
            assert_eq!(v, 0.0);
        }
    }
    assert!(inside > 100);
}
