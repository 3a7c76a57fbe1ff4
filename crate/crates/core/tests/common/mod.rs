#![allow(dead_code)]

use nfsar_core::geometry::GridSpec;
use nfsar_core::{ComplexImage, ImagingGeometry};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const C: f64 = 299_792_458.0;

pub fn rho_range(bandwidth_hz: f64) -> f64 {
    C / (2.0 * bandwidth_hz)
}

pub fn rho_azimuth(f0_hz: f64, rail_m: f64, slant_m: f64) -> f64 {
    (C / f0_hz) * slant_m / (2.0 * rail_m)
}

/// 10 GHz / 2 GHz / 5 m radar over an arbitrary grid.
pub fn radar(grid: GridSpec) -> ImagingGeometry {
    ImagingGeometry::new(10e9, 2e9, 5.0, grid).unwrap()
}

pub fn grid(n_az: usize, n_rg: usize, spacing: f64, origin_az: f64, origin_rg: f64) -> GridSpec {
    GridSpec {
        n_azimuth: n_az,
        n_range: n_rg,
        spacing_azimuth_m: spacing,
        spacing_range_m: spacing,
        origin_azimuth_m: origin_az,
        origin_range_m: origin_rg,
    }
}

pub fn cnormal(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn random_image(grid: GridSpec, rng: &mut ChaCha8Rng) -> ComplexImage {
    let mut img = ComplexImage::zeros(grid);
    for v in img.as_mut_slice() {
        *v = cnormal(rng);
    }
    img
}

pub fn max_abs_diff(a: &ComplexImage, b: &ComplexImage) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Composite Gauss-Legendre rule on [a, b].
pub fn composite_rule(a: f64, b: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let base = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for &(x, w) in &base {
            out.push((mid + 0.5 * h * x, 0.5 * h * w));
        }
    }
    out
}
