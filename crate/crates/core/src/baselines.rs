//! Reference restoration methods.
//!
//! * ISTA assumes a spatially invariant PSF (the scene-center patch) and
//!   runs proximal gradient steps with FFT-based convolution.
//! * CLEAN repeatedly subtracts a fraction of the spatial-variant PSF at the
//!   residual peak.

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GridSpec, PsfBank, PsfPatch};
use crate::image::ComplexImage;
use crate::simulate::deposit_patch;
use crate::solver::{half_sq, l1_norm, shrink, RestorationResult};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// In-place 2D FFT over a row-major buffer.
struct Fft2 {
    rows: usize,
    cols: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(rows: usize, cols: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            rows,
            cols,
            row_fwd: planner.plan_fft_forward(cols),
            row_inv: planner.plan_fft_inverse(cols),
            col_fwd: planner.plan_fft_forward(rows),
            col_inv: planner.plan_fft_inverse(rows),
        }
    }

    fn run(&self, buf: &mut [Complex64], inverse: bool) {
        let (row_fft, col_fft) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        row_fft.process(buf);
        let mut column = vec![ZERO; self.rows];
        for c in 0..self.cols {
            for r in 0..self.rows {
                column[r] = buf[r * self.cols + c];
            }
            col_fft.process(&mut column);
            for r in 0..self.rows {
                buf[r * self.cols + c] = column[r];
            }
        }
        if inverse {
            let scale = 1.0 / (self.rows * self.cols) as f64;
            buf.iter_mut().for_each(|v| *v *= scale);
        }
    }
}

/// Shift-invariant convolution `H` with one PSF patch, clipped to the grid
/// the same way spatial-variant atoms are.
pub struct InvariantOperator {
    grid: GridSpec,
    half: (usize, usize),
    padded: (usize, usize),
    fft: Fft2,
    spectrum: Vec<Complex64>,
    kernel_sq_norm: f64,
}

impl InvariantOperator {
    pub fn new(grid: GridSpec, psf: &PsfPatch) -> Self {
        let (pr, pc) = psf.samples.dim();
        let padded = (grid.n_azimuth + pr - 1, grid.n_range + pc - 1);
        let fft = Fft2::new(padded.0, padded.1);
        let mut spectrum = vec![ZERO; padded.0 * padded.1];
        for ((i, k), w) in psf.samples.indexed_iter() {
            spectrum[i * padded.1 + k] = Complex64::new(*w, 0.0);
        }
        fft.run(&mut spectrum, false);
        Self {
            grid,
            half: psf.truncation_radius_cells,
            padded,
            fft,
            spectrum,
            kernel_sq_norm: psf.squared_norm(),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn load(&self, image: &ComplexImage) -> Vec<Complex64> {
        let mut buf = vec![ZERO; self.padded.0 * self.padded.1];
        let n_rg = self.grid.n_range;
        for (ia, row) in image.as_slice().chunks(n_rg).enumerate() {
            buf[ia * self.padded.1..ia * self.padded.1 + n_rg].copy_from_slice(row);
        }
        buf
    }

    fn filter(&self, image: &ComplexImage, conjugate: bool) -> Vec<Complex64> {
        let mut buf = self.load(image);
        self.fft.run(&mut buf, false);
        for (b, k) in buf.iter_mut().zip(&self.spectrum) {
            *b *= if conjugate { k.conj() } else { *k };
        }
        self.fft.run(&mut buf, true);
        buf
    }

    /// `H x`: (Hx)[p] = Σ_q x[q]·psf[p − q + half].
    pub fn apply(&self, x: &ComplexImage) -> Result<ComplexImage> {
        x.ensure_same_grid(&self.grid)?;
        let full = self.filter(x, false);
        let mut out = ComplexImage::zeros(self.grid);
        let (ha, hr) = self.half;
        let n_rg = self.grid.n_range;
        for (ia, row) in out.as_mut_slice().chunks_mut(n_rg).enumerate() {
            let start = (ia + ha) * self.padded.1 + hr;
            row.copy_from_slice(&full[start..start + n_rg]);
        }
        Ok(out)
    }

    /// `Hᴴ y`: correlation with the (real) PSF.
    pub fn adjoint(&self, y: &ComplexImage) -> Result<ComplexImage> {
        y.ensure_same_grid(&self.grid)?;
        let full = self.filter(y, true);
        let mut out = ComplexImage::zeros(self.grid);
        let (ha, hr) = self.half;
        let (pa, pr) = self.padded;
        let n_rg = self.grid.n_range;
        for (ia, row) in out.as_mut_slice().chunks_mut(n_rg).enumerate() {
            let src_row = (ia + pa - ha) % pa;
            for (ir, v) in row.iter_mut().enumerate() {
                *v = full[src_row * pr + (ir + pr - hr) % pr];
            }
        }
        Ok(out)
    }

    /// Largest eigenvalue of HᴴH by power iteration from a fixed start.
    /// Returns the estimate once its relative change drops below `tol`.
    pub fn lipschitz(&self, tol: f64, max_iter: usize) -> Result<f64> {
        let data = Array2::from_shape_fn(self.grid.shape(), |(i, k)| {
            // deterministic, non-degenerate starting vector
            let t = (i * 7919 + k * 104_729) as f64;
            Complex64::new(1.0 + 0.5 * t.sin(), 0.25 * t.cos())
        });
        let mut v = ComplexImage::from_array(self.grid, data)?;
        let mut estimate = 0.0;
        for _ in 0..max_iter {
            let norm = v.squared_norm().sqrt();
            v.data_mut().mapv_inplace(|z| z / norm);
            let w = self.adjoint(&self.apply(&v)?)?;
            let next = v.inner(&w).re;
            let change = (next - estimate).abs() / next.abs().max(f64::MIN_POSITIVE);
            estimate = next;
            v = w;
            if change < tol {
                return Ok(estimate);
            }
        }
        Err(Error::Domain(format!(
            "power iteration did not converge in {max_iter} iterations"
        )))
    }

    pub fn kernel_squared_norm(&self) -> f64 {
        self.kernel_sq_norm
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IstaConfig {
    pub lambda_reg: f64,
    /// Step size; `None` selects 0.99 / L_op.
    pub mu: Option<f64>,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for IstaConfig {
    fn default() -> Self {
        Self {
            lambda_reg: 0.0,
            mu: None,
            max_iterations: 500,
            tolerance: 1e-6,
        }
    }
}

const POWER_TOL: f64 = 1e-6;
const POWER_MAX_ITER: usize = 1000;

/// ISTA with the single kernel `center_psf`.
pub fn ista_restore(
    y: &ComplexImage,
    center_psf: &PsfPatch,
    config: &IstaConfig,
) -> Result<RestorationResult> {
    y.ensure_finite()?;
    let op = InvariantOperator::new(*y.grid(), center_psf);
    ista_with_operator(y, &op, config)
}

pub fn ista_with_operator(
    y: &ComplexImage,
    op: &InvariantOperator,
    config: &IstaConfig,
) -> Result<RestorationResult> {
    y.ensure_same_grid(op.grid())?;
    if !(config.lambda_reg >= 0.0 && config.lambda_reg.is_finite()) {
        return Err(Error::Config("ISTA lambda must be non-negative".into()));
    }
    if config.max_iterations == 0 || !(config.tolerance > 0.0) {
        return Err(Error::Config(
            "ISTA needs at least one iteration and a positive tolerance".into(),
        ));
    }
    let lipschitz = op.lipschitz(POWER_TOL, POWER_MAX_ITER)?;
    let mu = match config.mu {
        Some(mu) if !(mu > 0.0) => {
            return Err(Error::Config(format!("ISTA step must be positive, got {mu}")))
        }
        Some(mu) if mu > 1.0 / lipschitz => {
            return Err(Error::Config(format!(
                "ISTA step {mu} exceeds 1/L = {}",
                1.0 / lipschitz
            )))
        }
        Some(mu) => mu,
        None => 0.99 / lipschitz,
    };
    let lambda = config.lambda_reg;

    let mut x = ComplexImage::zeros(*y.grid());
    let mut residual = y.clone();
    let mut trace = vec![half_sq(residual.as_slice())];
    let mut converged = trace[0] == 0.0;
    let mut iterations = 0;
    while !converged && iterations < config.max_iterations {
        let grad = op.adjoint(&residual)?;
        for (xv, g) in x.as_mut_slice().iter_mut().zip(grad.as_slice()) {
            *xv = shrink(*xv + g * mu, mu * lambda);
        }
        residual = y - &op.apply(&x)?;
        iterations += 1;
        let objective = half_sq(residual.as_slice()) + lambda * l1_norm(x.as_slice());
        let previous = *trace.last().unwrap();
        trace.push(objective);
        if (previous - objective).abs() / previous.max(f64::MIN_POSITIVE) < config.tolerance {
            converged = true;
        }
    }
    Ok(RestorationResult {
        method: "ISTA".into(),
        coefficients: x,
        residual,
        objective_trace: trace,
        iterations,
        converged,
        lambda_reg: lambda,
        scatterers: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CleanConfig {
    pub loop_gain: f64,
    /// Stop once the residual peak falls this far below the initial peak (dB).
    pub stop_threshold_db: f64,
    pub max_components: usize,
}

impl Default for CleanConfig {
    fn default() -> Self {
        Self {
            loop_gain: 0.5,
            stop_threshold_db: -25.0,
            max_components: 130,
        }
    }
}

impl CleanConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.loop_gain > 0.0 && self.loop_gain <= 1.0) {
            return Err(Error::Config(format!(
                "loop gain must lie in (0, 1], got {}",
                self.loop_gain
            )));
        }
        if self.max_components == 0 {
            return Err(Error::Config("max_components must be at least 1".into()));
        }
        if self.stop_threshold_db.is_nan() {
            return Err(Error::Config("stop threshold must be a number".into()));
        }
        Ok(())
    }
}

/// One CLEAN component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CleanComponent {
    pub cell: (usize, usize),
    pub amplitude: Complex64,
}

/// CLEAN with spatial-variant PSFs. The objective trace records ½‖r‖² after
/// each subtraction.
pub fn clean_restore(
    y: &ComplexImage,
    bank: &PsfBank,
    config: &CleanConfig,
) -> Result<RestorationResult> {
    Ok(clean_with_components(y, bank, config)?.0)
}

pub fn clean_with_components(
    y: &ComplexImage,
    bank: &PsfBank,
    config: &CleanConfig,
) -> Result<(RestorationResult, Vec<CleanComponent>)> {
    config.validate()?;
    y.ensure_same_grid(&bank.geometry().grid)?;
    y.ensure_finite()?;
    let mut residual = y.clone();
    let mut coefficients = ComplexImage::zeros(*y.grid());
    let mut components = Vec::new();
    let mut trace = vec![half_sq(residual.as_slice())];
    let initial_peak = residual.max_abs();
    let stop_level = initial_peak * 10f64.powf(config.stop_threshold_db / 20.0);
    let mut converged = initial_peak == 0.0;

    while !converged && components.len() < config.max_components {
        let cell = residual.argmax_abs().expect("non-empty grid");
        let peak = residual.get(cell.0, cell.1);
        if peak.norm() < stop_level {
            converged = true;
            break;
        }
        let amplitude = peak * config.loop_gain;
        deposit_patch(&mut residual, cell, -amplitude, bank.lookup(cell.0, cell.1));
        coefficients.data_mut()[[cell.0, cell.1]] += amplitude;
        components.push(CleanComponent { cell, amplitude });
        trace.push(half_sq(residual.as_slice()));
    }
    if !converged && residual.max_abs() < stop_level {
        converged = true;
    }
    let result = RestorationResult {
        method: "CLEAN".into(),
        coefficients,
        residual,
        objective_trace: trace,
        iterations: components.len(),
        converged,
        lambda_reg: 0.0,
        scatterers: Vec::new(),
    };
    Ok((result, components))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ImagingGeometry, Quantization, Truncation};
    use crate::simulate::{degrade, Scatterer, SceneSpec};

    #[test]
    fn ista_zero_input() {
        let g = ImagingGeometry::paper1(16);
        let bank = PsfBank::build(&g, Quantization::default(), Truncation::FixedCells(5)).unwrap();
        let (ca, cr) = g.grid.center_cell();
        let y = ComplexImage::zeros(g.grid);
        let cfg = IstaConfig {
            lambda_reg: 0.1,
            ..IstaConfig::default()
        };
        let res = ista_restore(&y, bank.lookup(ca, cr), &cfg).unwrap();
        assert_eq!(res.coefficients.max_abs(), 0.0);
    }

    #[test]
    fn ista_rejects_oversized_step() {
        let g = ImagingGeometry::paper1(16);
        let bank = PsfBank::build(&g, Quantization::default(), Truncation::FixedCells(5)).unwrap();
        let mut y = ComplexImage::zeros(g.grid);
        y.data_mut()[[3, 3]] = Complex64::new(1.0, 0.0);
        let cfg = IstaConfig {
            lambda_reg: 0.1,
            mu: Some(100.0),
            ..IstaConfig::default()
        };
        assert!(ista_restore(&y, bank.lookup(8, 8), &cfg).is_err());
    }

    #[test]
    fn clean_zero_image_has_no_components() {
        let g = ImagingGeometry::paper1(16);
        let bank = PsfBank::build(&g, Quantization::default(), Truncation::FixedCells(5)).unwrap();
        let y = ComplexImage::zeros(g.grid);
        let (res, comps) = clean_with_components(&y, &bank, &CleanConfig::default()).unwrap();
        assert!(comps.is_empty());
        assert_eq!(res.coefficients.max_abs(), 0.0);
    }

    #[test]
    fn clean_config_validation() {
        for cfg in [
            CleanConfig {
                loop_gain: 0.0,
                ..CleanConfig::default()
            },
            CleanConfig {
                loop_gain: 1.5,
                ..CleanConfig::default()
            },
            CleanConfig {
                max_components: 0,
                ..CleanConfig::default()
            },
        ] {
            assert!(cfg.validate().is_err());
        }
    }

    #[test]
    fn clean_unit_gain_isolated_scatterer() {
        let g = ImagingGeometry::paper1(64);
        let bank = PsfBank::build(&g, Quantization::default(), Truncation::default()).unwrap();
        let scene = SceneSpec::new("one", vec![Scatterer::new(2.24, 23.4, 0.0, 0.7)]);
        let y = degrade(&scene, &g, &bank, None).unwrap();
        let cfg = CleanConfig {
            loop_gain: 1.0,
            ..CleanConfig::default()
        };
        let (res, comps) = clean_with_components(&y, &bank, &cfg).unwrap();
        assert_eq!(comps.len(), 1);
        let cell = g.grid.nearest_cell(2.24, 23.4).unwrap();
        assert_eq!(comps[0].cell, cell);
        assert!((comps[0].amplitude - scene.scatterers[0].complex_amplitude()).norm() < 1e-9);
        assert!(res.converged);
    }
}
