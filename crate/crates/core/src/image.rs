use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::GridSpec;

/// Complex samples on a grid, indexed `[[azimuth, range]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexImage {
    data: Array2<Complex64>,
    grid: GridSpec,
}

impl ComplexImage {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            data: Array2::zeros(grid.shape()),
            grid,
        }
    }

    /// Wraps `data`, rejecting shape mismatches and non-finite samples.
    pub fn from_array(grid: GridSpec, data: Array2<Complex64>) -> Result<Self> {
        if data.dim() != grid.shape() {
            return Err(Error::GridMismatch(format!(
                "data shape {:?} does not match grid {:?}",
                data.dim(),
                grid.shape()
            )));
        }
        if let Some(((ia, ir), _)) = data
            .indexed_iter()
            .find(|(_, v)| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(Error::NonFinite(ia, ir));
        }
        Ok(Self { data, grid })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn data(&self) -> &Array2<Complex64> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Array2<Complex64> {
        &mut self.data
    }

    pub fn into_data(self) -> Array2<Complex64> {
        self.data
    }

    pub fn as_slice(&self) -> &[Complex64] {
        self.data.as_slice().expect("image storage is contiguous")
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        self.data.as_slice_mut().expect("image storage is contiguous")
    }

    pub fn get(&self, ia: usize, ir: usize) -> Complex64 {
        self.data[[ia, ir]]
    }

    pub fn ensure_same_grid(&self, grid: &GridSpec) -> Result<()> {
        if &self.grid != grid {
            return Err(Error::GridMismatch(format!(
                "image grid {:?} differs from expected {:?}",
                self.grid, grid
            )));
        }
        Ok(())
    }

    pub fn ensure_finite(&self) -> Result<()> {
        match self
            .data
            .indexed_iter()
            .find(|(_, v)| !v.re.is_finite() || !v.im.is_finite())
        {
            Some(((ia, ir), _)) => Err(Error::NonFinite(ia, ir)),
            None => Ok(()),
        }
    }

    pub fn squared_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Hermitian inner product Σ conj(self)·other.
    pub fn inner(&self, other: &ComplexImage) -> Complex64 {
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `(azimuth, range)` index of the largest magnitude; lowest linear index
    /// wins ties.
    pub fn argmax_abs(&self) -> Option<(usize, usize)> {
        let mut best: Option<((usize, usize), f64)> = None;
        for (idx, v) in self.data.indexed_iter() {
            let m = v.norm_sqr();
            if best.map_or(true, |(_, b)| m > b) {
                best = Some((idx, m));
            }
        }
        best.map(|(idx, _)| idx)
    }

    pub fn count_nonzero(&self) -> usize {
        self.data.iter().filter(|v| **v != Complex64::new(0.0, 0.0)).count()
    }
}

impl std::ops::Sub for &ComplexImage {
    type Output = ComplexImage;

    fn sub(self, rhs: &ComplexImage) -> ComplexImage {
        assert_eq!(self.grid, rhs.grid, "grid mismatch in subtraction");
        ComplexImage {
            data: &self.data - &rhs.data,
            grid: self.grid,
        }
    }
}

impl std::ops::Add for &ComplexImage {
    type Output = ComplexImage;

    fn add(self, rhs: &ComplexImage) -> ComplexImage {
        assert_eq!(self.grid, rhs.grid, "grid mismatch in addition");
        ComplexImage {
            data: &self.data + &rhs.data,
            grid: self.grid,
        }
    }
}
