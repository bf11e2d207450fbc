//! Uniform periodic position grid and its discrete momentum grid.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Uniform grid `x_i = x_min + i·dx`, `i = 0..n_points`, treated as periodic.
///
/// The momentum grid follows the discrete Fourier convention: `k_m = m·dk`
/// for `m < n/2` and `(m − n)·dk` otherwise, with `dk = 2π/(x_max − x_min)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n_points: usize,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(Error::Config(format!(
                "grid bounds must satisfy x_min < x_max (got {x_min}, {x_max})"
            )));
        }
        if n_points < 2 || !n_points.is_power_of_two() {
            return Err(Error::Config(format!(
                "grid n_points must be a power of two (got {n_points})"
            )));
        }
        Ok(Self {
            x_min,
            x_max,
            n_points,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        self.n_points == 0
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn dx(&self) -> f64 {
        self.length() / self.n_points as f64
    }

    pub fn dk(&self) -> f64 {
        2.0 * PI / self.length()
    }

    /// Largest representable wavenumber, `π/dx`.
    pub fn k_nyquist(&self) -> f64 {
        PI / self.dx()
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    /// Wavenumber of FFT bin `m` (the Nyquist bin is taken as negative).
    #[inline]
    pub fn k(&self, m: usize) -> f64 {
        let n = self.n_points;
        let signed = if m < n / 2 {
            m as f64
        } else {
            m as f64 - n as f64
        };
        signed * self.dk()
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.n_points).map(|m| self.k(m)).collect()
    }

    /// Index of the grid point nearest to `x`, clamped to the grid.
    pub fn nearest_index(&self, x: f64) -> usize {
        let i = ((x - self.x_min) / self.dx()).round();
        i.clamp(0.0, (self.n_points - 1) as f64) as usize
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}) x {}", self.x_min, self.x_max, self.n_points)
    }
}

/// Forward/inverse FFT plans for one grid size. Cheap to clone and shareable
/// across threads.
#[derive(Clone)]
pub struct FftPlan {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    len: usize,
}

impl FftPlan {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
            len,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn scratch_len(&self) -> usize {
        self.forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len())
    }

    /// Unnormalized forward transform, `Σ_i a_i e^{−2πi mi/n}`.
    pub fn forward(&self, data: &mut [Complex64], scratch: &mut [Complex64]) {
        self.forward.process_with_scratch(data, scratch);
    }

    /// Unnormalized inverse transform, `Σ_m a_m e^{+2πi mi/n}`.
    pub fn inverse(&self, data: &mut [Complex64], scratch: &mut [Complex64]) {
        self.inverse.process_with_scratch(data, scratch);
    }
}

impl fmt::Debug for FftPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FftPlan").field("len", &self.len).finish()
    }
}
