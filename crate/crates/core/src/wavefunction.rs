//! Grid wavefunctions, coherent states, and observables in harmonic-oscillator
//! units (ħ = m = ω = 1).

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FftPlan, Grid};

/// Tolerance on |norm² − 1| accepted by the observables.
pub const NORM_TOLERANCE: f64 = 1e-6;

/// Maximum Gaussian tail mass allowed outside the grid for a coherent state.
const TAIL_MASS_LIMIT: f64 = 1e-12;

/// A point in phase space. With ħ = 1, momentum and wavenumber coincide.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: f64,
    pub p: f64,
}

impl PhasePoint {
    pub const fn new(x: f64, p: f64) -> Self {
        Self { x, p }
    }

    pub fn distance(&self, other: &PhasePoint) -> f64 {
        (self.x - other.x).hypot(self.p - other.p)
    }

    /// Classical harmonic flow over time `t`: `(x cos t + p sin t, p cos t − x sin t)`.
    pub fn rotated(&self, t: f64) -> PhasePoint {
        let (s, c) = t.sin_cos();
        PhasePoint {
            x: self.x * c + self.p * s,
            p: self.p * c - self.x * s,
        }
    }

    /// `H0 = ½(x² + p²)` evaluated at this point.
    pub fn energy(&self) -> f64 {
        0.5 * (self.x * self.x + self.p * self.p)
    }
}

/// Position-space amplitudes on a [`Grid`] (units length^{-1/2}).
#[derive(Clone, Debug, PartialEq)]
pub struct Wavefunction {
    grid: Grid,
    amplitudes: Vec<Complex64>,
}

impl Wavefunction {
    pub fn new(grid: Grid, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != grid.len() {
            return Err(Error::Format(format!(
                "wavefunction has {} amplitudes for a grid of {} points",
                amplitudes.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, amplitudes })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            amplitudes: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    /// `Σ|ψ(x_i)|² dx`.
    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    /// `Σ conj(self)·other dx`.
    pub fn inner(&self, other: &Wavefunction) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            * self.grid.dx()
    }

    /// Rescales to unit norm and returns the norm before rescaling.
    pub fn normalize(&mut self) -> f64 {
        let norm = self.norm_sqr().sqrt();
        if norm > 0.0 {
            let inv = 1.0 / norm;
            self.amplitudes.iter_mut().for_each(|a| *a *= inv);
        }
        norm
    }

    /// Probability mass in `|x| > fraction·max(|x_min|, |x_max|)`.
    pub fn boundary_mass(&self, fraction: f64) -> f64 {
        let edge = fraction * self.grid.x_min().abs().max(self.grid.x_max().abs());
        let dx = self.grid.dx();
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| self.grid.x(*i).abs() > edge)
            .map(|(_, a)| a.norm_sqr())
            .sum::<f64>()
            * dx
    }

    fn require_normalized(&self) -> Result<()> {
        let n = self.norm_sqr();
        if (n - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized(n));
        }
        Ok(())
    }
}

/// Momentum-space amplitudes in FFT bin order, normalized so that
/// `Σ|ψ̃(k_m)|² dk = Σ|ψ(x_i)|² dx`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentumWavefunction {
    grid: Grid,
    amplitudes: Vec<Complex64>,
}

impl MomentumWavefunction {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.dk()
    }

    /// Wavenumber at which `|ψ̃|²` is largest.
    pub fn peak_k(&self) -> f64 {
        let (m, _) = self
            .amplitudes
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
            .expect("non-empty grid");
        self.grid.k(m)
    }
}

/// Sampled Gaussian wavepacket
/// `ψ(x) = (2πσ²)^{-1/4} exp(−(x−x_c)²/(4σ²)) exp(i k_c x)`.
pub fn coherent_state(center: PhasePoint, sigma: f64, grid: &Grid) -> Result<Wavefunction> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Config(format!("sigma must be positive (got {sigma})")));
    }
    let scale = sigma * std::f64::consts::SQRT_2;
    let tail = 0.5 * libm::erfc((center.x - grid.x_min()) / scale)
        + 0.5 * libm::erfc((grid.x_max() - center.x) / scale);
    if tail > TAIL_MASS_LIMIT {
        return Err(Error::GridTooNarrow(format!(
            "coherent state at x = {} with sigma = {sigma} leaves mass {tail:e} outside {grid}",
            center.x
        )));
    }
    let k_margin = 6.0 / (2.0 * sigma);
    if center.p.abs() + k_margin > grid.k_nyquist() {
        return Err(Error::GridTooCoarse(format!(
            "momentum {} (+{k_margin:.3}) exceeds the grid Nyquist wavenumber {:.3}",
            center.p,
            grid.k_nyquist()
        )));
    }
    let amp = (2.0 * PI * sigma * sigma).powf(-0.25);
    let inv_4s2 = 1.0 / (4.0 * sigma * sigma);
    let amplitudes = (0..grid.len())
        .map(|i| {
            let x = grid.x(i);
            let u = x - center.x;
            Complex64::from_polar(amp * (-u * u * inv_4s2).exp(), center.p * x)
        })
        .collect();
    Ok(Wavefunction {
        grid: *grid,
        amplitudes,
    })
}

/// Unitary transform to the continuous-convention momentum representation
/// `ψ̃(k) = (2π)^{-1/2} ∫ ψ(x) e^{−ikx} dx`.
pub fn to_momentum_space(psi: &Wavefunction) -> MomentumWavefunction {
    let grid = *psi.grid();
    let plan = FftPlan::new(grid.len());
    let mut data = psi.amplitudes().to_vec();
    let mut scratch = vec![Complex64::new(0.0, 0.0); plan.scratch_len()];
    plan.forward(&mut data, &mut scratch);
    let scale = grid.dx() / (2.0 * PI).sqrt();
    for (m, a) in data.iter_mut().enumerate() {
        *a *= Complex64::from_polar(scale, -grid.k(m) * grid.x_min());
    }
    MomentumWavefunction {
        grid,
        amplitudes: data,
    }
}

/// Inverse of [`to_momentum_space`].
pub fn from_momentum_space(phi: &MomentumWavefunction) -> Wavefunction {
    let grid = *phi.grid();
    let plan = FftPlan::new(grid.len());
    let mut data: Vec<Complex64> = phi
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(m, a)| a * Complex64::from_polar(1.0, grid.k(m) * grid.x_min()))
        .collect();
    let mut scratch = vec![Complex64::new(0.0, 0.0); plan.scratch_len()];
    plan.inverse(&mut data, &mut scratch);
    let scale = grid.dk() / (2.0 * PI).sqrt();
    data.iter_mut().for_each(|a| *a *= scale);
    Wavefunction {
        grid,
        amplitudes: data,
    }
}

pub fn mean_x(psi: &Wavefunction) -> Result<f64> {
    psi.require_normalized()?;
    let g = psi.grid();
    Ok(psi
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(i, a)| g.x(i) * a.norm_sqr())
        .sum::<f64>()
        * g.dx())
}

pub fn mean_p(psi: &Wavefunction) -> Result<f64> {
    psi.require_normalized()?;
    let phi = to_momentum_space(psi);
    let g = phi.grid();
    Ok(phi
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(m, a)| g.k(m) * a.norm_sqr())
        .sum::<f64>()
        * g.dk())
}

/// `⟨H0⟩ = ½⟨x²⟩ + ½⟨p²⟩`, with the kinetic part evaluated in momentum space.
pub fn mean_energy(psi: &Wavefunction) -> Result<f64> {
    psi.require_normalized()?;
    let g = psi.grid();
    let potential = psi
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let x = g.x(i);
            0.5 * x * x * a.norm_sqr()
        })
        .sum::<f64>()
        * g.dx();
    let phi = to_momentum_space(psi);
    let kinetic = phi
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(m, a)| {
            let k = g.k(m);
            0.5 * k * k * a.norm_sqr()
        })
        .sum::<f64>()
        * g.dk();
    Ok(potential + kinetic)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SIGMA: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn default_grid() -> Grid {
        Grid::new(-40.0, 40.0, 2048).unwrap()
    }

    #[test]
    fn centered_coherent_state_is_real_and_symmetric() {
        let g = default_grid();
        let psi = coherent_state(PhasePoint::new(0.0, 0.0), SIGMA, &g).unwrap();
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-10);
        assert!(psi
            .amplitudes()
            .iter()
            .all(|a| a.im.abs() < 1e-15 && a.re >= 0.0));
        assert!(mean_x(&psi).unwrap().abs() < 1e-12);
        assert!(mean_p(&psi).unwrap().abs() < 1e-12);
    }

    #[test]
    fn displaced_coherent_state_moments() {
        let g = default_grid();
        let psi = coherent_state(PhasePoint::new(19.44, 0.0), SIGMA, &g).unwrap();
        assert!((mean_x(&psi).unwrap() - 19.44).abs() < 1e-8);
        let e = mean_energy(&psi).unwrap();
        assert!((e - (19.44f64.powi(2) / 2.0 + 0.5)).abs() < 1e-6, "{e}");
    }

    #[test]
    fn momentum_profile_peaks_at_carrier() {
        let g = default_grid();
        let psi = coherent_state(PhasePoint::new(0.0, 3.0), SIGMA, &g).unwrap();
        let phi = to_momentum_space(&psi);
        assert!((phi.peak_k() - 3.0).abs() <= 0.5 * g.dk());
        // Gaussian of width 1/(2σ) around the carrier.
        let s2 = SIGMA * SIGMA;
        let expected = |k: f64| (2.0 * s2 / PI).sqrt() * (-2.0 * s2 * (k - 3.0).powi(2)).exp();
        for (m, a) in phi.amplitudes().iter().enumerate() {
            assert!((a.norm_sqr() - expected(g.k(m))).abs() < 1e-10);
        }
    }

    #[test]
    fn momentum_phase_matches_analytic_transform() {
        let g = default_grid();
        let (xm, kn) = (2.5, -1.5);
        let psi = coherent_state(PhasePoint::new(xm, kn), SIGMA, &g).unwrap();
        let phi = to_momentum_space(&psi);
        let s2 = SIGMA * SIGMA;
        for (m, a) in phi.amplitudes().iter().enumerate() {
            let k = g.k(m);
            // e^{-ikx} convention: phase −x_m (k − k_n), the conjugate of the
            // e^{+ikx} detector-state transform.
            let want = Complex64::from_polar(
                (2.0 * s2 / PI).powf(0.25) * (-s2 * (k - kn).powi(2)).exp(),
                -xm * (k - kn),
            );
            assert!((a - want).norm() < 1e-10, "k={k} got {a} want {want}");
        }
    }

    #[test]
    fn narrow_grid_is_rejected() {
        let g = Grid::new(-5.0, 5.0, 256).unwrap();
        let err = coherent_state(PhasePoint::new(4.0, 0.0), SIGMA, &g).unwrap_err();
        assert!(matches!(err, Error::GridTooNarrow(_)));
        let g = Grid::new(-10.0, 10.0, 512).unwrap();
        let err = coherent_state(PhasePoint::new(0.0, 80.0), SIGMA, &g).unwrap_err();
        assert!(matches!(err, Error::GridTooCoarse(_)));
    }

    #[test]
    fn observables_require_normalization() {
        let g = default_grid();
        let mut psi = coherent_state(PhasePoint::new(1.0, 0.0), SIGMA, &g).unwrap();
        psi.amplitudes_mut().iter_mut().for_each(|a| *a *= 2.0);
        assert!(matches!(mean_x(&psi), Err(Error::NotNormalized(_))));
        psi.normalize();
        assert!(mean_x(&psi).is_ok());
    }

    #[test]
    fn phase_point_rotation_is_classical_flow() {
        let z = PhasePoint::new(19.44, 0.0);
        let q = z.rotated(std::f64::consts::FRAC_PI_2);
        assert!(q.x.abs() < 1e-12 && (q.p + 19.44).abs() < 1e-12);
        assert!((z.rotated(0.7).energy() - z.energy()).abs() < 1e-12);
    }
}
