//! Reference solution of the ensemble-averaged dynamics,
//!
//! `dρ/dt = −i[H0, ρ] + γ Σ_α (|α⟩⟨α|ρ|α⟩⟨α| − ½{|α⟩⟨α|, ρ})`,
//!
//! integrated with classical Runge–Kutta on a small grid. Matrices are taken
//! in the orthonormal basis `e_i ↔ √dx δ(x − x_i)`, so a grid wavefunction
//! `ψ` becomes the vector `√dx ψ`. Intended for validating trajectory
//! ensembles on grids of at most a few hundred points.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::detectors::DetectorLattice;
use crate::error::{Error, Result};
use crate::grid::{FftPlan, Grid};
use crate::wavefunction::Wavefunction;

/// Allowed trace drift per unit time.
pub const TRACE_DRIFT_PER_TIME: f64 = 1e-6;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A density matrix on a position grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    grid: Grid,
    rho: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn new(grid: Grid, rho: DMatrix<Complex64>) -> Result<Self> {
        if rho.nrows() != grid.len() || rho.ncols() != grid.len() {
            return Err(Error::Config(format!(
                "density matrix is {}x{}, grid has {} points",
                rho.nrows(),
                rho.ncols(),
                grid.len()
            )));
        }
        Ok(Self { grid, rho })
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn from_pure(psi: &Wavefunction) -> Self {
        let v = basis_vector(psi);
        Self {
            grid: *psi.grid(),
            rho: &v * v.adjoint(),
        }
    }

    /// Equal-weight mixture of pure states.
    pub fn from_ensemble(states: &[Wavefunction]) -> Result<Self> {
        let first = states
            .first()
            .ok_or_else(|| Error::InsufficientData("empty ensemble".into()))?;
        let n = first.grid().len();
        let mut rho = DMatrix::from_element(n, n, ZERO);
        for psi in states {
            let v = basis_vector(psi);
            rho.gerc(Complex64::new(1.0, 0.0), &v, &v, Complex64::new(1.0, 0.0));
        }
        rho /= Complex64::new(states.len() as f64, 0.0);
        Ok(Self {
            grid: *first.grid(),
            rho,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.rho
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> f64 {
        self.rho.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Largest `|ρ_ij − conj(ρ_ji)|`.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.rho.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self.rho[(i, j)] - self.rho[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = hermitian_part(&self.rho)
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Position-space probability density `ρ(x_i, x_i)`, normalized per `dx`.
    pub fn position_density(&self) -> Vec<f64> {
        let dx = self.grid.dx();
        (0..self.grid.len()).map(|i| self.rho[(i, i)].re / dx).collect()
    }
}

/// `½ Σ|λ_i|` over the eigenvalues of `a − b`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    let diff = hermitian_part(&(&a.rho - &b.rho));
    0.5 * diff.symmetric_eigen().eigenvalues.iter().map(|l| l.abs()).sum::<f64>()
}

fn hermitian_part(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

fn basis_vector(psi: &Wavefunction) -> DVector<Complex64> {
    let s = psi.grid().dx().sqrt();
    DVector::from_iterator(psi.grid().len(), psi.amplitudes().iter().map(|a| a * s))
}

/// `H0 = T + V` in the grid basis, with the kinetic term taken from the
/// discrete Fourier representation of `p²/2`.
pub fn hamiltonian_matrix(grid: &Grid) -> DMatrix<Complex64> {
    let n = grid.len();
    let plan = FftPlan::new(n);
    let mut scratch = vec![ZERO; plan.scratch_len()];
    let mut h = DMatrix::from_element(n, n, ZERO);
    let mut col = vec![ZERO; n];
    for j in 0..n {
        col.iter_mut().for_each(|c| *c = ZERO);
        col[j] = Complex64::new(1.0, 0.0);
        plan.forward(&mut col, &mut scratch);
        for (m, c) in col.iter_mut().enumerate() {
            let k = grid.k(m);
            *c *= 0.5 * k * k / n as f64;
        }
        plan.inverse(&mut col, &mut scratch);
        for i in 0..n {
            h[(i, j)] = col[i];
        }
        let x = grid.x(j);
        h[(j, j)] += 0.5 * x * x;
    }
    hermitian_part(&h)
}

/// Switches for isolating parts of the generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GkslOptions {
    /// Include the oscillator Hamiltonian (on by default).
    pub free_evolution: bool,
}

impl Default for GkslOptions {
    fn default() -> Self {
        Self {
            free_evolution: true,
        }
    }
}

/// The master-equation generator for one detector lattice.
pub struct Generator {
    /// `−iH − ½γ Σ_α |α⟩⟨α|`.
    k: DMatrix<Complex64>,
    /// Detector states as columns.
    v: DMatrix<Complex64>,
    gamma: f64,
    /// Upper bound on the generator's spectral radius.
    bound: f64,
}

impl Generator {
    pub fn new(lattice: &DetectorLattice, options: GkslOptions) -> Self {
        let grid = *lattice.grid();
        let n = grid.len();
        let m = lattice.len();
        let gamma = lattice.geometry().gamma;
        let mut v = DMatrix::from_element(n, m, ZERO);
        for a in 0..m {
            v.set_column(a, &basis_vector(&lattice.state(a)));
        }
        let projector_sum = &v * v.adjoint();
        let h = if options.free_evolution {
            hamiltonian_matrix(&grid)
        } else {
            DMatrix::from_element(n, n, ZERO)
        };
        let k = h.map(|z| z * Complex64::new(0.0, -1.0)) - projector_sum.map(|z| z * (0.5 * gamma));
        let row_bound = |mat: &DMatrix<Complex64>| {
            (0..n)
                .map(|i| mat.row(i).iter().map(|z| z.norm()).sum::<f64>())
                .fold(0.0, f64::max)
        };
        let bound = row_bound(&h) + 2.0 * gamma * row_bound(&projector_sum);
        Self { k, v, gamma, bound }
    }

    /// `L(ρ) = Kρ + (Kρ)† + γ Σ_α ⟨α|ρ|α⟩ |α⟩⟨α|`.
    pub fn apply(&self, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let kr = &self.k * rho;
        let mut out = &kr + kr.adjoint();
        let rv = rho * &self.v;
        let weights: Vec<Complex64> = (0..self.v.ncols())
            .map(|a| self.v.column(a).dotc(&rv.column(a)) * self.gamma)
            .collect();
        let mut scaled = self.v.clone();
        for (a, w) in weights.iter().enumerate() {
            scaled.column_mut(a).scale_mut(w.re);
        }
        out += &scaled * self.v.adjoint();
        out
    }

    /// Largest stable step for the Runge–Kutta integrator used here.
    pub fn max_step(&self) -> f64 {
        0.5 / self.bound.max(1e-12)
    }
}

/// Integrates the master equation from `rho0` and returns the state at each
/// of the ascending `output_times`. The step is `dt_max` or smaller if
/// stability requires it.
pub fn gksl_reference_evolution(
    rho0: &DensityMatrix,
    lattice: &DetectorLattice,
    output_times: &[f64],
    dt_max: f64,
    options: GkslOptions,
) -> Result<Vec<DensityMatrix>> {
    if rho0.grid != *lattice.grid() {
        return Err(Error::Config("density matrix and lattice use different grids".into()));
    }
    if output_times.windows(2).any(|w| w[1] < w[0]) || output_times.first().is_some_and(|t| *t < 0.0) {
        return Err(Error::Config("output times must be ascending and non-negative".into()));
    }
    let gen = Generator::new(lattice, options);
    let dt_cap = dt_max.min(gen.max_step());
    let tr0 = rho0.trace();
    let mut rho = rho0.rho.clone();
    let mut t = 0.0;
    let mut out = Vec::with_capacity(output_times.len());
    for &target in output_times {
        let span = target - t;
        let steps = (span / dt_cap).ceil() as usize;
        if steps > 0 {
            let h = span / steps as f64;
            for _ in 0..steps {
                rho = rk4_step(&gen, &rho, h);
            }
        }
        t = target;
        let drift = (rho.trace().re - tr0).abs();
        let purity: f64 = rho.iter().map(|z| z.norm_sqr()).sum();
        if !purity.is_finite() || drift > TRACE_DRIFT_PER_TIME * t.max(1.0) || purity > 1.0 + 1e-6 {
            return Err(Error::StepUnstable(format!(
                "at t = {t}: trace drift {drift:e}, purity {purity}"
            )));
        }
        out.push(DensityMatrix {
            grid: rho0.grid,
            rho: rho.clone(),
        });
    }
    Ok(out)
}

fn rk4_step(gen: &Generator, rho: &DMatrix<Complex64>, h: f64) -> DMatrix<Complex64> {
    let half = Complex64::new(0.5 * h, 0.0);
    let full = Complex64::new(h, 0.0);
    let k1 = gen.apply(rho);
    let k2 = gen.apply(&(rho + &k1 * half));
    let k3 = gen.apply(&(rho + &k2 * half));
    let k4 = gen.apply(&(rho + &k3 * full));
    rho + (k1 + (k2 + k3) * Complex64::new(2.0, 0.0) + k4) * Complex64::new(h / 6.0, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::LatticeGeometry;
    use crate::evolution::SplitOperator;
    use crate::wavefunction::{coherent_state, PhasePoint};
    use std::f64::consts::FRAC_1_SQRT_2;

    fn setup(gamma: f64, extent: i64) -> DetectorLattice {
        let grid = Grid::new(-8.0, 8.0, 64).unwrap();
        let geom =
            LatticeGeometry::new(1.0, 1.0, FRAC_1_SQRT_2, gamma, (-extent, extent), (-extent, extent))
                .unwrap();
        DetectorLattice::sample(geom, &grid).unwrap()
    }

    #[test]
    fn hamiltonian_is_hermitian_with_oscillator_spectrum() {
        let grid = Grid::new(-10.0, 10.0, 128).unwrap();
        let h = hamiltonian_matrix(&grid);
        let mut ev: Vec<f64> = h.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        for (n, e) in ev.iter().take(6).enumerate() {
            assert!((e - (n as f64 + 0.5)).abs() < 1e-8, "{n}: {e}");
        }
    }

    #[test]
    fn without_detection_the_spectrum_is_conserved() {
        let lat = setup(0.0, 2);
        let psi = coherent_state(PhasePoint::new(1.5, 0.5), FRAC_1_SQRT_2, lat.grid()).unwrap();
        let rho0 = DensityMatrix::from_pure(&psi);
        let out = gksl_reference_evolution(&rho0, &lat, &[0.5, 1.0], 0.002, GkslOptions::default()).unwrap();
        for rho in &out {
            let ev = rho.eigenvalues();
            assert!((ev[ev.len() - 1] - 1.0).abs() < 1e-8);
            assert!(ev[0].abs() < 1e-8);
            assert!(rho.hermiticity_error() < 1e-12);
        }
        // Agrees with direct unitary propagation.
        let mut phi = psi.clone();
        let op = SplitOperator::new(*lat.grid(), 0.01);
        let mut scratch = vec![ZERO; op.scratch_len()];
        for _ in 0..100 {
            op.propagate(phi.amplitudes_mut(), 0.01, &mut scratch);
        }
        let d = trace_distance(&out[1], &DensityMatrix::from_pure(&phi));
        assert!(d < 1e-6, "{d}");
    }

    #[test]
    fn single_detector_state_is_stationary_without_hamiltonian() {
        let lat = setup(1.0, 0);
        let mut alpha = lat.state(0);
        alpha.normalize();
        let rho0 = DensityMatrix::from_pure(&alpha);
        let off = GkslOptions {
            free_evolution: false,
        };
        let out = gksl_reference_evolution(&rho0, &lat, &[1.0], 0.01, off).unwrap();
        assert!(trace_distance(&out[0], &rho0) < 1e-10);
    }

    #[test]
    fn trace_and_positivity_are_preserved() {
        let lat = setup(1.0, 2);
        let psi = coherent_state(PhasePoint::new(1.0, 0.0), FRAC_1_SQRT_2, lat.grid()).unwrap();
        let rho0 = DensityMatrix::from_pure(&psi);
        let out = gksl_reference_evolution(&rho0, &lat, &[0.25, 0.5], 0.005, GkslOptions::default()).unwrap();
        for rho in &out {
            assert!((rho.trace() - 1.0).abs() < 1e-10);
            assert!(rho.eigenvalues()[0] > -1e-9);
            assert!(rho.hermiticity_error() < 1e-12);
        }
        assert!(out[1].purity() < 0.99);
    }

    #[test]
    fn trace_distance_basics() {
        let grid = Grid::new(-8.0, 8.0, 64).unwrap();
        let a = DensityMatrix::from_pure(&coherent_state(PhasePoint::new(-3.0, 0.0), FRAC_1_SQRT_2, &grid).unwrap());
        let b = DensityMatrix::from_pure(&coherent_state(PhasePoint::new(3.0, 0.0), FRAC_1_SQRT_2, &grid).unwrap());
        assert!(trace_distance(&a, &a) < 1e-12);
        // Pure states: D = sqrt(1 − |⟨a|b⟩|²).
        let expect = (1.0 - (-36.0f64 / 2.0).exp()).sqrt();
        assert!((trace_distance(&a, &b) - expect).abs() < 1e-9);
        let mix = DensityMatrix::new(grid, (a.matrix() + b.matrix()) * Complex64::new(0.5, 0.0)).unwrap();
        assert!((mix.purity() - 0.5).abs() < 1e-6);
    }
}
