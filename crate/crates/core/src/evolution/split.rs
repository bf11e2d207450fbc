//! Lab-frame propagation on the global position grid.
//!
//! Free evolution uses the exact factorization of the oscillator propagator
//! into three shears, `e^{−iH0δt} = K(tan(δt/2)) V(sin δt) K(tan(δt/2))` with
//! `K(a) = e^{−ia p²/2}` and `V(b) = e^{−ib x²/2}`, so it carries no
//! time-discretization error; the damping factor `1 − ½γδt Σ|α⟩⟨α|` is
//! applied before it.

use num_complex::Complex64;

use super::{Moments, Propagator, BOUNDARY_MASS_LIMIT};
use crate::detectors::{overlaps, DetectorLattice, OverlapVector};
use crate::error::{Error, Result};
use crate::grid::{FftPlan, Grid};
use crate::wavefunction::Wavefunction;

/// Fraction of the grid half-width beyond which mass counts as leaked.
const EDGE_FRACTION: f64 = 0.9;

/// Precomputed phase factors of the free oscillator propagator.
#[derive(Clone, Debug)]
pub struct SplitOperator {
    grid: Grid,
    plan: FftPlan,
    dt: f64,
    kinetic: Vec<Complex64>,
    potential: Vec<Complex64>,
}

fn kinetic_factors(grid: &Grid, dt: f64) -> Vec<Complex64> {
    let a = (0.5 * dt).tan();
    let n = grid.len() as f64;
    (0..grid.len())
        .map(|m| {
            let k = grid.k(m);
            Complex64::from_polar(1.0 / n, -0.5 * a * k * k)
        })
        .collect()
}

fn potential_factors(grid: &Grid, dt: f64) -> Vec<Complex64> {
    let b = dt.sin();
    (0..grid.len())
        .map(|i| {
            let x = grid.x(i);
            Complex64::from_polar(1.0, -0.5 * b * x * x)
        })
        .collect()
}

/// `⟨p⟩` and `⟨p²⟩` from unnormalized spectral amplitudes.
fn spectral_moments(grid: &Grid, spectrum: &[Complex64]) -> (f64, f64) {
    let (mut w, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for (m, a) in spectrum.iter().enumerate() {
        let q = a.norm_sqr();
        let k = grid.k(m);
        w += q;
        s1 += q * k;
        s2 += q * k * k;
    }
    (s1 / w, s2 / w)
}

impl SplitOperator {
    /// Propagator for steps of length `dt` on `grid`.
    pub fn new(grid: Grid, dt: f64) -> Self {
        Self {
            plan: FftPlan::new(grid.len()),
            kinetic: kinetic_factors(&grid, dt),
            potential: potential_factors(&grid, dt),
            grid,
            dt,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn scratch_len(&self) -> usize {
        self.plan.scratch_len()
    }

    /// Applies `e^{−iH0h}` in place and returns `(⟨p⟩, ⟨p²⟩)` of the result.
    pub fn propagate(&self, amps: &mut [Complex64], h: f64, scratch: &mut [Complex64]) -> (f64, f64) {
        let same = (h - self.dt).abs() <= 1e-15 * self.dt;
        let (kin_owned, pot_owned);
        let (kin, pot) = if same {
            (&self.kinetic[..], &self.potential[..])
        } else {
            kin_owned = kinetic_factors(&self.grid, h);
            pot_owned = potential_factors(&self.grid, h);
            (&kin_owned[..], &pot_owned[..])
        };

        self.plan.forward(amps, scratch);
        amps.iter_mut().zip(kin).for_each(|(a, f)| *a *= f);
        self.plan.inverse(amps, scratch);
        amps.iter_mut().zip(pot).for_each(|(a, f)| *a *= f);
        self.plan.forward(amps, scratch);
        amps.iter_mut().zip(kin).for_each(|(a, f)| *a *= f);
        let moments = spectral_moments(&self.grid, amps);
        self.plan.inverse(amps, scratch);
        moments
    }
}

/// Switches for isolating parts of the no-jump step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepOptions {
    /// Apply the free oscillator evolution (on by default).
    pub free_evolution: bool,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            free_evolution: true,
        }
    }
}

/// Result of one no-jump step.
#[derive(Clone, Debug)]
pub struct NoJumpStep {
    /// Normalized state at the end of the step.
    pub state: Wavefunction,
    /// Overlaps `⟨α|ψ⟩` of the state at the start of the step.
    pub overlaps: OverlapVector,
    /// `Σ_α γδt|⟨α|ψ⟩|²` at the start of the step.
    pub total_jump_prob: f64,
    /// Norm of the state before renormalization.
    pub pre_norm: f64,
}

/// One no-jump step of length `dt` on the lattice's grid.
pub fn no_jump_step(psi: &Wavefunction, lat: &DetectorLattice, dt: f64) -> Result<NoJumpStep> {
    no_jump_step_with(psi, lat, dt, StepOptions::default())
}

pub fn no_jump_step_with(
    psi: &Wavefunction,
    lat: &DetectorLattice,
    dt: f64,
    options: StepOptions,
) -> Result<NoJumpStep> {
    let gamma = lat.geometry().gamma;
    let c = overlaps(psi, lat);
    let total_jump_prob = gamma * dt * c.total_weight();
    if total_jump_prob >= super::MAX_STEP_JUMP_PROBABILITY {
        return Err(Error::TimestepTooLarge(total_jump_prob));
    }
    let mut state = psi.clone();
    let scale = Complex64::new(-0.5 * gamma * dt, 0.0);
    for (a, &coeff) in c.values().iter().enumerate() {
        lat.add_scaled(a, scale * coeff, state.amplitudes_mut());
    }
    if options.free_evolution {
        let op = SplitOperator::new(*lat.grid(), dt);
        let mut scratch = vec![Complex64::new(0.0, 0.0); op.scratch_len()];
        op.propagate(state.amplitudes_mut(), dt, &mut scratch);
    }
    let pre_norm = state.normalize();
    let leaked = state.boundary_mass(EDGE_FRACTION);
    if leaked > BOUNDARY_MASS_LIMIT {
        return Err(Error::BoundaryLeak(leaked));
    }
    Ok(NoJumpStep {
        state,
        overlaps: c,
        total_jump_prob,
        pre_norm,
    })
}

/// Trajectory state for the split engine.
pub(crate) struct SplitEngine<'a> {
    lattice: &'a DetectorLattice,
    operator: &'a SplitOperator,
    psi: Wavefunction,
    scratch: Vec<Complex64>,
    moments: Moments,
}

impl<'a> SplitEngine<'a> {
    pub fn new(lattice: &'a DetectorLattice, operator: &'a SplitOperator, initial: usize) -> Self {
        let mut engine = Self {
            lattice,
            operator,
            psi: Wavefunction::zeros(*lattice.grid()),
            scratch: vec![Complex64::new(0.0, 0.0); operator.scratch_len()],
            moments: Moments::coherent(lattice.geometry().center(initial), lattice.geometry().sigma),
        };
        engine.jump(initial, 0.0, 0.0);
        engine
    }

    pub fn into_state(self) -> Wavefunction {
        self.psi
    }
}

impl Propagator for SplitEngine<'_> {
    fn lab_moments(&self, _t: f64) -> Moments {
        self.moments
    }

    fn overlaps(&mut self, _t: f64, cands: &[usize], out: &mut Vec<Complex64>) {
        out.clear();
        let amps = self.psi.amplitudes();
        out.extend(cands.iter().map(|&a| self.lattice.overlap_with(a, amps)));
    }

    fn no_jump(&mut self, _t: f64, h: f64, cands: &[usize], coeffs: &[Complex64]) -> Result<()> {
        let gamma = self.lattice.geometry().gamma;
        let scale = Complex64::new(-0.5 * gamma * h, 0.0);
        let amps = self.psi.amplitudes_mut();
        for (&a, &c) in cands.iter().zip(coeffs) {
            self.lattice.add_scaled(a, scale * c, amps);
        }
        self.advance(h);
        let leaked = self.psi.boundary_mass(EDGE_FRACTION);
        if leaked > BOUNDARY_MASS_LIMIT {
            return Err(Error::BoundaryLeak(leaked));
        }
        Ok(())
    }

    fn jump(&mut self, flat: usize, _t: f64, h: f64) {
        self.psi = super::apply_jump(flat, self.lattice);
        if h > 0.0 {
            self.advance(h);
        } else {
            let geom = self.lattice.geometry();
            self.moments = Moments::coherent(geom.center(flat), geom.sigma);
        }
    }
}

impl SplitEngine<'_> {
    /// Unitary propagation by `h` followed by normalization and a refresh
    /// of the moments.
    fn advance(&mut self, h: f64) {
        let (p1, p2) = self.operator.propagate(self.psi.amplitudes_mut(), h, &mut self.scratch);
        self.psi.normalize();

        let grid = *self.psi.grid();
        let dx = grid.dx();
        let (mut x1, mut x2) = (0.0, 0.0);
        for (i, a) in self.psi.amplitudes().iter().enumerate() {
            let q = a.norm_sqr() * dx;
            let x = grid.x(i);
            x1 += q * x;
            x2 += q * x * x;
        }
        self.moments = Moments {
            mean_x: x1,
            mean_p: p1,
            var_x: x2 - x1 * x1,
            var_p: p2 - p1 * p1,
        };
    }
}
