//! Interaction-picture propagation on a small co-moving grid.
//!
//! In the frame rotating with the oscillator, `φ(t) = e^{iH0t} ψ(t)` feels
//! only the damping `1 − ½γδt Σ_α|α(t)⟩⟨α(t)|`, where `|α(t)⟩ = e^{iH0t}|α⟩`
//! is again a coherent state, centered at the lab detector center rotated
//! back by `t`. The state stays compact, so it is stored on a grid of a few
//! hundred points that follows its center. A momentum carrier is factored
//! out, `ψ(x_i) = e^{iP_c x_i} φ_i`, so that only the momentum spread has
//! to be resolved. Both engines use the same first-order splitting, so they
//! produce the same trajectories up to round-off.
//!
//! Coherent states keep their shape under the rotation only for the
//! standard width `σ² = ½`.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::{Moments, Propagator, BOUNDARY_MASS_LIMIT};
use crate::config::SimConfig;
use crate::detectors::{LatticeGeometry, WINDOW_SIGMAS};
use crate::error::{Error, Result};
use crate::grid::FftPlan;
use crate::wavefunction::PhasePoint;

/// Fraction of the local half-width (or Nyquist wavenumber) beyond which
/// mass counts as leaked.
const EDGE_FRACTION: f64 = 0.9;

/// Drift of `⟨x⟩` from the grid center, or of `⟨p⟩` from the carrier, that
/// triggers re-centering.
const RECENTER_THRESHOLD: f64 = 1.0;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

pub(crate) struct RotatingEngine<'a> {
    geom: &'a LatticeGeometry,
    plan: &'a FftPlan,
    n: usize,
    dx: f64,
    /// Position of local grid point 0.
    origin: f64,
    carrier: f64,
    phi: Vec<Complex64>,
    spectrum: Vec<Complex64>,
    scratch: Vec<Complex64>,
    /// `(first grid index, offset into arena, length)` per candidate.
    windows: Vec<(usize, usize, usize)>,
    arena: Vec<Complex64>,
    moments: Moments,
    amp: f64,
    inv_4s2: f64,
    window_half: f64,
    decay: f64,
}

impl<'a> RotatingEngine<'a> {
    pub fn new(config: &SimConfig, geom: &'a LatticeGeometry, plan: &'a FftPlan, initial: usize) -> Self {
        let n = config.local_points;
        let dx = 2.0 * config.local_half_width / n as f64;
        let s2 = geom.sigma * geom.sigma;
        let mut engine = Self {
            geom,
            plan,
            n,
            dx,
            origin: 0.0,
            carrier: 0.0,
            phi: vec![ZERO; n],
            spectrum: vec![ZERO; n],
            scratch: vec![ZERO; plan.scratch_len()],
            windows: Vec::new(),
            arena: Vec::new(),
            moments: Moments::coherent(geom.center(initial), geom.sigma),
            amp: (2.0 * PI * s2).powf(-0.25),
            inv_4s2: 1.0 / (4.0 * s2),
            window_half: WINDOW_SIGMAS * geom.sigma,
            decay: (-dx * dx / (2.0 * s2)).exp(),
        };
        engine.jump(initial, 0.0, 0.0);
        engine
    }

    fn x(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.dx
    }

    fn grid_center(&self) -> f64 {
        self.x(self.n / 2)
    }

    fn k(&self, m: usize) -> f64 {
        let dk = 2.0 * PI / (self.n as f64 * self.dx);
        if m < self.n / 2 {
            m as f64 * dk
        } else {
            (m as f64 - self.n as f64) * dk
        }
    }

    /// Recomputes the moments; fails if mass reaches the grid edges in
    /// position or momentum.
    fn update_moments(&mut self) -> Result<()> {
        let half = 0.5 * self.n as f64 * self.dx;
        let center = self.grid_center();
        let (mut x1, mut x2, mut edge) = (0.0, 0.0, 0.0);
        for (i, a) in self.phi.iter().enumerate() {
            let q = a.norm_sqr() * self.dx;
            let x = self.origin + i as f64 * self.dx;
            x1 += q * x;
            x2 += q * x * x;
            if (x - center).abs() > EDGE_FRACTION * half {
                edge += q;
            }
        }
        if edge > BOUNDARY_MASS_LIMIT {
            return Err(Error::BoundaryLeak(edge));
        }

        self.spectrum.copy_from_slice(&self.phi);
        self.plan.forward(&mut self.spectrum, &mut self.scratch);
        let k_nyq = PI / self.dx;
        let (mut w, mut k1, mut k2, mut k_edge) = (0.0, 0.0, 0.0, 0.0);
        for (m, a) in self.spectrum.iter().enumerate() {
            let q = a.norm_sqr();
            let k = self.k(m);
            w += q;
            k1 += q * k;
            k2 += q * k * k;
            if k.abs() > EDGE_FRACTION * k_nyq {
                k_edge += q;
            }
        }
        let (k1, k2, k_edge) = (k1 / w, k2 / w, k_edge / w);
        if k_edge > BOUNDARY_MASS_LIMIT {
            return Err(Error::BoundaryLeak(k_edge));
        }
        self.moments = Moments {
            mean_x: x1,
            mean_p: self.carrier + k1,
            var_x: x2 - x1 * x1,
            var_p: k2 - k1 * k1,
        };
        Ok(())
    }

    /// Moves the grid and the carrier to follow the state.
    fn recenter(&mut self) {
        let shift = ((self.moments.mean_x - self.grid_center()) / self.dx).round() as i64;
        if (shift as f64 * self.dx).abs() > RECENTER_THRESHOLD {
            let n = self.n as i64;
            let old = std::mem::replace(&mut self.phi, vec![ZERO; self.n]);
            for i in 0..n {
                let src = i + shift;
                if (0..n).contains(&src) {
                    self.phi[i as usize] = old[src as usize];
                }
            }
            self.origin += shift as f64 * self.dx;
        }
        let dp = self.moments.mean_p - self.carrier;
        if dp.abs() > RECENTER_THRESHOLD {
            for i in 0..self.n {
                let x = self.x(i);
                self.phi[i] *= Complex64::from_polar(1.0, -dp * x);
            }
            self.carrier += dp;
        }
    }
}

impl Propagator for RotatingEngine<'_> {
    /// Only `var_x + var_p` is frame independent for `σ² = ½`; the
    /// individual variances are reported in the rotating frame.
    fn lab_moments(&self, t: f64) -> Moments {
        let lab = PhasePoint::new(self.moments.mean_x, self.moments.mean_p).rotated(t);
        Moments {
            mean_x: lab.x,
            mean_p: lab.p,
            ..self.moments
        }
    }

    fn overlaps(&mut self, t: f64, cands: &[usize], out: &mut Vec<Complex64>) {
        out.clear();
        self.windows.clear();
        self.arena.clear();
        let last = (self.n - 1) as f64;
        for &a in cands {
            let c = self.geom.center(a).rotated(-t);
            let lo = ((c.x - self.window_half - self.origin) / self.dx).ceil().max(0.0);
            let hi = ((c.x + self.window_half - self.origin) / self.dx).floor().min(last);
            if lo > hi {
                self.windows.push((0, self.arena.len(), 0));
                out.push(ZERO);
                continue;
            }
            let (lo, hi) = (lo as usize, hi as usize);
            let dphase = c.p - self.carrier;
            let u0 = self.x(lo) - c.x;
            let mut g = Complex64::from_polar(self.amp * (-u0 * u0 * self.inv_4s2).exp(), dphase * u0);
            let mut r = Complex64::from_polar(
                (-(2.0 * u0 * self.dx + self.dx * self.dx) * self.inv_4s2).exp(),
                dphase * self.dx,
            );
            let offset = self.arena.len();
            let mut acc = ZERO;
            for &v in &self.phi[lo..=hi] {
                self.arena.push(g);
                acc += g.conj() * v;
                g *= r;
                r *= self.decay;
            }
            self.windows.push((lo, offset, hi - lo + 1));
            out.push(acc * self.dx);
        }
    }

    fn no_jump(&mut self, _t: f64, h: f64, _cands: &[usize], coeffs: &[Complex64]) -> Result<()> {
        let scale = -0.5 * self.geom.gamma * h;
        for (&(lo, off, len), &c) in self.windows.iter().zip(coeffs) {
            let f = c * scale;
            for (p, g) in self.phi[lo..lo + len].iter_mut().zip(&self.arena[off..off + len]) {
                *p += f * g;
            }
        }
        let norm = (self.phi.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.dx).sqrt();
        let inv = 1.0 / norm;
        self.phi.iter_mut().for_each(|a| *a *= inv);
        self.update_moments()?;
        self.recenter();
        Ok(())
    }

    /// Free evolution is the identity in this frame, so `h` plays no role.
    fn jump(&mut self, flat: usize, t: f64, _h: f64) {
        let c = self.geom.center(flat).rotated(-t);
        self.origin = c.x - (self.n / 2) as f64 * self.dx;
        self.carrier = c.p;
        for i in 0..self.n {
            let u = self.x(i) - c.x;
            self.phi[i] = Complex64::new((-u * u * self.inv_4s2).exp(), 0.0);
        }
        let norm = (self.phi.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.dx).sqrt();
        self.phi.iter_mut().for_each(|a| *a /= norm);
        self.moments = Moments::coherent(c, self.geom.sigma);
    }
}
