//! Monte-Carlo wavefunction trajectories under continuous phase-space
//! detection.
//!
//! Each step of length `δt` draws one uniform number `r`. Detector `α` fires
//! with probability `δp_α = γ δt |⟨α|ψ⟩|²`; the detectors are scanned in flat
//! (row-major) order and the first whose cumulative probability exceeds `r`
//! is selected. If no detector fires the state follows the normalized
//! no-jump evolution `ψ ← N[e^{−iH0δt}(1 − ½γδt Σ_α|α⟩⟨α|)ψ]`; on a click it
//! collapses to `|α⟩` and the click is recorded at the end of the step.

pub mod gksl;
mod rotating;
mod split;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{EngineKind, SimConfig, COVERAGE_MARGIN};
use crate::detectors::{DetectorLattice, LatticeGeometry};
use crate::error::{Error, Result};
use crate::grid::FftPlan;
use crate::rng::{trajectory_rng, trajectory_seed};
use crate::wavefunction::{PhasePoint, Wavefunction};

pub use split::{no_jump_step, no_jump_step_with, NoJumpStep, SplitOperator, StepOptions};

/// Per-step total jump probability above which a run is rejected outright.
pub const MAX_STEP_JUMP_PROBABILITY: f64 = 0.5;

/// Largest total jump probability allowed for the first step of a run.
pub const MAX_INITIAL_JUMP_PROBABILITY: f64 = 0.1;

/// Probability mass allowed near the edge of a propagation grid.
pub const BOUNDARY_MASS_LIMIT: f64 = 1e-6;

/// One detector click.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClickEvent {
    pub t: f64,
    pub j: i64,
    pub k: i64,
    pub x: f64,
    pub p: f64,
}

/// Expectation values of a state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSummary {
    pub mean_x: f64,
    pub mean_p: f64,
    pub mean_energy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub index: u64,
    pub seed: [u8; 32],
    pub clicks: Vec<ClickEvent>,
    /// State at `t_end`, or at the time the trajectory was stopped.
    pub final_state: StateSummary,
    /// Set when the state left the region covered by the lattice.
    pub exit_time: Option<f64>,
    /// Sum of the per-step total jump probabilities.
    pub expected_clicks: f64,
}

impl Trajectory {
    pub fn flagged(&self) -> bool {
        self.exit_time.is_some()
    }
}

/// Outcome of one sampling step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Event {
    NoJump,
    Jump(usize),
}

/// `δp_α = γ δt |c_α|²`.
pub fn jump_probabilities(c: &[Complex64], gamma: f64, dt: f64) -> Vec<f64> {
    c.iter().map(|z| gamma * dt * z.norm_sqr()).collect()
}

/// Selects the event for the uniform draw `r ∈ [0, 1)`.
///
/// Detector `i` is chosen when `P_{i−1} ≤ r < P_i` with `P_i` the running sum
/// of `probs`; a draw on a boundary goes to the later interval, and
/// `r ≥ Σ probs` is a no-jump step.
pub fn select_event(r: f64, probs: &[f64]) -> Event {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if r < acc {
            return Event::Jump(i);
        }
    }
    Event::NoJump
}

/// Draws one uniform number and selects the event.
pub fn sample_event<R: Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> Event {
    let r: f64 = rng.random();
    select_event(r, probs)
}

/// State right after detector `flat` fires.
pub fn apply_jump(flat: usize, lattice: &DetectorLattice) -> Wavefunction {
    let mut psi = lattice.state(flat);
    psi.normalize();
    psi
}

/// First and second moments of a state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Moments {
    pub mean_x: f64,
    pub mean_p: f64,
    pub var_x: f64,
    pub var_p: f64,
}

impl Moments {
    pub fn coherent(center: PhasePoint, sigma: f64) -> Self {
        Self {
            mean_x: center.x,
            mean_p: center.p,
            var_x: sigma * sigma,
            var_p: 1.0 / (4.0 * sigma * sigma),
        }
    }

    /// `⟨H0⟩`; invariant under phase-space rotation.
    pub fn energy(&self) -> f64 {
        0.5 * (self.var_x + self.mean_x * self.mean_x + self.var_p + self.mean_p * self.mean_p)
    }

    /// Spread relative to a detector state (1 for a coherent state), in the
    /// metric where the detector overlap is isotropic.
    pub fn relative_spread(&self, sigma: f64) -> f64 {
        self.var_x / (2.0 * sigma * sigma) + 2.0 * sigma * sigma * self.var_p
    }
}

/// Interface shared by the propagation engines.
pub(crate) trait Propagator {
    /// Moments in the lab frame at time `t`.
    fn lab_moments(&self, t: f64) -> Moments;
    /// Overlaps `⟨α|ψ⟩` for `cands` at time `t`, written to `out`.
    fn overlaps(&mut self, t: f64, cands: &[usize], out: &mut Vec<Complex64>);
    /// No-jump step over `[t, t + h]` using the overlaps of the last
    /// [`Propagator::overlaps`] call.
    fn no_jump(&mut self, t: f64, h: f64, cands: &[usize], coeffs: &[Complex64]) -> Result<()>;
    /// Collapse onto detector `flat` at time `t`, then evolve freely to
    /// `t + h`. The no-jump branch applies its damping before the free
    /// evolution of the step; doing the same here keeps the two branches of
    /// the splitting consistent. Leaving out the free evolution would delay
    /// every trajectory by one step per click, which accumulates into a
    /// visible lag of the ensemble mean.
    fn jump(&mut self, flat: usize, t: f64, h: f64);
}

enum Backend {
    Split {
        lattice: DetectorLattice,
        operator: SplitOperator,
    },
    Rotating {
        plan: FftPlan,
    },
}

/// A validated configuration with all reusable precomputation.
pub struct Simulation {
    config: SimConfig,
    hash: String,
    geometry: LatticeGeometry,
    n_steps: usize,
    backend: Backend,
}

impl Simulation {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let geometry = config.lattice()?;
        let (j0, k0) = config.initial_indices();
        let z0 = config.initial_point();

        let initial_rate: f64 = (0..geometry.len())
            .map(|a| geometry.overlap_sqr_analytic(z0, geometry.center(a)))
            .sum::<f64>()
            * config.gamma;
        let p0 = initial_rate * config.dt;
        if p0 >= MAX_INITIAL_JUMP_PROBABILITY {
            return Err(Error::TimestepTooLarge(p0));
        }
        debug_assert!(geometry.contains(j0, k0));

        let backend = match config.engine {
            EngineKind::Split => {
                let grid = config.grid()?;
                let lattice = DetectorLattice::sample(geometry.clone(), &grid)?;
                let operator = SplitOperator::new(grid, config.dt);
                Backend::Split { lattice, operator }
            }
            EngineKind::Rotating => {
                if (config.sigma * config.sigma - 0.5).abs() > 1e-12 {
                    return Err(Error::Config(format!(
                        "the rotating engine requires sigma = sqrt(1/2) (got {}); use engine = split",
                        config.sigma
                    )));
                }
                Backend::Rotating {
                    plan: FftPlan::new(config.local_points),
                }
            }
        };
        Ok(Self {
            hash: config.hash(),
            n_steps: config.n_steps(),
            config,
            geometry,
            backend,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn config_hash(&self) -> &str {
        &self.hash
    }

    pub fn geometry(&self) -> &LatticeGeometry {
        &self.geometry
    }

    /// The lab-frame detector lattice (split engine only).
    pub fn lattice(&self) -> Option<&DetectorLattice> {
        match &self.backend {
            Backend::Split { lattice, .. } => Some(lattice),
            Backend::Rotating { .. } => None,
        }
    }

    pub fn run_trajectory(&self, index: u64) -> Result<Trajectory> {
        match &self.backend {
            Backend::Split { lattice, operator } => {
                let mut engine = split::SplitEngine::new(lattice, operator, self.initial_flat());
                self.drive(index, &mut engine)
            }
            Backend::Rotating { plan } => {
                let mut engine = rotating::RotatingEngine::new(&self.config, &self.geometry, plan, self.initial_flat());
                self.drive(index, &mut engine)
            }
        }
    }

    /// Runs a trajectory with the split engine and also returns the final
    /// lab-frame wavefunction.
    pub fn run_trajectory_with_state(&self, index: u64) -> Result<(Trajectory, Wavefunction)> {
        match &self.backend {
            Backend::Split { lattice, operator } => {
                let mut engine = split::SplitEngine::new(lattice, operator, self.initial_flat());
                let traj = self.drive(index, &mut engine)?;
                Ok((traj, engine.into_state()))
            }
            Backend::Rotating { .. } => Err(Error::Config(
                "final wavefunctions are only available with engine = split".into(),
            )),
        }
    }

    fn initial_flat(&self) -> usize {
        let (j0, k0) = self.config.initial_indices();
        self.geometry.flat(j0, k0)
    }

    fn drive<P: Propagator>(&self, index: u64, engine: &mut P) -> Result<Trajectory> {
        let cfg = &self.config;
        let geom = &self.geometry;
        let seed = trajectory_seed(cfg.master_seed, index);
        let mut rng = trajectory_rng(cfg.master_seed, index);
        let radius = cfg.prune_radius.unwrap_or(f64::INFINITY);

        let mut clicks = Vec::new();
        let mut cands = Vec::new();
        let mut coeffs = Vec::new();
        let mut probs = Vec::new();
        let mut expected = 0.0;
        let mut exit_time = None;
        let mut t_now = 0.0;

        for step in 0..self.n_steps {
            let t = step as f64 * cfg.dt;
            let h = cfg.dt.min(cfg.t_end - t);
            t_now = t;
            let m = engine.lab_moments(t);
            let center = PhasePoint::new(m.mean_x, m.mean_p);
            if cfg.enforce_coverage && !geom.covers(center, COVERAGE_MARGIN) {
                exit_time = Some(t);
                break;
            }
            let r_eff = radius * ((m.relative_spread(cfg.sigma) + 1.0) / 2.0).sqrt();
            geom.candidates_within(center, r_eff, &mut cands);
            engine.overlaps(t, &cands, &mut coeffs);

            probs.clear();
            probs.extend(coeffs.iter().map(|c| cfg.gamma * h * c.norm_sqr()));
            let total: f64 = probs.iter().sum();
            if total >= MAX_STEP_JUMP_PROBABILITY {
                return Err(Error::TimestepTooLarge(total));
            }
            expected += total;

            match sample_event(&mut rng, &probs) {
                Event::Jump(i) => {
                    let flat = cands[i];
                    let (j, k) = geom.indices(flat);
                    let c = geom.center(flat);
                    let t_click = t + h;
                    clicks.push(ClickEvent {
                        t: t_click,
                        j,
                        k,
                        x: c.x,
                        p: c.p,
                    });
                    engine.jump(flat, t, h);
                }
                Event::NoJump => engine.no_jump(t, h, &cands, &coeffs)?,
            }
            t_now = t + h;
        }

        let m = engine.lab_moments(t_now);
        Ok(Trajectory {
            index,
            seed,
            clicks,
            final_state: StateSummary {
                mean_x: m.mean_x,
                mean_p: m.mean_p,
                mean_energy: m.energy(),
            },
            exit_time,
            expected_clicks: expected,
        })
    }
}

/// Runs trajectory `index` of `config`.
pub fn run_trajectory(config: &SimConfig, index: u64) -> Result<Trajectory> {
    Simulation::new(config.clone())?.run_trajectory(index)
}
