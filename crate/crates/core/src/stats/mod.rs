//! Ensemble statistics of click records and the analytic laws they are
//! compared against.

mod analysis;
mod bessel;
mod binning;
mod energy;
mod fit;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

pub use analysis::{analyze, AnalysisReport, ClassicalMeanCheck, EarlyEnergyCheck, LateEnergyCheck};
pub use bessel::{bessel_i0, bessel_i0_branches, bessel_i0_scaled};
pub use binning::{bin_clicks, BinMoments, TimeBin, TimeBinnedSeries};
pub use energy::{
    energy_histogram, energy_pdf_initial, fit_thermal, histogram_l1_distance, mean_energy_law_check,
    EnergyHistogram, MeanEnergyReport, ThermalFit, KS_CRITICAL_1PCT,
};
pub use fit::{dominant_frequency, fit_dispersion, ols, DispersionFit, LineFit, MIN_BIN_COUNT, MIN_FIT_BINS};

/// One click of one trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClickRecord {
    pub traj_index: u64,
    pub t: f64,
    pub j: i64,
    pub k: i64,
    pub x: f64,
    pub p: f64,
}

impl ClickRecord {
    /// `E = ½(x² + p²)` of the detector that fired.
    pub fn energy(&self) -> f64 {
        0.5 * (self.x * self.x + self.p * self.p)
    }
}

/// Sorts clicks by trajectory and time so that every reduction sees the same
/// summation order regardless of how the records were produced.
pub(crate) fn canonical_order(clicks: &[ClickRecord]) -> Vec<ClickRecord> {
    let mut sorted = clicks.to_vec();
    sorted.sort_by(|a, b| a.traj_index.cmp(&b.traj_index).then(a.t.total_cmp(&b.t)));
    sorted
}

/// Diffusion coefficient `2πγ/d²` of the dispersion growth for a square
/// lattice of spacing `d` and standard-width detectors.
pub fn analytic_d(gamma: f64, d: f64) -> f64 {
    2.0 * PI * gamma / (d * d)
}

/// Diffusion coefficient `4πγħσ²/(d_x d_p)` for general detector width and
/// spacings; reduces to [`analytic_d`] for `ħ = 1`, `σ² = ½`, `d_x = d_p`.
pub fn analytic_d_dimensional(gamma: f64, d_x: f64, d_p: f64, sigma: f64, hbar: f64) -> f64 {
    4.0 * PI * gamma * hbar * sigma * sigma / (d_x * d_p)
}

/// Direct lattice sum `γ Σ_{j,k} e^{−d²(j²+k²)/2} (dj)²`, the rate at which
/// clicks displace a localized state, before the continuum approximation.
pub fn lattice_sum_d(gamma: f64, d: f64) -> f64 {
    // Terms beyond |j| = n are below e^{−40} relative to the peak.
    let n = (9.0 / d).ceil() as i64 + 1;
    let mut total = 0.0;
    for j in -n..=n {
        for k in -n..=n {
            let (jf, kf) = (j as f64, k as f64);
            total += (-(d * d) * (jf * jf + kf * kf) / 2.0).exp() * (d * jf).powi(2);
        }
    }
    gamma * total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_d_values() {
        assert!((analytic_d(1.0, 2.16) - 1.346_704_669_748_710_8).abs() < 1e-12);
        assert_eq!(analytic_d(2.0, 2.16), 2.0 * analytic_d(1.0, 2.16));
        let dim = analytic_d_dimensional(1.0, 2.16, 2.16, 0.5f64.sqrt(), 1.0);
        assert!((dim - analytic_d(1.0, 2.16)).abs() < 1e-12);
        assert!((analytic_d_dimensional(1.0, 2.16, 2.16, 0.5f64.sqrt(), 2.0) - 2.0 * dim).abs() < 1e-12);
    }

    #[test]
    fn lattice_sum_approaches_continuum() {
        let rel = |d: f64| (lattice_sum_d(1.0, d) / analytic_d(1.0, d) - 1.0).abs();
        assert!(rel(0.5) < 0.01, "{}", rel(0.5));
        assert!(rel(0.25) <= rel(0.5) + 1e-12);
        assert!((lattice_sum_d(3.0, 0.5) - 3.0 * lattice_sum_d(1.0, 0.5)).abs() < 1e-9);
    }

    #[test]
    fn canonical_order_sorts_by_trajectory_then_time() {
        let c = |i, t| ClickRecord { traj_index: i, t, j: 0, k: 0, x: 0.0, p: 0.0 };
        let sorted = canonical_order(&[c(1, 0.2), c(0, 0.5), c(1, 0.1), c(0, 0.3)]);
        let keys: Vec<_> = sorted.iter().map(|r| (r.traj_index, r.t)).collect();
        assert_eq!(keys, vec![(0, 0.3), (0, 0.5), (1, 0.1), (1, 0.2)]);
    }
}
