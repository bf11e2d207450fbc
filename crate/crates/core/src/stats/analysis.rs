//! The standard analysis of one run's clicks.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{
    analytic_d, analytic_d_dimensional, bin_clicks, energy_histogram, energy_pdf_initial, fit_dispersion,
    fit_thermal, histogram_l1_distance, mean_energy_law_check, ClickRecord, DispersionFit, EnergyHistogram,
    MeanEnergyReport, ThermalFit, TimeBinnedSeries,
};
use crate::config::SimConfig;
use crate::detectors::initial_dispersion;
use crate::error::Result;
use crate::wavefunction::PhasePoint;

/// Number of periods over which the ensemble mean is compared with the
/// classical orbit.
pub const CLASSICAL_CHECK_PERIODS: f64 = 3.0;

/// Ensemble mean of click positions against the classical orbit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalMeanCheck {
    pub t_max: f64,
    pub n_bins: usize,
    /// `‖⟨x⟩ − x_cl‖ / ‖x_cl‖` over bins.
    pub rel_rms_x: f64,
    pub rel_rms_p: f64,
}

/// First-period energy histogram against the Bessel-form density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EarlyEnergyCheck {
    pub e0: f64,
    pub histogram: EnergyHistogram,
    pub l1_distance: f64,
}

/// Last-period energy histogram against the thermal law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LateEnergyCheck {
    pub histogram: EnergyHistogram,
    pub thermal: ThermalFit,
    /// Fitted `δ²` at the window center.
    pub delta_sq_at_center: f64,
    /// `|ε − δ²| / δ²`.
    pub rel_difference: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub config_hash: String,
    pub n_trajectories: usize,
    pub n_flagged: usize,
    pub total_clicks: usize,
    pub x0: f64,
    pub p0: f64,
    pub e0: f64,
    pub analytic_d: f64,
    pub analytic_d_dimensional: f64,
    /// Husimi lattice sum for the dispersion right after localization.
    pub initial_dispersion: f64,
    pub fit: Option<DispersionFit>,
    /// Why the fit is missing, if it is.
    pub fit_error: Option<String>,
    pub classical_mean: Option<ClassicalMeanCheck>,
    pub early_energy: Option<EarlyEnergyCheck>,
    pub early_energy_error: Option<String>,
    pub late_energy: Option<LateEnergyCheck>,
    pub late_energy_error: Option<String>,
    pub mean_energy_law: MeanEnergyReport,
    #[serde(skip)]
    pub series: Option<TimeBinnedSeries>,
}

/// Runs every statistic that the data supports. Statistics that cannot be
/// computed are reported with the reason instead of failing the analysis.
pub fn analyze(clicks: &[ClickRecord], config: &SimConfig, n_trajectories: usize, n_flagged: usize) -> Result<AnalysisReport> {
    let z0 = config.initial_point();
    let e0 = z0.energy();
    let geom = config.lattice()?;
    let (j0, k0) = config.initial_indices();
    let series = if clicks.is_empty() {
        None
    } else {
        Some(bin_clicks(clicks, config.bin_width)?)
    };

    let (fit, fit_error) = match series.as_ref().map(|s| fit_dispersion(s, config.fit_t_min)) {
        Some(Ok(f)) => (Some(f), None),
        Some(Err(e)) => (None, Some(e.to_string())),
        None => (None, Some("no clicks".to_string())),
    };

    let t_cl = (CLASSICAL_CHECK_PERIODS * 2.0 * PI).min(config.t_end);
    let classical_mean = series.as_ref().and_then(|s| classical_mean_check(s, z0, t_cl));

    let period = 2.0 * PI;
    let (early_energy, early_energy_error) = if config.t_end >= period {
        match energy_histogram(clicks, (0.0, period)) {
            Ok(h) => {
                let l1 = histogram_l1_distance(&h, |e| energy_pdf_initial(e, e0));
                (Some(EarlyEnergyCheck { e0, histogram: h, l1_distance: l1 }), None)
            }
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (None, Some("run shorter than one period".into()))
    };

    let (late_energy, late_energy_error) = if config.t_end >= 2.0 * period {
        let window = (config.t_end - period, config.t_end);
        match (energy_histogram(clicks, window), fit.as_ref()) {
            (Ok(h), Some(f)) => match fit_thermal(&h) {
                Ok(thermal) => {
                    let delta = f.predict(h.t_center);
                    let rel = (thermal.epsilon - delta).abs() / delta;
                    (
                        Some(LateEnergyCheck {
                            histogram: h,
                            thermal,
                            delta_sq_at_center: delta,
                            rel_difference: rel,
                        }),
                        None,
                    )
                }
                Err(e) => (None, Some(e.to_string())),
            },
            (Err(e), _) => (None, Some(e.to_string())),
            (_, None) => (None, Some("no dispersion fit".into())),
        }
    } else {
        (None, Some("run shorter than two periods".into()))
    };

    let mean_energy_law = mean_energy_law_check(series.as_ref(), fit.as_ref(), e0);
    Ok(AnalysisReport {
        config_hash: config.hash(),
        n_trajectories,
        n_flagged,
        total_clicks: clicks.len(),
        x0: z0.x,
        p0: z0.p,
        e0,
        analytic_d: if config.d_x == config.d_p {
            analytic_d(config.gamma, config.d_x)
        } else {
            config.analytic_d()
        },
        analytic_d_dimensional: analytic_d_dimensional(config.gamma, config.d_x, config.d_p, config.sigma, 1.0),
        initial_dispersion: initial_dispersion(&geom, j0, k0)?,
        fit,
        fit_error,
        classical_mean,
        early_energy,
        early_energy_error,
        late_energy,
        late_energy_error,
        mean_energy_law,
        series,
    })
}

fn classical_mean_check(series: &TimeBinnedSeries, z0: PhasePoint, t_max: f64) -> Option<ClassicalMeanCheck> {
    let (mut ex, mut ep, mut rx, mut rp, mut n) = (0.0, 0.0, 0.0, 0.0, 0);
    for (bin, m) in series.populated(1) {
        if bin.t_start + series.bin_width > t_max + 1e-9 {
            continue;
        }
        let cl = z0.rotated(m.mean_t);
        ex += (m.mean_x - cl.x).powi(2);
        ep += (m.mean_p - cl.p).powi(2);
        rx += cl.x * cl.x;
        rp += cl.p * cl.p;
        n += 1;
    }
    (n > 0).then(|| ClassicalMeanCheck {
        t_max,
        n_bins: n,
        rel_rms_x: (ex / rx).sqrt(),
        rel_rms_p: (ep / rp).sqrt(),
    })
}
