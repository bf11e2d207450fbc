//! Click-energy distributions: the early-time Bessel form, the late-time
//! thermal form, and the mean-energy growth law.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{bessel_i0_scaled, canonical_order, ClickRecord, DispersionFit, TimeBinnedSeries, MIN_BIN_COUNT};
use crate::error::{Error, Result};

/// Fewest clicks an energy histogram accepts.
pub const MIN_HISTOGRAM_CLICKS: usize = 500;

/// 1% critical value of Stephens' modified Kolmogorov–Smirnov statistic for
/// an exponential law with estimated mean.
pub const KS_CRITICAL_1PCT: f64 = 1.308;

/// `p(E) = e^{−(E+E0)} I0(2√(E E0))`, the energy density of the first clicks
/// after localization at energy `E0`. Evaluated as
/// `e^{−(√E−√E0)²} · e^{−z}I0(z)` so that it stays finite for large `E0`.
pub fn energy_pdf_initial(e: f64, e0: f64) -> f64 {
    if e < 0.0 {
        return 0.0;
    }
    let (a, b) = (e.sqrt(), e0.max(0.0).sqrt());
    (-(a - b) * (a - b)).exp() * bessel_i0_scaled(2.0 * a * b)
}

/// Normalized histogram of click energies in a time window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyHistogram {
    pub t_a: f64,
    pub t_b: f64,
    pub t_center: f64,
    pub edges: Vec<f64>,
    pub densities: Vec<f64>,
    pub n_clicks: usize,
    pub mean_energy: f64,
    /// All click energies in the window, ordered by trajectory and time.
    #[serde(skip)]
    pub energies: Vec<f64>,
    /// Energy of the first click of each trajectory in the window; these are
    /// mutually independent, unlike successive clicks of one trajectory.
    #[serde(skip)]
    pub first_per_trajectory: Vec<f64>,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Histogram of the energies of clicks with `t_a ≤ t ≤ t_b`, binned with
/// the Freedman–Diaconis rule. The window must span at least one period.
pub fn energy_histogram(clicks: &[ClickRecord], (t_a, t_b): (f64, f64)) -> Result<EnergyHistogram> {
    if t_b - t_a < 2.0 * PI - 1e-9 {
        return Err(Error::Config(format!(
            "energy window [{t_a}, {t_b}] is shorter than one period"
        )));
    }
    let sorted = canonical_order(clicks);
    let mut energies = Vec::new();
    let mut first_per_trajectory = Vec::new();
    let mut last_traj = None;
    for c in sorted.iter().filter(|c| c.t >= t_a && c.t <= t_b) {
        energies.push(c.energy());
        if last_traj != Some(c.traj_index) {
            first_per_trajectory.push(c.energy());
            last_traj = Some(c.traj_index);
        }
    }
    let n = energies.len();
    if n < MIN_HISTOGRAM_CLICKS {
        return Err(Error::InsufficientData(format!(
            "{n} clicks in [{t_a}, {t_b}]; need {MIN_HISTOGRAM_CLICKS}"
        )));
    }
    let mut ordered = energies.clone();
    ordered.sort_by(f64::total_cmp);
    let (lo, hi) = (ordered[0], ordered[n - 1]);
    let iqr = quantile(&ordered, 0.75) - quantile(&ordered, 0.25);
    let width = 2.0 * iqr / (n as f64).cbrt();
    let edges: Vec<f64> = if hi == lo || width <= 0.0 {
        vec![lo - 0.5, hi + 0.5]
    } else {
        let nb = ((hi - lo) / width).ceil().clamp(1.0, 10_000.0) as usize;
        (0..=nb).map(|i| lo + (hi - lo) * i as f64 / nb as f64).collect()
    };
    let nb = edges.len() - 1;
    let mut counts = vec![0usize; nb];
    for &e in &ordered {
        let i = edges.partition_point(|&x| x <= e).saturating_sub(1).min(nb - 1);
        counts[i] += 1;
    }
    let densities = counts
        .iter()
        .zip(edges.windows(2))
        .map(|(&c, w)| c as f64 / (n as f64 * (w[1] - w[0])))
        .collect();
    Ok(EnergyHistogram {
        t_a,
        t_b,
        t_center: 0.5 * (t_a + t_b),
        edges,
        densities,
        n_clicks: n,
        mean_energy: energies.iter().sum::<f64>() / n as f64,
        energies,
        first_per_trajectory,
    })
}

/// `∫|h(E) − p(E)| dE` between the histogram density and a probability
/// density, including the mass of `p` outside the histogram's range.
pub fn histogram_l1_distance(hist: &EnergyHistogram, pdf: impl Fn(f64) -> f64) -> f64 {
    const SUB: usize = 32;
    let mut inside = 0.0;
    let mut l1 = 0.0;
    for (w, &h) in hist.edges.windows(2).zip(&hist.densities) {
        let step = (w[1] - w[0]) / SUB as f64;
        // Composite Simpson rule on each bin.
        let (mut mass, mut dist) = (0.0, 0.0);
        for s in 0..=SUB {
            let e = w[0] + s as f64 * step;
            let weight = if s == 0 || s == SUB {
                1.0
            } else if s % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let p = pdf(e);
            mass += weight * p;
            dist += weight * (h - p).abs();
        }
        inside += mass * step / 3.0;
        l1 += dist * step / 3.0;
    }
    l1 + (1.0 - inside).max(0.0)
}

/// Exponential (thermal) fit `p(E) = e^{−E/ε}/ε` of a histogram window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalFit {
    /// Maximum-likelihood temperature: the mean click energy.
    pub epsilon: f64,
    /// Standard error of `ε` treating clicks as independent.
    pub epsilon_std_error: f64,
    pub n_clicks: usize,
    /// Size of the independent sample used for the goodness-of-fit test.
    pub gof_sample_size: usize,
    /// Kolmogorov–Smirnov distance against the fitted exponential.
    pub ks_distance: f64,
    /// Stephens' modified statistic `(D − 0.2/n)(√n + 0.26 + 0.5/√n)`.
    pub ks_modified: f64,
    pub ks_critical_1pct: f64,
    pub passes_1pct: bool,
}

/// Fits an exponential law to the window's click energies. The goodness of
/// fit is tested on one click per trajectory.
pub fn fit_thermal(hist: &EnergyHistogram) -> Result<ThermalFit> {
    let n = hist.energies.len();
    let g = hist.first_per_trajectory.len();
    if n == 0 || g < 5 {
        return Err(Error::InsufficientData(format!(
            "thermal fit needs >= 5 trajectories in the window (got {g})"
        )));
    }
    let epsilon = hist.energies.iter().sum::<f64>() / n as f64;
    let mut sample = hist.first_per_trajectory.clone();
    sample.sort_by(f64::total_cmp);
    let scale = sample.iter().sum::<f64>() / g as f64;
    let gf = g as f64;
    let mut d: f64 = 0.0;
    for (i, &e) in sample.iter().enumerate() {
        let f = 1.0 - (-e / scale).exp();
        d = d.max((i as f64 + 1.0) / gf - f).max(f - i as f64 / gf);
    }
    let ks_modified = (d - 0.2 / gf) * (gf.sqrt() + 0.26 + 0.5 / gf.sqrt());
    Ok(ThermalFit {
        epsilon,
        epsilon_std_error: epsilon / (n as f64).sqrt(),
        n_clicks: n,
        gof_sample_size: g,
        ks_distance: d,
        ks_modified,
        ks_critical_1pct: KS_CRITICAL_1PCT,
        passes_1pct: ks_modified < KS_CRITICAL_1PCT,
    })
}

/// Comparison of binned mean click energies with `D t + δ0² + E0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanEnergyReport {
    /// `"ok"` or `"no data"`.
    pub status: String,
    pub n_bins: usize,
    pub max_rel_deviation: Option<f64>,
    pub rms_rel_deviation: Option<f64>,
}

/// Checks the mean-energy growth law over the fit window. Without clicks or
/// without a fit the report says "no data" rather than failing.
pub fn mean_energy_law_check(
    series: Option<&TimeBinnedSeries>,
    fit: Option<&DispersionFit>,
    e0: f64,
) -> MeanEnergyReport {
    let no_data = MeanEnergyReport {
        status: "no data".into(),
        n_bins: 0,
        max_rel_deviation: None,
        rms_rel_deviation: None,
    };
    let (Some(series), Some(fit)) = (series, fit) else {
        return no_data;
    };
    let devs: Vec<f64> = series
        .populated(MIN_BIN_COUNT)
        .filter(|(b, _)| b.t_start >= fit.t_min)
        .map(|(_, m)| {
            let predicted = fit.predict(m.mean_t) + e0;
            (m.mean_e - predicted).abs() / predicted.abs()
        })
        .collect();
    if devs.is_empty() {
        return no_data;
    }
    let rms = (devs.iter().map(|d| d * d).sum::<f64>() / devs.len() as f64).sqrt();
    MeanEnergyReport {
        status: "ok".into(),
        n_bins: devs.len(),
        max_rel_deviation: Some(devs.iter().copied().fold(0.0, f64::max)),
        rms_rel_deviation: Some(rms),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{bessel_i0, bin_clicks, fit_dispersion};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Composite Simpson quadrature of `f` on `[a, b]`.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn pdf_reduces_to_exponential() {
        for e in [0.0, 0.5, 3.0] {
            assert!((energy_pdf_initial(e, 0.0) - (-e).exp()).abs() < 1e-15);
        }
        // Direct form where it does not overflow.
        let direct = (-(2.0 + 3.0f64)).exp() * bessel_i0(2.0 * 6.0f64.sqrt());
        assert!((energy_pdf_initial(2.0, 3.0) - direct).abs() < 1e-14);
    }

    #[test]
    fn pdf_normalization_and_mean() {
        for e0 in [0.0, 1.0, 50.0, 189.0] {
            let hi = e0 + 40.0 * (e0 + 1.0f64).sqrt() + 40.0;
            let mass = simpson(|e| energy_pdf_initial(e, e0), 0.0, hi, 200_000);
            let mean = simpson(|e| e * energy_pdf_initial(e, e0), 0.0, hi, 200_000);
            assert!((mass - 1.0).abs() < 1e-8, "E0 = {e0}: {mass}");
            assert!((mean - (e0 + 1.0)).abs() < 1e-6, "E0 = {e0}: {mean}");
        }
    }

    fn clicks_with_energies(energies: &[f64]) -> Vec<ClickRecord> {
        energies
            .iter()
            .enumerate()
            .map(|(i, &e)| ClickRecord {
                traj_index: i as u64,
                t: 1.0,
                j: 0,
                k: 0,
                x: (2.0 * e).sqrt(),
                p: 0.0,
            })
            .collect()
    }

    #[test]
    fn histogram_of_identical_energies() {
        let clicks = clicks_with_energies(&[2.0; 600]);
        let h = energy_histogram(&clicks, (0.0, 2.0 * PI)).unwrap();
        assert_eq!(h.densities.len(), 1);
        let mass: f64 = h.densities[0] * (h.edges[1] - h.edges[0]);
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn histogram_rules() {
        let clicks = clicks_with_energies(&[1.0; 100]);
        assert!(matches!(energy_histogram(&clicks, (0.0, 2.0 * PI)), Err(Error::InsufficientData(_))));
        assert!(matches!(energy_histogram(&clicks, (0.0, 1.0)), Err(Error::Config(_))));
    }

    #[test]
    fn exponential_samples_fit_and_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let energies: Vec<f64> = (0..4000).map(|_| -5.0 * (1.0 - rng.random::<f64>()).ln()).collect();
        let h = energy_histogram(&clicks_with_energies(&energies), (0.0, 2.0 * PI)).unwrap();
        let mass: f64 = h.densities.iter().zip(h.edges.windows(2)).map(|(d, w)| d * (w[1] - w[0])).sum();
        assert!((mass - 1.0).abs() < 1e-9);
        let fit = fit_thermal(&h).unwrap();
        assert!((fit.epsilon - 5.0).abs() < 3.0 * fit.epsilon_std_error, "{}", fit.epsilon);
        assert!(fit.passes_1pct, "{}", fit.ks_modified);
        let l1 = histogram_l1_distance(&h, |e| (-e / 5.0).exp() / 5.0);
        assert!(l1 < 0.1, "{l1}");
    }

    #[test]
    fn uniform_samples_fail_the_exponential_test() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let energies: Vec<f64> = (0..1000).map(|_| 10.0 * rng.random::<f64>()).collect();
        let h = energy_histogram(&clicks_with_energies(&energies), (0.0, 2.0 * PI)).unwrap();
        assert!(!fit_thermal(&h).unwrap().passes_1pct);
    }

    #[test]
    fn mean_energy_law_on_a_noiseless_spiral() {
        // Two mirrored clicks per bin around a circle of radius² 2(Dt + c):
        // mean energy Dt + c + E0 with E0 = 0.
        let (d, c) = (1.5, 1.0);
        let mut clicks = Vec::new();
        for i in 0..2000 {
            let t = 0.05 + 0.1 * (i / 40) as f64;
            let delta2 = d * t + c;
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let phase = 0.3 * ((i % 40) / 2) as f64;
            let r = (2.0 * delta2).sqrt();
            clicks.push(ClickRecord {
                traj_index: i as u64,
                t,
                j: 0,
                k: 0,
                x: sign * r * phase.cos(),
                p: sign * r * phase.sin(),
            });
        }
        let series = bin_clicks(&clicks, 0.1).unwrap();
        let fit = fit_dispersion(&series, 0.0).unwrap();
        let report = mean_energy_law_check(Some(&series), Some(&fit), 0.0);
        assert_eq!(report.status, "ok");
        assert!(report.max_rel_deviation.unwrap() < 1e-9, "{:?}", report);
        assert_eq!(mean_energy_law_check(None, None, 0.0).status, "no data");
    }
}
