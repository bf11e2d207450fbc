//! Linear fits of the dispersion growth.

use serde::{Deserialize, Serialize};

use super::TimeBinnedSeries;
use crate::error::{Error, Result};

/// Bins with fewer clicks are left out of fits.
pub const MIN_BIN_COUNT: usize = 30;

/// Fewest usable bins a dispersion fit accepts.
pub const MIN_FIT_BINS: usize = 10;

/// Ordinary least-squares line `y = slope·t + intercept`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub residual_rms: f64,
    pub n_points: usize,
}

pub fn ols(t: &[f64], y: &[f64]) -> Result<LineFit> {
    let n = t.len();
    if n != y.len() || n < 2 {
        return Err(Error::InsufficientData(format!("line fit needs >= 2 points (got {n})")));
    }
    let nf = n as f64;
    let tm = t.iter().sum::<f64>() / nf;
    let ym = y.iter().sum::<f64>() / nf;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in t.iter().zip(y) {
        stt += (a - tm) * (a - tm);
        sty += (a - tm) * (b - ym);
        syy += (b - ym) * (b - ym);
    }
    if stt == 0.0 {
        return Err(Error::InsufficientData("line fit needs distinct abscissae".into()));
    }
    let slope = sty / stt;
    let intercept = ym - slope * tm;
    let sse: f64 = t
        .iter()
        .zip(y)
        .map(|(a, b)| (b - slope * a - intercept).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(LineFit {
        slope,
        intercept,
        r_squared,
        residual_rms: (sse / nf).sqrt(),
        n_points: n,
    })
}

/// Fit of `δ²(t) ≈ D t + δ0²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersionFit {
    /// Slope of the averaged dispersion `½(δx² + δp²)`.
    pub d: f64,
    /// Intercept of the averaged dispersion.
    pub delta0_sq: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub residual_rms: f64,
    pub r_squared: f64,
    pub n_bins: usize,
    /// Fit of the position dispersion alone.
    pub x: LineFit,
    /// Fit of the momentum dispersion alone.
    pub p: LineFit,
    /// Dominant angular frequency of the position-fit residuals.
    pub residual_frequency: Option<f64>,
}

impl DispersionFit {
    /// `δ²(t)` predicted by the fit.
    pub fn predict(&self, t: f64) -> f64 {
        self.d * t + self.delta0_sq
    }
}

/// Fits the binned dispersions over bins with `t ≥ t_min` and at least
/// [`MIN_BIN_COUNT`] clicks. Bins are placed at their mean click time.
pub fn fit_dispersion(series: &TimeBinnedSeries, t_min: f64) -> Result<DispersionFit> {
    let (mut t, mut vx, mut vp, mut avg) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (bin, m) in series.populated(MIN_BIN_COUNT) {
        if bin.t_start >= t_min {
            t.push(m.mean_t);
            vx.push(m.var_x);
            vp.push(m.var_p);
            avg.push(0.5 * (m.var_x + m.var_p));
        }
    }
    if t.len() < MIN_FIT_BINS {
        return Err(Error::InsufficientData(format!(
            "{} bins with >= {MIN_BIN_COUNT} clicks after t = {t_min}; need {MIN_FIT_BINS}",
            t.len()
        )));
    }
    let x = ols(&t, &vx)?;
    let p = ols(&t, &vp)?;
    let both = ols(&t, &avg)?;
    let residuals: Vec<f64> = t
        .iter()
        .zip(&vx)
        .map(|(a, b)| b - x.slope * a - x.intercept)
        .collect();
    Ok(DispersionFit {
        d: both.slope,
        delta0_sq: both.intercept,
        t_min,
        t_max: t.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        residual_rms: both.residual_rms,
        r_squared: both.r_squared,
        n_bins: t.len(),
        x,
        p,
        residual_frequency: dominant_frequency(&t, &residuals, 0.25, 5.0),
    })
}

/// Angular frequency in `[w_lo, w_hi]` whose least-squares sinusoid
/// `a cos ωt + b sin ωt` explains the most variance of `y`. Works on
/// unevenly spaced samples. `None` if there are too few points.
pub fn dominant_frequency(t: &[f64], y: &[f64], w_lo: f64, w_hi: f64) -> Option<f64> {
    if t.len() < 8 || t.len() != y.len() {
        return None;
    }
    let n = y.len() as f64;
    let ym = y.iter().sum::<f64>() / n;
    let steps = 2000;
    let mut best = (f64::NEG_INFINITY, None);
    for s in 0..=steps {
        let w = w_lo + (w_hi - w_lo) * s as f64 / steps as f64;
        // Normal equations for the two-parameter sinusoid.
        let (mut cc, mut ss, mut cs, mut yc, mut ys) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&ti, &yi) in t.iter().zip(y) {
            let (sn, cn) = (w * ti).sin_cos();
            let r = yi - ym;
            cc += cn * cn;
            ss += sn * sn;
            cs += cn * sn;
            yc += r * cn;
            ys += r * sn;
        }
        let det = cc * ss - cs * cs;
        if det.abs() < 1e-12 {
            continue;
        }
        let a = (yc * ss - ys * cs) / det;
        let b = (ys * cc - yc * cs) / det;
        let explained = a * yc + b * ys;
        if explained > best.0 {
            best = (explained, Some(w));
        }
    }
    best.1
}
