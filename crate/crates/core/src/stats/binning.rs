//! Time-binned ensemble moments of click records.

use serde::{Deserialize, Serialize};

use super::{canonical_order, ClickRecord};
use crate::error::{Error, Result};

/// Sample moments of the clicks in one bin (population variances).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinMoments {
    pub mean_t: f64,
    pub mean_x: f64,
    pub mean_p: f64,
    pub var_x: f64,
    pub var_p: f64,
    pub mean_e: f64,
    pub var_e: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeBin {
    pub t_start: f64,
    pub count: usize,
    /// `None` for a bin without clicks.
    pub moments: Option<BinMoments>,
}

impl TimeBin {
    pub fn t_center(&self, bin_width: f64) -> f64 {
        self.t_start + 0.5 * bin_width
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeBinnedSeries {
    pub bin_width: f64,
    pub bins: Vec<TimeBin>,
    pub total_clicks: usize,
}

impl TimeBinnedSeries {
    /// Bins with at least `min_count` clicks, with their moments.
    pub fn populated(&self, min_count: usize) -> impl Iterator<Item = (&TimeBin, &BinMoments)> {
        self.bins
            .iter()
            .filter(move |b| b.count >= min_count.max(1))
            .filter_map(|b| b.moments.as_ref().map(|m| (b, m)))
    }
}

/// Groups clicks into bins `[i·w, (i+1)·w)` and computes per-bin moments.
pub fn bin_clicks(clicks: &[ClickRecord], bin_width: f64) -> Result<TimeBinnedSeries> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::Config(format!("bin width must be positive (got {bin_width})")));
    }
    if clicks.is_empty() {
        return Err(Error::InsufficientData("no clicks to bin".into()));
    }
    if let Some(bad) = clicks.iter().find(|c| !(c.t >= 0.0 && c.t.is_finite())) {
        return Err(Error::Format(format!("click time {} is not a finite non-negative number", bad.t)));
    }
    let sorted = canonical_order(clicks);
    let bin_of = |t: f64| (t / bin_width).floor() as usize;
    let n_bins = sorted.iter().map(|c| bin_of(c.t)).max().unwrap_or(0) + 1;
    let mut members: Vec<Vec<&ClickRecord>> = vec![Vec::new(); n_bins];
    for c in &sorted {
        members[bin_of(c.t)].push(c);
    }

    let bins = members
        .iter()
        .enumerate()
        .map(|(i, m)| TimeBin {
            t_start: i as f64 * bin_width,
            count: m.len(),
            moments: moments(m),
        })
        .collect();
    Ok(TimeBinnedSeries {
        bin_width,
        bins,
        total_clicks: sorted.len(),
    })
}

fn moments(clicks: &[&ClickRecord]) -> Option<BinMoments> {
    if clicks.is_empty() {
        return None;
    }
    let n = clicks.len() as f64;
    let mean = |f: &dyn Fn(&ClickRecord) -> f64| clicks.iter().map(|c| f(c)).sum::<f64>() / n;
    let var = |f: &dyn Fn(&ClickRecord) -> f64, mu: f64| {
        clicks.iter().map(|c| (f(c) - mu).powi(2)).sum::<f64>() / n
    };
    let (mean_x, mean_p, mean_e) = (mean(&|c| c.x), mean(&|c| c.p), mean(&|c| c.energy()));
    Some(BinMoments {
        mean_t: mean(&|c| c.t),
        mean_x,
        mean_p,
        var_x: var(&|c| c.x, mean_x),
        var_p: var(&|c| c.p, mean_p),
        mean_e,
        var_e: var(&|c| c.energy(), mean_e),
    })
}
