//! Simulation configuration: a flat `key = value` text format with a canonical
//! serialization whose SHA-256 identifies a run.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt::Write as _;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::detectors::LatticeGeometry;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::stats::analytic_d_dimensional;
use crate::wavefunction::PhasePoint;

/// Target amplitude of the initial orbit; the starting detector is the one
/// nearest to it on the x axis.
pub const TARGET_X0: f64 = 20.0;

/// Buffer added to the coverage radius, in harmonic-oscillator lengths.
pub const COVERAGE_BUFFER: f64 = 6.0;

/// A trajectory whose state center comes closer than this to the lattice
/// boundary is stopped and flagged.
pub const COVERAGE_MARGIN: f64 = 4.0;

/// Propagation scheme for the no-jump evolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EngineKind {
    /// Interaction picture of H0 on a small co-moving grid.
    Rotating,
    /// Lab-frame split-operator propagation on the global grid.
    Split,
}

impl EngineKind {
    fn as_str(self) -> &'static str {
        match self {
            EngineKind::Rotating => "rotating",
            EngineKind::Split => "split",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub gamma: f64,
    pub d_x: f64,
    pub d_p: f64,
    pub sigma: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
    pub dt: f64,
    pub t_end: f64,
    pub n_traj: usize,
    pub master_seed: u64,
    /// `None` selects `round(20/d_x)`.
    pub j0: Option<i64>,
    pub k0: i64,
    pub bin_width: f64,
    pub fit_t_min: f64,
    /// Half-width of the lattice in both x and p; `None` sizes it from the run.
    pub lattice_extent: Option<f64>,
    pub enforce_coverage: bool,
    pub engine: EngineKind,
    /// Overlaps with detectors farther than this (in coherent-state widths)
    /// from the state are treated as zero; `None` evaluates every detector.
    pub prune_radius: Option<f64>,
    pub local_points: usize,
    pub local_half_width: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            d_x: 2.16,
            d_p: 2.16,
            sigma: FRAC_1_SQRT_2,
            x_min: -40.0,
            x_max: 40.0,
            n_points: 2048,
            dt: 0.005,
            t_end: 50.0,
            n_traj: 500,
            master_seed: 1,
            j0: None,
            k0: 0,
            bin_width: 0.1,
            fit_t_min: 2.0 * PI,
            lattice_extent: None,
            enforce_coverage: true,
            engine: EngineKind::Rotating,
            prune_radius: Some(9.0),
            local_points: 128,
            local_half_width: 12.8,
        }
    }
}

const KEYS: &[&str] = &[
    "gamma",
    "d_x",
    "d_p",
    "sigma",
    "x_min",
    "x_max",
    "n_points",
    "dt",
    "t_end",
    "n_traj",
    "master_seed",
    "j0",
    "k0",
    "bin_width",
    "fit_t_min",
    "lattice_extent",
    "enforce_coverage",
    "engine",
    "prune_radius",
    "local_points",
    "local_half_width",
];

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse {key} = {value:?}")))
}

fn parse_auto<T: FromStr>(key: &str, value: &str, sentinel: &str) -> Result<Option<T>> {
    if value == sentinel {
        Ok(None)
    } else {
        parse_num(key, value).map(Some)
    }
}

fn fmt_opt<T: std::fmt::Debug>(v: &Option<T>, sentinel: &str) -> String {
    match v {
        Some(v) => format!("{v:?}"),
        None => sentinel.to_string(),
    }
}

impl SimConfig {
    /// Parses the `key = value` format. Blank lines and `#` comments are
    /// ignored; unknown or repeated keys are errors. `d` sets both spacings.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = SimConfig::default();
        let mut seen: Vec<String> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let targets: &[&str] = if key == "d" { &["d_x", "d_p"] } else { &[key][..] };
            for t in targets {
                if seen.iter().any(|s| s == t) {
                    return Err(Error::Config(format!("duplicate key {t}")));
                }
                seen.push(t.to_string());
            }
            match key {
                "gamma" => cfg.gamma = parse_num(key, value)?,
                "d" => {
                    cfg.d_x = parse_num(key, value)?;
                    cfg.d_p = cfg.d_x;
                }
                "d_x" => cfg.d_x = parse_num(key, value)?,
                "d_p" => cfg.d_p = parse_num(key, value)?,
                "sigma" => cfg.sigma = parse_num(key, value)?,
                "x_min" => cfg.x_min = parse_num(key, value)?,
                "x_max" => cfg.x_max = parse_num(key, value)?,
                "n_points" => cfg.n_points = parse_num(key, value)?,
                "dt" => cfg.dt = parse_num(key, value)?,
                "t_end" | "T" => cfg.t_end = parse_num(key, value)?,
                "n_traj" => cfg.n_traj = parse_num(key, value)?,
                "master_seed" => cfg.master_seed = parse_num(key, value)?,
                "j0" => cfg.j0 = parse_auto(key, value, "auto")?,
                "k0" => cfg.k0 = parse_num(key, value)?,
                "bin_width" => cfg.bin_width = parse_num(key, value)?,
                "fit_t_min" => cfg.fit_t_min = parse_num(key, value)?,
                "lattice_extent" => cfg.lattice_extent = parse_auto(key, value, "auto")?,
                "enforce_coverage" => cfg.enforce_coverage = parse_num(key, value)?,
                "engine" => {
                    cfg.engine = match value {
                        "rotating" => EngineKind::Rotating,
                        "split" => EngineKind::Split,
                        other => {
                            return Err(Error::Config(format!(
                                "engine must be rotating or split (got {other:?})"
                            )))
                        }
                    }
                }
                "prune_radius" => cfg.prune_radius = parse_auto(key, value, "none")?,
                "local_points" => cfg.local_points = parse_num(key, value)?,
                "local_half_width" => cfg.local_half_width = parse_num(key, value)?,
                other => return Err(Error::Config(format!("unknown key {other:?}"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Returns a copy with `key = value` overrides applied (same keys and
    /// validation as [`SimConfig::parse`]).
    pub fn with_overrides(&self, overrides: &[(String, String)]) -> Result<Self> {
        let mut lines: Vec<(String, String)> = self
            .canonical()
            .lines()
            .filter_map(|l| l.split_once(" = "))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        for (key, value) in overrides {
            let targets: Vec<&str> = match key.as_str() {
                "d" => vec!["d_x", "d_p"],
                "T" => vec!["t_end"],
                k => vec![k],
            };
            for t in targets {
                let slot = lines
                    .iter_mut()
                    .find(|(k, _)| k == t)
                    .ok_or_else(|| Error::Config(format!("unknown key {t:?}")))?;
                slot.1 = value.clone();
            }
        }
        let text: String = lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        Self::parse(&text)
    }

    /// Canonical text form: every key, fixed order, shortest round-trip floats.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("gamma", format!("{:?}", self.gamma));
        put("d_x", format!("{:?}", self.d_x));
        put("d_p", format!("{:?}", self.d_p));
        put("sigma", format!("{:?}", self.sigma));
        put("x_min", format!("{:?}", self.x_min));
        put("x_max", format!("{:?}", self.x_max));
        put("n_points", self.n_points.to_string());
        put("dt", format!("{:?}", self.dt));
        put("t_end", format!("{:?}", self.t_end));
        put("n_traj", self.n_traj.to_string());
        put("master_seed", self.master_seed.to_string());
        put("j0", fmt_opt(&self.j0, "auto"));
        put("k0", self.k0.to_string());
        put("bin_width", format!("{:?}", self.bin_width));
        put("fit_t_min", format!("{:?}", self.fit_t_min));
        put("lattice_extent", fmt_opt(&self.lattice_extent, "auto"));
        put("enforce_coverage", self.enforce_coverage.to_string());
        put("engine", self.engine.as_str().to_string());
        put("prune_radius", fmt_opt(&self.prune_radius, "none"));
        put("local_points", self.local_points.to_string());
        put("local_half_width", format!("{:?}", self.local_half_width));
        debug_assert_eq!(s.lines().count(), KEYS.len());
        s
    }

    /// Hex SHA-256 of [`SimConfig::canonical`].
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("d_x", self.d_x),
            ("d_p", self.d_p),
            ("sigma", self.sigma),
            ("dt", self.dt),
            ("t_end", self.t_end),
            ("bin_width", self.bin_width),
            ("local_half_width", self.local_half_width),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive (got {v})")));
            }
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!(
                "gamma must be non-negative (got {})",
                self.gamma
            )));
        }
        if !(self.fit_t_min >= 0.0 && self.fit_t_min.is_finite()) {
            return Err(Error::Config("fit_t_min must be non-negative".into()));
        }
        if self.n_traj == 0 {
            return Err(Error::Config("n_traj must be at least 1".into()));
        }
        if let Some(r) = self.prune_radius {
            if !(r > 0.0) {
                return Err(Error::Config(format!("prune_radius must be positive (got {r})")));
            }
        }
        if let Some(e) = self.lattice_extent {
            if !(e >= 0.0 && e.is_finite()) {
                return Err(Error::Config(format!("lattice_extent must be >= 0 (got {e})")));
            }
        }
        if self.local_points < 32 || !self.local_points.is_power_of_two() {
            return Err(Error::Config(format!(
                "local_points must be a power of two >= 32 (got {})",
                self.local_points
            )));
        }
        if self.local_half_width < 2.0 * crate::detectors::WINDOW_SIGMAS * self.sigma {
            return Err(Error::Config(format!(
                "local_half_width must be at least 16 sigma (got {})",
                self.local_half_width
            )));
        }
        Grid::new(self.x_min, self.x_max, self.n_points)?;
        let geom = self.lattice()?;
        let (j0, k0) = self.initial_indices();
        if !geom.contains(j0, k0) {
            return Err(Error::Config(format!(
                "initial detector ({j0}, {k0}) lies outside the lattice"
            )));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.x_min, self.x_max, self.n_points)
    }

    pub fn initial_indices(&self) -> (i64, i64) {
        let j0 = self.j0.unwrap_or_else(|| (TARGET_X0 / self.d_x).round() as i64);
        (j0, self.k0)
    }

    pub fn initial_point(&self) -> PhasePoint {
        let (j0, k0) = self.initial_indices();
        PhasePoint::new(j0 as f64 * self.d_x, k0 as f64 * self.d_p)
    }

    /// `E0 = ½(x0² + p0²)` of the initial detector center.
    pub fn initial_energy(&self) -> f64 {
        self.initial_point().energy()
    }

    /// Diffusion coefficient predicted for these detection parameters.
    pub fn analytic_d(&self) -> f64 {
        analytic_d_dimensional(self.gamma, self.d_x, self.d_p, self.sigma, 1.0)
    }

    /// Phase-space radius the lattice must cover: initial orbit radius plus
    /// three diffusive standard deviations at `t_end` plus a fixed buffer.
    pub fn coverage_radius(&self) -> f64 {
        let r0 = self.initial_point().distance(&PhasePoint::new(0.0, 0.0));
        r0 + 3.0 * (self.analytic_d() * self.t_end).sqrt() + COVERAGE_BUFFER
    }

    /// Detector lattice geometry, auto-sized unless `lattice_extent` is set.
    pub fn lattice(&self) -> Result<LatticeGeometry> {
        let needed = self.coverage_radius();
        match self.lattice_extent {
            None => {
                let nj = (needed / self.d_x).ceil() as i64;
                let nk = (needed / self.d_p).ceil() as i64;
                LatticeGeometry::new(self.d_x, self.d_p, self.sigma, self.gamma, (-nj, nj), (-nk, nk))
            }
            Some(radius) => {
                let geom =
                    LatticeGeometry::with_extent(self.d_x, self.d_p, self.sigma, self.gamma, radius)?;
                let (ex, ep) = geom.extent();
                if self.enforce_coverage && (ex < needed || ep < needed) {
                    return Err(Error::Coverage(format!(
                        "lattice extent ({ex:.3}, {ep:.3}) is below the required coverage radius {needed:.3}"
                    )));
                }
                Ok(geom)
            }
        }
    }

    /// Number of propagation steps; the last one is shortened to end at `t_end`.
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt - 1e-9).ceil().max(1.0) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_canonical_form() {
        let cfg = SimConfig::default();
        let parsed = SimConfig::parse(&cfg.canonical()).unwrap();
        assert_eq!(parsed, cfg);
        assert_eq!(parsed.hash(), cfg.hash());
        assert_eq!(cfg.hash().len(), 64);
    }

    #[test]
    fn default_initial_condition() {
        let cfg = SimConfig::default();
        assert_eq!(cfg.initial_indices(), (9, 0));
        assert!((cfg.initial_point().x - 19.44).abs() < 1e-12);
    }

    #[test]
    fn parse_rejects_unknown_duplicate_and_invalid() {
        assert!(matches!(SimConfig::parse("bogus = 1"), Err(Error::Config(_))));
        assert!(matches!(SimConfig::parse("gamma = 1\ngamma = 2"), Err(Error::Config(_))));
        assert!(matches!(SimConfig::parse("d = 2\nd_x = 1"), Err(Error::Config(_))));
        assert!(matches!(SimConfig::parse("d = 0"), Err(Error::Config(_))));
        assert!(matches!(SimConfig::parse("d_x = -1"), Err(Error::Config(_))));
        assert!(matches!(SimConfig::parse("n_points = 1000"), Err(Error::Config(_))));
        assert!(matches!(SimConfig::parse("engine = euler"), Err(Error::Config(_))));
    }

    #[test]
    fn parse_accepts_comments_and_aliases() {
        let cfg = SimConfig::parse("# R0\nd = 1.08  # finer\ngamma=0.5\nj0 = auto\nprune_radius = none\n")
            .unwrap();
        assert_eq!((cfg.d_x, cfg.d_p, cfg.gamma), (1.08, 1.08, 0.5));
        assert_eq!(cfg.prune_radius, None);
        assert_eq!(cfg.initial_indices(), (19, 0));
    }

    #[test]
    fn hash_changes_with_any_field() {
        let a = SimConfig::default();
        let mut b = a.clone();
        b.master_seed = 2;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn auto_lattice_covers_the_run() {
        let cfg = SimConfig::default();
        let need = cfg.coverage_radius();
        assert!((need - (19.44 + 3.0 * (2.0 * PI / 2.16f64.powi(2) * 50.0).sqrt() + 6.0)).abs() < 1e-9);
        let geom = cfg.lattice().unwrap();
        let (ex, ep) = geom.extent();
        assert!(ex >= need && ep >= need);
    }

    #[test]
    fn explicit_extent_too_small_is_a_coverage_error() {
        let cfg = SimConfig {
            lattice_extent: Some(30.0),
            ..SimConfig::default()
        };
        assert!(matches!(cfg.lattice(), Err(Error::Coverage(_))));
        let relaxed = SimConfig {
            enforce_coverage: false,
            ..cfg
        };
        assert_eq!(relaxed.lattice().unwrap().n_j(), 27);
    }

    #[test]
    fn overrides_replace_values() {
        let cfg = SimConfig::default()
            .with_overrides(&[("d".into(), "1.08".into()), ("n_traj".into(), "7".into())])
            .unwrap();
        assert_eq!((cfg.d_x, cfg.d_p, cfg.n_traj), (1.08, 1.08, 7));
        assert!(SimConfig::default().with_overrides(&[("nope".into(), "1".into())]).is_err());
        assert!(SimConfig::default().with_overrides(&[("gamma".into(), "-1".into())]).is_err());
    }

    #[test]
    fn step_count() {
        let cfg = SimConfig::default();
        assert_eq!(cfg.n_steps(), 10_000);
        let odd = SimConfig {
            t_end: 1.0012,
            ..SimConfig::default()
        };
        assert_eq!(odd.n_steps(), 201);
    }
}
