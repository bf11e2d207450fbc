//! On-disk formats: the clicks CSV, the run manifest, and analysis tables.
//! Every file is written to a temporary sibling and renamed into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::evolution::Trajectory;
use crate::stats::{ClickRecord, EnergyHistogram, TimeBinnedSeries};

pub const CLICK_COLUMNS: &str = "traj_index,t,j,k,x,p";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CLICKS_FILE: &str = "clicks.csv";

/// Writes `bytes` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("not a file path: {}", path.display())))?
        .to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(Error::from)
}

/// Lossless fixed-width float: 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn header(hash: &str, extra: &str, columns: &str) -> String {
    if extra.is_empty() {
        format!("# config_hash={hash} columns={columns}\n")
    } else {
        format!("# config_hash={hash} {extra} columns={columns}\n")
    }
}

/// The clicks CSV: a header line, then one row per click grouped by
/// trajectory in index order.
pub fn format_clicks(hash: &str, trajectories: &[Trajectory]) -> String {
    let mut s = header(hash, "", CLICK_COLUMNS);
    for t in trajectories {
        for c in &t.clicks {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                t.index,
                fmt_f64(c.t),
                c.j,
                c.k,
                fmt_f64(c.x),
                fmt_f64(c.p)
            ));
        }
    }
    s
}

/// Parses a clicks CSV and returns its config hash and rows.
pub fn parse_clicks(text: &str) -> Result<(String, Vec<ClickRecord>)> {
    let mut lines = text.lines();
    let head = lines.next().ok_or_else(|| Error::Format("empty clicks file".into()))?;
    let fields: Vec<&str> = head
        .strip_prefix('#')
        .ok_or_else(|| Error::Format("missing header line".into()))?
        .split_whitespace()
        .collect();
    let get = |key: &str| {
        fields
            .iter()
            .find_map(|f| f.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
            .ok_or_else(|| Error::Format(format!("header lacks {key}")))
    };
    let hash = get("config_hash")?.to_string();
    if get("columns")? != CLICK_COLUMNS {
        return Err(Error::Format(format!("expected columns {CLICK_COLUMNS}")));
    }
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::Format(format!("line {}: malformed row {line:?}", n + 2));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(bad());
        }
        rows.push(ClickRecord {
            traj_index: f[0].parse().map_err(|_| bad())?,
            t: f[1].parse().map_err(|_| bad())?,
            j: f[2].parse().map_err(|_| bad())?,
            k: f[3].parse().map_err(|_| bad())?,
            x: f[4].parse().map_err(|_| bad())?,
            p: f[5].parse().map_err(|_| bad())?,
        });
    }
    Ok((hash, rows))
}

pub fn read_clicks(path: &Path) -> Result<(String, Vec<ClickRecord>)> {
    parse_clicks(&fs::read_to_string(path)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEntry {
    pub index: u64,
    /// Hex of the 256-bit stream seed.
    pub seed: String,
    pub n_clicks: usize,
    pub flagged: bool,
    pub exit_time: Option<f64>,
    pub expected_clicks: f64,
    pub final_mean_x: f64,
    pub final_mean_p: f64,
    pub final_mean_energy: f64,
}

impl From<&Trajectory> for TrajectoryEntry {
    fn from(t: &Trajectory) -> Self {
        Self {
            index: t.index,
            seed: hex::encode(t.seed),
            n_clicks: t.clicks.len(),
            flagged: t.flagged(),
            exit_time: t.exit_time,
            expected_clicks: t.expected_clicks,
            final_mean_x: t.final_state.mean_x,
            final_mean_p: t.final_state.mean_p,
            final_mean_energy: t.final_state.mean_energy,
        }
    }
}

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub code_version: String,
    /// Canonical configuration text; hashing it yields `config_hash`.
    pub config: String,
    /// Wall-clock start and end, seconds since the Unix epoch.
    pub started_unix: f64,
    pub finished_unix: f64,
    pub workers: usize,
    pub n_flagged: usize,
    pub trajectories: Vec<TrajectoryEntry>,
    pub outputs: Vec<String>,
}

impl Manifest {
    /// Parses the embedded configuration and checks it against the hash.
    pub fn config(&self) -> Result<SimConfig> {
        let cfg = SimConfig::parse(&self.config)?;
        if cfg.hash() != self.config_hash {
            return Err(Error::HashMismatch(format!(
                "manifest config hashes to {}, manifest records {}",
                cfg.hash(),
                self.config_hash
            )));
        }
        Ok(cfg)
    }

    pub fn flagged_indices(&self) -> Vec<u64> {
        self.trajectories.iter().filter(|t| t.flagged).map(|t| t.index).collect()
    }
}

pub fn unix_now() -> f64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest).map_err(|e| Error::Format(e.to_string()))?;
    write_atomic(path, format!("{text}\n").as_bytes())
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Manifest path belonging to a clicks file.
pub fn manifest_path_for(clicks: &Path) -> PathBuf {
    clicks.parent().unwrap_or(Path::new(".")).join(MANIFEST_FILE)
}

/// Reads a clicks file with its manifest, checks that the hashes agree, and
/// drops the clicks of flagged trajectories.
pub fn load_run(clicks_path: &Path) -> Result<(Manifest, SimConfig, Vec<ClickRecord>)> {
    let manifest = read_manifest(&manifest_path_for(clicks_path))?;
    let cfg = manifest.config()?;
    let (hash, mut clicks) = read_clicks(clicks_path)?;
    if hash != manifest.config_hash {
        return Err(Error::HashMismatch(format!(
            "clicks file has {hash}, manifest has {}",
            manifest.config_hash
        )));
    }
    let flagged = manifest.flagged_indices();
    clicks.retain(|c| !flagged.contains(&c.traj_index));
    Ok((manifest, cfg, clicks))
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Binned series as CSV; empty bins have empty moment fields.
pub fn format_series(hash: &str, series: &TimeBinnedSeries) -> String {
    let mut s = header(
        hash,
        &format!("bin_width={}", series.bin_width),
        "t_start,t_center,count,mean_t,mean_x,mean_p,var_x,var_p,mean_e,var_e",
    );
    for b in &series.bins {
        let m = b.moments;
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            fmt_f64(b.t_start),
            fmt_f64(b.t_center(series.bin_width)),
            b.count,
            opt(m.map(|m| m.mean_t)),
            opt(m.map(|m| m.mean_x)),
            opt(m.map(|m| m.mean_p)),
            opt(m.map(|m| m.var_x)),
            opt(m.map(|m| m.var_p)),
            opt(m.map(|m| m.mean_e)),
            opt(m.map(|m| m.var_e)),
        ));
    }
    s
}

/// Histogram as CSV, with a reference density evaluated at bin centers.
pub fn format_histogram(hash: &str, hist: &EnergyHistogram, reference: impl Fn(f64) -> f64) -> String {
    let mut s = header(
        hash,
        &format!("window={},{} n_clicks={}", hist.t_a, hist.t_b, hist.n_clicks),
        "e_lo,e_hi,density,reference",
    );
    for (w, d) in hist.edges.windows(2).zip(&hist.densities) {
        s.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(w[0]),
            fmt_f64(w[1]),
            fmt_f64(*d),
            fmt_f64(reference(0.5 * (w[0] + w[1])))
        ));
    }
    s
}
