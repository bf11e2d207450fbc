use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use qtrack::ensemble::{resolve_workers, run_ensemble};
use qtrack::evolution::Simulation;
use qtrack::io::{
    format_clicks, format_histogram, format_series, load_run, unix_now, write_atomic, write_manifest, Manifest,
    TrajectoryEntry, CLICKS_FILE, MANIFEST_FILE,
};
use qtrack::stats::{analyze as analyze_clicks, energy_pdf_initial, ols, AnalysisReport};
use qtrack::validate::run_suite;
use qtrack::SimConfig;

use crate::ScanParam;

/// Exit-status category and code for an error chain.
pub fn classify(err: &anyhow::Error) -> (&'static str, u8) {
    let category = err
        .chain()
        .find_map(|e| e.downcast_ref::<qtrack::Error>())
        .map(|e| e.category())
        .or_else(|| err.chain().find_map(|e| e.downcast_ref::<std::io::Error>()).map(|_| "io"))
        .unwrap_or("io");
    let code = match category {
        "config" => 2,
        "simulation" | "data" => 3,
        "io" => 4,
        _ => 5,
    };
    (category, code)
}

pub fn parse_override(s: &str) -> std::result::Result<(String, String), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected key=value, got {s:?}"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn load_config(path: &Path, overrides: &[(String, String)]) -> Result<SimConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg = SimConfig::parse(&text)?;
    Ok(cfg.with_overrides(overrides)?)
}

fn code_version() -> String {
    format!("qtrack {}", env!("CARGO_PKG_VERSION"))
}

fn write_report(path: &Path, value: &AnalysisReport) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    write_atomic(path, format!("{text}\n").as_bytes())?;
    Ok(())
}

/// Simulates `cfg` into `out`; everything is validated before any file is
/// written.
fn run_config(cfg: SimConfig, out: &Path, workers: usize) -> Result<PathBuf> {
    let sim = Simulation::new(cfg)?;
    let started = unix_now();
    let trajectories = run_ensemble(&sim, workers)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let clicks_path = out.join(CLICKS_FILE);
    write_atomic(&clicks_path, format_clicks(sim.config_hash(), &trajectories).as_bytes())?;
    let entries: Vec<TrajectoryEntry> = trajectories.iter().map(TrajectoryEntry::from).collect();
    let manifest = Manifest {
        config_hash: sim.config_hash().to_string(),
        code_version: code_version(),
        config: sim.config().canonical(),
        started_unix: started,
        finished_unix: unix_now(),
        workers,
        n_flagged: entries.iter().filter(|e| e.flagged).count(),
        trajectories: entries,
        outputs: vec![CLICKS_FILE.into(), MANIFEST_FILE.into()],
    };
    write_manifest(&out.join(MANIFEST_FILE), &manifest)?;
    let clicks: usize = trajectories.iter().map(|t| t.clicks.len()).sum();
    eprintln!(
        "{} trajectories, {clicks} clicks, {} flagged -> {}",
        trajectories.len(),
        manifest.n_flagged,
        out.display()
    );
    Ok(clicks_path)
}

pub fn run(config: &Path, out: &Path, workers: Option<usize>, overrides: &[(String, String)]) -> Result<()> {
    let cfg = load_config(config, overrides)?;
    let workers = resolve_workers(workers)?;
    run_config(cfg, out, workers)?;
    Ok(())
}

/// Analyzes one run and writes its tables into `out`.
fn analyze_one(clicks_path: &Path, out: &Path) -> Result<(SimConfig, AnalysisReport)> {
    let (manifest, cfg, clicks) =
        load_run(clicks_path).with_context(|| format!("loading {}", clicks_path.display()))?;
    let report = analyze_clicks(&clicks, &cfg, manifest.trajectories.len(), manifest.n_flagged)?;
    fs::create_dir_all(out)?;
    let hash = &manifest.config_hash;
    if let Some(series) = &report.series {
        write_atomic(&out.join("series.csv"), format_series(hash, series).as_bytes())?;
    }
    write_report(&out.join("fit.json"), &report)?;
    if let Some(early) = &report.early_energy {
        let e0 = early.e0;
        let text = format_histogram(hash, &early.histogram, |e| energy_pdf_initial(e, e0));
        write_atomic(&out.join("hist_early.csv"), text.as_bytes())?;
    }
    if let Some(late) = &report.late_energy {
        let eps = late.thermal.epsilon;
        let text = format_histogram(hash, &late.histogram, |e| (-e / eps).exp() / eps);
        write_atomic(&out.join("hist_late.csv"), text.as_bytes())?;
    }
    Ok((cfg, report))
}

fn print_summary(report: &AnalysisReport) {
    match &report.fit {
        Some(f) => eprintln!(
            "D = {:.4} (analytic {:.4}), delta0^2 = {:.4} (lattice sum {:.4}), r^2 = {:.4}",
            f.d, report.analytic_d, f.delta0_sq, report.initial_dispersion, f.r_squared
        ),
        None => eprintln!("no dispersion fit: {}", report.fit_error.as_deref().unwrap_or("")),
    }
}

/// One row of a scaling table.
struct ScalingRow {
    gamma: f64,
    d_x: f64,
    d_p: f64,
    d_fit: Option<f64>,
    d_analytic: f64,
    delta0_sq: Option<f64>,
    r_squared: Option<f64>,
}

fn scaling_row(cfg: &SimConfig, report: &AnalysisReport) -> ScalingRow {
    ScalingRow {
        gamma: cfg.gamma,
        d_x: cfg.d_x,
        d_p: cfg.d_p,
        d_fit: report.fit.as_ref().map(|f| f.d),
        d_analytic: report.analytic_d,
        delta0_sq: report.fit.as_ref().map(|f| f.delta0_sq),
        r_squared: report.fit.as_ref().map(|f| f.r_squared),
    }
}

fn format_scaling(rows: &[ScalingRow]) -> String {
    let o = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
    let mut s = String::from("gamma,d_x,d_p,d_fit,d_analytic,delta0_sq,r_squared,d_fit_times_d2\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{:.16e},{},{},{}\n",
            r.gamma,
            r.d_x,
            r.d_p,
            o(r.d_fit),
            r.d_analytic,
            o(r.delta0_sq),
            o(r.r_squared),
            o(r.d_fit.map(|d| d * r.d_x * r.d_p)),
        ));
    }
    s
}

pub fn analyze(inputs: &[PathBuf], out: &Path) -> Result<()> {
    if inputs.len() == 1 {
        let (_, report) = analyze_one(&inputs[0], out)?;
        print_summary(&report);
        return Ok(());
    }
    let mut rows = Vec::new();
    for (i, input) in inputs.iter().enumerate() {
        let (cfg, report) = analyze_one(input, &out.join(format!("run_{i}")))?;
        print_summary(&report);
        rows.push(scaling_row(&cfg, &report));
    }
    write_atomic(&out.join("scaling.csv"), format_scaling(&rows).as_bytes())?;
    Ok(())
}

pub fn validate(workers: Option<usize>) -> Result<bool> {
    let workers = resolve_workers(workers)?;
    let results = run_suite(workers);
    println!("{:<22} {:>6} {:>14} {:>12}  detail", "check", "result", "value", "tolerance");
    for r in &results {
        println!(
            "{:<22} {:>6} {:>14.6e} {:>12.3e}  {}",
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.value,
            r.tolerance,
            r.detail
        );
    }
    Ok(results.iter().all(|r| r.passed))
}

pub fn scan(
    config: &Path,
    out: &Path,
    param: ScanParam,
    values: &[f64],
    workers: Option<usize>,
    overrides: &[(String, String)],
) -> Result<()> {
    let base = load_config(config, overrides)?;
    let workers = resolve_workers(workers)?;
    let key = match param {
        ScanParam::Gamma => "gamma",
        ScanParam::D => "d",
    };
    // Validate every point before simulating any of them.
    let configs: Vec<SimConfig> = values
        .iter()
        .map(|v| {
            let cfg = base.with_overrides(&[(key.to_string(), format!("{v:?}"))])?;
            Simulation::new(cfg.clone())?;
            Ok(cfg)
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (cfg, v) in configs.into_iter().zip(values) {
        let dir = out.join(format!("{key}_{v}"));
        let clicks = run_config(cfg, &dir, workers)?;
        let (cfg, report) = analyze_one(&clicks, &dir)?;
        print_summary(&report);
        rows.push(scaling_row(&cfg, &report));
    }
    write_atomic(&out.join("scaling.csv"), format_scaling(&rows).as_bytes())?;

    let fitted: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.d_fit.map(|d| (r.gamma, d)))
        .collect();
    match param {
        ScanParam::Gamma if fitted.len() >= 2 => {
            let (g, d): (Vec<f64>, Vec<f64>) = fitted.into_iter().unzip();
            let line = ols(&g, &d)?;
            eprintln!("D vs gamma: slope {:.4}, r^2 {:.4}", line.slope, line.r_squared);
        }
        ScanParam::D => {
            for r in &rows {
                if let Some(d) = r.d_fit {
                    eprintln!("d = {}: D*d^2 = {:.4} (2*pi*gamma = {:.4})", r.d_x, d * r.d_x * r.d_p, 2.0 * std::f64::consts::PI * r.gamma);
                }
            }
        }
        _ => {}
    }
    Ok(())
}
