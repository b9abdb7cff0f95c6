//! Writing reports, CSV tables, plot scripts and content hashes.

use crate::CliError;
use gdsde::experiments::{Artifact, ExperimentReport, ManifestEntry, PlotHint};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const REPORT_FILE: &str = "report.json";
pub const TIMING_FILE: &str = "timing.json";

fn write(path: &Path, bytes: &[u8]) -> Result<ManifestEntry, CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))?;
    let digest = Sha256::digest(bytes);
    let sha256 = digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    });
    let file = path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(ManifestEntry { file, sha256, bytes: bytes.len() as u64 })
}

/// gnuplot script plotting the hinted columns of `csv`.
pub fn gnuplot_script(csv: &str, plot: &PlotHint) -> String {
    let stem = csv.trim_end_matches(".csv");
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set terminal pngcairo size 900,600\n");
    let _ = writeln!(s, "set output '{stem}.png'");
    let _ = writeln!(s, "set xlabel '{}'", plot.x);
    if plot.logscale {
        s.push_str("set logscale xy\n");
    }
    let style = if plot.points { "linespoints" } else { "lines" };
    let series: Vec<String> = plot.y.iter().map(|y| format!("'{csv}' using '{}':'{y}' with {style} title '{y}'", plot.x)).collect();
    let _ = writeln!(s, "plot {}", series.join(", \\\n     "));
    s
}

fn emit_table(dir: &Path, artifact: &Artifact) -> Result<Vec<ManifestEntry>, CliError> {
    let path = dir.join(&artifact.name);
    let csv = artifact.table.to_csv().map_err(|e| CliError::io(&path, e))?;
    let mut entries = vec![write(&path, csv.as_bytes())?];
    if let Some(plot) = &artifact.plot {
        let gp = dir.join(format!("{}.gp", artifact.name.trim_end_matches(".csv")));
        entries.push(write(&gp, gnuplot_script(&artifact.name, plot).as_bytes())?);
    }
    Ok(entries)
}

/// Writes `<out_dir>/<experiment>/`: the CSV artifacts, their plot scripts, `report.json` listing
/// them with hashes, and `timing.json`. Returns the report directory.
pub fn emit_artifacts(report: &mut ExperimentReport, out_dir: &Path) -> Result<PathBuf, CliError> {
    let dir = out_dir.join(&report.spec.name);
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let mut manifest = Vec::new();
    for artifact in &report.tables {
        manifest.extend(emit_table(&dir, artifact)?);
    }
    report.artifacts = manifest;
    let path = dir.join(REPORT_FILE);
    write(&path, report_json(report).as_bytes())?;
    let timing = serde_json::json!({ "experiment": report.spec.name, "wall_time_seconds": report.wall_time });
    let tpath = dir.join(TIMING_FILE);
    write(&tpath, format!("{timing:#}\n").as_bytes())?;
    Ok(dir)
}

pub fn report_json(report: &ExperimentReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("reports serialize");
    s.push('\n');
    s
}

pub fn load_report(path: &Path) -> Result<ExperimentReport, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::io(path, e))
}

/// Recomputes the hash of every manifest entry under `dir`; returns the files that differ.
pub fn verify_manifest(report: &ExperimentReport, dir: &Path) -> Result<Vec<String>, CliError> {
    let mut bad = Vec::new();
    for entry in &report.artifacts {
        let path = dir.join(&entry.file);
        let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
        let digest = Sha256::digest(&bytes);
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        if hex != entry.sha256 || bytes.len() as u64 != entry.bytes {
            bad.push(entry.file.clone());
        }
    }
    Ok(bad)
}
