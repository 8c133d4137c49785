//! `citlab report`: summaries and plots from saved simulation results.

use std::fs;
use std::path::PathBuf;

use citlab::simbench::{compute_metrics, emit_plots, write_summary_csv, ReplicateResult};
use clap::Args;
use serde::{Deserialize, Serialize};

use super::create_dir;
use crate::error::{CliResult, Failure};
use crate::manifest::Manifest;

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory holding `results.json` files written by `simulate`.
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory; defaults to the input directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Skip the SVG plots.
    #[arg(long)]
    pub no_plots: bool,
}

#[derive(Deserialize)]
struct Saved {
    results: Vec<ReplicateResult>,
}

#[derive(Serialize)]
struct ReportConfig<'a> {
    input: &'a PathBuf,
    files: &'a [PathBuf],
}

pub fn run(args: &ReportArgs) -> CliResult<()> {
    let entries = fs::read_dir(&args.input).map_err(|e| Failure::Run(format!("{}: {e}", args.input.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut results = Vec::new();
    let mut used = Vec::new();
    for path in paths {
        let text = fs::read_to_string(&path)?;
        let value: serde_json::Value = match serde_json::from_str(&text) {
            Ok(v) => v,
            Err(_) => continue,
        };
        if value.get("results").is_none() {
            continue;
        }
        let saved: Saved =
            serde_json::from_value(value).map_err(|e| Failure::Run(format!("{}: {e}", path.display())))?;
        results.extend(saved.results);
        used.push(path);
    }
    if results.is_empty() {
        return Err(Failure::NoResults(format!("no results in {}", args.input.display())));
    }
    let rows = compute_metrics(&results)?;
    let out = args.out.clone().unwrap_or_else(|| args.input.clone());
    create_dir(&out)?;
    let summary = out.join("summary.csv");
    write_summary_csv(&rows, fs::File::create(&summary)?)?;
    let mut manifest = Manifest::new("report", 0, &ReportConfig { input: &args.input, files: &used })?;
    for p in &used {
        manifest.add_input(p)?;
    }
    manifest.outputs.push(summary.clone());
    if !args.no_plots {
        manifest.outputs.extend(emit_plots(&rows, &out.join("plots"))?);
    }
    manifest.write(&out.join("report-manifest.json"))?;
    for r in &rows {
        let est = r.estimate.map_or("-".to_string(), |v| format!("{v:.4}"));
        let se = r.mc_se.map_or("-".to_string(), |v| format!("{v:.4}"));
        println!("{:<40} {:<10} {:<8} {est:>8} ± {se}", r.setting, r.method.as_str(), r.metric.as_str());
    }
    println!("wrote {}", summary.display());
    Ok(())
}
