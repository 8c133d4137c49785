//! `citlab equivalence`: the linear-model HRT/tPCM comparison.

use std::fs;
use std::path::PathBuf;

use citlab::equivalence::{linear_model_suite, EquivalenceReport, LinearSuiteConfig};
use clap::{Args, ValueEnum};

use super::{create_dir, pool};
use crate::config::load_json;
use crate::error::{CliResult, Failure};
use crate::manifest::Manifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    /// Linear model with a Gaussian `X_0 | Z` and OLS nuisances.
    Linear,
}

#[derive(Debug, Args)]
pub struct EquivalenceArgs {
    #[arg(long, value_enum, default_value_t = Suite::Linear)]
    pub suite: Suite,
    /// JSON suite configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Sample sizes, e.g. `500,2000`.
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, env = "CITLAB_WORKERS", default_value_t = 1)]
    pub workers: usize,
    /// JSON report; a CSV and a manifest are written next to it.
    #[arg(long, default_value = "equivalence.json")]
    pub out: PathBuf,
    #[arg(long)]
    pub dry_run: bool,
}

pub fn run(args: &EquivalenceArgs) -> CliResult<()> {
    let mut cfg: LinearSuiteConfig = load_json(args.config.as_deref())?;
    if !args.n.is_empty() {
        cfg.n_grid = args.n.clone();
    }
    if let Some(r) = args.reps {
        cfg.reps = r;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(|e| Failure::Schema(e.to_string()))?;

    if args.dry_run {
        let p = cfg.eta.len() + 1;
        println!("plan: n in {:?}, {} replicates each, p = {p}", cfg.n_grid, cfg.reps);
        println!(
            "  per replicate: tPCM ({}) and HRT ({}) resamples on variable 0, {} second-moment draws, {} diagnostic draws",
            cfg.b_tpcm, cfg.b_hrt, cfg.b_sigma, cfg.b_diagnostics
        );
        return Ok(());
    }

    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let reports = pool(args.workers)?.install(|| linear_model_suite(&cfg))?;
    let json = args.out.clone();
    let text = serde_json::to_string_pretty(&reports).map_err(|e| Failure::Run(e.to_string()))?;
    fs::write(&json, text + "\n")?;
    let csv_path = args.out.with_extension("csv");
    write_csv(&reports, &csv_path)?;
    for r in &reports {
        println!(
            "n = {:<6} level {:.4} (se {:.4})  agreement {:.4} (se {:.4})  KS p {:.3}  identity error {:.2e}",
            r.n, r.empirical_level, r.level_se, r.decision_agreement_rate, r.agreement_se, r.ks_pvalue, r.identity_max_abs_error
        );
    }
    let mut manifest = Manifest::new("equivalence", cfg.seed, &cfg)?;
    manifest.outputs.extend([json, csv_path.clone()]);
    manifest.write(&super::test::manifest_path(&args.out))?;
    println!("wrote {}", csv_path.display());
    Ok(())
}

fn write_csv(reports: &[EquivalenceReport], path: &std::path::Path) -> CliResult<()> {
    let terms: Vec<String> = reports
        .first()
        .map(|r| r.assumption_terms.keys().cloned().collect())
        .unwrap_or_default();
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = [
        "n",
        "reps",
        "identity_max_abs_error",
        "decision_agreement_rate",
        "agreement_se",
        "rhrt_agreement_rate",
        "ks_statistic",
        "ks_pvalue",
        "empirical_level",
        "level_se",
        "hrt_level",
    ]
    .map(String::from)
    .to_vec();
    header.extend(terms.iter().map(|t| format!("median_{t}")));
    w.write_record(&header)?;
    for r in reports {
        let mut rec = vec![r.n.to_string(), r.reps.to_string()];
        rec.extend(
            [
                r.identity_max_abs_error,
                r.decision_agreement_rate,
                r.agreement_se,
                r.rhrt_agreement_rate,
                r.ks_statistic,
                r.ks_pvalue,
                r.empirical_level,
                r.level_se,
                r.hrt_level,
            ]
            .map(|v| format!("{v:?}")),
        );
        rec.extend(terms.iter().map(|t| r.assumption_terms.get(t).map_or(String::new(), |v| format!("{v:?}"))));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
