//! `citlab test`: every predictor of a user dataset.

use std::fs;
use std::path::PathBuf;

use citlab::methods::{predicted_counters, Method};
use citlab::simbench::{run_methods, MethodRun, MethodSettings};
use citlab::Dataset;
use clap::{Args, ValueEnum};

use super::{counter_fields, counter_tuple, COUNTER_FIELDS};
use crate::config::{load_json, RunConfig};
use crate::error::{CliResult, Failure};
use crate::manifest::Manifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodChoice {
    Tpcm,
    Vpcm,
    Hrt,
    Tgcm,
    /// tPCM, HRT, vPCM and tGCM; tPCM and HRT share their fits.
    All,
}

impl MethodChoice {
    fn methods(self) -> Vec<Method> {
        match self {
            MethodChoice::Tpcm => vec![Method::Tpcm],
            MethodChoice::Vpcm => vec![Method::Vpcm],
            MethodChoice::Hrt => vec![Method::Hrt],
            MethodChoice::Tgcm => vec![Method::Tgcm],
            MethodChoice::All => vec![Method::Tpcm, Method::Hrt, Method::Vpcm, Method::Tgcm],
        }
    }
}

#[derive(Debug, Args)]
pub struct TestArgs {
    /// Data CSV with a header row; overrides `data` in the config.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = MethodChoice::Tpcm)]
    pub method: MethodChoice,
    /// Family-wise level of the Bonferroni selection.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Name of the response column.
    #[arg(long)]
    pub response: Option<String>,
    /// Tower resamples for tPCM.
    #[arg(long)]
    pub b_tpcm: Option<usize>,
    /// Resamples for the HRT.
    #[arg(long)]
    pub b_hrt: Option<usize>,
    /// Results CSV; a manifest is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the plan and predicted counters without running.
    #[arg(long)]
    pub dry_run: bool,
}

fn resolve(args: &TestArgs) -> CliResult<RunConfig> {
    let mut cfg: RunConfig = load_json(args.config.as_deref())?;
    if let Some(d) = &args.data {
        cfg.data = Some(d.clone());
    }
    if let Some(a) = args.alpha {
        cfg.test.alpha = a;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
        cfg.test.seed = 0;
    }
    if let Some(r) = &args.response {
        cfg.response = r.clone();
    }
    if let Some(b) = args.b_tpcm {
        cfg.test.b_tpcm = b;
    }
    if let Some(b) = args.b_hrt {
        cfg.test.b_hrt = b;
    }
    if let Some(o) = &args.out {
        cfg.output = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(args: &TestArgs) -> CliResult<()> {
    let cfg = resolve(args)?;
    let path = cfg
        .data
        .clone()
        .ok_or_else(|| Failure::Schema("no data file given (--data or 'data' in the config)".into()))?;
    let file = fs::File::open(&path).map_err(|e| Failure::Run(format!("{}: {e}", path.display())))?;
    let data = Dataset::from_csv_reader(file, &cfg.response)?;
    let methods = args.method.methods();
    let test = cfg.resolved_test();
    let p = data.n_predictors();

    if args.dry_run {
        println!("plan: n = {}, p = {p}, methods: {}", data.n_rows(), names(&methods));
        println!("predicted counters (ml_y_given_x, ml_x, ml_xj_given_rest, predict_xj_given_rest, predict_y_given_x):");
        for &m in &methods {
            println!("  {:<6} {}", m.as_str(), counter_tuple(&predicted_counters(m, p, &test)));
        }
        if methods.contains(&Method::Tpcm) && methods.contains(&Method::Hrt) {
            println!("  tpcm and hrt share one split and one set of nuisance fits");
        }
        return Ok(());
    }

    let settings = MethodSettings {
        learner: cfg.learner.clone(),
        gaussian: cfg.gaussian.clone(),
        test: test.clone(),
    };
    let runs = run_methods(&data, &methods, &settings, &test, None);
    let out_path = cfg.output.clone().unwrap_or_else(|| PathBuf::from("results.csv"));
    write_results(&runs, &out_path)?;

    for r in &runs {
        let outcome = r.outcome.as_ref().expect("checked by write_results");
        let selected: Vec<&str> = outcome.iter().filter(|o| o.reject).map(|o| o.name.as_str()).collect();
        let listed = if selected.is_empty() {
            "none".to_string()
        } else {
            selected.join(", ")
        };
        println!("{}: selected {listed} (Bonferroni, alpha = {})", r.method, test.alpha);
    }

    let mut manifest = Manifest::new("test", cfg.seed, &cfg)?;
    manifest.add_input(&path)?;
    manifest.outputs.push(out_path.clone());
    manifest.write(&manifest_path(&out_path))?;
    println!("wrote {}", out_path.display());
    Ok(())
}

fn names(methods: &[Method]) -> String {
    methods.iter().map(|m| m.as_str()).collect::<Vec<_>>().join(", ")
}

pub fn manifest_path(out: &std::path::Path) -> PathBuf {
    let mut name = out.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn write_results(runs: &[MethodRun], path: &std::path::Path) -> CliResult<()> {
    if let Some(r) = runs.iter().find(|r| r.outcome.is_err()) {
        let e = r.outcome.as_ref().unwrap_err();
        return Err(Failure::Run(format!("{} failed: {e}", r.method)));
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| Failure::Run(format!("{}: {e}", path.display())))?;
    let mut header = vec![
        "method", "variable", "name", "statistic", "pvalue", "reject", "degenerate", "seconds", "shared_fits",
    ];
    header.extend(COUNTER_FIELDS);
    w.write_record(&header)?;
    for r in runs {
        for o in r.outcome.as_ref().unwrap() {
            let mut rec = vec![
                r.method.to_string(),
                o.variable.to_string(),
                o.name.clone(),
                format!("{:?}", o.statistic),
                format!("{:?}", o.pvalue),
                o.reject.to_string(),
                o.degenerate.to_string(),
                format!("{:?}", r.seconds),
                r.shared_fits.to_string(),
            ];
            rec.extend(counter_fields(&r.counters));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}
