//! `citlab simulate`: simulation grids and the timing sweep.

use std::path::PathBuf;

use citlab::methods::{predicted_counters, Method, TestConfig};
use citlab::simbench::{
    emit_plots, emit_results, hrt_resamples, run_grid, timing_learner, timing_sweep, Format, GridConfig, GridParam,
    MethodSettings, SimConfig,
};
use clap::Args;

use super::{counter_fields, counter_tuple, create_dir, scaled, COUNTER_FIELDS};
use crate::config::load_json;
use crate::error::{CliResult, Failure};
use crate::manifest::Manifest;

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON grid configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Parameter to vary: n, p, s, rho or theta.
    #[arg(long)]
    pub vary: Option<GridParam>,
    /// Values of the varied parameter; defaults to its standard grid.
    #[arg(long, value_delimiter = ',')]
    pub values: Vec<f64>,
    /// Methods to run, e.g. `tpcm,hrt`.
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    pub methods: Vec<Method>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run the HRT at every grid value, not only at the base value.
    #[arg(long)]
    pub hrt_everywhere: bool,
    #[arg(long, env = "CITLAB_WORKERS")]
    pub workers: Option<usize>,
    /// Run the single-thread timing sweep over these dimensions instead of a grid.
    #[arg(long, value_delimiter = ',')]
    pub timing: Vec<usize>,
    #[arg(long, default_value = "sim-out")]
    pub out: PathBuf,
    /// Also write SVG plots, one per metric of the varied parameter.
    #[arg(long)]
    pub plots: bool,
    /// Print the plan and predicted counters without running.
    #[arg(long)]
    pub dry_run: bool,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: citlab::Error| e.to_string())
}

fn resolve(args: &SimulateArgs) -> CliResult<GridConfig> {
    let mut grid: GridConfig = load_json(args.config.as_deref())?;
    let b = &mut grid.base;
    if let Some(v) = args.reps {
        b.replicates = v;
    }
    if let Some(v) = args.n {
        b.n = v;
    }
    if let Some(v) = args.p {
        b.p = v;
    }
    if let Some(v) = args.s {
        b.s = v;
    }
    if let Some(v) = args.rho {
        b.rho = v;
    }
    if let Some(v) = args.theta {
        b.theta = v;
    }
    if let Some(v) = args.seed {
        b.seed = v;
    }
    if !args.methods.is_empty() {
        b.methods = args.methods.clone();
    }
    if let Some(v) = args.vary {
        grid.vary = Some(v);
        grid.values = if args.values.is_empty() {
            v.standard_values()
        } else {
            args.values.clone()
        };
    } else if !args.values.is_empty() {
        return Err(Failure::Schema("--values needs --vary".into()));
    }
    grid.hrt_everywhere |= args.hrt_everywhere;
    if let Some(w) = args.workers {
        grid.workers = w;
    }
    if grid.workers == 0 {
        return Err(Failure::Schema("workers must be at least 1".into()));
    }
    grid.base.validate().map_err(|e| Failure::Schema(e.to_string()))?;
    grid.settings.learner.validate().map_err(|e| Failure::Schema(e.to_string()))?;
    Ok(grid)
}

/// Test settings a replicate of `sim` runs with, up to the seed.
fn replicate_test(sim: &SimConfig, settings: &MethodSettings) -> TestConfig {
    TestConfig {
        alpha: sim.alpha,
        ..settings.test.clone()
    }
}

pub fn run(args: &SimulateArgs) -> CliResult<()> {
    let grid = resolve(args)?;
    if !args.timing.is_empty() {
        return run_timing(args, &grid);
    }
    let plan = grid.plan().map_err(|e| Failure::Schema(e.to_string()))?;
    for (sim, _) in &plan {
        replicate_test(sim, &grid.settings)
            .validate()
            .map_err(|e| Failure::Schema(e.to_string()))?;
    }

    if args.dry_run {
        println!(
            "plan: {} setting(s), {} worker(s); counters are (ml_y_given_x, ml_x, ml_xj_given_rest, predict_xj_given_rest, predict_y_given_x)",
            plan.len(),
            grid.workers
        );
        for (sim, id) in &plan {
            println!("{}: {} replicates x [{}]", id.label, sim.replicates, method_names(&sim.methods));
            let cfg = replicate_test(sim, &grid.settings);
            for &m in &sim.methods {
                let per = predicted_counters(m, sim.p, &cfg);
                println!(
                    "  {:<10} per replicate {}  total {}",
                    m.as_str(),
                    counter_tuple(&per),
                    counter_tuple(&scaled(&per, sim.replicates as u64))
                );
            }
        }
        return Ok(());
    }

    create_dir(&args.out)?;
    let store = run_grid(&grid)?;
    let failures = store.results.iter().filter(|r| r.error.is_some()).count();
    let results = args.out.join("results.json");
    let summary = args.out.join("summary.csv");
    emit_results(&store, Format::Json, &results)?;
    let rows = emit_results(&store, Format::Csv, &summary)?;
    let mut manifest = Manifest::new("simulate", grid.base.seed, &grid)?;
    manifest.outputs.extend([results.clone(), summary.clone()]);
    if args.plots {
        manifest.outputs.extend(emit_plots(&rows, &args.out.join("plots"))?);
    }
    manifest.write(&args.out.join("manifest.json"))?;
    println!("{} replicate result(s), {failures} failure(s)", store.results.len());
    println!("wrote {} and {}", results.display(), summary.display());
    Ok(())
}

fn method_names(methods: &[Method]) -> String {
    methods.iter().map(|m| m.as_str()).collect::<Vec<_>>().join(", ")
}

fn run_timing(args: &SimulateArgs, grid: &GridConfig) -> CliResult<()> {
    let settings = MethodSettings {
        learner: timing_learner(),
        ..grid.settings.clone()
    };
    let base = &grid.base;
    if args.dry_run {
        println!("timing sweep: n = {}, p in {:?}, one thread, one run each", base.n, args.timing);
        for &p in &args.timing {
            let cfg = TestConfig {
                b_hrt: hrt_resamples(p, base.alpha),
                ..replicate_test(base, &settings)
            };
            for &m in &base.methods {
                println!("  p = {p:<5} {:<10} {}", m.as_str(), counter_tuple(&predicted_counters(m, p, &cfg)));
            }
        }
        return Ok(());
    }
    create_dir(&args.out)?;
    let rows = timing_sweep(base, &args.timing, &base.methods, &settings)?;
    let path = args.out.join("timing.csv");
    let mut w = csv::Writer::from_path(&path)?;
    let mut header = vec!["p", "method", "seconds", "resamples"];
    header.extend(COUNTER_FIELDS);
    w.write_record(&header)?;
    for r in &rows {
        let mut rec = vec![r.p.to_string(), r.method.to_string(), format!("{:?}", r.seconds), r.resamples.to_string()];
        rec.extend(counter_fields(&r.counters));
        w.write_record(&rec)?;
        println!("p = {:<5} {:<10} {:>10.3} s", r.p, r.method.as_str(), r.seconds);
    }
    w.flush()?;
    let mut manifest = Manifest::new("simulate --timing", base.seed, &(grid, &args.timing))?;
    manifest.outputs.push(path.clone());
    manifest.write(&args.out.join("manifest.json"))?;
    println!("wrote {}", path.display());
    Ok(())
}
