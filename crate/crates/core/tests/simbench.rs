use citlab::methods::Method;
use citlab::simbench::{
    compute_metrics, emit_plots, emit_results, generate_gam_dgp, read_summary_csv, run_grid, run_replicate,
    timing_learner, timing_sweep, write_summary_csv, Format, GridConfig, GridParam, Metric, MethodSettings,
    ReplicateResult, SettingId, SimConfig,
};
use citlab::CounterSnapshot;

fn small(n: usize, p: usize, s: usize) -> SimConfig {
    SimConfig {
        n,
        p,
        s,
        replicates: 4,
        ..SimConfig::default()
    }
}

fn id(label: &str) -> SettingId {
    SettingId {
        label: label.into(),
        vary: Some(GridParam::Theta),
        value: 0.25,
    }
}

#[test]
fn global_null_has_zero_mean() {
    let cfg = SimConfig {
        theta: 0.0,
        ..small(200, 10, 4)
    };
    let inst = generate_gam_dgp(&cfg, 0).unwrap();
    for i in 0..200 {
        let row: Vec<f64> = inst.dataset.x().row(i).iter().copied().collect();
        assert_eq!(inst.mean.call(&row), 0.0);
    }
    assert_eq!(inst.truth.iter().filter(|&&t| t).count(), 4);
}

#[test]
fn nonnull_set_is_redrawn_unless_pinned() {
    let cfg = small(50, 20, 5);
    let masks: Vec<Vec<bool>> = (0..6).map(|r| generate_gam_dgp(&cfg, r).unwrap().truth).collect();
    assert!(masks.iter().any(|m| *m != masks[0]));
    let pinned = SimConfig {
        nonnull_seed: Some(3),
        ..cfg
    };
    let masks: Vec<Vec<bool>> = (0..6).map(|r| generate_gam_dgp(&pinned, r).unwrap().truth).collect();
    assert!(masks.iter().all(|m| *m == masks[0]));
    assert!(generate_gam_dgp(&small(50, 3, 4), 0).is_err());
}

#[test]
fn mean_follows_the_parity_rule() {
    let cfg = SimConfig {
        nonnull_seed: Some(1),
        ..small(10, 6, 6)
    };
    let inst = generate_gam_dgp(&cfg, 0).unwrap();
    let row = [0.3, 0.0, 0.3, 0.0, 0.3, 0.0];
    assert!((inst.mean.call(&row) + 3.0 * 0.25).abs() < 1e-15);
}

#[test]
fn replicate_counters_follow_the_cost_table() {
    let sim = SimConfig::default();
    let settings = MethodSettings::default();
    let r = run_replicate(&sim, &settings, &[Method::Tpcm], 0, &id("d")).unwrap();
    assert_eq!(r[0].counters, CounterSnapshot::new(1, 1, 0, 50 * 25, 50 * 25));
    assert!(r[0].error.is_none());
    assert_eq!(r[0].rejections.len(), 50);

    let null = SimConfig {
        theta: 0.0,
        ..small(300, 8, 2)
    };
    let r = run_replicate(&null, &settings, &[Method::OracleGcm], 0, &id("o")).unwrap();
    assert_eq!(r[0].counters.total_fits(), 0);
}

#[test]
fn shared_fits_are_counted_once_per_method() {
    let sim = small(300, 6, 2);
    let settings = MethodSettings {
        test: citlab::methods::TestConfig {
            b_hrt: 400,
            ..MethodSettings::default().test
        },
        ..MethodSettings::default()
    };
    let r = run_replicate(&sim, &settings, &[Method::Hrt, Method::Tpcm], 0, &id("s")).unwrap();
    assert_eq!(r.len(), 2);
    let t = r.iter().find(|x| x.method == Method::Tpcm).unwrap();
    let h = r.iter().find(|x| x.method == Method::Hrt).unwrap();
    assert!(t.shared_fits && h.shared_fits);
    assert_eq!(t.counters, CounterSnapshot::new(1, 1, 0, 6 * 25, 6 * 25));
    assert_eq!(h.counters, CounterSnapshot::new(1, 1, 0, 6 * 400, 6 * 400));
}

#[test]
fn replicates_are_deterministic() {
    let sim = small(300, 6, 2);
    let settings = MethodSettings::default();
    let methods = [Method::Tpcm, Method::Vpcm, Method::OracleGcm, Method::Tgcm];
    let a = run_replicate(&sim, &settings, &methods, 3, &id("a")).unwrap();
    let b = run_replicate(&sim, &settings, &methods, 3, &id("a")).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.rejections, y.rejections);
        assert_eq!(x.pvalues, y.pvalues);
        assert_eq!(x.counters, y.counters);
    }
    let vpcm = a.iter().find(|x| x.method == Method::Vpcm).unwrap();
    assert_eq!(vpcm.counters, CounterSnapshot::new(1 + 2 * 6, 0, 6, 6, 12));
    let tgcm = a.iter().find(|x| x.method == Method::Tgcm).unwrap();
    assert_eq!(tgcm.counters, CounterSnapshot::new(5, 5, 0, 5 * 6 * 25, 5 * 6 * 25));
}

fn fixture(rejections: &[bool], truth: &[bool], seconds: f64, replicate: usize) -> ReplicateResult {
    ReplicateResult {
        setting: id("fix"),
        replicate,
        method: Method::Tpcm,
        rejections: rejections.to_vec(),
        pvalues: vec![0.5; rejections.len()],
        truth: truth.to_vec(),
        seconds,
        counters: CounterSnapshot::default(),
        shared_fits: false,
        error: None,
    }
}

fn metric(rows: &[citlab::simbench::SummaryRow], m: Metric) -> (Option<f64>, Option<f64>) {
    let r = rows.iter().find(|r| r.metric == m).unwrap();
    (r.estimate, r.mc_se)
}

#[test]
fn metrics_on_a_hand_built_fixture() {
    let truth = [true, true, false, false];
    let results = vec![
        fixture(&[true, false, false, false], &truth, 1.0, 0),
        fixture(&[true, true, true, false], &truth, 2.0, 1),
        fixture(&[false, false, false, false], &truth, 3.0, 2),
        fixture(&[false, true, false, true], &truth, 4.0, 3),
    ];
    let rows = compute_metrics(&results).unwrap();
    // FWER: replicates 1 and 3 reject a null.
    let (fwer, se) = metric(&rows, Metric::Fwer);
    assert_eq!(fwer, Some(0.5));
    assert!((se.unwrap() - (1.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    // Power: (1/2 + 1 + 0 + 1/2) / 4.
    assert_eq!(metric(&rows, Metric::Power).0, Some(0.5));
    assert_eq!(metric(&rows, Metric::Seconds).0, Some(2.5));
    assert_eq!(metric(&rows, Metric::Failures).0, Some(0.0));

    let none = compute_metrics(&[fixture(&[false; 4], &truth, 1.0, 0)]).unwrap();
    assert_eq!(metric(&none, Metric::Fwer).0, Some(0.0));
    assert_eq!(metric(&none, Metric::Power).0, Some(0.0));
    let perfect: Vec<_> = (0..3).map(|r| fixture(&truth, &truth, 1.0, r)).collect();
    let rows = compute_metrics(&perfect).unwrap();
    assert_eq!(metric(&rows, Metric::Fwer).0, Some(0.0));
    assert_eq!(metric(&rows, Metric::Power).0, Some(1.0));

    let no_nonnull = compute_metrics(&[fixture(&[false; 3], &[false; 3], 1.0, 0)]).unwrap();
    assert_eq!(metric(&no_nonnull, Metric::Power), (None, None));
    assert!(compute_metrics(&[]).is_err());
}

#[test]
fn summary_csv_round_trips_and_blank_estimates_survive() {
    let truth = [true, false, false];
    let mut results: Vec<_> = (0..5)
        .map(|r| fixture(&[r % 2 == 0, r == 3, false], &truth, 0.1 * r as f64 + 1.0 / 3.0, r))
        .collect();
    results.push(ReplicateResult {
        setting: id("empty"),
        ..fixture(&[false; 3], &[false; 3], 1.0, 0)
    });
    let rows = compute_metrics(&results).unwrap();
    let mut buf = Vec::new();
    write_summary_csv(&rows, &mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("setting,vary,value,method,metric,estimate,mc_se\n"));
    assert!(text.contains("empty,theta,0.25,tpcm,power,,\n"));
    assert_eq!(read_summary_csv(buf.as_slice()).unwrap(), rows);

    let dir = tempfile::tempdir().unwrap();
    let plots = emit_plots(&rows, dir.path()).unwrap();
    assert_eq!(plots.len(), 3);
    let power = std::fs::read_to_string(dir.path().join("theta_power.svg")).unwrap();
    assert_eq!(power.matches("\ntpcm\n").count(), 1);
}

#[test]
fn grid_runs_every_setting_and_limits_hrt_to_the_base_value() {
    let grid = GridConfig {
        base: SimConfig {
            replicates: 2,
            methods: vec![Method::Tpcm, Method::Hrt, Method::OracleGcm],
            ..small(200, 5, 2)
        },
        settings: MethodSettings {
            test: citlab::methods::TestConfig {
                b_hrt: 200,
                ..MethodSettings::default().test
            },
            ..MethodSettings::default()
        },
        vary: Some(GridParam::Theta),
        values: vec![0.0, 0.25, 0.5],
        workers: 2,
        ..GridConfig::default()
    };
    let store = run_grid(&grid).unwrap();
    // Two methods at two settings and three at the base value, two replicates each.
    assert_eq!(store.results.len(), 2 * (2 + 3 + 2));
    let hrt: Vec<_> = store.results.iter().filter(|r| r.method == Method::Hrt).collect();
    assert!(hrt.iter().all(|r| r.setting.value == 0.25));
    let again = run_grid(&GridConfig { workers: 1, ..grid.clone() }).unwrap();
    let strip = |s: &citlab::simbench::ResultStore| -> Vec<(String, usize, Method, Vec<bool>)> {
        s.results.iter().map(|r| (r.setting.label.clone(), r.replicate, r.method, r.rejections.clone())).collect()
    };
    assert_eq!(strip(&store), strip(&again));

    let dir = tempfile::tempdir().unwrap();
    let csv_rows = emit_results(&store, Format::Csv, &dir.path().join("s.csv")).unwrap();
    let back = read_summary_csv(std::fs::File::open(dir.path().join("s.csv")).unwrap()).unwrap();
    assert_eq!(back, csv_rows);
    emit_results(&store, Format::Json, &dir.path().join("s.json")).unwrap();
    let json: serde_json::Value = serde_json::from_reader(std::fs::File::open(dir.path().join("s.json")).unwrap()).unwrap();
    assert_eq!(json["results"].as_array().unwrap().len(), store.results.len());
    assert!(emit_results(&store, Format::Csv, &dir.path().join("missing/s.csv")).is_err());
}

#[test]
fn estimates_are_stable_across_base_seeds() {
    let mut fwer = Vec::new();
    let mut power = Vec::new();
    for seed in 0..5 {
        let grid = GridConfig {
            base: SimConfig {
                replicates: 200,
                methods: vec![Method::Tpcm],
                seed,
                theta: 0.6,
                ..small(300, 8, 2)
            },
            ..GridConfig::default()
        };
        let rows = compute_metrics(&run_grid(&grid).unwrap().results).unwrap();
        fwer.push(metric(&rows, Metric::Fwer));
        power.push(metric(&rows, Metric::Power));
    }
    // Each alternative seed against the base seed.
    for values in [fwer, power] {
        let (a, a_se) = (values[0].0.unwrap(), values[0].1.unwrap());
        for (b, b_se) in &values[1..] {
            let pooled = (a_se.powi(2) + b_se.unwrap().powi(2)).sqrt();
            assert!((a - b.unwrap()).abs() < 3.0 * pooled, "{a} vs {b:?}");
        }
    }
}

#[test]
fn timing_sweep_counters() {
    let base = SimConfig {
        n: 300,
        s: 3,
        ..SimConfig::default()
    };
    let settings = MethodSettings {
        learner: timing_learner(),
        ..MethodSettings::default()
    };
    let rows = timing_sweep(&base, &[6, 10], &[Method::Tpcm, Method::Vpcm, Method::Hrt], &settings).unwrap();
    assert_eq!(rows.len(), 6);
    for r in &rows {
        match r.method {
            Method::Tpcm => assert_eq!(r.counters.as_tuple(), (1, 1, 0, r.p as u64 * 25, r.p as u64 * 25)),
            Method::Vpcm => assert_eq!(r.counters.ml_xj_given_rest, r.p as u64),
            Method::Hrt => {
                assert_eq!(r.resamples, 100 * r.p);
                assert_eq!(r.counters.predict_y_given_x, (r.p * r.resamples) as u64);
            }
            _ => unreachable!(),
        }
        assert!(r.seconds > 0.0);
    }
}

