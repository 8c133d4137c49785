use citlab::data::{split_data, split_rows};
use citlab::equivalence::LinearSuiteConfig;
use citlab::gaussian::{ar1_covariance, sample_gaussian_rows, GaussianConfig, GaussianModel};
use citlab::learners::{FittedRegression, LearnerConfig, MeanFunction};
use citlab::methods::{
    gcm_test, hrt_test, oracle_gcm_test, product_statistic, tgcm_fold_fits, tgcm_with_folds, tower_mean,
    tpcm_and_hrt, tpcm_test, vpcm_test, Method, TestConfig,
};
use citlab::pvalue::{ks_test_normal, Sided};
use citlab::simbench::{generate_gam_dgp, SimConfig};
use citlab::{CostCounters, CounterSnapshot, Dataset};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Gaussian AR(1) predictors with `Y = beta X_0 + X_1 + e`.
fn linear_gaussian(n: usize, p: usize, beta: f64, seed: u64) -> (Dataset, GaussianModel, MeanFunction) {
    let cov = ar1_covariance(p, 0.5).unwrap();
    let x = sample_gaussian_rows(&cov, n, seed, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y = (0..n).map(|i| beta * x[(i, 0)] + x[(i, 1)] + normal(&mut rng)).collect();
    let truth = GaussianModel::oracle(DVector::zeros(p), &cov).unwrap();
    let mean = MeanFunction::new(move |r: &[f64]| beta * r[0] + r[1]);
    (Dataset::new(x, y).unwrap(), truth, mean)
}

#[test]
fn tower_mean_of_a_function_of_the_rest_is_exact() {
    let (data, truth, _) = linear_gaussian(50, 3, 0.0, 1);
    let m = FittedRegression::oracle(MeanFunction::new(|r: &[f64]| r[1].sin() + r[2]), 3);
    let law = truth.conditional_law(0).unwrap();
    let tm = tower_mean(&m, &law, data.x(), 7, 0, &CostCounters::new()).unwrap();
    let direct = m.evaluate(data.x()).unwrap();
    for (a, b) in tm.iter().zip(&direct) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn tower_mean_converges_to_the_conditional_mean() {
    let (data, truth, _) = linear_gaussian(20, 3, 0.0, 2);
    let law = truth.conditional_law(1).unwrap();
    let m = FittedRegression::oracle(MeanFunction::new(|r: &[f64]| r[1]), 3);
    let b = 10_000;
    let tm = tower_mean(&m, &law, data.x(), b, 3, &CostCounters::new()).unwrap();
    let exact = law.means_for(data.x());
    let bound = 4.0 * (law.variance / b as f64).sqrt();
    for (a, e) in tm.iter().zip(&exact) {
        assert!((a - e).abs() < bound, "{a} vs {e}");
    }

    // Linear model: E[b x_j + z'g | z] = b a(z) + z'g.
    let lin = citlab::learners::fit(&LearnerConfig::ols(), data.x(), data.y(), &CostCounters::new(), citlab::FitTag::YGivenX)
        .unwrap();
    let coef = lin.as_linear().unwrap().coefficients.clone();
    let tm = tower_mean(&lin, &law, data.x(), b, 4, &CostCounters::new()).unwrap();
    let base = lin.evaluate(data.x()).unwrap();
    for i in 0..20 {
        let expected = base[i] + coef[1] * (exact[i] - data.x()[(i, 1)]);
        assert!((tm[i] - expected).abs() < 4.0 * coef[1].abs() * (law.variance / b as f64).sqrt() + 1e-12);
    }
}

#[test]
fn tpcm_counters_and_shape() {
    let (data, _, _) = linear_gaussian(400, 6, 0.5, 3);
    let cfg = TestConfig::default();
    let split = split_data(&data, 0.4, 0).unwrap();
    let c = CostCounters::new();
    let out = tpcm_test(&data, &split, &LearnerConfig::default(), &GaussianConfig::default(), &cfg, &c).unwrap();
    assert_eq!(c.snapshot(), CounterSnapshot::new(1, 1, 0, 6 * 25, 6 * 25));
    assert_eq!(out.len(), 6);
    assert!(out.iter().all(|o| o.method == Method::Tpcm && (0.0..=1.0).contains(&o.pvalue)));
    assert!(out[0].reject && out[1].reject);
    let again = tpcm_test(&data, &split, &LearnerConfig::default(), &GaussianConfig::default(), &cfg, &CostCounters::new())
        .unwrap();
    let pv = |v: &[citlab::methods::TestOutcome]| v.iter().map(|o| o.pvalue).collect::<Vec<_>>();
    assert_eq!(pv(&out), pv(&again));
}

#[test]
fn constant_response_is_degenerate() {
    let (data, _, _) = linear_gaussian(200, 3, 0.0, 4);
    let flat = Dataset::new(data.x().clone(), vec![2.0; 200]).unwrap();
    let split = split_data(&flat, 0.4, 0).unwrap();
    let out = tpcm_test(&flat, &split, &LearnerConfig::default(), &GaussianConfig::sample(), &TestConfig::default(), &CostCounters::new())
        .unwrap();
    assert!(out.iter().all(|o| o.degenerate && o.pvalue == 1.0 && !o.reject));
}

#[test]
fn tpcm_is_calibrated_in_the_null_linear_model() {
    let model = LinearSuiteConfig::default();
    let reps = 400;
    let mut rejections = 0;
    for rep in 0..reps {
        let data = model.generate(1000, rep).unwrap();
        let split = split_rows(2000, 0.5, rep as u64).unwrap();
        let cfg = TestConfig {
            seed: rep as u64,
            ..TestConfig::default()
        };
        let out = tpcm_test(&data, &split, &LearnerConfig::ols(), &GaussianConfig::sample(), &cfg, &CostCounters::new())
            .unwrap();
        rejections += (out[0].pvalue <= 0.05) as usize;
    }
    let rate = rejections as f64 / reps as f64;
    let se = (0.05f64 * 0.95 / reps as f64).sqrt();
    assert!((rate - 0.05).abs() <= 2.0 * se, "rate {rate}");
}

#[test]
fn vpcm_statistic_is_asymptotically_normal() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let stats: Vec<f64> = (0..500)
        .map(|_| {
            let l: Vec<f64> = (0..10_000).map(|_| normal(&mut rng) * normal(&mut rng)).collect();
            product_statistic(&l, 1.0).statistic
        })
        .collect();
    assert!(ks_test_normal(&stats).unwrap().pvalue > 0.01);
}

#[test]
fn vpcm_fits_grow_with_p() {
    let cfg = TestConfig::default();
    let mut fits = Vec::new();
    for p in [3, 6] {
        let (data, _, _) = linear_gaussian(300, p, 0.5, 6);
        let split = split_data(&data, 0.3, 0).unwrap();
        let c = CostCounters::new();
        let out = vpcm_test(&data, &split, &LearnerConfig::default(), &cfg, &c).unwrap();
        assert_eq!(out.len(), p);
        let p = p as u64;
        assert_eq!(c.snapshot(), CounterSnapshot::new(1 + 2 * p, 0, p, p, 2 * p));
        fits.push(c.snapshot().ml_y_given_x);
    }
    assert_eq!(fits, vec![7, 13]);
}

#[test]
fn hrt_counters_and_constant_model() {
    let (data, _, _) = linear_gaussian(300, 4, 0.5, 7);
    let cfg = TestConfig {
        b_hrt: 300,
        ..TestConfig::default()
    };
    let split = split_data(&data, 0.4, 0).unwrap();
    let c = CostCounters::new();
    let out = hrt_test(&data, &split, &LearnerConfig::default(), &GaussianConfig::default(), &cfg, &c).unwrap();
    assert_eq!(c.snapshot(), CounterSnapshot::new(1, 1, 0, 4 * 300, 4 * 300));
    assert!(out.iter().all(|o| o.pvalue >= 1.0 / 301.0));

    // Pure-noise columns next to a model that ignores them.
    let mut x = data.x().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    x.column_mut(3).iter_mut().for_each(|v| *v = normal(&mut rng));
    let y: Vec<f64> = (0..300).map(|i| x[(i, 0)]).collect();
    let exact = Dataset::new(x, y).unwrap();
    let out = hrt_test(&exact, &split, &LearnerConfig::ols(), &GaussianConfig::sample(), &cfg, &CostCounters::new()).unwrap();
    assert_eq!(out[0].pvalue, 1.0 / 301.0);
}

#[test]
fn shared_tpcm_and_hrt_fit_once() {
    let (data, _, _) = linear_gaussian(300, 4, 0.5, 8);
    let cfg = TestConfig {
        b_hrt: 100,
        ..TestConfig::default()
    };
    let split = split_data(&data, 0.4, 0).unwrap();
    let c = CostCounters::new();
    let (t, h) = tpcm_and_hrt(&data, &split, &LearnerConfig::default(), &GaussianConfig::default(), &cfg, &c).unwrap();
    assert_eq!(c.snapshot(), CounterSnapshot::new(1, 1, 0, 4 * 125, 4 * 125));
    assert_eq!(t.len(), 4);
    assert!(h.iter().all(|o| o.method == Method::Hrt));
}

#[test]
fn oracle_gcm_power_and_null_distribution() {
    let cfg = TestConfig::default();
    let mut rejections = 0;
    for rep in 0..200 {
        let (data, truth, mean) = linear_gaussian(2000, 3, 0.2, 100 + rep);
        let c = CostCounters::new();
        let out = oracle_gcm_test(&data, &mean, &truth, &TestConfig { seed: rep, ..cfg.clone() }, &c).unwrap();
        assert_eq!(c.snapshot().total_fits(), 0);
        rejections += (out[0].pvalue <= 0.05) as usize;
    }
    assert!(rejections as f64 / 200.0 > 0.9);

    // Y independent of X: the statistic is standard normal.
    let stats: Vec<f64> = (0..300)
        .map(|rep| {
            let (data, truth, _) = linear_gaussian(500, 3, 0.0, 1000 + rep);
            let mut rng = ChaCha8Rng::seed_from_u64(rep);
            let y: Vec<f64> = (0..500).map(|_| normal(&mut rng)).collect();
            let indep = Dataset::new(data.x().clone(), y).unwrap();
            let zero = MeanFunction::new(|_: &[f64]| 0.0);
            oracle_gcm_test(&indep, &zero, &truth, &TestConfig { seed: rep, ..cfg.clone() }, &CostCounters::new()).unwrap()[1]
                .statistic
        })
        .collect();
    assert!(ks_test_normal(&stats).unwrap().pvalue > 0.01);
}

#[test]
fn independent_predictors_have_zero_conditional_means() {
    let truth = GaussianModel::oracle(DVector::zeros(4), &ar1_covariance(4, 0.0).unwrap()).unwrap();
    let x = sample_gaussian_rows(&ar1_covariance(4, 0.0).unwrap(), 30, 1, 0).unwrap();
    for j in 0..4 {
        assert!(truth.conditional_law(j).unwrap().means_for(&x).iter().all(|&m| m == 0.0));
    }
}

#[test]
fn oracle_gcm_controls_fwer_under_the_global_null() {
    let sim = SimConfig {
        n: 400,
        p: 10,
        s: 3,
        theta: 0.0,
        ..SimConfig::default()
    };
    let reps = 400;
    let mut errors = 0;
    for rep in 0..reps {
        let inst = generate_gam_dgp(&sim, rep).unwrap();
        let out = oracle_gcm_test(&inst.dataset, &inst.mean, &inst.law, &TestConfig { seed: rep, ..TestConfig::default() }, &CostCounters::new())
            .unwrap();
        errors += out.iter().any(|o| o.reject) as usize;
    }
    let fwer = errors as f64 / reps as f64;
    assert!(fwer <= 0.05 + 2.0 * (0.05f64 * 0.95 / reps as f64).sqrt(), "{fwer}");
}

#[test]
fn tgcm_folds_on_duplicated_halves_fit_identically() {
    let (half, _, _) = linear_gaussian(100, 3, 0.3, 9);
    let x = DMatrix::from_fn(200, 3, |i, k| half.x()[(i % 100, k)]);
    let y: Vec<f64> = (0..200).map(|i| half.y()[i % 100]).collect();
    let data = Dataset::new(x, y).unwrap();
    let fold_of: Vec<usize> = (0..200).map(|i| i / 100).collect();
    let fits = tgcm_fold_fits(&data, &fold_of, 2, &LearnerConfig::default(), &GaussianConfig::default(), &TestConfig::default(), &CostCounters::new())
        .unwrap();
    let probe = half.x();
    assert_eq!(fits[0].fits.m_hat.evaluate(probe).unwrap(), fits[1].fits.m_hat.evaluate(probe).unwrap());
    assert_eq!(fits[0].fits.gaussian.precision(), fits[1].fits.gaussian.precision());
    assert_eq!(fits.iter().map(|f| f.held_out.len()).sum::<usize>(), 200);
}

#[test]
fn tgcm_uses_every_row() {
    let (data, _, _) = linear_gaussian(200, 3, 0.5, 10);
    let fold_of: Vec<usize> = (0..200).map(|i| i % 4).collect();
    let c = CostCounters::new();
    let cfg = TestConfig::default();
    let out = tgcm_with_folds(&data, &fold_of, &LearnerConfig::default(), &GaussianConfig::default(), &cfg, &c).unwrap();
    assert_eq!(c.snapshot(), CounterSnapshot::new(4, 4, 0, 4 * 3 * 25, 4 * 3 * 25));
    assert!(out.iter().all(|o| o.method == Method::Tgcm));
    // Re-deriving the pooled statistic from per-row nuisances of all folds.
    let fits = tgcm_fold_fits(&data, &fold_of, 4, &LearnerConfig::default(), &GaussianConfig::default(), &cfg, &CostCounters::new())
        .unwrap();
    let mut m_j = vec![vec![0.0; 200]; 3];
    let mut cond = vec![vec![0.0; 200]; 3];
    for (f, ff) in fits.iter().enumerate() {
        let xo = data.x_rows(&ff.held_out);
        for j in 0..3 {
            let r = citlab::methods::Resampler::new(&ff.fits.m_hat, &xo, &ff.fits.laws[j], cfg.seed, (j * 4 + f) as u64).unwrap();
            let mj = r.tower_mean(citlab::rng::Domain::CrossFitResample, cfg.b_gcm, &CostCounters::new());
            for (pos, &i) in ff.held_out.iter().enumerate() {
                m_j[j][i] = mj[pos];
                cond[j][i] = r.cond_means()[pos];
            }
        }
    }
    let pooled = gcm_test(&data, &m_j, &cond, Sided::Two, 0.05).unwrap();
    for (a, b) in out.iter().zip(&pooled) {
        assert_eq!(a.statistic, b.statistic);
    }
}

#[test]
fn tgcm_controls_fwer_under_the_global_null() {
    let sim = SimConfig {
        n: 300,
        p: 5,
        s: 2,
        theta: 0.0,
        ..SimConfig::default()
    };
    let reps = 100;
    let mut errors = 0;
    for rep in 0..reps {
        let inst = generate_gam_dgp(&sim, rep).unwrap();
        let cfg = TestConfig {
            seed: rep,
            ..TestConfig::default()
        };
        let out = citlab::methods::tgcm_test(&inst.dataset, &LearnerConfig::default(), &GaussianConfig::default(), &cfg, &CostCounters::new())
            .unwrap();
        errors += out.iter().any(|o| o.reject) as usize;
    }
    let fwer = errors as f64 / reps as f64;
    assert!(fwer <= 0.05 + 2.0 * (0.05f64 * 0.95 / reps as f64).sqrt(), "{fwer}");
}
