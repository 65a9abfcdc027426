use kltail::copulas::CopulaModel;
use kltail::inference::{
    bootstrap_null, run_test, Calibration, Decision, KnownMargins, MarginMode, TestConfig,
};
use kltail::margins::{MarginalCdf, StandardMargin};
use kltail::numerics::RngStream;
use kltail::partition::RiskFunctional;
use kltail::{Error, Sample, Sample32, TestReport};

fn pair(n: usize, seed: u64) -> (Sample, Sample) {
    (
        CopulaModel::logistic(0.45).unwrap().sample(n, RngStream::new(seed, 0)).unwrap(),
        CopulaModel::outer_power_clayton(0.55).unwrap().sample(n, RngStream::new(seed, 1)).unwrap(),
    )
}

#[test]
fn seed_determinism_includes_bootstrap() {
    let (x, y) = pair(800, 1);
    let mut c = TestConfig::new(80);
    c.bootstrap = 200;
    c.seed = 99;
    let a = run_test(&x, &y, &c, None).unwrap();
    let b = run_test(&x, &y, &c, None).unwrap();
    assert_eq!(a, b);
    c.seed = 100;
    let d = run_test(&x, &y, &c, None).unwrap();
    assert_eq!(a.statistic, d.statistic);
    assert!(a.null.as_ref().unwrap().critical_value != d.null.as_ref().unwrap().critical_value);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let (x, y) = pair(800, 2);
    let mut c = TestConfig::new(80);
    c.bootstrap = 200;
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| run_test(&x, &y, &c, None).unwrap());
    let b = four.install(|| run_test(&x, &y, &c, None).unwrap());
    assert_eq!(a, b);
}

#[test]
fn chisq_p_value_decreases_with_statistic() {
    let u = StandardMargin::Uniform;
    let known = KnownMargins::shared(vec![&u as &dyn MarginalCdf<f64>, &u]);
    let mut c = TestConfig::new(100);
    c.margins = MarginMode::Known;
    let mut reports: Vec<TestReport> = (0..30)
        .map(|s| {
            let (x, y) = pair(1000, s);
            run_test(&x, &y, &c, Some(&known)).unwrap()
        })
        .collect();
    reports.sort_by(|a, b| a.statistic.total_cmp(&b.statistic));
    for w in reports.windows(2) {
        if w[0].statistic < w[1].statistic {
            assert!(w[0].p_value > w[1].p_value);
        }
    }
    for r in &reports {
        assert_eq!(r.method, Calibration::ChiSquared);
        assert_eq!(r.rejected(), r.p_value < 0.05);
    }
}

#[test]
fn bootstrap_replicates_are_finite_and_nonnegative() {
    let (x, _) = pair(1000, 3);
    for margins in [MarginMode::Empirical, MarginMode::Known] {
        let mut c = TestConfig::new(100);
        c.margins = margins;
        let source = match margins {
            MarginMode::Empirical => x.clone(),
            MarginMode::Known => {
                let u = StandardMargin::Uniform;
                let cdfs: [&dyn MarginalCdf<f64>; 2] = [&u, &u];
                kltail::margins::to_pareto(&x, &cdfs).unwrap()
            }
        };
        let nd = bootstrap_null(&source, &c, 300, RngStream::new(0, 0)).unwrap();
        assert_eq!(nd.replicates.len(), 300);
        assert!(nd.replicates.iter().all(|d| d.is_finite() && *d >= 0.0));
        assert_eq!(nd.k_half, 50);
    }
}

#[test]
fn report_round_trips_through_json() {
    let (x, y) = pair(600, 4);
    let mut c = TestConfig::new(60);
    c.risk = RiskFunctional::Sum;
    c.sets = Some(5);
    c.bootstrap = 100;
    let r = run_test(&x, &y, &c, None).unwrap();
    let json = serde_json::to_string(&r).unwrap();
    let back: TestReport = serde_json::from_str(&json).unwrap();
    assert_eq!(r, back);
    assert_eq!(r.cells.len(), 5);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["method"], "bootstrap");
    assert!(matches!(v["decision"].as_str(), Some("reject" | "not-reject")));
}

#[test]
fn identical_inputs_do_not_reject() {
    let (x, _) = pair(500, 5);
    let c = TestConfig::new(50);
    let r = run_test(&x, &x, &c, None).unwrap();
    assert_eq!(r.statistic, 0.0);
    assert_eq!(r.decision, Decision::NotReject);
}

#[test]
fn errors_surface_as_config_or_shape() {
    let (x, y) = pair(100, 6);
    let mut c = TestConfig::new(100);
    assert!(matches!(run_test(&x, &y, &c, None), Err(Error::Config(_))));
    c.k_n = 30;
    // the bootstrap needs n >= 4 k_n
    assert!(matches!(run_test(&x, &y, &c, None), Err(Error::InsufficientData { .. })));
    let z = Sample::from_rows(&[[1.0, 2.0, 3.0]; 100], kltail::MarginState::Raw).unwrap();
    c.k_n = 10;
    assert!(matches!(run_test(&x, &z, &c, None), Err(Error::Shape(_))));
}

#[test]
fn single_precision_pipeline() {
    let m = CopulaModel::logistic(0.5).unwrap();
    let x: Sample32 = m.sample(1000, RngStream::new(1, 0)).unwrap();
    let y: Sample32 = m.sample(1000, RngStream::new(1, 1)).unwrap();
    let x64: Sample = m.sample(1000, RngStream::new(1, 0)).unwrap();
    let y64: Sample = m.sample(1000, RngStream::new(1, 1)).unwrap();
    let mut c = TestConfig::new(100);
    c.calibration = Some(Calibration::ChiSquared);
    let r32 = run_test(&x, &y, &c, None).unwrap();
    let r64 = run_test(&x64, &y64, &c, None).unwrap();
    assert!((r32.statistic as f64 - r64.statistic).abs() < 1e-4);
    assert!((r32.p_value as f64 - r64.p_value).abs() < 1e-3);
}
