//! Monte Carlo harness for size, power, the role of the number of sets,
//! and the fidelity of the bootstrap null. Everything is driven by seeded
//! streams: repetition `r` draws from stream id `r`, so a study gives the
//! same numbers whatever the thread count and can be re-run in shards.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copulas::CopulaModel;
use crate::divergence::kl_divergence;
use crate::error::{Error, Result};
use crate::inference::{
    bootstrap_null, chisq_critical_value, quantile_sorted, run_test_with_stream, standardize,
    Calibration, KnownMargins, MarginMode, TestConfig,
};
use crate::margins::{MarginalCdf, Sample, StandardMargin};
use crate::numerics::{chisq_cdf, RngStream};
use crate::partition::{count_cells, Partition, RiskFunctional};

/// What varies along the x-axis of a study.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "values")]
pub enum Grid {
    /// Number of exceedances `k_n`.
    Exceedances(Vec<usize>),
    /// Number of sets `K` of an angular partition.
    Sets(Vec<usize>),
}

impl Grid {
    pub fn len(&self) -> usize {
        match self {
            Grid::Exceedances(v) | Grid::Sets(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn values(&self) -> &[usize] {
        match self {
            Grid::Exceedances(v) | Grid::Sets(v) => v,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Grid::Exceedances(_) => "k_n",
            Grid::Sets(_) => "sets",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub model_x: CopulaModel,
    pub model_y: CopulaModel,
    pub n: usize,
    pub repetitions: usize,
    pub grid: Grid,
    /// Test settings shared by every grid point; the grid overrides either
    /// `k_n` or `sets`. `base.seed` is the master seed of the study.
    pub base: TestConfig,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::Config("at least one repetition is required".into()));
        }
        if self.grid.is_empty() {
            return Err(Error::Config("the grid is empty".into()));
        }
        self.model_x.validate()?;
        self.model_y.validate()?;
        for g in 0..self.grid.len() {
            let c = self.config_at(g);
            c.validate()?;
            c.partition::<f64>(2)?;
            if c.k_n >= self.n {
                return Err(Error::Config(format!(
                    "k_n = {} must be below n = {}",
                    c.k_n, self.n
                )));
            }
        }
        Ok(())
    }

    fn config_at(&self, g: usize) -> TestConfig {
        let mut c = self.base;
        match &self.grid {
            Grid::Exceedances(v) => c.k_n = v[g],
            Grid::Sets(v) => c.sets = Some(v[g]),
        }
        c
    }
}

/// Aggregates at one grid value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    pub value: usize,
    pub mean: f64,
    pub q05: f64,
    pub q95: f64,
    pub rejection: f64,
    /// Critical value of the statistic; the mean over repetitions when the
    /// calibration is bootstrap.
    pub critical_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    pub grid: String,
    pub points: Vec<PowerPoint>,
    /// Max-risk (`K = 3`) reference computed on the same data.
    pub baseline: Option<PowerPoint>,
}

struct Outcome {
    statistic: f64,
    rejected: bool,
    critical: f64,
}

fn uniform_margins() -> KnownMargins<'static, f64> {
    static U: StandardMargin = StandardMargin::Uniform;
    let u: &'static dyn MarginalCdf<f64> = &U;
    KnownMargins::shared(vec![u, u])
}

fn draw_pair(plan: &ExperimentPlan, stream: RngStream) -> Result<(Sample<f64>, Sample<f64>)> {
    Ok((
        plan.model_x.sample(plan.n, stream.substream(0))?,
        plan.model_y.sample(plan.n, stream.substream(1))?,
    ))
}

fn evaluate(
    x: &Sample<f64>,
    y: &Sample<f64>,
    config: &TestConfig,
    stream: RngStream,
) -> Result<Outcome> {
    let known = uniform_margins();
    let report = run_test_with_stream(x, y, config, Some(&known), stream)?;
    let critical = match &report.null {
        Some(s) => s.critical_value,
        None => chisq_critical_value(config.level, report.sets, config.k_n)?,
    };
    Ok(Outcome {
        statistic: report.statistic,
        rejected: report.rejected(),
        critical,
    })
}

fn aggregate(value: usize, outcomes: &[Outcome]) -> PowerPoint {
    let mut stats: Vec<f64> = outcomes.iter().map(|o| o.statistic).collect();
    stats.sort_by(f64::total_cmp);
    let r = outcomes.len() as f64;
    PowerPoint {
        value,
        mean: stats.iter().sum::<f64>() / r,
        q05: quantile_sorted(&stats, 0.05),
        q95: quantile_sorted(&stats, 0.95),
        rejection: outcomes.iter().filter(|o| o.rejected).count() as f64 / r,
        critical_value: outcomes.iter().map(|o| o.critical).sum::<f64>() / r,
    }
}

/// Runs `plan.repetitions` seeded repetitions and evaluates every grid value
/// on the same pair of samples within a repetition.
///
/// Known margins are taken to be uniform, which is what the copula
/// samplers produce.
pub fn size_power_study(plan: &ExperimentPlan) -> Result<PowerCurve> {
    plan.validate()?;
    let (points, _) = study(plan, false)?;
    Ok(PowerCurve {
        grid: plan.grid.name().into(),
        points,
        baseline: None,
    })
}

/// Power as a function of the number of angular sets, with the max-risk
/// orthant test (`K = 3`) run on the same data as a baseline.
pub fn k_sensitivity_study(plan: &ExperimentPlan) -> Result<PowerCurve> {
    if !matches!(plan.grid, Grid::Sets(_)) {
        return Err(Error::Config("the sensitivity study needs a grid over sets".into()));
    }
    if !matches!(plan.base.risk, RiskFunctional::Euclidean | RiskFunctional::Sum) {
        return Err(Error::Config(
            "the sensitivity study needs an angular (euclidean or sum) risk".into(),
        ));
    }
    if plan.grid.values().iter().any(|&k| !(2..=12).contains(&k)) {
        return Err(Error::Config("set counts must lie in 2..=12".into()));
    }
    plan.validate()?;
    let (points, baseline) = study(plan, true)?;
    Ok(PowerCurve {
        grid: plan.grid.name().into(),
        points,
        baseline,
    })
}

fn study(plan: &ExperimentPlan, with_baseline: bool) -> Result<(Vec<PowerPoint>, Option<PowerPoint>)> {
    let g_len = plan.grid.len();
    let mut baseline_config = plan.base;
    baseline_config.risk = RiskFunctional::Max;
    baseline_config.sets = None;

    let per_rep: Vec<(Vec<Outcome>, Option<Outcome>)> = (0..plan.repetitions as u64)
        .into_par_iter()
        .map(|r| {
            let stream = RngStream::new(plan.base.seed, r);
            let (x, y) = draw_pair(plan, stream)?;
            let grid = (0..g_len)
                .map(|g| evaluate(&x, &y, &plan.config_at(g), stream.substream(2 + g as u64)))
                .collect::<Result<Vec<_>>>()?;
            let base = if with_baseline {
                Some(evaluate(&x, &y, &baseline_config, stream.substream(1 << 32))?)
            } else {
                None
            };
            Ok((grid, base))
        })
        .collect::<Result<_>>()?;

    let values = plan.grid.values();
    let mut points = Vec::with_capacity(g_len);
    let mut by_rep: Vec<std::vec::IntoIter<Outcome>> = Vec::with_capacity(per_rep.len());
    let mut base_outcomes = Vec::new();
    for (grid, base) in per_rep {
        by_rep.push(grid.into_iter());
        base_outcomes.extend(base);
    }
    for &value in values {
        let column: Vec<Outcome> = by_rep.iter_mut().filter_map(|it| it.next()).collect();
        points.push(aggregate(value, &column));
    }
    let baseline = with_baseline.then(|| aggregate(3, &base_outcomes));
    Ok((points, baseline))
}

/// Settings of a bootstrap-versus-fresh null comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullStudyPlan {
    pub model: CopulaModel,
    pub n: usize,
    pub k_n: usize,
    pub sets: usize,
    pub risk: RiskFunctional,
    pub margins: MarginMode,
    /// Replicates of each null.
    pub replicates: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullStudy {
    pub margins: MarginMode,
    pub k_n: usize,
    pub sets: usize,
    /// Bootstrap replicates of the statistic from a single sample.
    pub bootstrap: Vec<f64>,
    /// Statistics between pairs of independent samples from the model.
    pub fresh: Vec<f64>,
    /// Two-sample KS distance between the two replicate sets.
    pub ks_bootstrap_fresh: f64,
    /// One-sample KS distance of the normalized fresh statistics to the
    /// chi-squared limit with `K - 1` degrees of freedom.
    pub ks_fresh_chisq: f64,
    pub ks_bootstrap_chisq: f64,
}

/// Compares the split-half bootstrap null (from one sample drawn on stream
/// 0) with the null obtained by simulating fresh pairs of samples (pair `i`
/// on stream `i + 1`).
pub fn null_histogram_study(plan: &NullStudyPlan) -> Result<NullStudy> {
    if plan.replicates == 0 {
        return Err(Error::Config("at least one replicate is required".into()));
    }
    plan.model.validate()?;
    let mut config = TestConfig::new(plan.k_n);
    config.risk = plan.risk;
    config.sets = Some(plan.sets);
    config.margins = plan.margins;
    config.calibration = Some(Calibration::Bootstrap);
    config.bootstrap = plan.replicates;
    config.seed = plan.seed;
    let partition: Partition<f64> = config.partition(2)?;
    let known = uniform_margins();
    let cdfs = Some(known.x.as_slice());

    let source = plan.model.sample::<f64>(plan.n, RngStream::new(plan.seed, 0).substream(0))?;
    let source = match plan.margins {
        MarginMode::Known => standardize(&source, MarginMode::Known, cdfs)?,
        MarginMode::Empirical => source,
    };
    let boot = bootstrap_null(&source, &config, plan.replicates, RngStream::new(plan.seed, 0).substream(1))?;

    let fresh = (0..plan.replicates as u64)
        .into_par_iter()
        .map(|i| {
            let stream = RngStream::new(plan.seed, i + 1);
            let x = plan.model.sample::<f64>(plan.n, stream.substream(0))?;
            let y = plan.model.sample::<f64>(plan.n, stream.substream(1))?;
            let x = standardize(&x, plan.margins, cdfs)?;
            let y = standardize(&y, plan.margins, cdfs)?;
            let p = count_cells(&x, &partition, plan.k_n)?;
            let q = count_cells(&y, &partition, plan.k_n)?;
            Ok(kl_divergence(&p, &q)?.value)
        })
        .collect::<Result<Vec<f64>>>()?;

    let dof = (partition.k() - 1) as u32;
    let half_k = plan.k_n as f64 / 2.0;
    let chisq = |x: f64| chisq_cdf(x, dof).unwrap_or(f64::NAN);
    let normalized = |v: &[f64]| v.iter().map(|d| d * half_k).collect::<Vec<_>>();
    Ok(NullStudy {
        margins: plan.margins,
        k_n: plan.k_n,
        sets: partition.k(),
        ks_bootstrap_fresh: ks_two_sample(&boot.replicates, &fresh),
        ks_fresh_chisq: ks_one_sample(&normalized(&fresh), chisq),
        ks_bootstrap_chisq: ks_one_sample(&normalized(&boot.replicates), chisq),
        bootstrap: boot.replicates,
        fresh,
    })
}

/// Kolmogorov–Smirnov distance between the empirical CDF of `data` and a
/// continuous CDF.
pub fn ks_one_sample(data: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = data.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < xs.len() {
        // step over runs of equal values so ties are handled exactly
        let mut j = i;
        while j + 1 < xs.len() && xs[j + 1] == xs[i] {
            j += 1;
        }
        let f = cdf(xs[i]);
        d = d.max((f - i as f64 / n).abs()).max(((j + 1) as f64 / n - f).abs());
        i = j + 1;
    }
    d
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::NAN;
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let t = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Writes one CSV row per grid value (and a `baseline` row if present).
pub fn write_power_csv(curve: &PowerCurve, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["grid", "value", "mean", "q05", "q95", "rejection", "critical_value"])?;
    let rows = curve
        .points
        .iter()
        .map(|p| (curve.grid.as_str(), p))
        .chain(curve.baseline.iter().map(|p| ("baseline", p)));
    for (grid, p) in rows {
        w.write_record([
            grid.to_string(),
            p.value.to_string(),
            p.mean.to_string(),
            p.q05.to_string(),
            p.q95.to_string(),
            p.rejection.to_string(),
            p.critical_value.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the replicates of a null study in long format
/// (`null,index,statistic,normalized`).
pub fn write_null_csv(study: &NullStudy, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["null", "index", "statistic", "normalized"])?;
    let half_k = study.k_n as f64 / 2.0;
    for (name, values) in [("bootstrap", &study.bootstrap), ("fresh", &study.fresh)] {
        for (i, v) in values.iter().enumerate() {
            w.write_record([name.to_string(), i.to_string(), v.to_string(), (v * half_k).to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Provenance record written next to every artifact set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub parameters: serde_json::Value,
    pub artifacts: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, seed: u64, parameters: serde_json::Value, artifacts: Vec<String>) -> Self {
        Self {
            tool: "kltail".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            parameters,
            artifacts,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = File::create(path)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        writeln!(f)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_one_sample_uniform_grid() {
        let data: Vec<f64> = (0..10).map(|i| (i as f64 + 0.5) / 10.0).collect();
        assert!((ks_one_sample(&data, |x| x) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn ks_two_sample_cases() {
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        assert!((ks_two_sample(&[1.0, 3.0], &[2.0, 4.0]) - 0.5).abs() < 1e-15);
        // ties across samples
        assert_eq!(ks_two_sample(&[1.0, 1.0, 2.0], &[1.0, 2.0, 1.0]), 0.0);
    }

    fn small_plan(grid: Grid) -> ExperimentPlan {
        let mut base = TestConfig::new(20);
        base.margins = MarginMode::Known;
        base.sets = Some(3);
        base.seed = 11;
        ExperimentPlan {
            model_x: CopulaModel::logistic(0.5).unwrap(),
            model_y: CopulaModel::logistic(0.5).unwrap(),
            n: 300,
            repetitions: 8,
            grid,
            base,
        }
    }

    #[test]
    fn study_shapes_and_determinism() {
        let plan = small_plan(Grid::Exceedances(vec![10, 20, 40]));
        let a = size_power_study(&plan).unwrap();
        let b = size_power_study(&plan).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.points.len(), 3);
        for p in &a.points {
            assert!((0.0..=1.0).contains(&p.rejection));
            assert!(p.q05 <= p.mean && p.mean <= p.q95);
        }
    }

    #[test]
    fn sensitivity_has_baseline() {
        let plan = small_plan(Grid::Sets(vec![2, 4]));
        let c = k_sensitivity_study(&plan).unwrap();
        assert_eq!(c.baseline.unwrap().value, 3);
        let bad = small_plan(Grid::Exceedances(vec![10]));
        assert!(k_sensitivity_study(&bad).is_err());
    }

    #[test]
    fn empty_grid_rejected() {
        let plan = small_plan(Grid::Exceedances(vec![]));
        assert!(size_power_study(&plan).is_err());
    }

    #[test]
    fn null_study_single_replicate() {
        let plan = NullStudyPlan {
            model: CopulaModel::logistic(0.5).unwrap(),
            n: 200,
            k_n: 20,
            sets: 4,
            risk: RiskFunctional::Euclidean,
            margins: MarginMode::Empirical,
            replicates: 1,
            seed: 3,
        };
        let s = null_histogram_study(&plan).unwrap();
        assert_eq!(s.bootstrap.len(), 1);
        assert_eq!(s.fresh.len(), 1);
        assert!(s.ks_bootstrap_fresh >= 0.0 && s.ks_bootstrap_fresh <= 1.0);
    }
}
