//! The two-sample test end to end: standardize, count exceedance cells,
//! evaluate the divergence, and calibrate it either against the
//! chi-squared limit (known margins) or against a split-half subsample
//! bootstrap (empirical margins).

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::divergence::{kl_divergence, CellProbabilities, Divergence};
use crate::error::{Error, Result};
use crate::margins::{count_rank_ties, to_pareto, to_pseudo, MarginState, MarginalCdf, Sample};
use crate::numerics::{chisq_quantile, chisq_sf, RngStream};
use crate::partition::{count_cells, Partition, RiskFunctional, Scheme};
use crate::scalar::Scalar;

/// How the margins are standardized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarginMode {
    /// Known marginal CDFs; the standardized data are i.i.d. unit Pareto.
    Known,
    /// Rank transform (pseudo-observations).
    Empirical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Calibration {
    #[serde(rename = "chisq")]
    ChiSquared,
    #[serde(rename = "bootstrap")]
    Bootstrap,
}

/// Which sample the bootstrap resamples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BootstrapSource {
    /// The first sample only.
    #[default]
    X,
    /// Both samples separately; the two p-values are averaged.
    Pooled,
}

/// Exceedance count used inside each half of the split-half bootstrap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum HalfSampleRule {
    /// `k_half = round(k_n / 2)`, keeping the exceedance fraction `k/n`
    /// fixed; replicates are multiplied by `k_half / k_n` (exactly 1/2 for
    /// even `k_n`), which matches the `k_n D / 2` scaling of the null law.
    #[default]
    HalfCount,
    /// `k_half = k_n` with the replicate halved. Under known margins this
    /// yields a null that is half as dispersed as the true one.
    SameCount,
}

/// Parameters of one test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub risk: RiskFunctional,
    /// Number of cells. Free for the angular schemes (default 4); for the
    /// orthant schemes it is fixed by the dimension and may be omitted.
    pub sets: Option<usize>,
    /// Number of exceedances `k_n`.
    pub k_n: usize,
    pub level: f64,
    pub margins: MarginMode,
    /// Overrides the default calibration (chi-squared for known margins,
    /// bootstrap for empirical margins).
    pub calibration: Option<Calibration>,
    /// Bootstrap replicates `B`.
    pub bootstrap: usize,
    #[serde(default)]
    pub bootstrap_source: BootstrapSource,
    #[serde(default)]
    pub half_rule: HalfSampleRule,
    pub seed: u64,
}

pub const DEFAULT_ANGULAR_SETS: usize = 4;
pub const MIN_BOOTSTRAP: usize = 100;
/// Stream id of the bootstrap when a test is run outside an experiment.
const BOOTSTRAP_STREAM: u64 = 0;

impl TestConfig {
    /// Angular euclidean partition with `K = 4`, empirical margins and a
    /// 1000-replicate bootstrap at the 5% level.
    pub fn new(k_n: usize) -> Self {
        Self {
            risk: RiskFunctional::Euclidean,
            sets: Some(DEFAULT_ANGULAR_SETS),
            k_n,
            level: 0.05,
            margins: MarginMode::Empirical,
            calibration: None,
            bootstrap: 1000,
            bootstrap_source: BootstrapSource::X,
            half_rule: HalfSampleRule::HalfCount,
            seed: 0,
        }
    }

    pub fn calibration(&self) -> Calibration {
        self.calibration.unwrap_or(match self.margins {
            MarginMode::Known => Calibration::ChiSquared,
            MarginMode::Empirical => Calibration::Bootstrap,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("level must lie in (0, 1), got {}", self.level)));
        }
        if self.k_n == 0 {
            return Err(Error::Config("k_n must be at least 1".into()));
        }
        if let Some(k) = self.sets {
            if k < 2 {
                return Err(Error::Config(format!("need at least 2 sets, got {k}")));
            }
        }
        if self.calibration() == Calibration::Bootstrap && self.bootstrap < MIN_BOOTSTRAP {
            return Err(Error::Config(format!(
                "bootstrap calibration needs at least {MIN_BOOTSTRAP} replicates, got {}",
                self.bootstrap
            )));
        }
        Ok(())
    }

    /// The partition this configuration describes in dimension `d`.
    pub fn partition<T: Scalar>(&self, d: usize) -> Result<Partition<T>> {
        let k = self.sets.unwrap_or(DEFAULT_ANGULAR_SETS);
        let p = Partition::for_risk(self.risk, k, d)?;
        if let Some(k) = self.sets {
            if p.scheme() != Scheme::Angular && k != p.k() {
                return Err(Error::Config(format!(
                    "the {} risk in dimension {d} has {} sets, not {k}",
                    self.risk,
                    p.k()
                )));
            }
        }
        Ok(p)
    }

    fn half_count(&self) -> (usize, f64) {
        match self.half_rule {
            HalfSampleRule::HalfCount => {
                let k = ((self.k_n + 1) / 2).max(1);
                (k, k as f64 / self.k_n as f64)
            }
            HalfSampleRule::SameCount => (self.k_n, 0.5),
        }
    }
}

/// Marginal CDFs of both populations, one per coordinate.
pub struct KnownMargins<'a, T> {
    pub x: Vec<&'a dyn MarginalCdf<T>>,
    pub y: Vec<&'a dyn MarginalCdf<T>>,
}

impl<'a, T> KnownMargins<'a, T> {
    /// Both populations share the same margins.
    pub fn shared(cdfs: Vec<&'a dyn MarginalCdf<T>>) -> Self {
        Self {
            x: cdfs.clone(),
            y: cdfs,
        }
    }
}

/// Standardizes one sample for the requested margin mode.
pub fn standardize<T: Scalar>(
    sample: &Sample<T>,
    mode: MarginMode,
    cdfs: Option<&[&dyn MarginalCdf<T>]>,
) -> Result<Sample<T>> {
    match (mode, sample.state()) {
        (MarginMode::Known, MarginState::Pareto) => Ok(sample.clone()),
        (MarginMode::Known, MarginState::Raw) => {
            let cdfs = cdfs.ok_or_else(|| {
                Error::Config("known margins requested but no marginal CDFs supplied".into())
            })?;
            to_pareto(sample, cdfs)
        }
        (MarginMode::Known, MarginState::Pseudo) => Err(Error::Config(
            "pseudo-observations cannot be used with known margins".into(),
        )),
        (MarginMode::Empirical, MarginState::Raw) => to_pseudo(sample),
        // ranks are scale-free, so an already standardized sample is re-ranked
        (MarginMode::Empirical, _) => to_pseudo(&Sample::new(sample.data().to_vec(), sample.d(), MarginState::Raw)?),
    }
}

/// Which population a bootstrap null was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NullSource {
    X,
    Y,
}

/// Bootstrap replicates of the statistic under the null, already rescaled
/// to the full-sample exceedance count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct NullDistribution<T: Scalar> {
    pub replicates: Vec<T>,
    pub source: NullSource,
    /// Exceedances used within each half.
    pub k_half: usize,
    /// Factor applied to each half-sample statistic.
    pub correction: f64,
}

impl<T: Scalar> NullDistribution<T> {
    pub fn p_value(&self, observed: T) -> T {
        bootstrap_p_value(observed, self)
    }

    /// Empirical `1 - level` quantile of the replicates (type 7).
    pub fn critical_value(&self, level: f64) -> T {
        let mut sorted = self.replicates.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        quantile_sorted(&sorted, 1.0 - level)
    }
}

/// Linear-interpolation quantile of sorted data.
pub(crate) fn quantile_sorted<T: Scalar>(sorted: &[T], prob: f64) -> T {
    match sorted.len() {
        0 => T::nan(),
        1 => sorted[0],
        len => {
            let h = (len - 1) as f64 * prob.clamp(0.0, 1.0);
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(len - 1);
            let w = T::lit(h - lo as f64);
            sorted[lo] + (sorted[hi] - sorted[lo]) * w
        }
    }
}

/// Fraction of replicates strictly above the observed statistic.
pub fn bootstrap_p_value<T: Scalar>(observed: T, null: &NullDistribution<T>) -> T {
    if null.replicates.is_empty() {
        return T::nan();
    }
    let above = null.replicates.iter().filter(|&&d| d > observed).count();
    T::from_count(above) / T::from_count(null.replicates.len())
}

/// Split-half subsample bootstrap of the null distribution.
///
/// Each replicate splits `source` into a random half of `floor(n/2)` rows
/// (drawn without replacement) and its complement, standardizes each half
/// on its own when margins are empirical, and evaluates the two-sample
/// statistic with `k_half` exceedances per half. Replicate `b` draws from
/// `stream.substream(b)`, so results do not depend on scheduling.
///
/// With known margins `source` must already be on the Pareto scale.
pub fn bootstrap_null<T: Scalar>(
    source: &Sample<T>,
    config: &TestConfig,
    replicates: usize,
    stream: RngStream,
) -> Result<NullDistribution<T>> {
    let n = source.n();
    if n < 4 * config.k_n {
        return Err(Error::InsufficientData {
            needed: 4 * config.k_n,
            got: n,
            context: "split-half bootstrap (n >= 4 k_n)",
        });
    }
    if config.margins == MarginMode::Known && source.state() != MarginState::Pareto {
        return Err(Error::Config(
            "known-margin bootstrap needs a Pareto-standardized source".into(),
        ));
    }
    let partition: Partition<T> = config.partition(source.d())?;
    let (k_half, correction) = config.half_count();
    let factor = T::lit(correction);
    let half = n / 2;

    let replicates = (0..replicates as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream.substream(b).rng();
            let mut first = index::sample(&mut rng, n, half).into_vec();
            first.sort_unstable();
            let mut in_first = vec![false; n];
            for &i in &first {
                in_first[i] = true;
            }
            let second: Vec<usize> = (0..n).filter(|&i| !in_first[i]).collect();
            let mut halves = [source.select_rows(&first), source.select_rows(&second)];
            if config.margins == MarginMode::Empirical {
                for h in halves.iter_mut() {
                    *h = standardize(h, MarginMode::Empirical, None)?;
                }
            }
            let p = count_cells(&halves[0], &partition, k_half)?;
            let q = count_cells(&halves[1], &partition, k_half)?;
            Ok(kl_divergence(&p, &q)?.value * factor)
        })
        .collect::<Result<Vec<T>>>()?;

    Ok(NullDistribution {
        replicates,
        source: NullSource::X,
        k_half,
        correction,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    Reject,
    NotReject,
}

/// One row of the cell table in a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CellRow<T: Scalar> {
    pub cell: String,
    pub count_x: usize,
    pub count_y: usize,
    pub p_x: T,
    pub p_y: T,
}

/// Summary of the bootstrap null behind a p-value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct NullSummary<T: Scalar> {
    pub replicates: usize,
    pub sources: Vec<NullSource>,
    pub k_half: usize,
    pub correction: f64,
    /// `1 - level` quantile of the (first) null, on the statistic's scale.
    pub critical_value: T,
}

/// Outcome of [`run_test`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TestReport<T: Scalar> {
    pub statistic: T,
    /// `k_n * statistic / 2`.
    pub normalized: T,
    pub p_value: T,
    pub decision: Decision,
    pub method: Calibration,
    pub cells: Vec<CellRow<T>>,
    pub sets: usize,
    pub k_n: usize,
    pub n_x: usize,
    pub n_y: usize,
    pub threshold_x: T,
    pub threshold_y: T,
    pub zero_corrected: bool,
    /// Tied raw values that received distinct ranks (empirical margins).
    pub rank_ties: usize,
    pub null: Option<NullSummary<T>>,
    pub config: TestConfig,
}

impl<T: Scalar> TestReport<T> {
    pub fn rejected(&self) -> bool {
        self.decision == Decision::Reject
    }
}

/// Runs the test with the bootstrap (if any) drawing from stream
/// `(config.seed, 0)`.
pub fn run_test<T: Scalar>(
    x: &Sample<T>,
    y: &Sample<T>,
    config: &TestConfig,
    known: Option<&KnownMargins<'_, T>>,
) -> Result<TestReport<T>> {
    run_test_with_stream(x, y, config, known, RngStream::new(config.seed, BOOTSTRAP_STREAM))
}

/// [`run_test`] with an explicit bootstrap stream.
pub fn run_test_with_stream<T: Scalar>(
    x: &Sample<T>,
    y: &Sample<T>,
    config: &TestConfig,
    known: Option<&KnownMargins<'_, T>>,
    stream: RngStream,
) -> Result<TestReport<T>> {
    config.validate()?;
    if x.d() != y.d() {
        return Err(Error::Shape(format!(
            "samples have dimensions {} and {}",
            x.d(),
            y.d()
        )));
    }
    let n_min = x.n().min(y.n());
    if config.k_n >= n_min {
        return Err(Error::Config(format!(
            "k_n = {} must be below the smaller sample size {n_min}",
            config.k_n
        )));
    }
    let partition: Partition<T> = config.partition(x.d())?;

    let xs = standardize(x, config.margins, known.map(|k| k.x.as_slice()))?;
    let ys = standardize(y, config.margins, known.map(|k| k.y.as_slice()))?;
    let rank_ties = match config.margins {
        MarginMode::Empirical => count_rank_ties(x) + count_rank_ties(y),
        MarginMode::Known => 0,
    };

    let p = count_cells(&xs, &partition, config.k_n)?;
    let q = count_cells(&ys, &partition, config.k_n)?;
    let div = kl_divergence(&p, &q)?;

    let method = config.calibration();
    let (p_value, null) = match method {
        Calibration::ChiSquared => (chisq_sf(div.normalized, (partition.k() - 1) as u32)?, None),
        Calibration::Bootstrap => {
            let source = |s: &Sample<T>, st: &Sample<T>| match config.margins {
                MarginMode::Known => st.clone(),
                MarginMode::Empirical => s.clone(),
            };
            let mut nulls = vec![bootstrap_null(&source(x, &xs), config, config.bootstrap, stream.substream(0))?];
            if config.bootstrap_source == BootstrapSource::Pooled {
                let mut ny = bootstrap_null(&source(y, &ys), config, config.bootstrap, stream.substream(1))?;
                ny.source = NullSource::Y;
                nulls.push(ny);
            }
            let p = nulls.iter().map(|nd| nd.p_value(div.value)).sum::<T>() / T::from_count(nulls.len());
            let summary = NullSummary {
                replicates: config.bootstrap,
                sources: nulls.iter().map(|nd| nd.source).collect(),
                k_half: nulls[0].k_half,
                correction: nulls[0].correction,
                critical_value: nulls[0].critical_value(config.level),
            };
            (p, Some(summary))
        }
    };

    Ok(build_report(&partition, &p, &q, div, p_value, method, rank_ties, null, config, x.n(), y.n()))
}

#[allow(clippy::too_many_arguments)]
fn build_report<T: Scalar>(
    partition: &Partition<T>,
    p: &CellProbabilities<T>,
    q: &CellProbabilities<T>,
    div: Divergence<T>,
    p_value: T,
    method: Calibration,
    rank_ties: usize,
    null: Option<NullSummary<T>>,
    config: &TestConfig,
    n_x: usize,
    n_y: usize,
) -> TestReport<T> {
    let cells = (0..partition.k())
        .map(|j| CellRow {
            cell: partition.cell_label(j),
            count_x: p.counts()[j],
            count_y: q.counts()[j],
            p_x: p.probs()[j],
            p_y: q.probs()[j],
        })
        .collect();
    let decision = if p_value < T::lit(config.level) {
        Decision::Reject
    } else {
        Decision::NotReject
    };
    TestReport {
        statistic: div.value,
        normalized: div.normalized,
        p_value,
        decision,
        method,
        cells,
        sets: partition.k(),
        k_n: config.k_n,
        n_x,
        n_y,
        threshold_x: p.threshold(),
        threshold_y: q.threshold(),
        zero_corrected: div.zero_corrected,
        rank_ties,
        null,
        config: *config,
    }
}

/// Critical value of the statistic (not its normalization) at `level` under
/// the chi-squared calibration.
pub fn chisq_critical_value(level: f64, sets: usize, k_n: usize) -> Result<f64> {
    let q: f64 = chisq_quantile(1.0 - level, (sets - 1) as u32)?;
    Ok(2.0 * q / k_n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::margins::StandardMargin;

    fn null_of(values: &[f64]) -> NullDistribution<f64> {
        NullDistribution {
            replicates: values.to_vec(),
            source: NullSource::X,
            k_half: 1,
            correction: 0.5,
        }
    }

    #[test]
    fn p_value_extremes_and_median() {
        let nd = null_of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(bootstrap_p_value(0.5, &nd), 1.0);
        assert_eq!(bootstrap_p_value(4.0, &nd), 0.0);
        assert_eq!(bootstrap_p_value(5.0, &nd), 0.0);
        assert_eq!(bootstrap_p_value(2.5, &nd), 0.5);
        // strict inequality
        assert_eq!(bootstrap_p_value(2.0, &nd), 0.5);
    }

    #[test]
    fn critical_value_interpolates() {
        let nd = null_of(&[4.0, 1.0, 3.0, 2.0, 5.0]);
        assert!((nd.critical_value(0.5) - 3.0).abs() < 1e-15);
        assert!((nd.critical_value(0.05) - 4.8).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let mut c = TestConfig::new(10);
        c.sets = Some(1);
        assert!(c.validate().is_err());
        let mut c = TestConfig::new(10);
        c.bootstrap = 50;
        assert!(c.validate().is_err());
        c.margins = MarginMode::Known;
        assert!(c.validate().is_ok());
        c.level = 1.0;
        assert!(c.validate().is_err());
        let mut c = TestConfig::new(10);
        c.risk = RiskFunctional::Max;
        c.sets = Some(4);
        assert!(c.partition::<f64>(2).is_err());
        c.sets = None;
        assert_eq!(c.partition::<f64>(2).unwrap().k(), 3);
    }

    #[test]
    fn half_counts() {
        let mut c = TestConfig::new(200);
        assert_eq!(c.half_count(), (100, 0.5));
        c.k_n = 7;
        assert_eq!(c.half_count().0, 4);
        c.half_rule = HalfSampleRule::SameCount;
        assert_eq!(c.half_count(), (7, 0.5));
    }

    #[test]
    fn identical_samples_known_margins() {
        let m = crate::copulas::CopulaModel::logistic(0.5).unwrap();
        let x: Sample<f64> = m.sample(300, RngStream::new(1, 1)).unwrap();
        let u = StandardMargin::Uniform;
        let known = KnownMargins::shared(vec![&u, &u]);
        let mut c = TestConfig::new(30);
        c.margins = MarginMode::Known;
        let r = run_test(&x, &x, &c, Some(&known)).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.decision, Decision::NotReject);
        assert_eq!(r.method, Calibration::ChiSquared);
    }

    #[test]
    fn known_margins_without_cdfs_is_config_error() {
        let m = crate::copulas::CopulaModel::logistic(0.5).unwrap();
        let x: Sample<f64> = m.sample(100, RngStream::new(1, 1)).unwrap();
        let mut c = TestConfig::new(10);
        c.margins = MarginMode::Known;
        assert!(matches!(run_test(&x, &x, &c, None), Err(Error::Config(_))));
        c.k_n = 100;
        assert!(matches!(run_test(&x, &x, &c, None), Err(Error::Config(_))));
    }

    #[test]
    fn bootstrap_needs_four_k() {
        let m = crate::copulas::CopulaModel::logistic(0.5).unwrap();
        let x: Sample<f64> = m.sample(100, RngStream::new(1, 1)).unwrap();
        let c = TestConfig::new(30);
        assert!(matches!(
            bootstrap_null(&x, &c, 10, RngStream::new(0, 0)),
            Err(Error::InsufficientData { .. })
        ));
    }
}
