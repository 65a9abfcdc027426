//! The symmetrized (Jeffreys) multinomial Kullback–Leibler divergence
//! between two vectors of exceedance-cell probabilities, and the extremal
//! correlation it generalizes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::margins::{MarginState, Sample};
use crate::numerics::normal_quantile;
use crate::scalar::Scalar;

/// Empirical cell probabilities `count_j / k_n` of the `k_n` exceedances
/// above `threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CellProbabilities<T: Scalar> {
    probs: Vec<T>,
    counts: Vec<usize>,
    k_n: usize,
    threshold: T,
}

impl<T: Scalar> CellProbabilities<T> {
    pub fn from_counts(counts: Vec<usize>, threshold: T) -> Result<Self> {
        let k_n: usize = counts.iter().sum();
        if counts.len() < 2 {
            return Err(Error::Shape(format!("need at least 2 cells, got {}", counts.len())));
        }
        if k_n == 0 {
            return Err(Error::domain("cell counts sum to zero"));
        }
        if !(threshold > T::zero()) || !threshold.is_finite() {
            return Err(Error::domain(format!("threshold must be positive, got {threshold}")));
        }
        let total = T::from_count(k_n);
        let probs = counts.iter().map(|&c| T::from_count(c) / total).collect();
        Ok(Self {
            probs,
            counts,
            k_n,
            threshold,
        })
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn k_n(&self) -> usize {
        self.k_n
    }

    /// Number of cells `K`.
    pub fn cells(&self) -> usize {
        self.counts.len()
    }

    pub fn threshold(&self) -> T {
        self.threshold
    }

    pub fn has_empty_cell(&self) -> bool {
        self.counts.contains(&0)
    }

    /// Probabilities after adding 1/2 to every count.
    fn haldane(&self) -> Vec<T> {
        let half = T::lit(0.5);
        let total = T::from_count(self.k_n) + half * T::from_count(self.cells());
        self.counts
            .iter()
            .map(|&c| (T::from_count(c) + half) / total)
            .collect()
    }
}

/// Value of the divergence between two cell tables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Divergence<T: Scalar> {
    pub value: T,
    /// `k_n * value / 2`, the scale on which the null law is chi-squared.
    pub normalized: T,
    pub cells: usize,
    pub k_n: usize,
    /// Whether an empty cell triggered the half-count correction.
    pub zero_corrected: bool,
}

/// `sum_j (p_j - q_j)(ln p_j - ln q_j)` for strictly positive vectors.
pub fn jeffreys<T: Scalar>(p: &[T], q: &[T]) -> T {
    p.iter()
        .zip(q)
        .map(|(&a, &b)| (a - b) * (a.ln() - b.ln()))
        .sum()
}

/// Symmetrized KL divergence of two empirical cell tables.
///
/// If any cell is empty in either table, every count in both tables is
/// replaced by `count + 1/2` and renormalized by `k_n + K/2` before taking
/// logarithms; [`Divergence::zero_corrected`] records this.
pub fn kl_divergence<T: Scalar>(p: &CellProbabilities<T>, q: &CellProbabilities<T>) -> Result<Divergence<T>> {
    if p.cells() != q.cells() {
        return Err(Error::Shape(format!(
            "cell tables have {} and {} cells",
            p.cells(),
            q.cells()
        )));
    }
    if p.k_n != q.k_n {
        return Err(Error::Shape(format!(
            "cell tables use {} and {} exceedances",
            p.k_n, q.k_n
        )));
    }
    let zero_corrected = p.has_empty_cell() || q.has_empty_cell();
    let value = if zero_corrected {
        jeffreys(&p.haldane(), &q.haldane())
    } else {
        jeffreys(&p.probs, &q.probs)
    };
    let value = value.max(T::zero());
    Ok(Divergence {
        value,
        normalized: T::from_count(p.k_n) * value * T::lit(0.5),
        cells: p.cells(),
        k_n: p.k_n,
        zero_corrected,
    })
}

/// Empirical extremal correlation at one quantile level with a normal
/// confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ChiEstimate<T: Scalar> {
    pub level: T,
    pub chi: T,
    pub ci_low: T,
    pub ci_high: T,
    /// Number of observations with the first coordinate above the threshold.
    pub conditioning: usize,
    pub joint: usize,
}

/// Minimum number of first-coordinate exceedances for [`extremal_correlation`].
pub const MIN_CHI_EXCEEDANCES: usize = 10;

/// `chi(v) = #{X1 > u, X2 > u} / #{X1 > u}` with `u = 1 / (1 - v)`, and the
/// 95% interval `chi +- z * sqrt(chi (1 - chi) / m)` clipped to [0, 1].
pub fn extremal_correlation<T: Scalar>(sample: &Sample<T>, level: T) -> Result<ChiEstimate<T>> {
    if sample.state() == MarginState::Raw {
        return Err(Error::domain("extremal correlation needs a Pareto or pseudo-observation sample"));
    }
    if sample.d() != 2 {
        return Err(Error::UnsupportedDimension {
            scheme: "extremal correlation",
            d: sample.d(),
        });
    }
    if !(level > T::zero() && level < T::one()) {
        return Err(Error::domain(format!("quantile level must lie in (0, 1), got {level}")));
    }
    let u = (T::one() - level).recip();
    let (mut m, mut joint) = (0usize, 0usize);
    for x in sample.rows() {
        if x[0] > u {
            m += 1;
            if x[1] > u {
                joint += 1;
            }
        }
    }
    if m < MIN_CHI_EXCEEDANCES {
        return Err(Error::InsufficientTail {
            found: m,
            needed: MIN_CHI_EXCEEDANCES,
        });
    }
    let chi = T::from_count(joint) / T::from_count(m);
    let z: T = normal_quantile(T::lit(0.975))?;
    let half_width = z * (chi * (T::one() - chi) / T::from_count(m)).sqrt();
    Ok(ChiEstimate {
        level,
        chi,
        ci_low: (chi - half_width).max(T::zero()),
        ci_high: (chi + half_width).min(T::one()),
        conditioning: m,
        joint,
    })
}

/// Limiting max-risk cell probabilities `(p_{12}, p_1, p_2)` implied by an
/// extremal correlation: `p_{12} = chi / (2 - chi)` and
/// `p_1 = p_2 = (1 - chi) / (2 - chi)`.
pub fn max_cells_from_chi<T: Scalar>(chi: T) -> Result<[T; 3]> {
    if !(chi >= T::zero() && chi < T::one()) {
        return Err(Error::domain(format!(
            "extremal correlation must lie in [0, 1) for a non-degenerate table, got {chi}"
        )));
    }
    let two = T::lit(2.0);
    let both = chi / (two - chi);
    let single = (T::one() - chi) / (two - chi);
    Ok([both, single, single])
}

/// Divergence of the max-risk partition written as a function of the two
/// extremal correlations.
pub fn d3_from_chi<T: Scalar>(chi_x: T, chi_y: T) -> Result<T> {
    let [p1, p2, _] = max_cells_from_chi(chi_x)?;
    let [q1, q2, _] = max_cells_from_chi(chi_y)?;
    if chi_x == chi_y {
        return Ok(T::zero());
    }
    Ok((p1 - q1) * (p1.ln() - q1.ln()) + T::lit(2.0) * (p2 - q2) * (p2.ln() - q2.ln()))
}
