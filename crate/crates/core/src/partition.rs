//! Homogeneous risk functionals and partitions of the exceedance region
//! `{x : r(x) > 1}` into `K` cells, plus the empirical cell counts of the
//! `k_n` largest risk values of a standardized sample.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::divergence::CellProbabilities;
use crate::error::{Error, Result};
use crate::margins::{MarginState, Sample};
use crate::scalar::Scalar;

/// A 1-homogeneous map from the non-negative orthant to the half line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiskFunctional {
    Max,
    Min,
    /// L2 norm.
    Euclidean,
    /// L1 norm.
    Sum,
}

impl RiskFunctional {
    pub fn eval<T: Scalar>(&self, x: &[T]) -> T {
        match self {
            RiskFunctional::Max => x.iter().copied().fold(T::neg_infinity(), T::max),
            RiskFunctional::Min => x.iter().copied().fold(T::infinity(), T::min),
            RiskFunctional::Sum => x.iter().map(|v| v.abs()).sum(),
            RiskFunctional::Euclidean => {
                // scaled to avoid overflow
                let m = x.iter().fold(T::zero(), |m, v| m.max(v.abs()));
                if m == T::zero() || !m.is_finite() {
                    return m;
                }
                m * x.iter().map(|&v| (v / m) * (v / m)).sum::<T>().sqrt()
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            RiskFunctional::Max => "max",
            RiskFunctional::Min => "min",
            RiskFunctional::Euclidean => "euclidean",
            RiskFunctional::Sum => "sum",
        }
    }
}

impl fmt::Display for RiskFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Cells `{x_j > 1 for j in I, x_j <= 1 otherwise}` for non-empty `I`.
    MaxOrthant,
    /// Cells `{x_j > 2 for j in I, 1 < x_j <= 2 otherwise}` for every `I`.
    MinOrthant,
    /// Cones between consecutive angles `arctan(x_2 / x_1)`, bivariate only.
    Angular,
}

/// A risk functional together with `K` disjoint cells covering its
/// exceedance region. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition<T> {
    risk: RiskFunctional,
    scheme: Scheme,
    d: usize,
    k: usize,
    /// Angular boundaries `0 = a_0 < ... < a_K = pi/2`; empty for orthant schemes.
    angles: Vec<T>,
}

fn check_orthant_dim(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::domain(format!("orthant partitions need d >= 2, got {d}")));
    }
    if d >= usize::BITS as usize - 1 {
        return Err(Error::domain(format!("dimension {d} too large for an orthant partition")));
    }
    Ok(())
}

impl<T: Scalar> Partition<T> {
    /// `r = max`, `K = 2^d - 1` cells indexed by the non-empty set of
    /// coordinates above the threshold.
    pub fn max_orthant(d: usize) -> Result<Self> {
        check_orthant_dim(d)?;
        Ok(Self {
            risk: RiskFunctional::Max,
            scheme: Scheme::MaxOrthant,
            d,
            k: (1 << d) - 1,
            angles: Vec::new(),
        })
    }

    /// `r = min`, `K = 2^d` cells indexed by the set of coordinates above
    /// twice the threshold.
    pub fn min_orthant(d: usize) -> Result<Self> {
        check_orthant_dim(d)?;
        Ok(Self {
            risk: RiskFunctional::Min,
            scheme: Scheme::MinOrthant,
            d,
            k: 1 << d,
            angles: Vec::new(),
        })
    }

    /// Bivariate angular partition with `K` equally spaced angles.
    pub fn angular(risk: RiskFunctional, k: usize, d: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::domain(format!("angular partition needs K >= 2, got {k}")));
        }
        let angles = (0..=k)
            .map(|j| T::FRAC_PI_2() * T::from_count(j) / T::from_count(k))
            .collect();
        Self::angular_with_angles(risk, angles, d)
    }

    /// Bivariate angular partition with explicit boundaries, which must
    /// increase strictly from 0 to pi/2.
    pub fn angular_with_angles(risk: RiskFunctional, mut angles: Vec<T>, d: usize) -> Result<Self> {
        if d != 2 {
            return Err(Error::UnsupportedDimension { scheme: "angular", d });
        }
        if !matches!(risk, RiskFunctional::Euclidean | RiskFunctional::Sum) {
            return Err(Error::domain(format!(
                "angular partitions use the euclidean or sum risk, got {risk}"
            )));
        }
        if angles.len() < 3 {
            return Err(Error::domain("angular partition needs K >= 2"));
        }
        let tol = T::lit(1e-9);
        let last = angles.len() - 1;
        if angles[0] != T::zero() || (angles[last] - T::FRAC_PI_2()).abs() > tol {
            return Err(Error::domain("angles must start at 0 and end at pi/2"));
        }
        if angles.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("angles must be strictly increasing"));
        }
        angles[last] = T::FRAC_PI_2();
        Ok(Self {
            risk,
            scheme: Scheme::Angular,
            d,
            k: last,
            angles,
        })
    }

    /// Builds the partition for a risk functional the way the command line
    /// addresses it: `max` and `min` use their orthant partitions (whose
    /// size is fixed by `d`), the norms use `K` angular cells.
    pub fn for_risk(risk: RiskFunctional, k: usize, d: usize) -> Result<Self> {
        match risk {
            RiskFunctional::Max => Self::max_orthant(d),
            RiskFunctional::Min => Self::min_orthant(d),
            RiskFunctional::Euclidean | RiskFunctional::Sum => Self::angular(risk, k, d),
        }
    }

    pub fn risk(&self) -> RiskFunctional {
        self.risk
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Number of cells.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn angles(&self) -> &[T] {
        &self.angles
    }

    /// Cell (0-based) of `x` relative to threshold `u`, or `None` when
    /// `r(x) <= u`.
    pub fn classify(&self, x: &[T], u: T) -> Option<usize> {
        if self.risk.eval(x) > u {
            Some(self.cell_index(x, u, false))
        } else {
            None
        }
    }

    /// Cell of `x` in `u * Omega_r`. With `on_boundary` the point is treated
    /// as the limit of `(1 + e) x` for `e -> 0+`, so coordinates sitting
    /// exactly on a cell boundary count as above it.
    pub(crate) fn cell_index(&self, x: &[T], u: T, on_boundary: bool) -> usize {
        let above = |v: T, c: T| if on_boundary { v >= c } else { v > c };
        match self.scheme {
            Scheme::MaxOrthant => {
                let mask = x
                    .iter()
                    .enumerate()
                    .fold(0usize, |m, (j, &v)| if above(v, u) { m | (1 << j) } else { m });
                mask.max(1) - 1
            }
            Scheme::MinOrthant => {
                let c = u + u;
                x.iter()
                    .enumerate()
                    .fold(0usize, |m, (j, &v)| if above(v, c) { m | (1 << j) } else { m })
            }
            Scheme::Angular => {
                let a = x[1].atan2(x[0]);
                self.angles[1..]
                    .iter()
                    .position(|&b| a <= b)
                    .unwrap_or(self.k - 1)
            }
        }
    }

    /// Human-readable cell description: `{1,2}` for orthant cells (1-based
    /// coordinates), `(lo, hi]` in degrees for angular ones.
    pub fn cell_label(&self, j: usize) -> String {
        let set = |mask: usize| {
            let ids: Vec<String> = (0..self.d)
                .filter(|b| mask & (1 << b) != 0)
                .map(|b| (b + 1).to_string())
                .collect();
            format!("{{{}}}", ids.join(","))
        };
        match self.scheme {
            Scheme::MaxOrthant => set(j + 1),
            Scheme::MinOrthant => set(j),
            Scheme::Angular => {
                let deg = |a: T| a.as_f64().to_degrees();
                format!("({:.4}, {:.4}]", deg(self.angles[j]), deg(self.angles[j + 1]))
            }
        }
    }
}

/// Counts the `k_n` largest risk values of a standardized sample in the
/// cells of `partition`.
///
/// The threshold is the `(n - k_n)`-th order statistic of `r(X_i)`. Risk
/// values are ordered with a stable sort and exactly the top `k_n` positions
/// are exceedances, so ties at the threshold never change the count; tied
/// exceedances are classified as boundary points.
pub fn count_cells<T: Scalar>(
    sample: &Sample<T>,
    partition: &Partition<T>,
    k_n: usize,
) -> Result<CellProbabilities<T>> {
    if sample.state() == MarginState::Raw {
        return Err(Error::domain("cell counts need a Pareto or pseudo-observation sample"));
    }
    if sample.d() != partition.d() {
        return Err(Error::Shape(format!(
            "sample dimension {} does not match partition dimension {}",
            sample.d(),
            partition.d()
        )));
    }
    let n = sample.n();
    if k_n == 0 || k_n >= n {
        return Err(Error::domain(format!("need 1 <= k_n < n, got k_n = {k_n}, n = {n}")));
    }
    let risk = partition.risk();
    let r: Vec<T> = sample.rows().map(|x| risk.eval(x)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| r[a].partial_cmp(&r[b]).unwrap_or(Ordering::Equal));
    let threshold = r[order[n - k_n - 1]];

    let mut counts = vec![0usize; partition.k()];
    for &i in &order[n - k_n..] {
        let cell = partition.cell_index(sample.row(i), threshold, !(r[i] > threshold));
        counts[cell] += 1;
    }
    CellProbabilities::from_counts(counts, threshold)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn max_partition_cells() {
        let p = Partition::<f64>::max_orthant(2).unwrap();
        assert_eq!(p.k(), 3);
        assert_eq!(p.classify(&[1.5, 0.7], 1.0), Some(0));
        assert_eq!(p.cell_label(0), "{1}");
        assert_eq!(p.classify(&[1.5, 1.5], 1.0), Some(2));
        assert_eq!(p.cell_label(2), "{1,2}");
        assert_eq!(p.classify(&[0.5, 1.0], 1.0), None);
        assert_eq!(Partition::<f64>::max_orthant(3).unwrap().k(), 7);
        assert!(Partition::<f64>::max_orthant(1).is_err());
    }

    #[test]
    fn min_partition_cells() {
        let p = Partition::<f64>::min_orthant(2).unwrap();
        assert_eq!(p.k(), 4);
        assert_eq!(p.classify(&[1.5, 1.5], 1.0), Some(0));
        assert_eq!(p.cell_label(0), "{}");
        assert_eq!(p.classify(&[3.0, 1.2], 1.0), Some(1));
        assert_eq!(p.classify(&[3.0, 0.9], 1.0), None);
        // x_j = 2 exactly is not above 2
        assert_eq!(p.classify(&[2.0, 2.0], 1.0), Some(0));
        assert!(Partition::<f64>::min_orthant(1).is_err());
    }

    #[test]
    fn angular_diagonal_in_lower_half_open_cell() {
        let p = Partition::<f64>::angular(RiskFunctional::Euclidean, 4, 2).unwrap();
        let x = [3.0 / 2f64.sqrt(), 3.0 / 2f64.sqrt()];
        assert_eq!(p.classify(&x, 1.0), Some(1));
        assert_eq!(p.classify(&[5.0, 0.0], 1.0), Some(0));
        assert_eq!(p.classify(&[0.0, 5.0], 1.0), Some(3));
    }

    #[test]
    fn angular_errors() {
        assert!(matches!(
            Partition::<f64>::angular(RiskFunctional::Euclidean, 4, 3),
            Err(Error::UnsupportedDimension { d: 3, .. })
        ));
        assert!(Partition::<f64>::angular(RiskFunctional::Sum, 1, 2).is_err());
        assert!(Partition::<f64>::angular(RiskFunctional::Max, 3, 2).is_err());
        let bad = vec![0.0, 1.0, 0.5, std::f64::consts::FRAC_PI_2];
        assert!(Partition::angular_with_angles(RiskFunctional::Sum, bad, 2).is_err());
    }

    #[test]
    fn custom_angles() {
        let a = vec![0.0, 0.3, 1.2, std::f64::consts::FRAC_PI_2];
        let p = Partition::angular_with_angles(RiskFunctional::Sum, a, 2).unwrap();
        assert_eq!(p.k(), 3);
        assert_eq!(p.classify(&[4.0, 4.0], 1.0), Some(1));
    }

    #[test]
    fn count_cells_degenerate_single_cell() {
        let rows: Vec<[f64; 2]> = (0..10).map(|i| [1.0 + i as f64, 1.0]).collect();
        let s = Sample::from_rows(&rows, MarginState::Pareto).unwrap();
        let p = Partition::max_orthant(2).unwrap();
        let c = count_cells(&s, &p, 4).unwrap();
        assert_eq!(c.counts(), &[4, 0, 0]);
        assert_eq!(c.probs(), &[1.0, 0.0, 0.0]);
        assert_eq!(c.threshold(), 6.0);
    }

    #[test]
    fn ties_at_threshold_keep_exactly_k() {
        // risk values 2,2,2,2,1: k = 2 takes the last two rows with r = 2
        let rows = [[2.0, 1.0], [1.0, 2.0], [2.0, 1.0], [1.0, 2.0], [1.0, 1.0]];
        let s = Sample::from_rows(&rows, MarginState::Pseudo).unwrap();
        let p = Partition::max_orthant(2).unwrap();
        let c = count_cells(&s, &p, 2).unwrap();
        assert_eq!(c.k_n(), 2);
        assert_eq!(c.counts(), &[1, 1, 0]);
    }

    #[test]
    fn count_cells_validates() {
        let s = Sample::from_rows(&[[1.0, 2.0], [3.0, 4.0]], MarginState::Pareto).unwrap();
        let p = Partition::max_orthant(2).unwrap();
        assert!(count_cells(&s, &p, 2).is_err());
        assert!(count_cells(&s, &p, 0).is_err());
        let raw = Sample::from_rows(&[[1.0, 2.0], [3.0, 4.0]], MarginState::Raw).unwrap();
        assert!(count_cells(&raw, &p, 1).is_err());
        let p3 = Partition::max_orthant(3).unwrap();
        assert!(count_cells(&s, &p3, 1).is_err());
    }
}
