//! Samples and their standardization to unit-Pareto margins, either through
//! known marginal CDFs or through ranks (pseudo-observations).

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Marginal scale of the entries of a [`Sample`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarginState {
    Raw,
    Pareto,
    Pseudo,
}

/// An `n x d` matrix of observations stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T> {
    data: Vec<T>,
    n: usize,
    d: usize,
    state: MarginState,
}

impl<T: Scalar> Sample<T> {
    /// Builds a sample from row-major data. Entries must be finite, and at
    /// least 1 when the state is `Pareto` or `Pseudo`.
    pub fn new(data: Vec<T>, d: usize, state: MarginState) -> Result<Self> {
        if d == 0 {
            return Err(Error::Shape("dimension must be at least 1".into()));
        }
        if data.len() % d != 0 {
            return Err(Error::Shape(format!(
                "{} values do not fill rows of length {d}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::domain(format!(
                "non-finite value at row {}, coordinate {}",
                pos / d,
                pos % d
            )));
        }
        if state != MarginState::Raw {
            if let Some(pos) = data.iter().position(|&x| x < T::one()) {
                return Err(Error::domain(format!(
                    "{state:?} entries must be >= 1 (row {}, coordinate {})",
                    pos / d,
                    pos % d
                )));
            }
        }
        Ok(Self {
            n: data.len() / d,
            data,
            d,
            state,
        })
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R], state: MarginState) -> Result<Self> {
        let d = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * d);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != d {
                return Err(Error::Shape(format!("row {i} has {} values, expected {d}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Self::new(data, d, state)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn state(&self) -> MarginState {
        self.state
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.data.chunks_exact(self.d)
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = T> + '_ {
        self.data.iter().skip(j).step_by(self.d).copied()
    }

    /// The sub-sample formed by the given rows, in order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * self.d);
        for &i in rows {
            data.extend_from_slice(self.row(i));
        }
        Self {
            n: rows.len(),
            data,
            d: self.d,
            state: self.state,
        }
    }

    /// Reorders coordinates: output coordinate `j` is input coordinate `order[j]`.
    pub fn permute_columns(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.d];
        if order.len() != self.d || order.iter().any(|&j| j >= self.d || std::mem::replace(&mut seen[j], true)) {
            return Err(Error::Shape(format!("{order:?} is not a permutation of 0..{}", self.d)));
        }
        let data = self
            .rows()
            .flat_map(|r| order.iter().map(move |&j| r[j]))
            .collect();
        Ok(Self { data, ..*self })
    }

    /// Applies `f(coordinate, value)` to every entry and returns a raw sample.
    pub fn map_raw(&self, mut f: impl FnMut(usize, T) -> T) -> Result<Self> {
        let d = self.d;
        let data = self.data.iter().enumerate().map(|(k, &x)| f(k % d, x)).collect();
        Self::new(data, d, MarginState::Raw)
    }

    /// Reads a headed CSV of numeric columns, one observation per row.
    pub fn read_csv(path: &std::path::Path, state: MarginState) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
        let d = reader.headers()?.len();
        if d == 0 {
            return Err(Error::Format(format!("{} has no header", path.display())));
        }
        let mut data = Vec::new();
        for (line, row) in reader.records().enumerate() {
            let row = row?;
            if row.len() != d {
                return Err(Error::Format(format!(
                    "line {}: expected {d} fields, found {}",
                    line + 2,
                    row.len()
                )));
            }
            for field in row.iter() {
                let v: f64 = field
                    .parse()
                    .map_err(|_| Error::Format(format!("line {}: not a number: {field:?}", line + 2)))?;
                data.push(T::lit(v));
            }
        }
        if data.is_empty() {
            return Err(Error::Empty(format!("{} has no rows", path.display())));
        }
        Self::new(data, d, state)
    }

    /// Writes the sample with a `x1,...,xd` header.
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record((1..=self.d).map(|j| format!("x{j}")))?;
        for row in self.rows() {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    fn require_raw(&self, op: &str) -> Result<()> {
        if self.state == MarginState::Raw {
            Ok(())
        } else {
            Err(Error::domain(format!("{op} expects a raw sample, got {:?}", self.state)))
        }
    }
}

/// Continuous marginal distribution function of one coordinate.
pub trait MarginalCdf<T>: Send + Sync {
    fn cdf(&self, x: T) -> T;

    /// `1 - cdf(x)`; override when it can be computed more accurately.
    fn survival(&self, x: T) -> T
    where
        T: Scalar,
    {
        T::one() - self.cdf(x)
    }
}

impl<T, F> MarginalCdf<T> for F
where
    F: Fn(T) -> T + Send + Sync,
{
    fn cdf(&self, x: T) -> T {
        self(x)
    }
}

/// Closed-form margins used by the simulators and the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StandardMargin {
    /// Uniform on (0, 1).
    Uniform,
    /// Unit Pareto, `P(X > x) = 1/x` for `x >= 1`.
    Pareto,
    /// Unit-rate exponential.
    Exponential,
}

impl<T: Scalar> MarginalCdf<T> for StandardMargin {
    fn cdf(&self, x: T) -> T {
        T::one() - MarginalCdf::<T>::survival(self, x)
    }

    fn survival(&self, x: T) -> T {
        match self {
            StandardMargin::Uniform => (T::one() - x).max(T::zero()).min(T::one()),
            StandardMargin::Pareto => {
                if x <= T::one() {
                    T::one()
                } else {
                    x.recip()
                }
            }
            StandardMargin::Exponential => (-x.max(T::zero())).exp(),
        }
    }
}

/// Maps every entry to `1 / (1 - F_j(x))` with the supplied marginal CDFs.
pub fn to_pareto<T: Scalar>(raw: &Sample<T>, cdfs: &[&dyn MarginalCdf<T>]) -> Result<Sample<T>> {
    raw.require_raw("to_pareto")?;
    if cdfs.len() != raw.d {
        return Err(Error::Shape(format!(
            "{} marginal CDFs supplied for dimension {}",
            cdfs.len(),
            raw.d
        )));
    }
    let mut data = Vec::with_capacity(raw.data.len());
    for (i, row) in raw.rows().enumerate() {
        for (j, (&x, cdf)) in row.iter().zip(cdfs).enumerate() {
            let s = cdf.survival(x);
            if !(s > T::zero()) || s > T::one() {
                return Err(Error::DegenerateMargin { coordinate: j, row: i });
            }
            data.push(s.recip());
        }
    }
    Sample::new(data, raw.d, MarginState::Pareto)
}

/// Per-column stable ordinal ranks (1-based); ties keep row order.
fn column_ranks<T: Scalar>(raw: &Sample<T>, j: usize) -> Vec<usize> {
    let col: Vec<T> = raw.column(j).collect();
    let mut order: Vec<usize> = (0..col.len()).collect();
    order.sort_by(|&a, &b| col[a].partial_cmp(&col[b]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![0; col.len()];
    for (r, &i) in order.iter().enumerate() {
        ranks[i] = r + 1;
    }
    ranks
}

/// Rank standardization `(n + 1) / (n + 1 - rank)`, column by column.
pub fn to_pseudo<T: Scalar>(raw: &Sample<T>) -> Result<Sample<T>> {
    raw.require_raw("to_pseudo")?;
    if raw.n < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: raw.n,
            context: "rank standardization",
        });
    }
    let n1 = raw.n + 1;
    let scale = T::from_count(n1);
    let mut data = vec![T::zero(); raw.data.len()];
    for j in 0..raw.d {
        for (i, r) in column_ranks(raw, j).into_iter().enumerate() {
            data[i * raw.d + j] = scale / T::from_count(n1 - r);
        }
    }
    Sample::new(data, raw.d, MarginState::Pseudo)
}

/// Number of entries that equal another entry of the same column; these
/// receive distinct ranks by row order in [`to_pseudo`].
pub fn count_rank_ties<T: Scalar>(raw: &Sample<T>) -> usize {
    (0..raw.d)
        .map(|j| {
            let mut col: Vec<T> = raw.column(j).collect();
            col.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
            col.windows(2).filter(|w| w[0] == w[1]).count()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col_sample(col: &[f64]) -> Sample<f64> {
        Sample::new(col.to_vec(), 1, MarginState::Raw).unwrap()
    }

    #[test]
    fn pareto_direct_formula() {
        let raw = Sample::new(vec![0.5, 0.0, 0.75, 0.2], 2, MarginState::Raw).unwrap();
        let u = StandardMargin::Uniform;
        let out = to_pareto(&raw, &[&u, &u]).unwrap();
        assert_eq!(out.data(), &[2.0, 1.0, 4.0, 1.25]);
        assert_eq!(out.state(), MarginState::Pareto);
    }

    #[test]
    fn pareto_degenerate_margin_reports_location() {
        let raw = Sample::new(vec![0.1, 0.2, 0.3, 1.0], 2, MarginState::Raw).unwrap();
        let u = StandardMargin::Uniform;
        match to_pareto(&raw, &[&u, &u]) {
            Err(Error::DegenerateMargin { coordinate, row }) => assert_eq!((coordinate, row), (1, 1)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pareto_accepts_closures() {
        let raw = Sample::new(vec![1.0, 3.0], 1, MarginState::Raw).unwrap();
        let f = |x: f64| 1.0 - (-x).exp();
        let out = to_pareto(&raw, &[&f]).unwrap();
        assert!((out.data()[1] - 3f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn pseudo_example_column() {
        let out = to_pseudo(&col_sample(&[3.2, 7.1, 0.4, 5.0])).unwrap();
        assert_eq!(out.data(), &[5.0 / 3.0, 5.0, 5.0 / 4.0, 5.0 / 2.0]);
    }

    #[test]
    fn pseudo_max_is_n_plus_one() {
        let out = to_pseudo(&col_sample(&[0.3, -2.0, 9.0, 1.0, 4.4])).unwrap();
        let max = out.data().iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(max, 6.0);
    }

    #[test]
    fn pseudo_ties_use_row_order() {
        let out = to_pseudo(&col_sample(&[1.0, 1.0, 0.0])).unwrap();
        // ranks (2, 3, 1)
        assert_eq!(out.data(), &[4.0 / 2.0, 4.0 / 1.0, 4.0 / 3.0]);
        assert_eq!(count_rank_ties(&col_sample(&[1.0, 1.0, 0.0, 0.0])), 2);
    }

    #[test]
    fn pseudo_needs_two_rows() {
        assert!(matches!(
            to_pseudo(&col_sample(&[1.0])),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn standardized_input_rejected() {
        let s = Sample::new(vec![2.0, 3.0], 1, MarginState::Pareto).unwrap();
        assert!(to_pseudo(&s).is_err());
        assert!(Sample::new(vec![0.5], 1, MarginState::Pareto).is_err());
    }

    #[test]
    fn permute_columns_validates() {
        let s = Sample::new(vec![1.0, 2.0, 3.0, 4.0], 2, MarginState::Raw).unwrap();
        assert_eq!(s.permute_columns(&[1, 0]).unwrap().data(), &[2.0, 1.0, 4.0, 3.0]);
        assert!(s.permute_columns(&[0, 0]).is_err());
    }
}
