//! Bivariate copulas used to simulate two populations with controlled
//! extremal dependence.
//!
//! * logistic (Gumbel) extreme-value copula, sampled by the positive-stable
//!   frailty construction;
//! * outer power Clayton copula, sampled by conditional inversion;
//! * asymmetric logistic extreme-value copula, sampled by conditional
//!   inversion. It shares the tail structure of the logistic family when
//!   `psi = (1, 1)` and otherwise puts part of its spectral mass on the axes,
//!   which makes it an asymmetric alternative with a tunable extremal
//!   correlation.
//!
//! Model parameters are plain `f64`; generated samples can be any
//! [`Scalar`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::margins::{MarginState, Sample};
use crate::numerics::{bracketed_root, RngStream, RootOptions, StreamRng};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Logistic,
    OuterPowerClayton,
    AsymmetricLogistic,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Logistic => "logistic",
            Family::OuterPowerClayton => "outer-power-clayton",
            Family::AsymmetricLogistic => "asymmetric-logistic",
        }
    }
}

/// A bivariate copula with dependence parameter `theta` in (0, 1]
/// (`theta = 1` is independence for the logistic families) and, for the
/// asymmetric family, weights `psi` in (0, 1]^2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CopulaModel {
    pub family: Family,
    pub theta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<[f64; 2]>,
}

const ROOT_OPTS: RootOptions = RootOptions {
    xtol: 1e-12,
    max_iter: 200,
};

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta <= 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("dependence parameter must lie in (0, 1], got {theta}")))
    }
}

fn check_psi(psi: [f64; 2]) -> Result<()> {
    if psi.iter().all(|&p| p > 0.0 && p <= 1.0) {
        Ok(())
    } else {
        Err(Error::domain(format!("asymmetry weights must lie in (0, 1], got {psi:?}")))
    }
}

/// `ln(e^a + e^b)` without overflow.
fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Clamps a uniform draw into the open unit interval of `T`.
fn to_unit<T: Scalar>(u: f64) -> T {
    let t = T::lit(u);
    if t >= T::one() {
        T::one() - T::epsilon() * T::lit(0.5)
    } else if t <= T::zero() {
        T::min_positive_value()
    } else {
        t
    }
}

impl CopulaModel {
    pub fn logistic(theta: f64) -> Result<Self> {
        check_theta(theta)?;
        Ok(Self {
            family: Family::Logistic,
            theta,
            psi: None,
        })
    }

    pub fn outer_power_clayton(theta: f64) -> Result<Self> {
        check_theta(theta)?;
        Ok(Self {
            family: Family::OuterPowerClayton,
            theta,
            psi: None,
        })
    }

    pub fn asymmetric_logistic(theta: f64, psi: [f64; 2]) -> Result<Self> {
        check_theta(theta)?;
        check_psi(psi)?;
        Ok(Self {
            family: Family::AsymmetricLogistic,
            theta,
            psi: Some(psi),
        })
    }

    /// Re-checks parameters of a model built by hand or deserialized.
    pub fn validate(&self) -> Result<()> {
        check_theta(self.theta)?;
        match (self.family, self.psi) {
            (Family::AsymmetricLogistic, Some(psi)) => check_psi(psi),
            (Family::AsymmetricLogistic, None) => {
                Err(Error::domain("asymmetric logistic model needs weights psi"))
            }
            (_, Some(_)) => Err(Error::domain(format!(
                "{} model takes no asymmetry weights",
                self.family.name()
            ))),
            (_, None) => Ok(()),
        }
    }

    fn psi(&self) -> [f64; 2] {
        self.psi.unwrap_or([1.0, 1.0])
    }

    /// Stable tail dependence function `l(x, y)` of the logistic families.
    fn stdf(&self, x: f64, y: f64) -> f64 {
        let [p1, p2] = self.psi();
        (1.0 - p1) * x + (1.0 - p2) * y + self.logistic_part(x, y)
    }

    /// `((p1 x)^(1/theta) + (p2 y)^(1/theta))^theta`, evaluated in logs.
    fn logistic_part(&self, x: f64, y: f64) -> f64 {
        let [p1, p2] = self.psi();
        let t = self.theta;
        let la = (p1.ln() + x.ln()) / t;
        let lb = (p2.ln() + y.ln()) / t;
        (t * log_add_exp(la, lb)).exp()
    }

    /// Copula distribution function on uniform margins.
    pub fn cdf(&self, u1: f64, u2: f64) -> f64 {
        if u1 <= 0.0 || u2 <= 0.0 {
            return 0.0;
        }
        if u1 >= 1.0 {
            return u2.min(1.0);
        }
        if u2 >= 1.0 {
            return u1;
        }
        match self.family {
            Family::Logistic | Family::AsymmetricLogistic => (-self.stdf(-u1.ln(), -u2.ln())).exp(),
            Family::OuterPowerClayton => {
                let t = self.theta;
                let a = (1.0 / u1 - 1.0).ln() / t;
                let b = (1.0 / u2 - 1.0).ln() / t;
                1.0 / (1.0 + (t * log_add_exp(a, b)).exp())
            }
        }
    }

    /// Limiting extremal correlation `chi = 2 - l(1, 1)`.
    pub fn theoretical_chi(&self) -> f64 {
        (2.0 - self.stdf(1.0, 1.0)).clamp(0.0, 1.0)
    }

    /// `n` i.i.d. pairs on uniform margins, as a raw sample.
    pub fn sample<T: Scalar>(&self, n: usize, stream: RngStream) -> Result<Sample<T>> {
        self.validate()?;
        let mut rng = stream.rng();
        let mut data = Vec::with_capacity(2 * n);
        for _ in 0..n {
            let (u1, u2) = match self.family {
                Family::Logistic => self.draw_logistic(&mut rng)?,
                Family::OuterPowerClayton => self.draw_clayton(&mut rng)?,
                Family::AsymmetricLogistic => self.draw_asymmetric(&mut rng)?,
            };
            data.push(to_unit(u1));
            data.push(to_unit(u2));
        }
        Sample::new(data, 2, MarginState::Raw)
    }

    /// `U_i = exp(-(E_i / S)^theta)` with `S` positive stable of index theta.
    fn draw_logistic(&self, rng: &mut StreamRng) -> Result<(f64, f64)> {
        let t = self.theta;
        let ls = rng.positive_stable(t)?.ln();
        let mut draw = || (-(t * (rng.exponential().ln() - ls)).exp()).exp();
        let u1 = draw();
        Ok((u1, draw()))
    }

    /// Conditional inversion. With `a = 1/u1 - 1` and `w >= 1` defined by
    /// `(1/u2 - 1)^(1/theta) = a^(1/theta) (w - 1)`, the conditional CDF is
    /// `w^(theta-1) (1 + a)^2 / (1 + a w^theta)^2`; it is solved in `ln w`.
    fn draw_clayton(&self, rng: &mut StreamRng) -> Result<(f64, f64)> {
        let t = self.theta;
        let u1 = rng.uniform();
        let v = rng.uniform();
        let a = 1.0 / u1 - 1.0;
        let ln1a = a.ln_1p();
        let lv = v.ln();
        let g = |s: f64| (t - 1.0) * s + 2.0 * ln1a - 2.0 * (a * (t * s).exp()).ln_1p() - lv;
        let s = self.solve_decreasing(g, 0.0, 1.0, u1, v)?;
        let b = a * s.exp_m1().powf(t);
        Ok((u1, 1.0 / (1.0 + b)))
    }

    /// Conditional inversion of `dC/du1 = C l_x(x, y) / u1` over
    /// `s = ln y`, `y = -ln u2`.
    fn draw_asymmetric(&self, rng: &mut StreamRng) -> Result<(f64, f64)> {
        let u1 = rng.uniform();
        let v = rng.uniform();
        let [p1, p2] = self.psi();
        let t = self.theta;
        let x = -u1.ln();
        let lx = x.ln();
        let lv = v.ln();
        let g = |s: f64| {
            let y = s.exp();
            let la = (p1.ln() + lx) / t;
            let lb = (p2.ln() + s) / t;
            let ln_a = log_add_exp(la, lb);
            let l = (1.0 - p1) * x + (1.0 - p2) * y + (t * ln_a).exp();
            let l_x = (1.0 - p1) + (p1.ln() / t + (1.0 / t - 1.0) * lx + (t - 1.0) * ln_a).exp();
            x - l + l_x.ln() - lv
        };
        let s = self.solve_decreasing(g, -1.0, 1.0, u1, v)?;
        Ok((u1, (-s.exp()).exp()))
    }

    /// Root of a decreasing function, expanding `[lo, hi]` until it brackets.
    fn solve_decreasing(
        &self,
        g: impl Fn(f64) -> f64,
        mut lo: f64,
        mut hi: f64,
        u1: f64,
        v: f64,
    ) -> Result<f64> {
        let fail = || Error::RootNotFound {
            u1,
            v,
            iterations: ROOT_OPTS.max_iter,
        };
        let mut step = hi - lo;
        let mut guard = 0;
        while g(lo) < 0.0 {
            step *= 2.0;
            lo -= step;
            guard += 1;
            if guard > 64 {
                return Err(fail());
            }
        }
        step = hi - lo;
        while g(hi) > 0.0 {
            lo = hi;
            step *= 2.0;
            hi += step;
            guard += 1;
            if guard > 128 {
                return Err(fail());
            }
        }
        bracketed_root(&g, lo, hi, ROOT_OPTS).ok_or_else(fail)
    }
}

/// Dependence parameter giving a prescribed extremal correlation.
///
/// For the symmetric families `theta = log2(2 - chi)`; for the asymmetric
/// logistic family the map is solved by bisection-type root finding, and the
/// attainable range is `(0, min(psi))`.
pub fn match_chi(family: Family, target: f64, psi: Option<[f64; 2]>) -> Result<f64> {
    match family {
        Family::Logistic | Family::OuterPowerClayton => {
            if !(target >= 0.0 && target < 1.0) {
                return Err(Error::Unattainable {
                    target,
                    low: 0.0,
                    high: 1.0,
                });
            }
            Ok((2.0 - target).log2())
        }
        Family::AsymmetricLogistic => {
            let psi = psi.ok_or_else(|| Error::domain("asymmetric logistic model needs weights psi"))?;
            check_psi(psi)?;
            let high = psi[0].min(psi[1]);
            if !(target > 0.0 && target < high) {
                return Err(Error::Unattainable {
                    target,
                    low: 0.0,
                    high,
                });
            }
            let chi = |theta: f64| CopulaModel {
                family,
                theta,
                psi: Some(psi),
            }
            .theoretical_chi();
            let opts = RootOptions {
                xtol: 1e-13,
                max_iter: 400,
            };
            bracketed_root(|th: f64| chi(th) - target, 1e-9, 1.0, opts).ok_or(Error::Unattainable {
                target,
                low: 0.0,
                high,
            })
        }
    }
}
