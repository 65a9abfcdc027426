use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAX_ITER: usize = 500;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma<T: Scalar>(x: T) -> T {
    let half = T::lit(0.5);
    if x < half {
        // reflection
        let pi = T::PI();
        return (pi / (pi * x).sin()).ln() - ln_gamma(T::one() - x);
    }
    let x = x - T::one();
    let mut acc = T::lit(LANCZOS[0]);
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc = acc + T::lit(c) / (x + T::from_count(i));
    }
    let t = x + T::lit(LANCZOS_G) + half;
    half * (T::TAU()).ln() + (x + half) * t.ln() - t + acc.ln()
}

/// Both regularized incomplete gamma functions `(P(a,x), Q(a,x))`.
///
/// Series for `x < a + 1`, Lentz continued fraction otherwise; the smaller
/// of the pair is always computed directly so neither tail loses precision.
fn gamma_pq<T: Scalar>(a: T, x: T) -> Result<(T, T)> {
    if !(a > T::zero()) || !a.is_finite() {
        return Err(Error::domain(format!("incomplete gamma shape must be positive, got {a}")));
    }
    if !(x >= T::zero()) {
        return Err(Error::domain(format!("incomplete gamma argument must be non-negative, got {x}")));
    }
    if x == T::zero() {
        return Ok((T::zero(), T::one()));
    }
    if x.is_infinite() {
        return Ok((T::one(), T::zero()));
    }
    let eps = T::epsilon();
    let log_prefactor = a * x.ln() - x - ln_gamma(a);

    if x < a + T::one() {
        let mut ap = a;
        let mut term = T::one() / a;
        let mut sum = term;
        for _ in 0..MAX_ITER {
            ap = ap + T::one();
            term = term * x / ap;
            sum = sum + term;
            if term.abs() < sum.abs() * eps {
                break;
            }
        }
        let p = (sum.ln() + log_prefactor).exp().min(T::one());
        Ok((p, T::one() - p))
    } else {
        let tiny = T::min_positive_value() / eps;
        let mut b = x + T::one() - a;
        let mut c = T::one() / tiny;
        let mut d = T::one() / b;
        let mut h = d;
        for i in 1..=MAX_ITER {
            let an = -T::from_count(i) * (T::from_count(i) - a);
            b = b + T::lit(2.0);
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = T::one() / d;
            let delta = d * c;
            h = h * delta;
            if (delta - T::one()).abs() < eps {
                break;
            }
        }
        let q = (h.ln() + log_prefactor).exp().min(T::one());
        Ok((T::one() - q, q))
    }
}

/// Regularized lower incomplete gamma function `P(a, x)`.
pub fn gamma_p<T: Scalar>(a: T, x: T) -> Result<T> {
    gamma_pq(a, x).map(|(p, _)| p)
}

/// Regularized upper incomplete gamma function `Q(a, x) = 1 - P(a, x)`.
pub fn gamma_q<T: Scalar>(a: T, x: T) -> Result<T> {
    gamma_pq(a, x).map(|(_, q)| q)
}

/// Chi-squared distribution with a positive integer number of degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChiSquared {
    dof: u32,
}

impl ChiSquared {
    pub fn new(dof: u32) -> Result<Self> {
        if dof == 0 {
            return Err(Error::domain("chi-squared degrees of freedom must be at least 1"));
        }
        Ok(Self { dof })
    }

    pub fn dof(&self) -> u32 {
        self.dof
    }

    fn shape<T: Scalar>(&self) -> T {
        T::lit(self.dof as f64 / 2.0)
    }

    fn check_x<T: Scalar>(x: T) -> Result<()> {
        if x >= T::zero() {
            Ok(())
        } else {
            Err(Error::domain(format!("chi-squared argument must be non-negative, got {x}")))
        }
    }

    pub fn pdf<T: Scalar>(&self, x: T) -> T {
        if x < T::zero() {
            return T::zero();
        }
        let k2: T = self.shape();
        if x == T::zero() {
            return match self.dof {
                1 => T::infinity(),
                2 => T::lit(0.5),
                _ => T::zero(),
            };
        }
        let half = T::lit(0.5);
        ((k2 - T::one()) * x.ln() - half * x - k2 * T::LN_2() - ln_gamma(k2)).exp()
    }

    pub fn cdf<T: Scalar>(&self, x: T) -> Result<T> {
        Self::check_x(x)?;
        gamma_p(self.shape(), x * T::lit(0.5))
    }

    /// Upper tail `P(X > x)`, computed without cancellation.
    pub fn sf<T: Scalar>(&self, x: T) -> Result<T> {
        Self::check_x(x)?;
        gamma_q(self.shape(), x * T::lit(0.5))
    }

    /// Inverse CDF by a bracketed Newton iteration that falls back to
    /// bisection whenever a Newton step leaves the bracket.
    pub fn quantile<T: Scalar>(&self, p: T) -> Result<T> {
        if !(p > T::zero() && p < T::one()) {
            return Err(Error::domain(format!("probability must lie in (0, 1), got {p}")));
        }
        let mut lo = T::zero();
        let mut hi = T::from_count(self.dof as usize).max(T::one());
        while self.cdf(hi)? < p {
            lo = hi;
            hi = hi * T::lit(2.0);
            if !hi.is_finite() {
                return Err(Error::domain("chi-squared quantile bracket overflowed"));
            }
        }
        let mut x = (lo + hi) * T::lit(0.5);
        let xtol = T::epsilon() * T::lit(8.0);
        for _ in 0..MAX_ITER {
            let f = self.cdf(x)? - p;
            if f == T::zero() {
                return Ok(x);
            }
            if f < T::zero() {
                lo = x;
            } else {
                hi = x;
            }
            let dens = self.pdf(x);
            let mut next = if dens > T::zero() && dens.is_finite() {
                x - f / dens
            } else {
                (lo + hi) * T::lit(0.5)
            };
            if !(next > lo && next < hi) {
                next = (lo + hi) * T::lit(0.5);
            }
            let converged = (next - x).abs() <= xtol * x.abs().max(T::min_positive_value())
                || (hi - lo) <= xtol * hi;
            x = next;
            if converged {
                break;
            }
        }
        Ok(x)
    }
}

/// `P(chi2(dof) <= x)`.
pub fn chisq_cdf<T: Scalar>(x: T, dof: u32) -> Result<T> {
    ChiSquared::new(dof)?.cdf(x)
}

/// `P(chi2(dof) > x)`.
pub fn chisq_sf<T: Scalar>(x: T, dof: u32) -> Result<T> {
    ChiSquared::new(dof)?.sf(x)
}

pub fn chisq_quantile<T: Scalar>(p: T, dof: u32) -> Result<T> {
    ChiSquared::new(dof)?.quantile(p)
}

/// Standard normal CDF via `erfc(t) = Q(1/2, t^2)`.
pub fn normal_cdf<T: Scalar>(z: T) -> T {
    let half = T::lit(0.5);
    let t2 = z * z * half;
    // gamma_q cannot fail for a = 1/2 and t2 >= 0
    let tail = half * gamma_q(half, t2).unwrap_or_else(|_| T::nan());
    if z < T::zero() {
        tail
    } else {
        T::one() - tail
    }
}

fn normal_pdf<T: Scalar>(z: T) -> T {
    (-(z * z) * T::lit(0.5)).exp() / T::TAU().sqrt()
}

/// Standard normal quantile. A rational starting point followed by Halley
/// iterations on the CDF; computed on the lower half and mirrored so the
/// result is exactly antisymmetric about `p = 0.5`.
pub fn normal_quantile<T: Scalar>(p: T) -> Result<T> {
    if !(p > T::zero() && p < T::one()) {
        return Err(Error::domain(format!("probability must lie in (0, 1), got {p}")));
    }
    let half = T::lit(0.5);
    if p == half {
        return Ok(T::zero());
    }
    let (q, sign) = if p < half { (p, -T::one()) } else { (T::one() - p, T::one()) };

    let t = (T::lit(-2.0) * q.ln()).sqrt();
    let num = T::lit(2.515_517) + t * (T::lit(0.802_853) + t * T::lit(0.010_328));
    let den = T::one() + t * (T::lit(1.432_788) + t * (T::lit(0.189_269) + t * T::lit(0.001_308)));
    let mut z = -(t - num / den);

    for _ in 0..50 {
        let f = normal_cdf(z) - q;
        let dens = normal_pdf(z);
        if dens == T::zero() {
            break;
        }
        let r = f / dens;
        let step = r / (T::one() + z * r * half);
        z = z - step;
        if step.abs() <= T::epsilon() * z.abs().max(T::one()) {
            break;
        }
    }
    Ok(sign * -z)
}
