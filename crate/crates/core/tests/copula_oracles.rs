use kltail::copulas::{match_chi, CopulaModel, Family};
use kltail::experiments::{ks_one_sample, ks_two_sample};
use kltail::numerics::RngStream;
use kltail::Sample;
use proptest::prelude::*;

fn models() -> Vec<CopulaModel> {
    vec![
        CopulaModel::logistic(0.45).unwrap(),
        CopulaModel::logistic(1.0).unwrap(),
        CopulaModel::outer_power_clayton(0.45).unwrap(),
        CopulaModel::outer_power_clayton(0.9).unwrap(),
        CopulaModel::asymmetric_logistic(0.2, [1.0, 0.3]).unwrap(),
        CopulaModel::asymmetric_logistic(0.6, [0.5, 0.8]).unwrap(),
    ]
}

fn empirical_cdf(s: &Sample, u: f64, v: f64) -> f64 {
    s.rows().filter(|r| r[0] <= u && r[1] <= v).count() as f64 / s.n() as f64
}

#[test]
fn margins_are_uniform() {
    for (i, m) in models().into_iter().enumerate() {
        let s: Sample = m.sample(20_000, RngStream::new(5, i as u64)).unwrap();
        for j in 0..2 {
            let col: Vec<f64> = s.column(j).collect();
            let d = ks_one_sample(&col, |x| x.clamp(0.0, 1.0));
            // 1% critical value of the KS distance is about 1.63 / sqrt(n)
            assert!(d < 1.63 / (20_000f64).sqrt(), "{m:?} margin {j}: {d}");
        }
    }
}

/// Outer power Clayton distribution function written out directly.
fn clayton_cdf(theta: f64, u: f64, v: f64) -> f64 {
    let s = (1.0 / u - 1.0).powf(1.0 / theta) + (1.0 / v - 1.0).powf(1.0 / theta);
    1.0 / (1.0 + s.powf(theta))
}

/// Extreme-value copula from an asymmetric logistic dependence function.
fn asym_cdf(theta: f64, psi: [f64; 2], u: f64, v: f64) -> f64 {
    let (x, y) = (-u.ln(), -v.ln());
    let l = (1.0 - psi[0]) * x
        + (1.0 - psi[1]) * y
        + ((psi[0] * x).powf(1.0 / theta) + (psi[1] * y).powf(1.0 / theta)).powf(theta);
    (-l).exp()
}

#[test]
fn sample_matches_distribution_function() {
    let grid = [0.1, 0.3, 0.5, 0.7, 0.9, 0.99];
    for (i, m) in models().into_iter().enumerate() {
        let s: Sample = m.sample(100_000, RngStream::new(11, i as u64)).unwrap();
        for &u in &grid {
            for &v in &grid {
                let exact = match m.family {
                    Family::OuterPowerClayton => clayton_cdf(m.theta, u, v),
                    Family::Logistic => asym_cdf(m.theta, [1.0, 1.0], u, v),
                    Family::AsymmetricLogistic => asym_cdf(m.theta, m.psi.unwrap(), u, v),
                };
                assert!((m.cdf(u, v) - exact).abs() < 1e-12);
                let mc = empirical_cdf(&s, u, v);
                assert!((mc - exact).abs() < 0.006, "{m:?} at ({u}, {v}): {mc} vs {exact}");
            }
        }
    }
}

#[test]
fn clayton_center_value() {
    let m = CopulaModel::outer_power_clayton(0.45).unwrap();
    let s: Sample = m.sample(100_000, RngStream::new(1, 0)).unwrap();
    let exact = 1.0 / (1.0 + 2f64.powf(0.45));
    assert!((empirical_cdf(&s, 0.5, 0.5) - exact).abs() < 0.005);
}

/// Frailty construction: `V = S * E^(1/theta)` has Laplace transform
/// `1 / (1 + t^theta)`, the generator of the outer power Clayton copula.
fn clayton_by_frailty(theta: f64, n: usize, stream: RngStream) -> Vec<[f64; 2]> {
    let mut rng = stream.rng();
    (0..n)
        .map(|_| {
            let v = rng.positive_stable(theta).unwrap() * rng.exponential().powf(1.0 / theta);
            let mut u = || 1.0 / (1.0 + (rng.exponential() / v).powf(theta));
            [u(), u()]
        })
        .collect()
}

#[test]
fn clayton_inversion_agrees_with_frailty() {
    for &theta in &[0.3, 0.45, 0.7] {
        let m = CopulaModel::outer_power_clayton(theta).unwrap();
        let inv: Sample = m.sample(20_000, RngStream::new(2, 0)).unwrap();
        let fr = clayton_by_frailty(theta, 20_000, RngStream::new(2, 1));
        // compare the laws of max(U1, U2) and U1 + U2
        let inv_max: Vec<f64> = inv.rows().map(|r| r[0].max(r[1])).collect();
        let fr_max: Vec<f64> = fr.iter().map(|r| r[0].max(r[1])).collect();
        let inv_sum: Vec<f64> = inv.rows().map(|r| r[0] + r[1]).collect();
        let fr_sum: Vec<f64> = fr.iter().map(|r| r[0] + r[1]).collect();
        // 1% critical value for two samples of 20000
        let crit = 1.63 * (2.0 / 20_000f64).sqrt();
        assert!(ks_two_sample(&inv_max, &fr_max) < crit, "theta {theta}");
        assert!(ks_two_sample(&inv_sum, &fr_sum) < crit, "theta {theta}");
    }
}

#[test]
fn tail_dependence_matches_chi() {
    let v = 0.995;
    for (i, m) in models().into_iter().enumerate() {
        let s: Sample = m.sample(200_000, RngStream::new(13, i as u64)).unwrap();
        let joint = s.rows().filter(|r| r[0] > v && r[1] > v).count() as f64 / s.n() as f64;
        let finite_level = (1.0 - 2.0 * v + m.cdf(v, v)) / (1.0 - v);
        let mc = joint / (1.0 - v);
        assert!((mc - finite_level).abs() < 0.06, "{m:?}: {mc} vs {finite_level}");
        // the finite level approaches the limit
        assert!((finite_level - m.theoretical_chi()).abs() < 0.02, "{m:?}");
    }
}

#[test]
fn symmetric_families_are_exchangeable() {
    for m in models().into_iter().filter(|m| m.family != Family::AsymmetricLogistic) {
        let s: Sample = m.sample(50_000, RngStream::new(17, 0)).unwrap();
        let a: Vec<f64> = s.column(0).zip(s.column(1)).map(|(x, y)| x - y).collect();
        let b: Vec<f64> = a.iter().map(|d| -d).collect();
        let crit = 1.63 * (2.0 / 50_000f64).sqrt();
        assert!(ks_two_sample(&a, &b) < crit, "{m:?}");
    }
}

#[test]
fn independence_at_theta_one() {
    let m = CopulaModel::logistic(1.0).unwrap();
    assert_eq!(m.theoretical_chi(), 0.0);
    assert!((m.cdf(0.3, 0.6) - 0.18).abs() < 1e-14);
}

proptest! {
    #[test]
    fn chi_matching_roundtrips(target in 0.01f64..0.99) {
        for fam in [Family::Logistic, Family::OuterPowerClayton] {
            let theta = match_chi(fam, target, None).unwrap();
            let m = match fam {
                Family::Logistic => CopulaModel::logistic(theta),
                _ => CopulaModel::outer_power_clayton(theta),
            }.unwrap();
            prop_assert!((m.theoretical_chi() - target).abs() < 1e-12);
        }
    }

    #[test]
    fn asymmetric_chi_matching(psi2 in 0.2f64..1.0, frac in 0.05f64..0.95) {
        let psi = [1.0, psi2];
        let target = frac * psi2;
        let theta = match_chi(Family::AsymmetricLogistic, target, Some(psi)).unwrap();
        let m = CopulaModel::asymmetric_logistic(theta, psi).unwrap();
        prop_assert!((m.theoretical_chi() - target).abs() < 1e-8);
    }

    #[test]
    fn cdf_respects_frechet_bounds(u in 0.0f64..1.0, v in 0.0f64..1.0, theta in 0.05f64..1.0) {
        for m in [CopulaModel::logistic(theta).unwrap(), CopulaModel::outer_power_clayton(theta).unwrap()] {
            let c = m.cdf(u, v);
            prop_assert!(c >= (u + v - 1.0).max(0.0) - 1e-12);
            prop_assert!(c <= u.min(v) + 1e-12);
        }
    }
}
