use chrono::{Duration, NaiveDate, TimeZone, Utc};
use kltail::copulas::CopulaModel;
use kltail::inference::TestConfig;
use kltail::ingest::{
    build_pairs, compare_seasons, daily_maxima, load_csv, synthetic_two_season_series, CsvSchema,
    RainRecord, RainSeries, Season, SLOTS_PER_DAY, SLOTS_PER_HOUR,
};
use proptest::prelude::*;

#[test]
fn csv_round_trip_preserves_pairs() {
    let w = CopulaModel::outer_power_clayton(0.3).unwrap();
    let s = CopulaModel::outer_power_clayton(0.7).unwrap();
    let series = synthetic_two_season_series(&w, &s, 1, 4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("station.csv");
    series.write_csv(&path).unwrap();
    let loaded = load_csv(&path, &CsvSchema::default()).unwrap();
    assert_eq!(loaded.len(), series.len());
    assert_eq!(loaded.malformed, 0);
    assert_eq!(loaded.station, "station");
    for season in [Season::Djf, Season::Mam] {
        let a = build_pairs(&series, season).unwrap();
        let b = build_pairs(&loaded, season).unwrap();
        assert_eq!(a.days, b.days);
        for (p, q) in a.pairs.iter().zip(&b.pairs) {
            assert!((p[0] - q[0]).abs() < 1e-12 && (p[1] - q[1]).abs() < 1e-12);
        }
    }
}

#[test]
fn identical_seasons_do_not_reject() {
    let w = CopulaModel::outer_power_clayton(0.5).unwrap();
    let series = synthetic_two_season_series(&w, &w, 3, 8).unwrap();
    let djf = build_pairs(&series, Season::Djf).unwrap();
    let seasons = vec![(Season::Djf, Ok(djf.clone())), (Season::Mam, Ok(djf))];
    let mut cfg = TestConfig::new(40);
    cfg.bootstrap = 200;
    let out = compare_seasons(&seasons, &cfg);
    let r = out[0].report.as_ref().unwrap();
    assert_eq!(r.statistic, 0.0);
    assert!(!r.rejected());
}

#[test]
fn oversized_k_is_capped_and_short_seasons_reported() {
    let w = CopulaModel::outer_power_clayton(0.5).unwrap();
    let series = synthetic_two_season_series(&w, &w, 1, 8).unwrap();
    let mut cfg = TestConfig::new(500);
    cfg.bootstrap = 100;
    let out = kltail::ingest::seasonal_tests(&series, &cfg);
    let pair = out.iter().find(|c| c.first == Season::Djf && c.second == Season::Mam).unwrap();
    assert!(pair.warning.is_some());
    assert_eq!(pair.k_n, 89);
    // 89 exceedances are too many for the split-half bootstrap on 90 days
    assert!(pair.error.as_deref().unwrap().contains("bootstrap"));
    assert!(out.iter().filter(|c| c.first == Season::Jja).all(|c| c.error.is_some()));
}

fn slots() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..20.0], SLOTS_PER_DAY)
}

proptest! {
    #[test]
    fn hourly_sums_conserve_the_total(v in slots()) {
        let total: f64 = v.iter().sum();
        let hourly: f64 = v.chunks(SLOTS_PER_HOUR).map(|h| h.iter().sum::<f64>()).sum();
        prop_assert!((total - hourly).abs() <= 1e-9 * total.max(1.0));
    }

    #[test]
    fn daily_maxima_are_ordered(v in slots()) {
        let arr: [f64; SLOTS_PER_DAY] = v.try_into().unwrap();
        let [six, hour] = daily_maxima(&arr);
        prop_assert!(six <= hour + 1e-12);
        prop_assert!(hour <= 10.0 * six + 1e-9);
    }

    #[test]
    fn pairing_ignores_other_days(v in slots(), w in slots()) {
        let d1 = NaiveDate::from_ymd_opt(2010, 7, 1).unwrap();
        let d2 = NaiveDate::from_ymd_opt(2010, 7, 2).unwrap();
        let day = |d: NaiveDate, vals: &[f64]| -> Vec<RainRecord> {
            let t0 = Utc.from_utc_datetime(&d.and_hms_opt(0, 0, 0).unwrap());
            vals.iter().enumerate().map(|(i, &x)| RainRecord {
                time: t0 + Duration::minutes(6 * i as i64),
                depth: Some(x),
            }).collect()
        };
        let alone = RainSeries::from_records("a", day(d1, &v)).unwrap();
        let mut both = day(d1, &v);
        both.extend(day(d2, &w));
        let both = RainSeries::from_records("b", both).unwrap();
        match (build_pairs(&alone, Season::Jja), build_pairs(&both, Season::Jja)) {
            (Ok(a), Ok(b)) => {
                prop_assert!(b.days.contains(&d1) == a.days.contains(&d1));
                if let Some(i) = b.days.iter().position(|d| *d == d1) {
                    prop_assert_eq!(a.pairs[0], b.pairs[i]);
                }
            }
            (Err(_), _) => prop_assert!(v.iter().all(|&x| x == 0.0)),
            (Ok(_), Err(_)) => prop_assert!(false),
        }
    }
}
