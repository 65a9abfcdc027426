//! Precipitation series at 6-minute resolution: CSV loading, daily maxima
//! at the 6-minute and hourly scales, meteorological seasons, and the
//! season-by-season comparison of their extremal dependence.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use chrono::{DateTime, Datelike, Duration, NaiveDate, NaiveDateTime, TimeZone, Timelike, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copulas::CopulaModel;
use crate::error::{Error, Result};
use crate::inference::{run_test, Calibration, MarginMode, TestConfig, TestReport};
use crate::margins::{MarginState, Sample};
use crate::numerics::RngStream;

/// Six-minute slots per day.
pub const SLOTS_PER_DAY: usize = 240;
/// Six-minute slots per hour.
pub const SLOTS_PER_HOUR: usize = 10;
const MAX_DIAGNOSTICS: usize = 5;

/// Column mapping of a rainfall CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub timestamp: String,
    pub depth: String,
    /// Depth field value meaning "not recorded".
    pub missing: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            timestamp: "timestamp".into(),
            depth: "depth".into(),
            missing: String::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RainRecord {
    pub time: DateTime<Utc>,
    /// Depth in millimeters; `None` when missing or invalid.
    pub depth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RainSeries {
    pub station: String,
    pub records: Vec<RainRecord>,
    /// Rows dropped as malformed.
    pub malformed: usize,
    /// Rows kept with their depth masked (missing token or negative).
    pub masked: usize,
    /// First few malformed-row diagnostics.
    pub diagnostics: Vec<String>,
}

impl RainSeries {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Builds a series from records, checking the time grid and ordering.
    pub fn from_records(station: impl Into<String>, records: Vec<RainRecord>) -> Result<Self> {
        for w in records.windows(2) {
            if w[1].time <= w[0].time {
                return Err(Error::Format(format!(
                    "timestamps not strictly increasing at {}",
                    w[1].time
                )));
            }
        }
        if let Some(r) = records.iter().find(|r| slot_of(&r.time).is_none()) {
            return Err(Error::Format(format!("{} is off the 6-minute grid", r.time)));
        }
        let masked = records.iter().filter(|r| r.depth.is_none()).count();
        Ok(Self {
            station: station.into(),
            records,
            malformed: 0,
            masked,
            diagnostics: Vec::new(),
        })
    }

    /// Writes the series with the default schema.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["timestamp", "depth"])?;
        for r in &self.records {
            let depth = r.depth.map(|d| d.to_string()).unwrap_or_default();
            w.write_record([r.time.format("%Y-%m-%dT%H:%M:%SZ").to_string(), depth])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn slot_of(t: &DateTime<Utc>) -> Option<usize> {
    (t.second() == 0 && t.nanosecond() == 0 && t.minute() % 6 == 0)
        .then(|| (t.hour() as usize * 60 + t.minute() as usize) / 6)
}

fn parse_time(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .map(|n| Utc.from_utc_datetime(&n))
}

/// Loads a rainfall CSV. Timestamps are ISO-8601 (UTC unless an offset is
/// given) on the 6-minute grid and strictly increasing; rows breaking
/// either rule, or with an unparseable depth, are dropped as malformed.
/// Missing and negative depths are kept but masked.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<RainSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Format(format!("unreadable header: {e}")))?
        .clone();
    if headers.is_empty() || headers.iter().all(str::is_empty) {
        return Err(Error::Format(format!("{} has no header", path.display())));
    }
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format(format!("header lacks column {name:?}")))
    };
    let (ti, di) = (column(&schema.timestamp)?, column(&schema.depth)?);

    let mut records: Vec<RainRecord> = Vec::new();
    let (mut total, mut malformed, mut masked) = (0usize, 0usize, 0usize);
    let mut diagnostics = Vec::new();
    for (line, row) in reader.records().enumerate() {
        total += 1;
        let parsed = row
            .map_err(|e| e.to_string())
            .and_then(|row| parse_row(&row, ti, di, schema, records.last()));
        match parsed {
            Ok(rec) => {
                masked += rec.depth.is_none() as usize;
                records.push(rec);
            }
            Err(msg) => {
                malformed += 1;
                if diagnostics.len() < MAX_DIAGNOSTICS {
                    // header is line 1
                    diagnostics.push(format!("line {}: {msg}", line + 2));
                }
            }
        }
    }
    if total > 0 && 2 * malformed > total {
        return Err(Error::TooManyMalformed {
            malformed,
            total,
            first: diagnostics.first().cloned().unwrap_or_default(),
        });
    }
    let station = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(RainSeries {
        station,
        records,
        malformed,
        masked,
        diagnostics,
    })
}

fn parse_row(
    row: &csv::StringRecord,
    ti: usize,
    di: usize,
    schema: &CsvSchema,
    previous: Option<&RainRecord>,
) -> std::result::Result<RainRecord, String> {
    let ts = row.get(ti).ok_or("missing timestamp field")?;
    let time = parse_time(ts).ok_or_else(|| format!("unparseable timestamp {ts:?}"))?;
    if slot_of(&time).is_none() {
        return Err(format!("{ts} is off the 6-minute grid"));
    }
    if let Some(p) = previous {
        if time <= p.time {
            return Err(format!("{ts} does not follow {}", p.time));
        }
    }
    let raw = row.get(di).unwrap_or("");
    let depth = if raw == schema.missing {
        None
    } else {
        let v: f64 = raw.parse().map_err(|_| format!("unparseable depth {raw:?}"))?;
        if !v.is_finite() {
            return Err(format!("non-finite depth {raw:?}"));
        }
        (v >= 0.0).then_some(v)
    };
    Ok(RainRecord { time, depth })
}

/// Meteorological season; December belongs to the winter of the following
/// year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Season {
    Djf,
    Mam,
    Jja,
    Son,
}

impl Season {
    pub const ALL: [Season; 4] = [Season::Djf, Season::Mam, Season::Jja, Season::Son];

    pub fn of(date: NaiveDate) -> Season {
        match date.month() {
            12 | 1 | 2 => Season::Djf,
            3..=5 => Season::Mam,
            6..=8 => Season::Jja,
            _ => Season::Son,
        }
    }

    /// The year a date's season is attributed to.
    pub fn year_of(date: NaiveDate) -> i32 {
        if date.month() == 12 {
            date.year() + 1
        } else {
            date.year()
        }
    }
}

impl fmt::Display for Season {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Season::Djf => "DJF",
            Season::Mam => "MAM",
            Season::Jja => "JJA",
            Season::Son => "SON",
        })
    }
}

impl std::str::FromStr for Season {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "DJF" => Ok(Season::Djf),
            "MAM" => Ok(Season::Mam),
            "JJA" => Ok(Season::Jja),
            "SON" => Ok(Season::Son),
            _ => Err(Error::Config(format!("unknown season {s:?}"))),
        }
    }
}

/// Daily maxima of one season: `(max 6-minute depth, max hourly sum)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonalPairs {
    pub season: Season,
    pub days: Vec<NaiveDate>,
    pub pairs: Vec<[f64; 2]>,
    /// Days of the season dropped for a missing slot.
    pub incomplete_days: usize,
    pub dry_days: usize,
}

impl SeasonalPairs {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn to_sample(&self) -> Result<Sample<f64>> {
        Sample::from_rows(&self.pairs, MarginState::Raw)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["date", "season", "max_6min", "max_hourly"])?;
        for (day, [a, b]) in self.days.iter().zip(&self.pairs) {
            w.write_record([day.to_string(), self.season.to_string(), a.to_string(), b.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Daily `(max 6-minute, max hourly)` pair of one complete day.
pub fn daily_maxima(slots: &[f64; SLOTS_PER_DAY]) -> [f64; 2] {
    let six = slots.iter().copied().fold(0.0, f64::max);
    let hourly = slots
        .chunks_exact(SLOTS_PER_HOUR)
        .map(|h| h.iter().sum::<f64>())
        .fold(0.0, f64::max);
    [six, hourly]
}

/// Pairs of daily maxima for every complete, wet day of `season`.
pub fn build_pairs(series: &RainSeries, season: Season) -> Result<SeasonalPairs> {
    if series.is_empty() {
        return Err(Error::Empty("the rainfall series has no records".into()));
    }
    // slot values of each day in the season; NaN marks an unobserved slot
    let mut days: BTreeMap<NaiveDate, Box<[f64; SLOTS_PER_DAY]>> = BTreeMap::new();
    for r in &series.records {
        let date = r.time.date_naive();
        if Season::of(date) != season {
            continue;
        }
        let slot = slot_of(&r.time).expect("records are on the grid");
        let day = days
            .entry(date)
            .or_insert_with(|| Box::new([f64::NAN; SLOTS_PER_DAY]));
        day[slot] = r.depth.unwrap_or(f64::NAN);
    }
    let mut out = SeasonalPairs {
        season,
        days: Vec::new(),
        pairs: Vec::new(),
        incomplete_days: 0,
        dry_days: 0,
    };
    for (date, slots) in days {
        if slots.iter().any(|v| v.is_nan()) {
            out.incomplete_days += 1;
            continue;
        }
        let pair = daily_maxima(&slots);
        if pair == [0.0, 0.0] {
            out.dry_days += 1;
            continue;
        }
        out.days.push(date);
        out.pairs.push(pair);
    }
    if out.is_empty() {
        return Err(Error::Empty(format!("no complete wet days in {season}")));
    }
    Ok(out)
}

/// Result of comparing two seasons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonComparison {
    pub first: Season,
    pub second: Season,
    pub n_first: usize,
    pub n_second: usize,
    /// Exceedances actually used.
    pub k_n: usize,
    pub warning: Option<String>,
    pub report: Option<TestReport<f64>>,
    pub error: Option<String>,
}

/// Tests every unordered pair of seasons of a series with empirical
/// margins and bootstrap calibration.
pub fn seasonal_tests(series: &RainSeries, config: &TestConfig) -> Vec<SeasonComparison> {
    let seasons: Vec<(Season, std::result::Result<SeasonalPairs, String>)> = Season::ALL
        .iter()
        .map(|&s| (s, build_pairs(series, s).map_err(|e| e.to_string())))
        .collect();
    compare_seasons(&seasons, config)
}

/// As [`seasonal_tests`] for seasons already reduced to pairs.
pub fn compare_seasons(
    seasons: &[(Season, std::result::Result<SeasonalPairs, String>)],
    config: &TestConfig,
) -> Vec<SeasonComparison> {
    let mut jobs = Vec::new();
    for i in 0..seasons.len() {
        for j in i + 1..seasons.len() {
            jobs.push((i, j));
        }
    }
    jobs.into_par_iter()
        .map(|(i, j)| compare_two(&seasons[i], &seasons[j], config))
        .collect()
}

fn compare_two(
    (sa, a): &(Season, std::result::Result<SeasonalPairs, String>),
    (sb, b): &(Season, std::result::Result<SeasonalPairs, String>),
    config: &TestConfig,
) -> SeasonComparison {
    let mut out = SeasonComparison {
        first: *sa,
        second: *sb,
        n_first: a.as_ref().map_or(0, |p| p.len()),
        n_second: b.as_ref().map_or(0, |p| p.len()),
        k_n: config.k_n,
        warning: None,
        report: None,
        error: None,
    };
    let (a, b) = match (a, b) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => {
            out.error = Some(e.clone());
            return out;
        }
    };
    let n_min = a.len().min(b.len());
    let mut cfg = *config;
    cfg.margins = MarginMode::Empirical;
    cfg.calibration = Some(Calibration::Bootstrap);
    if cfg.k_n >= n_min {
        let capped = n_min.saturating_sub(1).max(1);
        out.warning = Some(format!(
            "k_n = {} capped to {capped} (smaller season has {n_min} days)",
            cfg.k_n
        ));
        cfg.k_n = capped;
        out.k_n = capped;
    }
    let run = a
        .to_sample()
        .and_then(|x| b.to_sample().map(|y| (x, y)))
        .and_then(|(x, y)| run_test(&x, &y, &cfg, None));
    match run {
        Ok(r) => out.report = Some(r),
        Err(e) => out.error = Some(e.to_string()),
    }
    out
}

/// Synthetic series whose winter (DJF) and spring (MAM) daily maxima have
/// the dependence of `winter` and `spring`; other seasons are not
/// recorded. Every recorded day is wet in a single hour (noon): one slot
/// holds the 6-minute maximum `m = 1 + u1` and the other nine share the
/// rest of the hourly total `h = 2 + 8 u2`, so the daily pairs are
/// monotone transforms of the copula draws.
pub fn synthetic_two_season_series(
    winter: &CopulaModel,
    spring: &CopulaModel,
    years: usize,
    seed: u64,
) -> Result<RainSeries> {
    let start = NaiveDate::from_ymd_opt(2000, 12, 1).expect("valid date");
    let end = NaiveDate::from_ymd_opt(2001 + years as i32, 6, 1).expect("valid date");
    let mut dates = [Vec::new(), Vec::new()];
    let mut d = start;
    while d < end {
        match Season::of(d) {
            Season::Djf if Season::year_of(d) <= 2000 + years as i32 => dates[0].push(d),
            Season::Mam if d.year() <= 2000 + years as i32 => dates[1].push(d),
            _ => {}
        }
        d += Duration::days(1);
    }
    let draws = [
        winter.sample::<f64>(dates[0].len(), RngStream::new(seed, 0))?,
        spring.sample::<f64>(dates[1].len(), RngStream::new(seed, 1))?,
    ];
    let mut days: Vec<(NaiveDate, [f64; 2])> = dates
        .iter()
        .zip(&draws)
        .flat_map(|(ds, s)| ds.iter().copied().zip(s.rows().map(|r| [r[0], r[1]])))
        .collect();
    days.sort_by_key(|(date, _)| *date);

    let noon = 12 * SLOTS_PER_HOUR;
    let mut records = Vec::with_capacity(days.len() * SLOTS_PER_DAY);
    for (date, [u1, u2]) in days {
        let m = 1.0 + u1;
        let h = 2.0 + 8.0 * u2;
        let rest = (h - m) / 9.0;
        let midnight = Utc.from_utc_datetime(&date.and_hms_opt(0, 0, 0).expect("valid time"));
        for slot in 0..SLOTS_PER_DAY {
            let depth = match slot {
                s if s == noon => m,
                s if s > noon && s < noon + SLOTS_PER_HOUR => rest,
                _ => 0.0,
            };
            records.push(RainRecord {
                time: midnight + Duration::minutes(6 * slot as i64),
                depth: Some(depth),
            });
        }
    }
    RainSeries::from_records("synthetic", records)
}
