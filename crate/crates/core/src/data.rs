//! Temperature and bloom-date ingestion, imputation, and sliding-window
//! sample construction.
//!
//! A sample is anchored on one calendar day. Its features come from the
//! `window_len` days ending at (and including) the anchor, and its label is
//! the number of days until peak bloom, clamped into the class scheme
//! `0..=k`: class `d` for a bloom `d` days away with `1 <= d <= k`, class `0`
//! for a bloom more than `k` days away. Anchors on or after the bloom day
//! carry no label and are not emitted.

use std::collections::{BTreeMap, HashMap};
use std::io::Read;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One day of temperature observations for a site, in °C.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyRecord {
    pub year: i32,
    /// 1-based day of year.
    pub doy: u32,
    pub tmax: Option<f64>,
    pub tmin: Option<f64>,
    pub tavg: Option<f64>,
}

impl DailyRecord {
    pub fn date(&self) -> Option<NaiveDate> {
        NaiveDate::from_yo_opt(self.year, self.doy)
    }
}

/// Full-flowering date for one year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BloomEvent {
    pub year: i32,
    pub bloom_doy: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSample {
    pub features: Vec<f64>,
    pub label: usize,
    pub year: i32,
    /// Last day of the window.
    pub anchor_doy: u32,
}

/// Labeled samples sharing one feature length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub samples: Vec<WindowSample>,
    /// Horizon: labels live in `0..=k`.
    pub k: usize,
    pub feature_len: usize,
    pub class_counts: BTreeMap<usize, usize>,
}

impl Dataset {
    /// Builds a dataset, validating labels and feature lengths.
    pub fn new(samples: Vec<WindowSample>, k: usize, feature_len: usize) -> Result<Self> {
        let mut class_counts = BTreeMap::new();
        for s in &samples {
            if s.features.len() != feature_len {
                return Err(Error::DimensionMismatch {
                    expected: feature_len,
                    found: s.features.len(),
                });
            }
            if s.label > k {
                return Err(Error::LabelOutOfRange {
                    label: s.label,
                    n_classes: k + 1,
                });
            }
            if s.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("sample features"));
            }
            *class_counts.entry(s.label).or_insert(0) += 1;
        }
        Ok(Dataset {
            samples,
            k,
            feature_len,
            class_counts,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Number of classes in the labeling scheme (`k + 1`), present or not.
    pub fn n_classes(&self) -> usize {
        self.k + 1
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    /// Samples whose year falls in `first..=last`.
    pub fn select_years(&self, first: i32, last: i32) -> Dataset {
        let samples = self
            .samples
            .iter()
            .filter(|s| (first..=last).contains(&s.year))
            .cloned()
            .collect();
        // Subset of a valid dataset, cannot fail.
        Dataset::new(samples, self.k, self.feature_len).expect("subset of a valid dataset")
    }
}

/// Column names of the temperature file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemperatureSchema {
    pub date: String,
    pub tmax: String,
    pub tmin: String,
    pub tavg: String,
}

impl Default for TemperatureSchema {
    fn default() -> Self {
        TemperatureSchema {
            date: "date".into(),
            tmax: "tmax_c".into(),
            tmin: "tmin_c".into(),
            tavg: "tavg_c".into(),
        }
    }
}

impl TemperatureSchema {
    fn header(&self) -> String {
        [&self.date, &self.tmax, &self.tmin, &self.tavg]
            .map(String::as_str)
            .join(",")
    }
}

/// 1-based ordinal day of a Gregorian date.
pub fn to_day_of_year(year: i32, month: u32, day: u32) -> Result<u32> {
    NaiveDate::from_ymd_opt(year, month, day)
        .map(|d| d.ordinal())
        .ok_or(Error::InvalidDate { year, month, day })
}

/// Inverse of [`to_day_of_year`]: `(month, day)` of the `doy`-th day.
pub fn from_day_of_year(year: i32, doy: u32) -> Result<(u32, u32)> {
    NaiveDate::from_yo_opt(year, doy)
        .map(|d| (d.month(), d.day()))
        .ok_or(Error::InvalidParameter(format!(
            "day {doy} does not exist in {year}"
        )))
}

fn parse_iso_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").ok()
}

fn parse_cell(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim() == name)
}

/// Reads a temperature CSV from disk. See [`read_temperature_csv`].
pub fn parse_temperature_csv(
    path: impl AsRef<Path>,
    schema: &TemperatureSchema,
) -> Result<Vec<DailyRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_temperature_csv(file, schema, path)
}

/// Parses temperature rows into records sorted by `(year, doy)`.
///
/// Rows whose date does not parse are skipped with a warning; temperature
/// cells that do not parse become absent. A row reporting `tmax < tmin` has
/// both extremes dropped.
pub fn read_temperature_csv<R: Read>(
    reader: R,
    schema: &TemperatureSchema,
    source: &Path,
) -> Result<Vec<DailyRecord>> {
    let csv_err = |e| Error::Csv {
        path: source.to_path_buf(),
        source: e,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let malformed = || Error::MalformedHeader {
        path: source.to_path_buf(),
        expected: schema.header(),
        found: headers.iter().collect::<Vec<_>>().join(","),
    };
    let idx = |name: &str| column_index(&headers, name).ok_or_else(malformed);
    let (date_i, tmax_i, tmin_i, tavg_i) = (
        idx(&schema.date)?,
        idx(&schema.tmax)?,
        idx(&schema.tmin)?,
        idx(&schema.tavg)?,
    );

    let mut by_day: BTreeMap<(i32, u32), DailyRecord> = BTreeMap::new();
    for row in rdr.records() {
        let row = row.map_err(csv_err)?;
        let line = row.position().map_or(0, |p| p.line());
        let Some(date) = row.get(date_i).and_then(parse_iso_date) else {
            log::warn!("{}: line {line}: unparseable date, row skipped", source.display());
            continue;
        };
        let cell = |i: usize| row.get(i).and_then(parse_cell);
        let (mut tmax, mut tmin) = (cell(tmax_i), cell(tmin_i));
        if let (Some(hi), Some(lo)) = (tmax, tmin) {
            if hi < lo {
                log::warn!(
                    "{}: line {line}: tmax {hi} below tmin {lo}, extremes dropped",
                    source.display()
                );
                tmax = None;
                tmin = None;
            }
        }
        let rec = DailyRecord {
            year: date.year(),
            doy: date.ordinal(),
            tmax,
            tmin,
            tavg: cell(tavg_i),
        };
        let key = (rec.year, rec.doy);
        if by_day.insert(key, rec).is_some() {
            return Err(Error::DuplicateDay {
                year: key.0,
                doy: key.1,
            });
        }
    }
    Ok(by_day.into_values().collect())
}

/// Reads a `year,bloom_date` CSV into events sorted by year.
pub fn parse_bloom_csv(path: impl AsRef<Path>) -> Result<Vec<BloomEvent>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_bloom_csv(file, path)
}

pub fn read_bloom_csv<R: Read>(reader: R, source: &Path) -> Result<Vec<BloomEvent>> {
    let csv_err = |e| Error::Csv {
        path: source.to_path_buf(),
        source: e,
    };
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let (Some(year_i), Some(date_i)) = (
        column_index(&headers, "year"),
        column_index(&headers, "bloom_date"),
    ) else {
        return Err(Error::MalformedHeader {
            path: source.to_path_buf(),
            expected: "year,bloom_date".into(),
            found: headers.iter().collect::<Vec<_>>().join(","),
        });
    };

    let mut events: BTreeMap<i32, BloomEvent> = BTreeMap::new();
    for row in rdr.records() {
        let row = row.map_err(csv_err)?;
        let line = row.position().map_or(0, |p| p.line());
        let bad = |message: String| Error::MalformedRow {
            path: source.to_path_buf(),
            line,
            message,
        };
        let year_cell = row.get(year_i).unwrap_or("").trim();
        let year: i32 = year_cell
            .parse()
            .map_err(|_| bad(format!("bad year `{year_cell}`")))?;
        let date_cell = row.get(date_i).unwrap_or("").trim();
        let date = parse_iso_date(date_cell).ok_or_else(|| bad(format!("bad date `{date_cell}`")))?;
        if date.year() != year {
            return Err(bad(format!("bloom date {date} is not in year {year}")));
        }
        let event = BloomEvent {
            year,
            bloom_doy: date.ordinal(),
        };
        if events.insert(year, event).is_some() {
            return Err(Error::DuplicateBloomYear(year));
        }
    }
    Ok(events.into_values().collect())
}

/// Fills a missing average with the mean of the day's extremes.
pub fn impute_tavg(record: &DailyRecord) -> Result<DailyRecord> {
    if record.tavg.is_some() {
        return Ok(record.clone());
    }
    match (record.tmax, record.tmin) {
        (Some(hi), Some(lo)) => Ok(DailyRecord {
            tavg: Some((hi + lo) / 2.0),
            ..record.clone()
        }),
        _ => Err(Error::Unimputable {
            year: record.year,
            doy: record.doy,
        }),
    }
}

/// Imputes every record, dropping the ones that cannot be imputed.
/// Returns the kept records and the number dropped.
pub fn impute_all(records: &[DailyRecord]) -> (Vec<DailyRecord>, usize) {
    let mut dropped = 0;
    let kept = records
        .iter()
        .filter_map(|r| match impute_tavg(r) {
            Ok(r) => Some(r),
            Err(e) => {
                log::debug!("{e}");
                dropped += 1;
                None
            }
        })
        .collect();
    (kept, dropped)
}

/// Class of an anchor day, or `None` when the anchor is on or after bloom.
pub fn label_for_anchor(anchor_doy: u32, bloom_doy: u32, k: usize) -> Option<usize> {
    let d = i64::from(bloom_doy) - i64::from(anchor_doy);
    if d <= 0 {
        None
    } else if d as u64 <= k as u64 {
        Some(d as usize)
    } else {
        Some(0)
    }
}

/// `[min, max, mean, population variance]` of a window.
pub fn stats_features(window: &[f64]) -> Result<[f64; 4]> {
    if window.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let n = window.len() as f64;
    let min = window.iter().copied().fold(f64::INFINITY, f64::min);
    let max = window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = window.iter().sum::<f64>() / n;
    let var = window.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok([min, max, mean, var])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMode {
    /// The window's daily values in chronological order.
    #[default]
    Raw,
    /// Summary statistics of the window, per channel.
    Stats,
}

/// Which daily measurements feed a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channels {
    /// Daily average only.
    #[default]
    Tavg,
    /// `(tmin, tmax)` per day, interleaved day by day.
    Extremes,
}

impl Channels {
    pub fn per_day(self) -> usize {
        match self {
            Channels::Tavg => 1,
            Channels::Extremes => 2,
        }
    }

    fn values(self, rec: &DailyRecord) -> Option<[f64; 2]> {
        match self {
            Channels::Tavg => rec.tavg.map(|v| [v, 0.0]),
            Channels::Extremes => Some([rec.tmin?, rec.tmax?]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub window_len: usize,
    pub k: usize,
    pub mode: FeatureMode,
    pub channels: Channels,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            window_len: 10,
            k: 10,
            mode: FeatureMode::Raw,
            channels: Channels::Tavg,
        }
    }
}

impl WindowConfig {
    pub fn feature_len(&self) -> usize {
        match self.mode {
            FeatureMode::Raw => self.window_len * self.channels.per_day(),
            FeatureMode::Stats => 4 * self.channels.per_day(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_len == 0 {
            return Err(Error::InvalidParameter("window_len must be at least 1".into()));
        }
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        Ok(())
    }
}

/// Date-indexed view over imputed records.
pub struct TemperatureSeries<'a> {
    by_date: HashMap<NaiveDate, &'a DailyRecord>,
}

impl<'a> TemperatureSeries<'a> {
    pub fn new(records: &'a [DailyRecord]) -> Self {
        let by_date = records
            .iter()
            .filter_map(|r| r.date().map(|d| (d, r)))
            .collect();
        TemperatureSeries { by_date }
    }

    /// Features of the window ending at `anchor`, or the dates that are
    /// missing (or lack a required channel).
    pub fn window_features(
        &self,
        anchor: NaiveDate,
        config: &WindowConfig,
    ) -> std::result::Result<Vec<f64>, Vec<NaiveDate>> {
        let per_day = config.channels.per_day();
        let mut raw = Vec::with_capacity(config.window_len * per_day);
        let mut missing = Vec::new();
        for back in (0..config.window_len as i64).rev() {
            let day = anchor - Duration::days(back);
            match self
                .by_date
                .get(&day)
                .and_then(|r| config.channels.values(r))
            {
                Some(v) => raw.extend_from_slice(&v[..per_day]),
                None => missing.push(day),
            }
        }
        if !missing.is_empty() {
            return Err(missing);
        }
        Ok(match config.mode {
            FeatureMode::Raw => raw,
            FeatureMode::Stats => (0..per_day)
                .flat_map(|ch| {
                    let series: Vec<f64> = raw.iter().skip(ch).step_by(per_day).copied().collect();
                    stats_features(&series).expect("window_len >= 1")
                })
                .collect(),
        })
    }
}

/// Result of [`build_windows`].
#[derive(Debug, Clone, PartialEq)]
pub struct Windowed {
    pub dataset: Dataset,
    /// Bloom years with no temperature records at all.
    pub skipped_years: Vec<i32>,
}

/// Emits one labeled sample per anchor day of every bloom year whose whole
/// window is present.
///
/// Windows may reach back into the previous calendar year when those days
/// are on record. Anchors are always days of the bloom year.
pub fn build_windows(
    records: &[DailyRecord],
    events: &[BloomEvent],
    config: &WindowConfig,
) -> Result<Windowed> {
    config.validate()?;
    let series = TemperatureSeries::new(records);
    let mut by_year: BTreeMap<i32, Vec<&DailyRecord>> = BTreeMap::new();
    for r in records {
        by_year.entry(r.year).or_default().push(r);
    }

    let mut events = events.to_vec();
    events.sort_by_key(|e| e.year);

    let mut samples = Vec::new();
    let mut skipped_years = Vec::new();
    for event in &events {
        let Some(days) = by_year.get_mut(&event.year) else {
            log::warn!("bloom year {} has no temperature records, skipped", event.year);
            skipped_years.push(event.year);
            continue;
        };
        days.sort_by_key(|r| r.doy);
        for rec in days.iter() {
            let Some(label) = label_for_anchor(rec.doy, event.bloom_doy, config.k) else {
                continue;
            };
            let Some(anchor) = rec.date() else { continue };
            if let Ok(features) = series.window_features(anchor, config) {
                samples.push(WindowSample {
                    features,
                    label,
                    year: event.year,
                    anchor_doy: rec.doy,
                });
            }
        }
    }
    let dataset = Dataset::new(samples, config.k, config.feature_len())?;
    Ok(Windowed {
        dataset,
        skipped_years,
    })
}
