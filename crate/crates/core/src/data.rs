//! Daily and monthly series, CSV ingestion, and alignment into the
//! mixed-frequency panel consumed by the model.
//!
//! A period is a calendar month. Each period of the panel carries the
//! daily returns observed in it and the `K` most recent monthly regressor
//! values strictly before it (index 0 is lag 1).

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("duplicate date {0}")]
    DuplicateDate(NaiveDate),
    #[error("duplicate month {0}")]
    DuplicateMonth(YearMonth),
    #[error("non-positive price {value} on {date}")]
    NonPositivePrice { date: NaiveDate, value: f64 },
    #[error("non-finite value on {0}")]
    NonFinite(String),
    #[error("expected a {expected} series, got {actual}")]
    WrongKind { expected: SeriesKind, actual: SeriesKind },
    #[error("series too short: need at least {needed} observations, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("month {0} has no trading days inside the sample")]
    EmptyPeriod(YearMonth),
    #[error("insufficient lag history: first usable month is {first_usable}")]
    InsufficientLagHistory { first_usable: YearMonth },
    #[error("regressor has no value for {0}")]
    RegressorGap(YearMonth),
    #[error("number of lags must be at least 1")]
    ZeroLags,
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Calendar month, ordered chronologically, rendered as `YYYY-MM`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    year: i32,
    month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Option<Self> {
        (1..=12).contains(&month).then_some(Self { year, month })
    }

    pub fn of_date(date: NaiveDate) -> Self {
        Self { year: date.year(), month: date.month() }
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn month(self) -> u32 {
        self.month
    }

    /// Months since year 0, used for gap arithmetic.
    pub fn ordinal(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    pub fn from_ordinal(ord: i64) -> Self {
        Self { year: ord.div_euclid(12) as i32, month: (ord.rem_euclid(12) + 1) as u32 }
    }

    /// Shifts by `n` months (negative moves back).
    pub fn offset(self, n: i64) -> Self {
        Self::from_ordinal(self.ordinal() + n)
    }

    pub fn first_day(self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.year, self.month, 1).expect("valid month")
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (y, m) = s.split_once('-').ok_or_else(|| format!("`{s}` is not YYYY-MM"))?;
        let year = y.parse::<i32>().map_err(|_| format!("`{s}` is not YYYY-MM"))?;
        let month = m.parse::<u32>().map_err(|_| format!("`{s}` is not YYYY-MM"))?;
        if y.len() != 4 || m.len() != 2 {
            return Err(format!("`{s}` is not YYYY-MM"));
        }
        YearMonth::new(year, month).ok_or_else(|| format!("month out of range in `{s}`"))
    }
}

impl Serialize for YearMonth {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for YearMonth {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Inclusive span of calendar months.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonthSpan {
    pub start: YearMonth,
    pub end: YearMonth,
}

impl MonthSpan {
    pub fn new(start: YearMonth, end: YearMonth) -> Self {
        Self { start, end }
    }

    pub fn contains(&self, m: YearMonth) -> bool {
        self.start <= m && m <= self.end
    }

    pub fn is_empty(&self) -> bool {
        self.end < self.start
    }

    pub fn len(&self) -> usize {
        (self.end.ordinal() - self.start.ordinal() + 1).max(0) as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    Price,
    LogReturn,
}

impl fmt::Display for SeriesKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SeriesKind::Price => "price",
            SeriesKind::LogReturn => "log_return",
        })
    }
}

/// Dated daily observations, strictly increasing in date.
#[derive(Clone, Debug, PartialEq)]
pub struct DailySeries<F> {
    obs: Vec<(NaiveDate, F)>,
    kind: SeriesKind,
}

impl<F: Scalar> DailySeries<F> {
    /// Sorts by date and validates the series invariants.
    pub fn new(mut obs: Vec<(NaiveDate, F)>, kind: SeriesKind) -> Result<Self, DataError> {
        obs.sort_by_key(|&(d, _)| d);
        for w in obs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(DataError::DuplicateDate(w[0].0));
            }
        }
        for &(d, v) in &obs {
            if !v.is_finite() {
                return Err(DataError::NonFinite(d.to_string()));
            }
            if kind == SeriesKind::Price && v <= F::zero() {
                return Err(DataError::NonPositivePrice { date: d, value: v.as_f64() });
            }
        }
        if kind == SeriesKind::Price && obs.len() < 2 {
            return Err(DataError::TooShort { needed: 2, got: obs.len() });
        }
        Ok(Self { obs, kind })
    }

    pub fn kind(&self) -> SeriesKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    pub fn observations(&self) -> &[(NaiveDate, F)] {
        &self.obs
    }

    pub fn values(&self) -> Vec<F> {
        self.obs.iter().map(|&(_, v)| v).collect()
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.obs.iter().map(|&(d, _)| d).collect()
    }

    /// Observations whose month falls inside `span`.
    pub fn restrict(&self, span: MonthSpan) -> Self {
        Self {
            obs: self
                .obs
                .iter()
                .copied()
                .filter(|&(d, _)| span.contains(YearMonth::of_date(d)))
                .collect(),
            kind: self.kind,
        }
    }
}

/// Monthly observations with no gaps between the first and last month.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowFrequencySeries<F> {
    obs: Vec<(YearMonth, F)>,
    label: String,
}

impl<F: Scalar> LowFrequencySeries<F> {
    pub fn new(
        mut obs: Vec<(YearMonth, F)>,
        label: impl Into<String>,
    ) -> Result<Self, DataError> {
        obs.sort_by_key(|&(m, _)| m);
        for w in obs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(DataError::DuplicateMonth(w[0].0));
            }
            if w[1].0 != w[0].0.offset(1) {
                return Err(DataError::RegressorGap(w[0].0.offset(1)));
            }
        }
        if let Some(&(m, _)) = obs.iter().find(|(_, v)| !v.is_finite()) {
            return Err(DataError::NonFinite(m.to_string()));
        }
        Ok(Self { obs, label: label.into() })
    }

    /// Series of consecutive months starting at `start`.
    pub fn from_values(start: YearMonth, values: &[F], label: impl Into<String>) -> Result<Self, DataError> {
        let obs = values.iter().enumerate().map(|(i, &v)| (start.offset(i as i64), v)).collect();
        Self::new(obs, label)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    pub fn observations(&self) -> &[(YearMonth, F)] {
        &self.obs
    }

    pub fn values(&self) -> Vec<F> {
        self.obs.iter().map(|&(_, v)| v).collect()
    }

    pub fn first_month(&self) -> Option<YearMonth> {
        self.obs.first().map(|&(m, _)| m)
    }

    pub fn last_month(&self) -> Option<YearMonth> {
        self.obs.last().map(|&(m, _)| m)
    }

    pub fn get(&self, month: YearMonth) -> Option<F> {
        let first = self.first_month()?;
        let idx = month.ordinal() - first.ordinal();
        if idx < 0 {
            return None;
        }
        self.obs.get(idx as usize).map(|&(_, v)| v)
    }

    /// Z-scored copy (sample standard deviation). Off by default in the model.
    pub fn standardized(&self) -> Self {
        let vals = self.values();
        if vals.len() < 2 {
            return self.clone();
        }
        let m = crate::scalar::mean(&vals);
        let sd = crate::scalar::sample_variance(&vals).sqrt();
        let sd = if sd > F::zero() { sd } else { F::one() };
        Self {
            obs: self.obs.iter().map(|&(mo, v)| (mo, (v - m) / sd)).collect(),
            label: self.label.clone(),
        }
    }
}

/// One calendar month of daily returns.
#[derive(Clone, Debug, PartialEq)]
pub struct Period<F> {
    pub id: YearMonth,
    pub dates: Vec<NaiveDate>,
    pub returns: Vec<F>,
}

impl<F> Period<F> {
    pub fn n_days(&self) -> usize {
        self.returns.len()
    }
}

/// Daily returns grouped by month with the lagged regressor values of each month.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedPanel<F> {
    periods: Vec<Period<F>>,
    lags: Vec<Vec<F>>,
    regressor: String,
    n_lags: usize,
    excluded: usize,
}

impl<F: Scalar> MixedPanel<F> {
    /// Assembles a panel from pre-aligned parts; `lags[t][k-1]` is the value at lag `k`.
    pub fn from_parts(
        periods: Vec<Period<F>>,
        lags: Vec<Vec<F>>,
        regressor: impl Into<String>,
    ) -> Result<Self, DataError> {
        let n_lags = lags.first().map_or(0, Vec::len);
        if n_lags == 0 {
            return Err(DataError::ZeroLags);
        }
        if lags.len() != periods.len() || lags.iter().any(|l| l.len() != n_lags) {
            return Err(DataError::MalformedRow {
                line: 0,
                reason: "lag matrix shape does not match periods".into(),
            });
        }
        if let Some(p) = periods.iter().find(|p| p.returns.is_empty()) {
            return Err(DataError::EmptyPeriod(p.id));
        }
        Ok(Self { periods, lags, regressor: regressor.into(), n_lags, excluded: 0 })
    }

    pub fn periods(&self) -> &[Period<F>] {
        &self.periods
    }

    pub fn lags(&self) -> &[Vec<F>] {
        &self.lags
    }

    pub fn regressor(&self) -> &str {
        &self.regressor
    }

    pub fn n_lags(&self) -> usize {
        self.n_lags
    }

    /// Leading months dropped for lacking a full lag history.
    pub fn excluded(&self) -> usize {
        self.excluded
    }

    pub fn n_periods(&self) -> usize {
        self.periods.len()
    }

    pub fn n_days(&self) -> usize {
        self.periods.iter().map(Period::n_days).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.periods.is_empty()
    }

    /// All returns in chronological order.
    pub fn returns(&self) -> Vec<F> {
        self.periods.iter().flat_map(|p| p.returns.iter().copied()).collect()
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.periods.iter().flat_map(|p| p.dates.iter().copied()).collect()
    }

    pub fn span(&self) -> Option<MonthSpan> {
        Some(MonthSpan::new(self.periods.first()?.id, self.periods.last()?.id))
    }

    /// Sub-panel of the months inside `span`.
    pub fn restrict(&self, span: MonthSpan) -> Self {
        let keep: Vec<usize> =
            (0..self.periods.len()).filter(|&i| span.contains(self.periods[i].id)).collect();
        Self {
            periods: keep.iter().map(|&i| self.periods[i].clone()).collect(),
            lags: keep.iter().map(|&i| self.lags[i].clone()).collect(),
            regressor: self.regressor.clone(),
            n_lags: self.n_lags,
            excluded: self.excluded,
        }
    }

    /// Copy with every month label shifted by `months`; values untouched.
    pub fn relabeled(&self, months: i64) -> Self {
        let mut out = self.clone();
        for p in &mut out.periods {
            p.id = p.id.offset(months);
        }
        out
    }

    /// Copy with the returns replaced (same day layout).
    pub fn with_returns(&self, returns: &[F]) -> Self {
        assert_eq!(returns.len(), self.n_days(), "return count must match panel days");
        let mut out = self.clone();
        let mut it = returns.iter().copied();
        for p in &mut out.periods {
            for r in &mut p.returns {
                *r = it.next().expect("length checked");
            }
        }
        out
    }
}

/// Which columns of a daily CSV hold the date and the value.
#[derive(Clone, Debug, Default)]
pub struct ColumnSchema {
    /// Header name of the date column; first column when `None`.
    pub date: Option<String>,
    /// Header name of the value column; second column when `None`.
    pub value: Option<String>,
}

fn column_index(
    headers: &csv::StringRecord,
    name: &Option<String>,
    default: usize,
) -> Result<usize, DataError> {
    match name {
        Some(n) => headers
            .iter()
            .position(|h| h.trim() == n)
            .ok_or_else(|| DataError::MissingColumn(n.clone())),
        None if default < headers.len() => Ok(default),
        None => Err(DataError::MalformedRow {
            line: 1,
            reason: format!("header has {} columns, expected at least 2", headers.len()),
        }),
    }
}

fn csv_error(e: csv::Error) -> DataError {
    let line = e.position().map_or(0, |p| p.line());
    DataError::MalformedRow { line, reason: e.to_string() }
}

fn parse_value<F: Scalar>(cell: &str, line: u64) -> Result<F, DataError> {
    let v: f64 = cell.trim().parse().map_err(|_| DataError::MalformedRow {
        line,
        reason: format!("`{cell}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(DataError::MalformedRow { line, reason: format!("`{cell}` is not finite") });
    }
    Ok(F::of(v))
}

/// Parses a daily CSV (header row, ISO-8601 dates) from any reader.
pub fn read_daily_series<F: Scalar, R: Read>(
    reader: R,
    schema: &ColumnSchema,
    kind: SeriesKind,
) -> Result<DailySeries<F>, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    if headers.is_empty() || headers.iter().all(|h| h.trim().is_empty()) {
        return Err(DataError::MalformedRow { line: 1, reason: "missing header row".into() });
    }
    let di = column_index(&headers, &schema.date, 0)?;
    let vi = column_index(&headers, &schema.value, 1)?;
    let mut obs = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line());
        let (Some(d), Some(v)) = (rec.get(di), rec.get(vi)) else {
            return Err(DataError::MalformedRow { line, reason: "missing column".into() });
        };
        let date = NaiveDate::parse_from_str(d.trim(), "%Y-%m-%d").map_err(|_| {
            DataError::MalformedRow { line, reason: format!("`{d}` is not an ISO-8601 date") }
        })?;
        obs.push((date, parse_value(v, line)?));
    }
    DailySeries::new(obs, kind)
}

/// Loads a daily CSV file; see [`read_daily_series`].
pub fn load_daily_series<F: Scalar>(
    path: impl AsRef<Path>,
    schema: &ColumnSchema,
    kind: SeriesKind,
) -> Result<DailySeries<F>, DataError> {
    read_daily_series(std::fs::File::open(path)?, schema, kind)
}

/// Parses a monthly CSV with header `month,value` and `YYYY-MM` months.
pub fn read_monthly_series<F: Scalar, R: Read>(
    reader: R,
    label: &str,
) -> Result<LowFrequencySeries<F>, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    if headers.len() < 2 {
        return Err(DataError::MalformedRow { line: 1, reason: "expected header `month,value`".into() });
    }
    let mut obs = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line());
        let (Some(m), Some(v)) = (rec.get(0), rec.get(1)) else {
            return Err(DataError::MalformedRow { line, reason: "missing column".into() });
        };
        let month = m.parse::<YearMonth>().map_err(|reason| DataError::MalformedRow { line, reason })?;
        obs.push((month, parse_value(v, line)?));
    }
    LowFrequencySeries::new(obs, label)
}

pub fn load_monthly_series<F: Scalar>(
    path: impl AsRef<Path>,
    label: &str,
) -> Result<LowFrequencySeries<F>, DataError> {
    read_monthly_series(std::fs::File::open(path)?, label)
}

/// Writes `date,value` rows.
pub fn write_daily_csv<F: Scalar, W: std::io::Write>(
    series: &DailySeries<F>,
    out: W,
) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "value"]).map_err(csv_error)?;
    for (d, v) in series.observations() {
        w.write_record([d.to_string(), format!("{v}")]).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `month,value` rows.
pub fn write_monthly_csv<F: Scalar, W: std::io::Write>(
    series: &LowFrequencySeries<F>,
    out: W,
) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["month", "value"]).map_err(csv_error)?;
    for (m, v) in series.observations() {
        w.write_record([m.to_string(), format!("{v}")]).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// `r_i = ln p_i - ln p_{i-1}`, dated at the later day of each pair.
pub fn compute_log_returns<F: Scalar>(series: &DailySeries<F>) -> Result<DailySeries<F>, DataError> {
    if series.kind() != SeriesKind::Price {
        return Err(DataError::WrongKind { expected: SeriesKind::Price, actual: series.kind() });
    }
    let obs = series
        .observations()
        .windows(2)
        .map(|w| (w[1].0, w[1].1.ln() - w[0].1.ln()))
        .collect();
    DailySeries::new(obs, SeriesKind::LogReturn)
}

/// Groups daily observations into consecutive calendar months.
///
/// A month between the first and last observed month with no observation
/// is an error, since it would break the lag alignment downstream.
pub fn group_by_month<F: Scalar>(series: &DailySeries<F>) -> Result<Vec<Period<F>>, DataError> {
    let mut map: BTreeMap<YearMonth, Period<F>> = BTreeMap::new();
    for &(d, v) in series.observations() {
        let id = YearMonth::of_date(d);
        let p = map.entry(id).or_insert_with(|| Period { id, dates: vec![], returns: vec![] });
        p.dates.push(d);
        p.returns.push(v);
    }
    let periods: Vec<Period<F>> = map.into_values().collect();
    for w in periods.windows(2) {
        if w[1].id != w[0].id.offset(1) {
            return Err(DataError::EmptyPeriod(w[0].id.offset(1)));
        }
    }
    Ok(periods)
}

/// Monthly realized variance `RV_t = sum_i r_{i,t}^2`.
pub fn realized_volatility<F: Scalar>(periods: &[Period<F>]) -> Result<LowFrequencySeries<F>, DataError> {
    let mut obs = Vec::with_capacity(periods.len());
    for p in periods {
        if p.returns.is_empty() {
            return Err(DataError::EmptyPeriod(p.id));
        }
        obs.push((p.id, p.returns.iter().map(|&r| r * r).sum()));
    }
    LowFrequencySeries::new(obs, "RV")
}

/// [`realized_volatility`] of a daily return series grouped by month.
pub fn realized_volatility_of<F: Scalar>(
    returns: &DailySeries<F>,
) -> Result<LowFrequencySeries<F>, DataError> {
    if returns.kind() != SeriesKind::LogReturn {
        return Err(DataError::WrongKind { expected: SeriesKind::LogReturn, actual: returns.kind() });
    }
    realized_volatility(&group_by_month(returns)?)
}

/// Aligns daily returns with `n_lags` lagged monthly regressor values per month.
///
/// Leading months without a full lag history are dropped and counted in
/// [`MixedPanel::excluded`]. Every retained month `t` gets the regressor
/// values for `t-1, ..., t-K`.
pub fn align_panel<F: Scalar>(
    daily: &DailySeries<F>,
    regressor: &LowFrequencySeries<F>,
    n_lags: usize,
) -> Result<MixedPanel<F>, DataError> {
    if n_lags == 0 {
        return Err(DataError::ZeroLags);
    }
    if daily.kind() != SeriesKind::LogReturn {
        return Err(DataError::WrongKind { expected: SeriesKind::LogReturn, actual: daily.kind() });
    }
    if daily.is_empty() {
        return Err(DataError::TooShort { needed: 1, got: 0 });
    }
    let periods = group_by_month(daily)?;
    let Some(reg_first) = regressor.first_month() else {
        return Err(DataError::InsufficientLagHistory {
            first_usable: periods[0].id.offset(n_lags as i64),
        });
    };
    let first_usable = reg_first.offset(n_lags as i64);
    let mut excluded = 0;
    let mut kept = Vec::new();
    let mut lags = Vec::new();
    for p in periods {
        if p.id < first_usable {
            excluded += 1;
            continue;
        }
        let row = (1..=n_lags as i64)
            .map(|k| {
                let m = p.id.offset(-k);
                regressor.get(m).ok_or(DataError::RegressorGap(m))
            })
            .collect::<Result<Vec<F>, _>>()?;
        kept.push(p);
        lags.push(row);
    }
    if kept.is_empty() {
        return Err(DataError::InsufficientLagHistory { first_usable });
    }
    Ok(MixedPanel {
        periods: kept,
        lags,
        regressor: regressor.label().to_string(),
        n_lags,
        excluded,
    })
}
