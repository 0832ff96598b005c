//! One-step-ahead variance forecasts with fixed parameters, the four loss
//! functions, and the estimation-window / out-of-sample protocol.
//!
//! The realized "actual" variance of day `d` is proxied by `(r_d - mu)^2`.
//! RMAE and RMAD are square roots of mean absolute errors, not plain MAEs.

use std::fmt::Write as _;
use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{
    align_panel, realized_volatility_of, DailySeries, DataError, LowFrequencySeries, MixedPanel, MonthSpan, YearMonth,
};
use crate::estimate::{fit, EstimateError, FitOptions, FitResult};
use crate::model::ModelError;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum ForecastError {
    #[error("forecast range starts at {range_start}, before the fit window start {fit_start}")]
    RangeBeforeFitWindow { range_start: YearMonth, fit_start: YearMonth },
    #[error("insufficient lag history: panel starts at {panel_start}, forecast range at {range_start}")]
    InsufficientLagHistory { panel_start: YearMonth, range_start: YearMonth },
    #[error("no trading days in forecast range {0}..{1}")]
    EmptyRange(YearMonth, YearMonth),
    #[error("empty forecast series")]
    EmptySeries,
    #[error("estimation window {0}..{1} contains no usable months")]
    EmptyWindow(YearMonth, YearMonth),
    #[error("malformed forecast CSV at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastPoint<F> {
    pub date: NaiveDate,
    /// Variance predicted for `date` from information through the previous day.
    pub predicted_variance: F,
    /// Squared demeaned return realized on `date`.
    pub actual_proxy: F,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ForecastSeries<F> {
    pub points: Vec<ForecastPoint<F>>,
}

impl<F: Scalar> ForecastSeries<F> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), ForecastError> {
        let mut w = csv::Writer::from_writer(out);
        let to_io = |e: csv::Error| ForecastError::Io(std::io::Error::other(e));
        w.write_record(["date", "predicted_variance", "actual_proxy"]).map_err(to_io)?;
        for p in &self.points {
            w.write_record([p.date.to_string(), format!("{}", p.predicted_variance), format!("{}", p.actual_proxy)])
                .map_err(to_io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, ForecastError> {
        let mut rdr = csv::Reader::from_reader(input);
        let mut points = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| ForecastError::MalformedRow {
                line: e.position().map_or(0, |p| p.line()),
                reason: e.to_string(),
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            let bad = |reason: String| ForecastError::MalformedRow { line, reason };
            if rec.len() < 3 {
                return Err(bad("expected date,predicted_variance,actual_proxy".into()));
            }
            let date = NaiveDate::parse_from_str(rec[0].trim(), "%Y-%m-%d").map_err(|e| bad(e.to_string()))?;
            let num = |s: &str| s.trim().parse::<f64>().map(F::of).map_err(|e| bad(e.to_string()));
            let predicted_variance = num(&rec[1])?;
            let actual_proxy = num(&rec[2])?;
            if !(predicted_variance > F::zero()) || !(actual_proxy >= F::zero()) {
                return Err(bad("variances must be positive (predicted) and non-negative (actual)".into()));
            }
            points.push(ForecastPoint { date, predicted_variance, actual_proxy });
        }
        if points.windows(2).any(|w| w[1].date <= w[0].date) {
            return Err(ForecastError::MalformedRow { line: 0, reason: "dates must be strictly increasing".into() });
        }
        Ok(Self { points })
    }
}

/// One-step-ahead variance forecasts for the days of `range`, with the
/// parameters of `fit` held fixed.
///
/// The short-run recursion is run over the whole `panel` from its first
/// day, so months of `panel` before `range` act as warm-up.
pub fn forecast_one_step<F: Scalar>(
    fit: &FitResult<F>,
    panel: &MixedPanel<F>,
    range: MonthSpan,
) -> Result<ForecastSeries<F>, ForecastError> {
    if range.start < fit.window.start {
        return Err(ForecastError::RangeBeforeFitWindow { range_start: range.start, fit_start: fit.window.start });
    }
    let Some(span) = panel.span() else {
        return Err(ForecastError::EmptyRange(range.start, range.end));
    };
    if range.start < span.start {
        return Err(ForecastError::InsufficientLagHistory { panel_start: span.start, range_start: range.start });
    }
    let path = fit.model().conditional_variance_path(&fit.params, panel)?;
    let mu = fit.params.mu;
    let mut points = Vec::new();
    let mut day = 0;
    for p in panel.periods() {
        for (&date, &r) in p.dates.iter().zip(&p.returns) {
            if range.contains(p.id) {
                points.push(ForecastPoint {
                    date,
                    predicted_variance: path.variance[day],
                    actual_proxy: (r - mu) * (r - mu),
                });
            }
            day += 1;
        }
    }
    if points.is_empty() {
        return Err(ForecastError::EmptyRange(range.start, range.end));
    }
    Ok(ForecastSeries { points })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sample {
    FullSample,
    InSample,
    OutOfSample,
}

impl Sample {
    pub fn as_str(self) -> &'static str {
        match self {
            Sample::FullSample => "full_sample",
            Sample::InSample => "in_sample",
            Sample::OutOfSample => "out_of_sample",
        }
    }
}

impl std::str::FromStr for Sample {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full_sample" => Ok(Sample::FullSample),
            "in_sample" => Ok(Sample::InSample),
            "out_of_sample" => Ok(Sample::OutOfSample),
            _ => Err(format!("unknown sample `{s}` (full_sample, in_sample, out_of_sample)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossReport<F> {
    pub sample: Sample,
    pub rmse: F,
    pub rmsd: F,
    pub rmae: F,
    pub rmad: F,
    #[serde(rename = "T")]
    pub t: usize,
}

impl<F: Scalar> LossReport<F> {
    pub fn csv_header() -> &'static str {
        "sample,rmse,rmsd,rmae,rmad,T"
    }

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{},{},{}", self.sample.as_str(), self.rmse, self.rmsd, self.rmae, self.rmad, self.t)
    }
}

/// The four losses between predicted and actual daily variance.
pub fn evaluate<F: Scalar>(fc: &ForecastSeries<F>, sample: Sample) -> Result<LossReport<F>, ForecastError> {
    if fc.is_empty() {
        return Err(ForecastError::EmptySeries);
    }
    let t = F::of_usize(fc.len());
    let (mut se, mut ae, mut sd, mut ad) = (F::zero(), F::zero(), F::zero(), F::zero());
    for p in &fc.points {
        let dv = p.actual_proxy - p.predicted_variance;
        let ds = p.actual_proxy.sqrt() - p.predicted_variance.sqrt();
        se = se + dv * dv;
        ae = ae + dv.abs();
        sd = sd + ds * ds;
        ad = ad + ds.abs();
    }
    Ok(LossReport {
        sample,
        rmse: (se / t).sqrt(),
        rmsd: (sd / t).sqrt(),
        rmae: (ae / t).sqrt(),
        rmad: (ad / t).sqrt(),
        t: fc.len(),
    })
}

/// Source of the monthly regressor driving the long-run component.
#[derive(Clone, Debug)]
pub enum RegressorSource<F> {
    /// Monthly realized variance of the daily returns themselves.
    RealizedVolatility,
    Series(LowFrequencySeries<F>),
}

#[derive(Clone, Debug)]
pub struct WindowConfig<F> {
    /// Data range used for the full-sample fit; skipped when `None`.
    pub full_sample: Option<MonthSpan>,
    pub estimation: MonthSpan,
    /// Forecast span with parameters fixed from the estimation window.
    pub out_of_sample: Option<MonthSpan>,
    pub n_lags: usize,
    pub fit: FitOptions<F>,
}

impl<F: Scalar> WindowConfig<F> {
    /// Full sample 2008-01..2015-09, estimation 2010-01..2014-09,
    /// out-of-sample 2014-10..2015-09, 24 monthly lags.
    pub fn paper_2008_2015() -> Self {
        let ym = |y, m| YearMonth::new(y, m).expect("valid month");
        Self {
            full_sample: Some(MonthSpan::new(ym(2008, 1), ym(2015, 9))),
            estimation: MonthSpan::new(ym(2010, 1), ym(2014, 9)),
            out_of_sample: Some(MonthSpan::new(ym(2014, 10), ym(2015, 9))),
            n_lags: 24,
            fit: FitOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ForecastError> {
        if let Some(oos) = self.out_of_sample {
            if !oos.is_empty() && oos.start < self.estimation.start {
                return Err(ForecastError::RangeBeforeFitWindow {
                    range_start: oos.start,
                    fit_start: self.estimation.start,
                });
            }
        }
        if self.estimation.is_empty() {
            return Err(ForecastError::EmptyWindow(self.estimation.start, self.estimation.end));
        }
        if self.n_lags == 0 {
            return Err(DataError::ZeroLags.into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport<F> {
    pub regressor: String,
    pub n_lags: usize,
    pub estimation: MonthSpan,
    pub out_of_sample: Option<MonthSpan>,
    pub in_sample_fit: FitResult<F>,
    pub full_sample_fit: Option<FitResult<F>>,
    pub losses: Vec<LossReport<F>>,
    #[serde(skip)]
    pub forecast: ForecastSeries<F>,
}

impl<F: Scalar> ProtocolReport<F> {
    pub fn loss(&self, sample: Sample) -> Option<&LossReport<F>> {
        self.losses.iter().find(|l| l.sample == sample)
    }

    pub fn losses_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<16}{:>12}{:>12}{:>12}{:>12}{:>8}", self.regressor, "RMSE", "RMSD", "RMAE", "RMAD", "T");
        for l in &self.losses {
            let _ = writeln!(
                s,
                "{:<16}{:>12.4e}{:>12.4e}{:>12.4e}{:>12.4e}{:>8}",
                l.sample.as_str(),
                l.rmse.as_f64(),
                l.rmsd.as_f64(),
                l.rmae.as_f64(),
                l.rmad.as_f64(),
                l.t
            );
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if let Some(f) = &self.full_sample_fit {
            let _ = writeln!(s, "[full sample]\n{}", f.to_text());
        }
        let _ = writeln!(s, "[in-sample]\n{}", self.in_sample_fit.to_text());
        s.push_str(&self.losses_text());
        s
    }
}

/// Aligns, fits on the estimation window, forecasts the out-of-sample span
/// with the estimated parameters held fixed, and evaluates every sample.
pub fn run_protocol<F: Scalar>(
    daily: &DailySeries<F>,
    regressor: &RegressorSource<F>,
    cfg: &WindowConfig<F>,
) -> Result<ProtocolReport<F>, ForecastError> {
    cfg.validate()?;
    let daily = match cfg.full_sample {
        Some(span) => daily.restrict(span),
        None => daily.clone(),
    };
    let reg = match regressor {
        RegressorSource::RealizedVolatility => realized_volatility_of(&daily)?,
        RegressorSource::Series(s) => s.clone(),
    };
    let panel = align_panel(&daily, &reg, cfg.n_lags)?;
    let est_panel = panel.restrict(cfg.estimation);
    if est_panel.is_empty() {
        return Err(ForecastError::EmptyWindow(cfg.estimation.start, cfg.estimation.end));
    }

    let (in_fit, full_fit) = std::thread::scope(|s| {
        let full = cfg.full_sample.map(|_| s.spawn(|| fit(&panel, &cfg.fit)));
        let in_fit = fit(&est_panel, &cfg.fit);
        let full = full.map(|h| h.join().expect("fit thread panicked"));
        (in_fit, full)
    });
    let in_fit = in_fit?;
    let full_fit = full_fit.transpose()?;

    let mut losses = Vec::new();
    if let Some(f) = &full_fit {
        let span = panel.span().expect("non-empty panel");
        losses.push(evaluate(&forecast_one_step(f, &panel, span)?, Sample::FullSample)?);
    }
    let est_span = est_panel.span().expect("non-empty panel");
    losses.push(evaluate(&forecast_one_step(&in_fit, &est_panel, est_span)?, Sample::InSample)?);

    let mut forecast = ForecastSeries::default();
    let oos = cfg.out_of_sample.filter(|s| !s.is_empty());
    if let Some(oos) = oos {
        let first = panel.span().expect("non-empty panel").start;
        let history = panel.restrict(MonthSpan::new(first, oos.end));
        forecast = forecast_one_step(&in_fit, &history, oos)?;
        losses.push(evaluate(&forecast, Sample::OutOfSample)?);
    }
    Ok(ProtocolReport {
        regressor: reg.label().to_string(),
        n_lags: cfg.n_lags,
        estimation: cfg.estimation,
        out_of_sample: oos,
        in_sample_fit: in_fit,
        full_sample_fit: full_fit,
        losses,
        forecast,
    })
}

/// Side-by-side losses of several protocol runs on the same returns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison<F> {
    pub sample: Sample,
    pub rows: Vec<(String, LossReport<F>)>,
    /// Regressor with the lowest value of each loss, in the order RMSE, RMSD, RMAE, RMAD.
    pub best: [String; 4],
}

impl<F: Scalar> Comparison<F> {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} losses", self.sample.as_str());
        let _ = writeln!(s, "{:<16}{:>12}{:>12}{:>12}{:>12}", "regressor", "RMSE", "RMSD", "RMAE", "RMAD");
        for (name, l) in &self.rows {
            let _ = writeln!(
                s,
                "{:<16}{:>12.4e}{:>12.4e}{:>12.4e}{:>12.4e}",
                name,
                l.rmse.as_f64(),
                l.rmsd.as_f64(),
                l.rmae.as_f64(),
                l.rmad.as_f64()
            );
        }
        let _ = writeln!(s, "{:<16}{:>12}{:>12}{:>12}{:>12}", "lowest", self.best[0], self.best[1], self.best[2], self.best[3]);
        s
    }
}

/// Compares out-of-sample losses (in-sample when a run has none).
pub fn compare<F: Scalar>(reports: &[ProtocolReport<F>]) -> Option<Comparison<F>> {
    let all_oos = reports.iter().all(|r| r.loss(Sample::OutOfSample).is_some());
    let sample = if all_oos { Sample::OutOfSample } else { Sample::InSample };
    let rows: Vec<(String, LossReport<F>)> =
        reports.iter().map(|r| Some((r.regressor.clone(), r.loss(sample)?.clone()))).collect::<Option<_>>()?;
    if rows.is_empty() {
        return None;
    }
    let argmin = |key: fn(&LossReport<F>) -> F| {
        rows.iter()
            .min_by(|a, b| key(&a.1).partial_cmp(&key(&b.1)).unwrap_or(std::cmp::Ordering::Equal))
            .map(|(n, _)| n.clone())
            .expect("non-empty")
    };
    let best = [argmin(|l| l.rmse), argmin(|l| l.rmsd), argmin(|l| l.rmae), argmin(|l| l.rmad)];
    Some(Comparison { sample, rows, best })
}
