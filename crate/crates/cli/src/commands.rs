use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use gmidas::data::{load_daily_series, load_monthly_series, write_daily_csv, write_monthly_csv};
use gmidas::estimate::FitOptions;
use gmidas::index::load_index_panel;
use gmidas::model::synthetic_regressor;
use gmidas::optim::NelderMeadOptions;
use gmidas::stats::default_adf_lags;
use gmidas::{
    align_panel, beta_weights, build_global_index, compare, compute_log_returns, describe, evaluate, fit,
    forecast_one_step, jarque_bera, adf_test, realized_volatility_of, run_protocol, simulate, AdfSpec, ColumnSchema,
    DailySeries, FitResult, ForecastSeries, LowFrequencySeries, MonthSpan, ParameterSet, ProtocolReport,
    RegressorSource, Sample, Scaling, SeriesKind, TauLink, WindowConfig, YearMonth,
};
use serde::Serialize;

use crate::config::{Command, Format, Settings};
use crate::CliError;

pub const PRESET: &str = "paper-2008-2015";
const DEFAULT_K: usize = 24;

pub fn run(cmd: Command, s: &Settings) -> Result<(), CliError> {
    match cmd {
        Command::Stats => stats(s),
        Command::Weights => weights(s),
        Command::Fit => fit_cmd(s),
        Command::Forecast => forecast(s),
        Command::Evaluate => evaluate_cmd(s),
        Command::Protocol => protocol(s),
        Command::Compare => compare_cmd(s),
        Command::Simulate => simulate_cmd(s),
        Command::BuildIndex => build_index(s),
    }
}

/// Writes `bytes` to a temporary file next to `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::config(format!("cannot write {}: {}", path.display(), e.error)))?;
    Ok(())
}

fn emit<T: Serialize>(s: &Settings, report: &T, text: impl FnOnce() -> String) -> Result<(), CliError> {
    let body = match s.format.unwrap_or_default() {
        Format::Json => {
            let mut j = serde_json::to_string_pretty(report).map_err(|e| CliError::new(1, e.to_string()))?;
            j.push('\n');
            j
        }
        Format::Text => text(),
    };
    match &s.output {
        Some(p) => write_atomic(p, body.as_bytes()),
        None => {
            std::io::stdout().write_all(body.as_bytes())?;
            Ok(())
        }
    }
}

fn required<'a, T>(v: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
    v.as_ref().ok_or_else(|| CliError::config(format!("missing required setting `{name}`")))
}

fn load_returns(s: &Settings) -> Result<DailySeries<f64>, CliError> {
    let path = required(&s.daily, "daily")?;
    let kind = match s.kind.as_deref().unwrap_or("price") {
        "price" => SeriesKind::Price,
        "log_return" | "return" => SeriesKind::LogReturn,
        other => return Err(CliError::config(format!("unknown kind `{other}` (price, log_return)"))),
    };
    let schema = ColumnSchema { date: s.date_column.clone(), value: s.value_column.clone() };
    let series = load_daily_series(path, &schema, kind)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    Ok(match kind {
        SeriesKind::Price => compute_log_returns(&series)?,
        SeriesKind::LogReturn => series,
    })
}

fn file_label(path: &Path) -> String {
    path.file_stem().map_or_else(|| "X".to_string(), |s| s.to_string_lossy().into_owned())
}

fn load_monthly(path: &Path, label: Option<&str>) -> Result<LowFrequencySeries<f64>, CliError> {
    let label = label.map_or_else(|| file_label(path), str::to_string);
    load_monthly_series(path, &label).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

fn regressor_source(s: &Settings) -> Result<RegressorSource<f64>, CliError> {
    match s.regressor.as_deref().unwrap_or("rv") {
        "rv" => Ok(RegressorSource::RealizedVolatility),
        "file" => {
            let path = s
                .monthly
                .as_ref()
                .ok_or_else(|| CliError::config("`--regressor file` requires `--monthly <csv>`"))?;
            Ok(RegressorSource::Series(load_monthly(path, s.label.as_deref())?))
        }
        other => Err(CliError::config(format!("unknown regressor `{other}` (rv, file)"))),
    }
}

fn fit_options(s: &Settings) -> FitOptions<f64> {
    let mut o = FitOptions::default();
    if s.free_omega1 {
        o.fixed.omega1 = None;
    }
    if s.exp_link {
        o.link = TauLink::Exp;
    }
    if let Some(n) = s.max_iter {
        o.optimizer = NelderMeadOptions { max_iter: n, ..o.optimizer };
    }
    if let Some(n) = s.refine_starts {
        o.refine_starts = n;
    }
    o
}

fn span(start: Option<YearMonth>, end: Option<YearMonth>, what: &str) -> Result<Option<MonthSpan>, CliError> {
    match (start, end) {
        (None, None) => Ok(None),
        (Some(a), Some(b)) if a <= b => Ok(Some(MonthSpan::new(a, b))),
        (Some(a), Some(b)) => Err(CliError::config(format!("{what} window is reversed: {a} > {b}"))),
        _ => Err(CliError::config(format!("{what} window needs both a start and an end"))),
    }
}

fn window_config(s: &Settings, daily: &DailySeries<f64>) -> Result<WindowConfig<f64>, CliError> {
    let mut cfg = match s.preset.as_deref() {
        Some(PRESET) => WindowConfig::paper_2008_2015(),
        Some(other) => return Err(CliError::config(format!("unknown preset `{other}` (known: {PRESET})"))),
        None => {
            let dates = daily.dates();
            let (Some(first), Some(last)) = (dates.first(), dates.last()) else {
                return Err(CliError::config("daily series is empty"));
            };
            WindowConfig {
                full_sample: None,
                estimation: MonthSpan::new(YearMonth::of_date(*first), YearMonth::of_date(*last)),
                out_of_sample: None,
                n_lags: DEFAULT_K,
                fit: FitOptions::default(),
            }
        }
    };
    if let Some(full) = span(s.full_start, s.full_end, "full-sample")? {
        cfg.full_sample = Some(full);
    }
    if let Some(est) = span(s.est_start, s.est_end, "estimation")? {
        cfg.estimation = est;
    }
    if let Some(oos) = span(s.oos_start, s.oos_end, "out-of-sample")? {
        cfg.out_of_sample = Some(oos);
    }
    if let Some(k) = s.k {
        if k == 0 {
            return Err(CliError::config("K must be at least 1"));
        }
        cfg.n_lags = k;
    }
    cfg.fit = fit_options(s);
    cfg.validate()?;
    Ok(cfg)
}

fn check_converged(s: &Settings, fits: &[&FitResult<f64>]) -> Result<(), CliError> {
    if s.allow_nonconverged {
        return Ok(());
    }
    match fits.iter().find(|f| !f.converged) {
        Some(f) => Err(CliError::new(
            CliError::NON_CONVERGENCE,
            format!(
                "optimizer did not converge for {} ({} iterations); rerun with --allow-nonconverged to keep the result",
                f.regressor, f.n_iterations
            ),
        )),
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct VariableStats {
    name: String,
    #[serde(flatten)]
    describe: gmidas::DescriptiveStats<f64>,
    jarque_bera: gmidas::TestResult<f64>,
    adf: gmidas::TestResult<f64>,
}

#[derive(Serialize)]
struct StatsReport {
    variables: Vec<VariableStats>,
}

impl StatsReport {
    fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = write!(s, "{:<10}", "");
        for v in &self.variables {
            let _ = write!(s, "{:>16}", v.name);
        }
        s.push('\n');
        let opt = |x: Option<f64>| x.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"));
        let rows: [(&str, Box<dyn Fn(&VariableStats) -> String>); 9] = [
            ("Mean", Box::new(|v| format!("{:.4e}", v.describe.mean))),
            ("Median", Box::new(|v| format!("{:.4e}", v.describe.median))),
            ("Max", Box::new(|v| format!("{:.4e}", v.describe.max))),
            ("Min", Box::new(|v| format!("{:.4e}", v.describe.min))),
            ("Std", Box::new(|v| format!("{:.4e}", v.describe.std_dev))),
            ("Skew", Box::new(move |v| opt(v.describe.skewness))),
            ("Kurt", Box::new(move |v| opt(v.describe.kurtosis))),
            ("JB", Box::new(|v| format!("{:.2}{}", v.jarque_bera.statistic, stars(v.jarque_bera.p_value)))),
            ("ADF", Box::new(|v| format!("{:.3}{}", v.adf.statistic, stars(v.adf.p_value)))),
        ];
        for (name, f) in rows.iter() {
            let _ = write!(s, "{name:<10}");
            for v in &self.variables {
                let _ = write!(s, "{:>16}", f(v));
            }
            s.push('\n');
        }
        s.push_str("*** p<0.01, ** p<0.05, * p<0.10\n");
        s
    }
}

fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.10 {
        "*"
    } else {
        ""
    }
}

fn variable_stats(name: &str, x: &[f64], s: &Settings) -> Result<VariableStats, CliError> {
    let level = s.level.unwrap_or(0.05);
    let spec: AdfSpec = match &s.adf_spec {
        Some(v) => v.parse().map_err(CliError::config)?,
        None => AdfSpec::Constant,
    };
    let max_lags = s.adf_max_lags.unwrap_or_else(|| default_adf_lags(x.len()));
    let err = |e: gmidas::StatsError| CliError::config(format!("{name}: {e}"));
    Ok(VariableStats {
        name: name.to_string(),
        describe: describe(x).map_err(err)?,
        jarque_bera: jarque_bera(x, level).map_err(err)?,
        adf: adf_test(x, max_lags, spec, level).map_err(err)?,
    })
}

fn stats(s: &Settings) -> Result<(), CliError> {
    let returns = load_returns(s)?;
    let mut variables = vec![variable_stats("returns", &returns.values(), s)?];
    if s.regressor.as_deref() == Some("rv") {
        let rv = realized_volatility_of(&returns)?;
        variables.push(variable_stats(rv.label(), &rv.values(), s)?);
    }
    if let Some(path) = &s.monthly {
        let m = load_monthly(path, s.label.as_deref())?;
        variables.push(variable_stats(m.label(), &m.values(), s)?);
    }
    let report = StatsReport { variables };
    emit(s, &report, || report.to_text())
}

fn weights(s: &Settings) -> Result<(), CliError> {
    let k = s.k.unwrap_or(DEFAULT_K);
    let omega2 = *required(&s.omega2, "omega2")?;
    let w = beta_weights(k, s.omega1.unwrap_or(1.0), omega2).map_err(|e| CliError::config(e.to_string()))?;
    emit(s, &w, || {
        let mut t = format!("{:<6}{:>14}\n", "lag", "weight");
        for (i, v) in w.weights.iter().enumerate() {
            let _ = writeln!(t, "{:<6}{:>14.8}", i + 1, v);
        }
        t
    })
}

fn regressor_series(src: &RegressorSource<f64>, daily: &DailySeries<f64>) -> Result<LowFrequencySeries<f64>, CliError> {
    Ok(match src {
        RegressorSource::RealizedVolatility => realized_volatility_of(daily)?,
        RegressorSource::Series(m) => m.clone(),
    })
}

fn fit_on_estimation_window(
    s: &Settings,
) -> Result<(FitResult<f64>, gmidas::MixedPanel<f64>, WindowConfig<f64>), CliError> {
    let returns = load_returns(s)?;
    let cfg = window_config(s, &returns)?;
    let daily = cfg.full_sample.map_or_else(|| returns.clone(), |sp| returns.restrict(sp));
    let reg = regressor_series(&regressor_source(s)?, &daily)?;
    let panel = align_panel(&daily, &reg, cfg.n_lags)?;
    let est = panel.restrict(cfg.estimation);
    if est.is_empty() {
        return Err(CliError::config(format!(
            "estimation window {}..{} has no months with {} lags of history",
            cfg.estimation.start, cfg.estimation.end, cfg.n_lags
        )));
    }
    let f = fit(&est, &cfg.fit)?;
    Ok((f, panel, cfg))
}

fn fit_cmd(s: &Settings) -> Result<(), CliError> {
    let (f, _, _) = fit_on_estimation_window(s)?;
    check_converged(s, &[&f])?;
    emit(s, &f, || f.to_text())
}

fn forecast(s: &Settings) -> Result<(), CliError> {
    let (f, panel, cfg) = match &s.fit {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let f: FitResult<f64> = serde_json::from_str(&text)
                .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            let returns = load_returns(s)?;
            let cfg = window_config(s, &returns)?;
            let daily = cfg.full_sample.map_or_else(|| returns.clone(), |sp| returns.restrict(sp));
            let reg = regressor_series(&regressor_source(s)?, &daily)?;
            let panel = align_panel(&daily, &reg, f.n_lags)?;
            (f, panel, cfg)
        }
        None => fit_on_estimation_window(s)?,
    };
    check_converged(s, &[&f])?;
    let range = cfg.out_of_sample.unwrap_or(f.window);
    let first = panel.span().expect("aligned panel is non-empty").start;
    let history = panel.restrict(MonthSpan::new(first, range.end));
    let fc = forecast_one_step(&f, &history, range)?;
    let mut buf = Vec::new();
    fc.write_csv(&mut buf)?;
    match &s.output {
        Some(p) => write_atomic(p, &buf),
        None => Ok(std::io::stdout().write_all(&buf)?),
    }
}

fn evaluate_cmd(s: &Settings) -> Result<(), CliError> {
    let path = required(&s.forecast, "forecast")?;
    let fc = ForecastSeries::<f64>::read_csv(std::fs::File::open(path)?)?;
    let sample: Sample = s.sample.as_deref().unwrap_or("out_of_sample").parse().map_err(CliError::config)?;
    let l = evaluate(&fc, sample)?;
    emit(s, &l, || {
        format!(
            "{:<16}{:>12}{:>12}{:>12}{:>12}{:>8}\n{:<16}{:>12.4e}{:>12.4e}{:>12.4e}{:>12.4e}{:>8}\n",
            "", "RMSE", "RMSD", "RMAE", "RMAD", "T", l.sample.as_str(), l.rmse, l.rmsd, l.rmae, l.rmad, l.t
        )
    })
}

fn protocol_report(
    s: &Settings,
    returns: &DailySeries<f64>,
    src: &RegressorSource<f64>,
) -> Result<ProtocolReport<f64>, CliError> {
    let cfg = window_config(s, returns)?;
    let report = run_protocol(returns, src, &cfg)?;
    let mut fits = vec![&report.in_sample_fit];
    fits.extend(report.full_sample_fit.as_ref());
    check_converged(s, &fits)?;
    Ok(report)
}

fn protocol(s: &Settings) -> Result<(), CliError> {
    let returns = load_returns(s)?;
    let report = protocol_report(s, &returns, &regressor_source(s)?)?;
    if let Some(p) = &s.forecast_out {
        let mut buf = Vec::new();
        report.forecast.write_csv(&mut buf)?;
        write_atomic(p, &buf)?;
    }
    emit(s, &report, || report.to_text())
}

fn compare_cmd(s: &Settings) -> Result<(), CliError> {
    let mut reports = Vec::new();
    for path in &s.reports {
        let text = std::fs::read_to_string(path)?;
        let r: ProtocolReport<f64> =
            serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        reports.push(r);
    }
    if !s.candidates.is_empty() {
        let returns = load_returns(s)?;
        let sources = s
            .candidates
            .iter()
            .map(|c| match c.as_str() {
                "rv" => Ok(RegressorSource::RealizedVolatility),
                path => Ok(RegressorSource::Series(load_monthly(Path::new(path), None)?)),
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let runs: Vec<Result<ProtocolReport<f64>, CliError>> = std::thread::scope(|sc| {
            let handles: Vec<_> =
                sources.iter().map(|src| sc.spawn(|| protocol_report(s, &returns, src))).collect();
            handles.into_iter().map(|h| h.join().expect("protocol thread panicked")).collect()
        });
        for r in runs {
            reports.push(r?);
        }
    }
    if reports.len() < 2 {
        return Err(CliError::config("compare needs at least two reports or candidates"));
    }
    let cmp = compare(&reports).ok_or_else(|| CliError::config("reports have no common loss sample"))?;
    emit(s, &cmp, || cmp.to_text())
}

#[derive(Serialize)]
struct SimulationReport {
    daily_rows: usize,
    monthly_rows: usize,
    first_month: YearMonth,
    last_month: YearMonth,
    n_lags: usize,
    seed: u64,
    params: ParameterSet<f64>,
    daily_path: PathBuf,
    monthly_path: PathBuf,
}

fn simulate_cmd(s: &Settings) -> Result<(), CliError> {
    let mut p = ParameterSet::<f64>::reference_rv();
    for (slot, v) in [
        (&mut p.mu, s.mu),
        (&mut p.alpha, s.alpha),
        (&mut p.beta, s.beta),
        (&mut p.theta, s.theta),
        (&mut p.omega1, s.omega1),
        (&mut p.omega2, s.omega2),
        (&mut p.m, s.m),
    ] {
        if let Some(v) = v {
            *slot = v;
        }
    }
    let months = s.months.unwrap_or(500);
    let days = s.days.unwrap_or(22);
    let k = s.k.unwrap_or(DEFAULT_K);
    let seed = s.seed.unwrap_or(0);
    if months == 0 || k == 0 {
        return Err(CliError::config("months and K must be at least 1"));
    }
    let start = s.start.unwrap_or_else(|| YearMonth::new(2000, 1).expect("valid month"));
    let label = s.label.clone().unwrap_or_else(|| "X".to_string());
    let reg = synthetic_regressor(
        start.offset(-(k as i64)),
        months + k,
        s.reg_level.unwrap_or(1.0),
        s.reg_phi.unwrap_or(0.98),
        s.reg_sigma.unwrap_or(0.3),
        seed,
        &label,
    )
    .map_err(|e| CliError::new(CliError::INFEASIBLE, e.to_string()))?;
    let (daily, panel) = simulate(&p, &reg, k, days, seed)?;
    let daily_path = required(&s.daily_out, "daily_out")?.clone();
    let monthly_path = required(&s.monthly_out, "monthly_out")?.clone();
    let mut buf = Vec::new();
    write_daily_csv(&daily, &mut buf)?;
    write_atomic(&daily_path, &buf)?;
    buf.clear();
    write_monthly_csv(&reg, &mut buf)?;
    write_atomic(&monthly_path, &buf)?;
    let span = panel.span().expect("simulated panel is non-empty");
    let report = SimulationReport {
        daily_rows: daily.len(),
        monthly_rows: reg.len(),
        first_month: span.start,
        last_month: span.end,
        n_lags: k,
        seed,
        params: p,
        daily_path,
        monthly_path,
    };
    emit(s, &report, || {
        format!(
            "simulated {} daily returns ({}..{}) and {} regressor months\n",
            report.daily_rows, report.first_month, report.last_month, report.monthly_rows
        )
    })
}

fn build_index(s: &Settings) -> Result<(), CliError> {
    let path = required(&s.panel, "panel")?;
    let panel = load_index_panel::<f64>(path)?;
    let scaling: Scaling = match &s.scaling {
        Some(v) => v.parse().map_err(CliError::config)?,
        None => Scaling::default(),
    };
    let label = s.label.clone().unwrap_or_else(|| "GLOBAL".to_string());
    let index = build_global_index(&panel, scaling, &label)?;
    let sidecar = index.sidecar();
    match &s.output {
        Some(out) => {
            let mut buf = Vec::new();
            write_monthly_csv(&index.series, &mut buf)?;
            write_atomic(out, &buf)?;
            let side_path = s.sidecar.clone().unwrap_or_else(|| out.with_extension("json"));
            let mut j = serde_json::to_string_pretty(&sidecar).map_err(|e| CliError::new(1, e.to_string()))?;
            j.push('\n');
            write_atomic(&side_path, j.as_bytes())
        }
        None => emit(s, &index, || {
            let mut t = String::new();
            let _ = writeln!(t, "explained variance {:.4}, dropped months {}", index.explained_variance, index.dropped_months);
            for (m, v) in index.series.observations() {
                let _ = writeln!(t, "{m}  {v:.6}");
            }
            t
        }),
    }
}
