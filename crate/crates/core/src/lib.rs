//! GARCH-MIDAS mixed-frequency volatility toolkit.
//!
//! Daily returns are modelled as `r = mu + sqrt(tau_t * g_i) * eps`, with a
//! monthly long-run component `tau_t` driven by beta-weighted lags of a
//! low-frequency regressor and a unit-mean GARCH(1,1) short-run component.
//!
//! Every numeric routine is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases below fix the scalar to `f64`.

pub mod data;
pub mod estimate;
pub mod forecast;
pub mod index;
pub mod linalg;
pub mod midas;
pub mod model;
pub mod optim;
pub mod scalar;
pub mod stats;

pub use data::{
    align_panel, compute_log_returns, group_by_month, realized_volatility, realized_volatility_of, ColumnSchema,
    DailySeries, DataError, LowFrequencySeries, MixedPanel, MonthSpan, Period, SeriesKind, YearMonth,
};
pub use estimate::{
    fit, standard_errors, EstimateError, FitOptions, FitResult, FixedParams, ParamEstimate, StdErrorStatus,
};
pub use forecast::{
    compare, evaluate, forecast_one_step, run_protocol, Comparison, ForecastError, ForecastPoint, ForecastSeries,
    LossReport, ProtocolReport, RegressorSource, Sample, WindowConfig,
};
pub use index::{build_global_index, read_index_panel, GlobalIndex, IndexError, IndexPanel, Scaling};
pub use midas::{beta_weights, long_run_component, LongRunPath, MidasError, TauLink, WeightVector};
pub use model::{
    conditional_variance_path, filter_short_run, log_likelihood, simulate, GarchMidas, ModelError, ParameterSet,
    ShortRunPath, VariancePath,
};
pub use scalar::Scalar;
pub use stats::{adf_test, describe, jarque_bera, AdfSpec, Decision, DescriptiveStats, StatsError, TestResult};

pub type DailySeries64 = DailySeries<f64>;
pub type LowFrequencySeries64 = LowFrequencySeries<f64>;
pub type MixedPanel64 = MixedPanel<f64>;
pub type ParameterSet64 = ParameterSet<f64>;
pub type FitOptions64 = FitOptions<f64>;
pub type FitResult64 = FitResult<f64>;
pub type ForecastSeries64 = ForecastSeries<f64>;
pub type LossReport64 = LossReport<f64>;
pub type ProtocolReport64 = ProtocolReport<f64>;
pub type WindowConfig64 = WindowConfig<f64>;
pub type WeightVector64 = WeightVector<f64>;
pub type GlobalIndex64 = GlobalIndex<f64>;
pub type IndexPanel64 = IndexPanel<f64>;

pub type MixedPanel32 = MixedPanel<f32>;
pub type ParameterSet32 = ParameterSet<f32>;
pub type FitResult32 = FitResult<f32>;
