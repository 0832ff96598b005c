//! GARCH-MIDAS core: short-run GARCH(1,1) filter, total variance,
//! Gaussian log-likelihood and a seeded simulator.
//!
//! Daily return `r_{i,t} = mu + sqrt(tau_t g_{i,t}) eps_{i,t}` with
//!
//! ```text
//! g_{i,t} = (1 - alpha - beta) + alpha (r_{i-1,t} - mu)^2 / tau_t + beta g_{i-1,t}
//! ```
//!
//! The `g` recursion runs across month boundaries in calendar order (the
//! previous day of a month's first day is the last day of the prior
//! month) and starts from `g = 1`. `tau_t` is constant within a month.

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DailySeries, DataError, LowFrequencySeries, MixedPanel, Period, SeriesKind, YearMonth};
use crate::midas::{beta_weights, long_run_component_with, tau_values, LongRunPath, MidasError, TauLink};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("parameters are infeasible for this regressor path: {0}")]
    InfeasibleParams(String),
    #[error(transparent)]
    Midas(#[from] MidasError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("panel is empty")]
    EmptyPanel,
}

/// Model parameters. `omega1` is pinned to 1 unless freed in estimation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet<F> {
    pub mu: F,
    pub alpha: F,
    pub beta: F,
    pub theta: F,
    pub omega1: F,
    pub omega2: F,
    pub m: F,
}

/// Canonical parameter order used by reports and standard-error vectors.
pub const PARAM_NAMES: [&str; 7] = ["mu", "alpha", "beta", "theta", "omega1", "omega2", "m"];

impl<F: Scalar> ParameterSet<F> {
    /// Full-sample GARCH-MIDAS-RV estimates for EU ETS carbon spot returns
    /// (`omega` is the decay shape `omega2`, `omega1 = 1`).
    pub fn reference_rv() -> Self {
        Self {
            mu: F::of(0.0006),
            alpha: F::of(0.1221),
            beta: F::of(0.8608),
            theta: F::of(0.1855),
            omega1: F::one(),
            omega2: F::of(2.8589),
            m: F::of(0.0184),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let all = self.to_array();
        if let Some(i) = all.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::InvalidParams(format!("{} is not finite", PARAM_NAMES[i])));
        }
        if !(self.alpha > F::zero() && self.beta > F::zero() && self.alpha + self.beta < F::one()) {
            return Err(ModelError::InvalidParams(format!(
                "need alpha > 0, beta > 0, alpha + beta < 1 (alpha={}, beta={})",
                self.alpha, self.beta
            )));
        }
        if !(self.omega1 >= F::one() && self.omega2 >= F::one()) {
            return Err(ModelError::InvalidParams(format!(
                "need omega1, omega2 >= 1 (omega1={}, omega2={})",
                self.omega1, self.omega2
            )));
        }
        Ok(())
    }

    pub fn to_array(&self) -> [F; 7] {
        [self.mu, self.alpha, self.beta, self.theta, self.omega1, self.omega2, self.m]
    }

    pub fn from_array(a: [F; 7]) -> Self {
        Self { mu: a[0], alpha: a[1], beta: a[2], theta: a[3], omega1: a[4], omega2: a[5], m: a[6] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShortRunPath<F> {
    pub g: Vec<F>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariancePath<F> {
    pub tau: Vec<F>,
    pub g: Vec<F>,
    /// `tau_t * g_{i,t}` per day, chronological.
    pub variance: Vec<F>,
}

/// `g` path over a flat chronological return vector with a per-day `tau`.
pub(crate) fn short_run_recursion<F: Scalar>(
    alpha: F,
    beta: F,
    mu: F,
    returns: &[F],
    day_tau: impl Iterator<Item = F>,
) -> Vec<F> {
    let omega = F::one() - alpha - beta;
    let mut g = Vec::with_capacity(returns.len());
    let mut prev: Option<(F, F)> = None;
    for (&r, tau) in returns.iter().zip(day_tau) {
        let gi = match prev {
            None => F::one(),
            Some((r_prev, g_prev)) => {
                let e = r_prev - mu;
                omega + alpha * e * e / tau + beta * g_prev
            }
        };
        g.push(gi);
        prev = Some((r, gi));
    }
    g
}

fn day_taus<'a, F: Scalar>(periods: &'a [Period<F>], tau: &'a [F]) -> impl Iterator<Item = F> + 'a {
    periods.iter().zip(tau).flat_map(|(p, &t)| std::iter::repeat_n(t, p.n_days()))
}

/// Sum of Gaussian log-densities `-1/2 [ln 2pi + ln s2 + e^2 / s2]`.
pub fn gaussian_log_likelihood<F: Scalar>(returns: &[F], mu: F, variance: &[F]) -> F {
    let ln2pi = (F::of(2.0) * F::PI()).ln();
    let half = F::of(0.5);
    returns
        .iter()
        .zip(variance)
        .map(|(&r, &s2)| {
            let e = r - mu;
            -half * (ln2pi + s2.ln() + e * e / s2)
        })
        .sum()
}

/// The model with its long-run link; [`TauLink::Level`] by default.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GarchMidas {
    pub link: TauLink,
}

impl GarchMidas {
    pub fn new(link: TauLink) -> Self {
        Self { link }
    }

    pub fn long_run<F: Scalar>(
        &self,
        params: &ParameterSet<F>,
        panel: &MixedPanel<F>,
    ) -> Result<LongRunPath<F>, ModelError> {
        let w = beta_weights(panel.n_lags(), params.omega1, params.omega2)?;
        Ok(long_run_component_with(params.m, params.theta, &w, panel.lags(), self.link)?)
    }

    pub fn filter_short_run<F: Scalar>(
        &self,
        params: &ParameterSet<F>,
        panel: &MixedPanel<F>,
        tau: &LongRunPath<F>,
    ) -> Result<ShortRunPath<F>, ModelError> {
        params.validate()?;
        if panel.is_empty() {
            return Err(ModelError::EmptyPanel);
        }
        if tau.tau.len() != panel.n_periods() {
            return Err(ModelError::InvalidParams("tau path length differs from panel".into()));
        }
        if let Some((period, &value)) = tau.tau.iter().enumerate().find(|(_, &v)| !(v > F::zero())) {
            return Err(MidasError::NonPositiveTau { period, value: value.as_f64() }.into());
        }
        let g = short_run_recursion(
            params.alpha,
            params.beta,
            params.mu,
            &panel.returns(),
            day_taus(panel.periods(), &tau.tau),
        );
        Ok(ShortRunPath { g })
    }

    pub fn conditional_variance_path<F: Scalar>(
        &self,
        params: &ParameterSet<F>,
        panel: &MixedPanel<F>,
    ) -> Result<VariancePath<F>, ModelError> {
        let tau = self.long_run(params, panel)?;
        let g = self.filter_short_run(params, panel, &tau)?.g;
        let variance = day_taus(panel.periods(), &tau.tau).zip(&g).map(|(t, &gi)| t * gi).collect();
        Ok(VariancePath { tau: tau.tau, g, variance })
    }

    /// Gaussian log-likelihood; `-inf` at any infeasible point (invalid
    /// parameters or `tau_t <= 0` in some month).
    pub fn log_likelihood<F: Scalar>(&self, params: &ParameterSet<F>, panel: &MixedPanel<F>) -> F {
        if params.validate().is_err() || panel.is_empty() {
            return F::neg_infinity();
        }
        let Ok(w) = beta_weights(panel.n_lags(), params.omega1, params.omega2) else {
            return F::neg_infinity();
        };
        let tau = tau_values(params.m, params.theta, &w, panel.lags(), self.link);
        if tau.iter().any(|&t| !(t > F::zero() && t.is_finite())) {
            return F::neg_infinity();
        }
        let returns = panel.returns();
        let g = short_run_recursion(
            params.alpha,
            params.beta,
            params.mu,
            &returns,
            day_taus(panel.periods(), &tau),
        );
        let var: Vec<F> = day_taus(panel.periods(), &tau).zip(&g).map(|(t, &gi)| t * gi).collect();
        let ll = gaussian_log_likelihood(&returns, params.mu, &var);
        if ll.is_nan() {
            F::neg_infinity()
        } else {
            ll
        }
    }

    /// Draws a return path from the model, one month per regressor month
    /// after the first `n_lags`. Day `d` of a month is dated on calendar day `d`.
    pub fn simulate<F: Scalar>(
        &self,
        params: &ParameterSet<F>,
        regressor: &LowFrequencySeries<F>,
        n_lags: usize,
        days_per_month: usize,
        seed: u64,
    ) -> Result<(DailySeries<F>, MixedPanel<F>), ModelError> {
        params.validate()?;
        if !(1..=28).contains(&days_per_month) {
            return Err(ModelError::InvalidParams(format!(
                "days per month must be in 1..=28, got {days_per_month}"
            )));
        }
        let w = beta_weights(n_lags, params.omega1, params.omega2)?;
        let obs = regressor.observations();
        if obs.len() <= n_lags {
            return Err(DataError::InsufficientLagHistory {
                first_usable: regressor.first_month().map_or(YearMonth::new(2000, 1).unwrap(), |m| {
                    m.offset(n_lags as i64)
                }),
            }
            .into());
        }
        let lags: Vec<Vec<F>> =
            (n_lags..obs.len()).map(|t| (1..=n_lags).map(|k| obs[t - k].1).collect()).collect();
        let tau = long_run_component_with(params.m, params.theta, &w, &lags, self.link)
            .map_err(|e| ModelError::InfeasibleParams(e.to_string()))?;

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let omega = F::one() - params.alpha - params.beta;
        let mut g = F::one();
        let mut prev_e: Option<F> = None;
        let mut periods = Vec::with_capacity(lags.len());
        let mut daily = Vec::with_capacity(lags.len() * days_per_month);
        for (t, &tau_t) in tau.tau.iter().enumerate() {
            let id = obs[n_lags + t].0;
            let mut p = Period { id, dates: vec![], returns: vec![] };
            for d in 1..=days_per_month {
                if let Some(e) = prev_e {
                    g = omega + params.alpha * e * e / tau_t + params.beta * g;
                }
                let z: f64 = StandardNormal.sample(&mut rng);
                let e = (tau_t * g).sqrt() * F::of(z);
                let r = params.mu + e;
                let date = NaiveDate::from_ymd_opt(id.year(), id.month(), d as u32).expect("day <= 28");
                p.dates.push(date);
                p.returns.push(r);
                daily.push((date, r));
                prev_e = Some(e);
            }
            periods.push(p);
        }
        let panel = MixedPanel::from_parts(periods, lags, regressor.label())?;
        Ok((DailySeries::new(daily, SeriesKind::LogReturn)?, panel))
    }
}

pub fn filter_short_run<F: Scalar>(
    params: &ParameterSet<F>,
    panel: &MixedPanel<F>,
    tau: &LongRunPath<F>,
) -> Result<ShortRunPath<F>, ModelError> {
    GarchMidas::default().filter_short_run(params, panel, tau)
}

pub fn log_likelihood<F: Scalar>(params: &ParameterSet<F>, panel: &MixedPanel<F>) -> F {
    GarchMidas::default().log_likelihood(params, panel)
}

pub fn conditional_variance_path<F: Scalar>(
    params: &ParameterSet<F>,
    panel: &MixedPanel<F>,
) -> Result<VariancePath<F>, ModelError> {
    GarchMidas::default().conditional_variance_path(params, panel)
}

pub fn simulate<F: Scalar>(
    params: &ParameterSet<F>,
    regressor: &LowFrequencySeries<F>,
    n_lags: usize,
    days_per_month: usize,
    seed: u64,
) -> Result<(DailySeries<F>, MixedPanel<F>), ModelError> {
    GarchMidas::default().simulate(params, regressor, n_lags, days_per_month, seed)
}

/// Positive, persistent monthly regressor: `level * exp(z_t - var(z)/2)` with
/// `z` a stationary Gaussian AR(1) of coefficient `phi` and innovation sd `sigma`.
pub fn synthetic_regressor<F: Scalar>(
    start: YearMonth,
    n_months: usize,
    level: F,
    phi: F,
    sigma: F,
    seed: u64,
    label: &str,
) -> Result<LowFrequencySeries<F>, DataError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed_5eed_5eed);
    let var_z = sigma * sigma / (F::one() - phi * phi);
    let draw = |rng: &mut ChaCha8Rng| F::of(StandardNormal.sample(rng));
    let mut z = draw(&mut rng) * var_z.sqrt();
    let mut vals = Vec::with_capacity(n_months);
    for _ in 0..n_months {
        vals.push(level * (z - var_z / F::of(2.0)).exp());
        z = phi * z + sigma * draw(&mut rng);
    }
    LowFrequencySeries::from_values(start, &vals, label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::midas::beta_weights;

    fn panel_from(returns_by_month: Vec<Vec<f64>>, lag: f64, k: usize) -> MixedPanel<f64> {
        let start = YearMonth::new(2010, 1).unwrap();
        let periods: Vec<Period<f64>> = returns_by_month
            .into_iter()
            .enumerate()
            .map(|(t, r)| {
                let id = start.offset(t as i64);
                Period {
                    id,
                    dates: (1..=r.len()).map(|d| NaiveDate::from_ymd_opt(id.year(), id.month(), d as u32).unwrap()).collect(),
                    returns: r,
                }
            })
            .collect();
        let lags = vec![vec![lag; k]; periods.len()];
        MixedPanel::from_parts(periods, lags, "X").unwrap()
    }

    fn params(mu: f64, alpha: f64, beta: f64, theta: f64, m: f64) -> ParameterSet<f64> {
        ParameterSet { mu, alpha, beta, theta, omega1: 1.0, omega2: 2.0, m }
    }

    #[test]
    fn single_day_standard_normal_density() {
        let panel = panel_from(vec![vec![0.0]], 0.0, 3);
        let ll = log_likelihood(&params(0.0, 0.1, 0.8, 0.0, 1.0), &panel);
        assert!((ll + 0.918_938_533_204_672_7).abs() < 1e-12);
    }

    #[test]
    fn geometric_recursion_when_returns_equal_mu() {
        let mu = 0.003;
        let (a, b) = (0.07, 0.85);
        let panel = panel_from(vec![vec![mu; 10], vec![mu; 12]], 1.0, 2);
        let p = params(mu, a, b, 0.0, 2.0);
        let tau = GarchMidas::default().long_run(&p, &panel).unwrap();
        let g = filter_short_run(&p, &panel, &tau).unwrap().g;
        for (i, gi) in g.iter().enumerate() {
            let n = i as i32; // beta^(i-1) with 1-based i
            let want = (1.0 - a - b) * (1.0 - b.powi(n)) / (1.0 - b) + b.powi(n);
            assert!((gi - want).abs() < 1e-14, "day {i}: {gi} vs {want}");
        }
        assert!((g[21] - (1.0 - a - b) / (1.0 - b)).abs() < 0.05);
    }

    #[test]
    fn near_zero_dynamics_collapse() {
        let panel = panel_from(vec![vec![0.1, -0.3, 0.2, 0.05]], 1.0, 2);
        let p = params(0.0, 1e-10, 1e-10, 0.0, 0.7);
        let path = conditional_variance_path(&p, &panel).unwrap();
        for v in &path.variance[1..] {
            assert!((v - 0.7).abs() < 1e-8);
        }
        for ((t, g), v) in std::iter::repeat(path.tau[0]).zip(&path.g).zip(&path.variance) {
            assert_eq!(t * g, *v);
        }
    }

    #[test]
    fn infeasible_tau_gives_sentinel() {
        let panel = panel_from(vec![vec![0.1, 0.2], vec![0.0, 0.1]], 1.0, 2);
        let p = params(0.0, 0.1, 0.8, -1.0, 0.5);
        assert_eq!(log_likelihood(&p, &panel), f64::NEG_INFINITY);
        let bad = params(0.0, 0.6, 0.5, 0.0, 0.5);
        assert_eq!(log_likelihood(&bad, &panel), f64::NEG_INFINITY);
        let tau = LongRunPath { tau: vec![1.0, -0.2] };
        assert!(matches!(
            filter_short_run(&params(0.0, 0.1, 0.8, 0.0, 1.0), &panel, &tau),
            Err(ModelError::Midas(MidasError::NonPositiveTau { period: 1, .. }))
        ));
    }

    #[test]
    fn carry_across_month_boundary() {
        // g on the first day of month 2 uses the last return of month 1 over tau of month 2
        let periods = vec![vec![0.0, 0.5], vec![0.0]];
        let start = YearMonth::new(2010, 1).unwrap();
        let periods: Vec<Period<f64>> = periods
            .into_iter()
            .enumerate()
            .map(|(t, r)| Period { id: start.offset(t as i64), dates: vec![NaiveDate::MIN; r.len()], returns: r })
            .collect();
        let panel = MixedPanel::from_parts(periods, vec![vec![1.0], vec![3.0]], "X").unwrap();
        let p = ParameterSet { mu: 0.0, alpha: 0.2, beta: 0.5, theta: 1.0, omega1: 1.0, omega2: 1.0, m: 0.0 };
        let path = conditional_variance_path(&p, &panel).unwrap();
        assert_eq!(path.tau, vec![1.0, 3.0]);
        let g1 = 0.3 + 0.5 * 1.0; // r=0 on day 1
        let g2 = 0.3 + 0.2 * 0.25 / 3.0 + 0.5 * g1;
        assert!((path.g[1] - g1).abs() < 1e-15);
        assert!((path.g[2] - g2).abs() < 1e-15);
    }

    #[test]
    fn simulate_is_deterministic_and_degenerate_limit() {
        let reg = synthetic_regressor(YearMonth::new(2006, 1).unwrap(), 40, 0.1, 0.9, 0.3, 3, "X").unwrap();
        let p = ParameterSet::reference_rv();
        let (a, pa) = simulate(&p, &reg, 24, 22, 11).unwrap();
        let (b, pb) = simulate(&p, &reg, 24, 22, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(pa, pb);
        assert_eq!(a.len(), 16 * 22);
        assert_eq!(pa.periods()[0].id, YearMonth::new(2008, 1).unwrap());
        let (c, _) = simulate(&p, &reg, 24, 22, 12).unwrap();
        assert_ne!(a, c);

        let flat = ParameterSet { mu: 5.0, alpha: 1e-12, beta: 1e-12, theta: 0.0, omega1: 1.0, omega2: 1.0, m: 1e-300 };
        let (d, _) = simulate(&flat, &reg, 24, 5, 1).unwrap();
        assert!(d.values().iter().all(|&r| r == 5.0));

        let neg = ParameterSet { m: -1.0, theta: 0.0, ..p };
        assert!(matches!(simulate(&neg, &reg, 24, 5, 1), Err(ModelError::InfeasibleParams(_))));
    }

    #[test]
    fn simulated_panel_matches_alignment() {
        let reg = synthetic_regressor(YearMonth::new(2006, 1).unwrap(), 30, 0.1, 0.9, 0.3, 3, "X").unwrap();
        let (daily, panel) = simulate(&ParameterSet::reference_rv(), &reg, 24, 10, 5).unwrap();
        let aligned = crate::data::align_panel(&daily, &reg, 24).unwrap();
        assert_eq!(aligned, panel);
    }

    #[test]
    fn likelihood_uses_weights() {
        let panel = panel_from(vec![vec![0.1, -0.1]], 2.0, 4);
        let p = params(0.0, 0.1, 0.8, 0.5, 0.1);
        let w = beta_weights(4, 1.0, 2.0).unwrap();
        let tau = 0.1 + 0.5 * w.apply(&[2.0; 4]);
        let g2 = 0.1 + 0.1 * 0.01 / tau + 0.8;
        let want = gaussian_log_likelihood(&[0.1, -0.1], 0.0, &[tau, tau * g2]);
        assert!((log_likelihood(&p, &panel) - want).abs() < 1e-14);
    }
}
