//! Beta lag polynomial and the monthly long-run variance component.
//!
//! Weights follow `phi_k ∝ (k/K)^(w1-1) (1-k/K)^(w2-1)` for `k = 1..K`,
//! normalized to sum to one. The last lag `k = K` gets exactly zero weight
//! whenever `w2 > 1`; no `k/(K+1)` re-indexing is applied. `0^0` is taken
//! as 1, so `w1 = w2 = 1` gives flat weights over all `K` lags.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum MidasError {
    #[error("beta shape parameters must be >= 1 (got omega1={omega1}, omega2={omega2})")]
    InvalidShape { omega1: f64, omega2: f64 },
    #[error("number of lags must be at least 1")]
    ZeroLags,
    #[error("lag vector of period {period} has length {got}, expected {expected}")]
    LagLengthMismatch { period: usize, expected: usize, got: usize },
    #[error("long-run variance is {value} in period {period}; it must be positive")]
    NonPositiveTau { period: usize, value: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightVector<F> {
    pub weights: Vec<F>,
    pub omega1: F,
    pub omega2: F,
}

impl<F: Scalar> WeightVector<F> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `sum_k phi_k x_k` with `x[0]` the most recent lag.
    pub fn apply(&self, lags: &[F]) -> F {
        self.weights.iter().zip(lags).map(|(&w, &x)| w * x).sum()
    }
}

fn pow0<F: Scalar>(base: F, exp: F) -> F {
    if exp == F::zero() {
        F::one()
    } else {
        base.powf(exp)
    }
}

pub fn beta_weights<F: Scalar>(n_lags: usize, omega1: F, omega2: F) -> Result<WeightVector<F>, MidasError> {
    if n_lags == 0 {
        return Err(MidasError::ZeroLags);
    }
    if !(omega1 >= F::one() && omega2 >= F::one()) || !omega1.is_finite() || !omega2.is_finite() {
        return Err(MidasError::InvalidShape { omega1: omega1.as_f64(), omega2: omega2.as_f64() });
    }
    if n_lags == 1 {
        // the only lag sits at k/K = 1; the raw kernel is 0 for omega2 > 1
        return Ok(WeightVector { weights: vec![F::one()], omega1, omega2 });
    }
    let kf = F::of_usize(n_lags);
    let raw: Vec<F> = (1..=n_lags)
        .map(|k| {
            let u = F::of_usize(k) / kf;
            pow0(u, omega1 - F::one()) * pow0(F::one() - u, omega2 - F::one())
        })
        .collect();
    let total: F = raw.iter().copied().sum();
    Ok(WeightVector { weights: raw.into_iter().map(|w| w / total).collect(), omega1, omega2 })
}

/// How the weighted regressor maps into the long-run variance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauLink {
    /// `tau = m + theta * sum phi_k X_{t-k}`.
    #[default]
    Level,
    /// `tau = exp(m + theta * sum phi_k X_{t-k})`; positive by construction.
    Exp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LongRunPath<F> {
    pub tau: Vec<F>,
}

/// Long-run component without the positivity check; infeasible values pass through.
pub fn tau_values<F: Scalar>(
    m: F,
    theta: F,
    weights: &WeightVector<F>,
    lags: &[Vec<F>],
    link: TauLink,
) -> Vec<F> {
    lags.iter()
        .map(|row| {
            let level = m + theta * weights.apply(row);
            match link {
                TauLink::Level => level,
                TauLink::Exp => level.exp(),
            }
        })
        .collect()
}

pub fn long_run_component<F: Scalar>(
    m: F,
    theta: F,
    weights: &WeightVector<F>,
    lags: &[Vec<F>],
) -> Result<LongRunPath<F>, MidasError> {
    long_run_component_with(m, theta, weights, lags, TauLink::Level)
}

pub fn long_run_component_with<F: Scalar>(
    m: F,
    theta: F,
    weights: &WeightVector<F>,
    lags: &[Vec<F>],
    link: TauLink,
) -> Result<LongRunPath<F>, MidasError> {
    if let Some((period, row)) = lags.iter().enumerate().find(|(_, r)| r.len() != weights.len()) {
        return Err(MidasError::LagLengthMismatch { period, expected: weights.len(), got: row.len() });
    }
    let tau = tau_values(m, theta, weights, lags, link);
    if let Some((period, &value)) = tau.iter().enumerate().find(|(_, &v)| !(v > F::zero() && v.is_finite())) {
        return Err(MidasError::NonPositiveTau { period, value: value.as_f64() });
    }
    Ok(LongRunPath { tau })
}
