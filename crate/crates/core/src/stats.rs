//! Descriptive statistics, Jarque-Bera normality test and the augmented
//! Dickey-Fuller unit-root test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::linalg::ols;
use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },
    #[error("skewness and kurtosis are undefined for a constant series")]
    SkewUndefined,
    #[error("ADF regression is singular (collinear lags)")]
    SingularRegression,
    #[error("non-finite observation at index {0}")]
    NonFinite(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveStats<F> {
    pub n: usize,
    pub mean: F,
    pub median: F,
    pub max: F,
    pub min: F,
    /// Sample standard deviation (n-1 denominator).
    pub std_dev: F,
    /// `m3 / m2^1.5`; `None` for a constant series.
    pub skewness: Option<F>,
    /// Raw (non-excess) kurtosis `m4 / m2^2`; a normal sample gives about 3.
    pub kurtosis: Option<F>,
}

impl<F: Scalar> DescriptiveStats<F> {
    /// `(skewness, kurtosis)`, or [`StatsError::SkewUndefined`].
    pub fn moments(&self) -> Result<(F, F), StatsError> {
        match (self.skewness, self.kurtosis) {
            (Some(s), Some(k)) => Ok((s, k)),
            _ => Err(StatsError::SkewUndefined),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Reject,
    FailToReject,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult<F> {
    pub statistic: F,
    pub p_value: F,
    pub level: F,
    pub decision: Decision,
    pub detail: String,
    /// `(level, critical value)` pairs where the test has a tabulated distribution.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub critical_values: Vec<(F, F)>,
}

impl<F: Scalar> TestResult<F> {
    fn new(statistic: F, p_value: F, level: F, detail: String) -> Self {
        let decision = if p_value < level { Decision::Reject } else { Decision::FailToReject };
        Self { statistic, p_value, level, decision, detail, critical_values: vec![] }
    }

    /// Same test judged at another significance level.
    pub fn at_level(&self, level: F) -> Self {
        let mut out = self.clone();
        out.level = level;
        out.decision = if self.p_value < level { Decision::Reject } else { Decision::FailToReject };
        out
    }

    pub fn rejects(&self) -> bool {
        self.decision == Decision::Reject
    }
}

fn check_finite<F: Scalar>(x: &[F]) -> Result<(), StatsError> {
    match x.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(StatsError::NonFinite(i)),
        None => Ok(()),
    }
}

pub fn describe<F: Scalar>(x: &[F]) -> Result<DescriptiveStats<F>, StatsError> {
    let n = x.len();
    if n < 2 {
        return Err(StatsError::TooFewObservations { needed: 2, got: n });
    }
    check_finite(x)?;
    let nf = F::of_usize(n);
    let mean = x.iter().copied().sum::<F>() / nf;
    let (mut m2, mut m3, mut m4) = (F::zero(), F::zero(), F::zero());
    for &v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 = m2 + d2;
        m3 = m3 + d2 * d;
        m4 = m4 + d2 * d2;
    }
    let std_dev = (m2 / F::of_usize(n - 1)).sqrt();
    let (m2, m3, m4) = (m2 / nf, m3 / nf, m4 / nf);
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / F::of(2.0)
    };
    // Relative threshold: rounding in the mean leaves m2 ~ eps^2 * mean^2 for constant data.
    let scale = sorted[0].abs().max(sorted[n - 1].abs());
    let degenerate = m2 <= (F::epsilon() * scale) * (F::epsilon() * scale) * F::of(16.0);
    let (skewness, kurtosis) =
        if degenerate { (None, None) } else { (Some(m3 / m2.powf(F::of(1.5))), Some(m4 / (m2 * m2))) };
    Ok(DescriptiveStats {
        n,
        mean,
        median,
        max: sorted[n - 1],
        min: sorted[0],
        std_dev,
        skewness,
        kurtosis,
    })
}

/// Jarque-Bera statistic `n/6 (S^2 + (K-3)^2/4)` with a chi-square(2) p-value.
pub fn jarque_bera<F: Scalar>(x: &[F], level: F) -> Result<TestResult<F>, StatsError> {
    if x.len() < 8 {
        return Err(StatsError::TooFewObservations { needed: 8, got: x.len() });
    }
    let d = describe(x)?;
    let (s, k) = d.moments()?;
    let jb = F::of_usize(d.n) / F::of(6.0) * (s * s + (k - F::of(3.0)).powi(2) / F::of(4.0));
    // chi-square with 2 dof has survival function exp(-x/2)
    let p = (-jb / F::of(2.0)).exp();
    Ok(TestResult::new(jb, p, level, format!("n={}, skewness={s}, kurtosis={k}", d.n)))
}

/// Deterministic terms of the ADF regression.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdfSpec {
    None,
    #[default]
    Constant,
    ConstantTrend,
}

impl AdfSpec {
    fn name(self) -> &'static str {
        match self {
            AdfSpec::None => "none",
            AdfSpec::Constant => "constant",
            AdfSpec::ConstantTrend => "constant_trend",
        }
    }

    fn n_deterministic(self) -> usize {
        match self {
            AdfSpec::None => 0,
            AdfSpec::Constant => 1,
            AdfSpec::ConstantTrend => 2,
        }
    }
}

impl std::str::FromStr for AdfSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" | "n" => Ok(AdfSpec::None),
            "constant" | "c" => Ok(AdfSpec::Constant),
            "constant_trend" | "ct" => Ok(AdfSpec::ConstantTrend),
            _ => Err(format!("unknown ADF regression `{s}` (none, constant, constant_trend)")),
        }
    }
}

/// Schwert's rule `12 (n/100)^{1/4}`, the usual default upper bound for lag search.
pub fn default_adf_lags(n: usize) -> usize {
    (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

fn adf_regression<F: Scalar>(
    x: &[F],
    dx: &[F],
    lags: usize,
    first: usize,
    spec: AdfSpec,
) -> Option<crate::linalg::OlsFit<F>> {
    let rows = first..dx.len();
    let design: Vec<Vec<F>> = rows
        .clone()
        .map(|i| {
            let mut row = Vec::with_capacity(1 + spec.n_deterministic() + lags);
            row.push(x[i]);
            if spec != AdfSpec::None {
                row.push(F::one());
            }
            if spec == AdfSpec::ConstantTrend {
                row.push(F::of_usize(i + 1));
            }
            row.extend((1..=lags).map(|j| dx[i - j]));
            row
        })
        .collect();
    let y: Vec<F> = rows.map(|i| dx[i]).collect();
    ols(&design, &y)
}

/// Augmented Dickey-Fuller test; the lag order is chosen by AIC over `0..=max_lags`
/// on a common sample, then the chosen regression is refit on all available rows.
pub fn adf_test<F: Scalar>(
    x: &[F],
    max_lags: usize,
    spec: AdfSpec,
    level: F,
) -> Result<TestResult<F>, StatsError> {
    let needed = max_lags + 10;
    if x.len() < needed {
        return Err(StatsError::TooFewObservations { needed, got: x.len() });
    }
    check_finite(x)?;
    let dx: Vec<F> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let mut best: Option<(usize, F)> = None;
    for p in 0..=max_lags {
        let Some(fit) = adf_regression(x, &dx, p, max_lags, spec) else {
            continue;
        };
        let n = F::of_usize(fit.nobs);
        let k = F::of_usize(fit.coef.len());
        let aic = n * (fit.ssr / n).ln() + F::of(2.0) * k;
        if best.is_none_or(|(_, b)| aic < b) {
            best = Some((p, aic));
        }
    }
    let (lags, _) = best.ok_or(StatsError::SingularRegression)?;
    let fit = adf_regression(x, &dx, lags, lags, spec).ok_or(StatsError::SingularRegression)?;
    let stat = fit.coef[0] / fit.std_errors[0];
    if !stat.is_finite() {
        return Err(StatsError::SingularRegression);
    }
    let p = F::of(mackinnon_p_value(stat.as_f64(), spec));
    let mut res = TestResult::new(
        stat,
        p,
        level,
        format!("regression={}, lags={lags} (AIC, max {max_lags}), nobs={}", spec.name(), fit.nobs),
    );
    res.critical_values = [0.01, 0.05, 0.10]
        .iter()
        .map(|&l| (F::of(l), F::of(adf_critical_value(spec, l, fit.nobs))))
        .collect();
    Ok(res)
}

/// Approximate asymptotic p-value of the Dickey-Fuller tau statistic
/// (MacKinnon 1994 response surface, single unit root).
pub fn mackinnon_p_value(stat: f64, spec: AdfSpec) -> f64 {
    let (max, min, star, small, large): (f64, f64, f64, [f64; 3], [f64; 4]) = match spec {
        AdfSpec::None => (
            f64::INFINITY,
            -19.04,
            -1.04,
            [0.6344, 1.2378, 3.2496e-2],
            [0.4797, 9.3557e-1, -0.6999e-1, 3.3066e-2],
        ),
        AdfSpec::Constant => (
            2.74,
            -18.83,
            -1.61,
            [2.1659, 1.4412, 3.8269e-2],
            [1.7339, 9.3202e-1, -1.2745e-1, -1.0368e-2],
        ),
        AdfSpec::ConstantTrend => (
            0.7,
            -16.18,
            -2.89,
            [3.2512, 1.6047, 4.9588e-2],
            [2.5261, 6.1654e-1, -3.7956e-1, -6.0285e-2],
        ),
    };
    if stat > max {
        return 1.0;
    }
    if stat < min {
        return 0.0;
    }
    let poly = |c: &[f64]| c.iter().rev().fold(0.0, |acc, &a| acc * stat + a);
    let z = if stat <= star { poly(&small) } else { poly(&large) };
    Normal::standard().cdf(z)
}

/// Finite-sample critical value `b0 + b1/T + b2/T^2 + b3/T^3` (MacKinnon 2010).
pub fn adf_critical_value(spec: AdfSpec, level: f64, nobs: usize) -> f64 {
    let table: [[f64; 4]; 3] = match spec {
        AdfSpec::None => [
            [-2.56574, -2.2358, -3.627, 0.0],
            [-1.94100, -0.2686, -3.365, 31.223],
            [-1.61682, 0.2656, -2.714, 25.364],
        ],
        AdfSpec::Constant => [
            [-3.43035, -6.5393, -16.786, -79.433],
            [-2.86154, -2.8903, -4.234, -40.040],
            [-2.56677, -1.5384, -2.809, 0.0],
        ],
        AdfSpec::ConstantTrend => [
            [-3.95877, -9.0531, -28.428, -134.155],
            [-3.41049, -4.3904, -9.036, -45.374],
            [-3.12705, -2.5856, -3.925, -22.380],
        ],
    };
    let row = if level <= 0.01 {
        table[0]
    } else if level <= 0.05 {
        table[1]
    } else {
        table[2]
    };
    let t = nobs as f64;
    row[0] + row[1] / t + row[2] / (t * t) + row[3] / (t * t * t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn describe_by_hand() {
        let d = describe(&[1.0f64, 2.0, 3.0]).unwrap();
        assert_eq!(d.mean, 2.0);
        assert_eq!(d.median, 2.0);
        assert_eq!(d.min, 1.0);
        assert_eq!(d.max, 3.0);
        assert!((d.std_dev - 1.0).abs() < 1e-15);
        assert_eq!(d.skewness, Some(0.0));
        // m2 = 2/3, m4 = 2/3 -> 1.5
        assert!((d.kurtosis.unwrap() - 1.5).abs() < 1e-14);
        assert_eq!(describe(&[4.0, 1.0, 3.0, 2.0]).unwrap().median, 2.5);
    }

    #[test]
    fn constant_series_has_no_skew() {
        let d = describe(&[5.0, 5.0, 5.0, 5.0]).unwrap();
        assert_eq!(d.std_dev, 0.0);
        assert_eq!(d.moments(), Err(StatsError::SkewUndefined));
        let d = describe(&[0.1f64; 7]).unwrap();
        assert_eq!(d.moments(), Err(StatsError::SkewUndefined));
        assert_eq!(jarque_bera(&[0.3; 10], 0.05), Err(StatsError::SkewUndefined));
    }

    #[test]
    fn too_few() {
        assert!(matches!(describe(&[1.0]), Err(StatsError::TooFewObservations { .. })));
        assert!(matches!(jarque_bera(&[1.0, 2.0, 3.0], 0.05), Err(StatsError::TooFewObservations { .. })));
        assert!(matches!(
            adf_test(&[1.0; 12], 4, AdfSpec::Constant, 0.05),
            Err(StatsError::TooFewObservations { .. })
        ));
    }

    #[test]
    fn jarque_bera_zero_for_normal_moments() {
        // symmetric with m4/m2^2 = 3: values +-a with weights chosen accordingly
        // {-c, 0 x4, c}: m2 = 2c^2/6, m4 = 2c^4/6 -> K = 3
        let x = [-1.0f64, 0.0, 0.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        let r = jarque_bera(&x, 0.05).unwrap();
        assert!(r.statistic.abs() < 1e-12);
        assert!((r.p_value - 1.0).abs() < 1e-12);
        assert_eq!(r.decision, Decision::FailToReject);
    }

    #[test]
    fn mackinnon_matches_critical_values() {
        // asymptotic 5% and 1% critical values should map to about 0.05 and 0.01
        let p5 = mackinnon_p_value(-2.86154, AdfSpec::Constant);
        let p1 = mackinnon_p_value(-3.43035, AdfSpec::Constant);
        assert!((p5 - 0.05).abs() < 0.003, "{p5}");
        assert!((p1 - 0.01).abs() < 0.002, "{p1}");
        let p5 = mackinnon_p_value(-3.41049, AdfSpec::ConstantTrend);
        assert!((p5 - 0.05).abs() < 0.003, "{p5}");
        let p5 = mackinnon_p_value(-1.94100, AdfSpec::None);
        assert!((p5 - 0.05).abs() < 0.003, "{p5}");
        assert_eq!(mackinnon_p_value(5.0, AdfSpec::Constant), 1.0);
        assert_eq!(mackinnon_p_value(-40.0, AdfSpec::Constant), 0.0);
        // monotone in the statistic
        let mut prev = 0.0;
        for i in 0..200 {
            let p = mackinnon_p_value(-10.0 + i as f64 * 0.06, AdfSpec::Constant);
            assert!(p >= prev);
            prev = p;
        }
    }

    #[test]
    fn adf_collinear_series_is_singular() {
        let x = vec![1.0; 40];
        assert_eq!(adf_test(&x, 2, AdfSpec::Constant, 0.05), Err(StatsError::SingularRegression));
    }

    proptest! {
        #[test]
        fn describe_affine_covariance(
            x in prop::collection::vec(-10.0f64..10.0, 5..60),
            a in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0],
            b in -100.0f64..100.0,
        ) {
            let d = describe(&x).unwrap();
            prop_assume!(d.std_dev > 1e-3);
            let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let e = describe(&y).unwrap();
            let tol = 1e-8 * (1.0 + b.abs() + a.abs() * 10.0);
            prop_assert!((e.mean - (a * d.mean + b)).abs() < tol);
            prop_assert!((e.std_dev - a.abs() * d.std_dev).abs() < tol);
            prop_assert!((e.skewness.unwrap() - a.signum() * d.skewness.unwrap()).abs() < 1e-6);
            prop_assert!((e.kurtosis.unwrap() - d.kurtosis.unwrap()).abs() < 1e-6);
            prop_assert!(e.min <= e.median && e.median <= e.max);
        }

        #[test]
        fn jarque_bera_affine_invariant(
            x in prop::collection::vec(-10.0f64..10.0, 8..60),
            a in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0],
            b in -100.0f64..100.0,
        ) {
            prop_assume!(describe(&x).unwrap().std_dev > 1e-3);
            let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let j1 = jarque_bera(&x, 0.05).unwrap().statistic;
            let j2 = jarque_bera(&y, 0.05).unwrap().statistic;
            prop_assert!((j1 - j2).abs() < 1e-6 * (1.0 + j1));
        }

        #[test]
        fn adf_shift_invariant(
            steps in prop::collection::vec(-1.0f64..1.0, 60..120),
            c in -50.0f64..50.0,
        ) {
            let mut x = vec![0.0];
            for (i, s) in steps.iter().enumerate() {
                let prev = x[i];
                x.push(0.7 * prev + s);
            }
            let y: Vec<f64> = x.iter().map(|v| v + c).collect();
            let a = adf_test(&x, 4, AdfSpec::Constant, 0.05).unwrap();
            let b = adf_test(&y, 4, AdfSpec::Constant, 0.05).unwrap();
            prop_assert!((a.statistic - b.statistic).abs() < 1e-6, "{} vs {}", a.statistic, b.statistic);
        }
    }
}
