//! Maximum-likelihood estimation with constraint-enforcing reparameterization,
//! observed-information standard errors, t-statistics and AIC.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{MixedPanel, MonthSpan};
use crate::linalg::{ols, spd_inverse};
use crate::midas::TauLink;
use crate::model::{GarchMidas, ModelError, ParameterSet, PARAM_NAMES};
use crate::optim::{hessian, nelder_mead, NelderMeadOptions};
use crate::scalar::{mean, sample_variance, Scalar};

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error("no feasible starting point: every candidate start gives a non-positive long-run variance")]
    NoFeasibleStart,
    #[error("optimizer did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },
    #[error("Hessian of the log-likelihood is singular or not negative definite")]
    SingularHessian,
    #[error("panel is empty")]
    EmptyPanel,
    #[error("starting point is infeasible: {0}")]
    InfeasibleStart(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Parameters held at a given value during estimation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedParams<F> {
    pub mu: Option<F>,
    pub theta: Option<F>,
    pub omega1: Option<F>,
    pub omega2: Option<F>,
    pub m: Option<F>,
}

impl<F: Scalar> Default for FixedParams<F> {
    fn default() -> Self {
        Self { mu: None, theta: None, omega1: Some(F::one()), omega2: None, m: None }
    }
}

impl<F: Scalar> FixedParams<F> {
    /// `theta = 0` switches the regressor off; the weight shape is then unidentified and pinned too.
    pub fn plain_garch() -> Self {
        Self { theta: Some(F::zero()), omega2: Some(F::one()), ..Self::default() }
    }

    fn free_mask(&self) -> [bool; 7] {
        [
            self.mu.is_none(),
            true,
            true,
            self.theta.is_none(),
            self.omega1.is_none(),
            self.omega2.is_none(),
            self.m.is_none(),
        ]
    }

    fn apply(&self, p: &mut ParameterSet<F>) {
        if let Some(v) = self.mu {
            p.mu = v;
        }
        if let Some(v) = self.theta {
            p.theta = v;
        }
        if let Some(v) = self.omega1 {
            p.omega1 = v;
        }
        if let Some(v) = self.omega2 {
            p.omega2 = v;
        }
        if let Some(v) = self.m {
            p.m = v;
        }
    }
}

#[derive(Clone, Debug)]
pub struct FitOptions<F> {
    pub fixed: FixedParams<F>,
    pub link: TauLink,
    pub optimizer: NelderMeadOptions<F>,
    /// Single user-supplied start; replaces the multi-start grid.
    pub start: Option<ParameterSet<F>>,
    /// Number of best grid points refined by the simplex search.
    pub refine_starts: usize,
    /// Turn non-convergence into an error instead of a flag.
    pub strict: bool,
}

impl<F: Scalar> Default for FitOptions<F> {
    fn default() -> Self {
        Self {
            fixed: FixedParams::default(),
            link: TauLink::Level,
            optimizer: NelderMeadOptions::default(),
            start: None,
            refine_starts: 3,
            strict: false,
        }
    }
}

/// Maps constrained parameters to an unconstrained vector over the free parameters.
///
/// `alpha = e^a / (1 + e^a + e^b)`, `beta = e^b / (1 + e^a + e^b)` keeps both
/// positive with `alpha + beta < 1`; `omega = 1 + w^2` keeps `omega >= 1`.
#[derive(Clone, Debug)]
pub struct Transform<F> {
    template: ParameterSet<F>,
    free: [bool; 7],
}

impl<F: Scalar> Transform<F> {
    pub fn new(fixed: &FixedParams<F>, template: ParameterSet<F>) -> Self {
        let mut template = template;
        fixed.apply(&mut template);
        Self { template, free: fixed.free_mask() }
    }

    pub fn free(&self) -> &[bool; 7] {
        &self.free
    }

    pub fn n_free(&self) -> usize {
        self.free.iter().filter(|&&f| f).count()
    }

    pub fn to_unconstrained(&self, p: &ParameterSet<F>) -> Vec<F> {
        let rest = F::one() - p.alpha - p.beta;
        let vals = [
            p.mu,
            (p.alpha / rest).ln(),
            (p.beta / rest).ln(),
            p.theta,
            (p.omega1 - F::one()).sqrt(),
            (p.omega2 - F::one()).sqrt(),
            p.m,
        ];
        vals.iter().zip(&self.free).filter(|(_, &f)| f).map(|(&v, _)| v).collect()
    }

    pub fn from_unconstrained(&self, u: &[F]) -> ParameterSet<F> {
        let mut vals = self.template.to_array();
        let mut it = u.iter().copied();
        let mut raw = [F::zero(); 7];
        for i in 0..7 {
            if self.free[i] {
                raw[i] = it.next().expect("one value per free parameter");
            }
        }
        if self.free[0] {
            vals[0] = raw[0];
        }
        let (ea, eb) = (raw[1].exp(), raw[2].exp());
        let d = F::one() + ea + eb;
        vals[1] = ea / d;
        vals[2] = eb / d;
        if self.free[3] {
            vals[3] = raw[3];
        }
        if self.free[4] {
            vals[4] = F::one() + raw[4] * raw[4];
        }
        if self.free[5] {
            vals[5] = F::one() + raw[5] * raw[5];
        }
        if self.free[6] {
            vals[6] = raw[6];
        }
        ParameterSet::from_array(vals)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamEstimate<F> {
    pub name: String,
    pub value: F,
    pub std_error: Option<F>,
    pub t_stat: Option<F>,
    pub fixed: bool,
}

impl<F: Scalar> ParamEstimate<F> {
    /// `***`, `**`, `*` for two-sided normal significance at 1%, 5%, 10%.
    pub fn stars(&self) -> &'static str {
        match self.t_stat.map(|t| t.abs().as_f64()) {
            Some(t) if t > 2.575_829 => "***",
            Some(t) if t > 1.959_964 => "**",
            Some(t) if t > 1.644_854 => "*",
            _ => "",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StdErrorStatus {
    Ok,
    SingularHessian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult<F> {
    pub regressor: String,
    pub params: ParameterSet<F>,
    pub estimates: Vec<ParamEstimate<F>>,
    pub log_lik: F,
    pub aic: F,
    /// Number of free parameters entering the AIC.
    pub n_params: usize,
    pub n_obs: usize,
    pub n_lags: usize,
    pub window: MonthSpan,
    pub link: TauLink,
    pub converged: bool,
    pub n_iterations: usize,
    pub std_error_status: StdErrorStatus,
    /// Best log-likelihood after each optimizer iteration of the winning run.
    #[serde(skip)]
    pub trace: Vec<F>,
    /// Log-likelihood at every feasible multi-start point.
    #[serde(skip)]
    pub start_log_liks: Vec<F>,
}

impl<F: Scalar> FitResult<F> {
    pub fn estimate(&self, name: &str) -> Option<&ParamEstimate<F>> {
        self.estimates.iter().find(|e| e.name == name)
    }

    /// Result carrying given parameters without estimation, e.g. to forecast at
    /// known true values. No standard errors; `n_params` counts nothing.
    pub fn at_params(params: ParameterSet<F>, panel: &MixedPanel<F>, link: TauLink) -> Result<Self, EstimateError> {
        params.validate()?;
        let window = panel.span().ok_or(EstimateError::EmptyPanel)?;
        let log_lik = GarchMidas::new(link).log_likelihood(&params, panel);
        let estimates = params
            .to_array()
            .iter()
            .zip(PARAM_NAMES)
            .map(|(&value, name)| ParamEstimate { name: name.to_string(), value, std_error: None, t_stat: None, fixed: true })
            .collect();
        Ok(Self {
            regressor: panel.regressor().to_string(),
            params,
            estimates,
            log_lik,
            aic: aic(log_lik, 0),
            n_params: 0,
            n_obs: panel.n_days(),
            n_lags: panel.n_lags(),
            window,
            link,
            converged: true,
            n_iterations: 0,
            std_error_status: StdErrorStatus::Ok,
            trace: vec![],
            start_log_liks: vec![],
        })
    }

    pub fn model(&self) -> GarchMidas {
        GarchMidas::new(self.link)
    }

    /// Aligned-text table: one row per parameter plus likelihood summary.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "GARCH-MIDAS-{}  ({} .. {}, K={})", self.regressor, self.window.start, self.window.end, self.n_lags);
        let _ = writeln!(s, "{:<8}{:>14}{:>14}{:>10}", "Para.", "Val.", "Std.", "t stat.");
        for e in &self.estimates {
            let se = e.std_error.map_or_else(|| if e.fixed { "fixed".to_string() } else { "n/a".to_string() }, |v| format!("{:.4e}", v.as_f64()));
            let t = e.t_stat.map_or_else(String::new, |v| format!("{:.2}{}", v.as_f64(), e.stars()));
            let _ = writeln!(s, "{:<8}{:>14.6}{:>14}{:>10}", e.name, e.value.as_f64(), se, t);
        }
        let _ = writeln!(s, "{:<8}{:>14.4}", "LL", self.log_lik.as_f64());
        let _ = writeln!(s, "{:<8}{:>14.4}", "AIC", self.aic.as_f64());
        let _ = writeln!(s, "{:<8}{:>14}", "n_obs", self.n_obs);
        let _ = writeln!(s, "{:<8}{:>14}", "conv.", if self.converged { "yes" } else { "NO" });
        s
    }
}

pub fn aic<F: Scalar>(log_lik: F, k: usize) -> F {
    F::of(2.0) * F::of_usize(k) - F::of(2.0) * log_lik
}

/// Starting values of `(m, theta)` from a regression of monthly mean squared
/// returns on the flat-weighted regressor.
fn moment_starts<F: Scalar>(panel: &MixedPanel<F>, mu: F, fixed: &FixedParams<F>) -> Vec<(F, F)> {
    let y: Vec<F> = panel
        .periods()
        .iter()
        .map(|p| p.returns.iter().map(|&r| (r - mu) * (r - mu)).sum::<F>() / F::of_usize(p.n_days()))
        .collect();
    let x: Vec<F> = panel.lags().iter().map(|l| mean(l)).collect();
    let ybar = mean(&y);
    let mut out = Vec::new();
    match (fixed.m, fixed.theta) {
        (Some(m), Some(t)) => out.push((m, t)),
        (None, Some(t)) => {
            let m = mean(&y.iter().zip(&x).map(|(&yi, &xi)| yi - t * xi).collect::<Vec<_>>());
            out.push((m, t));
        }
        (Some(m), None) => {
            let sxx: F = x.iter().map(|&v| v * v).sum();
            let t = if sxx > F::zero() {
                x.iter().zip(&y).map(|(&xi, &yi)| xi * (yi - m)).sum::<F>() / sxx
            } else {
                F::zero()
            };
            out.push((m, t));
        }
        (None, None) => {
            let design: Vec<Vec<F>> = x.iter().map(|&v| vec![F::one(), v]).collect();
            if let Some(fit) = ols(&design, &y) {
                out.push((fit.coef[0], fit.coef[1]));
            }
            out.push((ybar, F::zero()));
        }
    }
    out
}

fn initial_steps<F: Scalar>(transform: &Transform<F>, start: &ParameterSet<F>, panel: &MixedPanel<F>) -> Vec<F> {
    let r = panel.returns();
    let var = if r.len() > 1 { sample_variance(&r) } else { F::one() };
    let var = if var > F::zero() { var } else { F::of(1e-8) };
    let xbar = panel.lags().iter().flatten().map(|v| v.abs()).sum::<F>()
        / F::of_usize(panel.lags().len() * panel.n_lags());
    let xbar = if xbar > F::zero() { xbar } else { F::one() };
    let tenth = F::of(0.1);
    let all = [
        tenth * var.sqrt(),
        F::of(0.3),
        F::of(0.3),
        F::of(0.2) * start.theta.abs() + F::of(0.05) * var / xbar,
        F::of(0.5),
        F::of(0.5),
        F::of(0.2) * start.m.abs() + F::of(0.05) * var,
    ];
    all.iter().zip(transform.free()).filter(|(_, &f)| f).map(|(&s, _)| s).collect()
}

/// Maximum-likelihood fit of the model to `panel`.
pub fn fit<F: Scalar>(panel: &MixedPanel<F>, options: &FitOptions<F>) -> Result<FitResult<F>, EstimateError> {
    if panel.is_empty() {
        return Err(EstimateError::EmptyPanel);
    }
    let model = GarchMidas::new(options.link);
    let returns = panel.returns();
    let n = F::of_usize(returns.len());
    let mu0 = options.fixed.mu.unwrap_or_else(|| mean(&returns));

    let mut candidates: Vec<ParameterSet<F>> = Vec::new();
    if let Some(mut s) = options.start {
        options.fixed.apply(&mut s);
        s.validate().map_err(|e| EstimateError::InfeasibleStart(e.to_string()))?;
        candidates.push(s);
    } else {
        let omega1 = options.fixed.omega1.unwrap_or(F::one());
        for (m, theta) in moment_starts(panel, mu0, &options.fixed) {
            for alpha in [0.05, 0.1, 0.2] {
                for beta in [0.7, 0.85, 0.9] {
                    for omega2 in [1.5, 3.0, 10.0] {
                        let mut p = ParameterSet {
                            mu: mu0,
                            alpha: F::of(alpha),
                            beta: F::of(beta),
                            theta,
                            omega1,
                            omega2: F::of(omega2),
                            m,
                        };
                        options.fixed.apply(&mut p);
                        if !candidates.contains(&p) {
                            candidates.push(p);
                        }
                    }
                }
            }
        }
    }

    let mut scored: Vec<(F, ParameterSet<F>)> = candidates
        .into_iter()
        .map(|p| (model.log_likelihood(&p, panel), p))
        .filter(|(ll, _)| ll.is_finite())
        .collect();
    if scored.is_empty() {
        return if options.start.is_some() {
            Err(EstimateError::InfeasibleStart("non-positive long-run variance".into()))
        } else {
            Err(EstimateError::NoFeasibleStart)
        };
    }
    let start_log_liks: Vec<F> = scored.iter().map(|(ll, _)| *ll).collect();
    // stable sort keeps grid order among ties, so the search is deterministic
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));

    let mut best: Option<(ParameterSet<F>, F, crate::optim::Minimum<F>)> = None;
    for (_, start) in scored.iter().take(options.refine_starts.max(1)) {
        let transform = Transform::new(&options.fixed, *start);
        let x0 = transform.to_unconstrained(start);
        let steps = initial_steps(&transform, start, panel);
        let objective = |u: &[F]| -model.log_likelihood(&transform.from_unconstrained(u), panel) / n;
        let res = nelder_mead(objective, &x0, &steps, &options.optimizer);
        let p = transform.from_unconstrained(&res.x);
        let ll = model.log_likelihood(&p, panel);
        if best.as_ref().is_none_or(|(_, b, _)| ll > *b) {
            best = Some((p, ll, res));
        }
    }
    let (params, log_lik, run) = best.expect("at least one start refined");
    if options.strict && !run.converged {
        return Err(EstimateError::NonConvergence { iterations: run.iterations });
    }
    let transform = Transform::new(&options.fixed, params);
    let k = transform.n_free();
    let mut result = FitResult {
        regressor: panel.regressor().to_string(),
        params,
        estimates: vec![],
        log_lik,
        aic: aic(log_lik, k),
        n_params: k,
        n_obs: returns.len(),
        n_lags: panel.n_lags(),
        window: panel.span().expect("non-empty panel"),
        link: options.link,
        converged: run.converged,
        n_iterations: run.iterations,
        std_error_status: StdErrorStatus::Ok,
        trace: run.trace.iter().map(|&f| -f * n).collect(),
        start_log_liks,
    };
    let ses = match standard_errors_with(&result, panel, transform.free()) {
        Ok(se) => se,
        Err(EstimateError::SingularHessian) => {
            result.std_error_status = StdErrorStatus::SingularHessian;
            vec![None; 7]
        }
        Err(e) => return Err(e),
    };
    let free = transform.free();
    result.estimates = params
        .to_array()
        .iter()
        .enumerate()
        .map(|(i, &value)| ParamEstimate {
            name: PARAM_NAMES[i].to_string(),
            value,
            std_error: ses[i],
            t_stat: ses[i].map(|s| value / s),
            fixed: !free[i],
        })
        .collect();
    Ok(result)
}

/// Standard errors from the inverse observed information, computed by
/// central differences of the log-likelihood in the original parameter space.
pub fn standard_errors_from<F: Scalar>(
    log_lik: impl FnMut(&[F]) -> F,
    x: &[F],
    steps: &[F],
) -> Result<Vec<F>, EstimateError> {
    let h = hessian(log_lik, x, steps);
    if h.iter().flatten().any(|v| !v.is_finite()) {
        return Err(EstimateError::SingularHessian);
    }
    let neg: Vec<Vec<F>> = h.iter().map(|row| row.iter().map(|&v| -v).collect()).collect();
    let inv = spd_inverse(&neg).ok_or(EstimateError::SingularHessian)?;
    Ok((0..x.len()).map(|i| inv[i][i].sqrt()).collect())
}

/// Relative difference step, `1e-4 * max(|x|, 1e-2)`.
fn se_step<F: Scalar>(x: F) -> F {
    F::of(1e-4) * x.abs().max(F::of(1e-2))
}

fn standard_errors_with<F: Scalar>(
    fit: &FitResult<F>,
    panel: &MixedPanel<F>,
    free: &[bool; 7],
) -> Result<Vec<Option<F>>, EstimateError> {
    let model = fit.model();
    let base = fit.params.to_array();
    // a shape parameter sitting on its lower bound of 1 has no two-sided
    // neighbourhood; it is left without a standard error
    let on_bound = |i: usize| (i == 4 || i == 5) && base[i] - se_step(base[i]) < F::one();
    let idx: Vec<usize> = (0..7).filter(|&i| free[i] && !on_bound(i)).collect();
    if idx.is_empty() {
        return Ok(vec![None; 7]);
    }
    let x: Vec<F> = idx.iter().map(|&i| base[i]).collect();
    let steps: Vec<F> = x.iter().map(|&v| se_step(v)).collect();
    let ll = |v: &[F]| {
        let mut a = base;
        for (&i, &vi) in idx.iter().zip(v) {
            a[i] = vi;
        }
        model.log_likelihood(&ParameterSet::from_array(a), panel)
    };
    let se = standard_errors_from(ll, &x, &steps)?;
    let mut out = vec![None; 7];
    for (&i, s) in idx.iter().zip(se) {
        out[i] = Some(s);
    }
    Ok(out)
}

/// Standard errors of the free parameters of `fit`, in canonical parameter order
/// (`None` for fixed parameters).
pub fn standard_errors<F: Scalar>(fit: &FitResult<F>, panel: &MixedPanel<F>) -> Result<Vec<Option<F>>, EstimateError> {
    let mut free = [false; 7];
    for (i, name) in PARAM_NAMES.iter().enumerate() {
        free[i] = fit.estimate(name).is_none_or(|e| !e.fixed);
    }
    standard_errors_with(fit, panel, &free)
}
