//! Derivative-free Nelder-Mead simplex minimizer and a central-difference Hessian.

use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct NelderMeadOptions<F> {
    pub max_iter: usize,
    /// Relative spread of objective values across the simplex.
    pub f_tol: F,
    /// Simplex diameter, measured in units of the initial per-coordinate steps.
    pub x_tol: F,
    /// Fresh-simplex restarts from the best point after convergence.
    pub restarts: usize,
}

impl<F: Scalar> Default for NelderMeadOptions<F> {
    fn default() -> Self {
        Self { max_iter: 5000, f_tol: F::of(1e-9), x_tol: F::of(1e-7), restarts: 3 }
    }
}

#[derive(Clone, Debug)]
pub struct Minimum<F> {
    pub x: Vec<F>,
    pub f: F,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Best objective value after each iteration (non-increasing).
    pub trace: Vec<F>,
}

struct Counted<'a, F, O> {
    f: &'a mut O,
    evals: usize,
    _p: std::marker::PhantomData<F>,
}

impl<F: Scalar, O: FnMut(&[F]) -> F> Counted<'_, F, O> {
    fn eval(&mut self, x: &[F]) -> F {
        self.evals += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            F::infinity()
        } else {
            v
        }
    }
}

fn run<F: Scalar, O: FnMut(&[F]) -> F>(
    obj: &mut Counted<'_, F, O>,
    x0: &[F],
    steps: &[F],
    opts: &NelderMeadOptions<F>,
    trace: &mut Vec<F>,
) -> (Vec<F>, F, usize, bool) {
    let n = x0.len();
    let (rho, chi, gamma, sigma) = (F::one(), F::of(2.0), F::of(0.5), F::of(0.5));
    let mut simplex: Vec<(Vec<F>, F)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), obj.eval(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] = x[i] + steps[i];
        let fx = obj.eval(&x);
        simplex.push((x, fx));
    }
    let sort = |s: &mut Vec<(Vec<F>, F)>| {
        s.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    };
    sort(&mut simplex);
    let mut iter = 0;
    let mut converged = false;
    while iter < opts.max_iter {
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let f_spread = (worst - best).abs();
        let f_scale = best.abs().max(F::of(1e-300));
        let size = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).zip(steps).map(|((a, b), s)| (*a - *b).abs() / s.abs()))
            .fold(F::zero(), F::max);
        if best.is_finite() && f_spread <= opts.f_tol * f_scale && size <= opts.x_tol {
            converged = true;
            break;
        }
        iter += 1;

        let mut centroid = vec![F::zero(); n];
        for (x, _) in &simplex[..n] {
            for (c, &xi) in centroid.iter_mut().zip(x) {
                *c = *c + xi;
            }
        }
        let nf = F::of_usize(n);
        centroid.iter_mut().for_each(|c| *c = *c / nf);
        let along = |t: F| -> Vec<F> {
            centroid.iter().zip(&simplex[n].0).map(|(&c, &w)| c + t * (c - w)).collect()
        };

        let xr = along(rho);
        let fr = obj.eval(&xr);
        if fr < simplex[0].1 {
            let xe = along(rho * chi);
            let fe = obj.eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc, ok) = if fr < simplex[n].1 {
                let xc = along(rho * gamma);
                let fc = obj.eval(&xc);
                let ok = fc <= fr;
                (xc, fc, ok)
            } else {
                let xc = along(-gamma);
                let fc = obj.eval(&xc);
                let ok = fc < simplex[n].1;
                (xc, fc, ok)
            };
            if ok {
                simplex[n] = (xc, fc);
            } else {
                let x1 = simplex[0].0.clone();
                for (x, fx) in simplex.iter_mut().skip(1) {
                    for (xi, &bi) in x.iter_mut().zip(&x1) {
                        *xi = bi + sigma * (*xi - bi);
                    }
                    *fx = obj.eval(x);
                }
            }
        }
        sort(&mut simplex);
        trace.push(simplex[0].1);
    }
    let (x, f) = simplex.swap_remove(0);
    (x, f, iter, converged)
}

/// Minimizes `f` from `x0` with an initial simplex of per-coordinate `steps`,
/// then restarts from the best point until a restart stops improving.
pub fn nelder_mead<F: Scalar>(
    mut f: impl FnMut(&[F]) -> F,
    x0: &[F],
    steps: &[F],
    opts: &NelderMeadOptions<F>,
) -> Minimum<F> {
    assert_eq!(x0.len(), steps.len(), "one step per coordinate");
    let mut obj = Counted { f: &mut f, evals: 0, _p: std::marker::PhantomData };
    if x0.is_empty() {
        let v = obj.eval(x0);
        return Minimum { x: vec![], f: v, iterations: 0, evaluations: 1, converged: true, trace: vec![v] };
    }
    let mut trace = Vec::new();
    let (mut x, mut fx, mut iterations, mut converged) = run(&mut obj, x0, steps, opts, &mut trace);
    for _ in 0..opts.restarts {
        if iterations >= opts.max_iter {
            break;
        }
        let budget = NelderMeadOptions { max_iter: opts.max_iter - iterations, ..opts.clone() };
        let (x2, f2, it2, conv2) = run(&mut obj, &x, steps, &budget, &mut trace);
        iterations += it2;
        let improved = fx - f2;
        if f2 <= fx {
            x = x2;
            fx = f2;
            converged = conv2;
        }
        if !(improved > opts.f_tol * fx.abs().max(F::of(1e-300))) {
            break;
        }
    }
    // restarts re-seed the trace at the incumbent, keep it monotone
    let mut best = F::infinity();
    for v in trace.iter_mut() {
        best = best.min(*v);
        *v = best;
    }
    Minimum { x, f: fx, iterations, evaluations: obj.evals, converged, trace }
}

/// Central finite-difference Hessian of `f` at `x` with per-coordinate steps `h`.
pub fn hessian<F: Scalar>(mut f: impl FnMut(&[F]) -> F, x: &[F], h: &[F]) -> Vec<Vec<F>> {
    let n = x.len();
    let f0 = f(x);
    let mut out = vec![vec![F::zero(); n]; n];
    let mut pt = x.to_vec();
    let two = F::of(2.0);
    for i in 0..n {
        pt[i] = x[i] + h[i];
        let fp = f(&pt);
        pt[i] = x[i] - h[i];
        let fm = f(&pt);
        pt[i] = x[i];
        out[i][i] = (fp - two * f0 + fm) / (h[i] * h[i]);
        for j in 0..i {
            let mut eval = |si: F, sj: F| {
                pt[i] = x[i] + si * h[i];
                pt[j] = x[j] + sj * h[j];
                let v = f(&pt);
                pt[i] = x[i];
                pt[j] = x[j];
                v
            };
            let one = F::one();
            let v = (eval(one, one) - eval(one, -one) - eval(-one, one) + eval(-one, -one))
                / (F::of(4.0) * h[i] * h[j]);
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_rosenbrock() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opts = NelderMeadOptions { f_tol: 1e-14, x_tol: 1e-10, ..Default::default() };
        let m = nelder_mead(rosen, &[-1.2, 1.0], &[0.1, 0.1], &opts);
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6, "{:?}", m.x);
        assert!(m.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn infeasible_region_is_avoided() {
        // minimum of (x-2)^2 restricted to x < 1
        let f = |x: &[f64]| if x[0] >= 1.0 { f64::INFINITY } else { (x[0] - 2.0).powi(2) + x[1] * x[1] };
        let m = nelder_mead(f, &[0.0, 0.5], &[0.1, 0.1], &NelderMeadOptions::default());
        assert!(m.x[0] < 1.0 && m.x[0] > 0.999);
        assert!(m.f.is_finite());
    }

    #[test]
    fn hessian_of_quadratic() {
        let a = [[3.0, 1.0, 0.5], [1.0, 2.0, 0.25], [0.5, 0.25, 1.5]];
        let f = |x: &[f64]| {
            let mut s = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    s += 0.5 * a[i][j] * x[i] * x[j];
                }
            }
            s + x[0] - 2.0 * x[2]
        };
        let h = hessian(f, &[0.3, -0.2, 1.0], &[1e-3, 1e-3, 1e-3]);
        for i in 0..3 {
            for j in 0..3 {
                assert!((h[i][j] - a[i][j]).abs() < 1e-6);
            }
        }
    }
}
