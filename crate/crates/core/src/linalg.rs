//! Small dense linear algebra on row-major `Vec<Vec<F>>` matrices.

use crate::scalar::Scalar;

pub type Matrix<F> = Vec<Vec<F>>;

/// Lower-triangular Cholesky factor, or `None` when the matrix is not
/// numerically positive definite.
pub fn cholesky<F: Scalar>(a: &Matrix<F>) -> Option<Matrix<F>> {
    let n = a.len();
    let scale = (0..n).map(|i| a[i][i].abs()).fold(F::zero(), F::max);
    let tol = scale * F::epsilon() * F::of_usize(n.max(1));
    let mut l = vec![vec![F::zero(); n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s = s - l[i][k] * l[j][k];
            }
            if i == j {
                if !(s > tol) {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

pub fn cholesky_solve<F: Scalar>(l: &Matrix<F>, b: &[F]) -> Vec<F> {
    let n = l.len();
    let mut y = vec![F::zero(); n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s = s - l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    let mut x = vec![F::zero(); n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s = s - l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    x
}

/// Inverse of a symmetric positive-definite matrix.
pub fn spd_inverse<F: Scalar>(a: &Matrix<F>) -> Option<Matrix<F>> {
    let l = cholesky(a)?;
    let n = a.len();
    let mut inv = vec![vec![F::zero(); n]; n];
    for j in 0..n {
        let mut e = vec![F::zero(); n];
        e[j] = F::one();
        let col = cholesky_solve(&l, &e);
        for i in 0..n {
            inv[i][j] = col[i];
        }
    }
    Some(inv)
}

/// Ordinary least squares fit.
#[derive(Clone, Debug)]
pub struct OlsFit<F> {
    pub coef: Vec<F>,
    pub std_errors: Vec<F>,
    pub ssr: F,
    pub nobs: usize,
}

/// Least squares via the normal equations; `None` on a singular design.
pub fn ols<F: Scalar>(x: &[Vec<F>], y: &[F]) -> Option<OlsFit<F>> {
    let n = y.len();
    let k = x.first()?.len();
    if n <= k {
        return None;
    }
    let mut xtx = vec![vec![F::zero(); k]; k];
    let mut xty = vec![F::zero(); k];
    for (row, &yi) in x.iter().zip(y) {
        for i in 0..k {
            xty[i] = xty[i] + row[i] * yi;
            for j in 0..=i {
                xtx[i][j] = xtx[i][j] + row[i] * row[j];
            }
        }
    }
    for i in 0..k {
        for j in 0..i {
            xtx[j][i] = xtx[i][j];
        }
    }
    // Rescale to unit diagonal so the pivot tolerance is scale-free.
    let d: Vec<F> = (0..k).map(|i| xtx[i][i].sqrt()).collect();
    if d.iter().any(|&v| !(v > F::zero())) {
        return None;
    }
    let scaled: Matrix<F> =
        (0..k).map(|i| (0..k).map(|j| xtx[i][j] / (d[i] * d[j])).collect()).collect();
    let l = cholesky(&scaled)?;
    if (0..k).any(|i| l[i][i] < F::of(1e-7)) {
        return None;
    }
    let rhs: Vec<F> = (0..k).map(|i| xty[i] / d[i]).collect();
    let coef: Vec<F> = cholesky_solve(&l, &rhs).iter().zip(&d).map(|(&c, &di)| c / di).collect();
    let ssr: F = x
        .iter()
        .zip(y)
        .map(|(row, &yi)| {
            let fit: F = row.iter().zip(&coef).map(|(&a, &b)| a * b).sum();
            (yi - fit) * (yi - fit)
        })
        .sum();
    let s2 = ssr / F::of_usize(n - k);
    let std_errors = (0..k)
        .map(|i| {
            let mut e = vec![F::zero(); k];
            e[i] = F::one();
            let col = cholesky_solve(&l, &e);
            (s2 * col[i]).sqrt() / d[i]
        })
        .collect();
    Some(OlsFit { coef, std_errors, ssr, nobs: n })
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order with matching unit eigenvectors
/// (as columns, `vectors[i][j]` is component `i` of vector `j`), or `None`
/// if the off-diagonal mass has not vanished after `max_sweeps`.
pub fn symmetric_eigen<F: Scalar>(a: &Matrix<F>, max_sweeps: usize) -> Option<(Vec<F>, Matrix<F>)> {
    let n = a.len();
    let mut m = a.clone();
    let mut v = vec![vec![F::zero(); n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = F::one();
    }
    let total: F = m.iter().flatten().map(|&x| x * x).sum();
    let tiny = total.sqrt() * F::epsilon() * F::epsilon();
    let tol = F::epsilon() * F::epsilon() * total.max(F::min_positive_value());
    let mut converged = false;
    for _ in 0..max_sweeps {
        let off: F = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        if off <= tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p][q].abs();
                let floor = F::epsilon() * (m[p][p] * m[q][q]).abs().sqrt() + tiny;
                if apq <= floor {
                    m[p][q] = F::zero();
                    m[q][p] = F::zero();
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (F::of(2.0) * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + F::one()).sqrt());
                let c = F::one() / (t * t + F::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
                m[p][q] = F::zero();
                m[q][p] = F::zero();
            }
        }
    }
    if !converged {
        return None;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j][j].partial_cmp(&m[i][i]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| m[i][i]).collect();
    let vectors = (0..n).map(|r| order.iter().map(|&c| v[r][c]).collect()).collect();
    Some((values, vectors))
}
