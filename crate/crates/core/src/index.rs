//! Global index from a panel of country-level monthly indexes via the first
//! principal component.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, LowFrequencySeries, YearMonth};
use crate::linalg::symmetric_eigen;
use crate::scalar::{mean, sample_variance, Scalar};

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("degenerate panel: {0}")]
    DegeneratePanel(String),
    #[error("eigen-solver did not converge")]
    ConvergenceFailure,
    #[error("complete-case months are not contiguous: {0} is missing")]
    InteriorGap(YearMonth),
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Months x countries, complete cases only.
#[derive(Clone, Debug, PartialEq)]
pub struct IndexPanel<F> {
    months: Vec<YearMonth>,
    countries: Vec<String>,
    matrix: Vec<Vec<F>>,
    dropped: usize,
}

impl<F: Scalar> IndexPanel<F> {
    /// Builds a panel from rows that may contain missing cells; rows with any
    /// gap are dropped and counted.
    pub fn new(
        countries: Vec<String>,
        rows: Vec<(YearMonth, Vec<Option<F>>)>,
    ) -> Result<Self, IndexError> {
        let mut sorted: BTreeMap<YearMonth, Vec<Option<F>>> = BTreeMap::new();
        for (m, row) in rows {
            if row.len() != countries.len() {
                return Err(IndexError::DegeneratePanel(format!("row {m} has {} cells, expected {}", row.len(), countries.len())));
            }
            if sorted.insert(m, row).is_some() {
                return Err(DataError::DuplicateMonth(m).into());
            }
        }
        let mut months = Vec::new();
        let mut matrix = Vec::new();
        let mut dropped = 0;
        for (m, row) in sorted {
            match row.into_iter().collect::<Option<Vec<F>>>() {
                Some(r) if r.iter().all(|v| v.is_finite()) => {
                    months.push(m);
                    matrix.push(r);
                }
                _ => dropped += 1,
            }
        }
        if countries.len() < 2 {
            return Err(IndexError::DegeneratePanel(format!("need at least 2 countries, got {}", countries.len())));
        }
        if months.len() < 3 {
            return Err(IndexError::DegeneratePanel(format!("need at least 3 complete months, got {}", months.len())));
        }
        Ok(Self { months, countries, matrix, dropped })
    }

    pub fn months(&self) -> &[YearMonth] {
        &self.months
    }

    pub fn countries(&self) -> &[String] {
        &self.countries
    }

    pub fn matrix(&self) -> &[Vec<F>] {
        &self.matrix
    }

    pub fn dropped_months(&self) -> usize {
        self.dropped
    }

    fn column(&self, j: usize) -> Vec<F> {
        self.matrix.iter().map(|r| r[j]).collect()
    }
}

/// Parses a wide CSV `month,C1,C2,...`; empty cells are missing.
pub fn read_index_panel<F: Scalar, R: Read>(input: R) -> Result<IndexPanel<F>, IndexError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let bad = |line: u64, reason: String| IndexError::MalformedRow { line, reason };
    let headers = rdr.headers().map_err(|e| bad(1, e.to_string()))?.clone();
    let countries: Vec<String> = headers.iter().skip(1).map(|h| h.trim().to_string()).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let month: YearMonth = rec.get(0).unwrap_or("").parse().map_err(|r| bad(line, r))?;
        let mut row = Vec::with_capacity(countries.len());
        for j in 0..countries.len() {
            let cell = rec.get(j + 1).unwrap_or("").trim();
            if cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan") {
                row.push(None);
            } else {
                let v: f64 = cell.parse().map_err(|_| bad(line, format!("`{cell}` is not a number")))?;
                row.push(Some(F::of(v)));
            }
        }
        rows.push((month, row));
    }
    IndexPanel::new(countries, rows)
}

pub fn load_index_panel<F: Scalar>(path: impl AsRef<std::path::Path>) -> Result<IndexPanel<F>, IndexError> {
    read_index_panel(std::fs::File::open(path)?)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    /// Correlation-matrix PCA.
    #[default]
    Standardize,
    /// Covariance-matrix PCA.
    CenterOnly,
}

impl std::str::FromStr for Scaling {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "standardize" => Ok(Scaling::Standardize),
            "center_only" | "center-only" => Ok(Scaling::CenterOnly),
            _ => Err(format!("unknown scaling `{s}` (standardize, center_only)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalIndex<F> {
    pub series: LowFrequencySeries<F>,
    /// Raw first-component scores before the affine rescale.
    pub scores: Vec<F>,
    pub loadings: Vec<(String, F)>,
    pub explained_variance: F,
    pub dropped_months: usize,
    pub scaling: Scaling,
}

/// JSON sidecar written next to the index CSV.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IndexSidecar<F> {
    pub loadings: Vec<(String, F)>,
    pub explained_variance: F,
    pub dropped_months: usize,
    pub scaling: Scaling,
}

impl<F: Scalar> GlobalIndex<F> {
    pub fn sidecar(&self) -> IndexSidecar<F> {
        IndexSidecar {
            loadings: self.loadings.clone(),
            explained_variance: self.explained_variance,
            dropped_months: self.dropped_months,
            scaling: self.scaling,
        }
    }
}

/// First-principal-component index.
///
/// Loadings are signed so their mean is positive (first non-zero loading
/// positive on a tie). Scores are rescaled to the mean and standard
/// deviation of the cross-country average series.
pub fn build_global_index<F: Scalar>(
    panel: &IndexPanel<F>,
    scaling: Scaling,
    label: &str,
) -> Result<GlobalIndex<F>, IndexError> {
    let n = panel.months.len();
    let p = panel.countries.len();
    let mut cols: Vec<Vec<F>> = (0..p).map(|j| panel.column(j)).collect();
    for (j, col) in cols.iter_mut().enumerate() {
        let m = mean(col);
        let sd = sample_variance(col).sqrt();
        let scale = col.iter().fold(F::zero(), |a, &v| a.max(v.abs()));
        if !(sd > F::epsilon() * scale * F::of(16.0)) {
            return Err(IndexError::DegeneratePanel(format!("column `{}` has zero variance", panel.countries[j])));
        }
        let div = if scaling == Scaling::Standardize { sd } else { F::one() };
        col.iter_mut().for_each(|v| *v = (*v - m) / div);
    }
    let denom = F::of_usize(n - 1);
    let cov: Vec<Vec<F>> = (0..p)
        .map(|a| (0..p).map(|b| cols[a].iter().zip(&cols[b]).map(|(&x, &y)| x * y).sum::<F>() / denom).collect())
        .collect();
    let (values, vectors) = symmetric_eigen(&cov, 100).ok_or(IndexError::ConvergenceFailure)?;
    let total: F = values.iter().map(|&v| v.max(F::zero())).sum();
    let explained = (values[0].max(F::zero()) / total).min(F::one());
    let mut load: Vec<F> = (0..p).map(|i| vectors[i][0]).collect();
    let mean_load = mean(&load);
    let max_abs = load.iter().fold(F::zero(), |a, &v| a.max(v.abs()));
    let flip = if mean_load.abs() > F::of(1e-12) * max_abs {
        mean_load < F::zero()
    } else {
        load.iter().find(|v| v.abs() > F::of(1e-12) * max_abs).is_some_and(|&v| v < F::zero())
    };
    if flip {
        load.iter_mut().for_each(|v| *v = -*v);
    }
    let scores: Vec<F> = (0..n).map(|t| (0..p).map(|j| cols[j][t] * load[j]).sum()).collect();
    let avg: Vec<F> = panel.matrix.iter().map(|r| mean(r)).collect();
    let (avg_mean, avg_sd) = (mean(&avg), sample_variance(&avg).sqrt());
    let (s_mean, s_sd) = (mean(&scores), sample_variance(&scores).sqrt());
    let values: Vec<F> = scores.iter().map(|&s| avg_mean + avg_sd * (s - s_mean) / s_sd).collect();

    for w in panel.months.windows(2) {
        if w[1] != w[0].offset(1) {
            return Err(IndexError::InteriorGap(w[0].offset(1)));
        }
    }
    let series = LowFrequencySeries::new(panel.months.iter().copied().zip(values).collect(), label)?;
    Ok(GlobalIndex {
        series,
        scores,
        loadings: panel.countries.iter().cloned().zip(load).collect(),
        explained_variance: explained,
        dropped_months: panel.dropped,
        scaling,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let (ma, mb) = (mean(a), mean(b));
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    fn panel(cols: &[Vec<f64>]) -> IndexPanel<f64> {
        let start = YearMonth::new(2000, 1).unwrap();
        let rows = (0..cols[0].len())
            .map(|t| (start.offset(t as i64), cols.iter().map(|c| Some(c[t])).collect()))
            .collect();
        IndexPanel::new((0..cols.len()).map(|j| format!("C{j}")).collect(), rows).unwrap()
    }

    #[test]
    fn identical_columns() {
        let x = vec![1.0, 3.0, 2.0, 5.0, 4.0, 7.0];
        for scaling in [Scaling::Standardize, Scaling::CenterOnly] {
            let g = build_global_index(&panel(&[x.clone(), x.clone()]), scaling, "G").unwrap();
            assert!((g.explained_variance - 1.0).abs() < 1e-12);
            assert!((corr(&g.series.values(), &x).abs() - 1.0).abs() < 1e-12);
            // rescaled to the average series, which is x itself
            for (a, b) in g.series.values().iter().zip(&x) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn antisymmetric_pair() {
        let x = vec![1.0, 3.0, 2.0, 5.0, 4.0, 7.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let g = build_global_index(&panel(&[x, neg]), Scaling::Standardize, "G").unwrap();
        assert!((g.explained_variance - 1.0).abs() < 1e-12);
        let mean_load = (g.loadings[0].1 + g.loadings[1].1) / 2.0;
        assert!(mean_load >= -1e-12);
        assert!(g.loadings[0].1 > 0.0);
    }

    #[test]
    fn degenerate_inputs() {
        let x = vec![1.0, 3.0, 2.0, 5.0];
        let err = build_global_index(&panel(&[x.clone(), vec![2.0; 4]]), Scaling::Standardize, "G").unwrap_err();
        assert!(matches!(err, IndexError::DegeneratePanel(_)));
        let start = YearMonth::new(2000, 1).unwrap();
        let err = IndexPanel::<f64>::new(vec!["A".into()], vec![(start, vec![Some(1.0)])]).unwrap_err();
        assert!(matches!(err, IndexError::DegeneratePanel(_)));
    }

    #[test]
    fn drops_incomplete_months() {
        let csv = "month,US,UK,DE\n2000-01,1,2,3\n2000-02,2,,4\n2000-03,3,4,4\n2000-04,5,5,7\n2000-05,4,6,6\n";
        let p: IndexPanel<f64> = read_index_panel(csv.as_bytes()).unwrap();
        assert_eq!(p.dropped_months(), 1);
        assert_eq!(p.months().len(), 4);
        let err = build_global_index(&p, Scaling::Standardize, "G").unwrap_err();
        assert!(matches!(err, IndexError::InteriorGap(_)));

        let csv = "month,US,UK\n2000-01,1,\n2000-02,2,4\n2000-03,3,4.5\n2000-04,5,5\n";
        let p: IndexPanel<f64> = read_index_panel(csv.as_bytes()).unwrap();
        let g = build_global_index(&p, Scaling::CenterOnly, "G").unwrap();
        assert_eq!(g.dropped_months, 1);
        assert_eq!(g.series.first_month(), YearMonth::new(2000, 2));
    }

    #[test]
    fn column_order_and_positive_affine_invariance() {
        let a = vec![1.0, 3.0, 2.0, 5.0, 4.0, 7.0, 6.5];
        let b = vec![2.0, 2.5, 2.0, 4.0, 5.0, 6.0, 7.5];
        let c = vec![0.5, 1.0, 3.0, 2.0, 2.5, 4.0, 3.0];
        let g1 = build_global_index(&panel(&[a.clone(), b.clone(), c.clone()]), Scaling::Standardize, "G").unwrap();
        let g2 = build_global_index(&panel(&[c.clone(), a.clone(), b.clone()]), Scaling::Standardize, "G").unwrap();
        assert!((corr(&g1.scores, &g2.scores) - 1.0).abs() < 1e-12);
        assert!((g1.explained_variance - g2.explained_variance).abs() < 1e-12);
        let a2: Vec<f64> = a.iter().map(|v| 3.0 * v + 10.0).collect();
        let c2: Vec<f64> = c.iter().map(|v| 0.2 * v - 1.0).collect();
        let g3 = build_global_index(&panel(&[a2, b, c2]), Scaling::Standardize, "G").unwrap();
        for (s1, s3) in g1.scores.iter().zip(&g3.scores) {
            assert!((s1 - s3).abs() < 1e-10);
        }
        assert!(g1.explained_variance > 0.0 && g1.explained_variance <= 1.0);
        assert!(g1.explained_variance < 1.0);
    }
}
