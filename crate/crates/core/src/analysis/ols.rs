//! Least squares with heteroskedasticity-robust standard errors.
//!
//! Coefficients come from a Householder QR of the design, X = QR, so
//! β = R⁻¹Qᵀy and (XᵀX)⁻¹ = R⁻¹R⁻ᵀ without forming XᵀX. The sandwich
//! covariance is (XᵀX)⁻¹ Xᵀ diag(e²) X (XᵀX)⁻¹, scaled by n/(n−p) for HC1.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::AnalysisError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RobustKind {
    Hc0,
    #[default]
    Hc1,
}

/// A design matrix held by named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    n: usize,
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl Design {
    pub const INTERCEPT: &'static str = "constant";

    /// A design with only the intercept column.
    pub fn with_intercept(n: usize) -> Self {
        Self { n, names: vec![Self::INTERCEPT.to_string()], columns: vec![vec![1.0; n]] }
    }

    pub fn push(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<(), AnalysisError> {
        if values.len() != self.n {
            return Err(AnalysisError::Invalid(format!("column has {} rows, design has {}", values.len(), self.n)));
        }
        self.names.push(name.into());
        self.columns.push(values);
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.columns.len(), |i, j| self.columns[j][i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub robust: RobustKind,
    /// 1 − SSR/SST with centered SST. A constant outcome is fitted exactly
    /// by the intercept and reports 1.
    pub r_squared: f64,
    pub n: usize,
}

impl RegressionResult {
    pub fn coefficient(&self, name: &str) -> Option<(f64, f64)> {
        let i = self.names.iter().position(|n| n == name)?;
        Some((self.coefficients[i], self.std_errors[i]))
    }
}

const RANK_TOL: f64 = 1e-10;

/// Regresses `y` on the design. Fails if the design is rank deficient,
/// naming the first dependent column and the columns it is a combination of.
pub fn ols_robust(y: &[f64], design: &Design, robust: RobustKind) -> Result<RegressionResult, AnalysisError> {
    let n = design.n;
    let p = design.columns.len();
    if y.len() != n {
        return Err(AnalysisError::Invalid(format!("outcome has {} rows, design has {n}", y.len())));
    }
    if n <= p {
        return Err(AnalysisError::Invalid(format!("need more observations than regressors ({n} <= {p})")));
    }
    if y.iter().chain(design.columns.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(AnalysisError::Invalid("non-finite value in regression data".into()));
    }
    let x = design.matrix();
    let qr = x.clone().qr();
    let r = qr.r();
    for j in 0..p {
        let norm = x.column(j).norm();
        if r[(j, j)].abs() <= RANK_TOL * norm.max(f64::MIN_POSITIVE) || norm == 0.0 {
            return Err(collinear(design, &r, j));
        }
    }
    let y = DVector::from_column_slice(y);
    let qty = qr.q().transpose() * &y;
    let beta = r.solve_upper_triangular(&qty).expect("R has a nonzero diagonal");
    let r_inv = r.solve_upper_triangular(&DMatrix::identity(p, p)).expect("R has a nonzero diagonal");
    let xtx_inv = &r_inv * r_inv.transpose();

    let resid = &y - &x * &beta;
    let mut meat = DMatrix::zeros(p, p);
    for i in 0..n {
        let row = x.row(i);
        meat += row.transpose() * row * resid[i].powi(2);
    }
    let mut cov = &xtx_inv * meat * &xtx_inv;
    if robust == RobustKind::Hc1 {
        cov *= n as f64 / (n - p) as f64;
    }

    let mean = y.mean();
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ssr: f64 = resid.iter().map(|e| e * e).sum();
    let r_squared = if sst == 0.0 { 1.0 } else { (1.0 - ssr / sst).clamp(0.0, 1.0) };
    Ok(RegressionResult {
        names: design.names.clone(),
        coefficients: beta.iter().copied().collect(),
        std_errors: (0..p).map(|j| cov[(j, j)].max(0.0).sqrt()).collect(),
        robust,
        r_squared,
        n,
    })
}

fn collinear(design: &Design, r: &DMatrix<f64>, j: usize) -> AnalysisError {
    let column = design.names[j].clone();
    if j == 0 {
        return AnalysisError::RankDeficient { column, combination_of: Vec::new() };
    }
    // Column j lies in the span of columns 0..j: x_j = X[:, ..j] c with
    // R[..j, ..j] c = R[..j, j].
    let lead = r.view((0, 0), (j, j)).into_owned();
    let rhs = r.view((0, j), (j, 1)).into_owned();
    let combination_of = lead
        .solve_upper_triangular(&rhs)
        .map(|c| {
            c.iter()
                .enumerate()
                .filter(|(_, v)| v.abs() > 1e-8)
                .map(|(k, _)| design.names[k].clone())
                .collect()
        })
        .unwrap_or_default();
    AnalysisError::RankDeficient { column, combination_of }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dummy_regression_is_group_means() {
        let mut d = Design::with_intercept(3);
        d.push("x", vec![0.0, 1.0, 1.0]).unwrap();
        let r = ols_robust(&[1.0, 2.0, 3.0], &d, RobustKind::Hc1).unwrap();
        assert!((r.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((r.coefficients[1] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn perfect_fit() {
        let xs = [0.0, 1.0, 2.0, 5.0, 7.0];
        let mut d = Design::with_intercept(5);
        d.push("x", xs.to_vec()).unwrap();
        let y: Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
        let r = ols_robust(&y, &d, RobustKind::Hc1).unwrap();
        assert!((r.r_squared - 1.0).abs() < 1e-12);
        assert!(r.std_errors.iter().all(|s| s.abs() < 1e-7), "{:?}", r.std_errors);
    }

    #[test]
    fn collinear_columns_are_named() {
        let mut d = Design::with_intercept(4);
        d.push("a", vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        d.push("b", vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        let err = ols_robust(&[1.0, 2.0, 3.0, 4.0], &d, RobustKind::Hc1).unwrap_err();
        match err {
            AnalysisError::RankDeficient { column, combination_of } => {
                assert_eq!(column, "b");
                assert_eq!(combination_of, vec!["constant".to_string(), "a".to_string()]);
            }
            other => panic!("{other}"),
        }
        let mut d = Design::with_intercept(3);
        d.push("zero", vec![0.0; 3]).unwrap();
        assert!(matches!(ols_robust(&[1.0, 2.0, 3.0], &d, RobustKind::Hc0), Err(AnalysisError::RankDeficient { .. })));
    }

    #[test]
    fn too_few_rows() {
        let mut d = Design::with_intercept(2);
        d.push("x", vec![0.0, 1.0]).unwrap();
        assert!(ols_robust(&[1.0, 2.0], &d, RobustKind::Hc1).is_err());
    }

    #[test]
    fn hc1_is_scaled_hc0() {
        let mut d = Design::with_intercept(6);
        d.push("x", vec![0.0, 1.0, 0.0, 1.0, 1.0, 0.0]).unwrap();
        let y = [0.3, 1.2, -0.4, 0.9, 2.0, 0.1];
        let a = ols_robust(&y, &d, RobustKind::Hc0).unwrap();
        let b = ols_robust(&y, &d, RobustKind::Hc1).unwrap();
        for (s0, s1) in a.std_errors.iter().zip(&b.std_errors) {
            assert!((s1 - s0 * (6.0f64 / 4.0).sqrt()).abs() < 1e-12);
        }
    }
}
