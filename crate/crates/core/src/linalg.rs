//! Least squares via Householder QR, with collinearity detection.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub beta: Vec<f64>,
    /// Two-sided t-test p-values; NaN when there are no residual degrees of freedom.
    pub p_values: Vec<f64>,
    pub rss: f64,
    pub fitted: Vec<f64>,
}

/// Relative pivot size under which a column counts as a combination of earlier ones.
const RANK_TOL: f64 = 1e-10;

/// Regresses `y` on the columns of `x` (no implicit intercept).
pub fn ols(x: &DMatrix<f64>, y: &[f64], names: &[String]) -> Result<OlsFit> {
    let (n, p) = x.shape();
    if n != y.len() {
        return Err(Error::LengthMismatch(n, y.len()));
    }
    if n < p || p == 0 {
        return Err(Error::domain(format!("need at least {p} rows for {p} columns, got {n}")));
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let q = qr.q();
    for j in 0..p {
        let norm = x.column(j).norm();
        if r[(j, j)].abs() <= RANK_TOL * norm.max(1.0) {
            return Err(Error::RankDeficient(collinear_group(&r, j, names)));
        }
    }
    let yv = DVector::from_column_slice(y);
    let qty = q.transpose() * &yv;
    let beta = r.solve_upper_triangular(&qty).expect("pivots checked non-zero");
    let fitted = x * &beta;
    let rss = (&yv - &fitted).norm_squared();

    let df = n - p;
    let p_values = if df == 0 {
        vec![f64::NAN; p]
    } else {
        let sigma2 = rss / df as f64;
        let r_inv = r.solve_upper_triangular(&DMatrix::identity(p, p)).expect("pivots checked non-zero");
        let t_dist = StudentsT::new(0.0, 1.0, df as f64).expect("df > 0");
        (0..p)
            .map(|j| {
                let se = (sigma2 * r_inv.row(j).norm_squared()).sqrt();
                let t = beta[j] / se;
                if t.is_nan() {
                    1.0
                } else {
                    2.0 * (1.0 - t_dist.cdf(t.abs()))
                }
            })
            .collect()
    };
    Ok(OlsFit { beta: beta.iter().copied().collect(), p_values, rss, fitted: fitted.iter().copied().collect() })
}

/// Column `j` plus the earlier columns it is built from.
fn collinear_group(r: &DMatrix<f64>, j: usize, names: &[String]) -> Vec<String> {
    let name = |k: usize| names.get(k).cloned().unwrap_or_else(|| format!("col{k}"));
    let mut group = Vec::new();
    if j > 0 {
        let head = r.view((0, 0), (j, j)).into_owned();
        let rhs = r.view((0, j), (j, 1)).into_owned();
        if let Some(c) = head.solve_upper_triangular(&rhs) {
            let scale = c.amax().max(1e-300);
            group.extend((0..j).filter(|&k| c[k].abs() > 1e-8 * scale).map(name));
        }
    }
    group.push(name(j));
    group
}

pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, var.sqrt())
}
