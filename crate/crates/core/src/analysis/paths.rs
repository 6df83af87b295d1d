use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::ResultTable;
use crate::linalg::{mean_sd, ols};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathCoefficients {
    pub factors: Vec<String>,
    pub beta: Vec<f64>,
    pub p_values: Vec<f64>,
    pub r2: f64,
    pub rows: usize,
}

fn zscore(xs: &[f64], name: &str) -> Result<Vec<f64>> {
    let (m, sd) = mean_sd(xs);
    if !(sd > 0.0) {
        return Err(Error::ConstantColumn(name.to_string()));
    }
    Ok(xs.iter().map(|x| (x - m) / sd).collect())
}

/// Direct-path weights: least squares of the z-scored response on z-scored predictors.
pub fn standardized_paths(columns: &[Vec<f64>], names: &[String], y: &[f64]) -> Result<PathCoefficients> {
    let n = y.len();
    let k = columns.len();
    if let Some(c) = columns.iter().find(|c| c.len() != n) {
        return Err(Error::LengthMismatch(c.len(), n));
    }
    if n <= k + 1 {
        return Err(Error::domain(format!("need more than {} rows for {k} factors, got {n}", k + 1)));
    }
    let zy = zscore(y, "response")?;
    let zx: Vec<Vec<f64>> = columns.iter().zip(names).map(|(c, nm)| zscore(c, nm)).collect::<Result<_>>()?;
    let x = DMatrix::from_fn(n, k + 1, |i, j| if j == 0 { 1.0 } else { zx[j - 1][i] });
    let mut all = vec!["intercept".to_string()];
    all.extend(names.iter().cloned());
    let fit = ols(&x, &zy, &all)?;
    let tss = (n - 1) as f64;
    Ok(PathCoefficients {
        factors: names.to_vec(),
        beta: fit.beta[1..].to_vec(),
        p_values: fit.p_values[1..].to_vec(),
        r2: 1.0 - fit.rss / tss,
        rows: n,
    })
}

/// Path weights of `factors` on a result metric; rows with an undefined response are dropped.
pub fn path_coefficients(results: &ResultTable, response: &str, factors: &[String]) -> Result<PathCoefficients> {
    let y_all = results.column(response)?;
    let keep: Vec<usize> = (0..y_all.len()).filter(|&i| y_all[i].is_finite()).collect();
    let y: Vec<f64> = keep.iter().map(|&i| y_all[i]).collect();
    let columns = factors
        .iter()
        .map(|f| {
            let codes = results.factor_codes(f)?;
            Ok(keep.iter().map(|&i| codes[i]).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    standardized_paths(&columns, factors, &y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn names(k: usize) -> Vec<String> {
        (1..=k).map(|i| format!("x{i}")).collect()
    }

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = substream(seed, Stream::Bootstrap);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn single_exact_path() {
        let x1 = normals(500, 1);
        let x2 = normals(500, 2);
        let p = standardized_paths(&[x1.clone(), x2], &names(2), &x1).unwrap();
        assert!((p.beta[0] - 1.0).abs() < 1e-9);
        assert!(p.beta[1].abs() < 1e-9);
    }

    #[test]
    fn analytic_weights() {
        let x1 = normals(10_000, 3);
        let x2 = normals(10_000, 4);
        let y: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| 2.0 * a + b).collect();
        let p = standardized_paths(&[x1, x2], &names(2), &y).unwrap();
        assert!((p.beta[0] - 2.0 / 5f64.sqrt()).abs() < 0.02, "{:?}", p.beta);
        assert!((p.beta[1] - 1.0 / 5f64.sqrt()).abs() < 0.02, "{:?}", p.beta);
    }

    #[test]
    fn unrelated_response() {
        let p = standardized_paths(&[normals(5000, 5), normals(5000, 6)], &names(2), &normals(5000, 7)).unwrap();
        assert!(p.beta.iter().all(|b| b.abs() < 0.05), "{:?}", p.beta);
        assert!(p.p_values.iter().all(|&q| q > 0.001));
    }

    #[test]
    fn constant_factor_is_an_error() {
        let err = standardized_paths(&[vec![1.0; 10], normals(10, 1)], &names(2), &normals(10, 2)).unwrap_err();
        assert_eq!(err, Error::ConstantColumn("x1".into()));
    }

    #[test]
    fn affine_rescaling_invariance() {
        let mut rng = substream(11, Stream::Bootstrap);
        let x1 = normals(200, 8);
        let x2 = normals(200, 9);
        let y: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a - 0.5 * b + rng.random::<f64>()).collect();
        let base = standardized_paths(&[x1.clone(), x2.clone()], &names(2), &y).unwrap();
        let scaled: Vec<f64> = x1.iter().map(|v| 10.0 * v).collect();
        let after = standardized_paths(&[scaled, x2], &names(2), &y).unwrap();
        for (a, b) in base.beta.iter().zip(&after.beta) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn too_few_rows() {
        assert!(standardized_paths(&[vec![1.0, 2.0, 3.0]], &names(1), &[1.0, 2.0]).is_err());
        assert!(standardized_paths(&[vec![1.0, 2.0]], &names(1), &[1.0, 2.0]).is_err());
    }
}
