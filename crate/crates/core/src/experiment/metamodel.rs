use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{mean_sd, ols};

/// One regressor built from standardized features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Term {
    Linear(usize),
    Square(usize),
    Cross(usize, usize),
}

impl Term {
    fn eval(self, z: &[f64]) -> f64 {
        match self {
            Term::Linear(i) => z[i],
            Term::Square(i) => z[i] * z[i],
            Term::Cross(i, j) => z[i] * z[j],
        }
    }

    fn name(self) -> String {
        match self {
            Term::Linear(i) => format!("x{i}"),
            Term::Square(i) => format!("x{i}^2"),
            Term::Cross(i, j) => format!("x{i}*x{j}"),
        }
    }
}

fn terms(dims: usize, degree: u8) -> Vec<Term> {
    let mut t: Vec<Term> = (0..dims).map(Term::Linear).collect();
    if degree == 2 {
        for i in 0..dims {
            t.push(Term::Square(i));
            for j in i + 1..dims {
                t.push(Term::Cross(i, j));
            }
        }
    }
    t
}

/// Polynomial least-squares surrogate over standardized inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metamodel {
    pub degree: u8,
    pub terms: Vec<Term>,
    /// Intercept first, then one coefficient per term.
    pub coefficients: Vec<f64>,
    pub r2: f64,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub value: f64,
    /// True when the input lies outside the per-dimension training range.
    pub extrapolated: bool,
}

impl Metamodel {
    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.means).zip(&self.scales).map(|((v, m), s)| (v - m) / s).collect()
    }

    /// Slopes in the original feature units; only meaningful for degree 1.
    pub fn raw_slopes(&self) -> Option<Vec<f64>> {
        (self.degree == 1).then(|| self.coefficients[1..].iter().zip(&self.scales).map(|(c, s)| c / s).collect())
    }
}

pub fn fit_metamodel(x: &[Vec<f64>], y: &[f64], degree: u8) -> Result<Metamodel> {
    if !(1..=2).contains(&degree) {
        return Err(Error::domain(format!("degree must be 1 or 2, got {degree}")));
    }
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    let dims = x.first().ok_or(Error::Empty("design points"))?.len();
    if dims == 0 || x.iter().any(|r| r.len() != dims) {
        return Err(Error::domain("every design point needs the same non-zero number of features"));
    }
    let terms = terms(dims, degree);
    if n <= terms.len() {
        return Err(Error::domain(format!("need more than {} rows for {} terms, got {n}", terms.len(), terms.len())));
    }
    let mut means = Vec::with_capacity(dims);
    let mut scales = Vec::with_capacity(dims);
    let mut lower = Vec::with_capacity(dims);
    let mut upper = Vec::with_capacity(dims);
    for j in 0..dims {
        let col: Vec<f64> = x.iter().map(|r| r[j]).collect();
        let (m, sd) = mean_sd(&col);
        means.push(m);
        // A constant feature centres to zero and is reported as collinear with the intercept.
        scales.push(if sd > 0.0 { sd } else { 1.0 });
        lower.push(col.iter().copied().fold(f64::INFINITY, f64::min));
        upper.push(col.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }
    let mut model = Metamodel { degree, terms, coefficients: Vec::new(), r2: 0.0, means, scales, lower, upper };
    let p = model.terms.len() + 1;
    let design =
        DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { model.terms[j - 1].eval(&model.standardize(&x[i])) });
    let mut names = vec!["intercept".to_string()];
    names.extend(model.terms.iter().map(|t| t.name()));
    let fit = ols(&design, y, &names)?;
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - y_mean).powi(2)).sum();
    model.r2 = if tss > 0.0 { 1.0 - fit.rss / tss } else { 0.0 };
    model.coefficients = fit.beta;
    Ok(model)
}

pub fn predict(model: &Metamodel, x: &[f64]) -> Result<Prediction> {
    if x.len() != model.means.len() {
        return Err(Error::LengthMismatch(x.len(), model.means.len()));
    }
    let z = model.standardize(x);
    let value = model.coefficients[0]
        + model.terms.iter().zip(&model.coefficients[1..]).map(|(t, c)| c * t.eval(&z)).sum::<f64>();
    let extrapolated = x.iter().enumerate().any(|(j, v)| *v < model.lower[j] || *v > model.upper[j]);
    Ok(Prediction { value, extrapolated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn column(xs: &[f64]) -> Vec<Vec<f64>> {
        xs.iter().map(|&v| vec![v]).collect()
    }

    #[test]
    fn linear_exact() {
        let x = column(&[0.0, 1.0, 2.0, 3.0, 4.0]);
        let y: Vec<f64> = x.iter().map(|r| 2.0 * r[0]).collect();
        let m = fit_metamodel(&x, &y, 1).unwrap();
        assert!((m.raw_slopes().unwrap()[0] - 2.0).abs() < 1e-12);
        assert!((m.r2 - 1.0).abs() < 1e-12);
        let p = predict(&m, &[3.0]).unwrap();
        assert!((p.value - 6.0).abs() < 1e-12);
        assert!(!p.extrapolated);
        let out = predict(&m, &[10.0]).unwrap();
        assert!((out.value - 20.0).abs() < 1e-9);
        assert!(out.extrapolated);
    }

    #[test]
    fn quadratic_exact() {
        let x = column(&[-2.0, -1.0, 0.0, 1.0, 2.0, 3.0]);
        let y: Vec<f64> = x.iter().map(|r| r[0] * r[0]).collect();
        let m = fit_metamodel(&x, &y, 2).unwrap();
        assert!((m.r2 - 1.0).abs() < 1e-12);
        // Interpolation: the fit reproduces every training response.
        for (row, target) in x.iter().zip(&y) {
            assert!((predict(&m, row).unwrap().value - target).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_response_has_zero_r2() {
        let x = column(&[0.0, 1.0, 2.0, 3.0]);
        let m = fit_metamodel(&x, &[5.0; 4], 1).unwrap();
        assert_eq!(m.r2, 0.0);
        assert!((predict(&m, &[1.5]).unwrap().value - 5.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_features_are_named() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, 2.0 * i as f64 + 1.0]).collect();
        let y: Vec<f64> = (0..6).map(|i| i as f64).collect();
        match fit_metamodel(&x, &y, 1) {
            Err(Error::RankDeficient(cols)) => assert_eq!(cols, ["x0", "x1"]),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn too_few_rows() {
        assert!(fit_metamodel(&column(&[0.0, 1.0]), &[0.0, 1.0], 2).is_err());
        assert!(fit_metamodel(&column(&[0.0, 1.0]), &[0.0, 1.0], 3).is_err());
    }

    proptest! {
        #[test]
        fn r2_does_not_drop_with_degree(
            pts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, -20.0f64..20.0), 12..30),
        ) {
            let x: Vec<Vec<f64>> = pts.iter().map(|p| vec![p.0, p.1]).collect();
            let y: Vec<f64> = pts.iter().map(|p| p.2).collect();
            if let (Ok(m1), Ok(m2)) = (fit_metamodel(&x, &y, 1), fit_metamodel(&x, &y, 2)) {
                prop_assert!(m2.r2 >= m1.r2 - 1e-9);
            }
        }
    }
}
