use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

pub const SIGNIFICANCE_LEVEL: f64 = 0.01;

fn mean_var(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Mean and Student-t confidence half-width at level `1 − alpha`.
pub fn mean_ci(values: &[f64], alpha: f64) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::InsufficientData(format!("need at least 2 values, got {}", values.len())));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let n = values.len() as f64;
    let (mean, var) = mean_var(values);
    if var == 0.0 {
        return Ok((mean, 0.0));
    }
    let t = StudentsT::new(0.0, 1.0, n - 1.0)
        .map_err(|e| Error::Numerical(e.to_string()))?
        .inverse_cdf(1.0 - alpha / 2.0);
    Ok((mean, t * (var / n).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t_statistic: f64,
    pub degrees_of_freedom: f64,
    pub p_value: f64,
    pub significant: bool,
}

/// Welch's unequal-variance two-sample t-test, two-sided.
pub fn independent_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InsufficientData("each sample needs at least 2 values".into()));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    if va == 0.0 && vb == 0.0 {
        return Err(Error::Degenerate("both samples have zero variance".into()));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (va / na, vb / nb);
    let se2 = sa + sb;
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    // P(|T| > |t|) = I_{df/(df+t²)}(df/2, 1/2)
    let p = if t == 0.0 {
        1.0
    } else {
        beta_reg(df / 2.0, 0.5, df / (df + t * t)).clamp(f64::MIN_POSITIVE, 1.0)
    };
    Ok(TTest {
        t_statistic: t,
        degrees_of_freedom: df,
        p_value: p,
        significant: p < SIGNIFICANCE_LEVEL,
    })
}
