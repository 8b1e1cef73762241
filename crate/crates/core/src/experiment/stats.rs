//! Descriptive statistics used by the analysis reports.

use serde::{Deserialize, Serialize};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator); NaN below two values.
pub fn sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Least-squares line `y = intercept + slope * x` with Pearson's r.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Regression {
    pub n: usize,
    pub r: f64,
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub slope_stderr: f64,
}

impl Regression {
    pub fn nan(n: usize) -> Self {
        Self {
            n,
            r: f64::NAN,
            slope: f64::NAN,
            intercept: f64::NAN,
            slope_stderr: f64::NAN,
        }
    }
}

/// Regresses `y` on `x`. Returns `None` when either variable has zero
/// variance or fewer than two points are given, since r is undefined then.
pub fn regress(x: &[f64], y: &[f64]) -> Option<Regression> {
    assert_eq!(x.len(), y.len(), "paired samples");
    let n = x.len();
    if n < 2 {
        return None;
    }
    let (mx, my) = (mean(x), mean(y));
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let slope_stderr = if n > 2 {
        let rss = (syy - slope * sxy).max(0.0);
        (rss / (n - 2) as f64 / sxx).sqrt()
    } else {
        f64::NAN
    };
    Some(Regression {
        n,
        r,
        slope,
        intercept,
        slope_stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use statrs::statistics::Statistics;

    #[test]
    fn perfect_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let reg = regress(&x, &x).unwrap();
        assert!((reg.r - 1.0).abs() < 1e-12);
        assert!((reg.slope - 1.0).abs() < 1e-12);
        assert!(reg.intercept.abs() < 1e-12);
        assert!(reg.slope_stderr.abs() < 1e-9);
        let neg: Vec<f64> = x.iter().map(|v| 5.0 - 2.0 * v).collect();
        let reg = regress(&x, &neg).unwrap();
        assert!((reg.r + 1.0).abs() < 1e-12);
        assert!((reg.slope + 2.0).abs() < 1e-12);
        assert!((reg.intercept - 5.0).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_is_undefined() {
        assert!(regress(&[1.0, 2.0, 3.0], &[4.0, 4.0, 4.0]).is_none());
        assert!(regress(&[1.0], &[2.0]).is_none());
        assert!(sd(&[3.0]).is_nan());
        assert!(mean(&[]).is_nan());
    }

    #[test]
    fn known_stderr() {
        // y = x + e with residuals (0.5, -1, 0.5) around the fitted line
        let x = [0.0, 1.0, 2.0];
        let y = [0.5, 0.0, 2.5];
        let reg = regress(&x, &y).unwrap();
        assert!((reg.slope - 1.0).abs() < 1e-12);
        assert!((reg.intercept - 0.0).abs() < 1e-12);
        // rss 1.5, sxx 2 -> sqrt(1.5 / 1 / 2)
        assert!((reg.slope_stderr - 0.75f64.sqrt()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn matches_statrs(pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 3..60)) {
            let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            prop_assert!((mean(&x) - x.iter().mean()).abs() < 1e-9);
            prop_assert!((sd(&x) - x.iter().std_dev()).abs() < 1e-9);
            if let Some(reg) = regress(&x, &y) {
                let cov = x.iter().covariance(y.iter());
                let r = cov / (x.iter().std_dev() * y.iter().std_dev());
                prop_assert!((reg.r - r).abs() < 1e-9);
                prop_assert!((reg.slope - cov / x.iter().variance()).abs() < 1e-9);
                prop_assert!((-1.0..=1.0).contains(&reg.r));
            }
        }
    }
}
