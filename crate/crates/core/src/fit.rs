//! Least-squares line fits in log-log coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Result of a least-squares line fit.
///
/// `residual` is the largest absolute deviation of any sample point from the
/// fitted line, in the same (logarithmic) units as the ordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
    pub sample_points: Vec<(f64, f64)>,
}

impl SlopeFit {
    /// Fit `ordinate = slope * abscissa + intercept` through the given points.
    pub fn fit(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Underdetermined {
                needed: 2,
                got: points.len(),
            });
        }
        if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::Degenerate("non-finite point in log-log fit".into()));
        }
        let n = points.len() as f64;
        let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
        let my = points.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        if sxx <= 0.0 {
            return Err(Error::Degenerate("all abscissae coincide".into()));
        }
        let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let mut fit = SlopeFit {
            slope,
            intercept,
            residual: 0.0,
            sample_points: points,
        };
        fit.residual = fit.max_deviation();
        Ok(fit)
    }

    /// Fit in base-2 logarithms of both coordinates; all values must be positive.
    pub fn fit_log2(xs: &[f64], ys: &[f64]) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::shape("log-log fit", xs.len(), ys.len()));
        }
        if ys.iter().any(|&y| y <= 0.0) {
            return Err(Error::Degenerate(
                "non-positive value cannot be placed on a log scale".into(),
            ));
        }
        Self::fit(
            xs.iter()
                .zip(ys)
                .map(|(x, y)| (x.log2(), y.log2()))
                .collect(),
        )
    }

    pub fn predict(&self, abscissa: f64) -> f64 {
        self.slope * abscissa + self.intercept
    }

    fn max_deviation(&self) -> f64 {
        self.sample_points
            .iter()
            .map(|&(x, y)| (y - self.predict(x)).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_line() {
        let fit = SlopeFit::fit(vec![(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)]).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-14);
        assert!((fit.intercept - 1.0).abs() < 1e-14);
        assert!(fit.residual < 1e-14);
    }

    #[test]
    fn rejects_single_point() {
        assert!(matches!(
            SlopeFit::fit(vec![(0.0, 1.0)]),
            Err(Error::Underdetermined { .. })
        ));
    }

    #[test]
    fn power_law_in_log2() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-0.5)).collect();
        let fit = SlopeFit::fit_log2(&xs, &ys).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn residual_is_max_deviation(ys in proptest::collection::vec(-10.0f64..10.0, 3..12)) {
            let pts: Vec<(f64, f64)> = ys.iter().enumerate().map(|(i, &y)| (i as f64, y)).collect();
            let fit = SlopeFit::fit(pts.clone()).unwrap();
            let dev = pts.iter().map(|&(x, y)| (y - fit.slope * x - fit.intercept).abs()).fold(0.0, f64::max);
            prop_assert!((fit.residual - dev).abs() < 1e-12);
        }
    }
}
