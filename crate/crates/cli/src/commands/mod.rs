pub mod kplane;
pub mod measures;
pub mod projections;
pub mod spectral;
pub mod unions;

use fraclab_core::numeric::geometric;
use fraclab_core::AtomBudget;

use crate::run::{invalid, Failure};

pub(crate) fn default_budget() -> usize {
    AtomBudget::DEFAULT.0
}

/// `3^-1, 3^-2, ..., 3^-count`.
pub(crate) fn triadic_radii(count: usize) -> Vec<f64> {
    geometric(1.0 / 3.0, 1.0 / 3.0, count)
}

/// `start, start/2, ...`, `count` values.
pub(crate) fn dyadic_radii(start: f64, count: usize) -> Vec<f64> {
    geometric(start, 0.5, count)
}

pub(crate) fn check_radii(name: &str, radii: &[f64]) -> Result<(), Failure> {
    if radii.len() < 3 {
        return Err(invalid(format!("{name}: need at least 3 radii")));
    }
    if radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(invalid(format!("{name}: radii must be positive")));
    }
    if radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(invalid(format!("{name}: radii must be strictly decreasing")));
    }
    Ok(())
}

pub(crate) fn check_positive(name: &str, value: f64) -> Result<(), Failure> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive, got {value}")))
    }
}

pub(crate) fn check_at_least(name: &str, value: usize, min: usize) -> Result<(), Failure> {
    if value >= min {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be at least {min}, got {value}")))
    }
}

pub(crate) fn check_dims(d: usize, k: usize) -> Result<(), Failure> {
    if k >= 1 && k < d {
        Ok(())
    } else {
        Err(invalid(format!("need 1 <= k < d, got d = {d}, k = {k}")))
    }
}

pub(crate) fn budget(value: usize) -> AtomBudget {
    AtomBudget(value)
}

/// `|estimate - expected| <= tolerance` when an expectation is configured.
pub(crate) fn expectation(estimate: f64, expected: Option<f64>, tolerance: f64) -> Option<bool> {
    expected.map(|e| (estimate - e).abs() <= tolerance)
}
