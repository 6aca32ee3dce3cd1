//! Discrete approximations of compactly supported measures.
//!
//! A [`DiscreteMeasure`] is a weighted point cloud. Each constructor also
//! records the measure's *atomic resolution*: the length scale below which
//! the point cloud no longer resembles the continuum object it stands for.
//! Every estimator downstream refuses to look below (a multiple of) that
//! scale.

pub(crate) mod frostman;
mod io;

pub use frostman::{ball_mass, estimate_frostman_exponent, max_ball_masses, FrostmanReport, ProbePolicy};
pub use io::MeasureFile;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::pairwise_sum;

/// Upper bound on the number of atoms a constructor may produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomBudget(pub usize);

impl AtomBudget {
    pub const DEFAULT: AtomBudget = AtomBudget(1 << 24);

    /// `requested` as a count, or `BudgetExceeded` if it is over budget.
    pub fn check(self, requested: u128) -> Result<usize> {
        if requested > self.0 as u128 {
            Err(Error::BudgetExceeded {
                requested,
                budget: self.0,
            })
        } else {
            Ok(requested as usize)
        }
    }
}

impl Default for AtomBudget {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Weighted point cloud in `R^ambient_dim`.
///
/// Points are stored flat, row-major: atom `i` occupies
/// `points[i*ambient_dim..(i+1)*ambient_dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    ambient_dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
    diameter_hint: f64,
    resolution: f64,
}

impl DiscreteMeasure {
    /// Build from a flat coordinate buffer. `resolution` is the atomic
    /// resolution (0 for measures that are exactly atomic, e.g. a point mass).
    pub fn from_flat(
        ambient_dim: usize,
        points: Vec<f64>,
        weights: Vec<f64>,
        resolution: f64,
    ) -> Result<Self> {
        if ambient_dim == 0 {
            return Err(Error::invalid("ambient_dim", "must be positive"));
        }
        if points.len() != weights.len() * ambient_dim {
            return Err(Error::shape(
                "measure points",
                weights.len() * ambient_dim,
                points.len(),
            ));
        }
        if !(resolution >= 0.0 && resolution.is_finite()) {
            return Err(Error::invalid("resolution", "must be finite and nonnegative"));
        }
        let mut m = DiscreteMeasure {
            ambient_dim,
            points,
            weights,
            diameter_hint: 0.0,
            resolution,
        };
        m.validate_atoms()?;
        m.diameter_hint = m.bounding_diameter();
        Ok(m)
    }

    pub fn new(ambient_dim: usize, points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let mut flat = Vec::with_capacity(points.len() * ambient_dim);
        for p in &points {
            if p.len() != ambient_dim {
                return Err(Error::shape("measure point", ambient_dim, p.len()));
            }
            flat.extend_from_slice(p);
        }
        Self::from_flat(ambient_dim, flat, weights, 0.0)
    }

    /// Unit point mass at `location`.
    pub fn point_mass(location: &[f64]) -> Result<Self> {
        Self::from_flat(location.len(), location.to_vec(), vec![1.0], 0.0)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.ambient_dim..(i + 1) * self.ambient_dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.points.chunks_exact(self.ambient_dim)
    }

    pub fn points_flat(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn diameter_hint(&self) -> f64 {
        self.diameter_hint
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    /// Total mass by pairwise summation.
    pub fn mass(&self) -> f64 {
        pairwise_sum(&self.weights)
    }

    pub fn with_resolution(mut self, resolution: f64) -> Self {
        self.resolution = resolution.max(0.0);
        self
    }

    /// Same atoms with every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let weights = self.weights.iter().map(|w| w * factor).collect();
        Self::from_flat(self.ambient_dim, self.points.clone(), weights, self.resolution)
    }

    pub fn centroid(&self) -> Vec<f64> {
        let mass = self.mass();
        let mut c = vec![0.0; self.ambient_dim];
        for (p, w) in self.points().zip(&self.weights) {
            for (ci, pi) in c.iter_mut().zip(p) {
                *ci += w * pi;
            }
        }
        c.iter_mut().for_each(|v| *v /= mass);
        c
    }

    /// Axis-aligned bounding box as `(lower, upper)` corners.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.ambient_dim];
        let mut hi = vec![f64::NEG_INFINITY; self.ambient_dim];
        for p in self.points() {
            for a in 0..self.ambient_dim {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        (lo, hi)
    }

    fn bounding_diameter(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        lo.iter()
            .zip(&hi)
            .map(|(l, h)| (h - l) * (h - l))
            .sum::<f64>()
            .sqrt()
    }

    fn validate_atoms(&self) -> Result<()> {
        if self.weights.is_empty() {
            return Err(Error::InvalidMeasure("measure has no atoms".into()));
        }
        if let Some(w) = self.weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidMeasure(format!(
                "weights must be finite and nonnegative, found {w}"
            )));
        }
        if self.points.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidMeasure("non-finite coordinate".into()));
        }
        if self.mass() <= 0.0 {
            return Err(Error::InvalidMeasure("total mass must be positive".into()));
        }
        Ok(())
    }

    /// Check every structural invariant, including that all atoms lie within
    /// `diameter_hint` of the centroid.
    pub fn validate(&self) -> Result<()> {
        self.validate_atoms()?;
        let c = self.centroid();
        let slack = 1e-12 * (1.0 + self.diameter_hint);
        for p in self.points() {
            let d = p
                .iter()
                .zip(&c)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if d > self.diameter_hint + slack {
                return Err(Error::InvalidMeasure(format!(
                    "atom at distance {d} from centroid exceeds diameter hint {}",
                    self.diameter_hint
                )));
            }
        }
        Ok(())
    }
}

/// Parameters of a self-similar Cantor set in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CantorSpec {
    pub branches: usize,
    pub ratio: f64,
    pub depth: u32,
    /// Left endpoints of the first-level intervals. Defaults to evenly spaced
    /// offsets `i (1 - ratio) / (branches - 1)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offsets: Option<Vec<f64>>,
}

impl CantorSpec {
    pub fn new(branches: usize, ratio: f64, depth: u32) -> Self {
        CantorSpec {
            branches,
            ratio,
            depth,
            offsets: None,
        }
    }

    /// Middle-thirds Cantor set at the given depth.
    pub fn middle_thirds(depth: u32) -> Self {
        Self::new(2, 1.0 / 3.0, depth)
    }

    /// `log(branches) / log(1 / ratio)`.
    pub fn similarity_dimension(&self) -> f64 {
        (self.branches as f64).ln() / (1.0 / self.ratio).ln()
    }

    pub fn offsets(&self) -> Vec<f64> {
        match &self.offsets {
            Some(o) => o.clone(),
            None => {
                let m = self.branches;
                (0..m)
                    .map(|i| i as f64 * (1.0 - self.ratio) / (m - 1) as f64)
                    .collect()
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.branches < 2 {
            return Err(Error::invalid("branches", "must be at least 2"));
        }
        let m = self.branches as f64;
        if !(self.ratio > 0.0 && self.ratio <= 1.0 / m) {
            return Err(Error::invalid(
                "ratio",
                format!("must lie in (0, 1/{}], got {}", self.branches, self.ratio),
            ));
        }
        if self.depth < 1 {
            return Err(Error::invalid("depth", "must be at least 1"));
        }
        let s = self.similarity_dimension();
        if !(s > 0.0 && s <= 1.0 + 1e-12) {
            return Err(Error::invalid(
                "ratio",
                format!("similarity dimension {s} outside (0, 1]"),
            ));
        }
        if let Some(o) = &self.offsets {
            if o.len() != self.branches {
                return Err(Error::shape("cantor offsets", self.branches, o.len()));
            }
            if o.iter().any(|&x| !(0.0..=1.0 - self.ratio).contains(&x)) {
                return Err(Error::invalid("offsets", "each offset must lie in [0, 1 - ratio]"));
            }
        }
        Ok(())
    }

    /// Closed-form Fourier transform of the depth-`depth` left-endpoint
    /// measure: a finite Riesz product.
    pub fn fourier_transform(&self, xi: f64) -> num_complex::Complex64 {
        use num_complex::Complex64;
        let offsets = self.offsets();
        let m = self.branches as f64;
        let mut scale = 1.0;
        let mut acc = Complex64::new(1.0, 0.0);
        for _ in 0..self.depth {
            let mut factor = Complex64::new(0.0, 0.0);
            for &o in &offsets {
                factor += Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * xi * o * scale);
            }
            acc *= factor / m;
            scale *= self.ratio;
        }
        acc
    }
}

/// `branches^depth` equal atoms at the left endpoints of the depth-level
/// construction intervals.
pub fn make_cantor_measure(spec: &CantorSpec, budget: AtomBudget) -> Result<DiscreteMeasure> {
    spec.validate()?;
    let count = (spec.branches as u128)
        .checked_pow(spec.depth)
        .unwrap_or(u128::MAX);
    let count = budget.check(count)?;
    let offsets = spec.offsets();
    let mut points = Vec::with_capacity(count);
    points.push(0.0);
    let mut scale = 1.0;
    for _ in 0..spec.depth {
        points = points
            .iter()
            .flat_map(|&p| offsets.iter().map(move |&o| p + o * scale))
            .collect();
        scale *= spec.ratio;
    }
    let weight = (spec.branches as f64).powi(-(spec.depth as i32));
    let weights = vec![weight; points.len()];
    DiscreteMeasure::from_flat(1, points, weights, spec.ratio.powi(spec.depth as i32))
}

/// Product measure on `R^(a.dim + b.dim)`; atoms ordered with `a` outer.
pub fn product_measure(
    a: &DiscreteMeasure,
    b: &DiscreteMeasure,
    budget: AtomBudget,
) -> Result<DiscreteMeasure> {
    budget.check(a.len() as u128 * b.len() as u128)?;
    let dim = a.ambient_dim + b.ambient_dim;
    let mut points = Vec::with_capacity(a.len() * b.len() * dim);
    let mut weights = Vec::with_capacity(a.len() * b.len());
    for (pa, wa) in a.points().zip(&a.weights) {
        for (pb, wb) in b.points().zip(&b.weights) {
            points.extend_from_slice(pa);
            points.extend_from_slice(pb);
            weights.push(wa * wb);
        }
    }
    DiscreteMeasure::from_flat(dim, points, weights, a.resolution.max(b.resolution))
}

/// `per_axis^ambient_dim` equal atoms at the cell centers of `[0,1]^ambient_dim`,
/// last axis varying fastest.
pub fn uniform_grid_measure(
    ambient_dim: usize,
    per_axis: usize,
    budget: AtomBudget,
) -> Result<DiscreteMeasure> {
    if ambient_dim == 0 {
        return Err(Error::invalid("ambient_dim", "must be positive"));
    }
    if per_axis == 0 {
        return Err(Error::invalid("per_axis", "must be at least 1"));
    }
    let count = (per_axis as u128)
        .checked_pow(ambient_dim as u32)
        .unwrap_or(u128::MAX);
    let count = budget.check(count)?;
    let h = 1.0 / per_axis as f64;
    let mut points = Vec::with_capacity(count * ambient_dim);
    let mut idx = vec![0usize; ambient_dim];
    for _ in 0..count {
        points.extend(idx.iter().map(|&i| (i as f64 + 0.5) * h));
        for a in (0..ambient_dim).rev() {
            idx[a] += 1;
            if idx[a] < per_axis {
                break;
            }
            idx[a] = 0;
        }
    }
    let weights = vec![1.0 / count as f64; count];
    DiscreteMeasure::from_flat(ambient_dim, points, weights, h)
}

/// Image of `mu` under `p -> linear * p + shift`. `linear` is given as rows.
///
/// Weights are carried over untouched, so mass is preserved bit for bit.
pub fn pushforward_affine(
    mu: &DiscreteMeasure,
    linear: &[Vec<f64>],
    shift: &[f64],
) -> Result<DiscreteMeasure> {
    let target = linear.len();
    if target == 0 {
        return Err(Error::invalid("linear", "map must have at least one row"));
    }
    if shift.len() != target {
        return Err(Error::shape("pushforward shift", target, shift.len()));
    }
    if let Some(row) = linear.iter().find(|r| r.len() != mu.ambient_dim) {
        return Err(Error::shape("pushforward matrix row", mu.ambient_dim, row.len()));
    }
    let mut points = Vec::with_capacity(mu.len() * target);
    for p in mu.points() {
        for (row, s) in linear.iter().zip(shift) {
            points.push(s + crate::numeric::dot(row, p));
        }
    }
    // An operator-norm bound keeps the resolution conservative.
    let frob = linear
        .iter()
        .flat_map(|r| r.iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    DiscreteMeasure::from_flat(target, points, mu.weights.clone(), mu.resolution * frob)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-15
    }

    #[test]
    fn cantor_depth_one() {
        let m = make_cantor_measure(&CantorSpec::middle_thirds(1), AtomBudget::DEFAULT).unwrap();
        assert_eq!(m.len(), 2);
        assert!(close(m.point(0)[0], 0.0));
        assert!(close(m.point(1)[0], 2.0 / 3.0));
        assert_eq!(m.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn cantor_depth_two() {
        let m = make_cantor_measure(&CantorSpec::middle_thirds(2), AtomBudget::DEFAULT).unwrap();
        let xs: Vec<f64> = m.points().map(|p| p[0]).collect();
        let want = [0.0, 2.0 / 9.0, 2.0 / 3.0, 8.0 / 9.0];
        for (x, w) in xs.iter().zip(want) {
            assert!(close(*x, w), "{x} vs {w}");
        }
        assert!(m.weights().iter().all(|&w| w == 0.25));
        assert_eq!(m.mass(), 1.0);
        m.validate().unwrap();
    }

    #[test]
    fn cantor_rejects_bad_specs() {
        assert!(CantorSpec::new(1, 0.5, 3).validate().is_err());
        assert!(CantorSpec::new(2, 0.6, 3).validate().is_err());
        assert!(CantorSpec::new(2, 1.0 / 3.0, 0).validate().is_err());
        let mut s = CantorSpec::new(2, 1.0 / 3.0, 2);
        s.offsets = Some(vec![0.0, 0.9]);
        assert!(s.validate().is_err());
    }

    #[test]
    fn cantor_budget_is_enforced() {
        let err = make_cantor_measure(&CantorSpec::middle_thirds(30), AtomBudget::DEFAULT).unwrap_err();
        assert!(err.is_budget());
        let err = make_cantor_measure(&CantorSpec::middle_thirds(5), AtomBudget(16)).unwrap_err();
        assert!(err.is_budget());
    }

    #[test]
    fn grid_small_cases() {
        let g = uniform_grid_measure(1, 2, AtomBudget::DEFAULT).unwrap();
        assert_eq!(g.points_flat(), &[0.25, 0.75]);
        assert_eq!(g.weights(), &[0.5, 0.5]);
        let g2 = uniform_grid_measure(2, 2, AtomBudget::DEFAULT).unwrap();
        assert_eq!(
            g2.points_flat(),
            &[0.25, 0.25, 0.25, 0.75, 0.75, 0.25, 0.75, 0.75]
        );
        assert!(g2.weights().iter().all(|&w| w == 0.25));
        assert_eq!(g2.mass(), 1.0);
    }

    #[test]
    fn product_with_point_mass_prepends_zero() {
        let a = DiscreteMeasure::point_mass(&[0.0]).unwrap();
        let b = make_cantor_measure(&CantorSpec::middle_thirds(3), AtomBudget::DEFAULT).unwrap();
        let p = product_measure(&a, &b, AtomBudget::DEFAULT).unwrap();
        assert_eq!(p.ambient_dim(), 2);
        for (i, q) in p.points().enumerate() {
            assert_eq!(q[0], 0.0);
            assert_eq!(q[1], b.point(i)[0]);
        }
        assert_eq!(p.weights(), b.weights());
    }

    #[test]
    fn product_mass_multiplies() {
        let a = DiscreteMeasure::new(1, vec![vec![0.0], vec![1.0]], vec![0.5, 0.25]).unwrap();
        let b = DiscreteMeasure::new(1, vec![vec![2.0], vec![3.0], vec![4.0]], vec![2.0, 1.0, 0.125]).unwrap();
        let p = product_measure(&a, &b, AtomBudget::DEFAULT).unwrap();
        assert_eq!(p.len(), 6);
        assert_eq!(p.mass(), a.mass() * b.mass());
        assert!(product_measure(&a, &b, AtomBudget(5)).unwrap_err().is_budget());
    }

    #[test]
    fn pushforward_identity_and_projection() {
        let a = make_cantor_measure(&CantorSpec::middle_thirds(3), AtomBudget::DEFAULT).unwrap();
        let b = uniform_grid_measure(1, 4, AtomBudget::DEFAULT).unwrap();
        let p = product_measure(&a, &b, AtomBudget::DEFAULT).unwrap();
        let id = pushforward_affine(&p, &[vec![1.0, 0.0], vec![0.0, 1.0]], &[0.0, 0.0]).unwrap();
        assert_eq!(id.points_flat(), p.points_flat());
        assert_eq!(id.weights(), p.weights());

        let first = pushforward_affine(&p, &[vec![1.0, 0.0]], &[0.0]).unwrap();
        assert_eq!(first.mass(), p.mass());
        // first-coordinate marginal: each Cantor atom carries its own mass
        for (i, q) in a.points().enumerate() {
            let marg: f64 = first
                .points()
                .zip(first.weights())
                .filter(|(x, _)| x[0] == q[0])
                .map(|(_, w)| w)
                .sum();
            assert!((marg - a.weights()[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn pushforward_shape_errors() {
        let a = uniform_grid_measure(2, 2, AtomBudget::DEFAULT).unwrap();
        assert!(pushforward_affine(&a, &[vec![1.0]], &[0.0]).is_err());
        assert!(pushforward_affine(&a, &[vec![1.0, 0.0]], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(DiscreteMeasure::new(1, vec![vec![0.0]], vec![-1.0]).is_err());
        assert!(DiscreteMeasure::new(1, vec![vec![0.0]], vec![f64::NAN]).is_err());
        assert!(DiscreteMeasure::new(1, vec![vec![0.0]], vec![0.0]).is_err());
        assert!(DiscreteMeasure::new(1, vec![], vec![]).is_err());
    }

    #[test]
    fn riesz_product_matches_direct_sum() {
        let spec = CantorSpec::middle_thirds(6);
        let m = make_cantor_measure(&spec, AtomBudget::DEFAULT).unwrap();
        for &xi in &[0.3, 2.0, 17.5, 101.0] {
            let direct: num_complex::Complex64 = m
                .points()
                .zip(m.weights())
                .map(|(p, w)| num_complex::Complex64::from_polar(*w, -2.0 * std::f64::consts::PI * xi * p[0]))
                .sum();
            assert!((direct - spec.fourier_transform(xi)).norm() < 1e-12);
        }
    }
}
