//! The k-plane transform `Tf(y) = int_{[0,1]^k} f(x, y_0 + sum_i x_i y_i) dx`,
//! a smoothed adjoint, mixed `L^2_x(L^r_{x'})` norms, and the experiment
//! comparing `||Tf||_{L^2(mu_S)}` with `||f||_{L^2_x(L^{q'}_{x'})}`.
//!
//! `x` always ranges over the unit cube `[0,1]^k`; fields live on boxes of
//! the form `[0,1]^k x [-B, B]^{d-k}`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{GridField, ScalarField};
use crate::fit::SlopeFit;
use crate::measures::FrostmanReport;
use crate::numeric::{pairwise_sum, stream_rng, unit_ball_volume};
use crate::projections::{section_into, PlaneParam, PlaneSet};

/// Default half-width `B` of the `x'` box.
pub const DEFAULT_XPRIME_BOUND: f64 = 4.0;
/// Largest growth slope of the max ratio still read as resolution-stable.
pub const DEFAULT_MAX_GROWTH_SLOPE: f64 = 0.1;

/// Default midpoint node count per axis.
pub fn default_quadrature(k: usize) -> usize {
    if k == 1 {
        256
    } else {
        64
    }
}

/// Exponents of the mixed-norm bound for a parameter measure of dimension `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformBoundConfig {
    pub d: usize,
    pub k: usize,
    pub alpha: f64,
    pub epsilon: f64,
    pub q: f64,
    pub q_conj: f64,
}

impl TransformBoundConfig {
    /// `(alpha - (k+1)(d-k) + k - epsilon) / (2(d-k))`, which equals `1/2 - 1/q`.
    pub fn rhs(&self) -> f64 {
        let big_n = ((self.k + 1) * (self.d - self.k)) as f64;
        (self.alpha - big_n + self.k as f64 - self.epsilon) / (2.0 * (self.d - self.k) as f64)
    }
}

/// Solve `1/2 - 1/q = (alpha - (k+1)(d-k) + k - epsilon) / (2(d-k))` for `q`.
///
/// Requires `(k+1)(d-k) - k < alpha < (k+1)(d-k)` and
/// `0 < epsilon < alpha - (k+1)(d-k) + k`.
pub fn compute_q(d: usize, k: usize, alpha: f64, epsilon: f64) -> Result<TransformBoundConfig> {
    if k < 1 || k >= d {
        return Err(Error::invalid("k", format!("need 1 <= k < d = {d}")));
    }
    let big_n = ((k + 1) * (d - k)) as f64;
    let lo = big_n - k as f64;
    if !(alpha > lo && alpha < big_n) {
        return Err(Error::invalid("alpha", format!("{alpha} outside ({lo}, {big_n})")));
    }
    let eps_max = alpha - lo;
    if !(epsilon > 0.0 && epsilon < eps_max) {
        return Err(Error::invalid("epsilon", format!("{epsilon} outside (0, {eps_max})")));
    }
    let rhs = (eps_max - epsilon) / (2.0 * (d - k) as f64);
    let q = 1.0 / (0.5 - rhs);
    Ok(TransformBoundConfig {
        d,
        k,
        alpha,
        epsilon,
        q,
        q_conj: q / (q - 1.0),
    })
}

/// Midpoint nodes `(m + 1/2) / count` of `[0,1]`.
fn midpoints(count: usize) -> Vec<f64> {
    (0..count).map(|m| (m as f64 + 0.5) / count as f64).collect()
}

/// Visit every multi-index in `{0..count}^k`, last index fastest.
fn for_each_node(k: usize, count: usize, mut visit: impl FnMut(&[usize])) {
    let mut idx = vec![0usize; k];
    loop {
        visit(&idx);
        let mut axis = k;
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < count {
                break;
            }
            idx[axis] = 0;
        }
    }
}

fn transform_flat(f: &GridField, k: usize, flat: &[f64], nodes: &[f64]) -> Result<f64> {
    let d = f.d();
    let codim = d - k;
    let mut p = vec![0.0; d];
    let mut values = Vec::with_capacity(nodes.len().pow(k as u32));
    let mut escaped = false;
    for_each_node(k, nodes.len(), |idx| {
        if escaped {
            return;
        }
        for (slot, &i) in p.iter_mut().zip(idx) {
            *slot = nodes[i];
        }
        let (x, tail) = p.split_at_mut(k);
        section_into(codim, flat, x, tail);
        match f.interpolate(&p) {
            Some(v) => values.push(v),
            None => escaped = true,
        }
    });
    if escaped {
        return Err(Error::Domain(format!(
            "plane {flat:?} leaves the field box over [0,1]^{k}"
        )));
    }
    Ok(pairwise_sum(&values) / values.len() as f64)
}

fn check_plane_field(f: &GridField, d: usize, k: usize, quadrature: usize) -> Result<()> {
    if f.d() != d {
        return Err(Error::shape("field dimension", d, f.d()));
    }
    if quadrature == 0 {
        return Err(Error::invalid("quadrature", "need at least one node per axis"));
    }
    for (axis, &(lo, hi)) in f.bounds().iter().take(k).enumerate() {
        if lo > 0.0 || hi < 1.0 {
            return Err(Error::Domain(format!("field box axis {axis} is [{lo}, {hi}], must contain [0, 1]")));
        }
    }
    Ok(())
}

/// `Tf(y)` by the tensor midpoint rule with `quadrature` nodes per axis and
/// multilinear interpolation of `f`. Fails if the plane leaves `f`'s box.
pub fn transform(f: &GridField, y: &PlaneParam, quadrature: usize) -> Result<f64> {
    check_plane_field(f, y.d(), y.k(), quadrature)?;
    transform_flat(f, y.k(), y.flatten(), &midpoints(quadrature))
}

/// `Tf` at every atom of `planes`, in atom order.
pub fn transform_all(f: &GridField, planes: &PlaneSet, quadrature: usize) -> Result<Vec<f64>> {
    check_plane_field(f, planes.d(), planes.k(), quadrature)?;
    let nodes = midpoints(quadrature);
    let mu = planes.measure();
    (0..mu.len())
        .into_par_iter()
        .map(|a| transform_flat(f, planes.k(), mu.point(a), &nodes))
        .collect()
}

/// `||Tf||_{L^2(mu_S)} = (sum_a w_a Tf(y_a)^2)^(1/2)`.
pub fn transform_l2_norm(f: &GridField, planes: &PlaneSet, quadrature: usize) -> Result<f64> {
    let tf = transform_all(f, planes, quadrature)?;
    let terms: Vec<f64> = tf
        .iter()
        .zip(planes.measure().weights())
        .map(|(t, w)| w * t * t)
        .collect();
    Ok(pairwise_sum(&terms).sqrt())
}

/// `(1 - |z|^2)^2` on the unit ball, scaled to unit integral over `R^m`.
fn quartic_kernel(m: usize, r2: f64) -> f64 {
    if r2 >= 1.0 {
        return 0.0;
    }
    let c = ((m + 2) * (m + 4)) as f64 / (8.0 * unit_ball_volume(m));
    let s = 1.0 - r2;
    c * s * s
}

/// `T*g(x, x') ~ sum_a g_a w_a phi_h(x' - s_a(x))` for `x in [0,1]^k`, zero
/// otherwise, where `s_a(x)` is the section of plane `a` above `x` and
/// `phi_h` is a quartic bump of radius `h` with unit integral.
pub fn adjoint_apply(g: &[f64], planes: &PlaneSet, x: &[f64], x_prime: &[f64], h: f64) -> Result<f64> {
    let (k, codim) = (planes.k(), planes.codim());
    let mu = planes.measure();
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid("h", "smoothing width must be positive"));
    }
    if g.len() != mu.len() {
        return Err(Error::shape("adjoint weights g", mu.len(), g.len()));
    }
    if x.len() != k {
        return Err(Error::shape("x", k, x.len()));
    }
    if x_prime.len() != codim {
        return Err(Error::shape("x'", codim, x_prime.len()));
    }
    if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Ok(0.0);
    }
    let scale = h.powi(codim as i32);
    let mut section = vec![0.0; codim];
    let terms: Vec<f64> = (0..mu.len())
        .map(|a| {
            section_into(codim, mu.point(a), x, &mut section);
            let r2 = section
                .iter()
                .zip(x_prime)
                .map(|(s, t)| (t - s) * (t - s))
                .sum::<f64>()
                / (h * h);
            g[a] * mu.weights()[a] * quartic_kernel(codim, r2) / scale
        })
        .collect();
    Ok(pairwise_sum(&terms))
}

/// `T*g` sampled at the cell centers of a grid.
pub fn adjoint_field(
    g: &[f64],
    planes: &PlaneSet,
    h: f64,
    shape: Vec<usize>,
    bounds: Vec<(f64, f64)>,
) -> Result<GridField> {
    let k = planes.k();
    let mut field = GridField::zeros(shape, bounds)?;
    if field.d() != planes.d() {
        return Err(Error::shape("field dimension", planes.d(), field.d()));
    }
    let shape = field.shape().to_vec();
    let centers: Vec<Vec<f64>> = (0..field.d())
        .map(|axis| (0..shape[axis]).map(|i| field.cell_center(axis, i)).collect())
        .collect();
    let values = field
        .values()
        .par_iter()
        .enumerate()
        .map(|(flat, _)| {
            let mut rem = flat;
            let mut p = vec![0.0; shape.len()];
            for axis in (0..shape.len()).rev() {
                p[axis] = centers[axis][rem % shape[axis]];
                rem /= shape[axis];
            }
            adjoint_apply(g, planes, &p[..k], &p[k..], h)
        })
        .collect::<Result<Vec<_>>>()?;
    field.values_mut().copy_from_slice(&values);
    Ok(field)
}

/// `||f||_{L^2_x(L^r_{x'})}`: the `L^r` norm over the last `d - k` axes in each
/// `x`-cell, then the `L^2` norm of those over the first `k` axes.
pub fn mixed_norm(f: &GridField, k: usize, r: f64) -> Result<f64> {
    let d = f.d();
    if k < 1 || k >= d {
        return Err(Error::invalid("k", format!("need 1 <= k < d = {d}")));
    }
    if !(r >= 1.0 && r.is_finite()) {
        return Err(Error::invalid("r", "exponent must be a finite value >= 1"));
    }
    let vol_x: f64 = (0..k).map(|a| f.cell_size(a)).product();
    let vol_xp: f64 = (k..d).map(|a| f.cell_size(a)).product();
    let inner_len: usize = f.shape()[k..].iter().product();
    let inner: Vec<f64> = f
        .values()
        .chunks(inner_len)
        .map(|column| {
            let powers: Vec<f64> = column.iter().map(|v| v.abs().powf(r)).collect();
            let lr = (pairwise_sum(&powers) * vol_xp).powf(1.0 / r);
            lr * lr
        })
        .collect();
    Ok((pairwise_sum(&inner) * vol_x).sqrt())
}

/// `a (1 - |z - c|^2 / rho^2)^2` inside the ball of radius `rho`, zero outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuarticBump {
    pub center: Vec<f64>,
    pub radius: f64,
    pub amplitude: f64,
}

impl ScalarField for QuarticBump {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn eval(&self, p: &[f64]) -> f64 {
        let r2: f64 = p
            .iter()
            .zip(&self.center)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / (self.radius * self.radius);
        if r2 >= 1.0 {
            0.0
        } else {
            let s = 1.0 - r2;
            self.amplitude * s * s
        }
    }
}

/// The constant function on `R^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantField {
    pub d: usize,
    pub value: f64,
}

impl ScalarField for ConstantField {
    fn dim(&self) -> usize {
        self.d
    }

    fn eval(&self, _: &[f64]) -> f64 {
        self.value
    }
}

/// `count` seeded bumps with `x` centers in `[0.1, 0.9]^k`, `x'` centers in
/// `[x'_lo, x'_hi]^{d-k}` and radii in `[0.25, 0.75]`.
pub fn random_bumps(count: usize, d: usize, k: usize, x_prime_range: (f64, f64), seed: u64) -> Vec<QuarticBump> {
    use rand::Rng;
    let mut rng = stream_rng(seed, 0);
    (0..count)
        .map(|_| {
            let center = (0..d)
                .map(|axis| {
                    let u: f64 = rng.random();
                    if axis < k {
                        0.1 + 0.8 * u
                    } else {
                        x_prime_range.0 + (x_prime_range.1 - x_prime_range.0) * u
                    }
                })
                .collect();
            QuarticBump {
                center,
                radius: 0.25 + 0.5 * rng.random::<f64>(),
                amplitude: 1.0,
            }
        })
        .collect()
}

/// The box `[0,1]^k x [-b, b]^{d-k}`.
pub fn standard_box(d: usize, k: usize, b: f64) -> Vec<(f64, f64)> {
    (0..d).map(|a| if a < k { (0.0, 1.0) } else { (-b, b) }).collect()
}

/// Fails unless every plane section over `[0,1]^k` stays inside the `x'` part of `bounds`.
pub fn check_sections_inside(planes: &PlaneSet, bounds: &[(f64, f64)]) -> Result<()> {
    let (k, codim) = (planes.k(), planes.codim());
    let mu = planes.measure();
    let mut section = vec![0.0; codim];
    let mut corner = vec![0.0; k];
    for a in 0..mu.len() {
        for bits in 0..(1usize << k) {
            for (i, c) in corner.iter_mut().enumerate() {
                *c = ((bits >> i) & 1) as f64;
            }
            section_into(codim, mu.point(a), &corner, &mut section);
            for (j, &s) in section.iter().enumerate() {
                let (lo, hi) = bounds[k + j];
                if s < lo || s > hi {
                    return Err(Error::Domain(format!(
                        "plane atom {a} reaches x'_{j} = {s} outside [{lo}, {hi}]"
                    )));
                }
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioTrial {
    pub field: String,
    pub shape: Vec<usize>,
    pub transform_norm: f64,
    pub mixed_norm: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionMax {
    pub shape: Vec<usize>,
    pub max_ratio: f64,
}

/// Ratios `||Tf||_{L^2(mu_S)} / ||f||_{L^2_x(L^{q'}_{x'})}` over a field family
/// and a resolution sweep, with a growth-slope verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRatioReport {
    pub config: TransformBoundConfig,
    pub quadrature: usize,
    #[serde(rename = "box")]
    pub bounds: Vec<(f64, f64)>,
    pub trials: Vec<RatioTrial>,
    pub resolution_sweep: Vec<ResolutionMax>,
    /// `log2 max_ratio` against `log2` of the geometric-mean cells per axis.
    pub growth_fit: SlopeFit,
    pub max_growth_slope: f64,
    pub pass: bool,
}

impl BoundRatioReport {
    /// CSV with columns `field,shape,transform_norm,mixed_norm,ratio`.
    pub fn write_csv(&self, out: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["field", "shape", "transform_norm", "mixed_norm", "ratio"])?;
        for t in &self.trials {
            let shape = t.shape.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("x");
            w.serialize((&t.field, shape, t.transform_norm, t.mixed_norm, t.ratio))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Settings for [`bound_ratio_experiment`] beyond the inputs under test.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioSettings {
    pub quadrature: usize,
    pub bounds: Vec<(f64, f64)>,
    pub max_growth_slope: f64,
}

impl RatioSettings {
    pub fn standard(d: usize, k: usize) -> Self {
        RatioSettings {
            quadrature: default_quadrature(k),
            bounds: standard_box(d, k, DEFAULT_XPRIME_BOUND),
            max_growth_slope: DEFAULT_MAX_GROWTH_SLOPE,
        }
    }
}

/// Sample every field of `family` at every grid shape in `shapes`, compute
/// the ratio of `||Tf||_{L^2(mu_S)}` to the mixed norm with exponent `q'`,
/// and fit the growth of the per-shape maximum. Passes iff the fitted slope
/// is at most `settings.max_growth_slope`.
pub fn bound_ratio_experiment(
    planes: &PlaneSet,
    alpha_report: &FrostmanReport,
    epsilon: f64,
    family: &[(String, &dyn ScalarField)],
    shapes: &[Vec<usize>],
    settings: &RatioSettings,
) -> Result<BoundRatioReport> {
    let config = compute_q(planes.d(), planes.k(), alpha_report.exponent, epsilon)?;
    if family.is_empty() {
        return Err(Error::invalid("family", "need at least one test function"));
    }
    if shapes.len() < 2 {
        return Err(Error::Underdetermined { needed: 2, got: shapes.len() });
    }
    check_sections_inside(planes, &settings.bounds)?;
    let mut trials = Vec::new();
    let mut sweep = Vec::new();
    let mut points = Vec::new();
    for shape in shapes {
        let mut max_ratio: f64 = 0.0;
        for (name, source) in family {
            let f = GridField::sample(*source, shape.clone(), settings.bounds.clone())?;
            let transform_norm = transform_l2_norm(&f, planes, settings.quadrature)?;
            let mixed = mixed_norm(&f, planes.k(), config.q_conj)?;
            if mixed <= 0.0 {
                return Err(Error::Degenerate(format!("field {name} vanishes at shape {shape:?}")));
            }
            let ratio = transform_norm / mixed;
            max_ratio = max_ratio.max(ratio);
            trials.push(RatioTrial {
                field: name.clone(),
                shape: shape.clone(),
                transform_norm,
                mixed_norm: mixed,
                ratio,
            });
        }
        let cells: f64 = shape.iter().map(|&s| (s as f64).ln()).sum::<f64>() / shape.len() as f64;
        points.push((cells.exp().log2(), max_ratio.log2()));
        sweep.push(ResolutionMax {
            shape: shape.clone(),
            max_ratio,
        });
    }
    let growth_fit = SlopeFit::fit(points)?;
    Ok(BoundRatioReport {
        config,
        quadrature: settings.quadrature,
        bounds: settings.bounds.clone(),
        trials,
        resolution_sweep: sweep,
        pass: growth_fit.slope <= settings.max_growth_slope,
        max_growth_slope: settings.max_growth_slope,
        growth_fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{product_measure, uniform_grid_measure, AtomBudget, DiscreteMeasure};

    fn bisect_q(rhs: f64) -> f64 {
        let (mut lo, mut hi) = (2.0, 1e6);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if 0.5 - 1.0 / mid < rhs {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn q_for_the_planar_line_case() {
        let c = compute_q(2, 1, 1.5, 0.25).unwrap();
        assert!((c.q - 8.0 / 3.0).abs() < 1e-12);
        assert!((c.q_conj - 8.0 / 5.0).abs() < 1e-12);
        assert!((c.q - bisect_q(0.125)).abs() < 1e-9);
        assert!((0.5 - 1.0 / c.q - c.rhs()).abs() < 1e-12);
    }

    #[test]
    fn q_rejects_hypothesis_violations() {
        assert!(compute_q(3, 1, 3.5, 0.5).is_err());
        assert!(compute_q(2, 1, 1.0, 0.1).is_err());
        assert!(compute_q(2, 1, 2.0, 0.1).is_err());
        assert!(compute_q(2, 1, 1.5, 0.0).is_err());
        assert!(compute_q(2, 2, 1.5, 0.1).is_err());
    }

    #[test]
    fn q_tends_to_two_at_the_epsilon_limit() {
        let c = compute_q(2, 1, 1.5, 0.5 - 1e-9).unwrap();
        assert!((c.q - 2.0).abs() < 1e-8 && (c.q_conj - 2.0).abs() < 1e-8);
    }

    #[test]
    fn q_monotonicity() {
        let a = compute_q(3, 1, 3.6, 0.2).unwrap().q;
        assert!(compute_q(3, 1, 3.6, 0.3).unwrap().q < a);
        assert!(compute_q(3, 1, 3.7, 0.2).unwrap().q > a);
    }

    fn line(y0: f64, y1: f64) -> PlaneParam {
        PlaneParam::new(2, 1, vec![y0, y1]).unwrap()
    }

    #[test]
    fn constant_field_transforms_to_one() {
        let f = GridField::sample(&ConstantField { d: 2, value: 1.0 }, vec![16, 16], standard_box(2, 1, 4.0)).unwrap();
        for y in [line(0.0, 0.0), line(-2.0, 3.5), line(1.0, -1.0)] {
            assert!((transform(&f, &y, 100).unwrap() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn x_only_field_integrates_over_unit_interval() {
        struct G;
        impl ScalarField for G {
            fn dim(&self) -> usize {
                2
            }
            fn eval(&self, p: &[f64]) -> f64 {
                p[0]
            }
        }
        let f = GridField::sample(&G, vec![64, 8], standard_box(2, 1, 4.0)).unwrap();
        // Linear in x between centers, constant in the half-cell margins.
        // The half-cell margins at x = 0 and x = 1 contribute +h^2/8 and -h^2/8.
        let want = 0.5;
        let got = transform(&f, &line(0.3, 1.2), 2048).unwrap();
        assert!((got - want).abs() < 1e-4, "{got}");
    }

    #[test]
    fn smoothed_indicator_tends_to_line_length() {
        // f = 1 on [0,1] x [0,1/2] with a one-cell ramp outside; the line
        // x -> (x, x/2) stays inside the strip, so Tf -> 1 as cells shrink.
        struct Strip(f64);
        impl ScalarField for Strip {
            fn dim(&self) -> usize {
                2
            }
            fn eval(&self, p: &[f64]) -> f64 {
                let v = p[1];
                let ramp = |t: f64| (t / self.0).clamp(0.0, 1.0);
                ramp(v + self.0) * ramp(0.5 + self.0 - v)
            }
        }
        let mut errs = Vec::new();
        for n in [64usize, 256, 1024] {
            let f = GridField::sample(&Strip(2.0 / n as f64), vec![n, n], vec![(0.0, 1.0), (-1.0, 1.0)]).unwrap();
            errs.push((transform(&f, &line(0.0, 0.5), n).unwrap() - 1.0).abs());
        }
        assert!(errs[1] < errs[0] && errs[2] < errs[1] && errs[2] < 1e-3, "{errs:?}");
    }

    #[test]
    fn escaping_plane_is_an_error() {
        let f = GridField::zeros(vec![8, 8], standard_box(2, 1, 1.0)).unwrap();
        assert!(matches!(transform(&f, &line(0.5, 1.0), 16), Err(Error::Domain(_))));
    }

    #[test]
    fn mixed_norm_of_constant() {
        let f = GridField::sample(&ConstantField { d: 3, value: -2.0 }, vec![4, 6, 5], standard_box(3, 1, 1.5)).unwrap();
        let vol = 9.0f64;
        for r in [1.0, 1.6, 2.0, 3.0] {
            let want = 2.0 * vol.powf(1.0 / r);
            assert!((mixed_norm(&f, 1, r).unwrap() - want).abs() < 1e-12 * want);
        }
    }

    #[test]
    fn mixed_norm_matches_transposed_loops() {
        let mut rng = stream_rng(11, 0);
        let shape = vec![5usize, 7, 3];
        let bounds = vec![(0.0, 1.0), (0.0, 2.0), (-1.0, 0.5)];
        let mut f = GridField::zeros(shape.clone(), bounds).unwrap();
        use rand::Rng;
        for v in f.values_mut() {
            *v = rng.random::<f64>() * 2.0 - 1.0;
        }
        let r = 1.6;
        for k in [1usize, 2] {
            // Accumulate |f|^r into per-x-cell buckets, walking x' outermost.
            let nx: usize = shape[..k].iter().product();
            let nxp: usize = shape[k..].iter().product();
            let mut acc = vec![0.0; nx];
            for j in 0..nxp {
                for (i, a) in acc.iter_mut().enumerate() {
                    *a += f.values()[i * nxp + j].abs().powf(r);
                }
            }
            let vxp: f64 = (k..3).map(|a| f.cell_size(a)).product();
            let vx: f64 = (0..k).map(|a| f.cell_size(a)).product();
            let want = acc.iter().map(|a| (a * vxp).powf(2.0 / r) * vx).sum::<f64>().sqrt();
            assert!((mixed_norm(&f, k, r).unwrap() - want).abs() < 1e-12 * want);
        }
        let l2 = (f.values().iter().map(|v| v * v).sum::<f64>() * f.cell_volume()).sqrt();
        assert!((mixed_norm(&f, 1, 2.0).unwrap() - l2).abs() < 1e-12 * l2);
    }

    fn small_planes() -> PlaneSet {
        let a = uniform_grid_measure(1, 5, AtomBudget::DEFAULT).unwrap();
        let b = uniform_grid_measure(1, 3, AtomBudget::DEFAULT).unwrap();
        PlaneSet::new(2, 1, product_measure(&a, &b, AtomBudget::DEFAULT).unwrap()).unwrap()
    }

    #[test]
    fn single_atom_adjoint_has_unit_mass() {
        let planes = PlaneSet::new(2, 1, DiscreteMeasure::point_mass(&[0.25, 0.5]).unwrap()).unwrap();
        let h = 0.05;
        let x = 0.4;
        let centre = 0.25 + 0.5 * x;
        let n = 4000;
        let step = 4.0 * h / n as f64;
        let total: f64 = (0..n)
            .map(|i| {
                let t = centre - 2.0 * h + (i as f64 + 0.5) * step;
                adjoint_apply(&[1.0], &planes, &[x], &[t], h).unwrap() * step
            })
            .sum();
        assert!((total - 1.0).abs() < 1e-6);
        assert_eq!(adjoint_apply(&[1.0], &planes, &[x], &[centre + 1.01 * h], h).unwrap(), 0.0);
        assert_eq!(adjoint_apply(&[0.0], &planes, &[x], &[centre], h).unwrap(), 0.0);
        assert!(adjoint_apply(&[1.0], &planes, &[x], &[centre], 0.0).is_err());
    }

    #[test]
    fn adjoint_duality_gap_shrinks_with_h() {
        let planes = small_planes();
        let g: Vec<f64> = (0..planes.measure().len()).map(|i| 1.0 + 0.1 * i as f64).collect();
        let bump = QuarticBump {
            center: vec![0.5, 0.8],
            radius: 0.9,
            amplitude: 1.0,
        };
        let bounds = vec![(0.0, 1.0), (-1.0, 3.0)];
        let f = GridField::sample(&bump, vec![200, 800], bounds.clone()).unwrap();
        let tf = transform_all(&f, &planes, 512).unwrap();
        let lhs: f64 = tf.iter().zip(planes.measure().weights()).zip(&g).map(|((t, w), g)| t * w * g).sum();
        let mut gaps = Vec::new();
        for h in [0.2, 0.1, 0.05] {
            let tg = adjoint_field(&g, &planes, h, vec![200, 800], bounds.clone()).unwrap();
            let rhs: f64 = f.values().iter().zip(tg.values()).map(|(a, b)| a * b).sum::<f64>() * f.cell_volume();
            gaps.push((lhs - rhs).abs());
        }
        assert!(gaps[1] < gaps[0] && gaps[2] < gaps[1], "{gaps:?}");
        assert!(gaps[2] < 0.05 * lhs.abs());
    }

    #[test]
    fn constant_ratio_closed_form() {
        let planes = small_planes();
        let alpha = FrostmanReport::from_masses(&[0.5, 0.25, 0.125], vec![0.5, 0.25 * 0.6, 0.125 * 0.35], 2.0).unwrap();
        let alpha = FrostmanReport { exponent: 1.6, ..alpha };
        let one = ConstantField { d: 2, value: 1.0 };
        let family: Vec<(String, &dyn ScalarField)> = vec![("one".into(), &one)];
        let settings = RatioSettings::standard(2, 1);
        let rep = bound_ratio_experiment(&planes, &alpha, 0.3, &family, &[vec![16, 16], vec![32, 32]], &settings).unwrap();
        let want = planes.measure().mass().sqrt() / 8f64.powf(1.0 / rep.config.q_conj);
        for t in &rep.trials {
            assert!((t.ratio - want).abs() < 1e-10 * want);
        }
        assert!(rep.pass);
    }

    #[test]
    fn sections_outside_box_are_rejected() {
        let planes = PlaneSet::new(2, 1, DiscreteMeasure::point_mass(&[3.5, 1.0]).unwrap()).unwrap();
        assert!(check_sections_inside(&planes, &standard_box(2, 1, 4.0)).is_err());
        assert!(check_sections_inside(&planes, &standard_box(2, 1, 4.5)).is_ok());
    }

    #[test]
    fn node_walk_covers_cube() {
        let mut seen = Vec::new();
        for_each_node(2, 3, |idx| seen.push((idx[0], idx[1])));
        assert_eq!(seen.len(), 9);
        assert_eq!(seen[1], (0, 1));
        assert_eq!(seen[8], (2, 2));
    }
}
