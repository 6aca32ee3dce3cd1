//! The projection family `P_x : R^n -> R^l`, its companion `T_x`, the graph
//! parametrization of affine k-planes, and the sliced Frostman condition.
//!
//! A parameter `x` is an `l x (n-l)` matrix stored row-major. A plane
//! parameter `y` is a `(k+1) x (d-k)` matrix whose row 0 holds the
//! intercepts; flattening is row-major with the intercept row first.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{
    max_ball_masses, pushforward_affine, DiscreteMeasure, FrostmanReport, MeasureFile, ProbePolicy,
};
use crate::numeric::{dot, norm};

/// Layout tag written into plane-set files.
pub const PLANE_LAYOUT: &str = "row-major-intercept-first";

/// Matrix `x = (x_i^j)`, `i < l`, `j < n - l`, parametrizing `P_x` and `T_x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionParam {
    n: usize,
    l: usize,
    entries: Vec<f64>,
}

impl ProjectionParam {
    pub fn new(n: usize, l: usize, entries: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("n", "must be at least 2"));
        }
        if l < 1 || l >= n {
            return Err(Error::invalid("l", format!("must satisfy 1 <= l < n = {n}")));
        }
        if entries.len() != l * (n - l) {
            return Err(Error::shape("projection parameter", l * (n - l), entries.len()));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("entries", "must be finite"));
        }
        Ok(ProjectionParam { n, l, entries })
    }

    pub fn zeros(n: usize, l: usize) -> Result<Self> {
        Self::new(n, l, vec![0.0; l * n.saturating_sub(l)])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn codim(&self) -> usize {
        self.n - self.l
    }

    /// `x_i^j` with zero-based indices.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.codim() + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.entries)
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.codim()..(i + 1) * self.codim()]
    }
}

/// `P_x p`: component `i` is `p_i + sum_j x_i^j p_{l+j}`.
pub fn project_point(x: &ProjectionParam, p: &[f64]) -> Result<Vec<f64>> {
    if p.len() != x.n {
        return Err(Error::shape("project_point input", x.n, p.len()));
    }
    let tail = &p[x.l..];
    Ok((0..x.l).map(|i| p[i] + dot(x.row(i), tail)).collect())
}

/// `T_x xi`: component `j` is `sum_i x_i^j xi_i`.
pub fn t_map(x: &ProjectionParam, xi: &[f64]) -> Result<Vec<f64>> {
    if xi.len() != x.l {
        return Err(Error::shape("t_map input", x.l, xi.len()));
    }
    let mut out = vec![0.0; x.codim()];
    t_map_into(x.codim(), &x.entries, xi, &mut out);
    Ok(out)
}

/// `T_x xi` for a flattened parameter, written into `out`.
pub(crate) fn t_map_into(codim: usize, entries: &[f64], xi: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for (i, &xi_i) in xi.iter().enumerate() {
        let row = &entries[i * codim..(i + 1) * codim];
        for (o, &e) in out.iter_mut().zip(row) {
            *o += e * xi_i;
        }
    }
}

/// `|<xi, P_x p> - <(xi, T_x xi), p>|`.
pub fn check_duality_identity(x: &ProjectionParam, xi: &[f64], p: &[f64]) -> Result<f64> {
    let lhs = dot(xi, &project_point(x, p)?);
    let t = t_map(x, xi)?;
    let rhs = dot(xi, &p[..x.l]) + dot(&t, &p[x.l..]);
    Ok((lhs - rhs).abs())
}

/// Residual bound the duality identity must meet in floating point.
pub fn duality_bound(x: &ProjectionParam, xi: &[f64], p: &[f64]) -> f64 {
    1e-12 * (1.0 + norm(xi)) * (1.0 + norm(p)) * (1.0 + x.frobenius_norm())
}

/// Matrix `y = (y_i^j)`, `i <= k`, `j < d - k`, naming the k-plane
/// `{(x, y_0 + sum_i x_i y_i)}` in `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneParam {
    d: usize,
    k: usize,
    entries: Vec<f64>,
}

impl PlaneParam {
    pub fn new(d: usize, k: usize, entries: Vec<f64>) -> Result<Self> {
        check_plane_dims(d, k)?;
        if entries.len() != (k + 1) * (d - k) {
            return Err(Error::shape("plane parameter", (k + 1) * (d - k), entries.len()));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("entries", "must be finite"));
        }
        Ok(PlaneParam { d, k, entries })
    }

    /// View a flattened atom of a plane-set measure as a parameter.
    pub fn from_flat(d: usize, k: usize, flat: &[f64]) -> Result<Self> {
        Self::new(d, k, flat.to_vec())
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * (self.d - self.k) + j]
    }

    /// Row-major, intercept row first.
    pub fn flatten(&self) -> &[f64] {
        &self.entries
    }
}

fn check_plane_dims(d: usize, k: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::invalid("d", "must be at least 2"));
    }
    if k < 1 || k >= d {
        return Err(Error::invalid("k", format!("must satisfy 1 <= k < d = {d}")));
    }
    Ok(())
}

/// The section coordinates `y_0^j + sum_i x_i y_i^j`, for a flattened plane
/// parameter, written into `out` (length `d - k`).
#[inline]
pub(crate) fn section_into(codim: usize, flat: &[f64], x: &[f64], out: &mut [f64]) {
    out.copy_from_slice(&flat[..codim]);
    for (i, &xi) in x.iter().enumerate() {
        let row = &flat[(i + 1) * codim..(i + 2) * codim];
        for (o, &y) in out.iter_mut().zip(row) {
            *o += xi * y;
        }
    }
}

/// The point of the plane `pi_y` above `x in R^k`.
pub fn plane_point(y: &PlaneParam, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != y.k {
        return Err(Error::shape("plane_point input", y.k, x.len()));
    }
    let mut out = x.to_vec();
    out.resize(y.d, 0.0);
    section_into(y.d - y.k, &y.entries, x, &mut out[y.k..]);
    Ok(out)
}

/// The projection parameter `X` with `n = (k+1)(d-k)`, `l = d-k` for which
/// `P_X(flatten(y))` is the section of `pi_y` above `x`, and
/// `T_X xi = (x_1 xi, ..., x_k xi)`.
pub fn plane_as_projection(d: usize, k: usize, x: &[f64]) -> Result<ProjectionParam> {
    check_plane_dims(d, k)?;
    if x.len() != k {
        return Err(Error::shape("plane_as_projection input", k, x.len()));
    }
    if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Domain(format!("x = {x:?} lies outside [0,1]^{k}")));
    }
    let l = d - k;
    let n = (k + 1) * l;
    let codim = n - l;
    let mut entries = vec![0.0; l * codim];
    for j in 0..l {
        for (i, &xi) in x.iter().enumerate() {
            entries[j * codim + i * l + j] = xi;
        }
    }
    ProjectionParam::new(n, l, entries)
}

/// Push a measure on `[0,1]^k` into the projection-parameter space through
/// `x -> flatten(plane_as_projection(d, k, x))`.
pub fn embed_plane_parameters(d: usize, k: usize, lambda: &DiscreteMeasure) -> Result<DiscreteMeasure> {
    check_plane_dims(d, k)?;
    if lambda.ambient_dim() != k {
        return Err(Error::shape("embedded parameter measure", k, lambda.ambient_dim()));
    }
    let (lo, hi) = lambda.bounding_box();
    if lo.iter().any(|&v| v < 0.0) || hi.iter().any(|&v| v > 1.0) {
        return Err(Error::Domain("parameter measure must live in [0,1]^k".into()));
    }
    let l = d - k;
    let codim = k * l;
    let mut rows = vec![vec![0.0; k]; l * codim];
    for j in 0..l {
        for i in 0..k {
            rows[j * codim + i * l + j][i] = 1.0;
        }
    }
    pushforward_affine(lambda, &rows, &vec![0.0; l * codim])
}

/// A measure on plane parameters: each atom is a flattened [`PlaneParam`].
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneSet {
    d: usize,
    k: usize,
    measure: DiscreteMeasure,
}

impl PlaneSet {
    pub fn new(d: usize, k: usize, measure: DiscreteMeasure) -> Result<Self> {
        check_plane_dims(d, k)?;
        let dim = (k + 1) * (d - k);
        if measure.ambient_dim() != dim {
            return Err(Error::shape("plane set measure", dim, measure.ambient_dim()));
        }
        Ok(PlaneSet { d, k, measure })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn codim(&self) -> usize {
        self.d - self.k
    }

    pub fn measure(&self) -> &DiscreteMeasure {
        &self.measure
    }

    pub fn plane(&self, i: usize) -> PlaneParam {
        PlaneParam {
            d: self.d,
            k: self.k,
            entries: self.measure.point(i).to_vec(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&PlaneSetFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: PlaneSetFile = serde_json::from_str(text)?;
        file.try_into()
    }
}

/// On-disk plane set: the measure file plus a `d`, `k`, `layout` header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneSetFile {
    pub d: usize,
    pub k: usize,
    pub layout: String,
    #[serde(flatten)]
    pub measure: MeasureFile,
}

impl From<&PlaneSet> for PlaneSetFile {
    fn from(s: &PlaneSet) -> Self {
        PlaneSetFile {
            d: s.d,
            k: s.k,
            layout: PLANE_LAYOUT.to_string(),
            measure: MeasureFile::from(&s.measure),
        }
    }
}

impl TryFrom<PlaneSetFile> for PlaneSet {
    type Error = Error;

    fn try_from(f: PlaneSetFile) -> Result<Self> {
        if f.layout != PLANE_LAYOUT {
            return Err(Error::invalid(
                "layout",
                format!("expected {PLANE_LAYOUT:?}, found {:?}", f.layout),
            ));
        }
        PlaneSet::new(f.d, f.k, f.measure.try_into()?)
    }
}

/// Directions on the unit sphere of `R^l`: a deterministic spread set plus
/// `random` seeded Gaussian-normalized directions.
///
/// The deterministic part is `{+1, -1}` for `l = 1`, `count` equally spaced
/// angles for `l = 2`, a Fibonacci lattice of `count` points for `l = 3`,
/// and the signed coordinate axes otherwise.
pub fn sphere_directions(l: usize, count: usize, random: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    match l {
        0 => return out,
        1 => {
            out.push(vec![1.0]);
            out.push(vec![-1.0]);
        }
        2 => {
            for i in 0..count.max(1) {
                let t = std::f64::consts::TAU * i as f64 / count.max(1) as f64;
                out.push(vec![t.cos(), t.sin()]);
            }
        }
        3 => {
            let n = count.max(1);
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            for i in 0..n {
                let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
                let rad = (1.0 - z * z).sqrt();
                let t = golden * i as f64;
                out.push(vec![rad * t.cos(), rad * t.sin(), z]);
            }
        }
        _ => {
            for a in 0..l {
                for s in [1.0, -1.0] {
                    let mut v = vec![0.0; l];
                    v[a] = s;
                    out.push(v);
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = out.len() + random;
    while out.len() < target {
        let v: Vec<f64> = (0..l).map(|_| StandardNormal.sample(&mut rng)).collect();
        let r = norm(&v);
        if r > 1e-9 {
            out.push(v.iter().map(|c| c / r).collect());
        }
    }
    out
}

/// Fit the exponent of the worst tube mass
/// `sup lambda({x : |T_x xi - p2| <= r})` over the given unit directions.
///
/// `lambda` lives on `R^{l(n-l)}`; each atom is a flattened
/// [`ProjectionParam`]. Tube centers `p2` are the images `T_x xi` of the
/// atoms themselves, plus the random centers of `policy`.
pub fn slice_frostman_exponent(
    lambda: &DiscreteMeasure,
    n: usize,
    l: usize,
    directions: &[Vec<f64>],
    radii: &[f64],
    policy: &ProbePolicy,
) -> Result<FrostmanReport> {
    ProjectionParam::zeros(n, l)?;
    let codim = n - l;
    if lambda.ambient_dim() != l * codim {
        return Err(Error::shape("slice measure", l * codim, lambda.ambient_dim()));
    }
    if directions.is_empty() {
        return Err(Error::invalid("directions", "need at least one direction"));
    }
    for xi in directions {
        if xi.len() != l {
            return Err(Error::shape("direction", l, xi.len()));
        }
        if (norm(xi) - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("directions", format!("{xi:?} is not a unit vector")));
        }
    }
    crate::measures::frostman::validate_radii(radii, lambda.diameter_hint(), lambda.resolution())?;

    let mut envelope = vec![0.0f64; radii.len()];
    let mut worst: Option<(f64, &Vec<f64>)> = None;
    let mut image = vec![0.0; lambda.len() * codim];
    for xi in directions {
        for (p, out) in lambda.points().zip(image.chunks_exact_mut(codim)) {
            t_map_into(codim, p, xi, out);
        }
        let centers = policy.centers(codim, &image);
        let masses = max_ball_masses(codim, &image, lambda.weights(), &centers, radii);
        let last = *masses.last().expect("at least three radii");
        if worst.is_none_or(|(m, _)| last > m) {
            worst = Some((last, xi));
        }
        for (e, m) in envelope.iter_mut().zip(masses) {
            *e = e.max(m);
        }
    }
    let mut report = FrostmanReport::from_masses(radii, envelope, codim as f64)?;
    report.worst_direction = worst.map(|(_, xi)| xi.clone());
    Ok(report)
}
