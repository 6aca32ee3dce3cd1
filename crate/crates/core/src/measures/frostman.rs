//! Ball-mass probing and Frostman exponent fits.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::DiscreteMeasure;
use crate::error::{Error, Result};
use crate::fit::SlopeFit;
use crate::numeric::stream_rng;

/// Fitted Frostman bound `mass(B(p, r)) <= constant * r^exponent`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrostmanReport {
    pub exponent: f64,
    pub constant: f64,
    pub fit: SlopeFit,
    pub radii: Vec<f64>,
    /// Largest probed mass at each radius.
    pub masses: Vec<f64>,
    /// For sliced (tube) estimates: the direction carrying the most mass at
    /// the smallest radius.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worst_direction: Option<Vec<f64>>,
}

impl FrostmanReport {
    /// Assemble a report from per-radius maximal masses. The exponent is the
    /// log-log slope clamped to `[0, max_exponent]`; the constant is the
    /// smallest one for which the bound holds at every probed radius.
    pub(crate) fn from_masses(radii: &[f64], masses: Vec<f64>, max_exponent: f64) -> Result<Self> {
        if masses.iter().all(|&m| m <= 0.0) {
            return Err(Error::Degenerate("every probed ball has zero mass".into()));
        }
        if masses.iter().any(|&m| m <= 0.0) {
            return Err(Error::Degenerate(
                "a probed radius captured zero mass; add probe centers".into(),
            ));
        }
        let fit = SlopeFit::fit_log2(radii, &masses)?;
        let exponent = fit.slope.clamp(0.0, max_exponent);
        let constant = radii
            .iter()
            .zip(&masses)
            .map(|(r, m)| m / r.powf(exponent))
            .fold(0.0, f64::max);
        Ok(FrostmanReport {
            exponent,
            constant,
            fit,
            radii: radii.to_vec(),
            masses,
            worst_direction: None,
        })
    }

    /// True when `mass <= constant * r^exponent` at every probed radius,
    /// up to relative slack `rel_tol`.
    pub fn bound_holds(&self, rel_tol: f64) -> bool {
        self.radii
            .iter()
            .zip(&self.masses)
            .all(|(r, m)| *m <= self.constant * r.powf(self.exponent) * (1.0 + rel_tol))
    }
}

/// Where to center the probing balls.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProbePolicy {
    /// Use at most this many atoms as centers, taken with a uniform stride.
    pub max_atom_centers: Option<usize>,
    /// Extra centers drawn uniformly from the bounding box of the atoms.
    pub random_centers: usize,
    pub seed: u64,
}

impl ProbePolicy {
    pub fn capped(max_atom_centers: usize) -> Self {
        ProbePolicy {
            max_atom_centers: Some(max_atom_centers),
            ..Self::default()
        }
    }

    /// Flat list of probe centers for a point cloud in `R^dim`.
    pub(crate) fn centers(&self, dim: usize, points: &[f64]) -> Vec<f64> {
        let n = points.len() / dim;
        let stride = match self.max_atom_centers {
            Some(cap) if cap > 0 && n > cap => n.div_ceil(cap),
            _ => 1,
        };
        let mut out: Vec<f64> = points
            .chunks_exact(dim)
            .step_by(stride)
            .flatten()
            .copied()
            .collect();
        if self.random_centers > 0 && n > 0 {
            let mut lo = vec![f64::INFINITY; dim];
            let mut hi = vec![f64::NEG_INFINITY; dim];
            for p in points.chunks_exact(dim) {
                for a in 0..dim {
                    lo[a] = lo[a].min(p[a]);
                    hi[a] = hi[a].max(p[a]);
                }
            }
            let mut rng = stream_rng(self.seed, 0x6365_6e74);
            for _ in 0..self.random_centers {
                for a in 0..dim {
                    out.push(lo[a] + (hi[a] - lo[a]) * rng.random::<f64>());
                }
            }
        }
        out
    }
}

/// Mass of the closed ball `B(center, r)`, summed in atom order.
pub fn ball_mass(mu: &DiscreteMeasure, center: &[f64], r: f64) -> f64 {
    let r2 = r * r;
    mu.points()
        .zip(mu.weights())
        .filter(|(p, _)| dist2(p, center) <= r2)
        .map(|(_, w)| *w)
        .sum()
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Uniform hash grid with cells of side `cell`; a ball of radius `<= cell`
/// meets at most the 3^dim cells around its center.
struct CellIndex<'a> {
    dim: usize,
    cell: f64,
    points: &'a [f64],
    weights: &'a [f64],
    cells: HashMap<Vec<i64>, Vec<u32>>,
    offsets: Vec<Vec<i64>>,
}

impl<'a> CellIndex<'a> {
    fn new(dim: usize, points: &'a [f64], weights: &'a [f64], cell: f64) -> Self {
        let mut cells: HashMap<Vec<i64>, Vec<u32>> = HashMap::new();
        for (i, p) in points.chunks_exact(dim).enumerate() {
            cells
                .entry(p.iter().map(|x| (x / cell).floor() as i64).collect())
                .or_default()
                .push(i as u32);
        }
        let mut offsets = vec![Vec::new()];
        for _ in 0..dim {
            offsets = offsets
                .into_iter()
                .flat_map(|o: Vec<i64>| {
                    (-1..=1).map(move |d| {
                        let mut o = o.clone();
                        o.push(d);
                        o
                    })
                })
                .collect();
        }
        CellIndex {
            dim,
            cell,
            points,
            weights,
            cells,
            offsets,
        }
    }

    fn ball_mass(&self, center: &[f64], r: f64) -> f64 {
        debug_assert!(r <= self.cell);
        let base: Vec<i64> = center.iter().map(|x| (x / self.cell).floor() as i64).collect();
        let r2 = r * r;
        let mut key = vec![0i64; self.dim];
        let mut total = 0.0;
        for off in &self.offsets {
            for a in 0..self.dim {
                key[a] = base[a] + off[a];
            }
            if let Some(ids) = self.cells.get(key.as_slice()) {
                for &i in ids {
                    let i = i as usize;
                    let p = &self.points[i * self.dim..(i + 1) * self.dim];
                    if dist2(p, center) <= r2 {
                        total += self.weights[i];
                    }
                }
            }
        }
        total
    }
}

/// For each radius, the largest ball mass over the given (flat) centers.
pub fn max_ball_masses(
    dim: usize,
    points: &[f64],
    weights: &[f64],
    centers: &[f64],
    radii: &[f64],
) -> Vec<f64> {
    radii
        .iter()
        .map(|&r| {
            let index = CellIndex::new(dim, points, weights, r);
            centers
                .par_chunks(dim)
                .map(|c| index.ball_mass(c, r))
                .reduce(|| 0.0, f64::max)
        })
        .collect()
}

/// Radii must be strictly decreasing, inside the support diameter, and at
/// least twice the atomic resolution.
pub(crate) fn validate_radii(radii: &[f64], diameter: f64, resolution: f64) -> Result<()> {
    if radii.len() < 3 {
        return Err(Error::Underdetermined {
            needed: 3,
            got: radii.len(),
        });
    }
    if radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::invalid("radii", "must be positive and finite"));
    }
    if radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("radii", "must be strictly decreasing"));
    }
    if diameter > 0.0 && radii[0] >= diameter {
        return Err(Error::OutsideWindow(format!(
            "radius {} is not below the support diameter {diameter}",
            radii[0]
        )));
    }
    let floor = 2.0 * resolution;
    if let Some(r) = radii.iter().find(|&&r| r < floor) {
        return Err(Error::OutsideWindow(format!(
            "radius {r} is below twice the atomic resolution {resolution}"
        )));
    }
    Ok(())
}

/// Fit the exponent of `max_p mu(B(p, r))` against `r`.
pub fn estimate_frostman_exponent(
    mu: &DiscreteMeasure,
    radii: &[f64],
    policy: &ProbePolicy,
) -> Result<FrostmanReport> {
    validate_radii(radii, mu.diameter_hint(), mu.resolution())?;
    let dim = mu.ambient_dim();
    let centers = policy.centers(dim, mu.points_flat());
    let masses = max_ball_masses(dim, mu.points_flat(), mu.weights(), &centers, radii);
    FrostmanReport::from_masses(radii, masses, dim as f64)
}
