//! Unions of k-planes on finite grids: occupancy masks, occupancy sweeps
//! across resolutions, box dimensions, the Cantor-row family whose union is
//! null, and sumsets `A0 + x A1`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::GridField;
use crate::fit::SlopeFit;
use crate::measures::{make_cantor_measure, product_measure, uniform_grid_measure, AtomBudget, CantorSpec, DiscreteMeasure};
use crate::projections::{section_into, PlaneSet};
use crate::spectral::{FourierKernel, FourierSource};

/// Occupancy slopes at or above this read as positive measure.
pub const POSITIVE_SLOPE_MIN: f64 = -0.05;
/// Occupancy slopes at or below this read as null.
pub const NULL_SLOPE_MAX: f64 = -0.1;

/// The box `[0,1]^k x [-2, k+2]^{d-k}`, which holds every section of a plane
/// with parameters in `[0,1]^{(k+1)(d-k)}`.
pub fn default_clip_box(d: usize, k: usize) -> Vec<(f64, f64)> {
    (0..d)
        .map(|a| if a < k { (0.0, 1.0) } else { (-2.0, k as f64 + 2.0) })
        .collect()
}

fn check_clip(planes: &PlaneSet, clip: &[(f64, f64)]) -> Result<()> {
    if clip.len() != planes.d() {
        return Err(Error::shape("clip box", planes.d(), clip.len()));
    }
    for (axis, &(lo, hi)) in clip.iter().enumerate() {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::invalid("clip_box", format!("axis {axis} is [{lo}, {hi}]")));
        }
        if axis < planes.k() && (lo > 0.0 || hi < 1.0) {
            return Err(Error::invalid("clip_box", format!("axis {axis} must contain [0, 1]")));
        }
    }
    Ok(())
}

/// 0/1 mask of the cells of `clip` (split `per_axis` times along every axis)
/// met by some plane of `planes`.
///
/// Each plane is a graph over the first `k` axes, so for every column of
/// cells (a cell index over those axes) the plane meets the column at its
/// section above the column center, and exactly that cell is marked.
pub fn rasterize_union(planes: &PlaneSet, clip: &[(f64, f64)], per_axis: usize) -> Result<GridField> {
    if per_axis < 2 {
        return Err(Error::invalid("per_axis", "need at least 2 cells per axis"));
    }
    check_clip(planes, clip)?;
    let (d, k, codim) = (planes.d(), planes.k(), planes.codim());
    let mut mask = GridField::zeros(vec![per_axis; d], clip.to_vec())?;
    let probe = mask.clone();
    let column_len = per_axis.pow(codim as u32);
    let mu = planes.measure();
    mask.values_mut()
        .par_chunks_mut(column_len)
        .enumerate()
        .for_each(|(column, cells)| {
            let mut x = vec![0.0; k];
            let mut rem = column;
            for axis in (0..k).rev() {
                x[axis] = probe.cell_center(axis, rem % per_axis);
                rem /= per_axis;
            }
            let mut section = vec![0.0; codim];
            'atoms: for a in 0..mu.len() {
                section_into(codim, mu.point(a), &x, &mut section);
                let mut offset = 0;
                for (j, &s) in section.iter().enumerate() {
                    match probe.axis_cell(k + j, s) {
                        Some(i) => offset = offset * per_axis + i,
                        None => continue 'atoms,
                    }
                }
                cells[offset] = 1.0;
            }
        });
    Ok(mask)
}

/// Number of marked cells of a 0/1 mask.
pub fn marked_cells(mask: &GridField) -> u64 {
    mask.values().iter().filter(|&&v| v != 0.0).count() as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OccupancyVerdict {
    PositiveMeasureConsistent,
    NullConsistent,
    Inconclusive,
}

impl OccupancyVerdict {
    pub fn from_slope(slope: f64) -> Self {
        if slope >= POSITIVE_SLOPE_MIN {
            OccupancyVerdict::PositiveMeasureConsistent
        } else if slope <= NULL_SLOPE_MAX {
            OccupancyVerdict::NullConsistent
        } else {
            OccupancyVerdict::Inconclusive
        }
    }
}

/// Occupied fraction of the clip box at each resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyReport {
    pub resolutions: Vec<usize>,
    pub marked: Vec<u64>,
    pub occupancy: Vec<f64>,
    /// `log2 occupancy` against `log2 per_axis`, i.e. against minus the log
    /// of the relative cell size.
    pub fit: SlopeFit,
    pub clip_box: Vec<(f64, f64)>,
    pub verdict: OccupancyVerdict,
}

impl OccupancyReport {
    /// CSV with columns `per_axis,marked,occupancy`.
    pub fn write_csv(&self, out: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["per_axis", "marked", "occupancy"])?;
        for ((r, m), o) in self.resolutions.iter().zip(&self.marked).zip(&self.occupancy) {
            w.serialize((r, m, o))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_schedule(resolutions: &[usize]) -> Result<()> {
    if resolutions.len() < 3 {
        return Err(Error::Underdetermined { needed: 3, got: resolutions.len() });
    }
    if resolutions.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("resolutions", "must be strictly increasing"));
    }
    Ok(())
}

/// Rasterize at each resolution and fit the occupancy trend. A slope of at
/// least [`POSITIVE_SLOPE_MIN`] is read as positive measure, at most
/// [`NULL_SLOPE_MAX`] as null, anything between as inconclusive.
pub fn occupancy_sweep(planes: &PlaneSet, clip: &[(f64, f64)], resolutions: &[usize]) -> Result<OccupancyReport> {
    check_schedule(resolutions)?;
    let mut marked = Vec::with_capacity(resolutions.len());
    let mut occupancy = Vec::with_capacity(resolutions.len());
    for &n in resolutions {
        let mask = rasterize_union(planes, clip, n)?;
        let m = marked_cells(&mask);
        marked.push(m);
        occupancy.push(m as f64 / mask.values().len() as f64);
    }
    if occupancy.iter().any(|&o| o <= 0.0) {
        return Err(Error::Degenerate("the union misses the clip box at some resolution".into()));
    }
    let xs: Vec<f64> = resolutions.iter().map(|&n| n as f64).collect();
    let fit = SlopeFit::fit_log2(&xs, &occupancy)?;
    Ok(OccupancyReport {
        resolutions: resolutions.to_vec(),
        marked,
        occupancy,
        verdict: OccupancyVerdict::from_slope(fit.slope),
        fit,
        clip_box: clip.to_vec(),
    })
}

/// Box-counting dimension of the union: slope of `log2 N` against
/// `log2 per_axis`, where `N` counts the marked cells.
pub fn union_dimension_estimate(planes: &PlaneSet, clip: &[(f64, f64)], resolutions: &[usize]) -> Result<SlopeFit> {
    check_schedule(resolutions)?;
    let mut xs = Vec::with_capacity(resolutions.len());
    let mut counts = Vec::with_capacity(resolutions.len());
    for &n in resolutions {
        let m = marked_cells(&rasterize_union(planes, clip, n)?);
        if m == 0 {
            return Err(Error::Degenerate(format!("no occupied cells at per_axis = {n}")));
        }
        xs.push(n as f64);
        counts.push(m as f64);
    }
    SlopeFit::fit_log2(&xs, &counts)
}

/// The family of planes whose last section coordinate is constant on a
/// Cantor set `K`: entries in the first `d-k-1` columns range over a
/// `fill_per_axis` grid on `[0,1]`, the last intercept lies in `K`, and the
/// last-column slopes vanish. The union is contained in `R^{d-1} x K`.
pub fn counterexample_set(
    d: usize,
    k: usize,
    cantor: &CantorSpec,
    fill_per_axis: usize,
    budget: AtomBudget,
) -> Result<PlaneSet> {
    if k < 1 || k >= d {
        return Err(Error::invalid("k", format!("need 1 <= k < d = {d}")));
    }
    let codim = d - k;
    let free = (k + 1) * (codim - 1);
    if free > 0 && fill_per_axis < 1 {
        return Err(Error::invalid("fill_per_axis", "need at least one cell"));
    }
    let requested = (fill_per_axis as u128)
        .checked_pow(free as u32)
        .and_then(|f| f.checked_mul((cantor.branches as u128).checked_pow(cantor.depth)?))
        .unwrap_or(u128::MAX);
    budget.check(requested)?;
    let k_measure = make_cantor_measure(cantor, budget)?;
    let fill = uniform_grid_measure(1, fill_per_axis.max(1), budget)?;
    let zero = DiscreteMeasure::point_mass(&[0.0])?;
    let mut acc: Option<DiscreteMeasure> = None;
    for i in 0..=k {
        for j in 0..codim {
            let factor = if j + 1 < codim {
                &fill
            } else if i == 0 {
                &k_measure
            } else {
                &zero
            };
            acc = Some(match acc {
                None => factor.clone(),
                Some(m) => product_measure(&m, factor, budget)?,
            });
        }
    }
    PlaneSet::new(d, k, acc.expect("at least one parameter"))
}

/// Pushforward of `A0 x A1` under `(a, b) -> a + x b`.
pub fn sumset_section(a0: &DiscreteMeasure, a1: &DiscreteMeasure, x: f64, budget: AtomBudget) -> Result<DiscreteMeasure> {
    let dim = a0.ambient_dim();
    if a1.ambient_dim() != dim {
        return Err(Error::shape("sumset summand dimension", dim, a1.ambient_dim()));
    }
    if !x.is_finite() {
        return Err(Error::invalid("x", "must be finite"));
    }
    let count = budget.check(a0.len() as u128 * a1.len() as u128)?;
    let mut points = Vec::with_capacity(count * dim);
    let mut weights = Vec::with_capacity(count);
    for (p, &wa) in a0.points().zip(a0.weights()) {
        for (q, &wb) in a1.points().zip(a1.weights()) {
            points.extend(p.iter().zip(q).map(|(a, b)| a + x * b));
            weights.push(wa * wb);
        }
    }
    DiscreteMeasure::from_flat(dim, points, weights, sumset_resolution(a0, a1, x))
}

fn sumset_resolution(a0: &DiscreteMeasure, a1: &DiscreteMeasure, x: f64) -> f64 {
    a0.resolution().max(x.abs() * a1.resolution())
}

/// The transform of `A0 + x A1` as the product `A0^(xi) A1^(x xi)`, which
/// avoids materializing the `|A0| |A1|` atoms of the sumset.
#[derive(Debug, Clone)]
pub struct SumsetSpectrum {
    a0: FourierKernel,
    a1: FourierKernel,
    x: f64,
    resolution: f64,
}

impl SumsetSpectrum {
    pub fn new(a0: &DiscreteMeasure, a1: &DiscreteMeasure, x: f64) -> Result<Self> {
        if a1.ambient_dim() != a0.ambient_dim() {
            return Err(Error::shape("sumset summand dimension", a0.ambient_dim(), a1.ambient_dim()));
        }
        if !x.is_finite() {
            return Err(Error::invalid("x", "must be finite"));
        }
        Ok(SumsetSpectrum {
            a0: FourierKernel::new(a0, None)?,
            a1: FourierKernel::new(a1, None)?,
            x,
            resolution: sumset_resolution(a0, a1, x),
        })
    }
}

impl FourierSource for SumsetSpectrum {
    fn dim(&self) -> usize {
        self.a0.dim()
    }

    fn resolution(&self) -> f64 {
        self.resolution
    }

    fn transform(&self, xi: &[f64]) -> Complex64 {
        let scaled: Vec<f64> = xi.iter().map(|v| self.x * v).collect();
        self.a0.transform(xi) * self.a1.transform(&scaled)
    }
}

/// Fraction of the cells of `clip` that contain at least one atom of `mu`.
pub fn atom_occupancy(mu: &DiscreteMeasure, clip: &[(f64, f64)], per_axis: usize) -> Result<f64> {
    if clip.len() != mu.ambient_dim() {
        return Err(Error::shape("clip box", mu.ambient_dim(), clip.len()));
    }
    let mut mask = GridField::zeros(vec![per_axis; clip.len()], clip.to_vec())?;
    let mut idx = vec![0usize; clip.len()];
    'atoms: for p in mu.points() {
        for (axis, &v) in p.iter().enumerate() {
            match mask.axis_cell(axis, v) {
                Some(i) => idx[axis] = i,
                None => continue 'atoms,
            }
        }
        let flat = mask.flat_index(&idx);
        mask.values_mut()[flat] = 1.0;
    }
    Ok(marked_cells(&mask) as f64 / mask.values().len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::product_measure;

    fn planes(d: usize, k: usize, mu: DiscreteMeasure) -> PlaneSet {
        PlaneSet::new(d, k, mu).unwrap()
    }

    #[test]
    fn single_horizontal_line_marks_bottom_row() {
        let s = planes(2, 1, DiscreteMeasure::point_mass(&[0.0, 0.0]).unwrap());
        let n = 16;
        let mask = rasterize_union(&s, &[(0.0, 1.0), (0.0, 1.0)], n).unwrap();
        assert_eq!(marked_cells(&mask), n as u64);
        for col in 0..n {
            assert_eq!(mask.values()[mask.flat_index(&[col, 0])], 1.0);
        }
    }

    #[test]
    fn single_line_is_null_with_dimension_one() {
        let s = planes(2, 1, DiscreteMeasure::point_mass(&[0.0, 0.0]).unwrap());
        let clip = [(0.0, 1.0), (0.0, 1.0)];
        let rep = occupancy_sweep(&s, &clip, &[8, 16, 32, 64]).unwrap();
        assert!((rep.fit.slope + 1.0).abs() < 1e-12);
        assert_eq!(rep.verdict, OccupancyVerdict::NullConsistent);
        let dim = union_dimension_estimate(&s, &clip, &[8, 16, 32, 64]).unwrap();
        assert!((dim.slope - 1.0).abs() < 1e-12);
    }

    #[test]
    fn adding_atoms_never_unmarks() {
        let a = uniform_grid_measure(2, 4, AtomBudget::DEFAULT).unwrap();
        let b = uniform_grid_measure(2, 7, AtomBudget::DEFAULT).unwrap();
        let mut pts: Vec<f64> = a.points_flat().to_vec();
        pts.extend_from_slice(b.points_flat());
        let mut w = a.weights().to_vec();
        w.extend_from_slice(b.weights());
        let both = DiscreteMeasure::from_flat(2, pts, w, 0.0).unwrap();
        let clip = default_clip_box(2, 1);
        let small = rasterize_union(&planes(2, 1, a), &clip, 32).unwrap();
        let big = rasterize_union(&planes(2, 1, both), &clip, 32).unwrap();
        assert!(small.values().iter().zip(big.values()).all(|(s, b)| *s <= *b));
    }

    #[test]
    fn clip_must_contain_unit_cube() {
        let s = planes(2, 1, DiscreteMeasure::point_mass(&[0.0, 0.0]).unwrap());
        assert!(rasterize_union(&s, &[(0.1, 1.0), (0.0, 1.0)], 8).is_err());
        assert!(rasterize_union(&s, &[(0.0, 1.0), (0.0, 1.0)], 1).is_err());
    }

    #[test]
    fn counterexample_rows_are_exact() {
        for m in 1..=4u32 {
            let s = counterexample_set(2, 1, &CantorSpec::middle_thirds(m + 1), 1, AtomBudget::DEFAULT).unwrap();
            let n = 3usize.pow(m);
            let mask = rasterize_union(&s, &[(0.0, 1.0), (0.0, 1.0)], n).unwrap();
            assert_eq!(marked_cells(&mask), 2u64.pow(m) * n as u64);
        }
    }

    #[test]
    fn counterexample_layout_in_higher_dimension() {
        let s = counterexample_set(3, 1, &CantorSpec::middle_thirds(2), 3, AtomBudget::DEFAULT).unwrap();
        // Free block: rows 0..=1, column 0; K in (row 0, column 1); slope (1, 1) is zero.
        assert_eq!(s.measure().len(), 9 * 4);
        for p in s.measure().points() {
            assert_eq!(p[3], 0.0);
            assert!([0.0, 2.0 / 9.0, 2.0 / 3.0, 8.0 / 9.0].iter().any(|c| (p[1] - c).abs() < 1e-15));
        }
        assert!(counterexample_set(2, 2, &CantorSpec::middle_thirds(2), 3, AtomBudget::DEFAULT).is_err());
        assert!(counterexample_set(2, 1, &CantorSpec::middle_thirds(30), 1, AtomBudget(1 << 20))
            .unwrap_err()
            .is_budget());
    }

    #[test]
    fn sumset_mass_and_zero_shift() {
        let a = make_cantor_measure(&CantorSpec::middle_thirds(3), AtomBudget::DEFAULT).unwrap();
        let b = uniform_grid_measure(1, 5, AtomBudget::DEFAULT).unwrap().scaled(2.0).unwrap();
        let s = sumset_section(&a, &b, 0.0, AtomBudget::DEFAULT).unwrap();
        assert_eq!(s.len(), a.len() * b.len());
        assert_eq!(s.mass(), crate::numeric::pairwise_sum(s.weights()));
        assert!((s.mass() - a.mass() * b.mass()).abs() < 1e-14);
        for (i, p) in s.points().enumerate() {
            assert_eq!(p, a.point(i / b.len()));
        }
    }

    #[test]
    fn sumset_spectrum_factorizes() {
        let a = make_cantor_measure(&CantorSpec::middle_thirds(4), AtomBudget::DEFAULT).unwrap();
        let b = make_cantor_measure(&CantorSpec::new(3, 0.2, 3), AtomBudget::DEFAULT).unwrap();
        let x = 1.37;
        let direct = FourierKernel::new(&sumset_section(&a, &b, x, AtomBudget::DEFAULT).unwrap(), None).unwrap();
        let lazy = SumsetSpectrum::new(&a, &b, x).unwrap();
        for t in [0.3, 5.0, 41.7] {
            assert!((direct.transform(&[t]) - lazy.transform(&[t])).norm() < 1e-12);
        }
        assert_eq!(lazy.resolution(), (3f64.powi(-4)).max(x * 0.2f64.powi(3)));
    }

    #[test]
    fn middle_thirds_self_sum_fills_interval() {
        let c = make_cantor_measure(&CantorSpec::middle_thirds(6), AtomBudget::DEFAULT).unwrap();
        let s = sumset_section(&c, &c, 1.0, AtomBudget::DEFAULT).unwrap();
        // C + C = [0, 2]: every cell of width 2/27 receives atoms.
        assert_eq!(atom_occupancy(&s, &[(0.0, 2.0)], 27).unwrap(), 1.0);
        assert!(atom_occupancy(&c, &[(0.0, 1.0)], 27).unwrap() < 0.3);
    }

    #[test]
    fn product_row_fraction_for_taller_clip() {
        let k = make_cantor_measure(&CantorSpec::middle_thirds(3), AtomBudget::DEFAULT).unwrap();
        let zero = DiscreteMeasure::point_mass(&[0.0]).unwrap();
        let s = planes(2, 1, product_measure(&k, &zero, AtomBudget::DEFAULT).unwrap());
        // Clip [0,1] x [0,3] at 81 cells: rows of height 1/27 over [0,1] only.
        let mask = rasterize_union(&s, &[(0.0, 1.0), (0.0, 3.0)], 81).unwrap();
        assert_eq!(marked_cells(&mask), 8 * 81);
    }
}
