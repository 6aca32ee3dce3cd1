//! Scalar fields sampled at the cell centers of a regular grid over a box.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative distance from a cell edge within which a coordinate is assigned
/// to the cell above the edge.
const EDGE_SNAP: f64 = 1e-9;

/// Anything that can be evaluated pointwise on `R^dim`.
pub trait ScalarField: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, p: &[f64]) -> f64;
}

/// Values at the cell centers of a `shape[0] x ... x shape[d-1]` grid over
/// an axis-aligned box. Storage is row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    d: usize,
    shape: Vec<usize>,
    #[serde(rename = "box")]
    bounds: Vec<(f64, f64)>,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(shape: Vec<usize>, bounds: Vec<(f64, f64)>, values: Vec<f64>) -> Result<Self> {
        let d = shape.len();
        if d == 0 {
            return Err(Error::invalid("shape", "grid needs at least one axis"));
        }
        if bounds.len() != d {
            return Err(Error::shape("grid box", d, bounds.len()));
        }
        if shape.contains(&0) {
            return Err(Error::invalid("shape", "every axis needs at least one cell"));
        }
        if bounds.iter().any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && hi > lo)) {
            return Err(Error::invalid("box", "every axis needs finite bounds with lo < hi"));
        }
        let len: usize = shape.iter().product();
        if values.len() != len {
            return Err(Error::shape("grid values", len, values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("values", "must be finite"));
        }
        Ok(GridField {
            d,
            shape,
            bounds,
            values,
        })
    }

    pub fn zeros(shape: Vec<usize>, bounds: Vec<(f64, f64)>) -> Result<Self> {
        let len = shape.iter().product();
        Self::new(shape, bounds, vec![0.0; len])
    }

    /// Sample `source` at every cell center.
    pub fn sample(source: &dyn ScalarField, shape: Vec<usize>, bounds: Vec<(f64, f64)>) -> Result<Self> {
        let mut field = Self::zeros(shape, bounds)?;
        if source.dim() != field.d {
            return Err(Error::shape("sampled field dimension", field.d, source.dim()));
        }
        let mut p = vec![0.0; field.d];
        for flat in 0..field.values.len() {
            field.center_into(flat, &mut p);
            field.values[flat] = source.eval(&p);
        }
        if field.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("values", "source produced a non-finite value"));
        }
        Ok(field)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn cell_size(&self, axis: usize) -> f64 {
        let (lo, hi) = self.bounds[axis];
        (hi - lo) / self.shape[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.d).map(|a| self.cell_size(a)).product()
    }

    pub fn cell_center(&self, axis: usize, i: usize) -> f64 {
        self.bounds[axis].0 + (i as f64 + 0.5) * self.cell_size(axis)
    }

    /// Flat index of a multi-index.
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.shape).fold(0, |acc, (&i, &s)| acc * s + i)
    }

    fn center_into(&self, mut flat: usize, out: &mut [f64]) {
        for a in (0..self.d).rev() {
            let i = flat % self.shape[a];
            flat /= self.shape[a];
            out[a] = self.cell_center(a, i);
        }
    }

    /// Cell index along one axis, or `None` outside the closed box. Points
    /// within a relative `1e-9` of a cell edge belong to the upper cell; the
    /// upper box face belongs to the last cell.
    pub fn axis_cell(&self, axis: usize, v: f64) -> Option<usize> {
        let (lo, hi) = self.bounds[axis];
        let n = self.shape[axis];
        let t = (v - lo) / (hi - lo) * n as f64;
        let r = t.round();
        let snapped = (t - r).abs() <= EDGE_SNAP * r.abs().max(1.0);
        let i = if snapped { r } else { t.floor() };
        if i < 0.0 || i > n as f64 || (i == n as f64 && !snapped) {
            return None;
        }
        Some((i as usize).min(n - 1))
    }

    /// Whether `p` lies in the closed box.
    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter().zip(&self.bounds).all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    /// Multilinear interpolation between cell centers; constant extension in
    /// the half-cell margin along each face. `None` outside the box.
    pub fn interpolate(&self, p: &[f64]) -> Option<f64> {
        debug_assert_eq!(p.len(), self.d);
        if !self.contains(p) {
            return None;
        }
        let mut base = [0usize; 8];
        let mut frac = [0.0f64; 8];
        let mut stride = [0usize; 8];
        let mut base_vec;
        let mut frac_vec;
        let mut stride_vec;
        let (base, frac, stride): (&mut [usize], &mut [f64], &mut [usize]) = if self.d <= 8 {
            (&mut base[..self.d], &mut frac[..self.d], &mut stride[..self.d])
        } else {
            base_vec = vec![0; self.d];
            frac_vec = vec![0.0; self.d];
            stride_vec = vec![0; self.d];
            (&mut base_vec, &mut frac_vec, &mut stride_vec)
        };
        let mut s = 1;
        for a in (0..self.d).rev() {
            stride[a] = s;
            s *= self.shape[a];
        }
        for a in 0..self.d {
            let n = self.shape[a];
            let (lo, _) = self.bounds[a];
            let t = ((p[a] - lo) / self.cell_size(a) - 0.5).clamp(0.0, (n - 1) as f64);
            let i = (t.floor() as usize).min(n.saturating_sub(2));
            base[a] = i;
            frac[a] = if n == 1 { 0.0 } else { t - i as f64 };
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << self.d) {
            let mut w = 1.0;
            let mut idx = 0;
            for a in 0..self.d {
                let up = (corner >> a) & 1 == 1;
                if up && self.shape[a] == 1 {
                    w = 0.0;
                    break;
                }
                w *= if up { frac[a] } else { 1.0 - frac[a] };
                idx += (base[a] + usize::from(up)) * stride[a];
            }
            if w != 0.0 {
                acc += w * self.values[idx];
            }
        }
        Some(acc)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: GridField = serde_json::from_str(text)?;
        Self::new(raw.shape, raw.bounds, raw.values)
    }

    /// Binary portable graymap of a 2-D field: axis 0 runs left to right,
    /// axis 1 bottom to top; the largest value maps to white.
    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        if self.d != 2 {
            return Err(Error::invalid("d", "PGM export needs a 2-D field"));
        }
        let (w, h) = (self.shape[0], self.shape[1]);
        let max = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut out = Vec::with_capacity(w * h + 32);
        write!(out, "P5\n{w} {h}\n255\n")?;
        for row in (0..h).rev() {
            for col in 0..w {
                let v = self.values[col * h + row].abs();
                out.push(if max > 0.0 { (255.0 * v / max).round() as u8 } else { 0 });
            }
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

impl ScalarField for GridField {
    fn dim(&self) -> usize {
        self.d
    }

    fn eval(&self, p: &[f64]) -> f64 {
        self.interpolate(p).unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Affine;
    impl ScalarField for Affine {
        fn dim(&self) -> usize {
            2
        }
        fn eval(&self, p: &[f64]) -> f64 {
            1.0 + 2.0 * p[0] - 3.0 * p[1]
        }
    }

    #[test]
    fn interpolation_reproduces_affine_functions_inside_centers() {
        let f = GridField::sample(&Affine, vec![7, 5], vec![(0.0, 1.0), (-1.0, 1.0)]).unwrap();
        for &(x, y) in &[(0.2, 0.0), (0.5, -0.5), (0.9, 0.7)] {
            let v = f.interpolate(&[x, y]).unwrap();
            assert!((v - Affine.eval(&[x, y])).abs() < 1e-12);
        }
        assert!(f.interpolate(&[1.5, 0.0]).is_none());
    }

    #[test]
    fn axis_cell_snaps_edges() {
        let f = GridField::zeros(vec![3], vec![(0.0, 1.0)]).unwrap();
        assert_eq!(f.axis_cell(0, 2.0 / 3.0), Some(2));
        assert_eq!(f.axis_cell(0, 1.0 / 3.0 - 1e-3), Some(0));
        assert_eq!(f.axis_cell(0, 1.0), Some(2));
        assert_eq!(f.axis_cell(0, 0.0), Some(0));
        assert_eq!(f.axis_cell(0, -0.1), None);
        assert_eq!(f.axis_cell(0, 1.1), None);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let f = GridField::sample(&Affine, vec![2, 3], vec![(0.0, 1.0), (0.0, 2.0)]).unwrap();
        let text = f.to_json().unwrap();
        assert!(text.contains("\"box\""));
        assert_eq!(GridField::from_json(&text).unwrap(), f);
        assert!(GridField::new(vec![2], vec![(0.0, 1.0)], vec![1.0]).is_err());
        assert!(GridField::new(vec![1], vec![(1.0, 1.0)], vec![1.0]).is_err());
    }

    #[test]
    fn pgm_header() {
        let mut f = GridField::zeros(vec![4, 2], vec![(0.0, 1.0), (0.0, 1.0)]).unwrap();
        f.values_mut()[0] = 1.0;
        let dir = std::env::temp_dir().join(format!("fraclab-pgm-{}", std::process::id()));
        f.write_pgm(&dir).unwrap();
        let bytes = std::fs::read(&dir).unwrap();
        assert!(bytes.starts_with(b"P5\n4 2\n255\n"));
        assert_eq!(bytes.len(), 11 + 8);
        // cell (0, 0) is bottom-left: last row, first column
        assert_eq!(bytes[11 + 4], 255);
        std::fs::remove_file(dir).ok();
    }
}
