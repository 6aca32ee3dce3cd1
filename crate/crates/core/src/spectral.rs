//! Fourier transforms of discrete measures, Monte Carlo energies over dyadic
//! frequency shells, Sobolev-dimension slopes and the shell-decay verifier.
//!
//! Every Monte Carlo estimate is split into fixed chunks of samples; chunk
//! `c` of shell `j` draws from its own ChaCha stream and chunk results are
//! concatenated in order before a fixed-tree reduction. Estimates are
//! therefore bit-identical for a given seed whatever the worker count.

use std::f64::consts::TAU;
use std::io::Write;
use std::ops::RangeInclusive;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::SlopeFit;
use crate::measures::{DiscreteMeasure, FrostmanReport};
use crate::numeric::{mean_and_stderr, norm, pairwise_sum, stream_rng, unit_ball_volume};
use crate::projections::t_map_into;

/// Shells are trusted only while `2^(j+1) <= WINDOW_FACTOR / resolution`.
pub const WINDOW_FACTOR: f64 = 0.1;
/// Default tolerance on the fitted decay exponent.
pub const DEFAULT_SLOPE_TOLERANCE: f64 = 0.25;
/// Default ceiling on the max log2 residual of a slope fit.
pub const DEFAULT_MAX_RESIDUAL: f64 = 0.5;

const CHUNK: usize = 256;
const SUM_LEAF: usize = 32;

/// Something with an evaluable Fourier transform
/// `F(xi) = sum_j c_j exp(-2 pi i <xi, p_j>)` (or a closed form of one).
pub trait FourierSource: Sync {
    fn dim(&self) -> usize;
    /// Atomic resolution of the underlying measure; 0 if exact.
    fn resolution(&self) -> f64;
    fn transform(&self, xi: &[f64]) -> Complex64;
}

/// `exp(-2 pi i t)` with the argument reduced to `[-1/2, 1/2]` first.
#[inline]
fn phase(t: f64) -> Complex64 {
    let r = t - t.round();
    let (s, c) = (TAU * r).sin_cos();
    Complex64::new(c, -s)
}

/// Distinct coordinate values along one axis and, per atom, the index of its
/// value. Product-structured measures have few distinct values per axis, so
/// phases are computed once per value instead of once per atom.
#[derive(Debug, Clone)]
struct AxisTable {
    values: Vec<f64>,
    index: Vec<u32>,
}

impl AxisTable {
    fn new(coords: Vec<f64>) -> Self {
        let mut values = coords.clone();
        values.sort_by(f64::total_cmp);
        values.dedup_by(|a, b| a == b);
        let index = coords
            .into_iter()
            .map(|v| values.partition_point(|&u| u < v) as u32)
            .collect();
        AxisTable { values, index }
    }
}

/// Precomputed direct-summation kernel for `(g dmu)^`.
#[derive(Debug, Clone)]
pub struct FourierKernel {
    dim: usize,
    resolution: f64,
    axes: Vec<AxisTable>,
    coeffs: Vec<Complex64>,
}

impl FourierKernel {
    /// Kernel for the complex measure `g dmu`; `g = None` means `g = 1`.
    pub fn new(mu: &DiscreteMeasure, g: Option<&[Complex64]>) -> Result<Self> {
        let coeffs: Vec<Complex64> = match g {
            None => mu.weights().iter().map(|&w| Complex64::new(w, 0.0)).collect(),
            Some(g) => {
                if g.len() != mu.len() {
                    return Err(Error::shape("per-atom weights g", mu.len(), g.len()));
                }
                g.iter().zip(mu.weights()).map(|(g, &w)| g * w).collect()
            }
        };
        let dim = mu.ambient_dim();
        let axes = (0..dim)
            .map(|a| AxisTable::new(mu.points().map(|p| p[a]).collect()))
            .collect();
        Ok(FourierKernel {
            dim,
            resolution: mu.resolution(),
            axes,
            coeffs,
        })
    }

    fn sum_range(&self, tables: &[Vec<Complex64>], lo: usize, hi: usize) -> Complex64 {
        if hi - lo <= SUM_LEAF {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in lo..hi {
                let mut term = self.coeffs[j];
                for (axis, table) in self.axes.iter().zip(tables) {
                    term *= table[axis.index[j] as usize];
                }
                acc += term;
            }
            return acc;
        }
        let mid = lo + (hi - lo) / 2;
        self.sum_range(tables, lo, mid) + self.sum_range(tables, mid, hi)
    }
}

impl FourierSource for FourierKernel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn resolution(&self) -> f64 {
        self.resolution
    }

    fn transform(&self, xi: &[f64]) -> Complex64 {
        assert_eq!(xi.len(), self.dim, "frequency dimension mismatch");
        let tables: Vec<Vec<Complex64>> = self
            .axes
            .iter()
            .zip(xi)
            .map(|(axis, &f)| axis.values.iter().map(|&v| phase(f * v)).collect())
            .collect();
        self.sum_range(&tables, 0, self.coeffs.len())
    }
}

/// `sum_j g_j w_j exp(-2 pi i <xi, p_j>)`.
pub fn fourier_transform(mu: &DiscreteMeasure, xi: &[f64], g: Option<&[Complex64]>) -> Result<Complex64> {
    if xi.len() != mu.ambient_dim() {
        return Err(Error::shape("frequency", mu.ambient_dim(), xi.len()));
    }
    Ok(FourierKernel::new(mu, g)?.transform(xi))
}

/// Transform at many frequencies; evaluated in parallel, each value
/// independently, so results do not depend on the worker count.
pub fn fourier_transform_batch(source: &dyn FourierSource, xis: &[Vec<f64>]) -> Result<Vec<Complex64>> {
    if let Some(xi) = xis.iter().find(|xi| xi.len() != source.dim()) {
        return Err(Error::shape("frequency", source.dim(), xi.len()));
    }
    Ok(xis.par_iter().map(|xi| source.transform(xi)).collect())
}

/// Uniform sample from `{r_in <= |xi| <= 2 r_in}` in `R^dim` by rejection
/// from the bounding cube of the outer ball.
fn sample_annulus(rng: &mut impl Rng, dim: usize, r_in: f64, out: &mut [f64]) {
    let r_out = 2.0 * r_in;
    loop {
        for v in out.iter_mut() {
            *v = r_out * (2.0 * rng.random::<f64>() - 1.0);
        }
        let r = norm(out);
        if r >= r_in && r <= r_out {
            return;
        }
        debug_assert!(dim > 0);
    }
}

/// Volume of `{r <= |xi| <= 2r}` in `R^dim`.
pub fn annulus_volume(dim: usize, r: f64) -> f64 {
    unit_ball_volume(dim) * ((2.0 * r).powi(dim as i32) - r.powi(dim as i32))
}

/// Run `n_samples` draws of `integrand` chunk by chunk and return mean and
/// standard error of the mean.
fn monte_carlo<F>(n_samples: usize, seed: u64, stream_base: u64, integrand: F) -> (f64, f64)
where
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> f64 + Sync,
{
    let chunks = n_samples.div_ceil(CHUNK);
    let values: Vec<f64> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = stream_rng(seed, stream_base + c as u64);
            let len = CHUNK.min(n_samples - c * CHUNK);
            (0..len).map(|_| integrand(&mut rng)).collect::<Vec<_>>()
        })
        .collect();
    mean_and_stderr(&values)
}

fn shell_stream(j: i32) -> u64 {
    ((j as i64 + (1 << 20)) as u64) << 32
}

/// Fails with `OutsideWindow` unless shell `j` satisfies
/// `2^(j+1) <= WINDOW_FACTOR / resolution`.
pub fn check_frequency_window(resolution: f64, j: i32) -> Result<()> {
    let top = 2f64.powi(j + 1);
    if resolution > 0.0 && top > WINDOW_FACTOR / resolution {
        return Err(Error::OutsideWindow(format!(
            "shell j = {j} reaches |xi| = {top}, beyond {WINDOW_FACTOR}/resolution = {}",
            WINDOW_FACTOR / resolution
        )));
    }
    Ok(())
}

/// One dyadic shell `2^j <= |xi| <= 2^(j+1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellEnergy {
    pub j: i32,
    pub energy: f64,
    pub mc_stderr: f64,
}

/// Shell energies `E_j(sigma) = int_shell |F(xi)|^2 (1 + |xi|)^sigma dxi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellEnergyProfile {
    pub shells: Vec<ShellEnergy>,
    pub sigma: f64,
    pub l: usize,
    pub samples_per_shell: usize,
    pub seed: u64,
}

impl ShellEnergyProfile {
    /// CSV with columns `j,R,energy,stderr`.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["j", "R", "energy", "stderr"])?;
        for s in &self.shells {
            w.serialize((s.j, 2f64.powi(s.j), s.energy, s.mc_stderr))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Monte Carlo estimate of `int_{2^j <= |xi| <= 2^(j+1)} |F(xi)|^2 (1+|xi|)^sigma dxi`
/// with `sigma = 0` giving the plain shell energy. Returns `(energy, stderr)`.
pub fn shell_energy(
    source: &dyn FourierSource,
    j: i32,
    sigma: f64,
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if n_samples < 2 {
        return Err(Error::invalid("n_samples", "need at least 2 samples"));
    }
    check_frequency_window(source.resolution(), j)?;
    let dim = source.dim();
    let r = 2f64.powi(j);
    let (mean, se) = monte_carlo(n_samples, seed, shell_stream(j), |rng| {
        let mut xi = vec![0.0; dim];
        sample_annulus(rng, dim, r, &mut xi);
        let weight = if sigma == 0.0 {
            1.0
        } else {
            (1.0 + norm(&xi)).powf(sigma)
        };
        source.transform(&xi).norm_sqr() * weight
    });
    let vol = annulus_volume(dim, r);
    Ok((mean * vol, se * vol))
}

pub fn shell_energy_profile(
    source: &dyn FourierSource,
    j_range: RangeInclusive<i32>,
    sigma: f64,
    n_samples: usize,
    seed: u64,
) -> Result<ShellEnergyProfile> {
    let shells = j_range
        .map(|j| {
            shell_energy(source, j, sigma, n_samples, seed).map(|(energy, mc_stderr)| ShellEnergy {
                j,
                energy,
                mc_stderr,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ShellEnergyProfile {
        shells,
        sigma,
        l: source.dim(),
        samples_per_shell: n_samples,
        seed,
    })
}

/// Fitted Sobolev dimension from the decay of plain shell energies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolevEstimate {
    /// `l - s`, with `s` the slope of `log2 E_j` against `j`.
    pub sigma_max: f64,
    pub profile: ShellEnergyProfile,
    pub fit: SlopeFit,
    /// Set when the fit residual reaches [`DEFAULT_MAX_RESIDUAL`].
    pub low_confidence: bool,
}

/// `E_j ~ 2^(s j)` makes `sum_j 2^(j (sigma - l)) E_j` converge exactly when
/// `sigma < l - s`; that threshold is reported as `sigma_max`.
pub fn sobolev_dimension_estimate(
    source: &dyn FourierSource,
    j_range: RangeInclusive<i32>,
    n_samples: usize,
    seed: u64,
) -> Result<SobolevEstimate> {
    let shells = j_range.clone().count();
    if shells < 4 {
        return Err(Error::Underdetermined { needed: 4, got: shells });
    }
    let profile = shell_energy_profile(source, j_range, 0.0, n_samples, seed)?;
    let points = profile
        .shells
        .iter()
        .map(|s| {
            if s.energy > 0.0 {
                Ok((s.j as f64, s.energy.log2()))
            } else {
                Err(Error::Degenerate(format!("shell {} has zero energy", s.j)))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let fit = SlopeFit::fit(points)?;
    Ok(SobolevEstimate {
        sigma_max: profile.l as f64 - fit.slope,
        low_confidence: fit.residual >= DEFAULT_MAX_RESIDUAL,
        profile,
        fit,
    })
}

/// Sampler for `x ~ lambda / mass(lambda)` by inverse CDF.
struct AtomSampler {
    cumulative: Vec<f64>,
}

impl AtomSampler {
    fn new(weights: &[f64]) -> Self {
        let total = pairwise_sum(weights);
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        AtomSampler { cumulative }
    }

    fn draw(&self, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.random();
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1)
    }
}

/// Shell integral `int int_{R <= |xi| <= 2R} |(g dmu)^(xi, T_x xi)|^2 dxi dlambda(x)`.
///
/// `mu` lives on `R^n`, `lambda` on `R^{l(n-l)}` with atoms read as
/// flattened projection parameters. Returns `(value, stderr)`.
pub fn lemma_shell_integral(
    g: Option<&[Complex64]>,
    mu: &DiscreteMeasure,
    lambda: &DiscreteMeasure,
    l: usize,
    j: i32,
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let kernel = FourierKernel::new(mu, g)?;
    lemma_shell_integral_with(&kernel, lambda, l, j, n_samples, seed)
}

fn check_lemma_shapes(n: usize, lambda: &DiscreteMeasure, l: usize) -> Result<()> {
    if l < 1 || l >= n {
        return Err(Error::invalid("l", format!("must satisfy 1 <= l < n = {n}")));
    }
    if lambda.ambient_dim() != l * (n - l) {
        return Err(Error::shape("lambda dimension", l * (n - l), lambda.ambient_dim()));
    }
    Ok(())
}

/// As [`lemma_shell_integral`] with a prebuilt transform source for `g dmu`.
pub fn lemma_shell_integral_with(
    source: &dyn FourierSource,
    lambda: &DiscreteMeasure,
    l: usize,
    j: i32,
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let n = source.dim();
    check_lemma_shapes(n, lambda, l)?;
    if n_samples < 2 {
        return Err(Error::invalid("n_samples", "need at least 2 samples"));
    }
    check_frequency_window(source.resolution(), j)?;
    let r = 2f64.powi(j);
    let codim = n - l;
    let sampler = AtomSampler::new(lambda.weights());
    let (mean, se) = monte_carlo(n_samples, seed, shell_stream(j), |rng| {
        let mut eta = vec![0.0; n];
        let (xi, tail) = eta.split_at_mut(l);
        sample_annulus(rng, l, r, xi);
        let atom = sampler.draw(rng);
        t_map_into(codim, lambda.point(atom), xi, tail);
        source.transform(&eta).norm_sqr()
    });
    let scale = annulus_volume(l, r) * lambda.mass();
    Ok((mean * scale, se * scale))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaShell {
    pub j: i32,
    pub radius: f64,
    pub value: f64,
    pub mc_stderr: f64,
}

/// Measured decay of the shell integral against the predicted `R^(n - alpha - beta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaDecayReport {
    pub n: usize,
    pub l: usize,
    pub alpha: f64,
    pub beta: f64,
    pub shells: Vec<LemmaShell>,
    pub fit: SlopeFit,
    pub predicted_exponent: f64,
    pub tolerance: f64,
    pub max_residual: f64,
    pub pass: bool,
}

impl LemmaDecayReport {
    /// CSV with columns `j,R,energy,stderr`.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["j", "R", "energy", "stderr"])?;
        for s in &self.shells {
            w.serialize((s.j, s.radius, s.value, s.mc_stderr))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Thresholds for [`lemma_decay_report`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayCriteria {
    pub tolerance: f64,
    pub max_residual: f64,
}

impl Default for DecayCriteria {
    fn default() -> Self {
        DecayCriteria {
            tolerance: DEFAULT_SLOPE_TOLERANCE,
            max_residual: DEFAULT_MAX_RESIDUAL,
        }
    }
}

/// Run the shell integral over `j_range`, fit `log2 value` against `j`, and
/// pass iff the slope is at most `n - alpha - beta + tolerance` with an
/// acceptable residual. `alpha` and `beta` come from the supplied reports.
#[allow(clippy::too_many_arguments)]
pub fn lemma_decay_report(
    source: &dyn FourierSource,
    lambda: &DiscreteMeasure,
    l: usize,
    j_range: RangeInclusive<i32>,
    n_samples: usize,
    seed: u64,
    alpha_report: &FrostmanReport,
    beta_report: &FrostmanReport,
    criteria: DecayCriteria,
) -> Result<LemmaDecayReport> {
    let count = j_range.clone().count();
    if count < 3 {
        return Err(Error::Underdetermined { needed: 3, got: count });
    }
    let n = source.dim();
    check_lemma_shapes(n, lambda, l)?;
    let shells = j_range
        .map(|j| {
            lemma_shell_integral_with(source, lambda, l, j, n_samples, seed).map(|(value, mc_stderr)| LemmaShell {
                j,
                radius: 2f64.powi(j),
                value,
                mc_stderr,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let points = shells
        .iter()
        .map(|s| {
            if s.value > 0.0 {
                Ok((s.j as f64, s.value.log2()))
            } else {
                Err(Error::Degenerate(format!("shell {} integral is zero", s.j)))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let fit = SlopeFit::fit(points)?;
    let (alpha, beta) = (alpha_report.exponent, beta_report.exponent);
    let predicted_exponent = n as f64 - alpha - beta;
    let pass = fit.slope <= predicted_exponent + criteria.tolerance && fit.residual < criteria.max_residual;
    Ok(LemmaDecayReport {
        n,
        l,
        alpha,
        beta,
        shells,
        fit,
        predicted_exponent,
        tolerance: criteria.tolerance,
        max_residual: criteria.max_residual,
        pass,
    })
}
