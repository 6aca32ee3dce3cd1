use std::io::Write;

use clap::Args;
use fraclab_core::measures::estimate_frostman_exponent;
use fraclab_core::numeric::stream_rng;
use fraclab_core::projections::{slice_frostman_exponent, sphere_directions};
use fraclab_core::spectral::{
    check_frequency_window, lemma_decay_report, shell_energy_profile, sobolev_dimension_estimate, DecayCriteria,
    FourierKernel, FourierSource, LemmaDecayReport, ShellEnergyProfile, SobolevEstimate, DEFAULT_MAX_RESIDUAL,
    DEFAULT_SLOPE_TOLERANCE,
};
use fraclab_core::unions::SumsetSpectrum;
use fraclab_core::{DiscreteMeasure, FrostmanReport, ProbePolicy};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::measures::csv_failure;
use super::{budget, check_at_least, check_positive, check_radii, default_budget, dyadic_radii, triadic_radii};
use crate::run::{csv_writer, invalid, Experiment, Failure, Report};
use crate::sources::{parse_real, JRange, MeasureSpec};

fn check_window(resolution: f64, j: JRange) -> Result<(), Failure> {
    check_frequency_window(resolution, j.hi).map_err(Failure::from)
}

fn shell_presets(name: &str) -> Option<(&'static str, JRange)> {
    match name {
        "point-mass" => Some(("point:0", JRange { lo: 0, hi: 5 })),
        "lebesgue1d" => Some(("grid:1,4096", JRange { lo: 2, hi: 7 })),
        "cantor12" => Some(("cantor:2,1/3,12", JRange { lo: 2, hi: 12 })),
        _ => None,
    }
}

const SHELL_PRESETS: &[&str] = &["point-mass", "lebesgue1d", "cantor12"];

#[derive(Debug, Clone, Args, Serialize)]
pub struct ShellsArgs {
    #[arg(long)]
    #[serde(skip)]
    pub preset: Option<String>,
    #[arg(long)]
    pub measure: Option<MeasureSpec>,
    /// Shell indices `lo..hi`, inclusive.
    #[arg(long)]
    pub j: Option<JRange>,
    /// Weight exponent; 0 gives the plain shell energy.
    #[arg(long, value_parser = parse_real, allow_hyphen_values = true)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub budget: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Shells {
    pub measure: MeasureSpec,
    pub j: JRange,
    pub sigma: f64,
    pub samples: usize,
    pub seed: u64,
    pub budget: usize,
}

impl Default for Shells {
    fn default() -> Self {
        let (m, j) = shell_presets("lebesgue1d").expect("preset");
        Shells {
            measure: m.parse().expect("preset measure"),
            j,
            sigma: 0.0,
            samples: 4000,
            seed: 1,
            budget: default_budget(),
        }
    }
}

#[derive(Serialize)]
#[serde(transparent)]
pub struct ProfileOutput(ShellEnergyProfile);

impl Report for ProfileOutput {
    fn write_csv(&self, out: &mut dyn Write) -> Result<(), Failure> {
        self.0.write_csv(out).map_err(Failure::from)
    }
}

impl Experiment for Shells {
    const NAME: &'static str = "shells";
    const PRESETS: &'static [&'static str] = SHELL_PRESETS;
    type Output = ProfileOutput;

    fn preset(name: &str) -> Option<Self> {
        let (m, j) = shell_presets(name)?;
        Some(Shells {
            measure: m.parse().ok()?,
            j,
            ..Default::default()
        })
    }

    fn validate(&self) -> Result<(), Failure> {
        check_at_least("samples", self.samples, 2)
    }

    fn run(&self) -> Result<ProfileOutput, Failure> {
        let mu = self.measure.build(budget(self.budget))?;
        check_window(mu.resolution(), self.j)?;
        let kernel = FourierKernel::new(&mu, None)?;
        Ok(ProfileOutput(shell_energy_profile(&kernel, self.j.range(), self.sigma, self.samples, self.seed)?))
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SobolevArgs {
    #[arg(long)]
    #[serde(skip)]
    pub preset: Option<String>,
    #[arg(long)]
    pub measure: Option<MeasureSpec>,
    #[arg(long)]
    pub j: Option<JRange>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Smallest acceptable estimate; sets a pass/fail verdict.
    #[arg(long, value_parser = parse_real, allow_hyphen_values = true)]
    pub min_sigma: Option<f64>,
    #[arg(long)]
    pub budget: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SobolevDim {
    pub measure: MeasureSpec,
    pub j: JRange,
    pub samples: usize,
    pub seed: u64,
    pub min_sigma: Option<f64>,
    pub budget: usize,
}

impl Default for SobolevDim {
    fn default() -> Self {
        let s = Shells::default();
        SobolevDim {
            measure: s.measure,
            j: s.j,
            samples: s.samples,
            seed: s.seed,
            min_sigma: None,
            budget: s.budget,
        }
    }
}

#[derive(Serialize)]
pub struct SobolevOutput {
    pub estimate: SobolevEstimate,
    pub pass: Option<bool>,
}

impl Report for SobolevOutput {
    fn verdict(&self) -> Option<bool> {
        self.pass
    }

    fn write_csv(&self, out: &mut dyn Write) -> Result<(), Failure> {
        self.estimate.profile.write_csv(out).map_err(Failure::from)
    }
}

impl Experiment for SobolevDim {
    const NAME: &'static str = "sobolev-dim";
    const PRESETS: &'static [&'static str] = SHELL_PRESETS;
    type Output = SobolevOutput;

    fn preset(name: &str) -> Option<Self> {
        let (m, j) = shell_presets(name)?;
        Some(SobolevDim {
            measure: m.parse().ok()?,
            j,
            min_sigma: (name == "cantor12").then_some(0.5),
            ..Default::default()
        })
    }

    fn validate(&self) -> Result<(), Failure> {
        check_at_least("samples", self.samples, 2)?;
        check_at_least("shell count", self.j.len(), 4)
    }

    fn run(&self) -> Result<SobolevOutput, Failure> {
        let mu = self.measure.build(budget(self.budget))?;
        check_window(mu.resolution(), self.j)?;
        let kernel = FourierKernel::new(&mu, None)?;
        let estimate = sobolev_dimension_estimate(&kernel, self.j.range(), self.samples, self.seed)?;
        Ok(SobolevOutput {
            pass: self.min_sigma.map(|m| estimate.sigma_max >= m),
            estimate,
        })
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LemmaArgs {
    #[arg(long)]
    #[serde(skip)]
    pub preset: Option<String>,
    /// Measure on `R^n`.
    #[arg(long)]
    pub mu: Option<MeasureSpec>,
    /// Measure on the projection parameters `R^{l(n-l)}`.
    #[arg(long)]
    pub lambda: Option<MeasureSpec>,
    #[arg(long)]
    pub l: Option<usize>,
    #[arg(long)]
    pub j: Option<JRange>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Probe radii for the exponent of `mu`.
    #[arg(long, value_delimiter = ',', value_parser = parse_real)]
    pub alpha_radii: Option<Vec<f64>>,
    /// Probe radii for the slice exponent of `lambda`.
    #[arg(long, value_delimiter = ',', value_parser = parse_real)]
    pub beta_radii: Option<Vec<f64>>,
    #[arg(long)]
    pub beta_directions: Option<usize>,
    #[arg(long)]
    pub max_centers: Option<usize>,
    #[arg(long, value_parser = parse_real)]
    pub tolerance: Option<f64>,
    #[arg(long, value_parser = parse_real)]
    pub max_residual: Option<f64>,
    #[arg(long)]
    pub budget: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmaDecay {
    pub mu: MeasureSpec,
    pub lambda: MeasureSpec,
    pub l: usize,
    pub j: JRange,
    pub samples: usize,
    pub seed: u64,
    pub alpha_radii: Vec<f64>,
    pub beta_radii: Vec<f64>,
    pub beta_directions: usize,
    pub max_centers: Option<usize>,
    pub tolerance: f64,
    pub max_residual: f64,
    pub budget: usize,
}

impl Default for LemmaDecay {
    fn default() -> Self {
        LemmaDecay {
            mu: "cantor:2,1/3,8*cantor:2,1/3,8".parse().expect("preset measure"),
            lambda: "grid:1,512".parse().expect("preset measure"),
            l: 1,
            j: JRange { lo: 3, hi: 8 },
            samples: 20_000,
            seed: 1,
            alpha_radii: triadic_radii(6),
            beta_radii: dyadic_radii(0.25, 6),
            beta_directions: 16,
            max_centers: None,
            tolerance: DEFAULT_SLOPE_TOLERANCE,
            max_residual: DEFAULT_MAX_RESIDUAL,
            budget: default_budget(),
        }
    }
}

#[derive(Serialize)]
pub struct LemmaOutput {
    pub alpha: FrostmanReport,
    pub beta: FrostmanReport,
    pub report: LemmaDecayReport,
}

impl Report for LemmaOutput {
    fn verdict(&self) -> Option<bool> {
        Some(self.report.pass)
    }

    fn write_csv(&self, out: &mut dyn Write) -> Result<(), Failure> {
        self.report.write_csv(out).map_err(Failure::from)
    }
}

impl Experiment for LemmaDecay {
    const NAME: &'static str = "lemma-decay";
    const PRESETS: &'static [&'static str] = &["cantor2d", "lebesgue2d-point"];
    type Output = LemmaOutput;

    fn preset(name: &str) -> Option<Self> {
        match name {
            "cantor2d" => Some(LemmaDecay::default()),
            // lambda is a point mass at x = 0, so the bound reads R^(n - alpha).
            "lebesgue2d-point" => Some(LemmaDecay {
                mu: "grid:2,256".parse().ok()?,
                lambda: "point:0".parse().ok()?,
                j: JRange { lo: 0, hi: 3 },
                samples: 4000,
                alpha_radii: dyadic_radii(0.25, 4),
                beta_radii: dyadic_radii(0.25, 4),
                ..Default::default()
            }),
            _ => None,
        }
    }

    fn validate(&self) -> Result<(), Failure> {
        check_at_least("samples", self.samples, 2)?;
        check_at_least("shell count", self.j.len(), 3)?;
        check_at_least("l", self.l, 1)?;
        check_radii("alpha_radii", &self.alpha_radii)?;
        check_radii("beta_radii", &self.beta_radii)?;
        check_positive("tolerance", self.tolerance)?;
        check_positive("max_residual", self.max_residual)
    }

    fn run(&self) -> Result<LemmaOutput, Failure> {
        let b = budget(self.budget);
        let mu = self.mu.build(b)?;
        let lambda = self.lambda.build(b)?;
        let n = mu.ambient_dim();
        if self.l >= n || lambda.ambient_dim() != self.l * (n - self.l) {
            return Err(invalid(format!(
                "need l < n = {n} and lambda of dimension l(n-l) = {}, got l = {} and {}",
                self.l * n.saturating_sub(self.l),
                self.l,
                lambda.ambient_dim()
            )));
        }
        check_window(mu.resolution(), self.j)?;
        let policy = ProbePolicy {
            max_atom_centers: self.max_centers,
            random_centers: 0,
            seed: self.seed,
        };
        let alpha = estimate_frostman_exponent(&mu, &self.alpha_radii, &policy)?;
        let dirs = sphere_directions(self.l, self.beta_directions, 0, self.seed);
        let beta = slice_frostman_exponent(&lambda, n, self.l, &dirs, &self.beta_radii, &policy)?;
        let kernel = FourierKernel::new(&mu, None)?;
        let criteria = DecayCriteria {
            tolerance: self.tolerance,
            max_residual: self.max_residual,
        };
        let report = lemma_decay_report(&kernel, &lambda, self.l, self.j.range(), self.samples, self.seed, &alpha, &beta, criteria)?;
        Ok(LemmaOutput { alpha, beta, report })
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SumsetArgs {
    #[arg(long)]
    #[serde(skip)]
    pub preset: Option<String>,
    #[arg(long)]
    pub a0: Option<MeasureSpec>,
    #[arg(long)]
    pub a1: Option<MeasureSpec>,
    /// Explicit scale factors; overrides random draws.
    #[arg(long, value_delimiter = ',', value_parser = parse_real, allow_hyphen_values = true)]
    pub x: Option<Vec<f64>>,
    /// Number of seeded uniform draws of x from the x range.
    #[arg(long)]
    pub x_count: Option<usize>,
    #[arg(long, value_delimiter = ',', value_parser = parse_real, num_args = 2)]
    pub x_range: Option<Vec<f64>>,
    #[arg(long)]
    pub j: Option<JRange>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_real, allow_hyphen_values = true)]
    pub min_sigma: Option<f64>,
    /// How many x must reach `min_sigma` for a pass.
    #[arg(long)]
    pub min_pass: Option<usize>,
    #[arg(long)]
    pub budget: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sumset {
    pub a0: MeasureSpec,
    pub a1: MeasureSpec,
    pub x: Vec<f64>,
    pub x_count: usize,
    pub x_range: Vec<f64>,
    pub j: JRange,
    pub samples: usize,
    pub seed: u64,
    pub min_sigma: f64,
    pub min_pass: usize,
    pub budget: usize,
}

impl Default for Sumset {
    fn default() -> Self {
        let c: MeasureSpec = "cantor:2,1/3,12".parse().expect("preset measure");
        Sumset {
            a0: c.clone(),
            a1: c,
            x: Vec::new(),
            x_count: 5,
            x_range: vec![0.5, 2.0],
            j: JRange { lo: 3, hi: 13 },
            samples: 8000,
            seed: 1,
            // alpha_0 + alpha_1 + 1 - n for two middle-thirds factors on the line, less 0.2.
            min_sigma: 2.0 * 2f64.ln() / 3f64.ln() - 0.2,
            min_pass: 4,
            budget: default_budget(),
        }
    }
}

impl Sumset {
    fn scale_factors(&self) -> Vec<f64> {
        if !self.x.is_empty() {
            return self.x.clone();
        }
        let mut rng = stream_rng(self.seed, 0);
        let (lo, hi) = (self.x_range[0], self.x_range[1]);
        (0..self.x_count).map(|_| rng.random_range(lo..hi)).collect()
    }
}

#[derive(Debug, Serialize)]
pub struct SumsetTrial {
    pub x: f64,
    pub sigma_max: f64,
    pub slope: f64,
    pub residual: f64,
    pub low_confidence: bool,
    pub reached: bool,
}

#[derive(Debug, Serialize)]
pub struct SumsetOutput {
    pub trials: Vec<SumsetTrial>,
    pub reached: usize,
    pub required: usize,
    /// Sampled x below the threshold; isolated misses are expected on a null set of x.
    pub missed_x: Vec<f64>,
    pub pass: bool,
}

impl Report for SumsetOutput {
    fn verdict(&self) -> Option<bool> {
        Some(self.pass)
    }

    fn write_csv(&self, out: &mut dyn Write) -> Result<(), Failure> {
        let mut w = csv_writer(out);
        w.write_record(["x", "sigma_max", "slope", "residual", "low_confidence", "reached"])
            .map_err(csv_failure)?;
        for t in &self.trials {
            w.serialize((t.x, t.sigma_max, t.slope, t.residual, t.low_confidence, t.reached))
                .map_err(csv_failure)?;
        }
        w.flush().map_err(|e| Failure::Runtime(e.to_string()))
    }
}

impl Experiment for Sumset {
    const NAME: &'static str = "sumset";
    const PRESETS: &'static [&'static str] = &["cantor12-random"];
    type Output = SumsetOutput;

    fn preset(name: &str) -> Option<Self> {
        (name == "cantor12-random").then(Sumset::default)
    }

    fn validate(&self) -> Result<(), Failure> {
        check_at_least("samples", self.samples, 2)?;
        check_at_least("shell count", self.j.len(), 4)?;
        if self.x.is_empty() {
            check_at_least("x_count", self.x_count, 1)?;
            if self.x_range.len() != 2 || !(self.x_range[0] < self.x_range[1]) {
                return Err(invalid("x_range must be [lo, hi] with lo < hi"));
            }
        }
        if self.x.iter().any(|v| !v.is_finite()) {
            return Err(invalid("x values must be finite"));
        }
        Ok(())
    }

    fn run(&self) -> Result<SumsetOutput, Failure> {
        let b = budget(self.budget);
        let a0: DiscreteMeasure = self.a0.build(b)?;
        let a1: DiscreteMeasure = self.a1.build(b)?;
        let xs = self.scale_factors();
        let sources = xs
            .iter()
            .map(|&x| SumsetSpectrum::new(&a0, &a1, x))
            .collect::<fraclab_core::Result<Vec<_>>>()?;
        for s in &sources {
            check_window(s.resolution(), self.j)?;
        }
        let mut trials = Vec::with_capacity(xs.len());
        for (&x, source) in xs.iter().zip(&sources) {
            let est = sobolev_dimension_estimate(source, self.j.range(), self.samples, self.seed)?;
            trials.push(SumsetTrial {
                x,
                sigma_max: est.sigma_max,
                slope: est.fit.slope,
                residual: est.fit.residual,
                low_confidence: est.low_confidence,
                reached: est.sigma_max >= self.min_sigma,
            });
        }
        let reached = trials.iter().filter(|t| t.reached).count();
        let missed_x = trials.iter().filter(|t| !t.reached).map(|t| t.x).collect();
        Ok(SumsetOutput {
            required: self.min_pass,
            pass: reached >= self.min_pass,
            reached,
            missed_x,
            trials,
        })
    }
}
