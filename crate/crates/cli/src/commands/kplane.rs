use std::io::Write;

use clap::Args;
use fraclab_core::field::{GridField, ScalarField};
use fraclab_core::kplane::{
    bound_ratio_experiment, compute_q, default_quadrature, mixed_norm, random_bumps, standard_box, transform_l2_norm,
    BoundRatioReport, ConstantField, RatioSettings, TransformBoundConfig, DEFAULT_MAX_GROWTH_SLOPE,
    DEFAULT_XPRIME_BOUND,
};
use fraclab_core::measures::estimate_frostman_exponent;
use fraclab_core::{FrostmanReport, PlaneSet, ProbePolicy};
use serde::{Deserialize, Serialize};

use super::measures::csv_failure;
use super::{budget, check_at_least, check_dims, check_positive, check_radii, default_budget, dyadic_radii};
use crate::run::{csv_writer, invalid, Experiment, Failure, Report};
use crate::sources::{parse_real, MeasureSpec};

/// Relative agreement required between the constant-field ratio and its closed form.
const CONSTANT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Args, Serialize)]
pub struct ComputeQArgs {
    #[arg(long)]
    #[serde(skip)]
    pub preset: Option<String>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_parser = parse_real)]
    pub alpha: Option<f64>,
    #[arg(long, value_parser = parse_real)]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComputeQ {
    pub d: usize,
    pub k: usize,
    pub alpha: f64,
    pub epsilon: f64,
}

impl Default for ComputeQ {
    fn default() -> Self {
        ComputeQ {
            d: 2,
            k: 1,
            alpha: 1.5,
            epsilon: 0.25,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct QOutput {
    pub config: TransformBoundConfig,
    /// `|(1/2 - 1/q) - rhs|`.
    pub identity_residual: f64,
}

impl Report for QOutput {
    fn write_csv(&self, out: &mut dyn Write) -> Result<(), Failure> {
        let mut w = csv_writer(out);
        w.write_record(["d", "k", "alpha", "epsilon", "q", "q_conj"]).map_err(csv_failure)?;
        let c = &self.config;
        w.serialize((c.d, c.k, c.alpha, c.epsilon, c.q, c.q_conj)).map_err(csv_failure)?;
        w.flush().map_err(|e| Failure::Runtime(e.to_string()))
    }
}

impl Experiment for ComputeQ {
    const NAME: &'static str = "compute-q";
    const PRESETS: &'static [&'static str] = &["planar"];
    type Output = QOutput;

    fn preset(name: &str) -> Option<Self> {
        (name == "planar").then(ComputeQ::default)
    }

    fn validate(&self) -> Result<(), Failure> {
        check_dims(self.d, self.k)
    }

    fn run(&self) -> Result<QOutput, Failure> {
        let config = compute_q(self.d, self.k, self.alpha, self.epsilon)?;
        Ok(QOutput {
            identity_residual: ((0.5 - 1.0 / config.q) - config.rhs()).abs(),
            config,
        })
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct KplaneRatioArgs {
    #[arg(long)]
    #[serde(skip)]
    pub preset: Option<String>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Parameter measure on `R^{(k+1)(d-k)}`.
    #[arg(long)]
    pub planes: Option<MeasureSpec>,
    #[arg(long, value_delimiter = ',', value_parser = parse_real)]
    pub alpha_radii: Option<Vec<f64>>,
    #[arg(long)]
    pub max_centers: Option<usize>,
    #[arg(long, value_parser = parse_real)]
    pub epsilon: Option<f64>,
    /// Number of random quartic bumps.
    #[arg(long)]
    pub bumps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Range of bump centers along the `x'` axes.
    #[arg(long, value_delimiter = ',', value_parser = parse_real, num_args = 2, allow_hyphen_values = true)]
    pub bump_range: Option<Vec<f64>>,
    /// Grid cells per axis, one entry per resolution.
    #[arg(long = "res", value_delimiter = ',')]
    pub resolutions: Option<Vec<usize>>,
    #[arg(long)]
    pub quadrature: Option<usize>,
    /// Half-width of the `x'` box.
    #[arg(long, value_parser = parse_real)]
    pub x_prime_bound: Option<f64>,
    #[arg(long, value_parser = parse_real)]
    pub max_growth_slope: Option<f64>,
    #[arg(long)]
    pub budget: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KplaneRatio {
    pub d: usize,
    pub k: usize,
    pub planes: MeasureSpec,
    pub alpha_radii: Vec<f64>,
    pub max_centers: Option<usize>,
    pub epsilon: f64,
    pub bumps: usize,
    pub seed: u64,
    pub bump_range: Vec<f64>,
    pub resolutions: Vec<usize>,
    pub quadrature: Option<usize>,
    pub x_prime_bound: f64,
    pub max_growth_slope: f64,
    pub budget: usize,
}

impl Default for KplaneRatio {
    fn default() -> Self {
        KplaneRatio {
            d: 2,
            k: 1,
            planes: "cantor:2,1/3,7*grid:1,128".parse().expect("preset measure"),
            alpha_radii: dyadic_radii(0.25, 4),
            max_centers: None,
            epsilon: 0.3,
            bumps: 20,
            seed: 5,
            bump_range: vec![0.0, 2.0],
            resolutions: vec![64, 128, 256, 512],
            quadrature: None,
            x_prime_bound: DEFAULT_XPRIME_BOUND,
            max_growth_slope: DEFAULT_MAX_GROWTH_SLOPE,
            budget: default_budget(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ConstantCheck {
    pub ratio: f64,
    pub closed_form: f64,
    pub relative_error: f64,
}

#[derive(Serialize)]
pub struct KplaneOutput {
    pub alpha: FrostmanReport,
    pub constant: ConstantCheck,
    pub report: BoundRatioReport,
    pub pass: bool,
}

impl Report for KplaneOutput {
    fn verdict(&self) -> Option<bool> {
        Some(self.pass)
    }

    fn write_csv(&self, out: &mut dyn Write) -> Result<(), Failure> {
        self.report.write_csv(out).map_err(Failure::from)
    }
}

impl Experiment for KplaneRatio {
    const NAME: &'static str = "kplane-ratio";
    const PRESETS: &'static [&'static str] = &["cantor-grid-d2k1"];
    type Output = KplaneOutput;

    fn preset(name: &str) -> Option<Self> {
        (name == "cantor-grid-d2k1").then(KplaneRatio::default)
    }

    fn validate(&self) -> Result<(), Failure> {
        check_dims(self.d, self.k)?;
        check_radii("alpha_radii", &self.alpha_radii)?;
        check_at_least("bumps", self.bumps, 1)?;
        check_at_least("resolution count", self.resolutions.len(), 2)?;
        if self.resolutions.iter().any(|&r| r < 2) {
            return Err(invalid("resolutions must be at least 2"));
        }
        if self.bump_range.len() != 2 || !(self.bump_range[0] <= self.bump_range[1]) {
            return Err(invalid("bump_range must be [lo, hi] with lo <= hi"));
        }
        check_positive("x_prime_bound", self.x_prime_bound)?;
        check_positive("epsilon", self.epsilon)
    }

    fn run(&self) -> Result<KplaneOutput, Failure> {
        let measure = self.planes.build(budget(self.budget))?;
        let planes = PlaneSet::new(self.d, self.k, measure)?;
        let policy = ProbePolicy {
            max_atom_centers: self.max_centers,
            random_centers: 0,
            seed: self.seed,
        };
        let alpha = estimate_frostman_exponent(planes.measure(), &self.alpha_radii, &policy)?;
        let config = compute_q(self.d, self.k, alpha.exponent, self.epsilon)?;
        let settings = RatioSettings {
            quadrature: self.quadrature.unwrap_or_else(|| default_quadrature(self.k)),
            bounds: standard_box(self.d, self.k, self.x_prime_bound),
            max_growth_slope: self.max_growth_slope,
        };

        let shape0 = vec![self.resolutions[0]; self.d];
        let one = GridField::sample(&ConstantField { d: self.d, value: 1.0 }, shape0, settings.bounds.clone())?;
        let ratio = transform_l2_norm(&one, &planes, settings.quadrature)? / mixed_norm(&one, self.k, config.q_conj)?;
        let x_prime_volume = (2.0 * self.x_prime_bound).powi((self.d - self.k) as i32);
        let closed_form = planes.measure().mass().sqrt() / x_prime_volume.powf(1.0 / config.q_conj);
        let constant = ConstantCheck {
            ratio,
            closed_form,
            relative_error: (ratio - closed_form).abs() / closed_form,
        };

        let bumps = random_bumps(
            self.bumps,
            self.d,
            self.k,
            (self.bump_range[0], self.bump_range[1]),
            self.seed,
        );
        let family: Vec<(String, &dyn ScalarField)> = bumps
            .iter()
            .enumerate()
            .map(|(i, b)| (format!("bump{i}"), b as &dyn ScalarField))
            .collect();
        let shapes: Vec<Vec<usize>> = self.resolutions.iter().map(|&r| vec![r; self.d]).collect();
        let report = bound_ratio_experiment(&planes, &alpha, self.epsilon, &family, &shapes, &settings)?;
        Ok(KplaneOutput {
            pass: report.pass && constant.relative_error <= CONSTANT_TOLERANCE,
            alpha,
            constant,
            report,
        })
    }
}
