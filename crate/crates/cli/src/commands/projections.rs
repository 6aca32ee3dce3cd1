use std::io::Write;

use clap::Args;
use fraclab_core::numeric::stream_rng;
use fraclab_core::projections::{check_duality_identity, duality_bound, embed_plane_parameters, slice_frostman_exponent, sphere_directions};
use fraclab_core::{FrostmanReport, ProbePolicy, ProjectionParam};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::measures::csv_failure;
use super::{budget, check_at_least, check_dims, check_positive, check_radii, default_budget, dyadic_radii, expectation};
use crate::run::{csv_writer, invalid, Experiment, Failure, Report};
use crate::sources::{parse_real, MeasureSpec};

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyIdentityArgs {
    #[arg(long)]
    #[serde(skip)]
    pub preset: Option<String>,
    /// Ambient dimension; drawn from 2..=8 per trial when absent.
    #[arg(long)]
    pub n: Option<usize>,
    /// Image dimension; drawn from 1..n per trial when absent.
    #[arg(long)]
    pub l: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Entries are drawn uniformly from `[-scale, scale]`.
    #[arg(long, value_parser = parse_real)]
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyIdentity {
    pub n: Option<usize>,
    pub l: Option<usize>,
    pub trials: usize,
    pub seed: u64,
    pub scale: f64,
}

impl Default for VerifyIdentity {
    fn default() -> Self {
        VerifyIdentity {
            n: None,
            l: None,
            trials: 1000,
            seed: 0,
            scale: 10.0,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct WorstTrial {
    pub trial: usize,
    pub n: usize,
    pub l: usize,
    pub residual: f64,
    pub bound: f64,
}

#[derive(Debug, Serialize)]
pub struct IdentityOutput {
    pub trials: usize,
    pub max_residual: f64,
    /// Largest `residual / bound`; at most 1 on success.
    pub max_ratio: f64,
    pub worst: WorstTrial,
    pub pass: bool,
}

impl Report for IdentityOutput {
    fn verdict(&self) -> Option<bool> {
        Some(self.pass)
    }

    fn write_csv(&self, out: &mut dyn Write) -> Result<(), Failure> {
        let mut w = csv_writer(out);
        w.write_record(["trials", "max_residual", "max_ratio", "pass"]).map_err(csv_failure)?;
        w.serialize((self.trials, self.max_residual, self.max_ratio, self.pass)).map_err(csv_failure)?;
        w.flush().map_err(|e| Failure::Runtime(e.to_string()))
    }
}

impl Experiment for VerifyIdentity {
    const NAME: &'static str = "verify-identity";
    const PRESETS: &'static [&'static str] = &["acceptance"];
    type Output = IdentityOutput;

    fn preset(name: &str) -> Option<Self> {
        (name == "acceptance").then(|| VerifyIdentity {
            trials: 10_000,
            seed: 7,
            ..Default::default()
        })
    }

    fn validate(&self) -> Result<(), Failure> {
        check_at_least("trials", self.trials, 1)?;
        check_positive("scale", self.scale)?;
        if let Some(n) = self.n {
            check_at_least("n", n, 2)?;
        }
        match (self.n, self.l) {
            (Some(n), Some(l)) if l < 1 || l >= n => Err(invalid(format!("need 1 <= l < n, got n = {n}, l = {l}"))),
            (None, Some(_)) => Err(invalid("l requires n")),
            _ => Ok(()),
        }
    }

    fn run(&self) -> Result<IdentityOutput, Failure> {
        let mut rng = stream_rng(self.seed, 0);
        let s = self.scale;
        let mut worst: Option<WorstTrial> = None;
        let mut max_residual: f64 = 0.0;
        for trial in 0..self.trials {
            let n = self.n.unwrap_or_else(|| rng.random_range(2..=8));
            let l = self.l.unwrap_or_else(|| rng.random_range(1..n));
            let mut draw = |len: usize| -> Vec<f64> { (0..len).map(|_| rng.random_range(-s..=s)).collect() };
            let x = ProjectionParam::new(n, l, draw(l * (n - l)))?;
            let xi = draw(l);
            let p = draw(n);
            let residual = check_duality_identity(&x, &xi, &p)?;
            let bound = duality_bound(&x, &xi, &p);
            max_residual = max_residual.max(residual);
            if worst.as_ref().is_none_or(|w| residual / bound > w.residual / w.bound) {
                worst = Some(WorstTrial { trial, n, l, residual, bound });
            }
        }
        let worst = worst.expect("at least one trial");
        let max_ratio = worst.residual / worst.bound;
        Ok(IdentityOutput {
            trials: self.trials,
            max_residual,
            max_ratio,
            pass: max_ratio <= 1.0,
            worst,
        })
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SliceFrostmanArgs {
    #[arg(long)]
    #[serde(skip)]
    pub preset: Option<String>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Measure on `[0,1]^k` pushed into parameter space by the plane embedding.
    #[arg(long)]
    pub base: Option<MeasureSpec>,
    /// Deterministic direction count (used for l = 2, 3).
    #[arg(long)]
    pub directions: Option<usize>,
    #[arg(long)]
    pub random_directions: Option<usize>,
    #[arg(long, value_delimiter = ',', value_parser = parse_real)]
    pub radii: Option<Vec<f64>>,
    #[arg(long)]
    pub max_centers: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_real)]
    pub expect: Option<f64>,
    #[arg(long, value_parser = parse_real)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub budget: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceFrostman {
    pub d: usize,
    pub k: usize,
    pub base: MeasureSpec,
    pub directions: usize,
    pub random_directions: usize,
    pub radii: Vec<f64>,
    pub max_centers: Option<usize>,
    pub seed: u64,
    pub expect: Option<f64>,
    pub tolerance: f64,
    pub budget: usize,
}

impl Default for SliceFrostman {
    fn default() -> Self {
        SliceFrostman::embedding(2, 1)
    }
}

impl SliceFrostman {
    fn embedding(d: usize, k: usize) -> Self {
        let (base, radii) = if k == 1 {
            ("grid:1,256", dyadic_radii(0.25, 5))
        } else {
            ("grid:2,128", dyadic_radii(0.25, 4))
        };
        SliceFrostman {
            d,
            k,
            base: base.parse().expect("preset measure"),
            directions: 16,
            random_directions: 8,
            radii,
            max_centers: None,
            seed: 3,
            expect: Some(k as f64),
            tolerance: 0.1,
            budget: default_budget(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SliceOutput {
    pub n: usize,
    pub l: usize,
    pub atoms: usize,
    pub directions: usize,
    pub report: FrostmanReport,
    pub pass: Option<bool>,
}

impl Report for SliceOutput {
    fn verdict(&self) -> Option<bool> {
        self.pass
    }

    fn write_csv(&self, out: &mut dyn Write) -> Result<(), Failure> {
        let mut w = csv_writer(out);
        w.write_record(["radius", "max_mass"]).map_err(csv_failure)?;
        for (r, m) in self.report.radii.iter().zip(&self.report.masses) {
            w.serialize((r, m)).map_err(csv_failure)?;
        }
        w.flush().map_err(|e| Failure::Runtime(e.to_string()))
    }
}

impl Experiment for SliceFrostman {
    const NAME: &'static str = "slice-frostman";
    const PRESETS: &'static [&'static str] = &["embed-d2k1", "embed-d3k1", "embed-d3k2"];
    type Output = SliceOutput;

    fn preset(name: &str) -> Option<Self> {
        match name {
            "embed-d2k1" => Some(SliceFrostman::embedding(2, 1)),
            "embed-d3k1" => Some(SliceFrostman::embedding(3, 1)),
            "embed-d3k2" => Some(SliceFrostman::embedding(3, 2)),
            _ => None,
        }
    }

    fn validate(&self) -> Result<(), Failure> {
        check_dims(self.d, self.k)?;
        check_radii("radii", &self.radii)?;
        check_positive("tolerance", self.tolerance)
    }

    fn run(&self) -> Result<SliceOutput, Failure> {
        let base = self.base.build(budget(self.budget))?;
        let lambda = embed_plane_parameters(self.d, self.k, &base)?;
        let (n, l) = ((self.k + 1) * (self.d - self.k), self.d - self.k);
        let dirs = sphere_directions(l, self.directions, self.random_directions, self.seed);
        let policy = ProbePolicy {
            max_atom_centers: self.max_centers,
            random_centers: 0,
            seed: self.seed,
        };
        let report = slice_frostman_exponent(&lambda, n, l, &dirs, &self.radii, &policy)?;
        Ok(SliceOutput {
            n,
            l,
            atoms: lambda.len(),
            directions: dirs.len(),
            pass: expectation(report.exponent, self.expect, self.tolerance),
            report,
        })
    }
}
