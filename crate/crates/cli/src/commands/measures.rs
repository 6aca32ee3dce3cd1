use std::io::Write;

use clap::Args;
use fraclab_core::measures::{estimate_frostman_exponent, MeasureFile};
use fraclab_core::{FrostmanReport, ProbePolicy};
use serde::{Deserialize, Serialize};

use super::{budget, check_at_least, check_positive, check_radii, default_budget, dyadic_radii, expectation, triadic_radii};
use crate::run::{csv_writer, Experiment, Failure, Report};
use crate::sources::{parse_real, MeasureSpec};

const PRESETS: &[&str] = &["cantor-middle-thirds", "grid256", "cantor-product"];

fn preset_measure(name: &str) -> Option<MeasureSpec> {
    let text = match name {
        "cantor-middle-thirds" => "cantor:2,1/3,10",
        "grid256" => "grid:1,256",
        "cantor-product" => "cantor:2,1/3,8*cantor:2,1/3,8",
        _ => return None,
    };
    text.parse().ok()
}

fn middle_thirds_dimension() -> f64 {
    2f64.ln() / 3f64.ln()
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MakeMeasureArgs {
    #[arg(long)]
    #[serde(skip)]
    pub preset: Option<String>,
    /// e.g. `cantor:2,1/3,10`, `grid:2,64`, `cantor:2,1/3,8*grid:1,128`
    #[arg(long)]
    pub measure: Option<MeasureSpec>,
    /// Largest atom count any constructor may produce.
    #[arg(long)]
    pub budget: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MakeMeasure {
    pub measure: MeasureSpec,
    pub budget: usize,
}

impl Default for MakeMeasure {
    fn default() -> Self {
        MakeMeasure {
            measure: preset_measure("cantor-middle-thirds").expect("preset"),
            budget: default_budget(),
        }
    }
}

#[derive(Serialize)]
#[serde(transparent)]
pub struct MeasureOutput(MeasureFile);

impl Report for MeasureOutput {
    fn write_csv(&self, out: &mut dyn Write) -> Result<(), Failure> {
        let mut w = csv_writer(out);
        let mut header: Vec<String> = (0..self.0.ambient_dim).map(|i| format!("x{i}")).collect();
        header.push("weight".into());
        w.write_record(&header).map_err(csv_failure)?;
        for (p, weight) in self.0.points.iter().zip(&self.0.weights) {
            let mut row: Vec<String> = p.iter().map(|v| v.to_string()).collect();
            row.push(weight.to_string());
            w.write_record(&row).map_err(csv_failure)?;
        }
        w.flush().map_err(|e| Failure::Runtime(e.to_string()))
    }
}

pub(crate) fn csv_failure(e: csv::Error) -> Failure {
    Failure::Runtime(e.to_string())
}

impl Experiment for MakeMeasure {
    const NAME: &'static str = "make-measure";
    const PRESETS: &'static [&'static str] = PRESETS;
    type Output = MeasureOutput;

    fn preset(name: &str) -> Option<Self> {
        Some(MakeMeasure {
            measure: preset_measure(name)?,
            ..Default::default()
        })
    }

    fn validate(&self) -> Result<(), Failure> {
        check_at_least("budget", self.budget, 1)
    }

    fn run(&self) -> Result<MeasureOutput, Failure> {
        let mu = self.measure.build(budget(self.budget))?;
        Ok(MeasureOutput(MeasureFile::from(&mu)))
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FrostmanArgs {
    #[arg(long)]
    #[serde(skip)]
    pub preset: Option<String>,
    #[arg(long)]
    pub measure: Option<MeasureSpec>,
    /// Strictly decreasing probe radii.
    #[arg(long, value_delimiter = ',', value_parser = parse_real)]
    pub radii: Option<Vec<f64>>,
    /// Use at most this many atoms as ball centers (strided).
    #[arg(long)]
    pub max_centers: Option<usize>,
    /// Extra seeded random centers in the bounding box.
    #[arg(long)]
    pub random_centers: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Expected exponent; sets a pass/fail verdict.
    #[arg(long, value_parser = parse_real)]
    pub expect: Option<f64>,
    #[arg(long, value_parser = parse_real)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub budget: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Frostman {
    pub measure: MeasureSpec,
    pub radii: Vec<f64>,
    pub max_centers: Option<usize>,
    pub random_centers: usize,
    pub seed: u64,
    pub expect: Option<f64>,
    pub tolerance: f64,
    pub budget: usize,
}

impl Default for Frostman {
    fn default() -> Self {
        Frostman {
            measure: preset_measure("cantor-middle-thirds").expect("preset"),
            radii: triadic_radii(7),
            max_centers: None,
            random_centers: 0,
            seed: 0,
            expect: None,
            tolerance: 0.05,
            budget: default_budget(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct FrostmanOutput {
    pub atoms: usize,
    pub resolution: f64,
    pub report: FrostmanReport,
    pub pass: Option<bool>,
}

impl Report for FrostmanOutput {
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

impl Experiment for Frostman {
    const NAME: &'static str = "frostman";
    const PRESETS: &'static [&'static str] = PRESETS;
    type Output = FrostmanOutput;

    fn preset(name: &str) -> Option<Self> {
        let measure = preset_measure(name)?;
        let (radii, expect, tolerance) = match name {
            "cantor-middle-thirds" => (triadic_radii(7), middle_thirds_dimension(), 0.05),
            "grid256" => (dyadic_radii(0.25, 5), 1.0, 0.05),
            _ => (triadic_radii(6), 2.0 * middle_thirds_dimension(), 0.1),
        };
        Some(Frostman {
            measure,
            radii,
            expect: Some(expect),
            tolerance,
            ..Default::default()
        })
    }

    fn validate(&self) -> Result<(), Failure> {
        check_radii("radii", &self.radii)?;
        check_positive("tolerance", self.tolerance)?;
        check_at_least("budget", self.budget, 1)
    }

    fn run(&self) -> Result<FrostmanOutput, Failure> {
        let mu = self.measure.build(budget(self.budget))?;
        let policy = ProbePolicy {
            max_atom_centers: self.max_centers,
            random_centers: self.random_centers,
            seed: self.seed,
        };
        let report = estimate_frostman_exponent(&mu, &self.radii, &policy)?;
        Ok(FrostmanOutput {
            atoms: mu.len(),
            resolution: mu.resolution(),
            pass: expectation(report.exponent, self.expect, self.tolerance),
            report,
        })
    }
}
