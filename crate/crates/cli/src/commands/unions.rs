use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use fraclab_core::measures::estimate_frostman_exponent;
use fraclab_core::projections::PlaneSetFile;
use fraclab_core::unions::{
    counterexample_set, default_clip_box, occupancy_sweep, rasterize_union, union_dimension_estimate, OccupancyReport,
    OccupancyVerdict,
};
use fraclab_core::{FrostmanReport, ProbePolicy, SlopeFit};
use serde::{Deserialize, Serialize};

use super::measures::csv_failure;
use super::{budget, check_at_least, check_dims, check_positive, check_radii, default_budget, expectation};
use crate::run::{csv_writer, invalid, Experiment, Failure, Report};
use crate::sources::{parse_real, BoxArg, CantorArg, PlaneSource};

fn check_resolutions(resolutions: &[usize]) -> Result<(), Failure> {
    check_at_least("resolution count", resolutions.len(), 3)?;
    if resolutions.iter().any(|&r| r < 2) {
        return Err(invalid("resolutions must be at least 2"));
    }
    if resolutions.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("resolutions must be strictly increasing"));
    }
    Ok(())
}

fn clip_or_default(clip: &Option<BoxArg>, d: usize, k: usize) -> Result<Vec<(f64, f64)>, Failure> {
    match clip {
        Some(b) if b.0.len() != d => Err(invalid(format!("clip box has {} axes, need {d}", b.0.len()))),
        Some(b) => Ok(b.0.clone()),
        None => Ok(default_clip_box(d, k)),
    }
}

fn parse_verdict(text: &str) -> Result<OccupancyVerdict, String> {
    serde_json::from_value(serde_json::Value::String(text.to_string())).map_err(|e| e.to_string())
}

fn unit_square() -> Option<BoxArg> {
    Some(BoxArg(vec![(0.0, 1.0), (0.0, 1.0)]))
}

fn preset_planes(text: &str) -> PlaneSource {
    text.parse().expect("preset plane source")
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct UnionSweepArgs {
    #[arg(long)]
    #[serde(skip)]
    pub preset: Option<String>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    /// A parameter measure, or `counterexample:m,r,depth,fill`.
    #[arg(long)]
    pub planes: Option<PlaneSource>,
    /// Flat `lo,hi` pairs, one per axis.
    #[arg(long, allow_hyphen_values = true)]
    pub clip: Option<BoxArg>,
    /// Cells per axis, strictly increasing.
    #[arg(long = "res", value_delimiter = ',')]
    pub resolutions: Option<Vec<usize>>,
    /// Expected verdict; sets a pass/fail outcome.
    #[arg(long, value_parser = parse_verdict)]
    pub expect: Option<OccupancyVerdict>,
    /// Write the finest occupancy mask here as a PGM image (d = 2 only).
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long)]
    pub budget: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnionSweep {
    pub d: usize,
    pub k: usize,
    pub planes: PlaneSource,
    pub clip: Option<BoxArg>,
    pub resolutions: Vec<usize>,
    pub expect: Option<OccupancyVerdict>,
    pub mask: Option<PathBuf>,
    pub budget: usize,
}

impl Default for UnionSweep {
    fn default() -> Self {
        UnionSweep {
            d: 2,
            k: 1,
            planes: preset_planes("grid:2,512"),
            clip: Some(BoxArg(vec![(0.0, 1.0), (0.0, 2.0)])),
            resolutions: vec![64, 128, 256, 512],
            expect: Some(OccupancyVerdict::PositiveMeasureConsistent),
            mask: None,
            budget: default_budget(),
        }
    }
}

#[derive(Serialize)]
pub struct SweepOutput {
    pub report: OccupancyReport,
    pub pass: Option<bool>,
}

impl Report for SweepOutput {
    fn verdict(&self) -> Option<bool> {
        self.pass
    }

    fn write_csv(&self, out: &mut dyn Write) -> Result<(), Failure> {
        self.report.write_csv(out).map_err(Failure::from)
    }
}

impl Experiment for UnionSweep {
    const NAME: &'static str = "union-sweep";
    const PRESETS: &'static [&'static str] = &["full-square-d2k1", "counterexample-d2k1", "single-line"];
    type Output = SweepOutput;

    fn preset(name: &str) -> Option<Self> {
        let base = UnionSweep::default();
        match name {
            "full-square-d2k1" => Some(base),
            "counterexample-d2k1" => Some(UnionSweep {
                planes: preset_planes("counterexample:2,1/3,6,1"),
                clip: unit_square(),
                resolutions: vec![27, 81, 243],
                expect: Some(OccupancyVerdict::NullConsistent),
                ..base
            }),
            "single-line" => Some(UnionSweep {
                planes: preset_planes("point:0,0"),
                clip: unit_square(),
                expect: Some(OccupancyVerdict::NullConsistent),
                ..base
            }),
            _ => None,
        }
    }

    fn validate(&self) -> Result<(), Failure> {
        check_dims(self.d, self.k)?;
        check_resolutions(&self.resolutions)?;
        clip_or_default(&self.clip, self.d, self.k)?;
        if self.mask.is_some() && self.d != 2 {
            return Err(invalid("mask images need d = 2"));
        }
        Ok(())
    }

    fn run(&self) -> Result<SweepOutput, Failure> {
        let planes = self.planes.build(self.d, self.k, budget(self.budget))?;
        let clip = clip_or_default(&self.clip, self.d, self.k)?;
        let report = occupancy_sweep(&planes, &clip, &self.resolutions)?;
        if let Some(path) = &self.mask {
            let finest = *self.resolutions.last().expect("validated");
            rasterize_union(&planes, &clip, finest)?.write_pgm(path)?;
        }
        Ok(SweepOutput {
            pass: self.expect.map(|e| e == report.verdict),
            report,
        })
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CounterexampleArgs {
    #[arg(long)]
    #[serde(skip)]
    pub preset: Option<String>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    /// `m,r,depth` for the set `K` of last intercepts.
    #[arg(long)]
    pub cantor: Option<CantorArg>,
    /// Grid cells per free coordinate.
    #[arg(long)]
    pub fill_per_axis: Option<usize>,
    /// Probe radii for the parameter-dimension estimate.
    #[arg(long, value_delimiter = ',', value_parser = parse_real)]
    pub radii: Option<Vec<f64>>,
    #[arg(long)]
    pub max_centers: Option<usize>,
    #[arg(long, value_parser = parse_real)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub budget: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Counterexample {
    pub d: usize,
    pub k: usize,
    pub cantor: CantorArg,
    pub fill_per_axis: usize,
    pub radii: Vec<f64>,
    pub max_centers: Option<usize>,
    pub tolerance: f64,
    pub budget: usize,
}

impl Default for Counterexample {
    fn default() -> Self {
        Counterexample {
            d: 2,
            k: 1,
            cantor: "2,1/3,8".parse().expect("preset"),
            fill_per_axis: 1,
            radii: fraclab_core::numeric::geometric(1.0 / 3.0, 1.0 / 3.0, 6),
            max_centers: None,
            tolerance: 0.1,
            budget: default_budget(),
        }
    }
}

#[derive(Serialize)]
pub struct CounterexampleOutput {
    pub planes: PlaneSetFile,
    /// `(k+1)(d-k-1) + dim K`.
    pub expected_dimension: f64,
    pub parameter_dimension: FrostmanReport,
    pub pass: bool,
}

impl Report for CounterexampleOutput {
    fn verdict(&self) -> Option<bool> {
        Some(self.pass)
    }

    fn write_csv(&self, out: &mut dyn Write) -> Result<(), Failure> {
        let m = &self.planes.measure;
        let mut w = csv_writer(out);
        let mut header: Vec<String> = (0..m.ambient_dim).map(|i| format!("y{i}")).collect();
        header.push("weight".into());
        w.write_record(&header).map_err(csv_failure)?;
        for (p, weight) in m.points.iter().zip(&m.weights) {
            let mut row: Vec<String> = p.iter().map(|v| v.to_string()).collect();
            row.push(weight.to_string());
            w.write_record(&row).map_err(csv_failure)?;
        }
        w.flush().map_err(|e| Failure::Runtime(e.to_string()))
    }
}

impl Experiment for Counterexample {
    const NAME: &'static str = "counterexample";
    const PRESETS: &'static [&'static str] = &["middle-thirds-d2k1", "quinary-d2k1"];
    type Output = CounterexampleOutput;

    fn preset(name: &str) -> Option<Self> {
        match name {
            "middle-thirds-d2k1" => Some(Counterexample::default()),
            // dim K = log 4 / log 5.
            "quinary-d2k1" => Some(Counterexample {
                cantor: "4,1/5,7".parse().expect("preset"),
                radii: fraclab_core::numeric::geometric(0.2, 0.2, 5),
                ..Counterexample::default()
            }),
            _ => None,
        }
    }

    fn validate(&self) -> Result<(), Failure> {
        check_dims(self.d, self.k)?;
        self.cantor.0.validate()?;
        check_at_least("fill_per_axis", self.fill_per_axis, 1)?;
        check_radii("radii", &self.radii)?;
        check_positive("tolerance", self.tolerance)
    }

    fn run(&self) -> Result<CounterexampleOutput, Failure> {
        let planes = counterexample_set(self.d, self.k, &self.cantor.0, self.fill_per_axis, budget(self.budget))?;
        let policy = ProbePolicy {
            max_atom_centers: self.max_centers,
            ..ProbePolicy::default()
        };
        let report = estimate_frostman_exponent(planes.measure(), &self.radii, &policy)?;
        let free = (self.k + 1) * (self.d - self.k - 1);
        let expected = if self.fill_per_axis > 1 { free as f64 } else { 0.0 } + self.cantor.0.similarity_dimension();
        Ok(CounterexampleOutput {
            planes: PlaneSetFile::from(&planes),
            expected_dimension: expected,
            pass: (report.exponent - expected).abs() <= self.tolerance,
            parameter_dimension: report,
        })
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct UnionDimArgs {
    #[arg(long)]
    #[serde(skip)]
    pub preset: Option<String>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub planes: Option<PlaneSource>,
    #[arg(long, allow_hyphen_values = true)]
    pub clip: Option<BoxArg>,
    #[arg(long = "res", value_delimiter = ',')]
    pub resolutions: Option<Vec<usize>>,
    /// Expected box dimension; sets a pass/fail verdict.
    #[arg(long, value_parser = parse_real)]
    pub expect: Option<f64>,
    #[arg(long, value_parser = parse_real)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub budget: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnionDim {
    pub d: usize,
    pub k: usize,
    pub planes: PlaneSource,
    pub clip: Option<BoxArg>,
    pub resolutions: Vec<usize>,
    pub expect: Option<f64>,
    pub tolerance: f64,
    pub budget: usize,
}

impl Default for UnionDim {
    fn default() -> Self {
        UnionDim {
            d: 2,
            k: 1,
            planes: preset_planes("point:0,0"),
            clip: unit_square(),
            resolutions: vec![64, 128, 256, 512],
            expect: Some(1.0),
            tolerance: 0.1,
            budget: default_budget(),
        }
    }
}

#[derive(Serialize)]
pub struct UnionDimOutput {
    pub dimension: f64,
    pub fit: SlopeFit,
    pub pass: Option<bool>,
}

impl Report for UnionDimOutput {
    fn verdict(&self) -> Option<bool> {
        self.pass
    }

    fn write_csv(&self, out: &mut dyn Write) -> Result<(), Failure> {
        let mut w = csv_writer(out);
        w.write_record(["log2_per_axis", "log2_marked"]).map_err(csv_failure)?;
        for p in &self.fit.sample_points {
            w.serialize(p).map_err(csv_failure)?;
        }
        w.flush().map_err(|e| Failure::Runtime(e.to_string()))
    }
}

impl Experiment for UnionDim {
    const NAME: &'static str = "union-dim";
    const PRESETS: &'static [&'static str] = &["single-line", "counterexample-d2k1", "full-square-d2k1"];
    type Output = UnionDimOutput;

    fn preset(name: &str) -> Option<Self> {
        let base = UnionDim::default();
        match name {
            "single-line" => Some(base),
            "counterexample-d2k1" => Some(UnionDim {
                planes: preset_planes("counterexample:2,1/3,6,1"),
                resolutions: vec![27, 81, 243],
                expect: Some(1.0 + 2f64.ln() / 3f64.ln()),
                ..base
            }),
            "full-square-d2k1" => Some(UnionDim {
                planes: preset_planes("grid:2,512"),
                clip: Some(BoxArg(vec![(0.0, 1.0), (0.0, 2.0)])),
                expect: Some(2.0),
                ..base
            }),
            _ => None,
        }
    }

    fn validate(&self) -> Result<(), Failure> {
        check_dims(self.d, self.k)?;
        check_resolutions(&self.resolutions)?;
        clip_or_default(&self.clip, self.d, self.k)?;
        check_positive("tolerance", self.tolerance)
    }

    fn run(&self) -> Result<UnionDimOutput, Failure> {
        let planes = self.planes.build(self.d, self.k, budget(self.budget))?;
        let clip = clip_or_default(&self.clip, self.d, self.k)?;
        let fit = union_dimension_estimate(&planes, &clip, &self.resolutions)?;
        Ok(UnionDimOutput {
            dimension: fit.slope,
            pass: expectation(fit.slope, self.expect, self.tolerance),
            fit,
        })
    }
}
