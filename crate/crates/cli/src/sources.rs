//! Compact text forms for measures, plane families, shell ranges and boxes.
//!
//! Measures: `cantor:m,r,depth`, `grid:dim,per_axis`, `point:x0,x1,...`,
//! `file:path.json`, and products of these joined by `*` (left factor
//! outermost). Ratios accept fractions such as `1/3`.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use fraclab_core::measures::{make_cantor_measure, product_measure, uniform_grid_measure, MeasureFile};
use fraclab_core::projections::PlaneSet;
use fraclab_core::unions::counterexample_set;
use fraclab_core::{AtomBudget, CantorSpec, DiscreteMeasure};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub fn parse_real(text: &str) -> Result<f64, String> {
    let text = text.trim();
    let value = match text.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| format!("bad number '{text}'"))?;
            let b: f64 = b.trim().parse().map_err(|_| format!("bad number '{text}'"))?;
            a / b
        }
        None => text.parse().map_err(|_| format!("bad number '{text}'"))?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("'{text}' is not finite"))
    }
}

fn parse_count(text: &str) -> Result<usize, String> {
    text.trim().parse().map_err(|_| format!("bad count '{text}'"))
}

fn parse_list(text: &str) -> Result<Vec<f64>, String> {
    text.split(',').map(parse_real).collect()
}

/// Parameters of a Cantor construction, written `m,r,depth`.
#[derive(Debug, Clone, PartialEq)]
pub struct CantorArg(pub CantorSpec);

impl FromStr for CantorArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 3 {
            return Err(format!("expected m,r,depth, got '{s}'"));
        }
        let depth = parse_count(parts[2])?;
        let depth = u32::try_from(depth).map_err(|_| format!("depth {depth} too large"))?;
        Ok(CantorArg(CantorSpec::new(parse_count(parts[0])?, parse_real(parts[1])?, depth)))
    }
}

impl fmt::Display for CantorArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.0.branches, self.0.ratio, self.0.depth)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeasureSpec {
    Cantor(CantorArg),
    Grid { dim: usize, per_axis: usize },
    Point(Vec<f64>),
    File(PathBuf),
    Product(Vec<MeasureSpec>),
}

/// A bare measure file, or a `make-measure` result envelope around one.
fn read_measure_file(path: &std::path::Path) -> fraclab_core::Result<DiscreteMeasure> {
    let text = std::fs::read_to_string(path)?;
    let mut value: serde_json::Value = serde_json::from_str(&text)?;
    if value.get("command").is_some() {
        value = value["result"].take();
    }
    let file: MeasureFile = serde_json::from_value(value)?;
    file.try_into()
}

impl MeasureSpec {
    pub fn build(&self, budget: AtomBudget) -> fraclab_core::Result<DiscreteMeasure> {
        match self {
            MeasureSpec::Cantor(c) => make_cantor_measure(&c.0, budget),
            MeasureSpec::Grid { dim, per_axis } => uniform_grid_measure(*dim, *per_axis, budget),
            MeasureSpec::Point(p) => DiscreteMeasure::point_mass(p),
            MeasureSpec::File(path) => read_measure_file(path),
            MeasureSpec::Product(factors) => {
                let mut acc = factors[0].build(budget)?;
                for f in &factors[1..] {
                    acc = product_measure(&acc, &f.build(budget)?, budget)?;
                }
                Ok(acc)
            }
        }
    }
}

impl FromStr for MeasureSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let factors: Vec<&str> = s.split('*').collect();
        if factors.len() > 1 {
            return factors
                .iter()
                .map(|f| f.parse())
                .collect::<Result<Vec<_>, _>>()
                .map(MeasureSpec::Product);
        }
        let (kind, args) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| format!("expected kind:args, got '{s}'"))?;
        match kind {
            "cantor" => Ok(MeasureSpec::Cantor(args.parse()?)),
            "grid" => {
                let parts: Vec<&str> = args.split(',').collect();
                if parts.len() != 2 {
                    return Err(format!("expected grid:dim,per_axis, got '{s}'"));
                }
                Ok(MeasureSpec::Grid {
                    dim: parse_count(parts[0])?,
                    per_axis: parse_count(parts[1])?,
                })
            }
            "point" => Ok(MeasureSpec::Point(parse_list(args)?)),
            "file" => Ok(MeasureSpec::File(PathBuf::from(args))),
            other => Err(format!("unknown measure kind '{other}'")),
        }
    }
}

impl fmt::Display for MeasureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasureSpec::Cantor(c) => write!(f, "cantor:{c}"),
            MeasureSpec::Grid { dim, per_axis } => write!(f, "grid:{dim},{per_axis}"),
            MeasureSpec::Point(p) => {
                let coords: Vec<String> = p.iter().map(|v| v.to_string()).collect();
                write!(f, "point:{}", coords.join(","))
            }
            MeasureSpec::File(path) => write!(f, "file:{}", path.display()),
            MeasureSpec::Product(factors) => {
                let parts: Vec<String> = factors.iter().map(|m| m.to_string()).collect();
                write!(f, "{}", parts.join("*"))
            }
        }
    }
}

/// A family of planes: a parameter measure, or the Cantor-row family
/// `counterexample:m,r,depth,fill`.
#[derive(Debug, Clone, PartialEq)]
pub enum PlaneSource {
    Measure(MeasureSpec),
    Counterexample { cantor: CantorArg, fill_per_axis: usize },
}

impl PlaneSource {
    pub fn build(&self, d: usize, k: usize, budget: AtomBudget) -> fraclab_core::Result<PlaneSet> {
        match self {
            PlaneSource::Measure(m) => PlaneSet::new(d, k, m.build(budget)?),
            PlaneSource::Counterexample { cantor, fill_per_axis } => {
                counterexample_set(d, k, &cantor.0, *fill_per_axis, budget)
            }
        }
    }
}

impl FromStr for PlaneSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().strip_prefix("counterexample:") {
            Some(args) => {
                let (cantor, fill) = args
                    .rsplit_once(',')
                    .ok_or_else(|| format!("expected counterexample:m,r,depth,fill, got '{s}'"))?;
                Ok(PlaneSource::Counterexample {
                    cantor: cantor.parse()?,
                    fill_per_axis: parse_count(fill)?,
                })
            }
            None => Ok(PlaneSource::Measure(s.parse()?)),
        }
    }
}

impl fmt::Display for PlaneSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlaneSource::Measure(m) => m.fmt(f),
            PlaneSource::Counterexample { cantor, fill_per_axis } => {
                write!(f, "counterexample:{cantor},{fill_per_axis}")
            }
        }
    }
}

/// Inclusive range of shell indices, written `lo..hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JRange {
    pub lo: i32,
    pub hi: i32,
}

impl JRange {
    pub fn range(self) -> std::ops::RangeInclusive<i32> {
        self.lo..=self.hi
    }

    pub fn len(self) -> usize {
        self.range().count()
    }
}

impl FromStr for JRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s
            .split_once("..")
            .ok_or_else(|| format!("expected lo..hi, got '{s}'"))?;
        let b = b.strip_prefix('=').unwrap_or(b);
        let lo = a.trim().parse().map_err(|_| format!("bad shell index '{a}'"))?;
        let hi = b.trim().parse().map_err(|_| format!("bad shell index '{b}'"))?;
        if hi < lo {
            return Err(format!("empty shell range '{s}'"));
        }
        Ok(JRange { lo, hi })
    }
}

impl fmt::Display for JRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.lo, self.hi)
    }
}

/// Axis-aligned box, written `lo0,hi0,lo1,hi1,...` on the command line and
/// `[[lo0, hi0], ...]` in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BoxArg(pub Vec<(f64, f64)>);

impl FromStr for BoxArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let v = parse_list(s)?;
        if v.is_empty() || v.len() % 2 != 0 {
            return Err(format!("expected lo,hi pairs, got '{s}'"));
        }
        Ok(BoxArg(v.chunks(2).map(|c| (c[0], c[1])).collect()))
    }
}

macro_rules! serde_via_text {
    ($($t:ty),*) => {$(
        impl Serialize for $t {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let text = String::deserialize(d)?;
                text.parse().map_err(serde::de::Error::custom)
            }
        }
    )*};
}

serde_via_text!(CantorArg, MeasureSpec, PlaneSource, JRange);
