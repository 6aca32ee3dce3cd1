//! Resolving configs, running one experiment, and writing its artifacts.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::ValueEnum;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub const VERSION: &str = concat!("fraclab ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Budget(String),
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Budget(_) => 3,
            Failure::Runtime(_) => 1,
        }
    }

    pub fn to_json(&self) -> String {
        let (kind, message) = match self {
            Failure::Validation(m) => ("validation", m),
            Failure::Budget(m) => ("budget", m),
            Failure::Runtime(m) => ("runtime", m),
        };
        serde_json::json!({ "error": { "kind": kind, "exit_code": self.exit_code(), "message": message } })
            .to_string()
    }
}

impl From<fraclab_core::Error> for Failure {
    fn from(e: fraclab_core::Error) -> Self {
        use fraclab_core::Error as E;
        match e {
            E::BudgetExceeded { .. } => Failure::Budget(e.to_string()),
            E::Degenerate(_) | E::Io(_) | E::Csv(_) => Failure::Runtime(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

pub fn invalid(message: impl Into<String>) -> Failure {
    Failure::Validation(message.into())
}

/// A result that can be written as JSON or as a CSV table.
pub trait Report: Serialize {
    /// `Some` for verifier commands.
    fn verdict(&self) -> Option<bool> {
        None
    }

    fn write_csv(&self, out: &mut dyn Write) -> Result<(), Failure>;
}

/// One experiment kind. The resolved config is the struct itself.
pub trait Experiment: Serialize + DeserializeOwned + Default {
    const NAME: &'static str;
    const PRESETS: &'static [&'static str];
    type Output: Report;

    fn preset(name: &str) -> Option<Self>;

    /// Cheap checks run before any computation.
    fn validate(&self) -> Result<(), Failure>;

    fn run(&self) -> Result<Self::Output, Failure>;
}

#[derive(Debug, Clone)]
pub struct Globals {
    pub config: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub format: Format,
}

/// Overlay `top` onto `base` key by key, recursing into objects. With
/// `skip_null`, null entries of `top` leave `base` untouched.
fn merge(base: &mut Value, top: Value, skip_null: bool) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (key, value) in t {
                if skip_null && value.is_null() {
                    continue;
                }
                match b.get_mut(&key) {
                    Some(slot) if slot.is_object() && value.is_object() => merge(slot, value, skip_null),
                    _ => {
                        b.insert(key, value);
                    }
                }
            }
        }
        (slot, value) => {
            if !(skip_null && value.is_null()) {
                *slot = value;
            }
        }
    }
}

fn read_config_file(path: &Path, command: &str, globals: &mut Globals) -> Result<Map<String, Value>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| invalid(format!("config {}: {e}", path.display())))?;
    let Value::Object(mut map) = value else {
        return Err(invalid("config file must hold a JSON object"));
    };
    if let Some(c) = map.remove("command") {
        if c.as_str() != Some(command) {
            return Err(invalid(format!("config is for command {c}, not {command}")));
        }
    }
    if let Some(o) = map.remove("output") {
        let o = o.as_str().ok_or_else(|| invalid("config key output must be a string"))?;
        globals.output = Some(PathBuf::from(o));
    }
    if let Some(f) = map.remove("format") {
        globals.format = serde_json::from_value(f).map_err(|e| invalid(format!("config key format: {e}")))?;
    }
    Ok(map)
}

/// Defaults, then the preset, then explicit flags, then the config file.
pub fn resolve<E: Experiment>(
    preset: Option<&str>,
    flags: &impl Serialize,
    globals: &mut Globals,
) -> Result<E, Failure> {
    let base = match preset {
        Some(name) => E::preset(name).ok_or_else(|| {
            invalid(format!("unknown preset '{name}' for {}; known: {}", E::NAME, E::PRESETS.join(", ")))
        })?,
        None => E::default(),
    };
    let mut value = serde_json::to_value(&base).map_err(|e| Failure::Runtime(e.to_string()))?;
    let flags = serde_json::to_value(flags).map_err(|e| Failure::Runtime(e.to_string()))?;
    merge(&mut value, flags, true);
    if let Some(path) = globals.config.clone() {
        let file = read_config_file(&path, E::NAME, globals)?;
        merge(&mut value, Value::Object(file), false);
    }
    serde_json::from_value(value).map_err(|e| invalid(format!("{}: {e}", E::NAME)))
}

#[derive(Serialize)]
struct Envelope<'a, C, R> {
    command: &'a str,
    version: &'a str,
    config: &'a C,
    verdict: Option<&'a str>,
    result: &'a R,
}

fn verdict_text(v: Option<bool>) -> Option<&'static str> {
    v.map(|p| if p { "pass" } else { "fail" })
}

fn render<E: Experiment>(config: &E, output: &E::Output, format: Format) -> Result<Vec<u8>, Failure> {
    let verdict = verdict_text(output.verdict());
    match format {
        Format::Json => {
            let env = Envelope {
                command: E::NAME,
                version: VERSION,
                config,
                verdict,
                result: output,
            };
            let mut text = serde_json::to_vec_pretty(&env).map_err(|e| Failure::Runtime(e.to_string()))?;
            text.push(b'\n');
            Ok(text)
        }
        Format::Csv => {
            let mut buf = Vec::new();
            let config_json = serde_json::to_string(config).map_err(|e| Failure::Runtime(e.to_string()))?;
            let io = |e: std::io::Error| Failure::Runtime(e.to_string());
            writeln!(buf, "# {VERSION} {}", E::NAME).map_err(io)?;
            writeln!(buf, "# config {config_json}").map_err(io)?;
            if let Some(v) = verdict {
                writeln!(buf, "# verdict {v}").map_err(io)?;
            }
            output.write_csv(&mut buf)?;
            Ok(buf)
        }
    }
}

/// Write via a temporary file in the target directory and rename into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::Runtime(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Sidecar path holding timestamps, kept out of the result file so results
/// stay byte-identical between runs.
pub fn meta_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

fn unix_ms(t: SystemTime) -> u128 {
    t.duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

/// Resolve, validate, run and write one experiment; returns its verdict.
pub fn execute<E: Experiment>(
    preset: Option<&str>,
    flags: &impl Serialize,
    mut globals: Globals,
) -> Result<Option<bool>, Failure> {
    let config: E = resolve(preset, flags, &mut globals)?;
    config.validate()?;
    let started = SystemTime::now();
    let clock = Instant::now();
    let output = config.run()?;
    let bytes = render(&config, &output, globals.format)?;
    match &globals.output {
        Some(path) => {
            write_atomic(path, &bytes)?;
            let meta = serde_json::json!({
                "command": E::NAME,
                "version": VERSION,
                "started_unix_ms": unix_ms(started),
                "elapsed_ms": clock.elapsed().as_millis(),
                "threads": rayon::current_num_threads(),
            });
            let mut meta = serde_json::to_vec_pretty(&meta).map_err(|e| Failure::Runtime(e.to_string()))?;
            meta.push(b'\n');
            write_atomic(&meta_path(path), &meta)?;
        }
        None => std::io::stdout()
            .write_all(&bytes)
            .map_err(|e| Failure::Runtime(e.to_string()))?,
    }
    Ok(output.verdict())
}

/// CSV writer over a borrowed sink.
pub fn csv_writer(out: &mut dyn Write) -> csv::Writer<&mut dyn Write> {
    csv::Writer::from_writer(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn merge_overlays_and_skips_nulls() {
        let mut base = json!({"a": 1, "b": {"c": 2, "d": 3}, "e": [1, 2]});
        merge(&mut base, json!({"a": null, "b": {"c": 5}, "e": [9]}), true);
        assert_eq!(base, json!({"a": 1, "b": {"c": 5, "d": 3}, "e": [9]}));
        merge(&mut base, json!({"a": null}), false);
        assert_eq!(base["a"], Value::Null);
    }

    #[test]
    fn meta_path_appends_suffix() {
        assert_eq!(meta_path(Path::new("out/r.json")), PathBuf::from("out/r.json.meta.json"));
    }
}
