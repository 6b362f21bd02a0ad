use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::Value;

/// Failure of a CLI run, mapped to a process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Malformed input; nothing is computed or written.
    Invalid(String),
    Core(qnm_core::Error),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Core(e) if e.is_too_large() => 3,
            CliError::Core(qnm_core::Error::NotConvergent(_)) => 4,
            CliError::Core(_) => 2,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Invalid(m) => write!(f, "invalid scenario: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<qnm_core::Error> for CliError {
    fn from(e: qnm_core::Error) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Invalid(msg.into())
}

/// Deserialize a payload section, reporting schema errors as validation
/// failures.
pub fn parse<T: for<'de> Deserialize<'de>>(what: &str, v: &Value) -> CliResult<T> {
    serde_json::from_value(v.clone()).map_err(|e| invalid(format!("{what}: {e}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(format!("unknown format `{other}` (json|csv)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Bound,
    Witness,
    Protocol,
    Decompose,
    Lightcone,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Bound => "bound",
            Kind::Witness => "witness",
            Kind::Protocol => "protocol",
            Kind::Decompose => "decompose",
            Kind::Lightcone => "lightcone",
        }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub kind: Kind,
    pub payload: Value,
    #[serde(default)]
    pub output: OutputSpec,
}

impl Scenario {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        let s: Scenario = serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        if !s.payload.is_object() {
            return Err(invalid("payload must be a JSON object"));
        }
        Ok(s)
    }
}

/// `key=start:stop:step`, stop inclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub key: String,
    pub values: Vec<Value>,
}

impl std::str::FromStr for Sweep {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (key, range) = s.split_once('=').ok_or("expected key=start:stop:step")?;
        let parts: Vec<&str> = range.split(':').collect();
        let [start, stop, step] = parts[..] else {
            return Err("expected start:stop:step".into());
        };
        if key.trim().is_empty() {
            return Err("empty sweep key".into());
        }
        let ints: Option<Vec<i64>> = [start, stop, step].iter().map(|p| p.trim().parse().ok()).collect();
        let values = match ints.as_deref() {
            Some(&[a, b, d]) => {
                if d <= 0 || b < a {
                    return Err("need step > 0 and stop >= start".into());
                }
                (0..).map(|i| a + i * d).take_while(|&x| x <= b).map(Value::from).collect()
            }
            _ => {
                let f: Vec<f64> = [start, stop, step]
                    .iter()
                    .map(|p| p.trim().parse::<f64>().map_err(|_| format!("bad number `{p}`")))
                    .collect::<Result<_, _>>()?;
                let (a, b, d) = (f[0], f[1], f[2]);
                if !(d > 0.0 && b >= a && a.is_finite() && b.is_finite()) {
                    return Err("need finite bounds, step > 0 and stop >= start".into());
                }
                let n = ((b - a) / d + 1e-9).floor() as usize + 1;
                if n > 100_000 {
                    return Err("sweep grid too large".into());
                }
                (0..n).map(|i| qnm_core::report::json_f64(a + i as f64 * d)).collect()
            }
        };
        Ok(Sweep { key: key.trim().to_string(), values })
    }
}

/// Set a (dotted) key inside a JSON object, creating objects on the way.
pub fn set_path(root: &mut Value, key: &str, value: Value) -> CliResult<()> {
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = cur.as_object_mut().ok_or_else(|| invalid(format!("`{key}` does not address an object field")))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}
