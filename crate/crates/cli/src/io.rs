use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_path_to_error::Segment;
use sha2::{Digest, Sha256};

use crate::report::InputDigest;

/// Malformed input or an I/O failure; always exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

pub type InputResult<T> = Result<T, InputError>;

impl From<seqmeas::Error> for InputError {
    fn from(e: seqmeas::Error) -> Self {
        InputError(e.to_string())
    }
}

/// `outcomes[1].matrix` as the JSON pointer `/outcomes/1/matrix`.
fn pointer(path: &serde_path_to_error::Path) -> String {
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

/// Deserializes a JSON value, naming the failing location as a JSON pointer.
pub fn from_value<T: DeserializeOwned>(value: serde_json::Value, origin: &str) -> InputResult<T> {
    serde_path_to_error::deserialize(value)
        .map_err(|e| InputError(format!("{origin}: at {}: {}", pointer(e.path()), e.inner())))
}

/// A loaded input file with its SHA-256 digest.
pub struct Loaded {
    pub value: serde_json::Value,
    pub digest: InputDigest,
}

pub fn read_json(path: &Path) -> InputResult<Loaded> {
    let bytes = fs::read(path).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
    let value = serde_json::from_slice(&bytes)
        .map_err(|e| InputError(format!("{}: invalid JSON: {e}", path.display())))?;
    Ok(Loaded {
        value,
        digest: InputDigest {
            path: path.display().to_string(),
            sha256: format!("{:x}", Sha256::digest(&bytes)),
        },
    })
}

/// Reads and deserializes one input, recording its digest.
pub fn load<T: DeserializeOwned>(path: &Path, digests: &mut Vec<InputDigest>) -> InputResult<T> {
    let loaded = read_json(path)?;
    digests.push(loaded.digest);
    from_value(loaded.value, &path.display().to_string())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> InputResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| InputError(format!("{}: {e}", dir.display())))?;
    }
    let text = serde_json::to_string_pretty(value).map_err(|e| InputError(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| InputError(format!("{}: {e}", path.display())))
}

/// Writes artifacts under an optional output directory.
#[derive(Debug, Clone)]
pub struct Artifacts {
    dir: Option<PathBuf>,
    pub written: Vec<PathBuf>,
}

impl Artifacts {
    pub fn new(dir: Option<PathBuf>) -> Self {
        Self { dir, written: Vec::new() }
    }

    pub fn write<T: Serialize>(&mut self, name: &str, value: &T) -> InputResult<()> {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        let path = dir.join(name);
        write_json(&path, value)?;
        self.written.push(path);
        Ok(())
    }
}

/// `[feas]` table of the configuration file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeasConfig {
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub feas: FeasConfig,
}

pub fn read_config(path: &Path) -> InputResult<Config> {
    let text = fs::read_to_string(path).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| InputError(format!("{}: {e}", path.display())))
}
