//! Pipeline plumbing: typed failures for exit codes, the flat key=value
//! config, run manifests, and atomic artifact writes.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

/// Failures with dedicated exit codes: 2 for a missing upstream artifact,
/// 3 for a parameter outside its documented range.
#[derive(Debug)]
pub enum Fail {
    MissingArtifact(PathBuf),
    BadParam(String),
}

impl fmt::Display for Fail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fail::MissingArtifact(path) => {
                write!(f, "missing upstream artifact: expected {}", path.display())
            }
            Fail::BadParam(msg) => write!(f, "parameter out of range: {msg}"),
        }
    }
}

impl std::error::Error for Fail {}

impl Fail {
    pub fn exit_code(&self) -> i32 {
        match self {
            Fail::MissingArtifact(_) => 2,
            Fail::BadParam(_) => 3,
        }
    }
}

pub fn missing(path: impl Into<PathBuf>) -> anyhow::Error {
    Fail::MissingArtifact(path.into()).into()
}

pub fn bad_param(msg: impl Into<String>) -> anyhow::Error {
    Fail::BadParam(msg.into()).into()
}

/// Maps library errors onto exit-code faults where one applies.
pub fn lift(err: glossgraph::Error) -> anyhow::Error {
    match err {
        glossgraph::Error::InvalidParameter(msg) => bad_param(msg),
        other => anyhow::Error::new(other),
    }
}

/// Reads a stage input, turning absence into the missing-artifact fault.
pub fn read_input(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(missing(path));
    }
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Writes through a temp file in the same directory, then renames over the
/// target, so a crashed stage never leaves a half-written artifact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path)
        .with_context(|| format!("renaming {} into place", tmp.display()))?;
    Ok(())
}

pub fn digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let mut out = String::from("sha256:");
    for byte in hasher.finalize() {
        let _ = write!(out, "{byte:02x}");
    }
    out
}

/// Every configurable flag, across all subcommands. A config file may only
/// use these keys; a shared file can feed several stages at once.
pub const KNOWN_KEYS: &[&str] = &[
    "attempts-factor",
    "bin-width",
    "coverage",
    "dates",
    "degeneracy",
    "exact",
    "filter-length",
    "full",
    "glosses",
    "k",
    "max-depth",
    "max-walk-length",
    "memory-cap",
    "pos",
    "probe-cap",
    "profile-starts",
    "prune",
    "randomized-seeds",
    "refine-length",
    "refine-threshold",
    "sample",
    "scope",
    "seed",
    "swap-factor",
    "threads",
    "threshold",
    "top",
    "trials",
    "word-lists",
    "words",
];

/// Flat key=value config. Flags beat config values; config values beat
/// built-in defaults.
#[derive(Debug, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Config> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let text = read_input(path)?;
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(bad_param(format!(
                    "{}:{}: expected key=value, got {line:?}",
                    path.display(),
                    lineno + 1
                )));
            };
            let key = key.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(bad_param(format!(
                    "{}:{}: unknown config key {key:?}",
                    path.display(),
                    lineno + 1
                )));
            }
            values.insert(key.to_string(), value.trim().to_string());
        }
        Ok(Config { values })
    }

    /// Flag value if given, else the parsed config value, else None.
    pub fn resolve<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        debug_assert!(KNOWN_KEYS.contains(&key), "unlisted config key {key}");
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| bad_param(format!("config key {key}={raw}: {e}"))),
        }
    }

    /// Boolean flags: a set flag wins, otherwise the config value.
    pub fn resolve_flag(&self, key: &str, flag: bool) -> Result<bool> {
        if flag {
            return Ok(true);
        }
        Ok(self.resolve::<bool>(key, None)?.unwrap_or(false))
    }
}

/// The run manifest in the working directory: tool version plus, per stage,
/// its parameters and the digests of inputs and outputs. No clocks and no
/// absolute paths, so identical runs produce identical manifests.
pub struct Manifest {
    dir: PathBuf,
    root: serde_json::Map<String, serde_json::Value>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

impl Manifest {
    pub fn load(dir: &Path) -> Result<Manifest> {
        let path = dir.join(MANIFEST_NAME);
        let root = if path.exists() {
            let text = fs::read_to_string(&path)
                .with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", path.display()))?
        } else {
            let mut fresh = serde_json::Map::new();
            fresh.insert(
                "tool".into(),
                format!("glossgraph {}", env!("CARGO_PKG_VERSION")).into(),
            );
            fresh.insert("stages".into(), serde_json::Map::new().into());
            fresh
        };
        Ok(Manifest {
            dir: dir.to_path_buf(),
            root,
        })
    }

    pub fn record_stage(
        &mut self,
        stage: &str,
        params: serde_json::Value,
        inputs: BTreeMap<String, String>,
        outputs: BTreeMap<String, String>,
    ) {
        let entry = serde_json::json!({
            "params": params,
            "inputs": inputs,
            "outputs": outputs,
        });
        self.root
            .entry("stages")
            .or_insert_with(|| serde_json::Map::new().into())
            .as_object_mut()
            .expect("stages object")
            .insert(stage.to_string(), entry);
    }

    pub fn save(&self) -> Result<()> {
        let text = serde_json::to_string_pretty(&serde_json::Value::Object(self.root.clone()))?;
        write_atomic(&self.dir.join(MANIFEST_NAME), format!("{text}\n").as_bytes())
    }
}

/// Tracks artifacts a stage writes so the manifest can record their digests.
pub struct StageWriter {
    dir: PathBuf,
    outputs: BTreeMap<String, String>,
}

impl StageWriter {
    pub fn new(dir: &Path) -> StageWriter {
        StageWriter {
            dir: dir.to_path_buf(),
            outputs: BTreeMap::new(),
        }
    }

    /// Writes `name` under the working directory and remembers its digest.
    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        write_atomic(&self.dir.join(name), contents.as_bytes())?;
        self.outputs.insert(name.to_string(), digest(contents.as_bytes()));
        Ok(())
    }

    pub fn into_outputs(self) -> BTreeMap<String, String> {
        self.outputs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Ordered key/value summary printed to stdout at the end of a stage.
#[derive(Debug, Default)]
pub struct Summary {
    entries: Vec<(String, String)>,
}

impl Summary {
    pub fn push(&mut self, key: &str, value: impl fmt::Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn print(&self, format: Format) {
        match format {
            Format::Csv => {
                println!("key,value");
                for (k, v) in &self.entries {
                    println!("{k},{v}");
                }
            }
            Format::Json => {
                let mut map = serde_json::Map::new();
                for (k, v) in &self.entries {
                    map.insert(k.clone(), v.clone().into());
                }
                println!(
                    "{}",
                    serde_json::to_string_pretty(&serde_json::Value::Object(map))
                        .expect("summary json")
                );
            }
        }
    }
}
