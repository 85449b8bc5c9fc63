//! Flat `key = value` run configuration. Flags override file values; every
//! value a command actually uses is recorded and written next to its outputs.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, Context, Result};

use seqwalk::hierarchy::read_manifest;

/// A missing mandatory setting; reported as a usage error.
#[derive(Debug)]
pub struct UsageError(pub String);

impl Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub struct Settings {
    file: BTreeMap<String, String>,
    resolved: BTreeMap<String, String>,
}

impl Settings {
    pub fn load(command: &str, path: Option<&Path>) -> Result<Self> {
        let file = match path {
            Some(p) => {
                read_manifest(p).with_context(|| format!("reading config {}", p.display()))?
            }
            None => BTreeMap::new(),
        };
        let mut resolved = BTreeMap::new();
        resolved.insert("command".to_owned(), command.to_owned());
        Ok(Settings { file, resolved })
    }

    fn file_value<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        self.file
            .get(key)
            .map(|raw| {
                raw.parse::<T>()
                    .map_err(|e| anyhow!("config key `{key}`: cannot parse `{raw}`: {e}"))
            })
            .transpose()
    }

    fn record(&mut self, key: &str, value: String) {
        self.resolved.insert(key.to_owned(), value);
    }

    /// Overwrites the recorded value, e.g. with a canonical spelling.
    pub fn set(&mut self, key: &str, value: impl Display) {
        self.record(key, value.to_string());
    }

    /// Flag, then config file, then `default`.
    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let value = match flag {
            Some(v) => v,
            None => self.file_value(key)?.unwrap_or(default),
        };
        self.record(key, value.to_string());
        Ok(value)
    }

    /// Like [`Settings::get`] but with no default.
    pub fn require<T>(&mut self, key: &str, flag: Option<T>) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let value = match flag {
            Some(v) => v,
            None => self
                .file_value(key)?
                .ok_or_else(|| UsageError(format!("`--{}` is required", key.replace('_', "-"))))?,
        };
        self.record(key, value.to_string());
        Ok(value)
    }

    pub fn path(&mut self, key: &str, flag: Option<PathBuf>) -> Result<PathBuf> {
        let flag = flag.map(|p| p.display().to_string());
        Ok(PathBuf::from(self.require::<String>(key, flag)?))
    }

    /// A seed from `--seed`, the stage key (e.g. `split_seed`) or `seed`.
    pub fn seed(&mut self, stage_key: &str, flag: Option<u64>) -> Result<u64> {
        let value = match flag {
            Some(v) => v,
            None => match self.file_value::<u64>(stage_key)? {
                Some(v) => v,
                None => self.file_value::<u64>("seed")?.ok_or_else(|| {
                    UsageError("`--seed` is required for randomized commands".to_owned())
                })?,
            },
        };
        self.record(stage_key, value.to_string());
        Ok(value)
    }

    pub fn render(&self) -> String {
        let mut out = String::from("# seqwalk run config\n");
        for (k, v) in &self.resolved {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    /// Writes `<file>.conf` beside an output file.
    pub fn write_beside(&self, output: &Path) -> Result<()> {
        let mut name = output.as_os_str().to_owned();
        name.push(".conf");
        write(Path::new(&name), &self.render())
    }

    /// Writes `run.conf` inside an output directory.
    pub fn write_into(&self, dir: &Path) -> Result<()> {
        write(&dir.join("run.conf"), &self.render())
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
