//! Experiment configuration: command-line flags override the matching
//! `[command]` section of an optional `--config` file, which overrides
//! built-in defaults. Every resolved value is recorded so output files can
//! carry a hash of the full configuration.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use ini::{Ini, Properties};
use sha2::{Digest, Sha256};

pub struct ConfigFile {
    ini: Ini,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let ini = Ini::load_from_file(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        Ok(Self { ini })
    }

    fn section(&self, name: Option<&str>) -> Option<&Properties> {
        self.ini.section(name)
    }
}

/// Resolves the settings of one command and records them.
pub struct Resolver<'a> {
    command: &'static str,
    section: Option<&'a Properties>,
    record: BTreeMap<String, String>,
}

impl<'a> Resolver<'a> {
    pub fn new(command: &'static str, file: Option<&'a ConfigFile>) -> Self {
        Self {
            command,
            section: file.and_then(|f| f.section(Some(command))),
            record: BTreeMap::new(),
        }
    }

    /// Fails on section keys that no setting of this command consumed.
    pub fn finish(self) -> Result<Record> {
        if let Some(section) = self.section {
            for (k, _) in section.iter() {
                if !self.record.contains_key(k) {
                    bail!("unknown key `{k}` in [{}] of the config file", self.command);
                }
            }
        }
        Ok(Record {
            command: self.command,
            values: self.record,
        })
    }

    fn file_value<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        match self.section.and_then(|s| s.get(key)) {
            None => Ok(None),
            Some(raw) => raw
                .trim()
                .parse()
                .map(Some)
                .map_err(|e| anyhow!("config [{}] `{key}`: {e}", self.command)),
        }
    }

    pub fn get<T: FromStr + Display>(&mut self, key: &str, cli: Option<T>, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        let v = match cli {
            Some(v) => v,
            None => self.file_value(key)?.unwrap_or(default),
        };
        self.record.insert(key.into(), v.to_string());
        Ok(v)
    }

    pub fn get_opt<T: FromStr + Display>(&mut self, key: &str, cli: Option<T>) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        let v = match cli {
            Some(v) => Some(v),
            None => self.file_value(key)?,
        };
        self.record
            .insert(key.into(), v.as_ref().map_or_else(|| "none".into(), |v| v.to_string()));
        Ok(v)
    }

    pub fn flag(&mut self, key: &str, cli: bool) -> Result<bool> {
        let v = cli || self.file_value::<bool>(key)?.unwrap_or(false);
        self.record.insert(key.into(), v.to_string());
        Ok(v)
    }

    /// Records an input that is not a plain setting, such as a problem
    /// fingerprint.
    pub fn note(&mut self, key: &str, value: impl Display) {
        self.record.insert(key.into(), value.to_string());
    }
}

/// Global settings from the config file's unnamed section.
pub fn global<T: FromStr>(file: Option<&ConfigFile>, key: &str) -> Result<Option<T>>
where
    T::Err: Display,
{
    match file.and_then(|f| f.section(None::<&str>)).and_then(|s| s.get(key)) {
        None => Ok(None),
        Some(raw) => raw.trim().parse().map(Some).map_err(|e| anyhow!("config `{key}`: {e}")),
    }
}

pub struct Record {
    command: &'static str,
    values: BTreeMap<String, String>,
}

impl Record {
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.command.as_bytes());
        for (k, v) in &self.values {
            h.update(format!("\n{k}={v}").as_bytes());
        }
        let digest = h.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Writes result files into the output directory, each CSV prefixed by a
/// comment line with the configuration hash and seeds.
pub struct Output {
    dir: PathBuf,
    banner: String,
}

impl Output {
    pub fn new(dir: &Path, record: &Record, seeds: &str) -> Result<Self> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            banner: format!("# config_hash={}, seeds={seeds}", record.hash()),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn csv(&self, name: &str, body: impl FnOnce(&mut Vec<u8>) -> kolmo_core::Result<()>) -> Result<PathBuf> {
        let mut buf = Vec::new();
        writeln!(buf, "{}", self.banner)?;
        body(&mut buf)?;
        self.raw(name, &buf)
    }

    pub fn raw(&self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.path(name);
        std::fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }
}
