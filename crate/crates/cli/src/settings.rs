//! Plain-text `key = value` config files. Keys mirror the long flag names
//! (`seed`, `reps`, `n`, `delta`, `metric`, `summary`, `layers`, `grid`,
//! `out`, `format`, `jobs`, ...). `#` starts a comment. Flags win over file
//! values.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

#[derive(Debug, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value", lineno + 1))?;
            let key = key.trim().trim_start_matches("--").replace('_', "-");
            if values.insert(key.clone(), value.trim().to_string()).is_some() {
                bail!("line {}: duplicate key {key:?}", lineno + 1);
            }
        }
        Ok(Self { values })
    }

    /// The flag value if given, else the parsed file value for `key`.
    pub fn pick<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.values
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| anyhow!("config key {key:?} = {v:?}: {e}"))
            })
            .transpose()
    }

    pub fn flag(&self, flag: bool, key: &str) -> Result<bool> {
        Ok(flag || self.pick::<bool>(None, key)?.unwrap_or(false))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let f = ConfigFile::parse("seed = 5\n# comment\nreps=3  # trailing\nn_big = 10\n").unwrap();
        assert_eq!(f.pick::<u64>(None, "seed").unwrap(), Some(5));
        assert_eq!(f.pick::<u64>(Some(9), "seed").unwrap(), Some(9));
        assert_eq!(f.pick::<usize>(None, "reps").unwrap(), Some(3));
        assert_eq!(f.pick::<usize>(None, "n-big").unwrap(), Some(10));
        assert_eq!(f.pick::<usize>(None, "jobs").unwrap(), None);
    }

    #[test]
    fn malformed_lines() {
        assert!(ConfigFile::parse("seed 5").is_err());
        assert!(ConfigFile::parse("seed=1\nseed=2").is_err());
        let f = ConfigFile::parse("seed = abc").unwrap();
        assert!(f.pick::<u64>(None, "seed").is_err());
    }
}
