//! Optional TOML configuration files.
//!
//! A config file supplies values for flags the user left off the command
//! line; explicit flags always win. Keys are the long flag names. Unknown
//! keys are rejected so typos cannot silently change an experiment.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context};

pub(crate) struct ConfigFile {
    table: toml::Table,
    path: String,
    consumed: RefCell<BTreeSet<String>>,
}

impl ConfigFile {
    pub(crate) fn load(path: &Path) -> anyhow::Result<ConfigFile> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let table: toml::Table = text
            .parse()
            .with_context(|| format!("cannot parse config file {}", path.display()))?;
        Ok(ConfigFile {
            table,
            path: path.display().to_string(),
            consumed: RefCell::new(BTreeSet::new()),
        })
    }

    /// Looks the key up and marks it consumed (even when an explicit flag
    /// shadows it, the key is still a known one).
    fn value(&self, key: &str) -> Option<&toml::Value> {
        let value = self.table.get(key);
        if value.is_some() {
            self.consumed.borrow_mut().insert(key.to_string());
        }
        value
    }

    fn context(&self, key: &str) -> String {
        format!("config file {}: key `{key}`", self.path)
    }

    pub(crate) fn fill_usize(&self, slot: &mut Option<usize>, key: &str) -> anyhow::Result<()> {
        let Some(v) = self.value(key) else {
            return Ok(());
        };
        if slot.is_some() {
            return Ok(());
        }
        let raw = v
            .as_integer()
            .with_context(|| format!("{}: expected an integer", self.context(key)))?;
        *slot = Some(
            usize::try_from(raw).with_context(|| format!("{}: out of range", self.context(key)))?,
        );
        Ok(())
    }

    pub(crate) fn fill_u64(&self, slot: &mut Option<u64>, key: &str) -> anyhow::Result<()> {
        let Some(v) = self.value(key) else {
            return Ok(());
        };
        if slot.is_some() {
            return Ok(());
        }
        let raw = v
            .as_integer()
            .with_context(|| format!("{}: expected an integer", self.context(key)))?;
        *slot = Some(
            u64::try_from(raw).with_context(|| format!("{}: out of range", self.context(key)))?,
        );
        Ok(())
    }

    pub(crate) fn fill_f64(&self, slot: &mut Option<f64>, key: &str) -> anyhow::Result<()> {
        let Some(v) = self.value(key) else {
            return Ok(());
        };
        if slot.is_some() {
            return Ok(());
        }
        *slot = Some(match v {
            toml::Value::Float(f) => *f,
            toml::Value::Integer(i) => *i as f64,
            _ => bail!("{}: expected a number", self.context(key)),
        });
        Ok(())
    }

    /// Boolean switches: a flag given on the command line wins; otherwise
    /// the config value applies.
    pub(crate) fn fill_flag(&self, slot: &mut bool, key: &str) -> anyhow::Result<()> {
        let Some(v) = self.value(key) else {
            return Ok(());
        };
        if *slot {
            return Ok(());
        }
        *slot = v
            .as_bool()
            .with_context(|| format!("{}: expected a boolean", self.context(key)))?;
        Ok(())
    }

    /// List keys accept either an array or a bare integer (a one-point
    /// sweep), mirroring how the flags take `--k 64` and `--k 16,64`.
    pub(crate) fn fill_usize_list(
        &self,
        slot: &mut Option<Vec<usize>>,
        key: &str,
    ) -> anyhow::Result<()> {
        let Some(v) = self.value(key) else {
            return Ok(());
        };
        if slot.is_some() {
            return Ok(());
        }
        let to_usize = |raw: i64| {
            usize::try_from(raw).with_context(|| format!("{}: out of range", self.context(key)))
        };
        let out = if let Some(raw) = v.as_integer() {
            vec![to_usize(raw)?]
        } else {
            let arr = v.as_array().with_context(|| {
                format!("{}: expected an integer or an array", self.context(key))
            })?;
            let mut out = Vec::with_capacity(arr.len());
            for item in arr {
                let raw = item
                    .as_integer()
                    .with_context(|| format!("{}: expected integers", self.context(key)))?;
                out.push(to_usize(raw)?);
            }
            out
        };
        *slot = Some(out);
        Ok(())
    }

    /// Fills any `FromStr` value (variants, rules, regimes, paths).
    pub(crate) fn fill_parsed<T>(&self, slot: &mut Option<T>, key: &str) -> anyhow::Result<()>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        let Some(v) = self.value(key) else {
            return Ok(());
        };
        if slot.is_some() {
            return Ok(());
        }
        let raw = v
            .as_str()
            .with_context(|| format!("{}: expected a string", self.context(key)))?;
        match raw.parse() {
            Ok(parsed) => *slot = Some(parsed),
            Err(err) => bail!("{}: invalid value `{raw}`: {err}", self.context(key)),
        }
        Ok(())
    }

    /// Rejects keys no fill call asked about.
    pub(crate) fn finish(&self) -> anyhow::Result<()> {
        let consumed = self.consumed.borrow();
        let unknown: Vec<&str> = self
            .table
            .keys()
            .map(String::as_str)
            .filter(|k| !consumed.contains(*k))
            .collect();
        if !unknown.is_empty() {
            bail!(
                "config file {}: unknown key(s): {}",
                self.path,
                unknown.join(", ")
            );
        }
        Ok(())
    }
}
