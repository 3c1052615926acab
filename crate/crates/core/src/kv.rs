//! Flat `key = value` text format shared by scenario and config files.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are unique.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, thiserror::Error)]
pub enum KvError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("key `{key}`: cannot parse {value:?}: {reason}")]
    Value {
        key: String,
        value: String,
        reason: String,
    },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KvMap {
    entries: BTreeMap<String, String>,
}

impl KvMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self, KvError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(KvError::Syntax {
                    line: idx + 1,
                    text: raw.to_string(),
                });
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(KvError::Syntax {
                    line: idx + 1,
                    text: raw.to_string(),
                });
            }
            if entries
                .insert(key.to_string(), value.trim().to_string())
                .is_some()
            {
                return Err(KvError::Duplicate {
                    line: idx + 1,
                    key: key.to_string(),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn insert(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.insert(key.into(), value.to_string());
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get<T>(&self, key: &str) -> Result<Option<T>, KvError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(value) => value.parse().map(Some).map_err(|e: T::Err| KvError::Value {
                key: key.to_string(),
                value: value.clone(),
                reason: e.to_string(),
            }),
        }
    }

    pub fn get_or<T>(&self, key: &str, default: T) -> Result<T, KvError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Fails on the first key not in `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<(), KvError> {
        match self.keys().find(|k| !allowed.contains(k)) {
            Some(k) => Err(KvError::UnknownKey(k.to_string())),
            None => Ok(()),
        }
    }

    /// Entries under `prefix.`, with the prefix stripped.
    pub fn section(&self, prefix: &str) -> KvMap {
        let head = format!("{prefix}.");
        KvMap {
            entries: self
                .entries
                .iter()
                .filter_map(|(k, v)| k.strip_prefix(&head).map(|rest| (rest.to_string(), v.clone())))
                .collect(),
        }
    }

    /// Entries without a `.` in their key.
    pub fn top_level(&self) -> KvMap {
        KvMap {
            entries: self
                .entries
                .iter()
                .filter(|(k, _)| !k.contains('.'))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn merge(&mut self, other: &KvMap) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }
}

impl fmt::Display for KvMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_values() {
        let kv = KvMap::parse("# header\nseed = 7\n\nname=  a b \n").unwrap();
        assert_eq!(kv.get::<u64>("seed").unwrap(), Some(7));
        assert_eq!(kv.get_str("name"), Some("a b"));
        assert_eq!(kv.get::<u64>("missing").unwrap(), None);
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(matches!(
            KvMap::parse("a = 1\nnonsense").unwrap_err(),
            KvError::Syntax { line: 2, .. }
        ));
        assert!(matches!(
            KvMap::parse("a = 1\na = 2").unwrap_err(),
            KvError::Duplicate { line: 2, .. }
        ));
        let kv = KvMap::parse("a = x").unwrap();
        assert!(kv.get::<f64>("a").is_err());
        assert!(kv.check_keys(&["b"]).is_err());
    }

    #[test]
    fn display_round_trips() {
        let kv = KvMap::parse("b = 2\na = 1.5").unwrap();
        assert_eq!(KvMap::parse(&kv.to_string()).unwrap(), kv);
    }
}
