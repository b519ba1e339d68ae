//! Flat `key = value` text files with `#` comments.

use std::fmt::Display;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}: {message}")]
pub struct KvError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KvEntry {
    /// 1-based source line.
    pub line: usize,
    pub key: String,
    pub value: String,
}

impl KvEntry {
    fn error(&self, message: impl Into<String>) -> KvError {
        KvError {
            line: self.line,
            message: message.into(),
        }
    }

    pub fn parse<T: FromStr>(&self) -> Result<T, KvError>
    where
        T::Err: Display,
    {
        self.value
            .parse()
            .map_err(|e| self.error(format!("{}: bad value {:?}: {e}", self.key, self.value)))
    }

    /// Whitespace or comma separated list of numbers.
    pub fn parse_list(&self) -> Result<Vec<f64>, KvError> {
        self.value
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| self.error(format!("{}: bad number {s:?}", self.key)))
            })
            .collect()
    }

    pub fn parse_fixed<const N: usize>(&self) -> Result<[f64; N], KvError> {
        let v = self.parse_list()?;
        v.try_into()
            .map_err(|v: Vec<f64>| self.error(format!("{}: expected {N} numbers, got {}", self.key, v.len())))
    }

    pub fn parse_bool(&self) -> Result<bool, KvError> {
        match self.value.to_ascii_lowercase().as_str() {
            "true" | "yes" | "on" | "1" => Ok(true),
            "false" | "no" | "off" | "0" => Ok(false),
            _ => Err(self.error(format!("{}: expected true/false, got {:?}", self.key, self.value))),
        }
    }

    pub fn unknown(&self) -> KvError {
        self.error(format!("unknown key {:?}", self.key))
    }

    pub fn invalid(&self, why: impl Display) -> KvError {
        self.error(format!("{}: {why}", self.key))
    }
}

pub fn parse_kv(text: &str) -> Result<Vec<KvEntry>, KvError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(KvError {
                line: i + 1,
                message: format!("expected key = value, got {line:?}"),
            });
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(KvError {
                line: i + 1,
                message: "empty key".into(),
            });
        }
        out.push(KvEntry {
            line: i + 1,
            key: key.to_string(),
            value: value.trim().to_string(),
        });
    }
    Ok(out)
}
