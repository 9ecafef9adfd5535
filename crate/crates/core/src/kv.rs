//! Line-oriented `key = value` text used by config, range and result files.
//!
//! `#` starts a comment. Lines of the form `[name]` open a section; only
//! the sections a reader asks for are returned.

use std::str::FromStr;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KvError {
    #[error("line {line}: expected `key = value`, found `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: invalid value for `{key}`: {reason}")]
    Value {
        line: usize,
        key: String,
        reason: String,
    },
    #[error("missing key `{0}`")]
    Missing(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

/// Entries of the untitled leading part and of sections named in `sections`.
pub fn parse(text: &str, sections: &[&str]) -> Result<Vec<Entry>, KvError> {
    let mut out: Vec<Entry> = Vec::new();
    let mut active = true;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            active = sections.contains(&name.trim());
            continue;
        }
        if !active {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| KvError::Syntax {
            line,
            text: content.to_string(),
        })?;
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(KvError::Syntax {
                line,
                text: content.to_string(),
            });
        }
        if out.iter().any(|e| e.key == key) {
            return Err(KvError::Duplicate { line, key });
        }
        out.push(Entry {
            line,
            key,
            value: value.trim().to_string(),
        });
    }
    Ok(out)
}

impl Entry {
    pub fn parse<T: FromStr>(&self) -> Result<T, KvError>
    where
        T::Err: std::fmt::Display,
    {
        self.value.parse().map_err(|e: T::Err| KvError::Value {
            line: self.line,
            key: self.key.clone(),
            reason: e.to_string(),
        })
    }

    /// `a, b`, optionally wrapped in parentheses.
    pub fn parse_pair<T: FromStr>(&self) -> Result<(T, T), KvError>
    where
        T::Err: std::fmt::Display,
    {
        let bad = |reason: String| KvError::Value {
            line: self.line,
            key: self.key.clone(),
            reason,
        };
        let inner = self
            .value
            .trim()
            .trim_start_matches('(')
            .trim_end_matches(')');
        let (a, b) = inner
            .split_once(',')
            .ok_or_else(|| bad("expected two comma-separated values".into()))?;
        let a = a.trim().parse().map_err(|e: T::Err| bad(e.to_string()))?;
        let b = b.trim().parse().map_err(|e: T::Err| bad(e.to_string()))?;
        Ok((a, b))
    }

    pub fn invalid(&self, reason: impl Into<String>) -> KvError {
        KvError::Value {
            line: self.line,
            key: self.key.clone(),
            reason: reason.into(),
        }
    }

    pub fn unknown(&self) -> KvError {
        KvError::UnknownKey {
            line: self.line,
            key: self.key.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_comments() {
        let text = "a = 1 # one\n[x]\nb = 2\n[y]\nc = (3, 4)\n";
        let all = parse(text, &["x", "y"]).unwrap();
        assert_eq!(all.len(), 3);
        assert_eq!(all[2].parse_pair::<i32>().unwrap(), (3, 4));
        let only_y = parse(text, &["y"]).unwrap();
        assert_eq!(
            only_y.iter().map(|e| e.key.as_str()).collect::<Vec<_>>(),
            ["a", "c"]
        );
    }

    #[test]
    fn errors() {
        assert!(matches!(
            parse("nonsense", &[]),
            Err(KvError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            parse("a = 1\na = 2", &[]),
            Err(KvError::Duplicate { line: 2, .. })
        ));
        let e = &parse("n = x", &[]).unwrap()[0];
        assert!(e.parse::<u32>().is_err());
    }
}
