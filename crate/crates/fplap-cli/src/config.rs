//! Flat key-value configuration files with `[section]` headers.
//!
//! Grammar, line by line: blank lines and lines starting with `#` or `;` are
//! skipped; `[name]` opens a section; `key = value` assigns inside the current
//! section. Keys are unique within a section and sections unique within a
//! file. Every diagnostic carries the file path and line number.
//!
//! Readers mark the keys they consume; [`ConfigFile::reject_unknown`] then
//! turns leftovers (typos, keys for a different command) into errors.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use fplap::{Error, Result};

#[derive(Debug)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Debug)]
pub struct ConfigFile {
    path: String,
    sections: BTreeMap<String, (usize, BTreeMap<String, Entry>)>,
    used: RefCell<BTreeSet<(String, String)>>,
    opened: RefCell<BTreeSet<String>>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let mut sections: BTreeMap<String, (usize, BTreeMap<String, Entry>)> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Config(format!("{path}:{line_no}: unterminated section header '{line}'")))?
                    .trim();
                if name.is_empty() {
                    return Err(Error::Config(format!("{path}:{line_no}: empty section name")));
                }
                if let Some((first, _)) = sections.get(name) {
                    return Err(Error::Config(format!(
                        "{path}:{line_no}: section [{name}] already opened at line {first}"
                    )));
                }
                sections.insert(name.to_string(), (line_no, BTreeMap::new()));
                current = Some(name.to_string());
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "{path}:{line_no}: expected 'key = value' or '[section]', got '{line}'"
                )));
            };
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(Error::Config(format!("{path}:{line_no}: empty key")));
            }
            if value.is_empty() {
                return Err(Error::Config(format!("{path}:{line_no}: key '{key}' has an empty value")));
            }
            let Some(section) = &current else {
                return Err(Error::Config(format!(
                    "{path}:{line_no}: key '{key}' appears before any [section] header"
                )));
            };
            let map = &mut sections.get_mut(section).unwrap().1;
            if let Some(prev) = map.get(key) {
                return Err(Error::Config(format!(
                    "{path}:{line_no}: key '{key}' already set at line {} in [{section}]",
                    prev.line
                )));
            }
            map.insert(
                key.to_string(),
                Entry {
                    value: value.to_string(),
                    line: line_no,
                },
            );
        }
        Ok(ConfigFile {
            path: path.to_string(),
            sections,
            used: RefCell::new(BTreeSet::new()),
            opened: RefCell::new(BTreeSet::new()),
        })
    }

    pub fn section(&self, name: &str) -> Option<Section<'_>> {
        self.sections.get(name).map(|(_, map)| {
            self.opened.borrow_mut().insert(name.to_string());
            Section {
                file: self,
                name: name.to_string(),
                map,
            }
        })
    }

    pub fn require_section(&self, name: &str) -> Result<Section<'_>> {
        self.section(name)
            .ok_or_else(|| Error::Config(format!("{}: missing required section [{name}]", self.path)))
    }

    /// Error out on any section or key that no reader consumed.
    pub fn reject_unknown(&self) -> Result<()> {
        let used = self.used.borrow();
        let opened = self.opened.borrow();
        let mut complaints = Vec::new();
        for (section, (line, map)) in &self.sections {
            if !opened.contains(section) {
                complaints.push(format!(
                    "{}:{line}: section [{section}] is not used by this command",
                    self.path
                ));
                continue;
            }
            for (key, entry) in map {
                if !used.contains(&(section.clone(), key.clone())) {
                    complaints.push(format!(
                        "{}:{}: unrecognized key '{key}' in [{section}]",
                        self.path, entry.line
                    ));
                }
            }
        }
        if complaints.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(complaints.join("\n")))
        }
    }
}

pub struct Section<'a> {
    file: &'a ConfigFile,
    name: String,
    map: &'a BTreeMap<String, Entry>,
}

impl<'a> Section<'a> {
    fn mark(&self, key: &str) {
        self.file
            .used
            .borrow_mut()
            .insert((self.name.clone(), key.to_string()));
    }

    fn where_is(&self, key: &str) -> String {
        match self.map.get(key) {
            Some(e) => format!("{}:{}", self.file.path, e.line),
            None => self.file.path.clone(),
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.mark(key);
        self.map.get(key).map(|e| e.value.as_str())
    }

    pub fn require_str(&self, key: &str) -> Result<&str> {
        self.raw(key).ok_or_else(|| {
            Error::Config(format!(
                "{}: missing key '{key}' in [{}]",
                self.file.path, self.name
            ))
        })
    }

    pub fn get<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|e| {
                Error::Config(format!(
                    "{}: [{}] {key} = '{v}': {e}",
                    self.where_is(key),
                    self.name
                ))
            }),
        }
    }

    pub fn get_or<T>(&self, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T>(&self, key: &str) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.require_str(key)?;
        Ok(self.get(key)?.unwrap())
    }

    /// Whitespace- or comma-separated list of numbers.
    pub fn get_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        let Some(v) = self.raw(key) else {
            return Ok(None);
        };
        let mut out = Vec::new();
        for tok in v.split(|c: char| c == ',' || c.is_whitespace()) {
            if tok.is_empty() {
                continue;
            }
            let x: f64 = tok.parse().map_err(|e| {
                Error::Config(format!(
                    "{}: [{}] {key}: '{tok}' is not a number ({e})",
                    self.where_is(key),
                    self.name
                ))
            })?;
            out.push(x);
        }
        if out.is_empty() {
            return Err(Error::Config(format!(
                "{}: [{}] {key} lists no values",
                self.where_is(key),
                self.name
            )));
        }
        Ok(Some(out))
    }

    pub fn require_list(&self, key: &str) -> Result<Vec<f64>> {
        self.require_str(key)?;
        Ok(self.get_list(key)?.unwrap())
    }

    pub fn get_bool(&self, key: &str, default: bool) -> Result<bool> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => match v.to_ascii_lowercase().as_str() {
                "true" | "yes" | "on" | "1" => Ok(true),
                "false" | "no" | "off" | "0" => Ok(false),
                _ => Err(Error::Config(format!(
                    "{}: [{}] {key} = '{v}': expected true/false",
                    self.where_is(key),
                    self.name
                ))),
            },
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Location string for error messages about this section's key.
    pub fn at(&self, key: &str) -> String {
        format!("{}: [{}] {key}", self.where_is(key), self.name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_values() {
        let cfg = ConfigFile::parse(
            "# comment\n[operator]\nd = 1\np = 3.0\n\n[sweep]\nabscissae = 0.2, 0.1 0.05\n",
            "t.conf",
        )
        .unwrap();
        let op = cfg.require_section("operator").unwrap();
        assert_eq!(op.require::<usize>("d").unwrap(), 1);
        assert_eq!(op.require::<f64>("p").unwrap(), 3.0);
        let sw = cfg.require_section("sweep").unwrap();
        assert_eq!(sw.require_list("abscissae").unwrap(), vec![0.2, 0.1, 0.05]);
        cfg.reject_unknown().unwrap();
    }

    #[test]
    fn precise_errors() {
        let err = ConfigFile::parse("x = 1\n", "t.conf").unwrap_err();
        assert!(err.to_string().contains("t.conf:1"), "{err}");

        let cfg = ConfigFile::parse("[a]\nk = 1\nk2 = oops\n", "t.conf").unwrap();
        let sec = cfg.require_section("a").unwrap();
        let err = sec.get::<f64>("k2").unwrap_err();
        assert!(err.to_string().contains("t.conf:3"), "{err}");
        assert!(err.to_string().contains("oops"), "{err}");

        let err = ConfigFile::parse("[a]\nk = 1\nk = 2\n", "t.conf").unwrap_err();
        assert!(err.to_string().contains("already set at line 2"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let cfg = ConfigFile::parse("[a]\nk = 1\ntypo = 2\n[b]\nz = 3\n", "t.conf").unwrap();
        let sec = cfg.require_section("a").unwrap();
        let _ = sec.require::<f64>("k").unwrap();
        let err = cfg.reject_unknown().unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("unrecognized key 'typo'"), "{msg}");
        assert!(msg.contains("section [b] is not used"), "{msg}");
    }
}
