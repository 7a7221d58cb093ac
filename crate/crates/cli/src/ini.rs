//! Minimal INI reader that remembers where every key was defined.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};

use crate::error::LabError;

/// Source location of a value: a line of the config file or a command-line override.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Override,
}

impl std::fmt::Display for Origin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Origin::Line(n) => write!(f, "line {n}"),
            Origin::Override => write!(f, "--override"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Entry {
    pub value: String,
    pub origin: Origin,
}

#[derive(Debug, Default)]
pub struct IniDoc {
    sections: BTreeMap<String, BTreeMap<String, Entry>>,
    used: RefCell<BTreeSet<(String, String)>>,
}

fn syntax(line: usize, msg: impl Into<String>) -> LabError {
    LabError::Config {
        key: String::new(),
        origin: Some(Origin::Line(line)),
        msg: msg.into(),
    }
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

impl IniDoc {
    pub fn parse(text: &str) -> Result<Self, LabError> {
        let mut doc = IniDoc::default();
        let mut current: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let n = idx + 1;
            let line = match raw.find(['#', ';']) {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| syntax(n, "unterminated section header"))?
                    .trim();
                if !valid_name(name) {
                    return Err(syntax(n, format!("invalid section name `{name}`")));
                }
                if doc.sections.contains_key(name) {
                    return Err(syntax(n, format!("duplicate section [{name}]")));
                }
                doc.sections.insert(name.to_string(), BTreeMap::new());
                current = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| syntax(n, "expected `key = value`"))?;
            let key = key.trim();
            if !valid_name(key) {
                return Err(syntax(n, format!("invalid key `{key}`")));
            }
            let section = current
                .as_ref()
                .ok_or_else(|| syntax(n, format!("key `{key}` appears before any section")))?;
            let map = doc.sections.get_mut(section).expect("section exists");
            if map.contains_key(key) {
                return Err(syntax(n, format!("duplicate key `{section}.{key}`")));
            }
            map.insert(
                key.to_string(),
                Entry {
                    value: value.trim().to_string(),
                    origin: Origin::Line(n),
                },
            );
        }
        Ok(doc)
    }

    /// Applies `section.key=value`, replacing any value from the file.
    pub fn apply_override(&mut self, spec: &str) -> Result<(), LabError> {
        let bad = |msg: &str| LabError::Config {
            key: spec.to_string(),
            origin: Some(Origin::Override),
            msg: msg.to_string(),
        };
        let (path, value) = spec.split_once('=').ok_or_else(|| bad("expected `section.key=value`"))?;
        let (section, key) = path
            .trim()
            .split_once('.')
            .ok_or_else(|| bad("expected `section.key=value`"))?;
        if !valid_name(section) || !valid_name(key) {
            return Err(bad("invalid section or key name"));
        }
        self.sections.entry(section.to_string()).or_default().insert(
            key.to_string(),
            Entry {
                value: value.trim().to_string(),
                origin: Origin::Override,
            },
        );
        Ok(())
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    /// Looks up a key and marks it as consumed.
    pub fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        let e = self.sections.get(section)?.get(key)?;
        self.used.borrow_mut().insert((section.to_string(), key.to_string()));
        Some(e)
    }

    /// Marks every key of `section` as consumed.
    pub fn ignore_section(&self, section: &str) {
        if let Some(map) = self.sections.get(section) {
            let mut used = self.used.borrow_mut();
            for key in map.keys() {
                used.insert((section.to_string(), key.clone()));
            }
        }
    }

    /// First key that was never looked up, in file order.
    pub fn first_unused(&self) -> Option<(String, Entry)> {
        let used = self.used.borrow();
        let mut unused: Vec<(String, Entry)> = self
            .sections
            .iter()
            .flat_map(|(s, map)| map.iter().map(move |(k, e)| (s.clone(), k.clone(), e.clone())))
            .filter(|(s, k, _)| !used.contains(&(s.clone(), k.clone())))
            .map(|(s, k, e)| (format!("{s}.{k}"), e))
            .collect();
        unused.sort_by_key(|(_, e)| match e.origin {
            Origin::Line(n) => n,
            Origin::Override => usize::MAX,
        });
        unused.into_iter().next()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_keys_and_comments() {
        let doc = IniDoc::parse("# header\n[grid]\nnx = 32 ; inline\n\n[physics]\neps=0.1\n").unwrap();
        assert_eq!(doc.get("grid", "nx").unwrap().value, "32");
        assert_eq!(doc.get("physics", "eps").unwrap().origin, Origin::Line(6));
        assert!(doc.get("grid", "ny").is_none());
    }

    #[test]
    fn syntax_errors_carry_lines() {
        for (text, line) in [
            ("[grid]\nnx 32\n", 2),
            ("nx = 1\n", 1),
            ("[grid\n", 1),
            ("[grid]\nnx = 1\nnx = 2\n", 3),
            ("[a]\n[a]\n", 2),
        ] {
            match IniDoc::parse(text) {
                Err(LabError::Config { origin, .. }) => assert_eq!(origin, Some(Origin::Line(line)), "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn overrides_replace_and_create() {
        let mut doc = IniDoc::parse("[grid]\nnx = 32\n").unwrap();
        doc.apply_override("grid.nx=64").unwrap();
        doc.apply_override("stepper.dt = 1e-3").unwrap();
        assert_eq!(doc.get("grid", "nx").unwrap().value, "64");
        assert_eq!(doc.get("stepper", "dt").unwrap().origin, Origin::Override);
        assert!(doc.apply_override("nx=3").is_err());
    }

    #[test]
    fn unused_keys_are_reported_in_order() {
        let doc = IniDoc::parse("[a]\nx = 1\ny = 2\nz = 3\n").unwrap();
        doc.get("a", "x");
        assert_eq!(doc.first_unused().unwrap().0, "a.y");
    }
}
