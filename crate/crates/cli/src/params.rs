//! Flat JSON parameter blocks with typo detection and itemised errors.

use std::collections::BTreeSet;

use serde_json::{Map, Value};

/// Similarity above which an unknown key is assumed to be a typo.
const SUGGESTION_THRESHOLD: f64 = 0.7;

/// Reads typed values out of a JSON object. Every lookup registers the key
/// as known; problems are collected instead of returned one at a time.
pub struct Params {
    map: Map<String, Value>,
    known: BTreeSet<&'static str>,
    errors: Vec<String>,
}

impl Params {
    pub fn new(map: Map<String, Value>) -> Self {
        Self { map, known: BTreeSet::new(), errors: Vec::new() }
    }

    pub fn error(&mut self, msg: impl Into<String>) {
        self.errors.push(msg.into());
    }

    pub fn has_errors(&self) -> bool {
        !self.errors.is_empty()
    }

    /// Records a range error for `key` unless `ok` holds.
    pub fn check(&mut self, ok: bool, key: &str, what: &str) {
        if !ok {
            self.errors.push(format!("{key}: {what}"));
        }
    }

    /// The raw value of `key`, `None` when absent or null.
    pub fn json(&mut self, key: &'static str) -> Option<Value> {
        self.known.insert(key);
        self.map.get(key).filter(|v| !v.is_null()).cloned()
    }

    fn typed<T>(&mut self, key: &'static str, expected: &str, conv: impl Fn(&Value) -> Option<T>) -> Option<T> {
        let v = self.json(key)?;
        let out = conv(&v);
        if out.is_none() {
            self.errors.push(format!("{key}: expected {expected}, got {v}"));
        }
        out
    }

    pub fn f64(&mut self, key: &'static str) -> Option<f64> {
        self.typed(key, "a number", Value::as_f64)
    }

    pub fn u64(&mut self, key: &'static str) -> Option<u64> {
        self.typed(key, "a nonnegative integer", Value::as_u64)
    }

    pub fn usize(&mut self, key: &'static str) -> Option<usize> {
        self.u64(key).map(|x| x as usize)
    }

    pub fn string(&mut self, key: &'static str) -> Option<String> {
        self.typed(key, "a string", |v| v.as_str().map(str::to_string))
    }

    pub fn f64_list(&mut self, key: &'static str) -> Option<Vec<f64>> {
        self.typed(key, "a list of numbers", |v| v.as_array()?.iter().map(Value::as_f64).collect())
    }

    pub fn usize_list(&mut self, key: &'static str) -> Option<Vec<usize>> {
        self.typed(key, "a list of nonnegative integers", |v| {
            v.as_array()?.iter().map(|x| x.as_u64().map(|n| n as usize)).collect()
        })
    }

    /// A `[t_min, t_max]` pair.
    pub fn window(&mut self, key: &'static str) -> Option<(f64, f64)> {
        let w = self.f64_list(key)?;
        match w.as_slice() {
            &[a, b] if a < b => Some((a, b)),
            _ => {
                self.errors.push(format!("{key}: expected [t_min, t_max] with t_min < t_max"));
                None
            }
        }
    }

    /// A required value; records an error when missing.
    pub fn required<T>(&mut self, key: &'static str, get: impl Fn(&mut Self, &'static str) -> Option<T>) -> Option<T> {
        if self.map.get(key).is_none_or(Value::is_null) {
            self.known.insert(key);
            self.errors.push(format!("{key}: required"));
            return None;
        }
        get(self, key)
    }

    /// One of a fixed set of strings.
    pub fn choice(&mut self, key: &'static str, options: &[&'static str], default: &'static str) -> &'static str {
        match self.string(key) {
            None => default,
            Some(s) => match options.iter().find(|&&o| o == s) {
                Some(o) => o,
                None => {
                    self.errors.push(format!("{key}: {s:?} is not one of {}", options.join(", ")));
                    default
                }
            },
        }
    }

    /// Rejects keys that were never looked up and returns all errors.
    pub fn finish(mut self) -> Vec<String> {
        let unknown: Vec<String> = self.map.keys().filter(|k| !self.known.contains(k.as_str())).cloned().collect();
        for key in unknown {
            let best = self
                .known
                .iter()
                .map(|k| (strsim::normalized_levenshtein(&key.to_lowercase(), &k.to_lowercase()), *k))
                .max_by(|a, b| a.0.total_cmp(&b.0));
            match best {
                Some((score, k)) if score >= SUGGESTION_THRESHOLD => {
                    self.errors.push(format!("{key}: unknown key, did you mean \"{k}\"?"))
                }
                _ => self.errors.push(format!("{key}: unknown key")),
            }
        }
        self.errors
    }
}
