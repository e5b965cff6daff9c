//! Flat `key=value` run summaries.

use std::fmt;

use sha2::{Digest, Sha256};

/// SHA-256 over `parts`, each terminated by a NUL byte, as lowercase hex.
pub fn digest(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
        h.update([0u8]);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Ordered `key=value` lines: command, inputs digest, seed, metrics, checks.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    lines: Vec<(String, String)>,
}

impl RunSummary {
    pub fn new(command: &str, digest: String, seed: Option<u64>) -> Self {
        let mut lines = vec![
            ("command".to_string(), command.to_string()),
            ("digest".to_string(), digest),
        ];
        if let Some(seed) = seed {
            lines.push(("seed".to_string(), seed.to_string()));
        }
        Self { lines }
    }

    pub fn value(&mut self, key: &str, v: impl fmt::Display) {
        self.lines.push((key.to_string(), v.to_string()));
    }

    pub fn metric(&mut self, key: &str, v: f64, se: Option<f64>) {
        self.value(&format!("metric.{key}"), v);
        if let Some(se) = se {
            self.value(&format!("metric.{key}.se"), se);
        }
    }

    pub fn check(&mut self, key: &str, pass: bool) {
        self.value(&format!("check.{key}"), if pass { "pass" } else { "fail" });
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.lines.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Two-column tab-separated rendering with a header.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("key\tvalue\n");
        for (k, v) in &self.lines {
            out.push_str(&format!("{k}\t{v}\n"));
        }
        out
    }
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.lines {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_is_stable_and_separates_parts() {
        assert_eq!(digest(&["a", "b"]), digest(&["a", "b"]));
        assert_ne!(digest(&["ab", ""]), digest(&["a", "b"]));
        assert_eq!(digest(&[]).len(), 64);
    }

    #[test]
    fn renders_in_insertion_order() {
        let mut s = RunSummary::new("x", "d".into(), Some(3));
        s.metric("m", 0.5, Some(0.01));
        s.check("ok", true);
        assert_eq!(
            s.to_string(),
            "command=x\ndigest=d\nseed=3\nmetric.m=0.5\nmetric.m.se=0.01\ncheck.ok=pass\n"
        );
        assert_eq!(s.get("metric.m"), Some("0.5"));
    }
}
