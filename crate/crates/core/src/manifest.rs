//! Run manifests embedded in every artifact, and loading of limit inputs.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrals::LimitInputs;

/// Output schema version.
pub const SCHEMA: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: u32,
    pub command: String,
    /// Arguments after the program name; re-running them reproduces the
    /// artifact (bit for bit with one worker).
    #[serde(default)]
    pub argv: Vec<String>,
    pub params: BTreeMap<String, serde_json::Value>,
    pub seed: u64,
    pub workers: usize,
    /// Crate version, plus the build hash when one was supplied at compile time.
    pub version: String,
    pub started: String,
    pub finished: Option<String>,
}

fn now() -> String {
    let t: DateTime<Utc> = std::time::SystemTime::now().into();
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub fn version_string() -> String {
    match option_env!("PERCOLAB_BUILD_HASH") {
        Some(h) => format!("{}+{h}", env!("CARGO_PKG_VERSION")),
        None => env!("CARGO_PKG_VERSION").to_string(),
    }
}

impl RunManifest {
    pub fn start(command: &str, seed: u64, workers: usize) -> Self {
        RunManifest {
            schema: SCHEMA,
            command: command.to_string(),
            argv: Vec::new(),
            params: BTreeMap::new(),
            seed,
            workers,
            version: version_string(),
            started: now(),
            finished: None,
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        self.params.insert(key.to_string(), serde_json::to_value(value).unwrap_or(serde_json::Value::Null));
        self
    }

    pub fn finish(&mut self) {
        self.finished = Some(now());
    }

    /// `{"schema": 1, "manifest": …, "result": …}`.
    pub fn wrap(&self, result: impl Serialize) -> serde_json::Value {
        serde_json::json!({
            "schema": SCHEMA,
            "manifest": self,
            "result": result,
        })
    }

    /// A CSV comment line carrying the manifest, to precede the header.
    pub fn csv_comment(&self) -> String {
        format!("# {}", serde_json::to_string(self).expect("manifest serialises"))
    }
}

/// Reads and validates limit inputs from JSON `{alpha, p_c, rho, d}`.
pub fn load_inputs(path: &Path) -> Result<LimitInputs> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Domain(format!("{}: {e}", path.display())))?;
    parse_inputs(&text)
}

pub fn parse_inputs(text: &str) -> Result<LimitInputs> {
    let v: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        msg: e.to_string(),
    })?;
    for field in ["alpha", "p_c", "rho", "d"] {
        if v.get(field).is_none() {
            return Err(Error::Domain(format!("limit inputs: missing field `{field}`")));
        }
    }
    let inputs: LimitInputs = serde_json::from_value(v).map_err(|e| Error::Domain(format!("limit inputs: {e}")))?;
    inputs.validate()?;
    Ok(inputs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inputs_roundtrip_and_beta() {
        let i = parse_inputs(r#"{"alpha": 1, "p_c": 0.5, "rho": 1, "d": 7}"#).unwrap();
        assert_eq!(i.beta(), 1.0);
    }

    #[test]
    fn inputs_rejections_name_the_field() {
        let e = parse_inputs(r#"{"alpha": 1, "p_c": 0.5, "d": 7}"#).unwrap_err();
        assert!(e.to_string().contains("rho"));
        let e = parse_inputs(r#"{"alpha": 1, "p_c": 0, "rho": 1, "d": 7}"#).unwrap_err();
        assert!(e.to_string().contains("p_c"));
        let e = parse_inputs(r#"{"alpha": 1, "p_c": 0.5, "rho": 1, "d": 6}"#).unwrap_err();
        assert!(e.to_string().contains("requires d > 6"));
        let e = parse_inputs(r#"{"alpha": -1, "p_c": 0.5, "rho": 1, "d": 7}"#).unwrap_err();
        assert!(e.to_string().contains("alpha"));
    }

    #[test]
    fn wrapped_artifact_carries_schema() {
        let mut m = RunManifest::start("trees", 1, 1);
        m.param("k", 3);
        m.finish();
        let v = m.wrap(serde_json::json!({"count": 1}));
        assert_eq!(v["schema"], 1);
        assert_eq!(v["manifest"]["params"]["k"], 3);
        assert!(m.csv_comment().starts_with("# {"));
    }
}
