//! Run manifests written next to every output file.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub params: BTreeMap<String, serde_json::Value>,
    pub seed: u64,
    /// Unix time in seconds.
    pub start: f64,
    pub end: f64,
    pub outputs: Vec<OutputDigest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn manifest_path(out: &Path) -> std::path::PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    name.into()
}

/// Checks a manifest document against its schema.
pub fn validate_manifest(text: &str) -> Result<Manifest, String> {
    let m: Manifest = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if m.tool != "wrmlab" {
        return Err(format!("unexpected tool {:?}", m.tool));
    }
    if m.version.is_empty() || m.subcommand.is_empty() {
        return Err("empty version or subcommand".into());
    }
    if !(m.start.is_finite() && m.end >= m.start) {
        return Err("end timestamp precedes start".into());
    }
    if m.outputs.is_empty() {
        return Err("no outputs listed".into());
    }
    for o in &m.outputs {
        if o.sha256.len() != 64 || !o.sha256.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(format!("malformed digest for {}", o.path));
        }
    }
    Ok(m)
}

/// Recomputes the digests of the listed outputs.
pub fn verify_outputs(m: &Manifest) -> Result<(), String> {
    for o in &m.outputs {
        let bytes = std::fs::read(&o.path).map_err(|e| format!("{}: {e}", o.path))?;
        if sha256_hex(&bytes) != o.sha256 {
            return Err(format!("digest mismatch for {}", o.path));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn schema_violations() {
        assert!(validate_manifest("{}").is_err());
        let good = r#"{"tool":"wrmlab","version":"0.1.0","subcommand":"z","params":{},"seed":0,
            "start":1.0,"end":2.0,"outputs":[{"path":"x","sha256":"ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"}]}"#;
        assert!(validate_manifest(good).is_ok());
        assert!(validate_manifest(&good.replace("\"end\":2.0", "\"end\":0.5")).is_err());
        assert!(validate_manifest(&good.replace("\"seed\":0", "\"seed\":0,\"extra\":1")).is_err());
    }
}
