//! Run metadata written next to every output file.

use std::path::{Path, PathBuf};

use cyclic_dde::model::ParamMap;
use cyclic_dde::SimConfig;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSource {
    File { path: String },
    Preset { uri: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// Arguments after the program name.
    pub argv: Vec<String>,
    pub model_source: ModelSource,
    pub params: ParamMap,
    pub sim: SimConfig,
    pub seed: u64,
    pub version: String,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

/// `<out>.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_appends_suffix() {
        assert_eq!(manifest_path(Path::new("dir/out.csv")), PathBuf::from("dir/out.csv.manifest.json"));
    }

    #[test]
    fn source_is_tagged() {
        let s = serde_json::to_string(&ModelSource::Preset { uri: "preset://knauer?a1=0.9".into() }).unwrap();
        assert_eq!(s, r#"{"kind":"preset","uri":"preset://knauer?a1=0.9"}"#);
    }
}
