//! Effective configuration: built-in defaults, then the subcommand's section
//! of `--config`, then flags, then `--set key=value` overrides. The result
//! is deserialized with unknown keys rejected.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{config, Result};

pub const SECTIONS: [&str; 12] = [
    "generate-toy",
    "clean",
    "split",
    "merge",
    "backtranslate",
    "mix",
    "train",
    "evaluate",
    "report",
    "register",
    "models",
    "serve",
];

#[derive(Debug, Default, Clone)]
pub struct Layers {
    pub file: Option<toml::Table>,
    /// Input hashes recorded by a manifest used as `--config`.
    pub manifest_inputs: Vec<(PathBuf, String)>,
    pub sets: Vec<(String, toml::Value)>,
}

impl Layers {
    pub fn load(config_path: Option<&Path>, sets: &[String]) -> Result<Self> {
        let mut layers = Layers::default();
        if let Some(path) = config_path {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read config {}", path.display()))
                .map_err(config)?;
            if path.extension().is_some_and(|e| e == "json") {
                layers.load_manifest(&text, path)?;
            } else {
                let table: toml::Table = toml::from_str(&text)
                    .with_context(|| format!("invalid config {}", path.display()))
                    .map_err(config)?;
                if let Some(bad) = table.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
                    return Err(config(anyhow!("unknown config section [{bad}]; expected one of {}", SECTIONS.join(", "))));
                }
                layers.file = Some(table);
            }
        }
        for s in sets {
            let (key, raw) = s
                .split_once('=')
                .ok_or_else(|| config(anyhow!("--set expects key=value, got `{s}`")))?;
            layers.sets.push((key.trim().to_string(), parse_scalar(raw.trim())));
        }
        Ok(layers)
    }

    /// A run manifest replays its effective config for the same subcommand.
    fn load_manifest(&mut self, text: &str, path: &Path) -> Result<()> {
        let m: serde_json::Value = serde_json::from_str(text)
            .with_context(|| format!("invalid manifest {}", path.display()))
            .map_err(config)?;
        let (Some(sub), Some(cfg)) = (m["subcommand"].as_str(), m.get("config")) else {
            return Err(config(anyhow!("{} is not a run manifest", path.display())));
        };
        let cfg: toml::Value = toml::Value::try_from(strip_nulls(cfg.clone())).map_err(|e| config(anyhow!("manifest config: {e}")))?;
        let mut table = toml::Table::new();
        table.insert(sub.to_string(), cfg);
        self.file = Some(table);
        if let Some(inputs) = m["inputs"].as_array() {
            for i in inputs {
                if let (Some(p), Some(h)) = (i["path"].as_str(), i["sha256"].as_str()) {
                    self.manifest_inputs.push((PathBuf::from(p), h.to_string()));
                }
            }
        }
        Ok(())
    }

    pub fn resolve<C: Serialize + DeserializeOwned>(&self, section: &str, defaults: &C, flags: toml::Table) -> Result<C> {
        let mut table = toml::Table::try_from(defaults).map_err(|e| config(anyhow!("defaults for {section}: {e}")))?;
        if let Some(file) = &self.file {
            if let Some(value) = file.get(section) {
                let sec = value
                    .as_table()
                    .ok_or_else(|| config(anyhow!("config section [{section}] must be a table")))?;
                merge(&mut table, sec);
            }
        }
        merge(&mut table, &flags);
        for (key, value) in &self.sets {
            set_path(&mut table, key, value.clone())?;
        }
        C::deserialize(toml::Value::Table(table)).map_err(|e| config(anyhow!("[{section}] {}", e.message())))
    }
}

/// Unset options are recorded as JSON nulls, which TOML cannot hold.
fn strip_nulls(v: serde_json::Value) -> serde_json::Value {
    match v {
        serde_json::Value::Object(m) => m.into_iter().filter(|(_, v)| !v.is_null()).map(|(k, v)| (k, strip_nulls(v))).collect(),
        serde_json::Value::Array(a) => a.into_iter().map(strip_nulls).collect(),
        other => other,
    }
}

/// Parses a TOML literal (number, bool, array, quoted string); anything
/// else is taken as a bare string.
pub fn parse_scalar(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn merge(into: &mut toml::Table, from: &toml::Table) {
    for (k, v) in from {
        match (into.get_mut(k), v) {
            (Some(toml::Value::Table(dst)), toml::Value::Table(src)) if !is_tagged(src) => merge(dst, src),
            _ => {
                into.insert(k.clone(), v.clone());
            }
        }
    }
}

/// Tables with a discriminator replace rather than merge, so fields of a
/// different variant do not leak in.
fn is_tagged(t: &toml::Table) -> bool {
    t.contains_key("kind") || t.contains_key("transport")
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|l| !l.is_empty()).ok_or_else(|| config(anyhow!("empty --set key")))?;
    let mut cur = table;
    for p in parts {
        cur = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| config(anyhow!("--set {key}: `{p}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Builds a flag table from `(key, Option<value>)` pairs, skipping unset flags.
#[macro_export]
macro_rules! flags {
    ($($key:literal => $value:expr),* $(,)?) => {{
        #[allow(unused_mut)]
        let mut t = toml::Table::new();
        $(
            if let Some(v) = $value {
                t.insert($key.to_string(), toml::Value::try_from(v).expect("flag value serializes"));
            }
        )*
        t
    }};
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Serialize, Deserialize, PartialEq)]
    #[serde(deny_unknown_fields)]
    struct Demo {
        epochs: u32,
        name: String,
        nested: Nested,
    }

    #[derive(Debug, Serialize, Deserialize, PartialEq)]
    #[serde(deny_unknown_fields)]
    struct Nested {
        beam: u32,
    }

    fn defaults() -> Demo {
        Demo {
            epochs: 3,
            name: "a".into(),
            nested: Nested { beam: 4 },
        }
    }

    #[test]
    fn layering_order() {
        let mut layers = Layers::load(None, &["nested.beam=2".into(), "name=zz".into()]).unwrap();
        layers.file = Some(toml::from_str("[train]\nepochs = 10\nname = \"file\"\n").unwrap());
        let flags = crate::flags! { "name" => Some("flag") };
        let got: Demo = layers.resolve("train", &defaults(), flags).unwrap();
        assert_eq!(got, Demo { epochs: 10, name: "zz".into(), nested: Nested { beam: 2 } });
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let layers = Layers::load(None, &["epoch=10".into()]).unwrap();
        let err = layers.resolve("train", &defaults(), toml::Table::new()).unwrap_err();
        assert_eq!(err.kind, crate::error::Kind::Config);
        assert!(err.to_string().contains("epoch"), "{err}");
    }

    #[test]
    fn manifest_replay() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.txt");
        std::fs::write(&input, "x").unwrap();
        let manifest = serde_json::json!({
            "subcommand": "train",
            "config": { "epochs": 10, "name": "m", "nested": { "beam": 1 }, "unset": null },
            "inputs": [{ "path": input, "sha256": "00" }],
        });
        let path = dir.path().join("manifest.json");
        std::fs::write(&path, manifest.to_string()).unwrap();
        let layers = Layers::load(Some(&path), &[]).unwrap();
        assert_eq!(layers.manifest_inputs.len(), 1);
        let got: Demo = layers.resolve("train", &defaults(), toml::Table::new()).unwrap();
        assert_eq!(got.epochs, 10);
        let layers = Layers::load(Some(&path), &["epochs=4".into()]).unwrap();
        let got: Demo = layers.resolve("train", &defaults(), toml::Table::new()).unwrap();
        assert_eq!(got, Demo { epochs: 4, name: "m".into(), nested: Nested { beam: 1 } });
    }

    #[test]
    fn unknown_section_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "[trian]\nepochs = 1\n").unwrap();
        let err = Layers::load(Some(&path), &[]).unwrap_err();
        assert!(err.to_string().contains("trian"), "{err}");
    }

    #[test]
    fn scalars() {
        assert_eq!(parse_scalar("10"), toml::Value::Integer(10));
        assert_eq!(parse_scalar("1:1"), toml::Value::String("1:1".into()));
        assert_eq!(parse_scalar("\"x y\""), toml::Value::String("x y".into()));
    }
}
