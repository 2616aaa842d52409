//! Directory of model manifests, one TOML file per servable model.

use std::fs;
use std::path::{Path, PathBuf};

use super::{BaseModel, ModelDescriptor, ModelKey};
use crate::lang::{Direction, Lang};

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: invalid manifest: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("model {key} registered twice ({first} and {second})")]
    Duplicate { key: ModelKey, first: PathBuf, second: PathBuf },
}

#[derive(Debug, Clone)]
pub struct Registry {
    root: PathBuf,
    /// Sorted by key: base, then training category, then direction.
    models: Vec<(PathBuf, ModelDescriptor)>,
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> RegistryError + '_ {
    move |source| RegistryError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn manifest_file_name(key: &ModelKey) -> String {
    format!("{}__{}__{}.toml", key.base, key.category, key.direction).replace(':', "_")
}

impl Registry {
    /// Creates the directory if needed and reads every manifest in it.
    pub fn create(root: impl Into<PathBuf>) -> Result<Self, RegistryError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(io(&root))?;
        Self::open(root)
    }

    pub fn open(root: impl Into<PathBuf>) -> Result<Self, RegistryError> {
        let root = root.into();
        let mut models: Vec<(PathBuf, ModelDescriptor)> = Vec::new();
        let mut entries: Vec<PathBuf> = fs::read_dir(&root)
            .map_err(io(&root))?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()
            .map_err(io(&root))?;
        entries.retain(|p| p.extension().is_some_and(|e| e == "toml"));
        entries.sort();
        for path in entries {
            let text = fs::read_to_string(&path).map_err(io(&path))?;
            let mut d: ModelDescriptor = toml::from_str(&text).map_err(|e| RegistryError::Manifest {
                path: path.clone(),
                message: e.to_string(),
            })?;
            if d.path.is_relative() && !d.path.as_os_str().is_empty() {
                d.path = root.join(&d.path);
            }
            if let Some((first, _)) = models.iter().find(|(_, m)| m.key() == d.key()) {
                return Err(RegistryError::Duplicate {
                    key: d.key(),
                    first: first.clone(),
                    second: path,
                });
            }
            models.push((path, d));
        }
        models.sort_by_key(|(_, d)| d.key());
        Ok(Self { root, models })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn list(&self) -> impl Iterator<Item = &ModelDescriptor> {
        self.models.iter().map(|(_, d)| d)
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    /// Descriptors matching both filters; `None` matches anything.
    pub fn filter(&self, base: Option<BaseModel>, source: Option<Lang>) -> Vec<&ModelDescriptor> {
        self.list()
            .filter(|d| base.is_none_or(|b| d.model_type == b))
            .filter(|d| source.is_none_or(|s| d.direction.source == s))
            .collect()
    }

    pub fn by_direction(&self, direction: Direction) -> Vec<&ModelDescriptor> {
        self.list().filter(|d| d.direction == direction).collect()
    }

    pub fn find(&self, key: &ModelKey) -> Option<&ModelDescriptor> {
        self.list().find(|d| d.key() == *key)
    }

    /// Directory for model artifacts owned by the registry.
    pub fn artifact_dir(&self) -> PathBuf {
        self.root.join("artifacts")
    }

    /// Writes (or replaces) the manifest for `descriptor` atomically.
    pub fn register(&mut self, descriptor: ModelDescriptor) -> Result<PathBuf, RegistryError> {
        let key = descriptor.key();
        let path = self.root.join(manifest_file_name(&key));
        let mut stored = descriptor.clone();
        if let Ok(rel) = stored.path.strip_prefix(&self.root) {
            stored.path = rel.to_path_buf();
        }
        let text = toml::to_string(&stored).map_err(|e| RegistryError::Manifest {
            path: path.clone(),
            message: e.to_string(),
        })?;
        let tmp = path.with_extension("toml.tmp");
        fs::write(&tmp, text).map_err(io(&tmp))?;
        fs::rename(&tmp, &path).map_err(io(&path))?;
        self.models.retain(|(_, d)| d.key() != key);
        let mut resolved = descriptor;
        if resolved.path.is_relative() && !resolved.path.as_os_str().is_empty() {
            resolved.path = self.root.join(&resolved.path);
        }
        self.models.push((path.clone(), resolved));
        self.models.sort_by_key(|(_, d)| d.key());
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{Engine, MixName, TrainingCategory};

    fn d(base: BaseModel, cat: &str, dir: Direction) -> ModelDescriptor {
        ModelDescriptor::new(ModelKey::new(base, cat.parse().unwrap(), dir), Engine::Copy)
    }

    #[test]
    fn toy_only_registry() {
        let tmp = tempfile::tempdir().unwrap();
        let mut r = Registry::create(tmp.path()).unwrap();
        r.register(d(BaseModel::Toy, "ft", Direction::YUE_EN)).unwrap();
        let reopened = Registry::open(tmp.path()).unwrap();
        assert_eq!(reopened.len(), 1);
    }

    #[test]
    fn stable_order_and_filters() {
        let tmp = tempfile::tempdir().unwrap();
        let mut r = Registry::create(tmp.path()).unwrap();
        r.register(d(BaseModel::Nllb, "ft-syn-1:1", Direction::YUE_EN)).unwrap();
        r.register(d(BaseModel::Toy, "ft", Direction::EN_YUE)).unwrap();
        r.register(d(BaseModel::Nllb, "ft", Direction::YUE_EN)).unwrap();
        r.register(d(BaseModel::Opus, "baseline", Direction::YUE_EN)).unwrap();
        let r = Registry::open(tmp.path()).unwrap();
        let keys: Vec<String> = r.list().map(|m| m.key().to_string()).collect();
        assert_eq!(
            keys,
            ["opus/baseline/yue-en", "nllb/ft/yue-en", "nllb/ft-syn-1:1/yue-en", "toy/ft/en-yue"]
        );
        let nllb = r.filter(Some(BaseModel::Nllb), Some(Lang::Yue));
        let cats: Vec<TrainingCategory> = nllb.iter().map(|m| m.training_category).collect();
        assert_eq!(
            cats,
            [
                TrainingCategory::Ft,
                TrainingCategory::FtSyn {
                    ratio: MixName::OneTo(1),
                    generator: None
                }
            ]
        );
        assert_eq!(r.by_direction(Direction::YUE_EN).len(), 3);
        assert_eq!(r.filter(None, None).len(), 4);
    }

    #[test]
    fn relative_artifact_paths_resolve_against_root() {
        let tmp = tempfile::tempdir().unwrap();
        let mut r = Registry::create(tmp.path()).unwrap();
        let mut m = d(BaseModel::Toy, "ft", Direction::YUE_EN);
        m.path = tmp.path().join("artifacts/t.json");
        r.register(m.clone()).unwrap();
        let text = fs::read_to_string(tmp.path().join("toy__ft__yue-en.toml")).unwrap();
        assert!(text.contains("path = \"artifacts/t.json\""), "{text}");
        assert_eq!(Registry::open(tmp.path()).unwrap().find(&m.key()).unwrap().path, m.path);
    }

    #[test]
    fn unreadable_registry_is_io_error() {
        assert!(matches!(Registry::open("/nonexistent/registry"), Err(RegistryError::Io { .. })));
    }

    #[test]
    fn duplicate_manifests_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let mut r = Registry::create(tmp.path()).unwrap();
        let path = r.register(d(BaseModel::Toy, "ft", Direction::YUE_EN)).unwrap();
        fs::copy(&path, tmp.path().join("copy.toml")).unwrap();
        assert!(matches!(Registry::open(tmp.path()), Err(RegistryError::Duplicate { .. })));
    }
}
