use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use gewu_protocol::Envelope;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("scene {0:?} is already registered")]
    DuplicateScene(String),
    #[error("alias {alias:?} already names scene {existing:?}")]
    AliasCollision { alias: String, existing: String },
    #[error("unknown scene {0:?}")]
    UnknownScene(String),
}

impl RegistryError {
    pub fn code(&self) -> &'static str {
        match self {
            RegistryError::DuplicateScene(_) => "duplicate_scene",
            RegistryError::AliasCollision { .. } => "alias_collision",
            RegistryError::UnknownScene(_) => "unknown_scene",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SceneStatus {
    Unloaded,
    Loading,
    Active,
    Unloading,
}

impl SceneStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SceneStatus::Unloaded => "unloaded",
            SceneStatus::Loading => "loading",
            SceneStatus::Active => "active",
            SceneStatus::Unloading => "unloading",
        }
    }
}

impl fmt::Display for SceneStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Builds a fresh runtime each time its scene is loaded.
pub type SceneFactory<S> = Box<dyn FnMut() -> Box<S>>;

pub struct SceneDescriptor<S: ?Sized> {
    pub canonical: String,
    pub aliases: BTreeSet<String>,
    pub status: SceneStatus,
    /// Present iff `status == Active`.
    pub runtime: Option<Box<S>>,
    /// Commands received while this scene was loading, in arrival order.
    pub deferred: VecDeque<Envelope>,
    pub(crate) factory: SceneFactory<S>,
    /// Completed loads, for observability.
    pub loads: u64,
}

impl<S: ?Sized> fmt::Debug for SceneDescriptor<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SceneDescriptor")
            .field("canonical", &self.canonical)
            .field("aliases", &self.aliases)
            .field("status", &self.status)
            .field("bound", &self.runtime.is_some())
            .field("deferred", &self.deferred.len())
            .field("loads", &self.loads)
            .finish()
    }
}

/// Named scenes with a case-insensitive alias index.
pub struct SceneRegistry<S: ?Sized> {
    scenes: Vec<SceneDescriptor<S>>,
    index: HashMap<String, usize>,
}

impl<S: ?Sized> Default for SceneRegistry<S> {
    fn default() -> Self {
        SceneRegistry {
            scenes: Vec::new(),
            index: HashMap::new(),
        }
    }
}

impl<S: ?Sized> SceneRegistry<S> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register<I, A>(
        &mut self,
        canonical: &str,
        aliases: I,
        factory: SceneFactory<S>,
    ) -> Result<(), RegistryError>
    where
        I: IntoIterator<Item = A>,
        A: Into<String>,
    {
        let key = canonical.to_lowercase();
        if let Some(&i) = self.index.get(&key) {
            let existing = &self.scenes[i].canonical;
            if existing.to_lowercase() == key {
                return Err(RegistryError::DuplicateScene(canonical.to_string()));
            }
            return Err(RegistryError::AliasCollision {
                alias: canonical.to_string(),
                existing: existing.clone(),
            });
        }
        let aliases: BTreeSet<String> = aliases.into_iter().map(Into::into).collect();
        let mut keys = vec![key];
        for alias in &aliases {
            let k = alias.to_lowercase();
            if let Some(&i) = self.index.get(&k) {
                return Err(RegistryError::AliasCollision {
                    alias: alias.clone(),
                    existing: self.scenes[i].canonical.clone(),
                });
            }
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        let idx = self.scenes.len();
        for k in keys {
            self.index.insert(k, idx);
        }
        self.scenes.push(SceneDescriptor {
            canonical: canonical.to_string(),
            aliases,
            status: SceneStatus::Unloaded,
            runtime: None,
            deferred: VecDeque::new(),
            factory,
            loads: 0,
        });
        Ok(())
    }

    /// Case-insensitive lookup over canonical names and aliases.
    pub fn resolve(&self, name: &str) -> Result<&str, RegistryError> {
        self.index_of(name).map(|i| self.scenes[i].canonical.as_str())
    }

    pub(crate) fn index_of(&self, name: &str) -> Result<usize, RegistryError> {
        self.index
            .get(&name.to_lowercase())
            .copied()
            .ok_or_else(|| RegistryError::UnknownScene(name.to_string()))
    }

    pub fn get(&self, name: &str) -> Option<&SceneDescriptor<S>> {
        self.index_of(name).ok().map(|i| &self.scenes[i])
    }

    pub fn descriptors(&self) -> impl Iterator<Item = &SceneDescriptor<S>> {
        self.scenes.iter()
    }

    pub fn len(&self) -> usize {
        self.scenes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenes.is_empty()
    }

    pub(crate) fn at(&self, i: usize) -> &SceneDescriptor<S> {
        &self.scenes[i]
    }

    pub(crate) fn at_mut(&mut self, i: usize) -> &mut SceneDescriptor<S> {
        &mut self.scenes[i]
    }
}
