use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LanguageId(pub u32);

impl LanguageId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for LanguageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Registered languages; ids are dense indices into the language embedding table.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageRegistry {
    names: Vec<String>,
}

impl LanguageRegistry {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let mut reg = Self::default();
        for n in names {
            reg.register(n)?;
        }
        Ok(reg)
    }

    pub fn register(&mut self, name: impl Into<String>) -> Result<LanguageId> {
        let name = name.into();
        if self.names.contains(&name) {
            return Err(Error::config(format!("language `{name}` already registered")));
        }
        self.names.push(name);
        Ok(LanguageId(self.names.len() as u32 - 1))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn contains(&self, id: LanguageId) -> bool {
        id.index() < self.names.len()
    }

    pub fn check(&self, id: LanguageId) -> Result<()> {
        if self.contains(id) {
            Ok(())
        } else {
            Err(Error::config(format!(
                "language id {id} is not registered ({} languages known)",
                self.names.len()
            )))
        }
    }

    pub fn name(&self, id: LanguageId) -> Option<&str> {
        self.names.get(id.index()).map(String::as_str)
    }

    pub fn id(&self, name: &str) -> Option<LanguageId> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| LanguageId(i as u32))
    }

    /// Accepts either a registered name or a numeric id.
    pub fn resolve(&self, key: &str) -> Result<LanguageId> {
        if let Some(id) = self.id(key) {
            return Ok(id);
        }
        let id = key
            .parse::<u32>()
            .map(LanguageId)
            .map_err(|_| Error::config(format!("unknown language `{key}`")))?;
        self.check(id)?;
        Ok(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = LanguageId> {
        (0..self.names.len() as u32).map(LanguageId)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}
