//! Built-in reproduction configs, one or more per acceptance target.

use crate::config::ExperimentConfig;
use crate::error::Result;

macro_rules! entries {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../../../configs/", $name, ".toml")))),*]
    };
}

const ENTRIES: &[(&str, &str)] = entries!(
    "trotter-ou",
    "strang-ou",
    "suzuki4-drive",
    "td-trotter",
    "commuting-trotter",
    "commuting-strang",
    "commuting-suzuki4",
    "telescopic-graded",
    "zeno-cat",
    "gate-cat",
    "general-zeno-cat",
    "l-photon-decay",
    "l-photon-moments",
    "ou-stationary",
);

/// A named config shipped with the library.
#[derive(Debug, Clone, Copy)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub toml: &'static str,
}

impl CatalogEntry {
    pub fn config(&self) -> Result<ExperimentConfig> {
        ExperimentConfig::from_toml_str(self.toml)
    }

    pub fn description(&self) -> String {
        self.config().map(|c| c.description).unwrap_or_default()
    }
}

pub fn catalog() -> Vec<CatalogEntry> {
    ENTRIES.iter().map(|&(name, toml)| CatalogEntry { name, toml }).collect()
}

pub fn find(name: &str) -> Option<CatalogEntry> {
    catalog().into_iter().find(|e| e.name == name)
}
