//! Scenario files: the on-disk format, the loader, and the shipped default scenario.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Scenario;
use crate::validate::{topological_order, validate_scenario, Violation};

pub const SCHEMA_VERSION: u32 = 1;
pub const CONTENT_DIR_ENV: &str = "FUTURESIM_CONTENT_DIR";
pub const DEFAULT_SCENARIO_ID: &str = "default";

const DEFAULT_SCENARIO_JSON: &str = include_str!("../content/default.json");

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContentMetadata {
    pub origin: String,
    #[serde(default)]
    pub notes: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    #[serde(default)]
    pub metadata: ContentMetadata,
    pub scenario: Scenario,
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unsupported schema_version {found} (supported: {SCHEMA_VERSION})")]
    SchemaVersionUnsupported { found: i64 },
    #[error("invalid scenario: {} violation(s)", .0.len())]
    InvalidScenario(Vec<Violation>),
    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),
    #[error("i/o error reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Parses and validates a scenario file.
pub fn load_scenario(bytes: &[u8]) -> Result<Scenario, LoadError> {
    load_scenario_file(bytes).map(|f| f.scenario)
}

pub fn load_scenario_file(bytes: &[u8]) -> Result<ScenarioFile, LoadError> {
    let raw: serde_json::Value =
        serde_json::from_slice(bytes).map_err(|e| LoadError::Parse(e.to_string()))?;
    match raw.get("schema_version") {
        None => return Err(LoadError::Parse("missing field `schema_version`".into())),
        Some(v) => match v.as_i64() {
            Some(n) if n == i64::from(SCHEMA_VERSION) => {}
            Some(n) => return Err(LoadError::SchemaVersionUnsupported { found: n }),
            None => return Err(LoadError::Parse("schema_version must be an integer".into())),
        },
    }
    let file: ScenarioFile =
        serde_json::from_value(raw).map_err(|e| LoadError::Parse(e.to_string()))?;
    let violations = validate_scenario(&file.scenario);
    if !violations.is_empty() {
        return Err(LoadError::InvalidScenario(violations));
    }
    Ok(file)
}

/// Serializes a scenario in the file format, pretty-printed.
pub fn save_scenario(scenario: &Scenario, metadata: &ContentMetadata) -> String {
    let file = ScenarioFile {
        schema_version: SCHEMA_VERSION,
        metadata: metadata.clone(),
        scenario: scenario.clone(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("scenario serializes");
    s.push('\n');
    s
}

/// The built-in eight-role scenario: PRC and US governments, Tencent and Alphabet,
/// two roles each, six two-year turns from 2025.
pub fn default_scenario() -> Scenario {
    default_scenario_file().scenario
}

pub fn default_scenario_file() -> ScenarioFile {
    load_scenario_file(DEFAULT_SCENARIO_JSON.as_bytes()).expect("shipped scenario is valid")
}

/// Raw text of the shipped default scenario file.
pub fn default_scenario_source() -> &'static str {
    DEFAULT_SCENARIO_JSON
}

/// Resolves scenario ids to files in a content directory.
///
/// `<dir>/<id>.json` is looked up first; the id `default` falls back to the
/// built-in scenario when no such file exists.
#[derive(Debug, Clone, Default)]
pub struct ContentDir {
    dir: Option<PathBuf>,
}

impl ContentDir {
    pub fn new(dir: Option<PathBuf>) -> Self {
        Self { dir }
    }

    /// Uses `FUTURESIM_CONTENT_DIR` when set.
    pub fn from_env() -> Self {
        Self::new(std::env::var_os(CONTENT_DIR_ENV).map(PathBuf::from))
    }

    pub fn path(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn load(&self, id: &str) -> Result<Scenario, LoadError> {
        let file_ok = !id.is_empty()
            && id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
        if file_ok {
            if let Some(dir) = &self.dir {
                let path = dir.join(format!("{id}.json"));
                if path.is_file() {
                    let bytes =
                        std::fs::read(&path).map_err(|source| LoadError::Io { path, source })?;
                    return load_scenario(&bytes);
                }
            }
        }
        if id == DEFAULT_SCENARIO_ID {
            return Ok(default_scenario());
        }
        Err(LoadError::UnknownScenario(id.to_owned()))
    }

    /// Ids of every scenario available, including the built-in default.
    pub fn list(&self) -> Vec<String> {
        let mut ids = vec![DEFAULT_SCENARIO_ID.to_owned()];
        if let Some(dir) = &self.dir {
            if let Ok(entries) = std::fs::read_dir(dir) {
                for entry in entries.flatten() {
                    let path = entry.path();
                    if path.extension().is_some_and(|e| e == "json") {
                        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                            ids.push(stem.to_owned());
                        }
                    }
                }
            }
        }
        ids.sort();
        ids.dedup();
        ids
    }
}

/// Balance lint: expected successes needed to reach each tech, from scratch,
/// researching every tech in its prerequisite closure.
///
/// Returns, per tier-3-or-higher tech, the closure cost. Used with
/// [`expected_research_capacity`] to check that the top of the tree is
/// reachable within the game's length.
pub fn closure_costs(s: &Scenario) -> BTreeMap<String, i64> {
    let order = topological_order(s).unwrap_or_default();
    let mut closures: BTreeMap<&str, std::collections::BTreeSet<&str>> = BTreeMap::new();
    for id in &order {
        let node = s.tech(id).expect("ordered tech exists");
        let mut set = std::collections::BTreeSet::new();
        set.insert(node.id.as_str());
        for p in &node.prerequisites {
            if let Some(c) = closures.get(p.as_str()) {
                set.extend(c.iter().copied());
            }
        }
        closures.insert(node.id.as_str(), set);
    }
    closures
        .iter()
        .map(|(id, set)| {
            let cost = set
                .iter()
                .map(|t| s.tech(&(*t).into()).map_or(0, |n| n.research_cost))
                .sum();
            ((*id).to_owned(), cost)
        })
        .collect()
}

/// Expected dice successes an organization with `talent` produces over the whole game.
pub fn expected_research_capacity(s: &Scenario, talent: i64) -> f64 {
    talent as f64 * s.num_turns as f64 * s.dice.success_probability()
}
