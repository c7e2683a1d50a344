//! Zero-shot labeling of a track and its segments against a fixed set of
//! label categories, by cosine similarity in a joint audio/text embedding
//! space.

mod analysis;
mod classify;

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::AudioError;
use crate::backends::BackendError;

pub use analysis::{CategoryClassification, LabelScore, SegmentAnalysis, TrackAnalysis};
pub use classify::{
    analyze_segments, analyze_track, argmax_first, classify_category, cosine_scores, Analyzer,
    LabelCache,
};

const BUILTIN_TAXONOMY: &str = include_str!("../../data/taxonomy.json");

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("invalid taxonomy: {0}")]
    Invalid(String),
    #[error("cannot read taxonomy {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("category {0} has no labels")]
    EmptyCategory(String),
    #[error("{0} embedding is zero or not finite")]
    DegenerateEmbedding(String),
    #[error("audio embedding has dimension {audio}, label embeddings {label}")]
    DimensionMismatch { audio: usize, label: usize },
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error("segment {index}: {source}")]
    Segment {
        index: usize,
        source: Box<TaxonomyError>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    SegmentWise,
    ContentStyle,
    VisualStyle,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCategory {
    pub id: String,
    pub display_name: String,
    pub scope: Scope,
    pub labels: Vec<String>,
    /// Allows fewer than two labels.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub degenerate: bool,
}

impl LabelCategory {
    /// The phrase used in prompts: `"<Display name> is <label>."`.
    pub fn sentence(&self, label: &str) -> String {
        format!("{} is {}.", self.display_name, label)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelTaxonomy {
    pub version: String,
    pub categories: Vec<LabelCategory>,
}

impl LabelTaxonomy {
    /// The shipped taxonomy.
    pub fn builtin() -> Self {
        Self::from_json(BUILTIN_TAXONOMY).expect("built-in taxonomy is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, TaxonomyError> {
        let t: LabelTaxonomy =
            serde_json::from_str(text).map_err(|e| TaxonomyError::Invalid(e.to_string()))?;
        t.validate()?;
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Self, TaxonomyError> {
        let text = std::fs::read_to_string(path).map_err(|source| TaxonomyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("taxonomy serializes")
    }

    pub fn validate(&self) -> Result<(), TaxonomyError> {
        let mut problems = Vec::new();
        if self.version.trim().is_empty() {
            problems.push("version is empty".to_string());
        }
        let mut ids = HashSet::new();
        for c in &self.categories {
            if !ids.insert(c.id.as_str()) {
                problems.push(format!("duplicate category id {}", c.id));
            }
            if c.display_name.trim().is_empty() {
                problems.push(format!("category {} has an empty display name", c.id));
            }
            let min = if c.degenerate { 1 } else { 2 };
            if c.labels.len() < min {
                problems.push(format!("category {} has {} labels, needs {min}", c.id, c.labels.len()));
            }
            let mut seen = HashSet::new();
            for l in &c.labels {
                if l.trim().is_empty() {
                    problems.push(format!("category {} has an empty label", c.id));
                }
                if !seen.insert(l.as_str()) {
                    problems.push(format!("category {} repeats label {l:?}", c.id));
                }
            }
        }
        for scope in [Scope::SegmentWise, Scope::ContentStyle, Scope::VisualStyle] {
            if !self.categories.iter().any(|c| c.scope == scope) {
                problems.push(format!("no category with scope {scope:?}"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(TaxonomyError::Invalid(problems.join("; ")))
        }
    }

    pub fn in_scope(&self, scope: Scope) -> impl Iterator<Item = &LabelCategory> {
        self.categories.iter().filter(move |c| c.scope == scope)
    }

    pub fn category(&self, id: &str) -> Option<&LabelCategory> {
        self.categories.iter().find(|c| c.id == id)
    }
}
