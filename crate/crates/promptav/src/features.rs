//! Stylometric feature sets injected into verification prompts.
//!
//! A feature set is an ordered list of linguistic variables the model is told
//! to compare across the two texts. Order is significant: it fixes the
//! numbering in the rendered prompt and in the model's per-feature scores.

use std::path::Path;

use serde::{Deserialize, Serialize};

pub const MAX_FEATURES: usize = 20;

/// Identifier of the built-in eight-feature set.
pub const DEFAULT_FEATURE_SET_ID: &str = "default-8";

#[derive(Debug, thiserror::Error)]
pub enum FeatureSetError {
    #[error("feature set must contain between 1 and {MAX_FEATURES} features, got {0}")]
    InvalidSize(usize),
    #[error("duplicate feature_id {0:?}")]
    DuplicateFeatureId(String),
    #[error("feature {0:?} has an empty display_name")]
    EmptyDisplayName(String),
    #[error("failed to read feature set {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("failed to parse feature set {path}: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
}

/// One linguistic variable the model is instructed to evaluate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub feature_id: String,
    pub display_name: String,
    /// One-sentence instruction injected verbatim into the prompt.
    pub description: String,
}

impl FeatureDescriptor {
    pub fn new(feature_id: &str, display_name: &str, description: &str) -> Self {
        Self {
            feature_id: feature_id.into(),
            display_name: display_name.into(),
            description: description.into(),
        }
    }
}

/// Ordered collection of [`FeatureDescriptor`]s.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub set_id: String,
    pub features: Vec<FeatureDescriptor>,
}

impl FeatureSet {
    pub fn new(set_id: &str, features: Vec<FeatureDescriptor>) -> Result<Self, FeatureSetError> {
        let set = Self {
            set_id: set_id.into(),
            features,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<(), FeatureSetError> {
        if self.features.is_empty() || self.features.len() > MAX_FEATURES {
            return Err(FeatureSetError::InvalidSize(self.features.len()));
        }
        let mut seen = std::collections::HashSet::new();
        for feature in &self.features {
            if !seen.insert(feature.feature_id.as_str()) {
                return Err(FeatureSetError::DuplicateFeatureId(
                    feature.feature_id.clone(),
                ));
            }
            if feature.display_name.trim().is_empty() {
                return Err(FeatureSetError::EmptyDisplayName(feature.feature_id.clone()));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Load a feature set from a JSON file of the form
    /// `{"set_id": "...", "features": [{"feature_id","display_name","description"}, ...]}`.
    pub fn load(path: &Path) -> Result<Self, FeatureSetError> {
        let body = std::fs::read_to_string(path).map_err(|source| FeatureSetError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let set: FeatureSet =
            serde_json::from_str(&body).map_err(|source| FeatureSetError::Parse {
                path: path.display().to_string(),
                source,
            })?;
        set.validate()?;
        Ok(set)
    }
}

impl Default for FeatureSet {
    /// The built-in eight-variable set used when no custom set is given.
    fn default() -> Self {
        FeatureSet {
            set_id: DEFAULT_FEATURE_SET_ID.into(),
            features: vec![
                FeatureDescriptor::new(
                    "punctuation-style",
                    "Punctuation style",
                    "Compare the use or avoidance of punctuation marks across the two texts.",
                ),
                FeatureDescriptor::new(
                    "special-characters-style",
                    "Special characters style",
                    "Compare the preference for particular special characters.",
                ),
                FeatureDescriptor::new(
                    "capitalization-style",
                    "Capitalization style",
                    "Compare capitalization habits, including unconventional or continuous capitalization.",
                ),
                FeatureDescriptor::new(
                    "acronyms-and-abbreviations",
                    "Acronyms and abbreviations",
                    "Compare how acronyms and abbreviations are used.",
                ),
                FeatureDescriptor::new(
                    "writing-style",
                    "Writing style",
                    "Compare the overall writing style, such as descriptive versus narrative elements.",
                ),
                FeatureDescriptor::new(
                    "expressions-and-idioms",
                    "Expressions and idioms",
                    "Compare recurring expressions, idioms, and turns of phrase.",
                ),
                FeatureDescriptor::new(
                    "tone-and-mood",
                    "Tone and mood",
                    "Compare the tone and mood conveyed by each text.",
                ),
                FeatureDescriptor::new(
                    "vocabulary-usage",
                    "Vocabulary usage",
                    "Compare the richness and choice of vocabulary.",
                ),
            ],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_set_has_eight_ordered_features() {
        let set = FeatureSet::default();
        assert_eq!(set.set_id, DEFAULT_FEATURE_SET_ID);
        assert_eq!(set.len(), 8);
        assert_eq!(set.features[0].display_name, "Punctuation style");
        assert_eq!(set.features[7].display_name, "Vocabulary usage");
        set.validate().unwrap();
    }

    #[test]
    fn rejects_duplicate_ids_and_bad_sizes() {
        let dup = FeatureSet {
            set_id: "x".into(),
            features: vec![
                FeatureDescriptor::new("f", "F", "d"),
                FeatureDescriptor::new("f", "G", "d"),
            ],
        };
        assert!(matches!(
            dup.validate(),
            Err(FeatureSetError::DuplicateFeatureId(_))
        ));

        let empty = FeatureSet {
            set_id: "x".into(),
            features: vec![],
        };
        assert!(matches!(empty.validate(), Err(FeatureSetError::InvalidSize(0))));

        let oversized = FeatureSet {
            set_id: "x".into(),
            features: (0..21)
                .map(|i| FeatureDescriptor::new(&format!("f{i}"), "F", "d"))
                .collect(),
        };
        assert!(matches!(
            oversized.validate(),
            Err(FeatureSetError::InvalidSize(21))
        ));
    }

    #[test]
    fn loads_from_json_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("set.json");
        std::fs::write(
            &path,
            r#"{"set_id":"custom-2","features":[
                {"feature_id":"a","display_name":"A","description":"Compare A."},
                {"feature_id":"b","display_name":"B","description":"Compare B."}
            ]}"#,
        )
        .unwrap();
        let set = FeatureSet::load(&path).unwrap();
        assert_eq!(set.set_id, "custom-2");
        assert_eq!(set.len(), 2);
    }
}
