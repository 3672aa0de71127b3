use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    /// Sorted category levels; filled at ingestion, empty for numeric features.
    #[serde(default)]
    pub levels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpec {
    pub column: String,
    /// Cell value of the positive class.
    pub positive: String,
}

/// Declared column kinds and label column, read from a TOML schema file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub label: LabelSpec,
    pub features: Vec<FeatureSpec>,
}

impl Schema {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let schema: Schema = toml::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    fn validate(&self) -> Result<()> {
        if self.features.len() < 2 {
            return Err(Error::Schema("at least 2 features are required".into()));
        }
        let mut names: Vec<&str> = self.features.iter().map(|f| f.name.as_str()).collect();
        names.push(&self.label.column);
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Schema(format!("duplicate column `{}`", w[0])));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_names_rejected() {
        let text = r#"
            label = { column = "a", positive = "1" }
            [[features]]
            name = "a"
            kind = "numeric"
            [[features]]
            name = "b"
            kind = "numeric"
        "#;
        assert!(Schema::from_toml_str(text).is_err());
    }

    #[test]
    fn bundled_schemas_parse() {
        let root = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/");
        let german = Schema::from_path(format!("{root}german_credit.schema.toml")).unwrap();
        assert_eq!(german.features.len(), 16);
        let diabetes = Schema::from_path(format!("{root}diabetes.schema.toml")).unwrap();
        assert_eq!(diabetes.features.len(), 8);
    }
}
