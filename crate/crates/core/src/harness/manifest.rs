use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvcInputs {
    pub generated_embeddings: PathBuf,
    pub reference_embeddings: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskPair {
    pub id: String,
    pub generated_mask: PathBuf,
    pub reference_mask: PathBuf,
}

/// One model's evaluation inputs. Relative paths resolve against the
/// manifest's directory when loaded with [`EvaluationManifest::load`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationManifest {
    pub model_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cvc: Option<CvcInputs>,
    #[serde(default)]
    pub pairs: Vec<MaskPair>,
    /// Carried through to the report untouched.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human_scores: Option<serde_json::Value>,
}

impl EvaluationManifest {
    pub fn parse(text: &str) -> Result<Self, EvalError> {
        let manifest: Self =
            serde_json::from_str(text).map_err(|e| EvalError::ManifestParse(e.to_string()))?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let text = fs::read_to_string(path).map_err(|source| EvalError::File {
            path: path.to_path_buf(),
            source,
        })?;
        let mut manifest = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        manifest.resolve_paths(base);
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.cvc.is_none() && self.pairs.is_empty() {
            return Err(EvalError::ManifestParse(
                "manifest needs a cvc block, mask pairs, or both".into(),
            ));
        }
        let mut seen = HashSet::new();
        for pair in &self.pairs {
            if !seen.insert(pair.id.as_str()) {
                return Err(EvalError::ManifestParse(format!(
                    "duplicate pair id {:?}",
                    pair.id
                )));
            }
        }
        Ok(())
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(cvc) = &mut self.cvc {
            resolve(&mut cvc.generated_embeddings);
            resolve(&mut cvc.reference_embeddings);
        }
        for pair in &mut self.pairs {
            resolve(&mut pair.generated_mask);
            resolve(&mut pair.reference_mask);
        }
    }
}
