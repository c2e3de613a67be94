//! TOML model documents.
//!
//! ```toml
//! dimension = 2
//! components = 1
//! fit_seed = 7
//! weights = [1.0]
//!
//! [truncation]
//! lower = [0.0, 0.0]
//! upper = [inf, inf]
//!
//! [[component]]
//! mean = [0.5, 1.0]
//! covariance = [1.0, 0.2, 0.2, 2.0] # row-major
//! ```
//!
//! Floats are written in shortest round-trip form, so finite values survive a
//! write/read cycle bit-exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{GaussianComponent, GaussianMixture, MixtureError, TruncationBox};

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("malformed model document: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("model document shape: {0}")]
    Shape(String),
    #[error(transparent)]
    Invalid(#[from] MixtureError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureDocument {
    pub dimension: usize,
    pub components: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_seed: Option<u64>,
    pub weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<BoxDocument>,
    #[serde(rename = "component")]
    pub component_list: Vec<ComponentDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxDocument {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentDocument {
    pub mean: Vec<f64>,
    pub covariance: Vec<f64>,
}

impl From<&GaussianMixture> for MixtureDocument {
    fn from(m: &GaussianMixture) -> Self {
        let d = m.dim();
        MixtureDocument {
            dimension: d,
            components: m.n_components(),
            fit_seed: m.fit_seed(),
            weights: m.weights().to_vec(),
            truncation: m.truncation().map(|b| BoxDocument { lower: b.lower().to_vec(), upper: b.upper().to_vec() }),
            component_list: m
                .components()
                .iter()
                .map(|c| ComponentDocument {
                    mean: c.mean().iter().cloned().collect(),
                    covariance: (0..d * d).map(|i| c.covariance()[(i / d, i % d)]).collect(),
                })
                .collect(),
        }
    }
}

impl TryFrom<MixtureDocument> for GaussianMixture {
    type Error = ParseError;

    fn try_from(doc: MixtureDocument) -> Result<Self, ParseError> {
        let d = doc.dimension;
        if doc.components != doc.component_list.len() || doc.weights.len() != doc.components {
            return Err(ParseError::Shape(format!(
                "declared {} components, found {} weights and {} component tables",
                doc.components,
                doc.weights.len(),
                doc.component_list.len()
            )));
        }
        let comps = doc
            .component_list
            .iter()
            .map(|c| {
                if c.mean.len() != d || c.covariance.len() != d * d {
                    return Err(ParseError::Shape(format!("component does not match dimension {d}")));
                }
                Ok(GaussianComponent::from_slices(&c.mean, &c.covariance)?)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let truncation = doc.truncation.map(|b| TruncationBox::new(b.lower, b.upper)).transpose()?;
        Ok(GaussianMixture::new(doc.weights, comps, truncation)?.with_fit_seed(doc.fit_seed))
    }
}

impl GaussianMixture {
    pub fn to_toml_string(&self) -> String {
        toml::to_string(&MixtureDocument::from(self)).expect("model documents always serialize")
    }

    pub fn from_toml_str(s: &str) -> Result<Self, ParseError> {
        let doc: MixtureDocument = toml::from_str(s)?;
        doc.try_into()
    }

    pub fn read_toml(path: &Path) -> Result<Self, ParseError> {
        let s = std::fs::read_to_string(path)
            .map_err(|source| ParseError::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&s)
    }
}
