//! Versioned JSON document for trained models. Parameters are serialized
//! as shortest-round-trip decimals, so save/load reproduces the exact bits.

use serde::{Deserialize, Serialize};

use super::{Activation, DenseLayer, MlpModel, Normalizer};
use crate::domain::MaterialClass;
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizerDoc {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerDoc {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: String,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// On-disk form of a trained model plus enough bookkeeping to audit it:
/// the digest of the training config and the held-out row indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format_version: u32,
    pub class_order: Vec<String>,
    pub normalizer: NormalizerDoc,
    pub layers: Vec<LayerDoc>,
    pub dropout_rate: f64,
    pub dropout_layers: Vec<usize>,
    pub train_config_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_indices: Option<Vec<usize>>,
}

impl ModelDocument {
    pub fn from_model(
        model: &MlpModel,
        train_config_digest: String,
        test_indices: Option<Vec<usize>>,
    ) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            class_order: model.class_order().iter().map(|c| c.name().to_string()).collect(),
            normalizer: NormalizerDoc {
                mean: model.normalizer().mean().to_vec(),
                std: model.normalizer().std().to_vec(),
            },
            layers: model
                .layers()
                .iter()
                .map(|l| LayerDoc {
                    in_dim: l.in_dim(),
                    out_dim: l.out_dim(),
                    activation: l.activation().name().to_string(),
                    weights: l.weights().to_vec(),
                    biases: l.biases().to_vec(),
                })
                .collect(),
            dropout_rate: model.dropout_rate(),
            dropout_layers: model.dropout_layers().to_vec(),
            train_config_digest,
            test_indices,
        }
    }

    pub fn to_model(&self) -> Result<MlpModel> {
        let mut class_order = Vec::with_capacity(self.class_order.len());
        for name in &self.class_order {
            let class = MaterialClass::from_name(name)?;
            if class_order.contains(&class) {
                return Err(Error::ModelDocument(format!(
                    "class {name:?} appears twice in class_order"
                )));
            }
            class_order.push(class);
        }
        let normalizer =
            Normalizer::from_parts(self.normalizer.mean.clone(), self.normalizer.std.clone())?;
        let mut layers = Vec::with_capacity(self.layers.len());
        for doc in &self.layers {
            layers.push(DenseLayer::new(
                doc.in_dim,
                doc.out_dim,
                doc.weights.clone(),
                doc.biases.clone(),
                Activation::from_name(&doc.activation)?,
            )?);
        }
        MlpModel::new(
            normalizer,
            layers,
            self.dropout_rate,
            self.dropout_layers.clone(),
            class_order,
        )
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("model document serializes")
    }

    /// Parses a document, failing fast on an unknown `format_version`
    /// before any structural validation.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| Error::ModelDocument(format!("invalid JSON: {e}")))?;
        match value.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(MODEL_FORMAT_VERSION) => {}
            Some(v) => {
                return Err(Error::ModelDocument(format!(
                    "unsupported format_version {v}, this build reads version {MODEL_FORMAT_VERSION}"
                )))
            }
            None => {
                return Err(Error::ModelDocument(
                    "missing integer format_version field".into(),
                ))
            }
        }
        serde_json::from_value(value).map_err(|e| Error::ModelDocument(format!("malformed model: {e}")))
    }
}
