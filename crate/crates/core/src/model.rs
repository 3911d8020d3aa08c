//! Trained model bundles and their versioned on-disk format.
//!
//! A model is one ensemble, or two for the two-stage entity-entity pipeline.
//! Two-stage prediction mirrors training: decode with stage 1 at bias 0,
//! append the entity-entity features from a link graph, then decode with
//! stage 2 at the requested bias.

use serde::{Deserialize, Serialize};

use crate::boosting::{self, Ensemble, Loss, Mode};
use crate::error::{Error, Result};
use crate::lattice::Assignment;
use crate::linking::{entity_entity_features, LinkGraph, LinkingExample};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub stage1: Ensemble,
    pub stage2: Option<Ensemble>,
}

impl TrainedModel {
    pub fn single(stage1: Ensemble) -> Self {
        Self {
            stage1,
            stage2: None,
        }
    }

    pub fn two_stage(stage1: Ensemble, stage2: Ensemble) -> Self {
        Self {
            stage1,
            stage2: Some(stage2),
        }
    }

    /// Feature dimension the input corpus must carry.
    pub fn feature_dim(&self) -> usize {
        self.stage1.feature_dim()
    }

    pub fn num_stages(&self) -> usize {
        if self.stage2.is_some() {
            2
        } else {
            1
        }
    }

    pub fn loss(&self) -> Loss {
        self.stage1.config().loss
    }

    pub fn mode(&self) -> Mode {
        self.stage1.config().mode
    }

    /// True when prediction needs a link graph (two-stage models only).
    pub fn needs_link_graph(&self) -> bool {
        self.stage2.is_some()
    }

    pub fn predict(
        &self,
        example: &LinkingExample,
        graph: Option<&LinkGraph>,
        nil_bias: f64,
    ) -> Result<Assignment> {
        match &self.stage2 {
            None => boosting::decode(&self.stage1, example, nil_bias),
            Some(stage2) => {
                let graph = graph.ok_or_else(|| {
                    Error::Config("two-stage model requires a link graph".into())
                })?;
                let first = crate::linking::first_stage_assignment(&self.stage1, example)?;
                let augmented = entity_entity_features(example, &first, graph)?;
                boosting::decode(stage2, &augmented, nil_bias)
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    model: TrainedModel,
}

/// Serialize to the versioned JSON model format. Pretty-printed so model
/// files diff cleanly; numbers round-trip exactly.
pub fn to_json(model: &TrainedModel) -> Result<String> {
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        model: model.clone(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

/// Parse a model file, checking the format version before anything else.
pub fn from_json(text: &str) -> Result<TrainedModel> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let found = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Config("model file lacks a format_version".into()))?;
    if found != u64::from(MODEL_FORMAT_VERSION) {
        return Err(Error::VersionMismatch {
            found: found as u32,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    let file: ModelFile = serde_json::from_value(value)?;
    Ok(file.model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boosting::BoostConfig;

    #[test]
    fn json_round_trip_is_identity() {
        let model = TrainedModel::single(Ensemble::empty(4, BoostConfig::default()));
        let text = to_json(&model).unwrap();
        let back = from_json(&text).unwrap();
        assert_eq!(model, back);
        // byte-stable re-serialization
        assert_eq!(text, to_json(&back).unwrap());
    }

    #[test]
    fn version_is_checked() {
        let model = TrainedModel::single(Ensemble::empty(2, BoostConfig::default()));
        let text = to_json(&model).unwrap().replace(
            "\"format_version\": 1",
            "\"format_version\": 99",
        );
        assert!(matches!(
            from_json(&text).unwrap_err(),
            Error::VersionMismatch {
                found: 99,
                expected: 1
            }
        ));
    }
}
