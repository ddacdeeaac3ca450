//! Scenario files: the JSON description of one placement study.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "name": "demo",
//!   "roi": { "extent": [8, 8, 4], "resolution": [1, 1, 1], "excluded_boxes": [] },
//!   "lidar_models": [
//!     { "name": "beam4", "evenly_spaced": { "count": 4, "lowest": "-15deg", "highest": "15deg" } }
//!   ],
//!   "lidars": [ { "model": "beam4", "count": 2 } ],
//!   "bounds": {
//!     "lower": { "position": [3, 3, 2], "yaw": 0, "pitch": 0, "roll": 0 },
//!     "upper": { "position": [5, 5, 3], "yaw": 0, "pitch": "30deg", "roll": "30deg" }
//!   },
//!   "abc": { "num_bees": 20, "max_iterations": 50, "abandonment_threshold": 100, "seed": 1 },
//!   "odr": { "object": { "dims": [2, 2, 2] }, "trials": 500, "threshold": 1 }
//! }
//! ```
//!
//! Angles are radians when given as numbers, or strings with a `deg`/`rad`
//! suffix. Serializing a parsed scenario yields its canonical form: models
//! as explicit pitch lists and every angle as bare radians.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::abc::AbcParams;
use crate::error::Error;
use crate::geometry::{LidarModel, PoseBounds, RoiSpec};
use crate::odr::ObjectSpec;
use crate::placement::PlacementProblem;
use crate::units;

pub const SCHEMA_VERSION: u32 = 1;

/// A validation failure, tagged with the JSON path it concerns.
#[derive(Debug, thiserror::Error)]
#[error("{path}: {message}")]
pub struct SchemaError {
    pub path: String,
    pub message: String,
}

impl SchemaError {
    fn new(path: impl Into<String>, message: impl ToString) -> Self {
        SchemaError {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNamedModel", into = "RawNamedModel")]
pub struct NamedModel {
    pub name: String,
    pub model: LidarModel,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvenlySpaced {
    count: usize,
    #[serde(deserialize_with = "units::angle")]
    lowest: f64,
    #[serde(deserialize_with = "units::angle")]
    highest: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNamedModel {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none", deserialize_with = "opt_angle_list")]
    beam_pitches: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    evenly_spaced: Option<EvenlySpaced>,
}

fn opt_angle_list<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<Vec<f64>>, D::Error> {
    units::angle_list(d).map(Some)
}

impl TryFrom<RawNamedModel> for NamedModel {
    type Error = Error;

    fn try_from(raw: RawNamedModel) -> Result<Self, Error> {
        let model = match (raw.beam_pitches, raw.evenly_spaced) {
            (Some(p), None) => LidarModel::new(p),
            (None, Some(e)) => LidarModel::evenly_spaced(e.count, e.lowest, e.highest),
            _ => Err(Error::InvalidModel(format!(
                "model {:?} needs exactly one of beam_pitches or evenly_spaced",
                raw.name
            ))),
        }
        .map_err(|e| Error::InvalidModel(format!("model {:?}: {e}", raw.name)))?;
        Ok(NamedModel {
            name: raw.name,
            model,
        })
    }
}

impl From<NamedModel> for RawNamedModel {
    fn from(m: NamedModel) -> Self {
        RawNamedModel {
            name: m.name,
            beam_pitches: Some(m.model.beam_pitches().to_vec()),
            evenly_spaced: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LidarCount {
    pub model: String,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdrSettings {
    #[serde(default)]
    pub object: ObjectSpec,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_odr_threshold")]
    pub threshold: usize,
}

fn default_trials() -> usize {
    1000
}

fn default_odr_threshold() -> usize {
    1
}

impl Default for OdrSettings {
    fn default() -> Self {
        OdrSettings {
            object: ObjectSpec::default(),
            trials: default_trials(),
            threshold: default_odr_threshold(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
    pub roi: RoiSpec,
    pub lidar_models: Vec<NamedModel>,
    pub lidars: Vec<LidarCount>,
    pub bounds: PoseBounds,
    pub abc: AbcParams,
    #[serde(default)]
    pub odr: OdrSettings,
}

impl Scenario {
    /// Parses and validates.
    pub fn from_json(text: &str) -> Result<Self, SchemaError> {
        let scenario: Scenario = serde_json::from_str(text).map_err(|e| SchemaError::new("$", e))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// SHA-256 of the canonical JSON, hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(
            serde_json::to_string(self).expect("scenario serializes").as_bytes(),
        ))
    }

    pub fn validate(&self) -> Result<(), SchemaError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(SchemaError::new(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        self.roi.validate().map_err(|e| SchemaError::new("roi", e))?;
        crate::geometry::build_voxel_grid(&self.roi).map_err(|e| SchemaError::new("roi", e))?;
        self.bounds.validate().map_err(|e| SchemaError::new("bounds", e))?;
        self.abc.validate().map_err(|e| SchemaError::new("abc", e))?;
        if self.odr.trials == 0 {
            return Err(SchemaError::new("odr.trials", "must be at least 1"));
        }
        for (i, m) in self.lidar_models.iter().enumerate() {
            if self.lidar_models[..i].iter().any(|o| o.name == m.name) {
                return Err(SchemaError::new(
                    format!("lidar_models[{i}].name"),
                    format!("duplicate model name {:?}", m.name),
                ));
            }
        }
        if self.lidars.iter().map(|l| l.count).sum::<usize>() == 0 {
            return Err(SchemaError::new("lidars", "at least one lidar is required"));
        }
        for (i, l) in self.lidars.iter().enumerate() {
            self.model(&l.model)
                .map_err(|e| SchemaError::new(format!("lidars[{i}].model"), e.message))?;
        }
        Ok(())
    }

    pub fn model(&self, name: &str) -> Result<&LidarModel, SchemaError> {
        self.lidar_models
            .iter()
            .find(|m| m.name == name)
            .map(|m| &m.model)
            .ok_or_else(|| SchemaError::new("lidar_models", format!("unknown model {name:?}")))
    }

    /// One `(model name, model)` per LiDAR, in declaration order.
    pub fn lidar_list(&self) -> Vec<(String, LidarModel)> {
        self.lidars
            .iter()
            .flat_map(|l| {
                let model = self.model(&l.model).expect("validated").clone();
                std::iter::repeat_n((l.model.clone(), model), l.count)
            })
            .collect()
    }

    pub fn problem(&self) -> crate::Result<PlacementProblem> {
        let models = self.lidar_list().into_iter().map(|(_, m)| m).collect();
        PlacementProblem::new(&self.roi, models, self.bounds)
    }

    /// Same scenario with `count` LiDARs of model `model` only.
    pub fn with_lidars(&self, model: &str, count: usize) -> Result<Scenario, SchemaError> {
        let mut s = self.clone();
        s.lidars = vec![LidarCount {
            model: model.to_string(),
            count,
        }];
        s.validate()?;
        Ok(s)
    }
}
