//! Reproducibility metafiles.
//!
//! A metafile records everything needed to replay a stage: input digests,
//! preprocessing parameters, learner specification, seed and the digests of
//! the produced dataset and scaler. It never contains wall-clock times or
//! absolute paths, so identical runs produce byte-identical metafiles.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::evaluation::{Exclusions, SplitSpec};
use crate::integral::IntegralParams;
use crate::learners::ModelSpec;
use crate::mex::MexParams;

pub const METAFILE_SCHEMA_VERSION: u32 = 1;
pub const TOOL_NAME: &str = "telewb";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    /// Channel kind or `dataset`.
    pub role: String,
    /// File name without directories; empty when the input is referenced by digest only.
    pub file: String,
    pub sha256: String,
}

impl InputDigest {
    pub fn of_file(role: impl Into<String>, path: &std::path::Path, bytes: &[u8]) -> Self {
        InputDigest {
            role: role.into(),
            file: path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            sha256: sha256_hex(bytes),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    PreprocessMex,
    PreprocessIntegral,
    Train,
    Run,
    Predict,
    Evaluate,
    Importance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pipeline", rename_all = "snake_case")]
pub enum PreprocessParams {
    Mex(MexParams),
    Integral(IntegralParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metafile {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub stage: Stage,
    /// `mex`, `positional` or `per_revolution`.
    pub representation: Option<String>,
    pub inputs: Vec<InputDigest>,
    pub preprocess: Option<PreprocessParams>,
    pub exclusions: Option<Exclusions>,
    pub learner: Option<ModelSpec>,
    pub split: Option<SplitSpec>,
    pub seed: Option<u64>,
    pub scaler_digest: Option<String>,
    pub dataset_digest: String,
    pub warnings: Vec<String>,
    /// Stage-specific parameters (score kind, subset, ...).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arguments: Option<serde_json::Value>,
}

impl Metafile {
    pub fn new(stage: Stage, dataset_digest: impl Into<String>) -> Self {
        Metafile {
            schema_version: METAFILE_SCHEMA_VERSION,
            tool: TOOL_NAME.into(),
            tool_version: crate::TOOL_VERSION.into(),
            stage,
            representation: None,
            inputs: Vec::new(),
            preprocess: None,
            exclusions: None,
            learner: None,
            split: None,
            seed: None,
            scaler_digest: None,
            dataset_digest: dataset_digest.into(),
            warnings: Vec::new(),
            arguments: None,
        }
    }

    pub fn from_bytes(bytes: &[u8]) -> crate::Result<Self> {
        Ok(serde_json::from_slice(bytes)?)
    }
}

/// Canonical serialized form: pretty JSON with a trailing newline.
pub fn emit_metafile(meta: &Metafile) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(meta).expect("metafile serializes");
    bytes.push(b'\n');
    bytes
}
