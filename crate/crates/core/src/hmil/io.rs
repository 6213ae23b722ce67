use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encode::EncoderSpec;
use crate::error::{Error, Result};
use crate::schema::{fingerprint, SchemaNode};

use super::HmilModel;

pub const MODEL_FORMAT: &str = "hmil-explain/model-v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderRecord {
    pub location: String,
    pub encoder: EncoderSpec,
}

/// Serialized form of a trained model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub fingerprint: String,
    pub k: usize,
    pub schema: SchemaNode,
    pub encoders: Vec<EncoderRecord>,
    pub tensors: Vec<TensorRecord>,
}

impl ModelFile {
    pub fn from_model(model: &HmilModel) -> Self {
        let tensors = model
            .tensors
            .iter()
            .map(|(name, off, shape)| {
                let len: usize = shape.iter().product();
                TensorRecord {
                    name: name.clone(),
                    shape: shape.clone(),
                    data: model.params[*off..off + len].to_vec(),
                }
            })
            .collect();
        ModelFile {
            format: MODEL_FORMAT.into(),
            fingerprint: model.fingerprint().to_string(),
            k: model.k(),
            schema: model.schema().clone(),
            encoders: model
                .encoders()
                .into_iter()
                .map(|(location, encoder)| EncoderRecord {
                    location: location.to_string(),
                    encoder: encoder.clone(),
                })
                .collect(),
            tensors,
        }
    }

    pub fn into_model(self) -> Result<HmilModel> {
        if self.format != MODEL_FORMAT {
            return Err(Error::ModelFormat(format!(
                "unsupported format {:?}",
                self.format
            )));
        }
        if self.k == 0 {
            return Err(Error::ModelFormat("embedding width is zero".into()));
        }
        let actual = fingerprint(&self.schema);
        if actual != self.fingerprint {
            return Err(Error::ModelFormat(format!(
                "fingerprint mismatch: file says {}, schema gives {actual}",
                self.fingerprint
            )));
        }
        let mut model = HmilModel::build(&self.schema, self.k, 0);
        let encoders: Vec<EncoderRecord> = model
            .encoders()
            .into_iter()
            .map(|(location, encoder)| EncoderRecord {
                location: location.to_string(),
                encoder: encoder.clone(),
            })
            .collect();
        if encoders != self.encoders {
            return Err(Error::ModelFormat(
                "encoders do not match the schema".into(),
            ));
        }
        if model.tensors.len() != self.tensors.len() {
            return Err(Error::ModelFormat(format!(
                "expected {} tensors, found {}",
                model.tensors.len(),
                self.tensors.len()
            )));
        }
        for ((name, off, shape), rec) in model.tensors.iter().zip(&self.tensors) {
            if *name != rec.name || *shape != rec.shape {
                return Err(Error::ModelFormat(format!(
                    "tensor {} {:?} does not match expected {name} {shape:?}",
                    rec.name, rec.shape
                )));
            }
            let len: usize = shape.iter().product();
            if rec.data.len() != len {
                return Err(Error::ModelFormat(format!(
                    "tensor {name} holds {} values, shape needs {len}",
                    rec.data.len()
                )));
            }
            model.params[*off..off + len].copy_from_slice(&rec.data);
        }
        Ok(model)
    }
}

impl HmilModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ModelFile::from_model(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        file.into_model()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
