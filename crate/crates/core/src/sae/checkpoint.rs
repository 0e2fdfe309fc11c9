use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{SaeConfig, SaeModel};
use crate::error::{MispError, Result};
use crate::scalar::Scalar;

pub const CHECKPOINT_FORMAT: &str = "misp-sae-v1";

/// On-disk checkpoint. Numbers are written as shortest round-trip `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointDoc {
    pub format: String,
    pub config: SaeConfig<f64>,
    pub encoder_weights: Vec<Vec<f64>>,
    pub encoder_bias: Vec<f64>,
    pub decoder_weights: Vec<Vec<f64>>,
    pub decoder_bias: Vec<f64>,
}

fn rows_of<T: Scalar>(m: &Array2<T>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.iter().map(|v| v.as_f64()).collect()).collect()
}

fn matrix_of<T: Scalar>(rows: &[Vec<f64>], shape: (usize, usize), name: &str) -> Result<Array2<T>> {
    if rows.len() != shape.0 || rows.iter().any(|r| r.len() != shape.1) {
        return Err(MispError::Format(format!(
            "{name} must be {}x{}",
            shape.0, shape.1
        )));
    }
    Ok(Array2::from_shape_fn(shape, |(i, j)| T::lit(rows[i][j])))
}

impl<T: Scalar> SaeModel<T> {
    pub fn to_checkpoint(&self) -> CheckpointDoc {
        CheckpointDoc {
            format: CHECKPOINT_FORMAT.to_string(),
            config: self.config.cast(),
            encoder_weights: rows_of(&self.encoder_weights),
            encoder_bias: self.encoder_bias.iter().map(|v| v.as_f64()).collect(),
            decoder_weights: rows_of(&self.decoder_weights),
            decoder_bias: self.decoder_bias.iter().map(|v| v.as_f64()).collect(),
        }
    }

    pub fn from_checkpoint(doc: &CheckpointDoc) -> Result<Self> {
        if doc.format != CHECKPOINT_FORMAT {
            return Err(MispError::Format(format!(
                "unknown checkpoint format {:?}",
                doc.format
            )));
        }
        let config: SaeConfig<T> = doc.config.cast();
        let (h, n) = (config.hidden_dim, config.input_dim);
        let ew = matrix_of(&doc.encoder_weights, (h, n), "encoder_weights")?;
        let dw = matrix_of(&doc.decoder_weights, (n, h), "decoder_weights")?;
        let eb = Array1::from_iter(doc.encoder_bias.iter().map(|&v| T::lit(v)));
        let db = Array1::from_iter(doc.decoder_bias.iter().map(|&v| T::lit(v)));
        SaeModel::from_parts(config, ew, eb, dw, db)
    }

    pub fn to_checkpoint_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_checkpoint())?)
    }

    pub fn from_checkpoint_json(text: &str) -> Result<Self> {
        let doc: CheckpointDoc = serde_json::from_str(text)?;
        Self::from_checkpoint(&doc)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_checkpoint_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint_json(&fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_bit_exact() {
        let mut c = SaeConfig::<f64>::new(7);
        c.hidden_dim = 5;
        c.seed = 99;
        let m = SaeModel::init(c).unwrap();
        let text = m.to_checkpoint_json().unwrap();
        assert!(text.starts_with("{\"format\":\"misp-sae-v1\""));
        let back = SaeModel::<f64>::from_checkpoint_json(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_checkpoint_json().unwrap(), text);
    }

    #[test]
    fn rejects_wrong_format_and_shapes() {
        let c = SaeConfig::<f64>::new(2);
        let mut doc = SaeModel::zeros(c).unwrap().to_checkpoint();
        doc.format = "other".into();
        assert!(SaeModel::<f64>::from_checkpoint(&doc).is_err());
        doc.format = CHECKPOINT_FORMAT.into();
        doc.encoder_bias.pop();
        assert!(SaeModel::<f64>::from_checkpoint(&doc).is_err());
    }
}
