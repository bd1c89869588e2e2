//! Model file: `{"version":1,"layer_dims":[..],"weights":[[..]..],"biases":[[..]..],"seed":N}`
//! with every parameter written to 17 significant digits.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::aggregator::model::AggregatorModel;
use crate::error::{Error, Result};
use crate::numfmt::Precise;
use crate::scalar::Scalar;

const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    version: u32,
    layer_dims: Vec<usize>,
    weights: Vec<Vec<Precise>>,
    biases: Vec<Vec<Precise>>,
    seed: u64,
}

fn precise<T: Scalar>(v: &[Vec<T>]) -> Vec<Vec<Precise>> {
    v.iter()
        .map(|row| row.iter().map(|x| Precise(x.to_f64_lossy())).collect())
        .collect()
}

fn scalars<T: Scalar>(v: Vec<Vec<Precise>>) -> Vec<Vec<T>> {
    v.into_iter()
        .map(|row| row.into_iter().map(|p| T::from_f64(p.0).unwrap_or_else(T::nan)).collect())
        .collect()
}

pub fn model_to_json<T: Scalar>(m: &AggregatorModel<T>) -> Result<String> {
    m.validate()?;
    let file = ModelFile {
        version: MODEL_VERSION,
        layer_dims: m.layer_dims.clone(),
        weights: precise(&m.weights),
        biases: precise(&m.biases),
        seed: m.seed,
    };
    let mut s = serde_json::to_string(&file).map_err(|e| Error::Model(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn model_from_json<T: Scalar>(text: &str) -> Result<AggregatorModel<T>> {
    let f: ModelFile = serde_json::from_str(text).map_err(|e| Error::Model(format!("model file: {e}")))?;
    if f.version != MODEL_VERSION {
        return Err(Error::Model(format!("unsupported model version {}", f.version)));
    }
    let m = AggregatorModel {
        layer_dims: f.layer_dims,
        weights: scalars(f.weights),
        biases: scalars(f.biases),
        seed: f.seed,
    };
    m.validate()?;
    Ok(m)
}

pub fn save_model<T: Scalar>(m: &AggregatorModel<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, model_to_json(m)?).map_err(|e| Error::io(path, e))
}

pub fn load_model<T: Scalar>(path: impl AsRef<Path>) -> Result<AggregatorModel<T>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text)
}
