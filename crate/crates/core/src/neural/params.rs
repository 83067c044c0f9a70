//! Parameter files: a JSON object holding a shape manifest and one flat
//! array of values, tensors laid out row-major in manifest order.
//!
//! ```json
//! {"format":"vdal-params-v1",
//!  "manifest":[{"name":"0.weight","shape":[4,3]},{"name":"0.bias","shape":[1,3]}],
//!  "values":[...15 numbers...]}
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Module, NeuralError};

pub const FORMAT_TAG: &str = "vdal-params-v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: [usize; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamFile {
    pub format: String,
    pub manifest: Vec<ParamEntry>,
    pub values: Vec<f64>,
}

impl ParamFile {
    pub fn from_module<M: Module + ?Sized>(module: &M) -> Self {
        let manifest = module
            .parameter_names()
            .into_iter()
            .zip(module.parameters())
            .map(|(name, t)| ParamEntry {
                name,
                shape: t.shape().dims(),
            })
            .collect();
        ParamFile {
            format: FORMAT_TAG.to_string(),
            manifest,
            values: flatten(module),
        }
    }

    /// Copies the values into `module`, checking names and shapes first.
    pub fn apply_to<M: Module + ?Sized>(&self, module: &mut M) -> Result<(), NeuralError> {
        if self.format != FORMAT_TAG {
            return Err(NeuralError::ParamMismatch(format!("unknown format {:?}", self.format)));
        }
        let names = module.parameter_names();
        if names.len() != self.manifest.len() {
            return Err(NeuralError::ParamMismatch(format!(
                "{} tensors in file, {} in network",
                self.manifest.len(),
                names.len()
            )));
        }
        let total: usize = self.manifest.iter().map(|e| e.shape[0] * e.shape[1]).sum();
        if total != self.values.len() {
            return Err(NeuralError::ParamMismatch(format!(
                "manifest describes {total} values, file holds {}",
                self.values.len()
            )));
        }
        for ((entry, name), t) in self.manifest.iter().zip(&names).zip(module.parameters()) {
            if &entry.name != name || entry.shape != t.shape().dims() {
                return Err(NeuralError::ParamMismatch(format!(
                    "{} {:?} vs network {} {}",
                    entry.name,
                    entry.shape,
                    name,
                    t.shape()
                )));
            }
        }
        let mut offset = 0;
        for t in module.parameters_mut() {
            let n = t.len();
            t.data_mut().copy_from_slice(&self.values[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }
}

/// All parameter values concatenated in [`Module::parameters`] order.
pub fn flatten<M: Module + ?Sized>(module: &M) -> Vec<f64> {
    module
        .parameters()
        .iter()
        .flat_map(|t| t.data().iter().copied())
        .collect()
}

pub fn save_params<M: Module + ?Sized>(module: &M, path: &Path) -> Result<(), NeuralError> {
    let file = ParamFile::from_module(module);
    fs::write(path, serde_json::to_string(&file)?)?;
    Ok(())
}

pub fn load_params<M: Module + ?Sized>(module: &mut M, path: &Path) -> Result<(), NeuralError> {
    let file: ParamFile = serde_json::from_str(&fs::read_to_string(path)?)?;
    file.apply_to(module)
}
