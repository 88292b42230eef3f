//! JSON checkpoints: `{"format_version":1,"config":{...},"params":{name:{"shape","values"}}}`.
//!
//! Parameters are written in name order and floats use the shortest
//! round-trip representation, so identical stores produce identical bytes.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{NnError, ParameterStore, Tensor};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredParam {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: serde_json::Value,
    pub params: BTreeMap<String, StoredParam>,
}

impl Checkpoint {
    pub fn new<C: Serialize>(config: &C, store: &ParameterStore) -> Result<Self, NnError> {
        let config = serde_json::to_value(config).map_err(|e| NnError::Checkpoint(e.to_string()))?;
        let params = store
            .iter()
            .map(|(name, p)| {
                (
                    name.to_string(),
                    StoredParam {
                        shape: p.tensor.shape().to_vec(),
                        values: p.tensor.values().to_vec(),
                    },
                )
            })
            .collect();
        Ok(Self {
            format_version: FORMAT_VERSION,
            config,
            params,
        })
    }

    pub fn config<C: for<'de> Deserialize<'de>>(&self) -> Result<C, NnError> {
        serde_json::from_value(self.config.clone()).map_err(|e| NnError::Checkpoint(format!("config: {e}")))
    }

    /// Copies the stored values into `store`, whose parameter set and shapes
    /// must match exactly.
    pub fn restore_into(&self, store: &mut ParameterStore) -> Result<(), NnError> {
        let expected: Vec<&str> = store.names().collect();
        let got: Vec<&str> = self.params.keys().map(String::as_str).collect();
        if expected != got {
            let missing: Vec<_> = expected.iter().filter(|n| !self.params.contains_key(**n)).collect();
            let extra: Vec<_> = got.iter().filter(|n| !store.contains(n)).collect();
            return Err(NnError::Checkpoint(format!(
                "parameter mismatch: missing {missing:?}, unexpected {extra:?}"
            )));
        }
        for (name, p) in &self.params {
            let have = store.get(name)?.shape().to_vec();
            if have != p.shape {
                return Err(NnError::Checkpoint(format!(
                    "{name}: shape {:?}, model expects {have:?}",
                    p.shape
                )));
            }
            Tensor::new(p.shape.clone(), p.values.clone())?;
            store.set_values(name, p.values.clone())?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, NnError> {
        let c: Checkpoint = serde_json::from_str(text).map_err(|e| NnError::Checkpoint(e.to_string()))?;
        if c.format_version != FORMAT_VERSION {
            return Err(NnError::Checkpoint(format!(
                "unsupported format version {}",
                c.format_version
            )));
        }
        Ok(c)
    }
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<(), NnError> {
    std::fs::write(path, checkpoint.to_json()).map_err(|source| NnError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, NnError> {
    let text = std::fs::read_to_string(path).map_err(|source| NnError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Checkpoint::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> ParameterStore {
        let mut s = ParameterStore::new();
        s.insert("b", Tensor::matrix(1, 2, vec![0.1, 1.0 / 3.0]).unwrap()).unwrap();
        s.insert("a", Tensor::scalar(-2.5e-17)).unwrap();
        s
    }

    #[test]
    fn round_trip_is_exact() {
        let s = store();
        let c = Checkpoint::new(&serde_json::json!({"k": 1}), &s).unwrap();
        let text = c.to_json();
        assert!(text.starts_with("{\"format_version\":1,\"config\":{\"k\":1},\"params\":{\"a\""));
        let back = Checkpoint::from_json(&text).unwrap();
        let mut t = store();
        t.set_values("b", vec![0.0, 0.0]).unwrap();
        back.restore_into(&mut t).unwrap();
        assert_eq!(t.get("b").unwrap().values(), s.get("b").unwrap().values());
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn mismatches_are_rejected() {
        let c = Checkpoint::new(&(), &store()).unwrap();
        let mut other = ParameterStore::new();
        other.insert("a", Tensor::scalar(0.0)).unwrap();
        assert!(c.restore_into(&mut other).is_err());
        let mut wrong_shape = ParameterStore::new();
        wrong_shape.insert("a", Tensor::scalar(0.0)).unwrap();
        wrong_shape.insert("b", Tensor::zeros(2, 1)).unwrap();
        assert!(c.restore_into(&mut wrong_shape).is_err());
        let bad = c.to_json().replace("\"format_version\":1", "\"format_version\":7");
        assert!(Checkpoint::from_json(&bad).is_err());
    }
}
