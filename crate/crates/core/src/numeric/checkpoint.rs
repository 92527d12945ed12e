//! JSON checkpoints.
//!
//! Floats go through `serde_json`, which prints the shortest decimal that
//! round-trips, so save/load is value-exact.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::mlp::{Activation, Layer, MlpNet};
use super::rng::RNG_FAMILY;
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// Serializable form of one [`MlpNet`]: widths, activation and the
/// parameter blocks in `layer{i}.weight, layer{i}.bias` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetRecord {
    pub widths: Vec<usize>,
    pub activation: Activation,
    #[serde(default)]
    pub time_embed_width: usize,
    pub params: Vec<Vec<f64>>,
}

impl NetRecord {
    pub fn from_net(net: &MlpNet) -> Self {
        Self {
            widths: net.widths().to_vec(),
            activation: net.activation(),
            time_embed_width: net.time_embed_width(),
            params: net.blocks().into_iter().map(|(_, b)| b.to_vec()).collect(),
        }
    }

    pub fn to_net(&self) -> Result<MlpNet> {
        let n_layers = self.widths.len().saturating_sub(1);
        if self.params.len() != 2 * n_layers {
            return Err(Error::Checkpoint(format!(
                "expected {} parameter blocks, found {}",
                2 * n_layers,
                self.params.len()
            )));
        }
        let layers = self
            .widths
            .windows(2)
            .zip(self.params.chunks_exact(2))
            .map(|(w, p)| {
                Ok(Layer {
                    weight: Matrix::from_vec(w[1], w[0], p[0].clone())?,
                    bias: p[1].clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let net = MlpNet::from_layers(layers, self.activation)?
            .with_time_embed_width(self.time_embed_width);
        if !net.is_finite() {
            return Err(Error::Checkpoint("non-finite parameter".into()));
        }
        Ok(net)
    }
}

/// Single-network checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetCheckpoint {
    pub format_version: u32,
    pub widths: Vec<usize>,
    pub activation: Activation,
    #[serde(default)]
    pub time_embed_width: usize,
    pub params: Vec<Vec<f64>>,
    pub rng_family: String,
    pub rng_seed: u64,
    pub config_hash: String,
}

impl NetCheckpoint {
    pub fn new(net: &MlpNet, rng_seed: u64, config_hash: impl Into<String>) -> Self {
        let rec = NetRecord::from_net(net);
        Self {
            format_version: FORMAT_VERSION,
            widths: rec.widths,
            activation: rec.activation,
            time_embed_width: rec.time_embed_width,
            params: rec.params,
            rng_family: RNG_FAMILY.to_string(),
            rng_seed,
            config_hash: config_hash.into(),
        }
    }

    pub fn to_net(&self) -> Result<MlpNet> {
        check_version(self.format_version)?;
        NetRecord {
            widths: self.widths.clone(),
            activation: self.activation,
            time_embed_width: self.time_embed_width,
            params: self.params.clone(),
        }
        .to_net()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }
}

/// Multi-section checkpoint used for trained models. Each section is a
/// JSON value, typically a [`NetRecord`] or a serialized spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub format_version: u32,
    pub method: String,
    pub rng_family: String,
    pub rng_seed: u64,
    pub config_hash: String,
    pub sections: BTreeMap<String, serde_json::Value>,
}

impl ModelCheckpoint {
    pub fn new(method: impl Into<String>, rng_seed: u64, config_hash: impl Into<String>) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            method: method.into(),
            rng_family: RNG_FAMILY.to_string(),
            rng_seed,
            config_hash: config_hash.into(),
            sections: BTreeMap::new(),
        }
    }

    pub fn insert<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.sections
            .insert(name.to_string(), serde_json::to_value(value)?);
        Ok(())
    }

    pub fn insert_net(&mut self, name: &str, net: &MlpNet) -> Result<()> {
        self.insert(name, &NetRecord::from_net(net))
    }

    pub fn get<T: DeserializeOwned>(&self, name: &str) -> Result<T> {
        check_version(self.format_version)?;
        let v = self
            .sections
            .get(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing section `{name}`")))?;
        Ok(serde_json::from_value(v.clone())?)
    }

    pub fn net(&self, name: &str) -> Result<MlpNet> {
        self.get::<NetRecord>(name)?.to_net()
    }

    pub fn expect_method(&self, method: &str) -> Result<()> {
        if self.method != method {
            return Err(Error::Checkpoint(format!(
                "expected a `{method}` checkpoint, found `{}`",
                self.method
            )));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }
}

fn check_version(v: u32) -> Result<()> {
    if v != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format_version {v} (expected {FORMAT_VERSION})"
        )));
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text)?;
    Ok(())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Rng;

    #[test]
    fn net_checkpoint_round_trips_exactly() {
        let net = MlpNet::new(&[5, 7, 3], Activation::Gelu, &mut Rng::new(9))
            .unwrap()
            .with_time_embed_width(3);
        let ck = NetCheckpoint::new(&net, 9, "abc");
        let text = serde_json::to_string(&ck).unwrap();
        let back: NetCheckpoint = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_net().unwrap(), net);
    }

    #[test]
    fn model_checkpoint_sections() {
        let mut rng = Rng::new(1);
        let a = MlpNet::new(&[2, 4, 2], Activation::Tanh, &mut rng).unwrap();
        let mut ck = ModelCheckpoint::new("residual", 1, "h");
        ck.insert_net("r_net", &a).unwrap();
        let dir = std::env::temp_dir().join(format!("bridger-ck-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("m.json");
        ck.save(&path).unwrap();
        let back = ModelCheckpoint::load(&path).unwrap();
        assert_eq!(back.net("r_net").unwrap(), a);
        assert!(back.net("missing").is_err());
        assert!(back.expect_method("ddpm").is_err());
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn rejects_wrong_block_count() {
        let rec = NetRecord {
            widths: vec![2, 2],
            activation: Activation::Relu,
            time_embed_width: 0,
            params: vec![vec![0.0; 4]],
        };
        assert!(rec.to_net().is_err());
    }
}
