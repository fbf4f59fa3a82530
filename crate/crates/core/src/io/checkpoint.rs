//! Model checkpoints: `"EVCK"`, a little-endian `u64` header length, a JSON
//! header, then every parameter as little-endian `f64` in
//! `SceneModel::param_slices_mut` order, optionally followed by the Adam
//! first and second moments in the same order.

use crate::error::{Error, Result};
use crate::nn::{Activation, AdamConfig, AdamState, Layer, MlpParams};
use crate::radiance::{ModelConfig, SceneModel};
use crate::scalar::Scalar;
use crate::training::ScheduleState;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"EVCK";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerShape {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamHeader {
    pub config: AdamConfig,
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub version: String,
    pub model: ModelConfig,
    pub deform: Vec<LayerShape>,
    pub canonical: Vec<LayerShape>,
    pub param_count: usize,
    pub iteration: u64,
    pub seed: u64,
    #[serde(default)]
    pub schedule: Option<ScheduleState>,
    #[serde(default)]
    pub adam: Option<AdamHeader>,
}

#[derive(Debug, Clone)]
pub struct Checkpoint<T> {
    pub model: SceneModel<T>,
    pub adam: Option<AdamState<T>>,
    pub iteration: u64,
    pub seed: u64,
    pub schedule: Option<ScheduleState>,
}

fn shapes<T: Scalar>(p: &MlpParams<T>) -> Vec<LayerShape> {
    p.layers
        .iter()
        .map(|l| LayerShape {
            in_dim: l.in_dim,
            out_dim: l.out_dim,
            activation: l.activation,
        })
        .collect()
}

pub fn encode_checkpoint<T: Scalar>(ck: &Checkpoint<T>) -> Result<Vec<u8>> {
    let header = CheckpointHeader {
        version: crate::VERSION.to_string(),
        model: ck.model.config.clone(),
        deform: shapes(&ck.model.deform),
        canonical: shapes(&ck.model.canonical),
        param_count: ck.model.param_count(),
        iteration: ck.iteration,
        seed: ck.seed,
        schedule: ck.schedule.clone(),
        adam: ck.adam.as_ref().map(|a| AdamHeader {
            config: a.config,
            step: a.step,
        }),
    };
    let json = serde_json::to_vec(&header)?;
    let blobs = if ck.adam.is_some() { 3 } else { 1 };
    let mut out = Vec::with_capacity(12 + json.len() + 8 * blobs * header.param_count);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    let mut put = |vals: &[T]| vals.iter().for_each(|v| out.extend_from_slice(&v.as_f64().to_le_bytes()));
    for net in [&ck.model.deform, &ck.model.canonical] {
        for l in &net.layers {
            put(&l.weight);
            put(&l.bias);
        }
    }
    if let Some(a) = &ck.adam {
        a.m.iter().for_each(|s| put(s));
        a.v.iter().for_each(|s| put(s));
    }
    Ok(out)
}

pub fn decode_header(bytes: &[u8]) -> Result<(CheckpointHeader, usize)> {
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(Error::format(0, "not a checkpoint (bad magic)"));
    }
    let len = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes")) as usize;
    let end = 12usize
        .checked_add(len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::format(4, "checkpoint header length exceeds file"))?;
    let header: CheckpointHeader =
        serde_json::from_slice(&bytes[12..end]).map_err(|e| Error::format(12, format!("checkpoint header: {e}")))?;
    Ok((header, end))
}

pub fn decode_checkpoint<T: Scalar>(bytes: &[u8]) -> Result<Checkpoint<T>> {
    let (h, mut pos) = decode_header(bytes)?;
    let expected: usize = h
        .deform
        .iter()
        .chain(&h.canonical)
        .map(|l| l.in_dim * l.out_dim + l.out_dim)
        .sum();
    if expected != h.param_count {
        return Err(Error::format(12, "layer shapes disagree with param_count"));
    }
    let blobs = if h.adam.is_some() { 3 } else { 1 };
    if bytes.len() != pos + 8 * blobs * expected {
        return Err(Error::format(
            bytes.len() as u64,
            format!("expected {} parameter bytes, found {}", 8 * blobs * expected, bytes.len() - pos),
        ));
    }
    let mut take = |n: usize| -> Vec<T> {
        let v = bytes[pos..pos + 8 * n]
            .chunks_exact(8)
            .map(|c| T::lit(f64::from_le_bytes(c.try_into().expect("8 bytes"))))
            .collect();
        pos += 8 * n;
        v
    };
    let mut net = |shapes: &[LayerShape]| -> Result<MlpParams<T>> {
        let layers = shapes
            .iter()
            .map(|s| {
                let mut l = Layer::zeros(s.in_dim, s.out_dim, s.activation);
                l.weight = take(s.in_dim * s.out_dim);
                l.bias = take(s.out_dim);
                l
            })
            .collect();
        MlpParams::from_layers(layers)
    };
    let deform = net(&h.deform)?;
    let canonical = net(&h.canonical)?;
    let model = SceneModel::from_parts(h.model.clone(), deform, canonical)?;
    let adam = h.adam.as_ref().map(|a| {
        let sizes = model.param_shapes();
        let m = sizes.iter().map(|&n| take(n)).collect();
        let v = sizes.iter().map(|&n| take(n)).collect();
        AdamState {
            config: a.config,
            step: a.step,
            m,
            v,
        }
    });
    Ok(Checkpoint {
        model,
        adam,
        iteration: h.iteration,
        seed: h.seed,
        schedule: h.schedule,
    })
}

pub fn save_checkpoint<T: Scalar>(path: impl AsRef<Path>, ck: &Checkpoint<T>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_checkpoint(ck)?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<T: Scalar>(path: impl AsRef<Path>) -> Result<Checkpoint<T>> {
    let path = path.as_ref();
    decode_checkpoint(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}
