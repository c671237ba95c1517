//! Policy checkpoints: magic bytes, a length-prefixed JSON header and a
//! flat little-endian `f64` array (actor parameters, then observation
//! statistics).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SacError};
use crate::nn::Mlp;
use crate::norm::RunningNorm;
use crate::policy::{GaussianActor, Policy};

pub const MAGIC: &[u8; 8] = b"RMPOLv1\n";
pub const FORMAT_VERSION: u32 = 1;

/// Caller-supplied metadata stored alongside the parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyMeta {
    pub approach: String,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub obs_dim: usize,
    pub action_dim: usize,
    pub layer_sizes: Vec<usize>,
    pub obs_norm: bool,
    pub norm_clip: f64,
    pub n_values: usize,
    #[serde(flatten)]
    pub meta: PolicyMeta,
}

impl CheckpointHeader {
    /// Refuses checkpoints trained for another approach or input size.
    pub fn expect(&self, approach: &str, obs_dim: usize, action_dim: usize) -> Result<()> {
        if self.meta.approach != approach {
            return Err(SacError::Mismatch(format!(
                "checkpoint was trained for `{}`, evaluator expects `{approach}`",
                self.meta.approach
            )));
        }
        if self.obs_dim != obs_dim || self.action_dim != action_dim {
            return Err(SacError::Mismatch(format!(
                "checkpoint has {}-dim observations and {}-dim actions, evaluator expects {obs_dim} and {action_dim}",
                self.obs_dim, self.action_dim
            )));
        }
        Ok(())
    }
}

pub fn to_bytes(policy: &Policy, meta: &PolicyMeta) -> Vec<u8> {
    let net = &policy.actor.net;
    let norm = &policy.norm;
    let mut values = net.flatten();
    values.extend_from_slice(&norm.mean);
    values.extend_from_slice(&norm.m2);
    values.push(norm.count);
    let header = CheckpointHeader {
        format_version: FORMAT_VERSION,
        obs_dim: policy.obs_dim(),
        action_dim: policy.action_dim(),
        layer_sizes: net.sizes(),
        obs_norm: norm.enabled,
        norm_clip: norm.clip,
        n_values: values.len(),
        meta: meta.clone(),
    };
    let json = serde_json::to_vec(&header).expect("header serialises");
    let mut out = Vec::with_capacity(MAGIC.len() + 4 + json.len() + values.len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<(Policy, CheckpointHeader)> {
    let bad = |msg: String| SacError::Checkpoint(msg);
    if bytes.len() < MAGIC.len() + 4 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(bad("missing magic bytes; not a policy checkpoint".into()));
    }
    let len_bytes: [u8; 4] = bytes[8..12].try_into().expect("4 bytes");
    let header_len = u32::from_le_bytes(len_bytes) as usize;
    let body = &bytes[12..];
    if body.len() < header_len {
        return Err(bad(format!("header claims {header_len} bytes, only {} present", body.len())));
    }
    let header: CheckpointHeader =
        serde_json::from_slice(&body[..header_len]).map_err(|e| bad(format!("header: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(bad(format!("unsupported format version {}", header.format_version)));
    }
    let sizes = &header.layer_sizes;
    if sizes.len() < 2 || sizes[0] != header.obs_dim || *sizes.last().unwrap() != 2 * header.action_dim {
        return Err(bad(format!("layer sizes {sizes:?} inconsistent with dimensions")));
    }
    if sizes.contains(&0) {
        return Err(bad("zero-width layer".into()));
    }
    let n_net: usize = sizes.windows(2).map(|p| p[0] * p[1] + p[1]).sum();
    let expected = n_net + 2 * header.obs_dim + 1;
    if header.n_values != expected {
        return Err(bad(format!("header lists {} values, layout needs {expected}", header.n_values)));
    }
    let data = &body[header_len..];
    if data.len() != expected * 8 {
        return Err(bad(format!("parameter block has {} bytes, expected {}", data.len(), expected * 8)));
    }
    let values: Vec<f64> =
        data.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(bad("non-finite parameter".into()));
    }

    // shapes only; the values are overwritten below
    let mut net = Mlp {
        layers: sizes
            .windows(2)
            .map(|p| crate::nn::Linear {
                w: crate::mat::Mat::zeros(p[0], p[1]),
                b: crate::mat::Mat::zeros(1, p[1]),
            })
            .collect(),
    };
    let mut offset = net.load_flat(&values);
    let d = header.obs_dim;
    let mut norm = RunningNorm::new(d, header.obs_norm);
    norm.clip = header.norm_clip;
    norm.mean.copy_from_slice(&values[offset..offset + d]);
    offset += d;
    norm.m2.copy_from_slice(&values[offset..offset + d]);
    offset += d;
    norm.count = values[offset];
    let actor = GaussianActor { net, action_dim: header.action_dim };
    Ok((Policy { actor, norm }, header))
}

pub fn save_policy(path: &Path, policy: &Policy, meta: &PolicyMeta) -> Result<()> {
    fs::write(path, to_bytes(policy, meta))?;
    Ok(())
}

pub fn load_policy(path: &Path) -> Result<(Policy, CheckpointHeader)> {
    from_bytes(&fs::read(path)?)
}
