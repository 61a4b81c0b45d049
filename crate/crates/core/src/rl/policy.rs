use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{Cache, Mlp};
use super::RlError;
use crate::seed::{self, Rng};
use crate::sim::Policy;

pub const HIDDEN: [usize; 2] = [64, 64];
pub const LOG_STD_MIN: f64 = -4.0;
pub const LOG_STD_MAX: f64 = 1.0;
pub const OBS_CLIP: f64 = 10.0;
const MAGIC: &[u8; 4] = b"SGPC";
const FORMAT_VERSION: u32 = 1;

/// Running mean/variance of observations (parallel Chan update).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObsNormalizer {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub count: f64,
}

impl ObsNormalizer {
    pub fn new(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], var: vec![1.0; dim], count: 1e-4 }
    }

    pub fn update(&mut self, batch: &[Vec<f64>]) {
        if batch.is_empty() {
            return;
        }
        let n = batch.len() as f64;
        let dim = self.mean.len();
        let mut bm = vec![0.0; dim];
        for x in batch {
            for (m, v) in bm.iter_mut().zip(x) {
                *m += v / n;
            }
        }
        let mut bv = vec![0.0; dim];
        for x in batch {
            for ((s, v), m) in bv.iter_mut().zip(x).zip(&bm) {
                *s += (v - m) * (v - m) / n;
            }
        }
        let tot = self.count + n;
        for i in 0..dim {
            let d = bm[i] - self.mean[i];
            let m2 = self.var[i] * self.count + bv[i] * n + d * d * self.count * n / tot;
            self.mean[i] += d * n / tot;
            self.var[i] = m2 / tot;
        }
        self.count = tot;
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.var))
            .map(|(v, (m, var))| ((v - m) / (var + 1e-8).sqrt()).clamp(-OBS_CLIP, OBS_CLIP))
            .collect()
    }
}

/// Gaussian actor-critic. `params` holds the actor, the critic, then the
/// per-dimension log-std, all contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyCheckpoint {
    pub obs_dim: usize,
    pub action_dim: usize,
    pub params: Vec<f64>,
    pub obs_norm: ObsNormalizer,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    obs_dim: usize,
    action_dim: usize,
    actor_layers: Vec<(usize, usize)>,
    critic_layers: Vec<(usize, usize)>,
    log_std_len: usize,
    param_count: usize,
    obs_norm: ObsNormalizer,
}

impl PolicyCheckpoint {
    pub fn actor_net(&self) -> Mlp {
        Mlp::new(vec![self.obs_dim, HIDDEN[0], HIDDEN[1], self.action_dim])
    }

    pub fn critic_net(&self) -> Mlp {
        Mlp::new(vec![self.obs_dim, HIDDEN[0], HIDDEN[1], 1])
    }

    pub fn new(obs_dim: usize, action_dim: usize, rng: &mut Rng) -> Self {
        let mut p = Self { obs_dim, action_dim, params: Vec::new(), obs_norm: ObsNormalizer::new(obs_dim) };
        let mut params = p.actor_net().init(rng, 0.01);
        params.extend(p.critic_net().init(rng, 1.0));
        params.extend(std::iter::repeat_n(0.0, action_dim));
        p.params = params;
        p
    }

    /// Freshly initialized weights for `seed`.
    pub fn init(obs_dim: usize, action_dim: usize, seed: u64) -> Self {
        Self::new(obs_dim, action_dim, &mut seed::rng(seed, &[seed::tag("init")]))
    }

    pub fn actor_len(&self) -> usize {
        self.actor_net().param_count()
    }

    pub fn critic_len(&self) -> usize {
        self.critic_net().param_count()
    }

    pub fn actor_params(&self) -> &[f64] {
        &self.params[..self.actor_len()]
    }

    pub fn critic_params(&self) -> &[f64] {
        let a = self.actor_len();
        &self.params[a..a + self.critic_len()]
    }

    pub fn log_std(&self) -> &[f64] {
        &self.params[self.actor_len() + self.critic_len()..]
    }

    pub fn clamp_log_std(&mut self) {
        let off = self.actor_len() + self.critic_len();
        for s in &mut self.params[off..] {
            *s = s.clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
    }

    /// Mean action for an already normalized observation.
    pub fn mean_normalized(&self, obs_n: &[f64]) -> Vec<f64> {
        self.actor_net().forward(self.actor_params(), obs_n, &mut Cache::default())
    }

    pub fn value_normalized(&self, obs_n: &[f64]) -> f64 {
        self.critic_net().forward(self.critic_params(), obs_n, &mut Cache::default())[0]
    }

    pub fn value(&self, obs: &[f64]) -> f64 {
        self.value_normalized(&self.obs_norm.normalize(obs))
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|v| v.is_finite())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), RlError> {
        let header = Header {
            format_version: FORMAT_VERSION,
            obs_dim: self.obs_dim,
            action_dim: self.action_dim,
            actor_layers: self.actor_net().layer_shapes(),
            critic_layers: self.critic_net().layer_shapes(),
            log_std_len: self.action_dim,
            param_count: self.params.len(),
            obs_norm: self.obs_norm.clone(),
        };
        let json = serde_json::to_vec(&header).map_err(|e| RlError::Checkpoint(e.to_string()))?;
        let len = u32::try_from(json.len()).map_err(|_| RlError::Checkpoint("header too large".into()))?;
        let mut buf = Vec::with_capacity(8 + json.len() + 8 * self.params.len());
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&len.to_le_bytes());
        buf.extend_from_slice(&json);
        for v in &self.params {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf).map_err(|e| RlError::Checkpoint(e.to_string()))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, RlError> {
        let bad = |m: &str| RlError::Checkpoint(m.to_string());
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(bad("bad magic"));
        }
        let len = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
        let json = bytes.get(8..8 + len).ok_or_else(|| bad("truncated header"))?;
        let h: Header = serde_json::from_slice(json).map_err(|e| RlError::Checkpoint(e.to_string()))?;
        if h.format_version != FORMAT_VERSION {
            return Err(bad("unsupported format version"));
        }
        let blob = &bytes[8 + len..];
        if blob.len() != 8 * h.param_count {
            return Err(bad("blob length does not match header"));
        }
        let params: Vec<f64> =
            blob.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        let p = Self { obs_dim: h.obs_dim, action_dim: h.action_dim, params, obs_norm: h.obs_norm };
        if p.actor_net().layer_shapes() != h.actor_layers
            || p.critic_net().layer_shapes() != h.critic_layers
            || p.actor_len() + p.critic_len() + h.log_std_len != h.param_count
            || h.log_std_len != h.action_dim
            || p.obs_norm.mean.len() != h.obs_dim
        {
            return Err(bad("layer shapes do not match dims"));
        }
        if !p.is_finite() {
            return Err(bad("non-finite weights"));
        }
        Ok(p)
    }

    pub fn save(&self, path: &Path) -> Result<(), RlError> {
        let f = std::fs::File::create(path).map_err(|e| RlError::Checkpoint(e.to_string()))?;
        self.write_to(std::io::BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<Self, RlError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| RlError::Checkpoint(e.to_string()))?;
        Self::from_bytes(&bytes)
    }
}

/// Evaluation mode: deterministic mean action, frozen normalization.
impl Policy for PolicyCheckpoint {
    fn obs_dim(&self) -> usize {
        self.obs_dim
    }
    fn action_dim(&self) -> usize {
        self.action_dim
    }
    fn act(&self, observation: &[f64]) -> Vec<f64> {
        self.mean_normalized(&self.obs_norm.normalize(observation))
    }
}
