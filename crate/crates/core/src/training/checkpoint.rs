//! Binary checkpoint format. Layout, all integers and floats little-endian:
//!
//! ```text
//! magic "GDCOCKPT" | version u32 | task u8 | branch u8 | layers u32 | hidden u32
//! | time_dim u32 | diffusion steps u32 | beta_start f64 | beta_end f64
//! | parameter tensors | running statistics | adam steps u64 | adam m | adam v
//! | train step u64 | epoch u64 | rng seed [u8; 32] | rng stream u64 | rng word u128
//! | checksum u64
//! ```
//!
//! Every tensor is a `u64` length followed by that many `f64`s, in the
//! canonical order of [`DenoiserParams::tensors`]. The checksum is the first
//! eight bytes of the SHA-256 of everything before it.

use std::path::Path;

use rand::SeedableRng;
use sha2::{Digest, Sha256};

use super::{Adam, TrainError, TrainState};
use crate::denoiser::{DenoiserParams, ModelConfig};
use crate::diffusion::Branch;
use crate::instances::Task;
use crate::rng::Rng;

pub const MAGIC: &[u8; 8] = b"GDCOCKPT";
pub const VERSION: u32 = 1;
const CHECKSUM_LEN: usize = 8;
const VERSION_END: usize = 12;

fn checksum(bytes: &[u8]) -> [u8; CHECKSUM_LEN] {
    let digest = Sha256::digest(bytes);
    let mut out = [0u8; CHECKSUM_LEN];
    out.copy_from_slice(&digest[..CHECKSUM_LEN]);
    out
}

fn put_tensor(out: &mut Vec<u8>, t: &[f64]) {
    out.extend_from_slice(&(t.len() as u64).to_le_bytes());
    for v in t {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_checkpoint(state: &TrainState) -> Vec<u8> {
    let c = &state.params.config;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(match c.task {
        Task::Tsp => 0,
        Task::Mis => 1,
    });
    out.push(match c.branch {
        Branch::Discrete => 0,
        Branch::Continuous => 1,
    });
    for v in [c.layers, c.hidden, c.time_dim, c.steps] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&c.beta_start.to_le_bytes());
    out.extend_from_slice(&c.beta_end.to_le_bytes());
    for t in state.params.tensors() {
        put_tensor(&mut out, t);
    }
    for t in state.params.running_stats() {
        put_tensor(&mut out, t);
    }
    out.extend_from_slice(&state.optimizer.steps.to_le_bytes());
    for t in state.optimizer.first.iter().chain(&state.optimizer.second) {
        put_tensor(&mut out, t);
    }
    out.extend_from_slice(&state.step.to_le_bytes());
    out.extend_from_slice(&state.epoch.to_le_bytes());
    out.extend_from_slice(&state.rng.get_seed());
    out.extend_from_slice(&state.rng.get_stream().to_le_bytes());
    out.extend_from_slice(&state.rng.get_word_pos().to_le_bytes());
    let sum = checksum(&out);
    out.extend_from_slice(&sum);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], TrainError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| TrainError::Format("unexpected end of checkpoint".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], TrainError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8, TrainError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, TrainError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64, TrainError> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64, TrainError> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn tensor_into(&mut self, dst: &mut [f64], what: &str) -> Result<(), TrainError> {
        let len = self.u64()?;
        if len != dst.len() as u64 {
            return Err(TrainError::Format(format!("{what} tensor has {len} values, expected {}", dst.len())));
        }
        for v in dst.iter_mut() {
            *v = self.f64()?;
        }
        Ok(())
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<TrainState, TrainError> {
    if bytes.len() < VERSION_END + CHECKSUM_LEN {
        return Err(TrainError::Checksum);
    }
    if &bytes[..8] != MAGIC {
        return Err(TrainError::Format("not a checkpoint file".into()));
    }
    let found = u32::from_le_bytes(bytes[8..VERSION_END].try_into().expect("4 bytes"));
    if found != VERSION {
        return Err(TrainError::Version { found, expected: VERSION });
    }
    let (body, sum) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
    if checksum(body) != sum {
        return Err(TrainError::Checksum);
    }
    let mut r = Reader { bytes: body, pos: VERSION_END };
    let task = match r.u8()? {
        0 => Task::Tsp,
        1 => Task::Mis,
        other => return Err(TrainError::Format(format!("unknown task code {other}"))),
    };
    let branch = match r.u8()? {
        0 => Branch::Discrete,
        1 => Branch::Continuous,
        other => return Err(TrainError::Format(format!("unknown branch code {other}"))),
    };
    let mut config = ModelConfig::new(task, branch);
    config.layers = r.u32()? as usize;
    config.hidden = r.u32()? as usize;
    config.time_dim = r.u32()? as usize;
    config.steps = r.u32()? as usize;
    config.beta_start = r.f64()?;
    config.beta_end = r.f64()?;
    let mut params = DenoiserParams::zeros(config)?;
    for t in params.tensors_mut() {
        r.tensor_into(t, "parameter")?;
    }
    for t in params.running_stats_mut() {
        r.tensor_into(t, "running statistic")?;
    }
    let mut optimizer = Adam::for_params(&params);
    optimizer.steps = r.u64()?;
    for t in optimizer.first.iter_mut().chain(optimizer.second.iter_mut()) {
        r.tensor_into(t, "optimizer")?;
    }
    let step = r.u64()?;
    let epoch = r.u64()?;
    let mut rng = Rng::from_seed(r.array()?);
    rng.set_stream(r.u64()?);
    rng.set_word_pos(u128::from_le_bytes(r.array()?));
    if r.pos != body.len() {
        return Err(TrainError::Format(format!("{} trailing bytes", body.len() - r.pos)));
    }
    Ok(TrainState { params, optimizer, step, epoch, rng })
}

pub fn save_checkpoint(path: impl AsRef<Path>, state: &TrainState) -> Result<(), TrainError> {
    std::fs::write(path, encode_checkpoint(state))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<TrainState, TrainError> {
    decode_checkpoint(&std::fs::read(path)?)
}

/// Parameters only, for inference.
pub fn load_model(path: impl AsRef<Path>) -> Result<DenoiserParams, TrainError> {
    Ok(load_checkpoint(path)?.params)
}
