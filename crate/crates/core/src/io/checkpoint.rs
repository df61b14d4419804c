use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{io_err, IoError};
use crate::autodiff::Matrix;
use crate::model::{ClassifierParams, GeneratorParams, ParamList, TemperatureSchedule};
use crate::optim::Adam;
use crate::train::{FoldSplit, IterationRecord, Standardizer, TrainConfig, TrainState};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"ABIGCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to resume or evaluate a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub class_names: Vec<String>,
    pub split: Option<FoldSplit>,
    pub state: TrainState,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    version: u32,
    config: TrainConfig,
    class_names: Vec<String>,
    split: Option<FoldSplit>,
    iteration: usize,
    schedule: TemperatureSchedule,
    opt_theta: Adam,
    opt_psi: Adam,
    /// Per-sample streams derive from (seed, iteration), so these two
    /// numbers are the whole RNG state.
    rng_seed: u64,
    rng_iteration: usize,
    history: Vec<IterationRecord>,
    history_digest: String,
    tensor_names: Vec<String>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn history_digest(history: &[IterationRecord]) -> String {
    let mut h = Sha256::new();
    for r in history {
        h.update((r.iteration as u64).to_le_bytes());
        h.update(r.lower_loss.to_le_bytes());
        h.update(r.upper_loss.unwrap_or(f64::NAN).to_le_bytes());
        h.update(r.tau.to_le_bytes());
        h.update(r.mean_offdiag.to_le_bytes());
        h.update((r.adjacency_violations as u64).to_le_bytes());
        h.update((r.samples as u64).to_le_bytes());
    }
    hex(&h.finalize())
}

fn named_tensors(state: &TrainState) -> Vec<(String, Matrix)> {
    let mut out: Vec<(String, Matrix)> = Vec::new();
    out.extend(state.theta.names().into_iter().zip(state.theta.tensors().into_iter().cloned()));
    out.extend(state.psi.names().into_iter().zip(state.psi.tensors().into_iter().cloned()));
    for (prefix, opt, names) in
        [("adam_theta", &state.opt_theta, state.theta.names()), ("adam_psi", &state.opt_psi, state.psi.names())]
    {
        out.extend(names.iter().zip(&opt.m).map(|(n, m)| (format!("{prefix}.m.{n}"), m.clone())));
        out.extend(names.iter().zip(&opt.v).map(|(n, v)| (format!("{prefix}.v.{n}"), v.clone())));
    }
    let row = |v: &[f64]| Matrix::from_vec(1, v.len(), v.to_vec());
    out.push(("standardizer.mean".into(), row(&state.standardizer.mean)));
    out.push(("standardizer.scale".into(), row(&state.standardizer.scale)));
    out
}

impl Checkpoint {
    fn header_and_tensors(&self) -> (Header, Vec<(String, Matrix)>) {
        let tensors = named_tensors(&self.state);
        let header = Header {
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            class_names: self.class_names.clone(),
            split: self.split.clone(),
            iteration: self.state.iteration,
            schedule: self.state.schedule,
            opt_theta: self.state.opt_theta.clone(),
            opt_psi: self.state.opt_psi.clone(),
            rng_seed: self.config.seed,
            rng_iteration: self.state.iteration,
            history: self.state.history.clone(),
            history_digest: history_digest(&self.state.history),
            tensor_names: tensors.iter().map(|(n, _)| n.clone()).collect(),
        };
        (header, tensors)
    }

    /// Serialized bytes: magic, version, length-prefixed JSON header,
    /// length-prefixed named tensors (little-endian f64), SHA-256 trailer.
    pub fn to_bytes(&self) -> Vec<u8> {
        let (header, tensors) = self.header_and_tensors();
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut buf = Vec::new();
        buf.extend_from_slice(CHECKPOINT_MAGIC);
        buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
        buf.extend_from_slice(&json);
        buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
        for (name, m) in &tensors {
            buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
            buf.extend_from_slice(name.as_bytes());
            buf.extend_from_slice(&(m.rows() as u64).to_le_bytes());
            buf.extend_from_slice(&(m.cols() as u64).to_le_bytes());
            for v in m.data() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        let digest = Sha256::digest(&buf);
        buf.extend_from_slice(&digest);
        buf
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self, IoError> {
        let corrupt = |msg: &str| IoError::Checkpoint { path: path.to_path_buf(), msg: msg.to_string() };
        if bytes.len() < 8 + 4 + 32 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(corrupt("not a checkpoint file"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(IoError::VersionMismatch { path: path.to_path_buf(), found: version, expected: CHECKPOINT_VERSION });
        }
        let (body, trailer) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != trailer {
            return Err(corrupt("checksum mismatch"));
        }
        let mut cur = Cursor { buf: body, pos: 12 };
        let hlen = cur.u64().ok_or_else(|| corrupt("truncated header length"))? as usize;
        let json = cur.take(hlen).ok_or_else(|| corrupt("truncated header"))?;
        let header: Header = serde_json::from_slice(json).map_err(|e| corrupt(&format!("bad header: {e}")))?;
        if header.version != version {
            return Err(corrupt("header version disagrees with preamble"));
        }
        if history_digest(&header.history) != header.history_digest {
            return Err(corrupt("training-history digest mismatch"));
        }
        let count = cur.u32().ok_or_else(|| corrupt("truncated tensor count"))? as usize;
        let mut tensors = Vec::with_capacity(count);
        for _ in 0..count {
            let nlen = cur.u32().ok_or_else(|| corrupt("truncated tensor name"))? as usize;
            let name = String::from_utf8(cur.take(nlen).ok_or_else(|| corrupt("truncated tensor name"))?.to_vec())
                .map_err(|_| corrupt("tensor name is not UTF-8"))?;
            let rows = cur.u64().ok_or_else(|| corrupt("truncated shape"))? as usize;
            let cols = cur.u64().ok_or_else(|| corrupt("truncated shape"))? as usize;
            let len = rows.checked_mul(cols).ok_or_else(|| corrupt("bad shape"))?;
            let raw = cur.take(len.checked_mul(8).ok_or_else(|| corrupt("bad shape"))?).ok_or_else(|| corrupt("truncated tensor"))?;
            let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            tensors.push((name, Matrix::from_vec(rows, cols, data)));
        }
        if cur.pos != body.len() {
            return Err(corrupt("trailing bytes"));
        }
        Self::assemble(header, tensors).map_err(|m| corrupt(&m))
    }

    fn assemble(header: Header, tensors: Vec<(String, Matrix)>) -> Result<Self, String> {
        let names: Vec<&str> = tensors.iter().map(|(n, _)| n.as_str()).collect();
        if names != header.tensor_names.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err("tensor table disagrees with header".into());
        }
        let arch = &header.config.arch;
        arch.validate().map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut theta = ClassifierParams::init(arch, &mut rng);
        let mut psi = GeneratorParams::init(arch, &mut rng);
        let mut iter = tensors.into_iter();
        let mut fill = |targets: Vec<&mut Matrix>, prefix: &str| -> Result<(), String> {
            for t in targets {
                let (name, m) = iter.next().ok_or_else(|| format!("missing tensor for {prefix}"))?;
                if m.shape() != t.shape() {
                    return Err(format!("tensor {name} has shape {:?}, expected {:?}", m.shape(), t.shape()));
                }
                *t = m;
            }
            Ok(())
        };
        fill(theta.tensors_mut(), "classifier")?;
        fill(psi.tensors_mut(), "generator")?;
        let mut opt_theta = header.opt_theta;
        let mut opt_psi = header.opt_psi;
        opt_theta.m = theta.tensors().iter().map(|t| Matrix::zeros(t.rows(), t.cols())).collect();
        opt_theta.v = opt_theta.m.clone();
        opt_psi.m = psi.tensors().iter().map(|t| Matrix::zeros(t.rows(), t.cols())).collect();
        opt_psi.v = opt_psi.m.clone();
        fill(opt_theta.m.iter_mut().collect(), "adam_theta.m")?;
        fill(opt_theta.v.iter_mut().collect(), "adam_theta.v")?;
        fill(opt_psi.m.iter_mut().collect(), "adam_psi.m")?;
        fill(opt_psi.v.iter_mut().collect(), "adam_psi.v")?;
        let mut mean = Matrix::zeros(1, arch.input_dim);
        let mut scale = Matrix::zeros(1, arch.input_dim);
        fill(vec![&mut mean, &mut scale], "standardizer")?;
        let state = TrainState {
            theta,
            psi,
            opt_theta,
            opt_psi,
            schedule: header.schedule,
            iteration: header.iteration,
            standardizer: Standardizer { mean: mean.into_data(), scale: scale.into_data() },
            history: header.history,
        };
        Ok(Self { config: header.config, class_names: header.class_names, split: header.split, state })
    }

    /// Writes the binary checkpoint and a `<path>.json` metadata sidecar.
    pub fn save(&self, path: &Path) -> Result<(), IoError> {
        let mut f = std::fs::File::create(path).map_err(io_err(path))?;
        f.write_all(&self.to_bytes()).map_err(io_err(path))?;
        let (header, _) = self.header_and_tensors();
        let sidecar = sidecar_path(path);
        let text = serde_json::to_string_pretty(&header).expect("header serializes");
        std::fs::write(&sidecar, text + "\n").map_err(io_err(&sidecar))
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(io_err(path))?;
        Self::from_bytes(&bytes, path)
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let out = self.buf.get(self.pos..end)?;
        self.pos = end;
        Some(out)
    }

    fn u32(&mut self) -> Option<u32> {
        Some(u32::from_le_bytes(self.take(4)?.try_into().ok()?))
    }

    fn u64(&mut self) -> Option<u64> {
        Some(u64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }
}
