//! Binary checkpoint format: `CAMSR1` magic, u32 version, length-prefixed
//! JSON hyperparameter header, then the f32 parameter payload in layer
//! order (weights then bias per layer), all little-endian.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::resample::GaussianParams;

use super::model::{to_f32_grid, SrModel};
use super::train::Degradation;

pub const MAGIC: &[u8; 6] = b"CAMSR1";
pub const VERSION: u32 = 1;

/// Degradation the checkpointed model was trained under.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DegradationTag {
    Bicubic,
    Gaussian { k: usize, sigma: f64 },
    Camera,
}

impl From<Degradation> for DegradationTag {
    fn from(d: Degradation) -> Self {
        match d {
            Degradation::Bicubic => DegradationTag::Bicubic,
            Degradation::Gaussian(p) => DegradationTag::Gaussian {
                k: p.k,
                sigma: p.sigma,
            },
            Degradation::Camera => DegradationTag::Camera,
        }
    }
}

impl TryFrom<DegradationTag> for Degradation {
    type Error = Error;

    fn try_from(t: DegradationTag) -> Result<Self> {
        Ok(match t {
            DegradationTag::Bicubic => Degradation::Bicubic,
            DegradationTag::Gaussian { k, sigma } => Degradation::Gaussian(GaussianParams::new(k, sigma)?),
            DegradationTag::Camera => Degradation::Camera,
        })
    }
}

/// Hyperparameters stored alongside the flat parameter payload.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub depth: usize,
    pub width: usize,
    pub channels: usize,
    pub residual: bool,
    pub scale: f64,
    pub degradation: DegradationTag,
}

fn bad(reason: impl Into<String>) -> Error {
    Error::Checkpoint(reason.into())
}

pub fn write_checkpoint<W: Write>(
    mut out: W,
    model: &SrModel,
    scale: f64,
    degradation: DegradationTag,
) -> Result<()> {
    let header = CheckpointHeader {
        depth: model.depth,
        width: model.width,
        channels: model.channels,
        residual: model.residual,
        scale,
        degradation,
    };
    let header_json = serde_json::to_vec(&header).expect("header serializes");
    let io = |e: std::io::Error| bad(format!("write failed: {e}"));
    out.write_all(MAGIC).map_err(io)?;
    out.write_all(&VERSION.to_le_bytes()).map_err(io)?;
    out.write_all(&(header_json.len() as u32).to_le_bytes()).map_err(io)?;
    out.write_all(&header_json).map_err(io)?;
    for layer in &model.layers {
        for &v in layer.weights.iter().chain(&layer.bias) {
            out.write_all(&(v as f32).to_le_bytes()).map_err(io)?;
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<(SrModel, CheckpointHeader)> {
    let mut magic = [0u8; 6];
    input.read_exact(&mut magic).map_err(|_| bad("truncated magic"))?;
    if &magic != MAGIC {
        return Err(bad(format!("bad magic {magic:?}")));
    }
    let mut u32buf = [0u8; 4];
    input.read_exact(&mut u32buf).map_err(|_| bad("truncated version"))?;
    let version = u32::from_le_bytes(u32buf);
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    input.read_exact(&mut u32buf).map_err(|_| bad("truncated header length"))?;
    let header_len = u32::from_le_bytes(u32buf) as usize;
    if header_len > 1 << 20 {
        return Err(bad(format!("implausible header length {header_len}")));
    }
    let mut header_json = vec![0u8; header_len];
    input.read_exact(&mut header_json).map_err(|_| bad("truncated header"))?;
    let header: CheckpointHeader =
        serde_json::from_slice(&header_json).map_err(|e| bad(format!("bad header: {e}")))?;

    let mut model = SrModel::init(header.channels, header.depth, header.width, header.residual, 0)
        .map_err(|e| bad(format!("bad hyperparameters: {e}")))?;
    let mut f32buf = [0u8; 4];
    for layer in &mut model.layers {
        for slot in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
            input.read_exact(&mut f32buf).map_err(|_| bad("truncated payload"))?;
            *slot = to_f32_grid(f32::from_le_bytes(f32buf) as f64);
        }
    }
    let mut rest = [0u8; 1];
    if input.read(&mut rest).map_err(|e| bad(format!("read failed: {e}")))? != 0 {
        return Err(bad("trailing bytes after payload"));
    }
    Ok((model, header))
}

pub fn save_checkpoint(
    model: &SrModel,
    scale: f64,
    degradation: DegradationTag,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|source| Error::Write {
        path: path.into(),
        source,
    })?;
    write_checkpoint(std::io::BufWriter::new(file), model, scale, degradation)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(SrModel, CheckpointHeader)> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Read {
        path: path.into(),
        source,
    })?;
    read_checkpoint(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::srnet::tensor::Tensor;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn trained_like_model(seed: u64) -> SrModel {
        let mut model = SrModel::init(3, 3, 8, true, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
        let last = model.depth - 1;
        for w in &mut model.layers[last].weights {
            *w = super::super::model::to_f32_grid(rng.random_range(-0.1..0.1));
        }
        model
    }

    #[test]
    fn roundtrip_is_bit_identical() {
        let model = trained_like_model(31);
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &model, 2.9, DegradationTag::Camera).unwrap();
        let (loaded, header) = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(loaded, model);
        assert_eq!(header.scale, 2.9);
        assert_eq!(header.degradation, DegradationTag::Camera);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let input = Tensor::from_vec(
            [1, 3, 8, 8],
            (0..192).map(|_| rng.random_range(0.0..1.0)).collect(),
        )
        .unwrap();
        let before = model.forward(&input).unwrap();
        let after = loaded.forward(&input).unwrap();
        assert_eq!(before.data(), after.data());
    }

    #[test]
    fn truncated_payload_rejected() {
        let model = trained_like_model(32);
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &model, 2.9, DegradationTag::Bicubic).unwrap();
        buf.truncate(buf.len() - 3);
        match read_checkpoint(buf.as_slice()) {
            Err(Error::Checkpoint(msg)) => assert!(msg.contains("payload"), "{msg}"),
            other => panic!("expected checkpoint error, got {other:?}"),
        }
    }

    #[test]
    fn foreign_magic_rejected() {
        let buf = b"NOTSR1\x01\x00\x00\x00".to_vec();
        match read_checkpoint(buf.as_slice()) {
            Err(Error::Checkpoint(msg)) => assert!(msg.contains("magic"), "{msg}"),
            other => panic!("expected checkpoint error, got {other:?}"),
        }
    }

    #[test]
    fn version_mismatch_rejected() {
        let model = trained_like_model(33);
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &model, 2.4, DegradationTag::Gaussian { k: 5, sigma: 2.65 }).unwrap();
        buf[6] = 99;
        match read_checkpoint(buf.as_slice()) {
            Err(Error::Checkpoint(msg)) => assert!(msg.contains("version"), "{msg}"),
            other => panic!("expected checkpoint error, got {other:?}"),
        }
    }

    #[test]
    fn gaussian_tag_roundtrips_through_json_header() {
        let model = trained_like_model(34);
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &model, 2.9, DegradationTag::Gaussian { k: 7, sigma: 1.55 }).unwrap();
        let (_, header) = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(header.degradation, DegradationTag::Gaussian { k: 7, sigma: 1.55 });
    }
}
