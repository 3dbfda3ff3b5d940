//! Binary checkpoints.
//!
//! Layout (little-endian): magic `RFLGCKPT`, `u32` format version, `u64`
//! feature-config hash, `u32` image vocab, text vocab, image features, text
//! features, max reason length, then the image weights and the text weights
//! as `f64`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{FeatureConfig, PolicyParams};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"RFLGCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(w: &mut W, params: &PolicyParams) -> Result<()> {
    let c = &params.config;
    w.write_all(MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&c.hash().to_le_bytes())?;
    for v in [c.image_vocab, c.text_vocab, c.image_features, c.text_features, c.max_reason] {
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    for x in params.flat() {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<PolicyParams> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = read_u32(r)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported format version {version}")));
    }
    let mut h = [0u8; 8];
    r.read_exact(&mut h)?;
    let hash = u64::from_le_bytes(h);
    let mut dims = [0usize; 5];
    for d in &mut dims {
        *d = read_u32(r)? as usize;
    }
    let config = FeatureConfig {
        image_vocab: dims[0],
        text_vocab: dims[1],
        image_features: dims[2],
        text_features: dims[3],
        max_reason: dims[4],
        ..FeatureConfig::default()
    };
    if config.hash() != hash {
        return Err(Error::Checkpoint("feature-config hash mismatch".into()));
    }
    config.validate().map_err(|e| Error::Checkpoint(e.to_string()))?;
    let mut weights = Vec::with_capacity(config.num_params());
    let mut b = [0u8; 8];
    for _ in 0..config.num_params() {
        r.read_exact(&mut b)?;
        weights.push(f64::from_le_bytes(b));
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Checkpoint("trailing bytes after payload".into()));
    }
    PolicyParams::from_weights(config, weights)
}

pub fn save_checkpoint(path: &Path, params: &PolicyParams) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(&mut w, params)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<PolicyParams> {
    read_checkpoint(&mut BufReader::new(File::open(path)?))
}
