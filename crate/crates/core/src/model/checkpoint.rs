//! Binary parameter checkpoints.
//!
//! Layout, all integers `u64` and all values `f64`, little-endian:
//!
//! ```text
//! "STDDPCKPT"            9 ASCII bytes
//! N M d h w              5 × u64
//! E_p                    M·d   (row-major)
//! E_u                    N·d
//! W_{k−}, k = 1..w       w · h·d
//! W_{k+}, k = 1..w       w · h·d
//! W_u                    h·d
//! W_t                    h·7
//! w_before               M
//! w_after                M
//! W_c                    M·h
//! ```
//!
//! Nothing follows the last tensor.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{HyperParams, ModelParams};
use crate::error::{Error, Result};

pub const CKPT_MAGIC: &[u8; 9] = b"STDDPCKPT";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckpointHeader {
    pub num_users: usize,
    pub num_pois: usize,
    pub hyper: HyperParams,
}

impl CheckpointHeader {
    /// Fails unless the checkpoint fits a corpus of this size and these
    /// hyperparameters.
    pub fn ensure_compatible(&self, num_users: usize, num_pois: usize, hyper: HyperParams) -> Result<()> {
        if self.num_users != num_users || self.num_pois != num_pois || self.hyper != hyper {
            return Err(Error::ShapeMismatch(format!(
                "checkpoint has N={} M={} d={} h={} w={}, expected N={num_users} M={num_pois} d={} h={} w={}",
                self.num_users,
                self.num_pois,
                self.hyper.d,
                self.hyper.h,
                self.hyper.w,
                hyper.d,
                hyper.h,
                hyper.w
            )));
        }
        Ok(())
    }
}

pub fn write_checkpoint(params: &ModelParams, mut out: impl Write) -> Result<()> {
    let hp = params.hyper();
    out.write_all(CKPT_MAGIC)?;
    for v in [params.num_users(), params.num_pois(), hp.d, hp.h, hp.w] {
        out.write_all(&(v as u64).to_le_bytes())?;
    }
    for t in params.tensors() {
        for x in t {
            out.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn save_checkpoint(params: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(params, &mut w)?;
    w.flush()?;
    Ok(())
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_header(r: &mut impl Read) -> Result<CheckpointHeader> {
    let mut magic = [0u8; 9];
    r.read_exact(&mut magic)?;
    if &magic != CKPT_MAGIC {
        return Err(Error::InvalidInput("not a checkpoint file (bad magic)".into()));
    }
    let mut dims = [0usize; 5];
    for d in &mut dims {
        *d = usize::try_from(read_u64(r)?)
            .map_err(|_| Error::InvalidInput("checkpoint dimension overflows".into()))?;
    }
    let [num_users, num_pois, d, h, w] = dims;
    let hyper = HyperParams { d, h, w };
    hyper.validate()?;
    Ok(CheckpointHeader {
        num_users,
        num_pois,
        hyper,
    })
}

pub fn read_checkpoint(mut r: impl Read) -> Result<(CheckpointHeader, ModelParams)> {
    let header = read_header(&mut r)?;
    let mut params = ModelParams::zeros(header.num_users, header.num_pois, header.hyper);
    for t in params.tensors_mut() {
        for x in t.iter_mut() {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            *x = f64::from_le_bytes(b);
        }
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::InvalidInput("trailing bytes after checkpoint tensors".into()));
    }
    Ok((header, params))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(CheckpointHeader, ModelParams)> {
    read_checkpoint(BufReader::new(File::open(path)?))
}

/// Reads only the header, to check compatibility before loading tensors.
pub fn peek_header(path: impl AsRef<Path>) -> Result<CheckpointHeader> {
    read_header(&mut BufReader::new(File::open(path)?))
}
