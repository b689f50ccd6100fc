//! Binary trajectory files: an 8-byte magic, `n` and `d` as little-endian
//! `u64`, then `n·d` little-endian `f64` values (row-major by step).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::SkeletonPath;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"ANNLTRJ1";

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub n: usize,
    pub d: usize,
    pub values: Vec<f64>,
}

pub fn write_trajectory(path: impl AsRef<Path>, skeleton: &SkeletonPath) -> Result<()> {
    if skeleton.states.len() != skeleton.n * skeleton.d {
        return Err(Error::invalid("skeleton", "states were not stored (endpoint-only run)"));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(skeleton.n as u64).to_le_bytes())?;
    w.write_all(&(skeleton.d as u64).to_le_bytes())?;
    for v in &skeleton.states {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectory(path: impl AsRef<Path>) -> Result<Trajectory> {
    let mut r = BufReader::new(File::open(path)?);
    let mut header = [0u8; 24];
    r.read_exact(&mut header)?;
    if &header[..8] != MAGIC {
        return Err(Error::Data("not a trajectory file (bad magic)".into()));
    }
    let word = |i: usize| u64::from_le_bytes(header[i..i + 8].try_into().expect("8-byte slice")) as usize;
    let (n, d) = (word(8), word(16));
    let len = n
        .checked_mul(d)
        .ok_or_else(|| Error::Data(format!("trajectory header overflows: n = {n}, d = {d}")))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != len * 8 {
        return Err(Error::Data(format!(
            "trajectory body has {} bytes, header promises {}",
            bytes.len(),
            len * 8
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok(Trajectory { n, d, values })
}
