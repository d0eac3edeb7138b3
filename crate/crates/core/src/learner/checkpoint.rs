//! Policy checkpoint file.
//!
//! Little-endian layout:
//!
//! ```text
//! magic        8 bytes   "REVRLPOL"
//! n_sizes      u64
//! sizes        n_sizes x u64      layer widths, input first
//! log_std      2 x f64            lower and upper log-std bounds
//! params       f64 ...            per layer: weights row-major (in x out), then biases
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::mlp::Mlp;
use super::policy::Policy;

pub const MAGIC: &[u8; 8] = b"REVRLPOL";

pub fn write_policy<W: Write>(mut w: W, policy: &Policy) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(policy.actor.sizes.len() as u64).to_le_bytes())?;
    for &s in &policy.actor.sizes {
        w.write_all(&(s as u64).to_le_bytes())?;
    }
    for b in policy.log_std_bounds {
        w.write_all(&b.to_le_bytes())?;
    }
    for p in policy.actor.to_flat() {
        w.write_all(&p.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_policy<R: Read>(mut r: R) -> Result<Policy> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut cursor = bytes.as_slice();
    let mut take8 = |what: &str| -> Result<[u8; 8]> {
        if cursor.len() < 8 {
            return Err(Error::Checkpoint(format!("truncated while reading {what}")));
        }
        let (head, rest) = cursor.split_at(8);
        cursor = rest;
        Ok(head.try_into().unwrap())
    };
    if &take8("magic")? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let n = u64::from_le_bytes(take8("layer count")?) as usize;
    if !(2..=64).contains(&n) {
        return Err(Error::Checkpoint(format!("implausible layer count {n}")));
    }
    let sizes = (0..n)
        .map(|_| take8("layer size").map(|b| u64::from_le_bytes(b) as usize))
        .collect::<Result<Vec<_>>>()?;
    let bounds = [
        f64::from_le_bytes(take8("log-std bound")?),
        f64::from_le_bytes(take8("log-std bound")?),
    ];
    let expected: usize = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
    let flat = (0..expected)
        .map(|_| take8("parameters").map(f64::from_le_bytes))
        .collect::<Result<Vec<_>>>()?;
    if !cursor.is_empty() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", cursor.len())));
    }
    let actor = Mlp::from_flat(&sizes, &flat).map_err(|e| Error::Checkpoint(e.to_string()))?;
    Policy::from_actor(actor, bounds).map_err(|e| Error::Checkpoint(e.to_string()))
}

pub fn save_policy(path: &Path, policy: &Policy) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_policy(&mut f, policy)?;
    f.flush()?;
    Ok(())
}

pub fn load_policy(path: &Path) -> Result<Policy> {
    read_policy(std::io::BufReader::new(std::fs::File::open(path)?))
}
