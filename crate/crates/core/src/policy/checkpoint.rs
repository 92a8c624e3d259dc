//! Binary checkpoint format, all integers and floats little-endian:
//!
//! ```text
//! magic        8 bytes  "IRRLCKPT"
//! version      u32      1
//! input_dim    u32
//! output_dim   u32
//! n_hidden     u32
//! hidden_dims  u32 × n_hidden
//! flags        u32      bit 0: bias on first hidden layer, bit 1: input scaling present
//! [offset      f64 × input_dim, scale f64 × input_dim]   if bit 1
//! n_params     u64
//! theta        f64 × n_params
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{param_count, Architecture, InputScaling, PolicyParameters};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"IRRLCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

const FLAG_FIRST_BIAS: u32 = 1;
const FLAG_SCALING: u32 = 2;

pub fn write_checkpoint<W: Write>(params: &PolicyParameters, mut w: W) -> Result<()> {
    let io = |e| Error::io("<checkpoint>", e);
    let arch = &params.arch;
    w.write_all(CHECKPOINT_MAGIC).map_err(io)?;
    let mut header = vec![
        CHECKPOINT_VERSION,
        arch.input_dim as u32,
        arch.output_dim as u32,
        arch.hidden_dims.len() as u32,
    ];
    header.extend(arch.hidden_dims.iter().map(|h| *h as u32));
    let mut flags = 0;
    if arch.bias_on_first_hidden {
        flags |= FLAG_FIRST_BIAS;
    }
    if params.scaling.is_some() {
        flags |= FLAG_SCALING;
    }
    header.push(flags);
    for v in header {
        w.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    if let Some(s) = &params.scaling {
        for v in s.offset.iter().chain(&s.scale) {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    w.write_all(&(params.theta.len() as u64).to_le_bytes()).map_err(io)?;
    for v in &params.theta {
        w.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn save_checkpoint(params: &PolicyParameters, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_checkpoint(params, BufWriter::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

struct Cursor<R> {
    inner: R,
}

impl<R: Read> Cursor<R> {
    fn bytes<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner.read_exact(&mut buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::Checkpoint(format!("truncated checkpoint while reading {what}"))
            } else {
                Error::io("<checkpoint>", e)
            }
        })?;
        Ok(buf)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(what)?))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes(what)?))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes(what)?))
    }
}

pub fn read_checkpoint<R: Read>(reader: R) -> Result<PolicyParameters> {
    let mut c = Cursor { inner: reader };
    let magic: [u8; 8] = c.bytes("magic").map_err(|_| Error::Checkpoint("not a checkpoint".into()))?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("not a checkpoint (bad magic)".into()));
    }
    let version = c.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {version} (expected {CHECKPOINT_VERSION})"
        )));
    }
    let input_dim = c.u32("input_dim")? as usize;
    let output_dim = c.u32("output_dim")? as usize;
    let n_hidden = c.u32("n_hidden")? as usize;
    if n_hidden > 1024 {
        return Err(Error::Checkpoint(format!("implausible hidden layer count {n_hidden}")));
    }
    let hidden_dims = (0..n_hidden)
        .map(|_| c.u32("hidden_dims").map(|h| h as usize))
        .collect::<Result<Vec<_>>>()?;
    let flags = c.u32("flags")?;
    let arch = Architecture {
        input_dim,
        hidden_dims,
        output_dim,
        bias_on_first_hidden: flags & FLAG_FIRST_BIAS != 0,
    };
    arch.validate()
        .map_err(|e| Error::Checkpoint(format!("bad architecture: {e}")))?;
    let scaling = if flags & FLAG_SCALING != 0 {
        let offset = (0..input_dim).map(|_| c.f64("scaling")).collect::<Result<Vec<_>>>()?;
        let scale = (0..input_dim).map(|_| c.f64("scaling")).collect::<Result<Vec<_>>>()?;
        Some(InputScaling::new(offset, scale).map_err(|e| Error::Checkpoint(e.to_string()))?)
    } else {
        None
    };
    let n = c.u64("n_params")? as usize;
    let expected = param_count(&arch);
    if n != expected {
        return Err(Error::Checkpoint(format!(
            "parameter count {n} does not match architecture {arch} ({expected})"
        )));
    }
    let mut theta = Vec::with_capacity(n);
    for _ in 0..n {
        theta.push(c.f64("theta")?);
    }
    let mut rest = [0u8; 1];
    match c.inner.read(&mut rest) {
        Ok(0) => {}
        Ok(_) => return Err(Error::Checkpoint("trailing bytes after θ".into())),
        Err(e) => return Err(Error::io("<checkpoint>", e)),
    }
    PolicyParameters::from_theta(arch, theta)
        .map_err(|e| Error::Checkpoint(e.to_string()))?
        .with_scaling(scaling)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<PolicyParameters> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(BufReader::new(file))
}

/// Header length in bytes for an architecture.
pub fn header_len(arch: &Architecture, scaled: bool) -> usize {
    8 + 4 * (4 + arch.hidden_dims.len() + 1) + if scaled { 16 * arch.input_dim } else { 0 } + 8
}
