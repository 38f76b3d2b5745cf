//! Binary weight files.
//!
//! Little-endian layout: `XSRW`, version `u32`, arch `u8`, residual `u8`,
//! layer count `u32`, then per layer `out u32, in u32, f u32, activation u8`
//! followed by the weights and biases as `f64`.

use crate::error::{Error, Result};
use crate::nn::conv::{Activation, ConvLayer};
use crate::nn::model::{Arch, Network, SrModel};

pub const MAGIC: &[u8; 4] = b"XSRW";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 14;
const LAYER_HEADER_LEN: usize = 13;

/// Exact size of the file `save_weights` produces for `model`.
pub fn encoded_len(model: &SrModel) -> usize {
    HEADER_LEN + model.layers().iter().map(|l| LAYER_HEADER_LEN + 8 * l.param_count()).sum::<usize>()
}

pub fn save_weights(model: &SrModel) -> Vec<u8> {
    let mut out = Vec::with_capacity(encoded_len(model));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(model.arch.code());
    out.push(model.residual() as u8);
    out.extend_from_slice(&(model.layers().len() as u32).to_le_bytes());
    for l in model.layers() {
        for n in [l.out_channels, l.in_channels, l.kernel_size] {
            out.extend_from_slice(&(n as u32).to_le_bytes());
        }
        out.push(l.activation.code());
        for v in l.weights.iter().chain(&l.biases) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("weight file truncated at byte {} (need {n} more)", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let len = n.checked_mul(8).ok_or_else(|| Error::Format("layer size overflows".into()))?;
        Ok(self.take(len)?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }
}

pub fn load_weights(bytes: &[u8]) -> Result<SrModel> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4).ok() != Some(MAGIC.as_slice()) {
        return Err(Error::Format("bad magic, not a weight file".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported weight file version {version}")));
    }
    let arch_code = r.u8()?;
    let arch =
        Arch::from_code(arch_code).ok_or_else(|| Error::Format(format!("unknown architecture code {arch_code}")))?;
    let residual = match r.u8()? {
        0 => false,
        1 => true,
        b => return Err(Error::Format(format!("invalid residual flag {b}"))),
    };
    let count = r.u32()? as usize;
    // Bound allocations by what the payload could hold.
    if count > bytes.len() / LAYER_HEADER_LEN {
        return Err(Error::Format(format!("weight file truncated: {count} layers declared")));
    }
    let mut layers = Vec::with_capacity(count);
    for _ in 0..count {
        let out_channels = r.u32()? as usize;
        let in_channels = r.u32()? as usize;
        let kernel_size = r.u32()? as usize;
        let code = r.u8()?;
        let activation =
            Activation::from_code(code).ok_or_else(|| Error::Format(format!("unknown activation code {code}")))?;
        let n = out_channels
            .checked_mul(in_channels)
            .and_then(|v| v.checked_mul(kernel_size))
            .and_then(|v| v.checked_mul(kernel_size))
            .ok_or_else(|| Error::Format("layer size overflows".into()))?;
        let weights = r.f64s(n)?;
        let biases = r.f64s(out_channels)?;
        layers.push(ConvLayer { out_channels, in_channels, kernel_size, weights, biases, activation });
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes after weight data", bytes.len() - r.pos)));
    }
    SrModel::new(arch, Network { layers, residual })
}
