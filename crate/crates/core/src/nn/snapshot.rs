//! Flat parameter snapshot: a short header followed by little-endian `f64`s.
//!
//! ```text
//! magic  "MLPS"            4 bytes
//! layers u32               number of entries in layer_sizes
//! sizes  u32 * layers
//! flags  u8                bit 0: layer norm
//! hidden u8, output u8     activation codes
//! count  u64               number of parameters
//! params f64 * count
//! ```

use alloc::format;
use alloc::vec::Vec;

use super::{Activation, Architecture, MlpNet};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"MLPS";

pub fn encode_snapshot(net: &MlpNet, out: &mut Vec<u8>) {
    let arch = net.architecture();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(arch.layer_sizes.len() as u32).to_le_bytes());
    for &s in &arch.layer_sizes {
        out.extend_from_slice(&(s as u32).to_le_bytes());
    }
    out.push(arch.layer_norm as u8);
    out.push(arch.hidden_activation.code());
    out.push(arch.output_activation.code());
    out.extend_from_slice(&(net.num_params() as u64).to_le_bytes());
    for p in net.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
}

/// Decodes one snapshot from the front of `bytes`, returning the network and
/// the number of bytes consumed.
pub fn decode_snapshot(bytes: &[u8]) -> Result<(MlpNet, usize)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Decode("bad magic".into()));
    }
    let layers = r.u32()? as usize;
    if layers > 64 {
        return Err(Error::Decode(format!("implausible layer count {layers}")));
    }
    let mut layer_sizes = Vec::with_capacity(layers);
    for _ in 0..layers {
        layer_sizes.push(r.u32()? as usize);
    }
    let flags = r.u8()?;
    let hidden = Activation::from_code(r.u8()?).ok_or(Error::Decode("activation".into()))?;
    let output = Activation::from_code(r.u8()?).ok_or(Error::Decode("activation".into()))?;
    let arch = Architecture {
        layer_sizes,
        hidden_activation: hidden,
        output_activation: output,
        layer_norm: flags & 1 == 1,
    };
    let mut net = MlpNet::zeros(arch).map_err(|e| Error::Decode(format!("{e}")))?;
    let count = r.u64()? as usize;
    if count != net.num_params() {
        return Err(Error::Decode(format!(
            "parameter count {count} does not match architecture ({})",
            net.num_params()
        )));
    }
    let mut params = Vec::with_capacity(count);
    for _ in 0..count {
        params.push(r.f64()?);
    }
    net.set_params(&params)?;
    Ok((net, r.pos))
}

pub(crate) struct Reader<'a> {
    pub bytes: &'a [u8],
    pub pos: usize,
}

impl<'a> Reader<'a> {
    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Decode("truncated".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
