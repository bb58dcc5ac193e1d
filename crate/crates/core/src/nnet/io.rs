//! Versioned little-endian binary serialization of a network.
//!
//! Layout: magic `RQNN`, u32 version, u32 layer count, then per layer
//! u32 inputs, u32 outputs, u8 activation code, weights and biases as f64 bits.

use std::io::{Read, Write};

use super::{Activation, DenseNet, Layer};
use crate::error::{Error, Result};

pub const NET_MAGIC: &[u8; 4] = b"RQNN";
pub const NET_VERSION: u32 = 1;

pub fn write_net<W: Write>(net: &DenseNet, out: &mut W) -> Result<()> {
    out.write_all(NET_MAGIC)?;
    out.write_all(&NET_VERSION.to_le_bytes())?;
    out.write_all(&(net.layers.len() as u32).to_le_bytes())?;
    for l in &net.layers {
        out.write_all(&(l.inputs as u32).to_le_bytes())?;
        out.write_all(&(l.outputs as u32).to_le_bytes())?;
        out.write_all(&[l.activation.code()])?;
        for v in l.weights.iter().chain(&l.bias) {
            out.write_all(&v.to_bits().to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_bits(u64::from_le_bytes(b)))
}

pub fn read_net<R: Read>(r: &mut R) -> Result<DenseNet> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != NET_MAGIC {
        return Err(Error::validation("not a network checkpoint (bad magic)"));
    }
    let version = read_u32(r)?;
    if version != NET_VERSION {
        return Err(Error::validation(format!("unsupported network format version {version}")));
    }
    let n = read_u32(r)? as usize;
    let mut layers = Vec::with_capacity(n.min(64));
    for _ in 0..n {
        let inputs = read_u32(r)? as usize;
        let outputs = read_u32(r)? as usize;
        let mut code = [0u8; 1];
        r.read_exact(&mut code)?;
        let activation = Activation::from_code(code[0])
            .ok_or_else(|| Error::validation(format!("unknown activation code {}", code[0])))?;
        let weights = (0..inputs * outputs).map(|_| read_f64(r)).collect::<Result<Vec<_>>>()?;
        let bias = (0..outputs).map(|_| read_f64(r)).collect::<Result<Vec<_>>>()?;
        layers.push(Layer { inputs, outputs, weights, bias, activation });
    }
    DenseNet::new(layers)
}
