//! `.rfmlp` checkpoint layout (little-endian):
//!
//! ```text
//! magic "RFMLP\0" | version u16 | layer count u16
//! per layer: in_dim u32 | out_dim u32 | activation u8 (0 identity, 1 relu)
//!            | weights out_dim×in_dim f64 row-major | bias out_dim f64
//! crc32 u32 over all preceding bytes
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::matrix::Matrix;
use super::mlp::{Activation, DenseLayer, Mlp};
use super::{Result, TensorError};
use crate::binfmt::{CrcReader, CrcWriter, FormatError};

pub const CHECKPOINT_MAGIC: &[u8; 6] = b"RFMLP\0";
pub const CHECKPOINT_VERSION: u16 = 1;

pub fn encode_checkpoint<W: Write>(model: &Mlp, out: W) -> Result<W> {
    let layer_count = u16::try_from(model.layers().len())
        .map_err(|_| TensorError::InvalidLayers("more than 65535 layers".into()))?;
    if layer_count == 0 {
        // the input width of a layerless model is not representable
        return Err(FormatError::Invalid("checkpoint without layers".into()).into());
    }
    let mut w = CrcWriter::new(out);
    let io = |e: std::io::Error| TensorError::Format(FormatError::Io(e));
    w.put(CHECKPOINT_MAGIC).map_err(io)?;
    w.put_u16(CHECKPOINT_VERSION).map_err(io)?;
    w.put_u16(layer_count).map_err(io)?;
    for layer in model.layers() {
        let dim = |d: usize| u32::try_from(d).map_err(|_| TensorError::InvalidLayers(format!("dimension {d} exceeds u32")));
        w.put_u32(dim(layer.in_dim())?).map_err(io)?;
        w.put_u32(dim(layer.out_dim())?).map_err(io)?;
        w.put_u8(layer.activation().code()).map_err(io)?;
        w.put_f64s(layer.weights().data()).map_err(io)?;
        w.put_f64s(layer.bias()).map_err(io)?;
    }
    w.finish().map_err(io)
}

pub fn decode_checkpoint<R: Read>(input: R) -> Result<Mlp> {
    let mut r = CrcReader::new(input);
    r.magic(CHECKPOINT_MAGIC)?;
    r.version(CHECKPOINT_VERSION)?;
    let count = r.u16("layer count")? as usize;
    if count == 0 {
        return Err(FormatError::Invalid("checkpoint without layers".into()).into());
    }
    let mut layers = Vec::with_capacity(count);
    let mut input_dim = 0;
    for i in 0..count {
        let in_dim = r.u32("layer in_dim")? as usize;
        let out_dim = r.u32("layer out_dim")? as usize;
        let code = r.u8("activation")?;
        let activation = Activation::from_code(code)
            .ok_or_else(|| FormatError::Invalid(format!("unknown activation code {code} in layer {i}")))?;
        if i == 0 {
            input_dim = in_dim;
        }
        let n = in_dim
            .checked_mul(out_dim)
            .ok_or_else(|| FormatError::Invalid(format!("layer {i} dims overflow")))?;
        let weights = r.f64s(n, "layer weights")?;
        let bias = r.f64s(out_dim, "layer bias")?;
        let weights = Matrix::from_vec(out_dim, in_dim, weights)?;
        layers.push(DenseLayer::new(weights, bias, activation)?);
    }
    r.finish()?;
    Mlp::from_layers(input_dim, layers)
}

pub fn write_checkpoint(model: &Mlp, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path.as_ref()).map_err(FormatError::Io)?;
    encode_checkpoint(model, BufWriter::new(file))?;
    Ok(())
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Mlp> {
    let file = File::open(path.as_ref()).map_err(FormatError::Io)?;
    decode_checkpoint(BufReader::new(file))
}
