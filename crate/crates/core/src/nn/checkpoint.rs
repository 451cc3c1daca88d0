//! Binary checkpoint format, little endian:
//!
//! ```text
//! magic "RBCKPT\0\0" | u32 version | u32 variant tag (u32::MAX = none)
//! u32 C | u32 H | u32 W | u32 n_convs | n_convs x (u32 ch, u32 pool_h, u32 pool_w)
//! u32 n_hidden | n_hidden x u32 | u32 n_outputs | u64 n_params
//! n_params x f32 | u64 FNV-1a of everything before it
//! ```
//!
//! A pool of `0 x 0` means no pooling after that convolution.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::model::{CnnModel, ConvSpec, Layer, ModelSpec, Variant};
use super::NnError;
use crate::codec::{fnv1a, ByteReader, FNV_OFFSET};

const MAGIC: &[u8; 8] = b"RBCKPT\0\0";
pub const CHECKPOINT_VERSION: u32 = 1;
const NO_VARIANT: u32 = u32::MAX;
/// Upper bound on header list lengths, to reject garbage before allocating.
const MAX_LAYERS: u32 = 1024;

fn model_spec(model: &CnnModel<f32>) -> ModelSpec {
    let mut convs = Vec::new();
    let mut hidden = Vec::new();
    for layer in &model.layers {
        match layer {
            Layer::Conv(c) => convs.push(ConvSpec { channels: c.out_channels, pool: None }),
            Layer::Pool(p) => {
                if let Some(last) = convs.last_mut() {
                    last.pool = Some(p.kernel);
                }
            }
            Layer::Dense(d) => hidden.push(d.outputs),
            Layer::Relu => {}
        }
    }
    hidden.pop();
    ModelSpec { input_shape: model.input_shape(), convs, hidden, n_outputs: model.n_outputs() }
}

pub fn write_checkpoint(model: &CnnModel<f32>, mut w: impl Write) -> Result<(), NnError> {
    let spec = model_spec(model);
    let mut buf = Vec::with_capacity(64 + 4 * model.param_count());
    let put = |v: u32, buf: &mut Vec<u8>| buf.extend_from_slice(&v.to_le_bytes());
    buf.extend_from_slice(MAGIC);
    put(CHECKPOINT_VERSION, &mut buf);
    put(model.variant.map_or(NO_VARIANT, Variant::tag), &mut buf);
    for d in spec.input_shape {
        put(d as u32, &mut buf);
    }
    put(spec.convs.len() as u32, &mut buf);
    for c in &spec.convs {
        let (ph, pw) = c.pool.unwrap_or((0, 0));
        put(c.channels as u32, &mut buf);
        put(ph as u32, &mut buf);
        put(pw as u32, &mut buf);
    }
    put(spec.hidden.len() as u32, &mut buf);
    for &h in &spec.hidden {
        put(h as u32, &mut buf);
    }
    put(spec.n_outputs as u32, &mut buf);
    buf.extend_from_slice(&(model.param_count() as u64).to_le_bytes());
    for p in model.params() {
        for v in p {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let hash = fnv1a(&buf, FNV_OFFSET);
    buf.extend_from_slice(&hash.to_le_bytes());
    w.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a>(ByteReader<'a>);

impl Cursor<'_> {
    fn u32(&mut self) -> Result<u32, NnError> {
        self.0.u32().ok_or(NnError::Truncated)
    }

    fn u64(&mut self) -> Result<u64, NnError> {
        self.0.u64().ok_or(NnError::Truncated)
    }

    fn count(&mut self) -> Result<usize, NnError> {
        let n = self.u32()?;
        if n > MAX_LAYERS {
            return Err(NnError::Corrupt(format!("layer count {n}")));
        }
        Ok(n as usize)
    }
}

pub fn read_checkpoint(mut r: impl Read) -> Result<CnnModel<f32>, NnError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(if bytes.len() < MAGIC.len() && MAGIC.starts_with(&bytes) {
            NnError::Truncated
        } else {
            NnError::BadMagic
        });
    }
    let mut cur = Cursor(ByteReader::new(&bytes));
    cur.0.pos = MAGIC.len();
    let version = cur.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(NnError::UnsupportedVersion { found: version, expected: CHECKPOINT_VERSION });
    }
    let tag = cur.u32()?;
    let variant = match tag {
        NO_VARIANT => None,
        t => Some(Variant::from_tag(t).ok_or_else(|| NnError::Corrupt(format!("variant tag {t}")))?),
    };
    let input_shape = [cur.u32()? as usize, cur.u32()? as usize, cur.u32()? as usize];
    let mut convs = Vec::new();
    for _ in 0..cur.count()? {
        let channels = cur.u32()? as usize;
        let pool = match (cur.u32()? as usize, cur.u32()? as usize) {
            (0, 0) => None,
            k => Some(k),
        };
        convs.push(ConvSpec { channels, pool });
    }
    let mut hidden = Vec::new();
    for _ in 0..cur.count()? {
        hidden.push(cur.u32()? as usize);
    }
    let n_outputs = cur.u32()? as usize;
    let n_params = cur.u64()?;
    let spec = ModelSpec { input_shape, convs, hidden, n_outputs };
    if input_shape.iter().any(|&d| d == 0 || d > 1 << 16) || n_outputs == 0 {
        return Err(NnError::Corrupt(format!("implausible shape {spec:?}")));
    }
    // Everything after the parameter count is parameters plus an 8-byte checksum.
    let remaining = cur.0.remaining() as u64;
    if remaining < n_params.saturating_mul(4).saturating_add(8) {
        return Err(NnError::Truncated);
    }
    if remaining > n_params * 4 + 8 {
        return Err(NnError::Corrupt(format!("{} trailing bytes", remaining - n_params * 4 - 8)));
    }
    let body_end = bytes.len() - 8;
    let stored = u64::from_le_bytes(bytes[body_end..].try_into().unwrap());
    if fnv1a(&bytes[..body_end], FNV_OFFSET) != stored {
        return Err(NnError::ChecksumMismatch);
    }
    let mut model = CnnModel::<f32>::from_spec(&spec, variant, 0).map_err(|e| NnError::Corrupt(e.to_string()))?;
    if model.param_count() as u64 != n_params {
        return Err(NnError::Corrupt(format!(
            "header declares {n_params} parameters, architecture has {}",
            model.param_count()
        )));
    }
    for p in model.params_mut() {
        for v in p.iter_mut() {
            *v = cur.0.f32().ok_or(NnError::Truncated)?;
        }
    }
    Ok(model)
}

pub fn save_checkpoint(model: &CnnModel<f32>, path: &Path) -> Result<(), NnError> {
    let tmp = path.with_extension("tmp");
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        write_checkpoint(model, &mut w)?;
        w.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<CnnModel<f32>, NnError> {
    read_checkpoint(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::build_model;

    fn bytes(model: &CnnModel<f32>) -> Vec<u8> {
        let mut out = Vec::new();
        write_checkpoint(model, &mut out).unwrap();
        out
    }

    #[test]
    fn round_trip_all_variants() {
        for v in Variant::ALL {
            let model = build_model(v, 7);
            let back = read_checkpoint(bytes(&model).as_slice()).unwrap();
            assert_eq!(back, model);
        }
    }

    #[test]
    fn typed_errors() {
        let good = bytes(&build_model(Variant::Ra4, 1));
        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(matches!(read_checkpoint(bad_magic.as_slice()), Err(NnError::BadMagic)));
        let mut bad_version = good.clone();
        bad_version[8] = 9;
        assert!(matches!(read_checkpoint(bad_version.as_slice()), Err(NnError::UnsupportedVersion { found: 9, .. })));
        assert!(matches!(read_checkpoint(&good[..good.len() - 100]), Err(NnError::Truncated)));
        assert!(matches!(read_checkpoint(&good[..20]), Err(NnError::Truncated)));
        let mut flipped = good.clone();
        let mid = good.len() / 2;
        flipped[mid] ^= 0x40;
        assert!(matches!(read_checkpoint(flipped.as_slice()), Err(NnError::ChecksumMismatch)));
    }
}
