//! Model container.
//!
//! All integers and scalars are little-endian.
//!
//! | field        | size            | notes                                  |
//! |--------------|-----------------|----------------------------------------|
//! | magic        | 8               | `NDIFFMLP`                             |
//! | version      | u32             | currently 1                            |
//! | scalar width | u8              | 4 (`f32`) or 8 (`f64`)                 |
//! | output head  | u8              | 0 sigmoid, 1 softmax                   |
//! | layer count  | u32             | number of widths `n` (input..output)   |
//! | widths       | `n` x u32       | input, hidden..., output               |
//! | init seed    | u64             |                                        |
//! | parameters   | per layer       | weights `fan_in x fan_out` row-major, then bias |
//! | checksum     | u32             | CRC-32 (IEEE) of every preceding byte  |

use std::fs;
use std::path::Path;

use super::mlp::{Layer, Mlp, MlpArch, OutputHead};
use super::scalar::Scalar;
use crate::error::ModelError;

pub const MAGIC: &[u8; 8] = b"NDIFFMLP";
pub const VERSION: u32 = 1;

pub fn encode_model<T: Scalar>(model: &Mlp<T>) -> Vec<u8> {
    let arch = model.arch();
    let widths = arch.widths();
    let mut out = Vec::with_capacity(32 + arch.parameter_count() * T::BYTES as usize);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(T::BYTES);
    out.push(arch.head.code());
    out.extend_from_slice(&(widths.len() as u32).to_le_bytes());
    for w in &widths {
        out.extend_from_slice(&(*w as u32).to_le_bytes());
    }
    out.extend_from_slice(&model.init_seed().to_le_bytes());
    for layer in model.layers() {
        for &p in layer.params() {
            p.write_le(&mut out);
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        let end = self.pos.checked_add(n).ok_or(ModelError::Truncated)?;
        let s = self.buf.get(self.pos..end).ok_or(ModelError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, ModelError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode_model<T: Scalar>(bytes: &[u8]) -> Result<Mlp<T>, ModelError> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(ModelError::BadMagic);
    }
    let mut r = Reader { buf: bytes, pos: MAGIC.len() };
    let version = r.u32()?;
    if version != VERSION {
        return Err(ModelError::Version(version));
    }
    let width = r.u8()?;
    if width != T::BYTES {
        return Err(ModelError::ScalarWidth {
            stored: width,
            expected: T::BYTES,
        });
    }
    let head = OutputHead::from_code(r.u8()?)
        .ok_or_else(|| ModelError::Arch("unknown output head".into()))?;
    let n = r.u32()? as usize;
    if n < 2 {
        return Err(ModelError::Arch(format!("{n} layer widths")));
    }
    let widths = (0..n)
        .map(|_| r.u32().map(|w| w as usize))
        .collect::<Result<Vec<_>, _>>()?;
    let init_seed = r.u64()?;
    let arch = MlpArch::new(widths[0], widths[1..n - 1].to_vec(), widths[n - 1])?.with_head(head);

    let scalar = T::BYTES as usize;
    let body_len = arch
        .parameter_count()
        .checked_mul(scalar)
        .ok_or(ModelError::Truncated)?;
    if bytes.len() < r.pos + body_len + 4 {
        return Err(ModelError::Truncated);
    }
    let payload_end = r.pos + body_len;
    let stored = u32::from_le_bytes(bytes[payload_end..payload_end + 4].try_into().unwrap());
    let computed = crc32fast::hash(&bytes[..payload_end]);
    if stored != computed {
        return Err(ModelError::Checksum { stored, computed });
    }

    let mut layers = Vec::new();
    for (fan_in, fan_out) in arch.layer_shapes() {
        let mut layer = Layer::zeros(fan_in, fan_out);
        for p in layer.params_mut() {
            *p = T::read_le(r.take(scalar)?);
        }
        layers.push(layer);
    }
    Mlp::from_parts(arch, layers, init_seed)
}

pub fn save_model<T: Scalar>(model: &Mlp<T>, path: &Path) -> Result<(), ModelError> {
    fs::write(path, encode_model(model)).map_err(|source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model<T: Scalar>(path: &Path) -> Result<Mlp<T>, ModelError> {
    let bytes = fs::read(path).map_err(|source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_model(&bytes)
}
