//! "HWMP" parameter checkpoint format: versioned header followed by named
//! parameter records (name length, name bytes, shape, raw little-endian f32).

use crate::error::NdError;
use crate::tensor::Tensor;
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"HWMP";
const VERSION: u32 = 1;

pub fn save(path: &Path, params: &BTreeMap<String, Tensor<f32>>) -> Result<(), NdError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    w.write_u32::<LittleEndian>(params.len() as u32)?;
    for (name, t) in params {
        w.write_u32::<LittleEndian>(name.len() as u32)?;
        w.write_all(name.as_bytes())?;
        w.write_u32::<LittleEndian>(t.shape().len() as u32)?;
        for &d in t.shape() {
            w.write_u32::<LittleEndian>(d as u32)?;
        }
        for &v in t.data() {
            w.write_f32::<LittleEndian>(v)?;
        }
    }
    Ok(())
}

pub fn load(path: &Path) -> Result<BTreeMap<String, Tensor<f32>>, NdError> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(NdError::Format("bad magic, not an HWMP checkpoint".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != VERSION {
        return Err(NdError::Format(format!("unsupported version {version}")));
    }
    let count = r.read_u32::<LittleEndian>()?;
    let mut out = BTreeMap::new();
    for _ in 0..count {
        let name_len = r.read_u32::<LittleEndian>()? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|_| NdError::Format("bad name".into()))?;
        let ndim = r.read_u32::<LittleEndian>()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(r.read_u32::<LittleEndian>()? as usize);
        }
        let n: usize = shape.iter().product();
        let mut data = vec![0f32; n];
        r.read_f32_into::<LittleEndian>(&mut data)?;
        out.insert(name, Tensor::new(shape, data).map_err(|e| NdError::Format(e.to_string()))?);
    }
    Ok(out)
}
