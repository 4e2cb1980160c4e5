//! Little-endian binary helpers shared by the checkpoint formats.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::grad::ParamSpec;

pub(crate) fn put_u32(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn put_u64(w: &mut impl Write, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn put_f64s(w: &mut impl Write, values: &[f64]) -> Result<()> {
    put_u64(w, values.len() as u64)?;
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub(crate) fn get_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn get_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn get_f64s(r: &mut impl Read, expected: usize) -> Result<Vec<f64>> {
    let n = get_u64(r)? as usize;
    if n != expected {
        return Err(Error::Checkpoint(format!(
            "array of {n} values, expected {expected}"
        )));
    }
    let mut bytes = vec![0u8; n * 8];
    r.read_exact(&mut bytes).map_err(truncated)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Checkpoint("truncated file".into())
    } else {
        Error::Io(e)
    }
}

pub(crate) fn expect_magic(r: &mut impl Read, magic: &[u8; 8], version: u32) -> Result<()> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(truncated)?;
    if &b != magic {
        return Err(Error::Checkpoint(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&b),
            String::from_utf8_lossy(magic)
        )));
    }
    let v = get_u32(r)?;
    if v != version {
        return Err(Error::Checkpoint(format!(
            "unsupported version {v}, expected {version}"
        )));
    }
    Ok(())
}

pub(crate) fn put_layout(w: &mut impl Write, layout: &[ParamSpec]) -> Result<()> {
    put_u32(w, layout.len() as u32)?;
    for spec in layout {
        put_u32(w, spec.name.len() as u32)?;
        w.write_all(spec.name.as_bytes())?;
        put_u32(w, spec.shape.len() as u32)?;
        for &d in &spec.shape {
            put_u64(w, d as u64)?;
        }
        put_u64(w, spec.offset as u64)?;
    }
    Ok(())
}

pub(crate) fn get_layout(r: &mut impl Read) -> Result<Vec<ParamSpec>> {
    let count = get_u32(r)? as usize;
    let mut layout = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let name_len = get_u32(r)? as usize;
        if name_len > 4096 {
            return Err(Error::Checkpoint("parameter name too long".into()));
        }
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name).map_err(truncated)?;
        let name = String::from_utf8(name)
            .map_err(|_| Error::Checkpoint("parameter name is not UTF-8".into()))?;
        let ndim = get_u32(r)? as usize;
        if ndim > 8 {
            return Err(Error::Checkpoint(format!("{ndim}-dimensional parameter")));
        }
        let shape = (0..ndim)
            .map(|_| get_u64(r).map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let offset = get_u64(r)? as usize;
        layout.push(ParamSpec {
            name,
            shape,
            offset,
        });
    }
    Ok(layout)
}
