//! Binary file formats. All integers and floats are little-endian.
//!
//! Embedding (`BTE1`):
//! ```text
//! magic "BTE1" | version u32 | d u64 | |T| u64 | |A| u64 | seed u64
//! | generator name (u32 length + UTF-8) | schema hash u64
//! | schema JSON (u32 length + UTF-8)
//! | token matrix |T|×d f64 row-major | |A| attribute matrices d×d f64 row-major
//! ```
//!
//! Vector (`BTV1`): `magic "BTV1" | d u64 | fingerprint u64 | d × f64`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{BTVector, Embedding};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::schema::Schema;

pub const EMBEDDING_MAGIC: &[u8; 4] = b"BTE1";
pub const VECTOR_MAGIC: &[u8; 4] = b"BTV1";
pub const EMBEDDING_VERSION: u32 = 1;

fn write_u32<W: Write>(w: &mut W, x: u32) -> Result<()> {
    w.write_all(&x.to_le_bytes())?;
    Ok(())
}

fn write_u64<W: Write>(w: &mut W, x: u64) -> Result<()> {
    w.write_all(&x.to_le_bytes())?;
    Ok(())
}

fn write_str<W: Write>(w: &mut W, s: &str) -> Result<()> {
    let len = u32::try_from(s.len()).map_err(|_| Error::Format("string too long".into()))?;
    write_u32(w, len)?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn write_f64s<W: Write>(w: &mut W, xs: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(xs.len() * 8);
    for x in xs {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_array<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(r)?))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    Ok(u64::from_le_bytes(read_array(r)?))
}

fn read_usize<R: Read>(r: &mut R, what: &str) -> Result<usize> {
    usize::try_from(read_u64(r)?)
        .map_err(|_| Error::Format(format!("{what} does not fit in memory")))
}

fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let len = read_u32(r)? as usize;
    let mut b = vec![0u8; len];
    r.read_exact(&mut b)?;
    String::from_utf8(b).map_err(|_| Error::Format("invalid UTF-8 in header".into()))
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let bytes = n
        .checked_mul(8)
        .ok_or_else(|| Error::Format("payload size overflows".into()))?;
    let mut b = vec![0u8; bytes];
    r.read_exact(&mut b)?;
    Ok(b.chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

fn expect_magic<R: Read>(r: &mut R, magic: &[u8; 4]) -> Result<()> {
    let got: [u8; 4] = read_array(r)?;
    if &got != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&got),
            String::from_utf8_lossy(magic)
        )));
    }
    Ok(())
}

pub fn write_embedding<W: Write>(e: &Embedding, w: &mut W) -> Result<()> {
    w.write_all(EMBEDDING_MAGIC)?;
    write_u32(w, EMBEDDING_VERSION)?;
    write_u64(w, e.dim() as u64)?;
    write_u64(w, e.schema().token_count() as u64)?;
    write_u64(w, e.schema().attribute_count() as u64)?;
    write_u64(w, e.seed())?;
    write_str(w, e.generator())?;
    write_u64(w, e.schema().hash())?;
    write_str(w, &e.schema().to_json())?;
    write_f64s(w, e.token_matrix().as_slice())?;
    for m in e.attribute_matrices() {
        write_f64s(w, m.as_slice())?;
    }
    Ok(())
}

pub fn read_embedding<R: Read>(r: &mut R) -> Result<Embedding> {
    expect_magic(r, EMBEDDING_MAGIC)?;
    let version = read_u32(r)?;
    if version != EMBEDDING_VERSION {
        return Err(Error::Format(format!(
            "unsupported embedding version {version}"
        )));
    }
    let dim = read_usize(r, "dimension")?;
    let n_tokens = read_usize(r, "token count")?;
    let n_attrs = read_usize(r, "attribute count")?;
    let seed = read_u64(r)?;
    let generator = read_str(r)?;
    let schema_hash = read_u64(r)?;
    let schema = Schema::from_json(&read_str(r)?)?;
    if schema.hash() != schema_hash {
        return Err(Error::Format(
            "schema hash does not match stored schema".into(),
        ));
    }
    if schema.token_count() != n_tokens || schema.attribute_count() != n_attrs {
        return Err(Error::Format(
            "header counts disagree with stored schema".into(),
        ));
    }
    let tokens = Matrix::from_vec(n_tokens, dim, read_f64s(r, n_tokens * dim)?);
    let attrs = (0..n_attrs)
        .map(|_| Ok(Matrix::from_vec(dim, dim, read_f64s(r, dim * dim)?)))
        .collect::<Result<Vec<_>>>()?;
    Embedding::from_parts(schema, dim, seed, generator, tokens, attrs)
}

pub fn write_vector<W: Write>(v: &BTVector, w: &mut W) -> Result<()> {
    w.write_all(VECTOR_MAGIC)?;
    write_u64(w, v.dim() as u64)?;
    write_u64(w, v.fingerprint())?;
    write_f64s(w, v.as_slice())
}

pub fn read_vector<R: Read>(r: &mut R) -> Result<BTVector> {
    expect_magic(r, VECTOR_MAGIC)?;
    let dim = read_usize(r, "dimension")?;
    let fingerprint = read_u64(r)?;
    Ok(BTVector::new(read_f64s(r, dim)?, fingerprint))
}

pub fn save_embedding(e: &Embedding, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_embedding(e, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_embedding(path: impl AsRef<Path>) -> Result<Embedding> {
    read_embedding(&mut BufReader::new(File::open(path)?))
}

pub fn save_vector(v: &BTVector, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_vector(v, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_vector(path: impl AsRef<Path>) -> Result<BTVector> {
    read_vector(&mut BufReader::new(File::open(path)?))
}
