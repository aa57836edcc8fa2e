//! Binary container for HODLR matrices.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic      8 bytes  "HODLRBIN"
//! version    u32      1
//! rows, cols u64, u64
//! level      u32      depth of the block tree
//! row leaves u64 count, then u64 sizes (pre-order)
//! col leaves u64 count, then u64 sizes (pre-order)
//! nodes      pre-order stream:
//!   u8 0  dense leaf: u64 rows, u64 cols, rows·cols f64 (column-major)
//!   u8 1  split:      a12 block, a21 block, then the a11 and a22 subtrees
//!         block = u64 rows, u64 cols, u64 rank, U (rows·rank f64), V (cols·rank f64)
//! ```
//!
//! Floats are stored bit for bit, so a round trip is exact.

use std::io::{Read, Write};

use nalgebra::DMatrix;

use super::{HodlrMatrix, LowRank};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"HODLRBIN";
pub const VERSION: u32 = 1;

// Guards against absurd allocations from corrupt headers.
const MAX_ENTRIES: u64 = 1 << 34;

pub fn write_hodlr<W: Write>(m: &HodlrMatrix, w: &mut W) -> Result<()> {
    w.write_all(MAGIC)?;
    put_u32(w, VERSION)?;
    put_u64(w, m.nrows() as u64)?;
    put_u64(w, m.ncols() as u64)?;
    put_u32(w, m.level() as u32)?;
    for sizes in [m.row_leaf_sizes(), m.col_leaf_sizes()] {
        put_u64(w, sizes.len() as u64)?;
        for s in sizes {
            put_u64(w, s as u64)?;
        }
    }
    write_node(m, w)
}

pub fn read_hodlr<R: Read>(r: &mut R) -> Result<HodlrMatrix> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a HODLR container".into()));
    }
    let version = get_u32(r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported container version {version}")));
    }
    let rows = get_u64(r)? as usize;
    let cols = get_u64(r)? as usize;
    let level = get_u32(r)? as usize;
    let mut leaves = Vec::new();
    for _ in 0..2 {
        let count = get_u64(r)?;
        if count > MAX_ENTRIES {
            return Err(Error::Format("leaf count out of range".into()));
        }
        let sizes = (0..count).map(|_| get_u64(r).map(|s| s as usize)).collect::<Result<Vec<_>>>()?;
        leaves.push(sizes);
    }
    let m = read_node(r)?;
    if m.shape() != (rows, cols) || m.level() != level || m.row_leaf_sizes() != leaves[0] || m.col_leaf_sizes() != leaves[1] {
        return Err(Error::Format("header does not match the node stream".into()));
    }
    Ok(m)
}

pub(crate) fn write_node<W: Write>(m: &HodlrMatrix, w: &mut W) -> Result<()> {
    match m {
        HodlrMatrix::Dense(d) => {
            w.write_all(&[0])?;
            put_u64(w, d.nrows() as u64)?;
            put_u64(w, d.ncols() as u64)?;
            put_f64s(w, d.as_slice())
        }
        HodlrMatrix::Split(b) => {
            w.write_all(&[1])?;
            write_block(&b.a12, w)?;
            write_block(&b.a21, w)?;
            write_node(&b.a11, w)?;
            write_node(&b.a22, w)
        }
    }
}

pub(crate) fn read_node<R: Read>(r: &mut R) -> Result<HodlrMatrix> {
    let mut tag = [0u8; 1];
    r.read_exact(&mut tag)?;
    match tag[0] {
        0 => {
            let rows = get_u64(r)?;
            let cols = get_u64(r)?;
            Ok(HodlrMatrix::Dense(get_matrix(r, rows, cols)?))
        }
        1 => {
            let a12 = read_block(r)?;
            let a21 = read_block(r)?;
            let a11 = read_node(r)?;
            let a22 = read_node(r)?;
            if a12.nrows() != a11.nrows() || a12.ncols() != a22.ncols() || a21.nrows() != a22.nrows() || a21.ncols() != a11.ncols() {
                return Err(Error::Format("inconsistent block sizes in node stream".into()));
            }
            Ok(HodlrMatrix::split(a11, a12, a21, a22))
        }
        t => Err(Error::Format(format!("unknown node tag {t}"))),
    }
}

fn write_block<W: Write>(b: &LowRank, w: &mut W) -> Result<()> {
    put_u64(w, b.nrows() as u64)?;
    put_u64(w, b.ncols() as u64)?;
    put_u64(w, b.rank() as u64)?;
    put_f64s(w, b.u.as_slice())?;
    put_f64s(w, b.v.as_slice())
}

fn read_block<R: Read>(r: &mut R) -> Result<LowRank> {
    let rows = get_u64(r)?;
    let cols = get_u64(r)?;
    let rank = get_u64(r)?;
    let u = get_matrix(r, rows, rank)?;
    let v = get_matrix(r, cols, rank)?;
    Ok(LowRank::new(u, v))
}

pub(crate) fn put_u32<W: Write>(w: &mut W, x: u32) -> Result<()> {
    w.write_all(&x.to_le_bytes())?;
    Ok(())
}

pub(crate) fn put_u64<W: Write>(w: &mut W, x: u64) -> Result<()> {
    w.write_all(&x.to_le_bytes())?;
    Ok(())
}

pub(crate) fn put_f64s<W: Write>(w: &mut W, xs: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(xs.len() * 8);
    for x in xs {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub(crate) fn get_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn get_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn get_f64s<R: Read>(r: &mut R, count: u64) -> Result<Vec<f64>> {
    if count > MAX_ENTRIES {
        return Err(Error::Format("block size out of range".into()));
    }
    let mut buf = vec![0u8; count as usize * 8];
    r.read_exact(&mut buf)?;
    Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect())
}

fn get_matrix<R: Read>(r: &mut R, rows: u64, cols: u64) -> Result<DMatrix<f64>> {
    let count = rows.checked_mul(cols).ok_or_else(|| Error::Format("block size overflows".into()))?;
    let data = get_f64s(r, count)?;
    Ok(DMatrix::from_vec(rows as usize, cols as usize, data))
}
