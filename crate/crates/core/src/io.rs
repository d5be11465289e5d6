//! Tensor persistence: 2-D CSV tables and a little-endian binary container.
//!
//! Binary layout: magic `b"ATNS"`, `u32` rank, `rank` x `u64` extents, then
//! the row-major `f64` payload. A parameter archive is magic `b"APAR"`,
//! `u32` count, then per entry a `u32` name length, UTF-8 name and one
//! tensor record.

use crate::error::{Result, TensorError};
use crate::params::ParamStore;
use crate::tensor::Tensor;
use std::io::{Read, Write};

const TENSOR_MAGIC: &[u8; 4] = b"ATNS";
const ARCHIVE_MAGIC: &[u8; 4] = b"APAR";

fn io_err(e: impl std::fmt::Display) -> TensorError {
    TensorError::Io(e.to_string())
}

pub fn write_tensor<W: Write>(w: &mut W, t: &Tensor) -> Result<()> {
    w.write_all(TENSOR_MAGIC).map_err(io_err)?;
    w.write_all(&(t.rank() as u32).to_le_bytes()).map_err(io_err)?;
    for &d in t.shape() {
        w.write_all(&(d as u64).to_le_bytes()).map_err(io_err)?;
    }
    for &v in t.data() {
        w.write_all(&v.to_le_bytes()).map_err(io_err)?;
    }
    Ok(())
}

fn read_exact<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(io_err)?;
    Ok(buf)
}

pub fn read_tensor<R: Read>(r: &mut R) -> Result<Tensor> {
    if &read_exact::<4, _>(r)? != TENSOR_MAGIC {
        return Err(io_err("bad tensor magic"));
    }
    let rank = u32::from_le_bytes(read_exact(r)?) as usize;
    if rank > 16 {
        return Err(io_err(format!("implausible rank {rank}")));
    }
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        shape.push(u64::from_le_bytes(read_exact(r)?) as usize);
    }
    let n: usize = shape.iter().product();
    let mut data = Vec::with_capacity(n);
    for _ in 0..n {
        data.push(f64::from_le_bytes(read_exact(r)?));
    }
    Tensor::new(shape, data)
}

pub fn write_params<W: Write>(w: &mut W, store: &ParamStore) -> Result<()> {
    w.write_all(ARCHIVE_MAGIC).map_err(io_err)?;
    w.write_all(&(store.len() as u32).to_le_bytes()).map_err(io_err)?;
    for (name, t) in store.names().iter().zip(store.tensors()) {
        w.write_all(&(name.len() as u32).to_le_bytes()).map_err(io_err)?;
        w.write_all(name.as_bytes()).map_err(io_err)?;
        write_tensor(w, t)?;
    }
    Ok(())
}

/// Load values into an existing store; names and shapes must match.
pub fn read_params_into<R: Read>(r: &mut R, store: &mut ParamStore) -> Result<()> {
    if &read_exact::<4, _>(r)? != ARCHIVE_MAGIC {
        return Err(io_err("bad archive magic"));
    }
    let count = u32::from_le_bytes(read_exact(r)?) as usize;
    if count != store.len() {
        return Err(io_err(format!("archive has {count} tensors, model {}", store.len())));
    }
    for i in 0..count {
        let len = u32::from_le_bytes(read_exact(r)?) as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name).map_err(io_err)?;
        let t = read_tensor(r)?;
        let slot = &mut store.tensors_mut()[i];
        if slot.shape() != t.shape() {
            return Err(TensorError::ShapeMismatch {
                op: "read_params",
                left: slot.shape().to_vec(),
                right: t.shape().to_vec(),
            });
        }
        *slot = t;
    }
    Ok(())
}

/// Write a 2-D tensor as headerless CSV (1-D tensors become one row).
pub fn write_csv<W: Write>(w: W, t: &Tensor) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let cols = if t.rank() <= 1 { t.len() } else { t.cols() };
    for row in t.data().chunks(cols) {
        out.write_record(row.iter().map(|v| format!("{v:?}")))
            .map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Parse a headerless numeric CSV into a `[rows, cols]` tensor. Errors name
/// the offending line and column.
pub fn read_csv<R: Read>(r: R) -> Result<Tensor> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(r);
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(io_err)?;
        if cols.is_some_and(|c| c != rec.len()) {
            return Err(io_err(format!("line {}: expected {} fields", line + 1, cols.unwrap())));
        }
        cols = Some(rec.len());
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| io_err(format!("line {}, column {}: not a number", line + 1, c + 1)))?;
            data.push(v);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| io_err("empty csv"))?;
    Tensor::new(vec![rows, cols], data)
}
