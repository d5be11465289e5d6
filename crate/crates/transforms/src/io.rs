use std::io::{Read, Write};

use nalgebra::DMatrix;

use acoustic_core::io::read_csv;

use crate::embed::EmbeddingResult;
use crate::error::{invalid, Result};

/// Headerless numeric CSV, one row per sample.
pub fn read_matrix<R: Read>(r: R) -> Result<DMatrix<f64>> {
    let t = read_csv(r)?;
    let (rows, cols) = (t.rows(), t.cols());
    Ok(DMatrix::from_row_slice(rows, cols, t.data()))
}

/// Scatter table with header `id,y1,..,yL` and one row per point.
pub fn write_scatter<W: Write>(mut w: W, e: &EmbeddingResult) -> Result<()> {
    let io = |err: std::io::Error| invalid("scatter", err.to_string());
    let header: Vec<String> = std::iter::once("id".to_string())
        .chain((1..=e.dims()).map(|i| format!("y{i}")))
        .collect();
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for n in 0..e.points() {
        let mut line = n.to_string();
        for v in e.coords.column(n).iter() {
            line.push_str(&format!(",{v}"));
        }
        writeln!(w, "{line}").map_err(io)?;
    }
    Ok(())
}
