//! Plain file formats: column CSV with a header row and the binary field block.
//!
//! Floats are written with the shortest representation that round-trips exactly.

use std::io::{Read, Write};

use crate::error::{Result, VortexError};
use crate::scalar::Real;

pub fn write_columns<T: Real, W: Write>(w: W, header: &[&str], cols: &[&Vec<T>]) -> Result<()> {
    let n = cols.first().map_or(0, |c| c.len());
    if cols.iter().any(|c| c.len() != n) || cols.len() != header.len() {
        return Err(VortexError::Format("column lengths disagree".into()));
    }
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(header)?;
    for i in 0..n {
        wr.write_record(cols.iter().map(|c| fmt_f64(c[i].f64())))?;
    }
    wr.flush()?;
    Ok(())
}

/// Row-oriented variant for heterogeneous records (e.g. `x,y,k`).
pub fn write_rows<W: Write>(w: W, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(header)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(VortexError::Format("row width differs from header".into()));
        }
        wr.write_record(row.iter().map(|&v| fmt_f64(v)))?;
    }
    wr.flush()?;
    Ok(())
}

/// Reads a headed numeric CSV into (header, columns).
pub fn read_columns<R: Read>(r: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rd = csv::Reader::from_reader(r);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_owned).collect();
    let mut cols = vec![Vec::new(); header.len()];
    for rec in rd.records() {
        let rec = rec?;
        for (c, field) in cols.iter_mut().zip(rec.iter()) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| VortexError::Format(format!("not a number: {field:?}")))?;
            c.push(v);
        }
    }
    Ok((header, cols))
}

/// Integers print without a fractional part; everything else round-trips.
pub fn fmt_f64(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:?}")
    }
}

/// Binary field block: `n` and `extent` as little-endian f64, then `n·n` row-major f64 values.
pub fn write_block<W: Write>(mut w: W, n: usize, extent: f64, values: &[f64]) -> Result<()> {
    if values.len() != n * n {
        return Err(VortexError::Format(format!("block expects {} values, got {}", n * n, values.len())));
    }
    w.write_all(&(n as f64).to_le_bytes())?;
    w.write_all(&extent.to_le_bytes())?;
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Reads one block; returns `None` at a clean end of stream.
pub fn read_block<R: Read>(mut r: R) -> Result<Option<(usize, f64, Vec<f64>)>> {
    let mut buf = [0u8; 8];
    match r.read_exact(&mut buf) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let nf = f64::from_le_bytes(buf);
    if !(nf >= 1.0) || nf.fract() != 0.0 || nf > 1e5 {
        return Err(VortexError::Format(format!("bad block size {nf}")));
    }
    let n = nf as usize;
    r.read_exact(&mut buf)?;
    let extent = f64::from_le_bytes(buf);
    let mut values = Vec::with_capacity(n * n);
    for _ in 0..n * n {
        r.read_exact(&mut buf)?;
        values.push(f64::from_le_bytes(buf));
    }
    Ok(Some((n, extent, values)))
}
