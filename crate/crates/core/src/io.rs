//! Tensor files.
//!
//! TNSR v1 is plain text: the order `N` on the first line, the `N` extents
//! on the second, then every value in first-index-fastest order separated
//! by whitespace. Values are written in shortest round-trip scientific
//! notation, so save/load is lossless. CSV input is a flat list of values
//! (any mix of commas and newlines, optional header) whose shape is given
//! separately.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::tensor::DenseTensor;

pub fn write_tnsr<W: Write>(mut w: W, t: &DenseTensor<f64>) -> Result<()> {
    writeln!(w, "{}", t.order())?;
    let dims: Vec<String> = t.dims().iter().map(usize::to_string).collect();
    writeln!(w, "{}", dims.join(" "))?;
    for v in t.data() {
        writeln!(w, "{v:e}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_tnsr(path: &Path, t: &DenseTensor<f64>) -> Result<()> {
    write_tnsr(BufWriter::new(File::create(path)?), t)
}

/// Stores a matrix as an order-2 tensor.
pub fn save_matrix(path: &Path, m: &Matrix<f64>) -> Result<()> {
    save_tnsr(path, &DenseTensor::from_matrix(m))
}

fn parse_num<V: std::str::FromStr>(tok: &str, what: &str) -> Result<V> {
    tok.parse()
        .map_err(|_| Error::Parse(format!("bad {what} {tok:?}")))
}

pub fn read_tnsr<R: Read>(r: R) -> Result<DenseTensor<f64>> {
    let mut lines = BufReader::new(r).lines();
    let mut next_line = |what: &str| -> Result<String> {
        loop {
            match lines.next() {
                Some(line) => {
                    let line = line?;
                    if !line.trim().is_empty() {
                        return Ok(line);
                    }
                }
                None => return Err(Error::Parse(format!("missing {what} line"))),
            }
        }
    };
    let order: usize = parse_num(next_line("order")?.trim(), "order")?;
    let dims: Vec<usize> = next_line("extents")?
        .split_whitespace()
        .map(|s| parse_num(s, "extent"))
        .collect::<Result<_>>()?;
    if order == 0 || dims.len() != order {
        return Err(Error::Parse(format!("order {order} with {} extents", dims.len())));
    }
    let mut data = Vec::with_capacity(dims.iter().product());
    for line in lines {
        for tok in line?.split_whitespace() {
            data.push(parse_num::<f64>(tok, "value")?);
        }
    }
    DenseTensor::new(dims, data)
}

pub fn load_tnsr(path: &Path) -> Result<DenseTensor<f64>> {
    read_tnsr(File::open(path)?)
}

/// Reads a flat CSV of values and reshapes it to `dims`. A first row that
/// does not parse as numbers is treated as a header.
pub fn read_values_csv<R: Read>(r: R, dims: &[usize]) -> Result<DenseTensor<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(r);
    let mut data = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        let row: std::result::Result<Vec<f64>, _> =
            record.iter().filter(|s| !s.is_empty()).map(str::parse::<f64>).collect();
        match row {
            Ok(values) => data.extend(values),
            Err(_) if i == 0 => continue,
            Err(e) => return Err(Error::Parse(format!("row {}: {e}", i + 1))),
        }
    }
    DenseTensor::new(dims.to_vec(), data)
}

/// Loads TNSR by default, or CSV when the file name ends in `.csv`
/// (which then requires `dims`).
pub fn load_tensor(path: &Path, dims: Option<&[usize]>) -> Result<DenseTensor<f64>> {
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        let dims = dims.ok_or_else(|| Error::Parse("CSV input needs explicit dims".into()))?;
        read_values_csv(File::open(path)?, dims)
    } else {
        let t = load_tnsr(path)?;
        if let Some(d) = dims {
            if d != t.dims() {
                return Err(Error::DimensionMismatch(format!(
                    "file has dims {:?}, expected {d:?}",
                    t.dims()
                )));
            }
        }
        Ok(t)
    }
}
