//! Plain-text file formats.
//!
//! * matrices: CSV, one row per line, decimal values, optional header line
//!   (`c0,c1,...`). Values are printed in shortest round-trip form, so a
//!   write/read cycle is bit-exact.
//! * masks: one `row,col` pair per line, 0-indexed, row-major order.
//! * labels: `row,label` header followed by one line per row.
//! * metadata: TOML key-value files.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mask::Mask;
use crate::matrix::DataMatrix;

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn flush_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

pub fn write_matrix_csv(path: &Path, m: &DataMatrix, header: bool) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(csv_err(path))?;
    if header {
        w.write_record((0..m.cols()).map(|j| format!("c{j}")))
            .map_err(csv_err(path))?;
    }
    for i in 0..m.rows() {
        w.write_record(m.row(i).iter().map(|v| v.to_string()))
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(flush_err(path))
}

/// Reads a matrix; the result is untagged (call `into_nonnegative` to validate).
pub fn read_matrix_csv(path: &Path, header: bool) -> Result<DataMatrix> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err(path))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record.map_err(csv_err(path))?;
        let row = record
            .iter()
            .map(|field| {
                field.parse::<f64>().map_err(|_| {
                    Error::Data(format!(
                        "{}: record {}: cannot parse {field:?} as a number",
                        path.display(),
                        line + 1
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Data(format!("{}: no data rows", path.display())));
    }
    DataMatrix::from_rows(&rows)
}

pub fn write_mask(path: &Path, mask: &Mask) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(csv_err(path))?;
    for &(r, c) in mask.coords() {
        w.write_record([r.to_string(), c.to_string()])
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(flush_err(path))
}

/// Reads a coordinate-list mask for a `rows × cols` matrix.
pub fn read_mask(path: &Path, rows: usize, cols: usize) -> Result<Mask> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err(path))?;
    let mut coords = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record.map_err(csv_err(path))?;
        let parse = |k: usize| -> Result<usize> {
            record
                .get(k)
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| Error::Data(format!("{}: bad mask line {}", path.display(), line + 1)))
        };
        if record.len() != 2 {
            return Err(Error::Data(format!(
                "{}: mask line {} must be \"row,col\"",
                path.display(),
                line + 1
            )));
        }
        coords.push((parse(0)?, parse(1)?));
    }
    Mask::new(rows, cols, coords)
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["row", "label"]).map_err(csv_err(path))?;
    for (i, l) in labels.iter().enumerate() {
        w.write_record([i.to_string(), l.to_string()])
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(flush_err(path))
}

pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err(path))?;
    let mut out = Vec::new();
    for record in r.records() {
        let record = record.map_err(csv_err(path))?;
        let label = record
            .get(1)
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| Error::Data(format!("{}: bad label record", path.display())))?;
        out.push(label);
    }
    Ok(out)
}

pub fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = toml::to_string(value).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::bernoulli_mask;
    use crate::matrix::uniform_random_matrix;
    use crate::seed::SeedSpec;
    use proptest::prelude::*;

    #[test]
    fn matrix_csv_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let m = uniform_random_matrix(13, 7, SeedSpec::new(1, 1)).unwrap();
        for header in [false, true] {
            let p = dir.path().join(format!("m{header}.csv"));
            write_matrix_csv(&p, &m, header).unwrap();
            let back = read_matrix_csv(&p, header).unwrap();
            assert_eq!(back.as_slice(), m.as_slice());
            assert_eq!(back.shape(), m.shape());
        }
    }

    #[test]
    fn unparseable_cell_is_a_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        fs::write(&p, "1,2\n3,x\n").unwrap();
        assert!(matches!(read_matrix_csv(&p, false), Err(Error::Data(_))));
    }

    #[test]
    fn mask_round_trip_preserves_density() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("mask.csv");
        let mask = bernoulli_mask(20, 16, 0.37, SeedSpec::new(4, 4)).unwrap();
        write_mask(&p, &mask).unwrap();
        let back = read_mask(&p, 20, 16).unwrap();
        assert_eq!(back, mask);
        assert_eq!(back.density(), mask.density());
        let bytes = fs::read(&p).unwrap();
        write_mask(&p, &back).unwrap();
        assert_eq!(fs::read(&p).unwrap(), bytes);
    }

    proptest! {
        #[test]
        fn arbitrary_finite_values_round_trip(values in proptest::collection::vec(-1e300f64..1e300, 1..40)) {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("v.csv");
            let m = DataMatrix::new(1, values.len(), values).unwrap();
            write_matrix_csv(&p, &m, false).unwrap();
            let back = read_matrix_csv(&p, false).unwrap();
            prop_assert_eq!(back.as_slice(), m.as_slice());
        }
    }
}
