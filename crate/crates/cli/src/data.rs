//! Numeric CSV input and output.

use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{CliError, Result};

/// A rectangular numeric table.
#[derive(Debug, Clone)]
pub struct Table {
    /// Column names; `v0, v1, ...` when the file has no header.
    pub names: Vec<String>,
    pub had_header: bool,
    pub data: DMatrix<f64>,
}

fn parse_cell(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|x| x.is_finite())
}

/// Read a comma-separated table. The first row is a header when any of its
/// cells is not a number.
pub fn read_csv(path: &Path) -> Result<Table> {
    let file = std::fs::File::open(path).map_err(CliError::io(path))?;
    read_csv_from(file, path)
}

pub fn read_csv_from(input: impl std::io::Read, path: &Path) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut names: Option<Vec<String>> = None;
    let mut had_header = false;
    let mut width = 0;
    let mut values = Vec::new();
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Csv { path: path.into(), message: e.to_string() })?;
        let line = record.position().map_or(0, |p| p.line());
        if names.is_none() {
            width = record.len();
            if record.iter().any(|c| parse_cell(c).is_none()) {
                names = Some(record.iter().map(str::to_string).collect());
                had_header = true;
                continue;
            }
            names = Some((0..width).map(|j| format!("v{j}")).collect());
        }
        if record.len() != width {
            return Err(CliError::RaggedRow { path: path.into(), line, expected: width, found: record.len() });
        }
        for (j, cell) in record.iter().enumerate() {
            let x = parse_cell(cell).ok_or_else(|| CliError::NonNumeric {
                path: path.into(),
                line,
                column: j + 1,
                name: names.as_ref().unwrap()[j].clone(),
                value: cell.to_string(),
            })?;
            values.push(x);
        }
        rows += 1;
    }
    let names = names.ok_or_else(|| CliError::Csv { path: path.into(), message: "file is empty".into() })?;
    Ok(Table { names, had_header, data: DMatrix::from_row_slice(rows, width, &values) })
}

/// Scale each column to mean 0 and unit sample variance.
pub fn standardize(table: &mut Table) -> Result<()> {
    let n = table.data.nrows();
    if n < 2 {
        return Err(CliError::Core(gar_core::GarError::DimensionMismatch(format!("need at least 2 rows, got {n}"))));
    }
    for (j, mut col) in table.data.column_iter_mut().enumerate() {
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let sd = var.sqrt();
        // rounding in the mean leaves ~1e-16 relative spread in a constant column
        if !(sd > 1e-12 * mean.abs().max(1.0)) {
            return Err(CliError::ZeroVariance(table.names[j].clone()));
        }
        col.apply(|x| *x = (*x - mean) / sd);
    }
    Ok(())
}

/// Write rows of `data` under the header `v0, ..., v{p-1}`.
pub fn write_csv(path: &Path, data: &DMatrix<f64>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| CliError::Csv { path: path.into(), message: e.to_string() })?;
    let wrap = |e: csv::Error| CliError::Csv { path: path.into(), message: e.to_string() };
    writer.write_record((0..data.ncols()).map(|j| format!("v{j}"))).map_err(wrap)?;
    for row in data.row_iter() {
        writer.write_record(row.iter().map(f64::to_string)).map_err(wrap)?;
    }
    writer.flush().map_err(CliError::io(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str) -> Result<Table> {
        read_csv_from(text.as_bytes(), Path::new("t.csv"))
    }

    #[test]
    fn header_is_detected() {
        let t = read("a,b\n1,2\n3,4\n").unwrap();
        assert!(t.had_header);
        assert_eq!(t.names, ["a", "b"]);
        assert_eq!(t.data, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        let t = read("1,2\n3,4\n").unwrap();
        assert!(!t.had_header);
        assert_eq!(t.names, ["v0", "v1"]);
        assert_eq!(t.data.nrows(), 2);
    }

    #[test]
    fn constant_float_column_has_zero_variance() {
        let mut t = read("x,y\n0.1,1\n0.1,2\n0.1,4\n").unwrap();
        assert!(matches!(standardize(&mut t), Err(CliError::ZeroVariance(c)) if c == "x"));
    }
}
