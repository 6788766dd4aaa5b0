//! CSV and JSON writers. Floats are written with 17 significant digits so a
//! file reproduces every value bit-for-bit.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

/// `x` in scientific notation with 17 significant digits.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write a header line and rows of floats.
pub fn write_csv(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let line: Vec<String> = row.into_iter().map(format_f64).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()
}

/// Columns of equal length, one CSV row per index.
pub fn write_columns(path: &Path, columns: &[(&str, &[f64])]) -> io::Result<()> {
    let n = columns.first().map(|c| c.1.len()).unwrap_or(0);
    if columns.iter().any(|c| c.1.len() != n) {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            "ragged CSV columns",
        ));
    }
    let header: Vec<&str> = columns.iter().map(|c| c.0).collect();
    write_csv(
        path,
        &header,
        (0..n).map(|i| columns.iter().map(|c| c.1[i]).collect()),
    )
}

/// A row-major matrix without header.
pub fn write_matrix(path: &Path, data: &[f64], cols: usize) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for row in data.chunks(cols.max(1)) {
        let line: Vec<String> = row.iter().map(|&x| format_f64(x)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_roundtrip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, std::f64::consts::PI, 0.0] {
            let s = format_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(format_f64(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn columns_written() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        write_columns(&p, &[("x", &[1.0, 2.0]), ("y", &[3.0, 4.0])]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("x,y\n"));
        assert!(write_columns(&p, &[("x", &[1.0]), ("y", &[])]).is_err());
    }
}
