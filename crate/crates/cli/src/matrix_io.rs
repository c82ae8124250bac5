//! Dense complex matrices as CSV: one line per row, columns
//! `c0_re,c0_im,c1_re,c1_im,...`, values in shortest round-trip scientific
//! notation.

use std::path::Path;

use riccati_core::{Complex, MatF64};

use crate::error::{CliError, CliResult};

pub fn csv_writer<W: std::io::Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

/// Round-trip formatting used by every CSV the tool writes.
pub fn fmt_num(x: f64) -> String {
    format!("{x:e}")
}

pub fn matrix_to_csv(m: &MatF64) -> String {
    let mut w = csv_writer(Vec::new());
    let header: Vec<String> = (0..m.ncols())
        .flat_map(|j| [format!("c{j}_re"), format!("c{j}_im")])
        .collect();
    // Writing into a Vec cannot fail.
    w.write_record(&header).expect("in-memory csv");
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .flat_map(|j| [fmt_num(m[(i, j)].re), fmt_num(m[(i, j)].im)])
            .collect();
        w.write_record(&row).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("ascii output")
}

pub fn write_matrix(path: &Path, m: &MatF64) -> CliResult<()> {
    std::fs::write(path, matrix_to_csv(m)).map_err(|e| CliError::io(path, e))
}

pub fn matrix_from_csv(text: &str, path: &Path) -> CliResult<MatF64> {
    let bad = |message: String| CliError::Csv {
        path: path.to_path_buf(),
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let width = rdr.headers().map_err(|e| bad(e.to_string()))?.len();
    if width == 0 || width % 2 != 0 {
        return Err(bad(format!(
            "header must hold re/im column pairs, found {width} columns"
        )));
    }
    let cols = width / 2;
    let mut data = Vec::new();
    let mut rows = 0;
    for record in rdr.records() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let values = record
            .iter()
            .map(|f| match f.trim().parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(bad(format!("line {}: not a finite number: {f:?}", rows + 2))),
            })
            .collect::<CliResult<Vec<f64>>>()?;
        data.extend(values.chunks(2).map(|p| Complex::new(p[0], p[1])));
        rows += 1;
    }
    if rows == 0 {
        return Err(bad("matrix has no rows".into()));
    }
    Ok(MatF64::from_row_slice(rows, cols, &data))
}

pub fn read_matrix(path: &Path) -> CliResult<MatF64> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    matrix_from_csv(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let m = MatF64::from_row_slice(
            2,
            2,
            &[
                Complex::new(0.1, -1.0 / 3.0),
                Complex::new(1e-300, 0.0),
                Complex::new(-2.5e7, 7.0),
                Complex::new(std::f64::consts::PI, -0.0),
            ],
        );
        let text = matrix_to_csv(&m);
        assert!(text.starts_with("c0_re,c0_im,c1_re,c1_im\n"));
        assert!(!text.contains('\r'));
        let back = matrix_from_csv(&text, Path::new("m.csv")).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_ragged_and_odd() {
        assert!(matrix_from_csv("a,b,c\n1,2,3\n", Path::new("x")).is_err());
        assert!(matrix_from_csv("c0_re,c0_im\n1,2\n3\n", Path::new("x")).is_err());
        assert!(matrix_from_csv("c0_re,c0_im\n1,nan\n", Path::new("x")).is_err());
        assert!(matrix_from_csv("c0_re,c0_im\n", Path::new("x")).is_err());
    }
}
