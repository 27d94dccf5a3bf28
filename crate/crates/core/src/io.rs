//! Record files: CSV with header `wavelength_nm,counts_port1,counts_port2`.
//!
//! Values are written with 17 significant digits so a write/read cycle is
//! lossless.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::spectrum::{MeasurementRecord, Spectrum};

pub const RECORD_HEADER: [&str; 3] = ["wavelength_nm", "counts_port1", "counts_port2"];

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Scientific notation with 17 significant digits.
pub fn format_value(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_record<W: Write>(record: &MeasurementRecord, out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_HEADER)?;
    let (q1, q2) = (record.port1().weights(), record.port2().weights());
    for (k, l) in record.grid_nm().iter().enumerate() {
        w.write_record([format_value(*l), format_value(q1[k]), format_value(q2[k])])?;
    }
    w.flush()
}

pub fn write_record_file(record: &MeasurementRecord, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| io_error(path, e))?;
    write_record(record, std::io::BufWriter::new(file)).map_err(|e| io_error(path, e))
}

/// Parses a record. `name` labels errors; line numbers count the header as 1.
pub fn read_record<R: Read>(input: R, name: &str) -> Result<MeasurementRecord> {
    let fail = |line: usize, message: String| Error::Format {
        path: name.to_string(),
        line,
        message,
    };
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = r.headers().map_err(|e| fail(1, e.to_string()))?;
    if header.iter().ne(RECORD_HEADER) {
        return Err(fail(
            1,
            format!("expected header '{}', found '{}'", RECORD_HEADER.join(","), header.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let (mut grid, mut q1, mut q2) = (Vec::new(), Vec::new(), Vec::new());
    for (k, row) in r.records().enumerate() {
        let line = k + 2;
        let row = row.map_err(|e| fail(line, e.to_string()))?;
        if row.len() != 3 {
            return Err(fail(line, format!("expected 3 fields, found {}", row.len())));
        }
        let mut vals = [0.0; 3];
        for (i, v) in vals.iter_mut().enumerate() {
            let field = &row[i];
            *v = field
                .parse::<f64>()
                .map_err(|_| fail(line, format!("{}: '{field}' is not a number", RECORD_HEADER[i])))?;
            if !v.is_finite() {
                return Err(fail(line, format!("{}: value is not finite", RECORD_HEADER[i])));
            }
        }
        let [l, c1, c2] = vals;
        if !(l > 0.0) {
            return Err(fail(line, format!("wavelength {l} nm is not positive")));
        }
        if c1 < 0.0 || c2 < 0.0 {
            return Err(fail(line, "counts must be nonnegative".into()));
        }
        if let Some(&prev) = grid.last() {
            if l == prev {
                return Err(fail(line, format!("duplicate wavelength {l} nm")));
            }
            if l < prev {
                return Err(fail(line, format!("wavelength {l} nm is below the previous row")));
            }
        }
        grid.push(l);
        q1.push(c1);
        q2.push(c2);
    }
    if grid.len() < 2 {
        return Err(fail(grid.len() + 1, "a record needs at least 2 rows".into()));
    }
    let record = MeasurementRecord::new(Spectrum::new(grid.clone(), q1)?, Spectrum::new(grid, q2)?)?;
    if !(record.total() > 0.0) {
        return Err(fail(1, "all counts are zero".into()));
    }
    Ok(record)
}

pub fn read_record_file(path: &Path) -> Result<MeasurementRecord> {
    let file = File::open(path).map_err(|e| io_error(path, e))?;
    read_record(std::io::BufReader::new(file), &path.display().to_string())
}
