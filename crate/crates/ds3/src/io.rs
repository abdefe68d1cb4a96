//! Reading and writing dissimilarity matrices.
//!
//! Two formats:
//!
//! * **CSV** — comma-separated reals, one matrix row per line. The cell
//!   `nan` (any case) marks an unobserved entry.
//! * **Binary** — magic `DS3M`, version `u32 = 1`, rows and cols as `u64`,
//!   then rows·cols little-endian `f64` values row-major, then a `u8` flag
//!   (1 = an observation mask of rows·cols bytes follows, 0 = fully
//!   observed). Bit-exact across a save/load round trip.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, DissimilarityMatrix};

const MAGIC: [u8; 4] = *b"DS3M";
const VERSION: u32 = 1;

/// On-disk representation of a matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Binary,
}

/// Loads a dissimilarity matrix from `path` in the given format.
pub fn load_matrix(path: &Path, format: MatrixFormat) -> Result<DissimilarityMatrix> {
    match format {
        MatrixFormat::Csv => load_csv(path),
        MatrixFormat::Binary => load_binary(path),
    }
}

/// Writes `d` to `path` in the given format. Values and mask round-trip
/// through [`load_matrix`]; the scale factor is not persisted.
pub fn save_matrix(path: &Path, d: &DissimilarityMatrix, format: MatrixFormat) -> Result<()> {
    match format {
        MatrixFormat::Csv => save_csv(path, d),
        MatrixFormat::Binary => save_binary(path, d),
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, detail: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        detail: detail.into(),
    }
}

fn format_err(path: &Path, detail: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        detail: detail.into(),
    }
}

fn load_csv(path: &Path) -> Result<DissimilarityMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut values: Vec<f64> = Vec::new();
    let mut mask: Vec<bool> = Vec::new();
    let mut ncols = 0usize;
    let mut nrows = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() && lineno + 1 == text.lines().count() {
            break; // tolerate a trailing newline
        }
        let lineno1 = lineno + 1;
        let cells: Vec<&str> = line.split(',').collect();
        if nrows == 0 {
            ncols = cells.len();
        } else if cells.len() != ncols {
            return Err(parse_err(
                path,
                lineno1,
                format!("row has {} cells, expected {}", cells.len(), ncols),
            ));
        }
        for (colno, cell) in cells.iter().enumerate() {
            let cell = cell.trim();
            if cell.is_empty() {
                return Err(parse_err(
                    path,
                    lineno1,
                    format!("empty cell at column {}", colno + 1),
                ));
            }
            if cell.eq_ignore_ascii_case("nan") {
                values.push(0.0);
                mask.push(false);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| {
                parse_err(
                    path,
                    lineno1,
                    format!("cannot parse {cell:?} at column {} as a real number", colno + 1),
                )
            })?;
            if !v.is_finite() {
                return Err(parse_err(
                    path,
                    lineno1,
                    format!("non-finite value {cell:?} at column {}", colno + 1),
                ));
            }
            values.push(v);
            mask.push(true);
        }
        nrows += 1;
    }
    if nrows == 0 || ncols == 0 {
        return Err(format_err(path, "empty matrix file"));
    }
    let dense = DenseMatrix::from_vec(nrows, ncols, values)?;
    if mask.iter().all(|&o| o) {
        Ok(DissimilarityMatrix::new(dense))
    } else {
        DissimilarityMatrix::with_mask(dense, mask)
    }
}

fn save_csv(path: &Path, d: &DissimilarityMatrix) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let mut line = String::new();
    for i in 0..d.rows() {
        line.clear();
        for j in 0..d.cols() {
            if j > 0 {
                line.push(',');
            }
            if d.is_observed(i, j) {
                // `{}` prints the shortest decimal that parses back to the
                // same f64, so the round trip is value-exact.
                line.push_str(&format!("{}", d.value(i, j)));
            } else {
                line.push_str("nan");
            }
        }
        line.push('\n');
        w.write_all(line.as_bytes()).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn load_binary(path: &Path) -> Result<DissimilarityMatrix> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 4];
    read_exact(path, &mut r, &mut magic)?;
    if magic != MAGIC {
        return Err(format_err(path, format!("bad magic bytes {magic:?}")));
    }
    let version = u32::from_le_bytes(read_array(path, &mut r)?);
    if version != VERSION {
        return Err(format_err(
            path,
            format!("unsupported format version {version}, expected {VERSION}"),
        ));
    }
    let rows = u64::from_le_bytes(read_array(path, &mut r)?);
    let cols = u64::from_le_bytes(read_array(path, &mut r)?);
    let (rows, cols): (usize, usize) = match (rows.try_into(), cols.try_into()) {
        (Ok(r), Ok(c)) => (r, c),
        _ => return Err(format_err(path, format!("dimensions {rows}x{cols} overflow"))),
    };
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| format_err(path, format!("dimensions {rows}x{cols} overflow")))?;
    if rows == 0 || cols == 0 {
        return Err(format_err(path, "matrix dimensions must be at least 1x1"));
    }

    let mut values = Vec::with_capacity(len);
    for _ in 0..len {
        values.push(f64::from_le_bytes(read_array(path, &mut r)?));
    }
    let flag = u8::from_le_bytes(read_array(path, &mut r)?);
    let mask = match flag {
        0 => None,
        1 => {
            let mut bytes = vec![0u8; len];
            read_exact(path, &mut r, &mut bytes)?;
            let mut mask = Vec::with_capacity(len);
            for (idx, b) in bytes.iter().enumerate() {
                match b {
                    0 => mask.push(false),
                    1 => mask.push(true),
                    other => {
                        return Err(format_err(
                            path,
                            format!("invalid mask byte {other} at offset {idx}"),
                        ))
                    }
                }
            }
            Some(mask)
        }
        other => return Err(format_err(path, format!("invalid mask flag byte {other}"))),
    };
    let mut trailing = [0u8; 1];
    match r.read(&mut trailing) {
        Ok(0) => {}
        Ok(_) => return Err(format_err(path, "trailing data after matrix payload")),
        Err(e) => return Err(io_err(path, e)),
    }

    let dense = DenseMatrix::from_vec(rows, cols, values)?;
    match mask {
        Some(m) => DissimilarityMatrix::with_mask(dense, m),
        None => Ok(DissimilarityMatrix::new(dense)),
    }
}

fn save_binary(path: &Path, d: &DissimilarityMatrix) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let put = |w: &mut BufWriter<File>, bytes: &[u8]| w.write_all(bytes).map_err(|e| io_err(path, e));

    put(&mut w, &MAGIC)?;
    put(&mut w, &VERSION.to_le_bytes())?;
    put(&mut w, &(d.rows() as u64).to_le_bytes())?;
    put(&mut w, &(d.cols() as u64).to_le_bytes())?;
    for &v in d.values().as_slice() {
        put(&mut w, &v.to_le_bytes())?;
    }
    match d.mask() {
        None => put(&mut w, &[0u8])?,
        Some(mask) => {
            put(&mut w, &[1u8])?;
            for &observed in mask {
                put(&mut w, &[u8::from(observed)])?;
            }
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn read_exact<R: Read>(path: &Path, r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            format_err(path, "file truncated")
        } else {
            io_err(path, e)
        }
    })
}

fn read_array<R: Read, const N: usize>(path: &Path, r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    read_exact(path, r, &mut buf)?;
    Ok(buf)
}
