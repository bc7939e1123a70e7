//! Matrix file formats: MatrixMarket dense array text and a raw
//! little-endian binary layout, with extension-based dispatch.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

const MM_BANNER: &str = "%%MatrixMarket";
const SKSP_MAGIC: &[u8; 4] = b"SKSP";

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

/// Writes `a` in MatrixMarket dense array format (`matrix array real
/// general`), which stores entries in column-major order. Values are printed
/// with shortest round-trip precision.
pub fn write_matrix_market<W: Write>(a: &DenseMatrix, w: &mut W) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{} {}", a.rows(), a.cols())?;
    for j in 0..a.cols() {
        for i in 0..a.rows() {
            writeln!(w, "{:e}", a.get(i, j))?;
        }
    }
    Ok(())
}

/// Reads a MatrixMarket dense array file. Only the `matrix array real
/// general` header is supported; coordinate format, non-real fields, and
/// symmetry annotations are rejected with the offending line number.
pub fn read_matrix_market<R: BufRead>(r: &mut R) -> Result<DenseMatrix> {
    let mut lines = r.lines();
    let header = match lines.next() {
        Some(line) => line.map_err(Error::from)?,
        None => return Err(parse_err(1, "empty file, expected a MatrixMarket header")),
    };
    let tokens: Vec<String> = header.split_whitespace().map(str::to_lowercase).collect();
    if tokens.len() != 5 || !tokens[0].eq_ignore_ascii_case(&MM_BANNER.to_lowercase()) {
        return Err(parse_err(
            1,
            format!("expected header '%%MatrixMarket matrix array real general', got '{header}'"),
        ));
    }
    for (got, want) in tokens[1..].iter().zip(["matrix", "array", "real", "general"]) {
        if got != want {
            return Err(parse_err(
                1,
                format!("unsupported MatrixMarket variant: '{got}' (only '{want}' is supported)"),
            ));
        }
    }

    let mut line_no = 1usize;
    let size_line = loop {
        let line = match lines.next() {
            Some(line) => line.map_err(Error::from)?,
            None => return Err(parse_err(line_no, "unexpected end of file before size line")),
        };
        line_no += 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        break trimmed.to_string();
    };
    let dims: Vec<&str> = size_line.split_whitespace().collect();
    if dims.len() != 2 {
        return Err(parse_err(
            line_no,
            format!("size line must contain 'rows cols', got '{size_line}'"),
        ));
    }
    let rows: usize = dims[0]
        .parse()
        .map_err(|_| parse_err(line_no, format!("invalid row count '{}'", dims[0])))?;
    let cols: usize = dims[1]
        .parse()
        .map_err(|_| parse_err(line_no, format!("invalid column count '{}'", dims[1])))?;
    if rows == 0 || cols == 0 {
        return Err(parse_err(line_no, format!("dimensions must be positive, got {rows}x{cols}")));
    }

    let mut entries = vec![0.0f64; rows * cols];
    let mut filled = 0usize;
    while filled < rows * cols {
        let line = match lines.next() {
            Some(line) => line.map_err(Error::from)?,
            None => {
                return Err(parse_err(
                    line_no + 1,
                    format!("unexpected end of file: found {filled} of {} entries", rows * cols),
                ))
            }
        };
        line_no += 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        for token in trimmed.split_whitespace() {
            if filled >= rows * cols {
                return Err(parse_err(line_no, "more entries than rows*cols"));
            }
            let value: f64 = token
                .parse()
                .map_err(|_| parse_err(line_no, format!("invalid real value '{token}'")))?;
            let i = filled % rows;
            let j = filled / rows;
            entries[i * cols + j] = value;
            filled += 1;
        }
    }
    for line in lines {
        let line = line.map_err(Error::from)?;
        line_no += 1;
        let trimmed = line.trim();
        if !trimmed.is_empty() && !trimmed.starts_with('%') {
            return Err(parse_err(line_no, "more entries than rows*cols"));
        }
    }
    DenseMatrix::from_vec(rows, cols, entries)
}

/// Writes `a` in the raw binary layout: magic `SKSP`, little-endian `u32`
/// row and column counts, then `rows*cols` little-endian `f64` values in
/// row-major order.
pub fn write_sksp<W: Write>(a: &DenseMatrix, w: &mut W) -> Result<()> {
    w.write_all(SKSP_MAGIC)?;
    let rows = u32::try_from(a.rows())
        .map_err(|_| Error::InvalidQuery(format!("row count {} exceeds u32", a.rows())))?;
    let cols = u32::try_from(a.cols())
        .map_err(|_| Error::InvalidQuery(format!("column count {} exceeds u32", a.cols())))?;
    w.write_all(&rows.to_le_bytes())?;
    w.write_all(&cols.to_le_bytes())?;
    for v in a.entries() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Reads the raw binary layout written by [`write_sksp`]. The payload must
/// contain exactly `rows*cols` values; short or oversized files are rejected.
pub fn read_sksp<R: Read>(r: &mut R) -> Result<DenseMatrix> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| parse_err(0, "file too short for the SKSP magic"))?;
    if &magic != SKSP_MAGIC {
        return Err(parse_err(0, format!("bad magic {magic:?}, expected \"SKSP\"")));
    }
    let mut dim = [0u8; 4];
    r.read_exact(&mut dim).map_err(|_| parse_err(0, "file too short for the row count"))?;
    let rows = u32::from_le_bytes(dim) as usize;
    r.read_exact(&mut dim).map_err(|_| parse_err(0, "file too short for the column count"))?;
    let cols = u32::from_le_bytes(dim) as usize;
    if rows == 0 || cols == 0 {
        return Err(parse_err(0, format!("dimensions must be positive, got {rows}x{cols}")));
    }
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| parse_err(0, "rows*cols overflows"))?;
    let mut entries = Vec::with_capacity(count);
    let mut buf = [0u8; 8];
    for idx in 0..count {
        r.read_exact(&mut buf).map_err(|_| {
            parse_err(0, format!("file too short: found {idx} of {count} values"))
        })?;
        entries.push(f64::from_le_bytes(buf));
    }
    let mut probe = [0u8; 1];
    match r.read(&mut probe) {
        Ok(0) => {}
        Ok(_) => return Err(parse_err(0, "trailing bytes after the matrix payload")),
        Err(e) => return Err(Error::from(e)),
    }
    DenseMatrix::from_vec(rows, cols, entries)
}

/// File format selected by extension: `.mtx` / `.mm` for MatrixMarket text,
/// `.bin` / `.sksp` for the raw binary layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    MatrixMarket,
    Binary,
}

/// Picks the format for a path by its extension.
pub fn format_for_path(path: &Path) -> Result<MatrixFormat> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_lowercase)
        .unwrap_or_default();
    match ext.as_str() {
        "mtx" | "mm" => Ok(MatrixFormat::MatrixMarket),
        "bin" | "sksp" => Ok(MatrixFormat::Binary),
        _ => Err(Error::InvalidQuery(format!(
            "unsupported matrix file extension '{ext}' (use .mtx, .mm, .bin, or .sksp)"
        ))),
    }
}

/// Writes a matrix to a file, choosing the format from the extension.
pub fn write_matrix_file(path: &Path, a: &DenseMatrix) -> Result<()> {
    let format = format_for_path(path)?;
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    match format {
        MatrixFormat::MatrixMarket => write_matrix_market(a, &mut w)?,
        MatrixFormat::Binary => write_sksp(a, &mut w)?,
    }
    w.flush()?;
    Ok(())
}

/// Reads a matrix from a file, choosing the format from the extension.
pub fn read_matrix_file(path: &Path) -> Result<DenseMatrix> {
    let format = format_for_path(path)?;
    let file = File::open(path)?;
    let mut r = BufReader::new(file);
    match format {
        MatrixFormat::MatrixMarket => read_matrix_market(&mut r),
        MatrixFormat::Binary => read_sksp(&mut r),
    }
}
