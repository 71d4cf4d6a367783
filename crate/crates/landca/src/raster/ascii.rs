//! ASCII grid reader and writer.
//!
//! The on-disk format is six header lines
//!
//! ```text
//! ncols <int>
//! nrows <int>
//! xllcorner <real>
//! yllcorner <real>
//! cellsize <real>
//! NODATA_value <real>
//! ```
//!
//! followed by `nrows` lines of `ncols` whitespace-separated values, top row
//! first. Header keys are matched case-insensitively but must appear in this
//! order. The writer emits exactly this layout; the reader tolerates
//! arbitrary whitespace in the body. Categorical grids round-trip
//! bit-for-bit; continuous grids round-trip within the writer's significant
//! digits (6 by default).

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::{CategoricalRaster, ClassId, ContinuousRaster, GridHeader};

const HEADER_KEYS: [&str; 6] = [
    "ncols",
    "nrows",
    "xllcorner",
    "yllcorner",
    "cellsize",
    "nodata_value",
];

struct Token<'a> {
    text: &'a str,
    line: usize,
}

/// Header plus the body tokens with their 1-based line numbers.
fn parse_file(path: &Path, content: &str) -> Result<(GridHeader, Vec<(f64, usize)>)> {
    let mut lines = content.lines().enumerate();

    let mut header_values = [0.0f64; 6];
    for (key_idx, expected) in HEADER_KEYS.iter().enumerate() {
        let (line_idx, line) = lines
            .next()
            .ok_or_else(|| Error::grid(path, key_idx + 1, "missing header line"))?;
        let lineno = line_idx + 1;
        let mut parts = line.split_whitespace();
        let key = parts
            .next()
            .ok_or_else(|| Error::grid(path, lineno, format!("expected `{expected}` header")))?;
        if !key.eq_ignore_ascii_case(expected) {
            return Err(Error::grid(
                path,
                lineno,
                format!("expected `{expected}` header, found `{key}`"),
            ));
        }
        let value = parts
            .next()
            .ok_or_else(|| Error::grid(path, lineno, format!("`{expected}` has no value")))?;
        if parts.next().is_some() {
            return Err(Error::grid(
                path,
                lineno,
                format!("unexpected trailing content after `{expected}`"),
            ));
        }
        header_values[key_idx] = value.parse::<f64>().map_err(|_| {
            Error::grid(path, lineno, format!("cannot parse `{value}` as a number"))
        })?;
    }

    let parse_dim = |v: f64, name: &str, line: usize| -> Result<usize> {
        if v.fract() == 0.0 && v >= 1.0 && v <= u32::MAX as f64 {
            Ok(v as usize)
        } else {
            Err(Error::grid(
                path,
                line,
                format!("{name} must be a positive integer, got {v}"),
            ))
        }
    };
    let header = GridHeader {
        ncols: parse_dim(header_values[0], "ncols", 1)?,
        nrows: parse_dim(header_values[1], "nrows", 2)?,
        xllcorner: header_values[2],
        yllcorner: header_values[3],
        cellsize: header_values[4],
        nodata: header_values[5],
    };
    if !(header.cellsize > 0.0) || !header.cellsize.is_finite() {
        return Err(Error::grid(
            path,
            5,
            format!("cellsize must be positive, got {}", header.cellsize),
        ));
    }

    let expected = header.cell_count();
    let mut tokens: Vec<(f64, usize)> = Vec::with_capacity(expected);
    let mut last_line = 6;
    for (line_idx, line) in lines {
        let lineno = line_idx + 1;
        for raw in line.split_whitespace() {
            let tok = Token {
                text: raw,
                line: lineno,
            };
            if tokens.len() == expected {
                return Err(Error::grid(
                    path,
                    tok.line,
                    format!("wrong cell count: more than {expected} values in body"),
                ));
            }
            let value = tok.text.parse::<f64>().map_err(|_| {
                Error::grid(
                    path,
                    tok.line,
                    format!("cannot parse `{}` as a number", tok.text),
                )
            })?;
            tokens.push((value, tok.line));
            last_line = lineno;
        }
    }
    if tokens.len() != expected {
        return Err(Error::grid(
            path,
            last_line,
            format!(
                "wrong cell count: expected {expected} values, found {}",
                tokens.len()
            ),
        ));
    }
    Ok((header, tokens))
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Load a class-id grid. Values equal to the header's NODATA become NODATA;
/// every other value must be integral (a `2.0` token is accepted, `2.5` is
/// rejected with its line number).
pub fn read_categorical_grid(path: impl AsRef<Path>) -> Result<CategoricalRaster> {
    let path = path.as_ref();
    let content = read_to_string(path)?;
    let (header, tokens) = parse_file(path, &content)?;
    let mut cells = Vec::with_capacity(tokens.len());
    for (value, line) in tokens {
        if value == header.nodata {
            cells.push(None);
        } else if value.fract() == 0.0 && value >= i32::MIN as f64 && value <= i32::MAX as f64 {
            cells.push(Some(ClassId(value as i32)));
        } else {
            return Err(Error::grid(
                path,
                line,
                format!("non-integer value {value} in categorical grid"),
            ));
        }
    }
    CategoricalRaster::new(header, cells)
}

/// Load a real-valued grid. Values equal to the header's NODATA become
/// NODATA; remaining values must be finite.
pub fn read_continuous_grid(path: impl AsRef<Path>) -> Result<ContinuousRaster> {
    let path = path.as_ref();
    let content = read_to_string(path)?;
    let (header, tokens) = parse_file(path, &content)?;
    let mut cells = Vec::with_capacity(tokens.len());
    for (value, line) in tokens {
        if value == header.nodata {
            cells.push(None);
        } else if value.is_finite() {
            cells.push(Some(value));
        } else {
            return Err(Error::grid(
                path,
                line,
                format!("non-finite value {value} in continuous grid"),
            ));
        }
    }
    ContinuousRaster::new(header, cells)
}

fn header_lines(header: &GridHeader) -> String {
    // `{}` on f64 is the shortest representation that parses back to the
    // same bits, so header geometry round-trips exactly.
    format!(
        "ncols {}\nnrows {}\nxllcorner {}\nyllcorner {}\ncellsize {}\nNODATA_value {}\n",
        header.ncols,
        header.nrows,
        header.xllcorner,
        header.yllcorner,
        header.cellsize,
        header.nodata
    )
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    file.write_all(body.as_bytes()).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Write a class-id grid. `read_categorical_grid` on the result reproduces
/// the raster exactly.
pub fn write_categorical_grid(raster: &CategoricalRaster, path: impl AsRef<Path>) -> Result<()> {
    let header = &raster.header;
    let mut out = header_lines(header);
    for row in 0..header.nrows {
        let mut line = String::new();
        for col in 0..header.ncols {
            if col > 0 {
                line.push(' ');
            }
            match raster.get(row, col) {
                Some(class) => line.push_str(&class.0.to_string()),
                None => line.push_str(&header.nodata.to_string()),
            }
        }
        line.push('\n');
        out.push_str(&line);
    }
    write_file(path.as_ref(), &out)
}

/// Format `value` to `digits` significant digits in plain decimal notation.
fn format_significant(value: f64, digits: usize) -> String {
    if value == 0.0 {
        return "0".to_string();
    }
    let magnitude = value.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - magnitude).clamp(0, 17) as usize;
    format!("{value:.decimals$}")
}

/// Write a real-valued grid at the default 6 significant digits.
pub fn write_continuous_grid(raster: &ContinuousRaster, path: impl AsRef<Path>) -> Result<()> {
    write_continuous_grid_with_precision(raster, path, 6)
}

/// Write a real-valued grid with an explicit number of significant digits.
pub fn write_continuous_grid_with_precision(
    raster: &ContinuousRaster,
    path: impl AsRef<Path>,
    significant_digits: usize,
) -> Result<()> {
    let header = &raster.header;
    let mut out = header_lines(header);
    for row in 0..header.nrows {
        let mut line = String::new();
        for col in 0..header.ncols {
            if col > 0 {
                line.push(' ');
            }
            match raster.get(row, col) {
                Some(v) => line.push_str(&format_significant(v, significant_digits)),
                None => line.push_str(&header.nodata.to_string()),
            }
        }
        line.push('\n');
        out.push_str(&line);
    }
    write_file(path.as_ref(), &out)
}
