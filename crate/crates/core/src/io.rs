//! Density files and convergence histories.
//!
//! Volumes use the legacy VTK structured-points text format with one scalar
//! per cell, x fastest. 2D fields can also be written as 8-bit graymaps where
//! full density is black.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{check_len, Error, Result};
use crate::grid::StructuredGrid;
use crate::optimizer::IterationRecord;

fn format_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Legacy VTK text. Values are printed in shortest round-trip form, so
/// reading the file back yields the same bits.
pub fn vtk_string(grid: &StructuredGrid, name: &str, values: &[f64]) -> Result<String> {
    check_len(grid.len(), values.len())?;
    let [nx, ny, nz] = grid.dims();
    let mut out = String::with_capacity(values.len() * 24 + 256);
    out.push_str("# vtk DataFile Version 3.0\n");
    out.push_str("topomill density\nASCII\nDATASET STRUCTURED_POINTS\n");
    let zpoints = if grid.dimension() == 2 { 1 } else { nz + 1 };
    out.push_str(&format!("DIMENSIONS {} {} {}\n", nx + 1, ny + 1, zpoints));
    out.push_str("ORIGIN 0 0 0\nSPACING 1 1 1\n");
    out.push_str(&format!("CELL_DATA {}\n", values.len()));
    out.push_str(&format!("SCALARS {name} double 1\nLOOKUP_TABLE default\n"));
    for row in values.chunks(nx) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    Ok(out)
}

pub fn write_vtk(path: &Path, grid: &StructuredGrid, name: &str, values: &[f64]) -> Result<()> {
    fs::write(path, vtk_string(grid, name, values)?)?;
    Ok(())
}

fn parse_vtk(path: &Path, text: &str) -> Result<(StructuredGrid, Vec<f64>)> {
    let mut lines = text.lines();
    let mut dims: Option<Vec<usize>> = None;
    let mut cells: Option<usize> = None;
    let mut saw_ascii = false;
    // header up to the lookup table line
    for line in lines.by_ref() {
        let mut words = line.split_whitespace();
        match words.next() {
            Some("ASCII") => saw_ascii = true,
            Some("BINARY") => return Err(format_error(path, "binary VTK is not supported")),
            Some("DATASET") if words.next() != Some("STRUCTURED_POINTS") => {
                return Err(format_error(path, "only STRUCTURED_POINTS datasets are supported"))
            }
            Some("DIMENSIONS") => {
                let d: std::result::Result<Vec<usize>, _> = words.map(str::parse).collect();
                dims = Some(d.map_err(|_| format_error(path, "bad DIMENSIONS line"))?);
            }
            Some("CELL_DATA") => {
                let n = words.next().and_then(|w| w.parse().ok());
                cells = Some(n.ok_or_else(|| format_error(path, "bad CELL_DATA line"))?);
            }
            Some("POINT_DATA") => return Err(format_error(path, "expected cell data")),
            Some("LOOKUP_TABLE") => break,
            _ => {}
        }
    }
    if !saw_ascii {
        return Err(format_error(path, "missing ASCII marker"));
    }
    let dims = dims.ok_or_else(|| format_error(path, "missing DIMENSIONS"))?;
    if dims.len() != 3 || dims[0] < 2 || dims[1] < 2 || dims[2] < 1 {
        return Err(format_error(path, "DIMENSIONS must give three point counts"));
    }
    let extents: Vec<usize> = if dims[2] == 1 {
        vec![dims[0] - 1, dims[1] - 1]
    } else {
        vec![dims[0] - 1, dims[1] - 1, dims[2] - 1]
    };
    let grid = StructuredGrid::new(&extents).map_err(|e| format_error(path, e.to_string()))?;
    let cells = cells.ok_or_else(|| format_error(path, "missing CELL_DATA"))?;
    if cells != grid.len() {
        return Err(format_error(path, format!("CELL_DATA {cells} does not match {} cells", grid.len())));
    }
    let values: std::result::Result<Vec<f64>, _> =
        lines.flat_map(str::split_whitespace).map(str::parse::<f64>).collect();
    let values = values.map_err(|e| format_error(path, format!("bad scalar: {e}")))?;
    if values.len() != cells {
        return Err(format_error(path, format!("expected {cells} scalars, found {}", values.len())));
    }
    Ok((grid, values))
}

/// 8-bit binary graymap of a 2D field, `255 (1 - rho)` per pixel with the
/// top image row at the largest `y`.
pub fn pgm_bytes(grid: &StructuredGrid, values: &[f64]) -> Result<Vec<u8>> {
    check_len(grid.len(), values.len())?;
    if grid.dimension() != 2 {
        return Err(Error::invalid("graymaps are only written for 2D grids"));
    }
    let [nx, ny, _] = grid.dims();
    let mut out = format!("P5\n{nx} {ny}\n255\n").into_bytes();
    for j in (0..ny).rev() {
        for i in 0..nx {
            let rho = values[grid.index(i, j, 0)].clamp(0.0, 1.0);
            out.push((255.0 * (1.0 - rho)).round() as u8);
        }
    }
    Ok(out)
}

pub fn write_pgm(path: &Path, grid: &StructuredGrid, values: &[f64]) -> Result<()> {
    fs::write(path, pgm_bytes(grid, values)?)?;
    Ok(())
}

fn parse_pgm(path: &Path, bytes: &[u8]) -> Result<(StructuredGrid, Vec<f64>)> {
    let binary = match bytes.get(..2) {
        Some(b"P5") => true,
        Some(b"P2") => false,
        _ => return Err(format_error(path, "not a graymap")),
    };
    // width, height and maxval, each followed by whitespace; comments allowed
    let mut header = Vec::with_capacity(3);
    let mut pos = 2;
    while header.len() < 3 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        let token = std::str::from_utf8(&bytes[start..pos]).unwrap_or("");
        header.push(token.parse::<usize>().map_err(|_| format_error(path, "bad graymap header"))?);
    }
    let (nx, ny, maxval) = (header[0], header[1], header[2]);
    if maxval == 0 || maxval > 255 {
        return Err(format_error(path, format!("unsupported maxval {maxval}")));
    }
    let grid = StructuredGrid::new(&[nx, ny]).map_err(|e| format_error(path, e.to_string()))?;
    let pixels: Vec<usize> = if binary {
        let data = bytes.get(pos + 1..).unwrap_or(&[]);
        data.iter().map(|&b| b as usize).collect()
    } else {
        let text = std::str::from_utf8(&bytes[pos..]).map_err(|_| format_error(path, "non-ASCII pixel data"))?;
        let p: std::result::Result<Vec<usize>, _> = text.split_whitespace().map(str::parse).collect();
        p.map_err(|_| format_error(path, "bad pixel value"))?
    };
    if pixels.len() != nx * ny {
        return Err(format_error(path, format!("expected {} pixels, found {}", nx * ny, pixels.len())));
    }
    let mut values = vec![0.0; nx * ny];
    for (row, j) in (0..ny).rev().enumerate() {
        for i in 0..nx {
            let p = pixels[row * nx + i];
            if p > maxval {
                return Err(format_error(path, "pixel exceeds maxval"));
            }
            values[grid.index(i, j, 0)] = 1.0 - p as f64 / maxval as f64;
        }
    }
    Ok((grid, values))
}

/// Reads a density file written by this crate (VTK or graymap, detected from
/// the leading bytes).
pub fn read_density(path: &Path) -> Result<(StructuredGrid, Vec<f64>)> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(b"P5") || bytes.starts_with(b"P2") {
        return parse_pgm(path, &bytes);
    }
    let text = std::str::from_utf8(&bytes).map_err(|_| format_error(path, "not a text VTK file"))?;
    if !text.starts_with("# vtk") {
        return Err(format_error(path, "unrecognized density format"));
    }
    parse_vtk(path, text)
}

/// `iter,compliance,volume,change` rows; wall time is left out so reruns
/// produce identical files.
pub fn history_csv(history: &[IterationRecord]) -> String {
    let mut out = String::from("iter,compliance,volume,change\n");
    for r in history {
        out.push_str(&format!("{},{:?},{:?},{:?}\n", r.iteration, r.compliance, r.volume, r.change));
    }
    out
}

pub fn write_history(path: &Path, history: &[IterationRecord]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(history_csv(history).as_bytes())?;
    Ok(())
}
