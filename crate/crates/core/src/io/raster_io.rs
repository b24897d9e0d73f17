//! Raster files: ESRI ASCII grids and the `ALTR` binary container.
//!
//! `ALTR` layout, all little-endian:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "ALTR"
//! 4       4     u32 version (1)
//! 8       4     u32 rows
//! 12      4     u32 cols
//! 16      4     u32 bands (1 real, 2 complex)
//! 20      8     f64 origin_x   (top-left corner)
//! 28      8     f64 origin_y
//! 36      8     f64 pixel_size_x
//! 44      8     f64 pixel_size_y (negative for north-up)
//! 52      8     f64 nodata (NaN when absent)
//! 60      4     u32 crs label length n
//! 64      n     crs label, UTF-8
//! 64+n    ...   rows*cols*bands f64 cells, row-major, bands interleaved
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex32;

use crate::error::{Error, Result};
use crate::raster::{GeoTransform, Mask, Raster};

const MAGIC: &[u8; 4] = b"ALTR";
const VERSION: u32 = 1;
const FIXED_HEADER: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RasterFormat {
    AsciiGrid,
    Binary,
}

impl RasterFormat {
    /// `.asc` / `.grd` are ASCII grids; anything else is `ALTR`.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("asc") | Some("grd") => RasterFormat::AsciiGrid,
            _ => RasterFormat::Binary,
        }
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

/// Reads a real raster; the format follows the file's leading bytes.
pub fn read_raster(path: &Path) -> Result<Raster<f64>> {
    let bytes = read_bytes(path)?;
    let name = path.display().to_string();
    if bytes.starts_with(MAGIC) {
        decode_binary(&bytes, &name)
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::FormatMismatch(format!("{name}: neither ALTR nor UTF-8 text")))?;
        parse_ascii_grid(&text, &name)
    }
}

/// Writes a real raster in the format implied by the extension.
pub fn write_raster(raster: &Raster<f64>, path: &Path) -> Result<()> {
    let bytes = match RasterFormat::from_path(path) {
        RasterFormat::AsciiGrid => format_ascii_grid(raster)?.into_bytes(),
        RasterFormat::Binary => encode_binary(raster),
    };
    write_bytes(path, &bytes)
}

/// Non-zero valid cells are `true`.
pub fn read_mask(path: &Path) -> Result<Mask> {
    Ok(Mask::from_float(&read_raster(path)?))
}

/// Stored as 0/1 without nodata.
pub fn write_mask(mask: &Mask, path: &Path) -> Result<()> {
    write_raster(&mask.to_float(), path)
}

pub fn read_complex(path: &Path) -> Result<Raster<Complex32>> {
    let bytes = read_bytes(path)?;
    decode_complex(&bytes, &path.display().to_string())
}

pub fn write_complex(raster: &Raster<Complex32>, path: &Path) -> Result<()> {
    if RasterFormat::from_path(path) == RasterFormat::AsciiGrid {
        return Err(Error::FormatMismatch(format!(
            "{}: complex rasters need the ALTR format",
            path.display()
        )));
    }
    write_bytes(path, &encode_complex(raster))
}

// ---------------------------------------------------------------- ASCII grid

const ASCII_KEYS: [&str; 8] = [
    "ncols",
    "nrows",
    "xllcorner",
    "yllcorner",
    "xllcenter",
    "yllcenter",
    "cellsize",
    "nodata_value",
];

/// Parses an ESRI ASCII grid. Header keys are case-insensitive; either
/// corner or centre registration is accepted.
pub fn parse_ascii_grid(text: &str, source_name: &str) -> Result<Raster<f64>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).peekable();
    let mut header: Vec<(String, f64)> = Vec::new();
    while let Some(&(ln, line)) = lines.peek() {
        let mut parts = line.split_whitespace();
        let key = parts.next().unwrap_or_default().to_ascii_lowercase();
        if !ASCII_KEYS.contains(&key.as_str()) {
            break;
        }
        let loc = format!("line {}", ln + 1);
        let raw = parts
            .next()
            .ok_or_else(|| Error::parse(source_name, &loc, format!("{} has no value", key.to_uppercase())))?;
        let value: f64 = raw
            .parse()
            .map_err(|_| Error::parse(source_name, &loc, format!("{} value {raw:?} is not a number", key.to_uppercase())))?;
        if header.iter().any(|(k, _)| *k == key) {
            return Err(Error::parse(source_name, &loc, format!("duplicate {}", key.to_uppercase())));
        }
        header.push((key, value));
        lines.next();
    }
    let get = |k: &str| header.iter().find(|(key, _)| key == k).map(|(_, v)| *v);
    let need = |k: &str| {
        get(k).ok_or_else(|| Error::parse(source_name, "header", format!("missing {}", k.to_uppercase())))
    };
    let count = |k: &str| -> Result<usize> {
        let v = need(k)?;
        if v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
            Ok(v as usize)
        } else {
            Err(Error::parse(source_name, "header", format!("{} must be a positive integer, got {v}", k.to_uppercase())))
        }
    };
    let n_cols = count("ncols")?;
    let n_rows = count("nrows")?;
    let cell = need("cellsize")?;
    if !(cell > 0.0 && cell.is_finite()) {
        return Err(Error::parse(source_name, "header", format!("CELLSIZE must be > 0, got {cell}")));
    }
    let (xll, yll) = match (get("xllcorner"), get("yllcorner"), get("xllcenter"), get("yllcenter")) {
        (Some(x), Some(y), None, None) => (x, y),
        (None, None, Some(x), Some(y)) => (x - 0.5 * cell, y - 0.5 * cell),
        (None, _, None, _) => return Err(Error::parse(source_name, "header", "missing XLLCORNER")),
        (_, None, _, None) => return Err(Error::parse(source_name, "header", "missing YLLCORNER")),
        _ => return Err(Error::parse(source_name, "header", "mixed corner and centre registration")),
    };
    let nodata = get("nodata_value");

    let total = n_rows * n_cols;
    let mut cells = Vec::with_capacity(total);
    for (ln, line) in lines {
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| {
                Error::parse(source_name, format!("line {}", ln + 1), format!("cell value {tok:?} is not a number"))
            })?;
            if cells.len() == total {
                return Err(Error::parse(source_name, format!("line {}", ln + 1), format!("more than {total} cell values")));
            }
            cells.push(v);
        }
    }
    if cells.len() != total {
        return Err(Error::parse(source_name, "end of file", format!("expected {total} cell values, found {}", cells.len())));
    }
    let transform = GeoTransform::north_up(xll, yll + n_rows as f64 * cell, cell, n_rows, n_cols)?;
    Raster::new(transform, cells, nodata)
}

/// Corner-registered ESRI ASCII grid. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn format_ascii_grid(raster: &Raster<f64>) -> Result<String> {
    let t = raster.transform();
    if t.pixel_size_y != -t.pixel_size_x {
        return Err(Error::FormatMismatch(
            "ASCII grids need square north-up cells".into(),
        ));
    }
    let yll = t.origin_y + t.n_rows as f64 * t.pixel_size_y;
    let mut out = String::with_capacity(raster.len() * 8 + 128);
    out.push_str(&format!("NCOLS {}\n", t.n_cols));
    out.push_str(&format!("NROWS {}\n", t.n_rows));
    out.push_str(&format!("XLLCORNER {:?}\n", t.origin_x));
    out.push_str(&format!("YLLCORNER {yll:?}\n"));
    out.push_str(&format!("CELLSIZE {:?}\n", t.pixel_size_x));
    let nodata = raster.nodata();
    if let Some(nd) = nodata {
        out.push_str(&format!("NODATA_VALUE {nd:?}\n"));
    }
    for r in 0..t.n_rows {
        let row = &raster.cells()[r * t.n_cols..(r + 1) * t.n_cols];
        for (c, &v) in row.iter().enumerate() {
            if c > 0 {
                out.push(' ');
            }
            // NaN has no ASCII spelling; it maps onto the sentinel.
            let v = match (v.is_nan(), nodata) {
                (true, Some(nd)) => nd,
                _ => v,
            };
            out.push_str(&format!("{v:?}"));
        }
        out.push('\n');
    }
    Ok(out)
}

// ---------------------------------------------------------------- ALTR binary

fn encode_header(t: &GeoTransform, bands: u32, nodata: f64) -> Vec<u8> {
    let crs = t.crs_label.as_bytes();
    let mut out = Vec::with_capacity(FIXED_HEADER + crs.len() + t.len() * 8 * bands as usize);
    out.extend_from_slice(MAGIC);
    for v in [VERSION, t.n_rows as u32, t.n_cols as u32, bands] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in [t.origin_x, t.origin_y, t.pixel_size_x, t.pixel_size_y, nodata] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(crs.len() as u32).to_le_bytes());
    out.extend_from_slice(crs);
    out
}

pub fn encode_binary(raster: &Raster<f64>) -> Vec<u8> {
    let mut out = encode_header(raster.transform(), 1, raster.nodata().unwrap_or(f64::NAN));
    for v in raster.cells() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn encode_complex(raster: &Raster<Complex32>) -> Vec<u8> {
    let mut out = encode_header(raster.transform(), 2, f64::NAN);
    for v in raster.cells() {
        out.extend_from_slice(&(v.re as f64).to_le_bytes());
        out.extend_from_slice(&(v.im as f64).to_le_bytes());
    }
    out
}

struct Header {
    transform: GeoTransform,
    bands: u32,
    nodata: f64,
    data_offset: usize,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    name: &'a str,
}

impl<'a> Cursor<'a> {
    fn take<const N: usize>(&mut self, field: &str) -> Result<[u8; N]> {
        let end = self.pos + N;
        let slice = self.bytes.get(self.pos..end).ok_or_else(|| {
            Error::parse(self.name, format!("byte {}", self.pos), format!("truncated before {field}"))
        })?;
        self.pos = end;
        Ok(slice.try_into().expect("slice has length N"))
    }

    fn u32(&mut self, field: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take::<4>(field)?))
    }

    fn f64(&mut self, field: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take::<8>(field)?))
    }
}

fn decode_header(bytes: &[u8], name: &str) -> Result<Header> {
    let mut cur = Cursor { bytes, pos: 0, name };
    if &cur.take::<4>("magic")? != MAGIC {
        return Err(Error::FormatMismatch(format!("{name}: missing ALTR magic")));
    }
    let version = cur.u32("version")?;
    if version != VERSION {
        return Err(Error::FormatMismatch(format!("{name}: ALTR version {version}, expected {VERSION}")));
    }
    let rows = cur.u32("rows")? as usize;
    let cols = cur.u32("cols")? as usize;
    let bands = cur.u32("bands")?;
    let origin_x = cur.f64("origin_x")?;
    let origin_y = cur.f64("origin_y")?;
    let px = cur.f64("pixel_size_x")?;
    let py = cur.f64("pixel_size_y")?;
    let nodata = cur.f64("nodata")?;
    let crs_len = cur.u32("crs length")? as usize;
    let crs_bytes = bytes
        .get(cur.pos..cur.pos + crs_len)
        .ok_or_else(|| Error::parse(name, format!("byte {}", cur.pos), "truncated crs label"))?;
    let crs = std::str::from_utf8(crs_bytes)
        .map_err(|_| Error::parse(name, format!("byte {}", cur.pos), "crs label is not UTF-8"))?;
    let data_offset = cur.pos + crs_len;
    let transform = GeoTransform::new(origin_x, origin_y, px, py, rows, cols, crs)?;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(bands as usize * 8))
        .and_then(|n| n.checked_add(data_offset));
    if expected != Some(bytes.len()) {
        return Err(Error::parse(
            name,
            format!("byte {data_offset}"),
            format!("payload is {} bytes, header implies {rows}x{cols}x{bands} cells", bytes.len() - data_offset),
        ));
    }
    Ok(Header {
        transform,
        bands,
        nodata,
        data_offset,
    })
}

fn payload(bytes: &[u8], offset: usize) -> impl Iterator<Item = f64> + '_ {
    bytes[offset..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
}

pub fn decode_binary(bytes: &[u8], name: &str) -> Result<Raster<f64>> {
    let h = decode_header(bytes, name)?;
    if h.bands != 1 {
        return Err(Error::FormatMismatch(format!("{name}: expected 1 band, found {}", h.bands)));
    }
    let nodata = (!h.nodata.is_nan()).then_some(h.nodata);
    Raster::new(h.transform, payload(bytes, h.data_offset).collect(), nodata)
}

pub fn decode_complex(bytes: &[u8], name: &str) -> Result<Raster<Complex32>> {
    let h = decode_header(bytes, name)?;
    if h.bands != 2 {
        return Err(Error::FormatMismatch(format!("{name}: expected 2 bands (complex), found {}", h.bands)));
    }
    let values: Vec<f64> = payload(bytes, h.data_offset).collect();
    let cells = values
        .chunks_exact(2)
        .map(|p| Complex32::new(p[0] as f32, p[1] as f32))
        .collect();
    Raster::new(h.transform, cells, None)
}
