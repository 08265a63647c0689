//! Disparity map serialization.
//!
//! Two interchangeable on-disk formats:
//!
//! * **pgm16** — binary PGM (`P5`), maxval 65535, big-endian 16-bit samples,
//!   row-major. Raw value 0 marks an invalid cell; any other raw value `r`
//!   decodes to disparity `r / scale`. Encoding rounds `d * scale` to the
//!   nearest integer, so values that are not multiples of `1/scale` lose
//!   precision, and a valid cell that rounds to raw 0 reloads as invalid.
//! * **csv** — text rows `u,v,d` (header line `u,v,d`, LF line endings),
//!   listing valid cells only. Disparities are written with Rust's shortest
//!   round-trip float formatting, so a save/load cycle is bit-exact. Grid
//!   dimensions are inferred on load as `max(u)+1` by `max(v)+1`.
//!
//! Masks are 8-bit PGM grids (maxval 255): zero excludes a cell, anything
//! else includes it.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::disparity::{DisparityMap, Mask};
use crate::error::{Error, Result};
use crate::geometry::VDisparityMap;

/// On-disk map format, usually inferred from the file extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapFormat {
    Pgm16,
    Csv,
}

impl MapFormat {
    /// Picks the format from a path's extension: `.pgm` or `.csv`
    /// (case-insensitive).
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "pgm" => Some(MapFormat::Pgm16),
            "csv" => Some(MapFormat::Csv),
            _ => None,
        }
    }
}

/// Refuse to allocate grids beyond this many cells when dimensions come from
/// file headers.
const MAX_CELLS: usize = 100_000_000;

fn check_scale(scale: f64) -> Result<()> {
    if scale.is_finite() && scale > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "scale must be positive and finite, got {scale}"
        )))
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source }
}

fn parse_err(path: &Path, at: String, message: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), at, message: message.into() }
}

/// Loads a disparity map. `scale` converts pgm16 raw values to disparities
/// (`d = raw / scale`) and is ignored for csv.
pub fn load_disparity(path: &Path, format: MapFormat, scale: f64) -> Result<DisparityMap> {
    check_scale(scale)?;
    match format {
        MapFormat::Pgm16 => load_pgm16(path, scale),
        MapFormat::Csv => load_csv(path),
    }
}

/// Saves a disparity map. For pgm16, disparities encode as
/// `round(d * scale)`; an encoded value above 65535 is an error. For csv,
/// `scale` is ignored.
pub fn save_disparity(map: &DisparityMap, path: &Path, format: MapFormat, scale: f64) -> Result<()> {
    check_scale(scale)?;
    match format {
        MapFormat::Pgm16 => save_pgm16(map, path, scale),
        MapFormat::Csv => save_csv(map, path),
    }
}

/// Cursor over PGM header bytes that tracks offsets for error reporting.
struct HeaderCursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> HeaderCursor<'a> {
    fn skip_separators(&mut self) {
        while let Some(&b) = self.data.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&c) = self.data.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Option<(usize, &'a [u8])> {
        self.skip_separators();
        let start = self.pos;
        while let Some(&b) = self.data.get(self.pos) {
            if b.is_ascii_whitespace() || b == b'#' {
                break;
            }
            self.pos += 1;
        }
        (self.pos > start).then(|| (start, &self.data[start..self.pos]))
    }
}

fn header_number(path: &Path, cur: &mut HeaderCursor<'_>, what: &str) -> Result<usize> {
    let (start, tok) = cur
        .token()
        .ok_or_else(|| parse_err(path, format!("offset {}", cur.pos), format!("missing {what}")))?;
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .ok_or_else(|| {
            parse_err(path, format!("offset {start}"), format!("invalid {what} field"))
        })
}

/// Parses a `P5` header, returning `(width, height, maxval, raster_offset)`.
fn parse_pgm_header(path: &Path, data: &[u8]) -> Result<(usize, usize, usize, usize)> {
    let mut cur = HeaderCursor { data, pos: 0 };
    let (start, magic) = cur
        .token()
        .ok_or_else(|| parse_err(path, "offset 0".into(), "empty file"))?;
    if magic != b"P5" {
        return Err(parse_err(
            path,
            format!("offset {start}"),
            "not a binary PGM file (expected magic P5)",
        ));
    }
    let width = header_number(path, &mut cur, "width")?;
    let height = header_number(path, &mut cur, "height")?;
    let maxval = header_number(path, &mut cur, "maxval")?;
    // Exactly one whitespace byte separates the maxval from the raster.
    match data.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => {
            return Err(parse_err(
                path,
                format!("offset {}", cur.pos),
                "expected single whitespace byte before raster",
            ))
        }
    }
    if width == 0 || height == 0 {
        return Err(parse_err(path, "offset 3".into(), "zero image dimension"));
    }
    if width.saturating_mul(height) > MAX_CELLS {
        return Err(parse_err(
            path,
            "offset 3".into(),
            format!("{width}x{height} grid exceeds the {MAX_CELLS}-cell limit"),
        ));
    }
    Ok((width, height, maxval, cur.pos))
}

fn load_pgm16(path: &Path, scale: f64) -> Result<DisparityMap> {
    let data = fs::read(path).map_err(|e| io_err(path, e))?;
    let (width, height, maxval, raster) = parse_pgm_header(path, &data)?;
    if maxval != 65535 {
        return Err(parse_err(
            path,
            "offset 3".into(),
            format!("expected maxval 65535 for a 16-bit disparity map, got {maxval}"),
        ));
    }
    let expected = width * height * 2;
    let body = &data[raster..];
    if body.len() != expected {
        return Err(parse_err(
            path,
            format!("offset {raster}"),
            format!("raster holds {} bytes, expected {expected}", body.len()),
        ));
    }

    let mut values = vec![0.0_f64; width * height];
    let mut valid = vec![false; width * height];
    for (i, pair) in body.chunks_exact(2).enumerate() {
        let raw = u16::from_be_bytes([pair[0], pair[1]]);
        if raw != 0 {
            values[i] = raw as f64 / scale;
            valid[i] = true;
        }
    }
    if !valid.iter().any(|&ok| ok) {
        return Err(Error::EmptyMap);
    }
    DisparityMap::from_parts(width, height, values, valid)
}

fn save_pgm16(map: &DisparityMap, path: &Path, scale: f64) -> Result<()> {
    let mut out = Vec::with_capacity(32 + map.width() * map.height() * 2);
    write!(out, "P5\n{} {}\n65535\n", map.width(), map.height()).expect("write to vec");
    for v in 0..map.height() {
        for u in 0..map.width() {
            let raw = match map.get(u, v) {
                None => 0_u16,
                Some(d) => {
                    let r = (d * scale).round();
                    if r > 65535.0 {
                        return Err(Error::InvalidArgument(format!(
                            "disparity {d} at ({u}, {v}) exceeds the pgm16 range at scale {scale}"
                        )));
                    }
                    r as u16
                }
            };
            out.extend_from_slice(&raw.to_be_bytes());
        }
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

fn load_csv(path: &Path) -> Result<DisparityMap> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines().enumerate();

    match lines.next() {
        Some((_, header)) if header.trim_end() == "u,v,d" => {}
        Some((_, header)) => {
            return Err(parse_err(
                path,
                "line 1".into(),
                format!("expected header 'u,v,d', got '{header}'"),
            ))
        }
        None => return Err(parse_err(path, "line 1".into(), "empty file")),
    }

    let mut cells: Vec<(u32, u32, f64)> = Vec::new();
    let (mut max_u, mut max_v) = (0_u32, 0_u32);
    for (idx, line) in lines {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let at = || format!("line {}", idx + 1);
        let mut fields = line.split(',');
        let (u_str, v_str, d_str) = match (fields.next(), fields.next(), fields.next(), fields.next()) {
            (Some(a), Some(b), Some(c), None) => (a, b, c),
            _ => return Err(parse_err(path, at(), "expected exactly three fields 'u,v,d'")),
        };
        let u: u32 = u_str
            .trim()
            .parse()
            .map_err(|_| parse_err(path, at(), format!("invalid column index '{u_str}'")))?;
        let v: u32 = v_str
            .trim()
            .parse()
            .map_err(|_| parse_err(path, at(), format!("invalid row index '{v_str}'")))?;
        let d: f64 = d_str
            .trim()
            .parse()
            .map_err(|_| parse_err(path, at(), format!("invalid disparity '{d_str}'")))?;
        if !(d.is_finite() && d >= 0.0) {
            return Err(parse_err(path, at(), format!("disparity must be finite and >= 0, got {d}")));
        }
        max_u = max_u.max(u);
        max_v = max_v.max(v);
        cells.push((u, v, d));
    }
    if cells.is_empty() {
        return Err(Error::EmptyMap);
    }

    let (width, height) = (max_u as usize + 1, max_v as usize + 1);
    if width.saturating_mul(height) > MAX_CELLS {
        return Err(parse_err(
            path,
            "line 2".into(),
            format!("inferred {width}x{height} grid exceeds the {MAX_CELLS}-cell limit"),
        ));
    }
    let mut values = vec![0.0_f64; width * height];
    let mut valid = vec![false; width * height];
    for (u, v, d) in cells {
        let i = v as usize * width + u as usize;
        if valid[i] {
            return Err(parse_err(
                path,
                "line 2".into(),
                format!("cell ({u}, {v}) listed more than once"),
            ));
        }
        values[i] = d;
        valid[i] = true;
    }
    DisparityMap::from_parts(width, height, values, valid)
}

fn save_csv(map: &DisparityMap, path: &Path) -> Result<()> {
    let mut out = String::from("u,v,d\n");
    for v in 0..map.height() {
        for u in 0..map.width() {
            if let Some(d) = map.get(u, v) {
                out.push_str(&format!("{u},{v},{d}\n"));
            }
        }
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Loads an 8-bit PGM inclusion mask: raw 0 excludes a cell, 1..=255
/// includes it.
pub fn load_mask(path: &Path) -> Result<Mask> {
    let data = fs::read(path).map_err(|e| io_err(path, e))?;
    let (width, height, maxval, raster) = parse_pgm_header(path, &data)?;
    if maxval != 255 {
        return Err(parse_err(
            path,
            "offset 3".into(),
            format!("expected maxval 255 for a mask, got {maxval}"),
        ));
    }
    let body = &data[raster..];
    if body.len() != width * height {
        return Err(parse_err(
            path,
            format!("offset {raster}"),
            format!("raster holds {} bytes, expected {}", body.len(), width * height),
        ));
    }
    Mask::from_parts(width, height, body.iter().map(|&b| b != 0).collect())
}

/// Writes a v-disparity histogram as an 8-bit PGM image (one image row per
/// map row, one column per bin). Counts above 255 saturate.
pub fn save_v_disparity_pgm(vd: &VDisparityMap, path: &Path) -> Result<()> {
    let mut out = Vec::with_capacity(32 + vd.rows() * vd.bins());
    write!(out, "P5\n{} {}\n255\n", vd.bins(), vd.rows()).expect("write to vec");
    for v in 0..vd.rows() {
        out.extend(vd.row(v).iter().map(|&c| c.min(255) as u8));
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}
