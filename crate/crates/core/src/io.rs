//! Binary field files and mask readers.
//!
//! Field file layout (little-endian): magic `SFLD`, `u32 nx`, `u32 ny`,
//! `f64 h`, `f64 x0`, `f64 y0`, one `u8` kind code per node (row-major), then
//! one `f64` per non-exterior node in row-major order.
//!
//! Masks come either as binary PGM (`P5`, nonzero pixel = fluid, first image
//! row at the top) or as run-length text:
//!
//! ```text
//! % comment
//! rle 6 3
//! 6o
//! 2o2x2o
//! 6o
//! ```
//!
//! where `o` marks fluid and `x` solid; rows are listed top to bottom.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{CellKind, GridDomain, ScalarField};

const MAGIC: &[u8; 4] = b"SFLD";

pub fn write_field<W: Write>(mut w: W, f: &ScalarField) -> Result<()> {
    let d = f.domain();
    let (x0, y0) = d.origin();
    let mut buf = Vec::with_capacity(36 + d.nx() * d.ny() + 8 * d.n_slots());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(d.nx() as u32).to_le_bytes());
    buf.extend_from_slice(&(d.ny() as u32).to_le_bytes());
    for v in [d.h(), x0, y0] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend(d.kinds().iter().map(|k| k.code()));
    for node in 0..d.nx() * d.ny() {
        if let Some(s) = d.slot_of(node) {
            buf.extend_from_slice(&f.get(s).to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn save_field(path: &Path, f: &ScalarField) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_field(std::io::BufWriter::new(file), f)
}

/// Raw contents of a field file.
#[derive(Clone, Debug)]
pub struct FieldFile {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub origin: (f64, f64),
    pub kinds: Vec<CellKind>,
    pub values: Vec<f64>,
}

impl FieldFile {
    /// Attaches the values to `domain`, which must carry the same grid and
    /// node kinds. Without a domain one is rebuilt from the stored kinds
    /// (staircase link weights).
    pub fn into_field(self, domain: Option<&Arc<GridDomain>>) -> Result<ScalarField> {
        let d = match domain {
            Some(d) => {
                if d.nx() != self.nx || d.ny() != self.ny || d.h() != self.h || d.kinds() != &self.kinds[..] {
                    return Err(Error::Format("field file does not match the domain".into()));
                }
                Arc::clone(d)
            }
            None => GridDomain::from_kinds(self.nx, self.ny, self.h, self.origin, self.kinds)?,
        };
        // Slots follow row-major node order, but go through the map anyway.
        let mut vals = vec![0.0; d.n_slots()];
        let mut it = self.values.into_iter();
        for node in 0..d.nx() * d.ny() {
            if let Some(s) = d.slot_of(node) {
                vals[s] = it.next().ok_or_else(|| Error::Format("truncated values".into()))?;
            }
        }
        ScalarField::from_values(&d, vals)
    }
}

pub fn read_field<R: Read>(mut r: R) -> Result<FieldFile> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut cur = Cursor { b: &bytes, pos: 0 };
    if cur.take(4)? != MAGIC {
        return Err(Error::Format("bad magic, expected SFLD".into()));
    }
    let nx = cur.u32()? as usize;
    let ny = cur.u32()? as usize;
    let h = cur.f64()?;
    let origin = (cur.f64()?, cur.f64()?);
    let n = nx.checked_mul(ny).ok_or_else(|| Error::Format("grid too large".into()))?;
    let kinds: Vec<CellKind> = cur.take(n)?.iter().map(|&c| CellKind::from_code(c)).collect();
    let m = kinds.iter().filter(|k| **k != CellKind::Exterior).count();
    let values = (0..m).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?;
    if cur.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes", bytes.len() - cur.pos)));
    }
    Ok(FieldFile { nx, ny, h, origin, kinds, values })
}

pub fn load_field(path: &Path) -> Result<FieldFile> {
    read_field(std::fs::File::open(path)?)
}

struct Cursor<'a> {
    b: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.b.len());
        let end = end.ok_or_else(|| Error::Format("unexpected end of file".into()))?;
        let s = &self.b[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Boolean mask in node order (`j * nx + i`, `j = 0` at the bottom).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    pub nx: usize,
    pub ny: usize,
    pub fluid: Vec<bool>,
}

impl Mask {
    fn from_rows_top_down(nx: usize, ny: usize, rows: Vec<Vec<bool>>) -> Mask {
        let mut fluid = vec![false; nx * ny];
        for (r, row) in rows.into_iter().enumerate() {
            let j = ny - 1 - r;
            fluid[j * nx..(j + 1) * nx].copy_from_slice(&row);
        }
        Mask { nx, ny, fluid }
    }

    pub fn to_domain(&self, h: f64, origin: (f64, f64)) -> Result<Arc<GridDomain>> {
        GridDomain::label_components(self.nx, self.ny, h, origin, &self.fluid)
    }
}

pub fn parse_pgm(bytes: &[u8]) -> Result<Mask> {
    let mut pos = 0;
    let mut tokens = Vec::new();
    // Header: magic, width, height, maxval, separated by whitespace and comments.
    while tokens.len() < 4 {
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
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated PGM header".into()));
        }
        tokens.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| Error::Format("bad PGM header".into()))?);
    }
    if tokens[0] != "P5" {
        return Err(Error::Format(format!("expected P5 PGM, got {}", tokens[0])));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| Error::Format(format!("bad PGM header field {s:?}")));
    let (nx, ny, maxval) = (num(tokens[1])?, num(tokens[2])?, num(tokens[3])?);
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!("bad PGM maxval {maxval}")));
    }
    pos += 1; // single whitespace byte after maxval
    let bpp = if maxval < 256 { 1 } else { 2 };
    let data = bytes.get(pos..).unwrap_or(&[]);
    if data.len() != nx * ny * bpp {
        return Err(Error::Format(format!("PGM raster has {} bytes, expected {}", data.len(), nx * ny * bpp)));
    }
    let rows = (0..ny)
        .map(|r| (0..nx).map(|i| data[(r * nx + i) * bpp..(r * nx + i + 1) * bpp].iter().any(|b| *b != 0)).collect())
        .collect();
    Ok(Mask::from_rows_top_down(nx, ny, rows))
}

pub fn parse_rle(text: &str) -> Result<Mask> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('%'));
    let header = lines.next().ok_or_else(|| Error::Format("empty run-length mask".into()))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 3 || parts[0] != "rle" {
        return Err(Error::Format(format!("bad run-length header {header:?}, expected `rle nx ny`")));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| Error::Format(format!("bad number {s:?}")));
    let (nx, ny) = (num(parts[1])?, num(parts[2])?);
    let mut rows = Vec::with_capacity(ny);
    for line in lines {
        let mut row = Vec::with_capacity(nx);
        let mut count = String::new();
        for c in line.chars().filter(|c| !c.is_whitespace()) {
            match c {
                '0'..='9' => count.push(c),
                'o' | 'x' => {
                    let n = if count.is_empty() { 1 } else { num(&count)? };
                    row.extend(std::iter::repeat(c == 'o').take(n));
                    count.clear();
                }
                _ => return Err(Error::Format(format!("unexpected character {c:?} in run-length mask"))),
            }
        }
        if !count.is_empty() || row.len() != nx {
            return Err(Error::Format(format!("run-length row {} has {} cells, expected {nx}", rows.len(), row.len())));
        }
        rows.push(row);
    }
    if rows.len() != ny {
        return Err(Error::Format(format!("run-length mask has {} rows, expected {ny}", rows.len())));
    }
    Ok(Mask::from_rows_top_down(nx, ny, rows))
}

/// Reads a mask, choosing the format from the leading bytes.
pub fn load_mask(path: &Path) -> Result<Mask> {
    let bytes = std::fs::read(path)?;
    if bytes.starts_with(b"P5") {
        parse_pgm(&bytes)
    } else {
        parse_rle(std::str::from_utf8(&bytes).map_err(|_| Error::Format("mask is neither PGM nor text".into()))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_round_trip() {
        let d = GridDomain::annulus(1.0, 2.0, 8).unwrap();
        let f = ScalarField::from_fn(&d, |x, y| x * x - 0.3 * y);
        let mut buf = Vec::new();
        write_field(&mut buf, &f).unwrap();
        assert_eq!(&buf[..4], b"SFLD");
        let back = read_field(&buf[..]).unwrap().into_field(Some(&d)).unwrap();
        assert_eq!(back.values(), f.values());
        assert!(read_field(&buf[..buf.len() - 1]).is_err());
    }

    #[test]
    fn rle_and_pgm_agree() {
        let rle = "% square with a hole\nrle 7 7\n7o\n7o\n2o3x2o\n2o3x2o\n2o3x2o\n7o\n7o\n";
        let a = parse_rle(rle).unwrap();
        let mut pgm = b"P5\n# c\n7 7\n255\n".to_vec();
        for r in 0..7 {
            for i in 0..7 {
                let hole = (2..5).contains(&r) && (2..5).contains(&i);
                pgm.push(if hole { 0 } else { 255 });
            }
        }
        let b = parse_pgm(&pgm).unwrap();
        assert_eq!(a, b);
        let d = a.to_domain(0.1, (0.0, 0.0)).unwrap();
        assert_eq!(d.n_holes(), 1);
        assert!(parse_rle("rle 3 1\n2o\n").is_err());
    }
}
