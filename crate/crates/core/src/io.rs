//! Portable binary field files.
//!
//! Layout: 12-byte magic `CMATORUSFLD\0`, then little-endian `u32` version,
//! `u32` complex dimension `n`, `u32` points per axis `N`, `u32` kind
//! (0 real scalar, 1 complex scalar, 2 Hermitian matrix), then raw
//! little-endian `f64` samples in row-major grid order. Matrix entries are
//! innermost and row-major; complex values store real then imaginary part.

use crate::error::{Error, Result};
use crate::field::{ComplexField, HermitianField, ScalarField};
use crate::grid::Grid;
use num_complex::Complex64;
use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 12] = b"CMATORUSFLD\0";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 28;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    Real = 0,
    Complex = 1,
    Hermitian = 2,
}

impl FieldKind {
    fn from_u32(k: u32) -> Option<FieldKind> {
        match k {
            0 => Some(FieldKind::Real),
            1 => Some(FieldKind::Complex),
            2 => Some(FieldKind::Hermitian),
            _ => None,
        }
    }

    fn doubles_per_point(self, n: usize) -> usize {
        match self {
            FieldKind::Real => 1,
            FieldKind::Complex => 2,
            FieldKind::Hermitian => 2 * n * n,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Header {
    pub version: u32,
    pub complex_dim: u32,
    pub points_per_axis: u32,
    pub kind: FieldKind,
}

impl std::fmt::Display for Header {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "version {} n={} N={} kind={:?}",
            self.version, self.complex_dim, self.points_per_axis, self.kind
        )
    }
}

fn header_for(grid: &Grid, kind: FieldKind) -> Header {
    Header {
        version: VERSION,
        complex_dim: grid.dim() as u32,
        points_per_axis: grid.points_per_axis() as u32,
        kind,
    }
}

fn write_raw<W: Write>(w: &mut W, header: Header, doubles: impl Iterator<Item = f64>) -> Result<()> {
    let mut buf = Vec::with_capacity(HEADER_LEN);
    buf.extend_from_slice(MAGIC);
    for v in [
        header.version,
        header.complex_dim,
        header.points_per_axis,
        header.kind as u32,
    ] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    let mut body = Vec::new();
    for d in doubles {
        body.extend_from_slice(&d.to_le_bytes());
    }
    w.write_all(&body)?;
    Ok(())
}

/// Parse the fixed header. Short input is a shape mismatch.
pub fn read_header<R: Read>(r: &mut R) -> Result<Header> {
    let mut buf = [0u8; HEADER_LEN];
    let got = read_up_to(r, &mut buf)?;
    if got < HEADER_LEN {
        return Err(Error::ShapeMismatch {
            expected: format!("{HEADER_LEN}-byte header"),
            found: format!("{got} bytes"),
        });
    }
    if &buf[..12] != MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let word = |i: usize| u32::from_le_bytes(buf[12 + 4 * i..16 + 4 * i].try_into().unwrap());
    let version = word(0);
    if version != VERSION {
        return Err(Error::ShapeMismatch {
            expected: format!("version {VERSION}"),
            found: format!("version {version}"),
        });
    }
    let kind = FieldKind::from_u32(word(3))
        .ok_or_else(|| Error::Format(format!("unknown field kind {}", word(3))))?;
    Ok(Header {
        version,
        complex_dim: word(1),
        points_per_axis: word(2),
        kind,
    })
}

fn read_up_to<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<usize> {
    let mut got = 0;
    while got < buf.len() {
        match r.read(&mut buf[got..])? {
            0 => break,
            k => got += k,
        }
    }
    Ok(got)
}

fn read_body<R: Read>(r: &mut R, grid: &Grid, kind: FieldKind) -> Result<Vec<f64>> {
    let header = read_header(r)?;
    let expected = header_for(grid, kind);
    if header != expected {
        return Err(Error::ShapeMismatch {
            expected: expected.to_string(),
            found: header.to_string(),
        });
    }
    let count = grid.len() * kind.doubles_per_point(grid.dim());
    let mut bytes = vec![0u8; count * 8];
    let got = read_up_to(r, &mut bytes)?;
    let mut extra = [0u8; 1];
    let trailing = read_up_to(r, &mut extra)?;
    if got < bytes.len() || trailing > 0 {
        return Err(Error::ShapeMismatch {
            expected: format!("{expected} with {} body bytes", bytes.len()),
            found: format!(
                "{header} with {}{} body bytes",
                got,
                if trailing > 0 { "+" } else { "" }
            ),
        });
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn complex_doubles(v: &[Complex64]) -> impl Iterator<Item = f64> + '_ {
    v.iter().flat_map(|z| [z.re, z.im])
}

fn pairs(d: &[f64]) -> Vec<Complex64> {
    d.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect()
}

pub fn write_scalar<W: Write>(w: &mut W, f: &ScalarField) -> Result<()> {
    write_raw(w, header_for(f.grid(), FieldKind::Real), f.values().iter().copied())
}

pub fn read_scalar<R: Read>(r: &mut R, grid: &Grid) -> Result<ScalarField> {
    ScalarField::new(grid, read_body(r, grid, FieldKind::Real)?)
}

pub fn write_complex<W: Write>(w: &mut W, f: &ComplexField) -> Result<()> {
    write_raw(w, header_for(f.grid(), FieldKind::Complex), complex_doubles(f.values()))
}

pub fn read_complex<R: Read>(r: &mut R, grid: &Grid) -> Result<ComplexField> {
    ComplexField::new(grid, pairs(&read_body(r, grid, FieldKind::Complex)?))
}

pub fn write_hermitian<W: Write>(w: &mut W, f: &HermitianField) -> Result<()> {
    write_raw(w, header_for(f.grid(), FieldKind::Hermitian), complex_doubles(f.data()))
}

pub fn read_hermitian<R: Read>(r: &mut R, grid: &Grid) -> Result<HermitianField> {
    HermitianField::new(grid, pairs(&read_body(r, grid, FieldKind::Hermitian)?))
}

/// Write `bytes` to `path` via a temporary sibling file and rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Format(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn save_scalar(path: &Path, f: &ScalarField) -> Result<()> {
    let mut buf = Vec::new();
    write_scalar(&mut buf, f)?;
    write_atomic(path, &buf)
}

pub fn save_hermitian(path: &Path, f: &HermitianField) -> Result<()> {
    let mut buf = Vec::new();
    write_hermitian(&mut buf, f)?;
    write_atomic(path, &buf)
}

pub fn load_scalar(path: &Path, grid: &Grid) -> Result<ScalarField> {
    read_scalar(&mut std::io::BufReader::new(std::fs::File::open(path)?), grid)
}

pub fn load_hermitian(path: &Path, grid: &Grid) -> Result<HermitianField> {
    read_hermitian(&mut std::io::BufReader::new(std::fs::File::open(path)?), grid)
}
