//! On-disk raster formats.
//!
//! Both formats share a three-line ASCII header terminated by `\n`:
//!
//! ```text
//! SEGMASK1            DEPTH16
//! <width> <height>    <width> <height>
//! classes <n>         units mm
//! ```
//!
//! followed by the row-major payload: one byte per pixel for `SEGMASK1`,
//! one little-endian `u16` (millimetres, 0 = no reading) per pixel for
//! `DEPTH16`. See `docs/formats.md` for annotated hex dumps.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::write_atomic;

pub const MASK_MAGIC: &str = "SEGMASK1";
pub const DEPTH_MAGIC: &str = "DEPTH16";

/// Decoded `SEGMASK1` payload before class validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassRaster {
    pub width: usize,
    pub height: usize,
    pub classes: u8,
    pub data: Vec<u8>,
}

/// Decoded `DEPTH16` payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthRaster {
    pub width: usize,
    pub height: usize,
    pub millimetres: Vec<u16>,
}

struct Header<'a> {
    width: usize,
    height: usize,
    third: &'a str,
    payload: &'a [u8],
}

fn split_line(buf: &[u8]) -> Result<(&str, &[u8])> {
    let end = buf
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Format("truncated header".into()))?;
    let line = std::str::from_utf8(&buf[..end])
        .map_err(|_| Error::Format("header is not ASCII".into()))?;
    Ok((line.trim_end_matches('\r'), &buf[end + 1..]))
}

fn parse_header<'a>(buf: &'a [u8], magic: &str) -> Result<Header<'a>> {
    let (line, rest) = split_line(buf)?;
    if line != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {magic:?}",
            line.chars().take(16).collect::<String>()
        )));
    }
    let (line, rest) = split_line(rest)?;
    let mut dims = line.split_ascii_whitespace().map(str::parse::<usize>);
    let (width, height) = match (dims.next(), dims.next(), dims.next()) {
        (Some(Ok(w)), Some(Ok(h)), None) if w > 0 && h > 0 => (w, h),
        _ => return Err(Error::Format(format!("bad dimension line {line:?}"))),
    };
    let (third, payload) = split_line(rest)?;
    Ok(Header {
        width,
        height,
        third,
        payload,
    })
}

fn pixel_count(width: usize, height: usize) -> Result<usize> {
    width
        .checked_mul(height)
        .ok_or_else(|| Error::Format(format!("dimensions {width}x{height} overflow")))
}

/// Parses a `SEGMASK1` buffer. Class values are not range-checked here.
pub fn decode_class_raster(buf: &[u8]) -> Result<ClassRaster> {
    let header = parse_header(buf, MASK_MAGIC)?;
    let classes = header
        .third
        .strip_prefix("classes ")
        .and_then(|n| n.trim().parse::<u8>().ok())
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Format(format!("bad classes line {:?}", header.third)))?;
    let n = pixel_count(header.width, header.height)?;
    if header.payload.len() != n {
        return Err(Error::DimensionMismatch {
            expected: format!("{n} payload bytes for {}x{}", header.width, header.height),
            actual: format!("{} bytes", header.payload.len()),
        });
    }
    Ok(ClassRaster {
        width: header.width,
        height: header.height,
        classes,
        data: header.payload.to_vec(),
    })
}

pub fn encode_class_raster(raster: &ClassRaster) -> Vec<u8> {
    let mut out = Vec::with_capacity(raster.data.len() + 32);
    write!(
        out,
        "{MASK_MAGIC}\n{} {}\nclasses {}\n",
        raster.width, raster.height, raster.classes
    )
    .expect("write to Vec");
    out.extend_from_slice(&raster.data);
    out
}

pub fn decode_depth_raster(buf: &[u8]) -> Result<DepthRaster> {
    let header = parse_header(buf, DEPTH_MAGIC)?;
    if header.third.trim() != "units mm" {
        return Err(Error::Format(format!(
            "bad units line {:?}, expected \"units mm\"",
            header.third
        )));
    }
    let n = pixel_count(header.width, header.height)?;
    if header.payload.len() != 2 * n {
        return Err(Error::DimensionMismatch {
            expected: format!("{} payload bytes for {}x{}", 2 * n, header.width, header.height),
            actual: format!("{} bytes", header.payload.len()),
        });
    }
    let millimetres = header
        .payload
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]))
        .collect();
    Ok(DepthRaster {
        width: header.width,
        height: header.height,
        millimetres,
    })
}

pub fn encode_depth_raster(raster: &DepthRaster) -> Vec<u8> {
    let mut out = Vec::with_capacity(2 * raster.millimetres.len() + 32);
    write!(
        out,
        "{DEPTH_MAGIC}\n{} {}\nunits mm\n",
        raster.width, raster.height
    )
    .expect("write to Vec");
    for v in &raster.millimetres {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn read_class_raster(path: &Path) -> Result<ClassRaster> {
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_class_raster(&buf)
}

pub fn read_depth_raster(path: &Path) -> Result<DepthRaster> {
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_depth_raster(&buf)
}

pub fn write_class_raster(path: &Path, raster: &ClassRaster) -> Result<()> {
    write_atomic(path, &encode_class_raster(raster))
}

pub fn write_depth_raster(path: &Path, raster: &DepthRaster) -> Result<()> {
    write_atomic(path, &encode_depth_raster(raster))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_bytes_are_exact() {
        let r = ClassRaster {
            width: 2,
            height: 1,
            classes: 5,
            data: vec![0, 4],
        };
        assert_eq!(encode_class_raster(&r), b"SEGMASK1\n2 1\nclasses 5\n\x00\x04");
        let d = DepthRaster {
            width: 1,
            height: 1,
            millimetres: vec![1200],
        };
        assert_eq!(encode_depth_raster(&d), b"DEPTH16\n1 1\nunits mm\n\xb0\x04");
    }

    #[test]
    fn rejects_bad_headers() {
        assert!(matches!(
            decode_class_raster(b"SEGMASK2\n1 1\nclasses 5\n\x00"),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            decode_class_raster(b"SEGMASK1\n1 x\nclasses 5\n\x00"),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            decode_class_raster(b"SEGMASK1\n0 4\nclasses 5\n"),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            decode_class_raster(b"SEGMASK1\n1 1\n"),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            decode_depth_raster(b"DEPTH16\n1 1\nunits cm\n\x00\x00"),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn payload_length_must_match_header() {
        assert!(matches!(
            decode_class_raster(b"SEGMASK1\n2 2\nclasses 5\n\x00\x00\x00"),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            decode_depth_raster(b"DEPTH16\n1 1\nunits mm\n\x00"),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
