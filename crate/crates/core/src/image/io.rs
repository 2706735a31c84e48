//! Netpbm (P5/P6) and PNG reading, PGM writing.

use std::fs;
use std::path::Path;

use super::{to_grayscale, GrayImage, RgbImage};
use crate::error::{Error, Result};

/// Serializes as binary PGM (`P5`, maxval 255).
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.to_u8());
    out
}

pub fn write_pgm(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(img)).map_err(|e| Error::io(path, e))
}

struct Header {
    magic: [u8; 2],
    width: usize,
    height: usize,
    maxval: usize,
    offset: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(Error::Decode("not a netpbm file".into()));
    }
    let magic = [bytes[0], bytes[1]];
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while !matches!(bytes.get(pos), None | Some(b'\n')) {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while matches!(bytes.get(pos), Some(b) if b.is_ascii_digit()) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Decode("truncated netpbm header".into()));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Decode("bad netpbm header field".into()))?;
    }
    // exactly one whitespace byte before the raster
    if !matches!(bytes.get(pos), Some(b) if b.is_ascii_whitespace()) {
        return Err(Error::Decode("missing separator after netpbm header".into()));
    }
    Ok(Header {
        magic,
        width: fields[0],
        height: fields[1],
        maxval: fields[2],
        offset: pos + 1,
    })
}

fn raster<'a>(bytes: &'a [u8], h: &Header, channels: usize) -> Result<&'a [u8]> {
    if h.maxval != 255 {
        return Err(Error::Decode(format!("unsupported maxval {}", h.maxval)));
    }
    if h.width == 0 || h.height == 0 {
        return Err(Error::Decode("zero-sized netpbm image".into()));
    }
    let n = h.width * h.height * channels;
    bytes
        .get(h.offset..h.offset + n)
        .ok_or_else(|| Error::Decode("truncated netpbm raster".into()))
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let h = parse_header(bytes)?;
    if &h.magic != b"P5" {
        return Err(Error::Decode("expected P5 magic".into()));
    }
    GrayImage::from_u8(h.width, h.height, raster(bytes, &h, 1)?)
}

pub fn decode_ppm(bytes: &[u8]) -> Result<RgbImage> {
    let h = parse_header(bytes)?;
    if &h.magic != b"P6" {
        return Err(Error::Decode("expected P6 magic".into()));
    }
    Ok(RgbImage {
        width: h.width,
        height: h.height,
        data: raster(bytes, &h, 3)?.to_vec(),
    })
}

fn decode_png(bytes: &[u8]) -> Result<GrayImage> {
    let dynamic = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| Error::Decode(e.to_string()))?;
    if dynamic.color().has_color() {
        let rgb = dynamic.to_rgb8();
        let (w, h) = rgb.dimensions();
        to_grayscale(&RgbImage {
            width: w as usize,
            height: h as usize,
            data: rgb.into_raw(),
        })
    } else {
        let g = dynamic.to_luma8();
        let (w, h) = g.dimensions();
        GrayImage::from_u8(w as usize, h as usize, g.as_raw())
    }
}

/// Decodes PGM, PPM (converted to luma) or PNG by sniffing the leading bytes.
pub fn decode_gray(bytes: &[u8]) -> Result<GrayImage> {
    match bytes {
        [b'P', b'5', ..] => decode_pgm(bytes),
        [b'P', b'6', ..] => to_grayscale(&decode_ppm(bytes)?),
        [0x89, b'P', b'N', b'G', ..] => decode_png(bytes),
        _ => Err(Error::Decode("unrecognized image format".into())),
    }
}

pub fn read_gray(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_gray(&bytes)
}
