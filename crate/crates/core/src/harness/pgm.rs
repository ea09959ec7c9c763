//! 8-bit binary PGM (`P5`) images, scaled to `[0, 1]` on load.

use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::parse("pgm", "truncated header"));
    }
    Ok(&bytes[start..*pos])
}

fn header_number(bytes: &[u8], pos: &mut usize) -> Result<usize> {
    let tok = next_token(bytes, pos)?;
    std::str::from_utf8(tok)
        .ok()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::parse("pgm", "bad header number"))
}

pub fn decode_pgm(bytes: &[u8]) -> Result<Array2<f64>> {
    let mut pos = 0;
    if next_token(bytes, &mut pos)? != b"P5" {
        return Err(Error::parse("pgm", "only binary P5 images are supported"));
    }
    let width = header_number(bytes, &mut pos)?;
    let height = header_number(bytes, &mut pos)?;
    let maxval = header_number(bytes, &mut pos)?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::parse("pgm", format!("unsupported maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let raster = bytes
        .get(pos..pos + width * height)
        .ok_or_else(|| Error::parse("pgm", "raster shorter than header announces"))?;
    let scale = maxval as f64;
    Ok(Array2::from_shape_fn((height, width), |(r, c)| raster[r * width + c] as f64 / scale))
}

/// Encodes `image` (values clamped to `[0, 1]`) with maxval 255.
pub fn encode_pgm(image: &Array2<f64>) -> Vec<u8> {
    let (h, w) = image.dim();
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(image.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    out
}

pub fn read_pgm(path: &Path) -> Result<Array2<f64>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes)
}

pub fn write_pgm(path: &Path, image: &Array2<f64>) -> Result<()> {
    std::fs::write(path, encode_pgm(image)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_on_grid_values() {
        let img = Array2::from_shape_fn((3, 5), |(r, c)| ((r * 5 + c) * 17) as f64 / 255.0);
        let back = decode_pgm(&encode_pgm(&img)).unwrap();
        assert!(crate::linalg::max_abs_diff(&img, &back) < 1e-15);
    }

    #[test]
    fn header_comments_and_maxval() {
        let mut bytes = b"P5\n# comment\n2 1\n# another\n15\n".to_vec();
        bytes.extend([0u8, 15]);
        let img = decode_pgm(&bytes).unwrap();
        assert_eq!(img.dim(), (1, 2));
        assert_eq!(img[[0, 1]], 1.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(decode_pgm(b"P2\n1 1\n255\n0").is_err());
        assert!(decode_pgm(b"P5\n2 2\n255\n\x00").is_err());
        assert!(decode_pgm(b"P5\n1 1\n0\n\x00").is_err());
    }
}
