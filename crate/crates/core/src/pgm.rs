//! Binary PGM (`P5`, maxval 255) encoding and decoding.

use crate::error::{Error, Result};
use crate::image::GrayImage;

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn read_uint(&mut self, what: &str) -> Result<usize> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Parse(format!("expected {what} at byte {start}")));
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii digits");
        text.parse().map_err(|_| Error::Parse(format!("{what} out of range: {text}")))
    }
}

pub fn read_pgm(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::Parse("missing P5 magic number".into()));
    }
    let mut r = HeaderReader { bytes, pos: 2 };
    if !r.bytes.get(r.pos).is_some_and(|b| b.is_ascii_whitespace() || *b == b'#') {
        return Err(Error::Parse("magic number must be followed by whitespace".into()));
    }
    let width = r.read_uint("width")?;
    let height = r.read_uint("height")?;
    let maxval = r.read_uint("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::Parse(format!("zero image dimension {width}x{height}")));
    }
    if maxval != 255 {
        return Err(Error::UnsupportedFormat(format!("maxval {maxval} (only 255 is supported)")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    match r.bytes.get(r.pos) {
        Some(b) if b.is_ascii_whitespace() => r.pos += 1,
        _ => return Err(Error::Parse("header must end with a single whitespace byte".into())),
    }
    let n = width.checked_mul(height).ok_or_else(|| Error::Parse("image dimensions overflow".into()))?;
    let payload = &bytes[r.pos..];
    if payload.len() < n {
        return Err(Error::Parse(format!("truncated pixel data: expected {n} bytes, found {}", payload.len())));
    }
    GrayImage::new(width, height, payload[..n].to_vec())
}

/// Canonical encoding: `P5\n<width> <height>\n255\n` followed by the raw raster.
pub fn write_pgm(img: &GrayImage) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", img.width(), img.height());
    let mut out = Vec::with_capacity(header.len() + img.pixels().len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(img.pixels());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decodes_simple_file() {
        let mut bytes = b"P5 2 2 255\n".to_vec();
        bytes.extend_from_slice(&[0, 128, 255, 7]);
        let img = read_pgm(&bytes).unwrap();
        assert_eq!(img.dimensions(), (2, 2));
        assert_eq!(img.pixels(), &[0, 128, 255, 7]);
    }

    #[test]
    fn comments_are_ignored() {
        let mut plain = b"P5\n2 2\n255\n".to_vec();
        plain.extend_from_slice(&[0, 128, 255, 7]);
        let mut commented = b"P5\n# scanner A\n2 # width\n2\n255\n".to_vec();
        commented.extend_from_slice(&[0, 128, 255, 7]);
        assert_eq!(read_pgm(&plain).unwrap(), read_pgm(&commented).unwrap());
    }

    #[test]
    fn canonical_encoding() {
        let img = GrayImage::new(1, 1, vec![0]).unwrap();
        assert_eq!(write_pgm(&img), b"P5\n1 1\n255\n\x00");
        let img = GrayImage::new(2, 1, vec![255, 0]).unwrap();
        assert_eq!(write_pgm(&img), b"P5\n2 1\n255\n\xff\x00");
    }

    #[test]
    fn error_kinds() {
        assert!(matches!(read_pgm(b"P2 1 1 255\n\x00"), Err(Error::Parse(_))));
        assert!(matches!(read_pgm(b"P5 1 1 65535\n\x00\x00"), Err(Error::UnsupportedFormat(_))));
        assert!(matches!(read_pgm(b"P5 2 2 255\n\x00\x01"), Err(Error::Parse(_))));
        assert!(matches!(read_pgm(b"P5 2 x 255\n"), Err(Error::Parse(_))));
        assert!(matches!(read_pgm(b""), Err(Error::Parse(_))));
    }

    #[test]
    fn pixel_payload_may_start_with_whitespace_byte() {
        // 0x0a and 0x20 as first pixels must not be swallowed by the header.
        let img = GrayImage::new(2, 1, vec![b'\n', b' ']).unwrap();
        assert_eq!(read_pgm(&write_pgm(&img)).unwrap(), img);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn round_trip((w, h, px) in (1usize..20, 1usize..20)
                .prop_flat_map(|(w, h)| (Just(w), Just(h), prop::collection::vec(any::<u8>(), w * h))))
            {
                let img = GrayImage::new(w, h, px).unwrap();
                let bytes = write_pgm(&img);
                let back = read_pgm(&bytes).unwrap();
                prop_assert_eq!(&back, &img);
                prop_assert_eq!(write_pgm(&back), bytes);
            }
        }
    }
}
