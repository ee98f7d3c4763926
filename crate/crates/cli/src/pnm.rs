//! Binary netpbm codec: `P5` graymaps and `P6` pixmaps with maxval 255.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use depthcrypt::{ColorImage, PlaneImage};

#[derive(Debug, thiserror::Error)]
pub enum PnmError {
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt header: {0}")]
    CorruptHeader(String),
    #[error("truncated pixel data: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A decoded file: one plane for `P5`, three for `P6`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Image {
    Gray(PlaneImage),
    Color(ColorImage),
}

impl Image {
    pub fn width(&self) -> usize {
        match self {
            Image::Gray(p) => p.width(),
            Image::Color(c) => c.width(),
        }
    }

    pub fn height(&self) -> usize {
        match self {
            Image::Gray(p) => p.height(),
            Image::Color(c) => c.height(),
        }
    }

    pub fn planes(&self) -> Vec<&PlaneImage> {
        match self {
            Image::Gray(p) => vec![p],
            Image::Color(c) => c.channels().iter().collect(),
        }
    }

    /// Rebuilds an image of the same kind from one or three planes.
    pub fn from_planes(mut planes: Vec<PlaneImage>) -> depthcrypt::Result<Image> {
        match planes.len() {
            1 => Ok(Image::Gray(planes.pop().expect("one plane"))),
            3 => {
                let b = planes.pop().expect("three planes");
                let g = planes.pop().expect("three planes");
                let r = planes.pop().expect("three planes");
                Ok(Image::Color(depthcrypt::image::merge_channels(r, g, b)?))
            }
            n => panic!("an image has one or three planes, not {n}"),
        }
    }
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space(&mut self) {
        while let Some(&c) = self.bytes.get(self.pos) {
            if c == b'#' {
                while self
                    .bytes
                    .get(self.pos)
                    .is_some_and(|&c| c != b'\n' && c != b'\r')
                {
                    self.pos += 1;
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize, PnmError> {
        self.skip_space();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| PnmError::CorruptHeader(format!("missing or invalid {what}")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Image, PnmError> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        Some(m) if m[0] == b'P' => {
            return Err(PnmError::UnsupportedFormat(format!(
                "netpbm variant {}; only binary P5 and P6 are read",
                String::from_utf8_lossy(m)
            )))
        }
        _ => return Err(PnmError::UnsupportedFormat("not a netpbm file".into())),
    };
    let mut h = Header { bytes, pos: 2 };
    if !h
        .bytes
        .get(2)
        .is_some_and(|c| c.is_ascii_whitespace() || *c == b'#')
    {
        return Err(PnmError::CorruptHeader("no separator after magic".into()));
    }
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval = h.number("maxval")?;
    if maxval != 255 {
        return Err(PnmError::UnsupportedFormat(format!(
            "maxval {maxval}; only 8-bit (255) images are supported"
        )));
    }
    if width == 0 || height == 0 {
        return Err(PnmError::CorruptHeader(format!(
            "empty image {width}x{height}"
        )));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if !h.bytes.get(h.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(PnmError::CorruptHeader(
            "no separator before pixel data".into(),
        ));
    }
    let data = &bytes[h.pos + 1..];
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| PnmError::CorruptHeader(format!("dimensions {width}x{height} overflow")))?;
    if data.len() < expected {
        return Err(PnmError::Truncated {
            expected,
            actual: data.len(),
        });
    }
    let data = &data[..expected];
    let image = if channels == 1 {
        Image::Gray(PlaneImage::new(width, height, data.to_vec()).expect("size checked"))
    } else {
        Image::Color(ColorImage::from_interleaved(width, height, data).expect("size checked"))
    };
    Ok(image)
}

pub fn encode(img: &Image) -> Vec<u8> {
    let (magic, raster) = match img {
        Image::Gray(p) => ("P5", p.as_slice().to_vec()),
        Image::Color(c) => ("P6", c.to_interleaved()),
    };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(&raster);
    out
}

pub fn read_image(path: &Path) -> Result<Image, PnmError> {
    decode(&fs::read(path)?)
}

pub fn write_image(path: &Path, img: &Image) -> Result<(), PnmError> {
    let mut file = io::BufWriter::new(fs::File::create(path)?);
    file.write_all(&encode(img))?;
    file.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &[u8] =
        b"P6\n# 2x2 test card\n2 2\n255\n\xff\x00\x00\x00\xff\x00\x00\x00\xff\x10\x20\x30";

    #[test]
    fn decodes_hand_built_fixture() {
        let Image::Color(c) = decode(FIXTURE).unwrap() else {
            panic!("expected a colour image")
        };
        assert_eq!((c.width(), c.height()), (2, 2));
        assert_eq!(
            c.to_interleaved(),
            vec![255, 0, 0, 0, 255, 0, 0, 0, 255, 16, 32, 48]
        );
        assert_eq!(c.channel(0).as_slice(), &[255, 0, 0, 16]);
    }

    #[test]
    fn encode_decode_round_trip() {
        let gray = Image::Gray(PlaneImage::from_fn(5, 3, |x, y| (x * 50 + y) as u8).unwrap());
        assert_eq!(decode(&encode(&gray)).unwrap(), gray);
        let color = decode(FIXTURE).unwrap();
        assert_eq!(decode(&encode(&color)).unwrap(), color);
        assert_eq!(
            encode(&color),
            b"P6\n2 2\n255\n\xff\x00\x00\x00\xff\x00\x00\x00\xff\x10\x20\x30"
        );
    }

    #[test]
    fn raster_may_start_with_whitespace_bytes() {
        let bytes = b"P5 2 1 255\n\n\x20";
        let Image::Gray(p) = decode(bytes).unwrap() else {
            panic!()
        };
        assert_eq!(p.as_slice(), b"\n ");
    }

    #[test]
    fn rejects_unsupported_and_corrupt_files() {
        assert!(matches!(
            decode(b"P6\n1 1\n65535\n\0\0\0\0\0\0"),
            Err(PnmError::UnsupportedFormat(_))
        ));
        assert!(matches!(
            decode(b"P3\n1 1\n255\n0 0 0\n"),
            Err(PnmError::UnsupportedFormat(_))
        ));
        assert!(matches!(
            decode(b"\x89PNG"),
            Err(PnmError::UnsupportedFormat(_))
        ));
        assert!(matches!(
            decode(b"P6\nx 1\n255\n"),
            Err(PnmError::CorruptHeader(_))
        ));
        assert!(matches!(
            decode(b"P5\n0 4\n255\n"),
            Err(PnmError::CorruptHeader(_))
        ));
        assert!(matches!(
            decode(b"P5\n2 2\n255"),
            Err(PnmError::CorruptHeader(_))
        ));
        assert!(matches!(
            decode(b"P5\n2 2\n255\n\x01\x02"),
            Err(PnmError::Truncated {
                expected: 4,
                actual: 2
            })
        ));
    }
}
