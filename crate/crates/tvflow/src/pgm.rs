//! Grayscale Netpbm images (P2 plain and P5 raw).

use std::fs;
use std::path::Path;

use tvflow_core::{Grid, ScalarField};

#[derive(Debug, thiserror::Error)]
pub enum PgmError {
    #[error("malformed PGM: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn bad(msg: impl Into<String>) -> PgmError {
    PgmError::Malformed(msg.into())
}

/// A grayscale image with samples in `[0, maxval]`, rows top to bottom.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageDatum {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub pixels: Vec<u16>,
}

impl ImageDatum {
    pub fn new(width: usize, height: usize, maxval: u16, pixels: Vec<u16>) -> Result<Self, PgmError> {
        if width == 0 || height == 0 {
            return Err(bad("empty image"));
        }
        if maxval == 0 {
            return Err(bad("maxval must be positive"));
        }
        if pixels.len() != width * height {
            return Err(bad(format!("{} samples for a {width}x{height} image", pixels.len())));
        }
        if let Some(p) = pixels.iter().find(|&&p| p > maxval) {
            return Err(bad(format!("sample {p} exceeds maxval {maxval}")));
        }
        Ok(ImageDatum {
            width,
            height,
            maxval,
            pixels,
        })
    }

    /// Unit pixel spacing: the grid is `width × height` on `[0,width]×[0,height]`.
    /// Fails for images narrower than two pixels in either direction.
    pub fn grid(&self) -> Result<Grid, PgmError> {
        Grid::new_2d(self.width, self.height, self.width as f64, self.height as f64)
            .map_err(|_| bad(format!("a {}x{} image is too small for a grid", self.width, self.height)))
    }

    /// Samples divided by `maxval`.
    pub fn to_field(&self) -> Result<ScalarField, PgmError> {
        let m = f64::from(self.maxval);
        Ok(ScalarField::new(self.grid()?, self.pixels.iter().map(|&p| f64::from(p) / m).collect()).expect("finite samples"))
    }

    /// Clamps `u` to `[0, 1]` and quantises to `maxval` levels.
    pub fn from_field(u: &ScalarField, maxval: u16) -> Result<Self, PgmError> {
        let g = u.grid();
        if g.dim() != 2 {
            return Err(bad("images are two-dimensional"));
        }
        let m = f64::from(maxval);
        let pixels = u.values().iter().map(|v| (v.clamp(0.0, 1.0) * m).round() as u16).collect();
        ImageDatum::new(g.counts()[0], g.counts()[1], maxval, pixels)
    }

    pub fn mean_and_variance(&self) -> (f64, f64) {
        let m = f64::from(self.maxval);
        let n = self.pixels.len() as f64;
        let mean = self.pixels.iter().map(|&p| f64::from(p) / m).sum::<f64>() / n;
        let var = self.pixels.iter().map(|&p| (f64::from(p) / m - mean).powi(2)).sum::<f64>() / n;
        (mean, var)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    /// Skips whitespace and `#` comments.
    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n' && c != b'\r') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32, PgmError> {
        self.skip_space();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(bad(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(format!("{what} out of range")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<ImageDatum, PgmError> {
    let binary = match bytes.get(..2) {
        Some(b"P5") => true,
        Some(b"P2") => false,
        _ => return Err(bad("expected magic P2 or P5")),
    };
    let mut c = Cursor { bytes, pos: 2 };
    let width = c.number("width")? as usize;
    let height = c.number("height")? as usize;
    let maxval = c.number("maxval")?;
    let maxval = u16::try_from(maxval).ok().filter(|&m| m > 0).ok_or_else(|| bad("maxval must lie in 1..=65535"))?;
    let count = width.checked_mul(height).ok_or_else(|| bad("image too large"))?;
    let pixels = if binary {
        if !c.bytes.get(c.pos).is_some_and(u8::is_ascii_whitespace) {
            return Err(bad("missing separator before raster"));
        }
        let raster = &bytes[c.pos + 1..];
        let size = if maxval < 256 { 1 } else { 2 };
        if raster.len() < count * size {
            return Err(bad(format!("raster has {} bytes, need {}", raster.len(), count * size)));
        }
        if size == 1 {
            raster[..count].iter().map(|&b| u16::from(b)).collect()
        } else {
            raster[..2 * count].chunks_exact(2).map(|p| u16::from_be_bytes([p[0], p[1]])).collect()
        }
    } else {
        (0..count)
            .map(|_| {
                let v = c.number("sample")?;
                u16::try_from(v).map_err(|_| bad(format!("sample {v} out of range")))
            })
            .collect::<Result<Vec<_>, _>>()?
    };
    ImageDatum::new(width, height, maxval, pixels)
}

/// Raw (P5) encoding.
pub fn encode(img: &ImageDatum) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n{}\n", img.width, img.height, img.maxval).into_bytes();
    if img.maxval < 256 {
        out.extend(img.pixels.iter().map(|&p| p as u8));
    } else {
        out.extend(img.pixels.iter().flat_map(|p| p.to_be_bytes()));
    }
    out
}

/// Plain (P2) encoding, mainly for fixtures.
pub fn encode_plain(img: &ImageDatum) -> Vec<u8> {
    let mut out = format!("P2\n{} {}\n{}\n", img.width, img.height, img.maxval);
    for row in img.pixels.chunks(img.width) {
        let line: Vec<String> = row.iter().map(u16::to_string).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out.into_bytes()
}

pub fn read_pgm(path: &Path) -> Result<ImageDatum, PgmError> {
    decode(&fs::read(path)?)
}

pub fn write_pgm(path: &Path, img: &ImageDatum) -> std::io::Result<()> {
    fs::write(path, encode(img))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ImageDatum {
        ImageDatum::new(3, 2, 300, vec![0, 1, 2, 299, 300, 150]).unwrap()
    }

    #[test]
    fn wide_samples_round_trip_in_both_encodings() {
        let img = sample();
        assert_eq!(decode(&encode(&img)).unwrap(), img);
        assert_eq!(decode(&encode_plain(&img)).unwrap(), img);
    }

    #[test]
    fn comments_in_the_header_are_skipped() {
        let img = decode(b"P2 # made by hand\n2 1 # size\n# max next\n7\n3 7\n").unwrap();
        assert_eq!((img.width, img.height, img.maxval, img.pixels), (2, 1, 7, vec![3, 7]));
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        for bytes in [&b"P6\n1 1\n255\n\0"[..], b"P5\n2 2\n255\n\0\0", b"P2\n1 1\n7\n8\n", b"P2\n1 1\n0\n0\n", b"P5 1"] {
            assert!(matches!(decode(bytes), Err(PgmError::Malformed(_))), "{:?}", String::from_utf8_lossy(bytes));
        }
    }

    #[test]
    fn field_conversion_clamps_and_quantises() {
        let img = sample();
        assert_eq!(ImageDatum::from_field(&img.to_field().unwrap(), 300).unwrap(), img);
        let g = Grid::new_2d(2, 2, 2.0, 2.0).unwrap();
        let u = ScalarField::new(g, vec![-0.5, 1.5, 0.5, 1.0]).unwrap();
        assert_eq!(ImageDatum::from_field(&u, 255).unwrap().pixels, vec![0, 255, 128, 255]);
        let thin = ImageDatum::new(1, 4, 255, vec![0; 4]).unwrap();
        assert!(thin.to_field().is_err());
    }
}
