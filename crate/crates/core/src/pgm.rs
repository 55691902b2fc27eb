//! Portable GrayMap (PGM) reading and writing, plus field snapshots.
//!
//! A snapshot is a binary P5 image and a plain-text sidecar holding the
//! affine gray mapping `value = min + gray / maxval * (max - min)` together
//! with the grid geometry, so a quantized field can be read back exactly.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::field::{Domain, ScalarField};
use crate::Vec2;

/// Gray levels used in snapshot images.
pub const SNAPSHOT_MAXVAL: u16 = 255;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    maxval: u16,
    pixels: Vec<u16>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, maxval: u16, pixels: Vec<u16>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Pgm("zero image dimension".into()));
        }
        if maxval == 0 {
            return Err(Error::Pgm("maxval must be at least 1".into()));
        }
        if pixels.len() != width * height {
            return Err(Error::Pgm(format!(
                "expected {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        if let Some(p) = pixels.iter().find(|&&p| p > maxval) {
            return Err(Error::Pgm(format!("pixel value {p} exceeds maxval {maxval}")));
        }
        Ok(GrayImage {
            width,
            height,
            maxval,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn maxval(&self) -> u16 {
        self.maxval
    }

    pub fn pixels(&self) -> &[u16] {
        &self.pixels
    }

    /// Pixel at column `x`, row `y` (row 0 at the top).
    pub fn pixel(&self, x: usize, y: usize) -> u16 {
        self.pixels[y * self.width + x]
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path)?;
        Self::parse(&bytes).map_err(|e| match e {
            Error::Pgm(msg) => Error::Pgm(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        let magic = cur.token()?;
        let binary = match magic {
            b"P2" => false,
            b"P5" => true,
            other => {
                return Err(Error::Pgm(format!(
                    "unsupported magic number {:?} (expected P2 or P5)",
                    String::from_utf8_lossy(other)
                )))
            }
        };
        let width = cur.number("width")?;
        let height = cur.number("height")?;
        let maxval = cur.number("maxval")?;
        if maxval == 0 || maxval > u16::MAX as u64 {
            return Err(Error::Pgm(format!("maxval {maxval} outside 1..=65535")));
        }
        let (width, height, maxval) = (width as usize, height as usize, maxval as u16);
        let count = width
            .checked_mul(height)
            .ok_or_else(|| Error::Pgm("image dimensions overflow".into()))?;
        let mut pixels = Vec::with_capacity(count);
        if binary {
            // Exactly one whitespace byte separates the header from the raster.
            match bytes.get(cur.pos) {
                Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
                _ => return Err(Error::Pgm("missing whitespace before raster".into())),
            }
            let raster = &bytes[cur.pos..];
            let wide = maxval > 255;
            let need = count * if wide { 2 } else { 1 };
            if raster.len() < need {
                return Err(Error::Pgm(format!(
                    "raster truncated: need {need} bytes, found {}",
                    raster.len()
                )));
            }
            if wide {
                pixels.extend(raster[..need].chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])));
            } else {
                pixels.extend(raster[..need].iter().map(|&b| b as u16));
            }
        } else {
            for _ in 0..count {
                let v = cur.number("pixel")?;
                if v > maxval as u64 {
                    return Err(Error::Pgm(format!("pixel value {v} exceeds maxval {maxval}")));
                }
                pixels.push(v as u16);
            }
        }
        Self::new(width, height, maxval, pixels)
    }

    pub fn to_p5(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n{}\n", self.width, self.height, self.maxval).into_bytes();
        if self.maxval > 255 {
            for p in &self.pixels {
                out.extend_from_slice(&p.to_be_bytes());
            }
        } else {
            out.extend(self.pixels.iter().map(|&p| p as u8));
        }
        out
    }

    pub fn to_p2(&self) -> Vec<u8> {
        let mut out = format!("P2\n{} {}\n{}\n", self.width, self.height, self.maxval);
        for row in self.pixels.chunks(self.width) {
            let line: Vec<String> = row.iter().map(|p| p.to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out.into_bytes()
    }

    pub fn write_p5(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut file = fs::File::create(path)?;
        file.write_all(&self.to_p5())?;
        Ok(())
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<&'a [u8]> {
        self.skip_space_and_comments();
        let start = self.pos;
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() || b == b'#' {
                break;
            }
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Pgm("unexpected end of file".into()));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<u64> {
        let tok = self.token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<u64>().ok())
            .ok_or_else(|| Error::Pgm(format!("bad {what}: {:?}", String::from_utf8_lossy(tok))))
    }
}

/// Path of the sidecar belonging to a snapshot image.
pub fn sidecar_path(image: &Path) -> PathBuf {
    image.with_extension("txt")
}

/// Quantizes a field to 8-bit gray with its own min/max.
pub fn quantize(field: &ScalarField) -> (GrayImage, f64, f64) {
    let (nx, ny) = field.resolution();
    let (min, max) = field.min_max();
    let span = max - min;
    let m = SNAPSHOT_MAXVAL as f64;
    let mut pixels = vec![0u16; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let v = field.get(i, j);
            let g = if span > 0.0 {
                ((v - min) / span * m).round().clamp(0.0, m) as u16
            } else {
                0
            };
            pixels[(ny - 1 - j) * nx + i] = g;
        }
    }
    let image = GrayImage::new(nx, ny, SNAPSHOT_MAXVAL, pixels).expect("dimensions come from a valid field");
    (image, min, max)
}

/// Writes `field` as a P5 image plus sidecar.
pub fn write_snapshot(field: &ScalarField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (image, min, max) = quantize(field);
    image.write_p5(path)?;
    let d = field.domain();
    let mut side = String::new();
    writeln!(side, "# value = min + gray / maxval * (max - min)").unwrap();
    writeln!(side, "min = {min:?}").unwrap();
    writeln!(side, "max = {max:?}").unwrap();
    writeln!(side, "maxval = {}", image.maxval()).unwrap();
    writeln!(side, "width = {}", image.width()).unwrap();
    writeln!(side, "height = {}", image.height()).unwrap();
    writeln!(side, "lower_x = {:?}", d.lower().x).unwrap();
    writeln!(side, "lower_y = {:?}", d.lower().y).unwrap();
    writeln!(side, "length_x = {:?}", d.size().x).unwrap();
    writeln!(side, "length_y = {:?}", d.size().y).unwrap();
    fs::write(sidecar_path(path), side)?;
    Ok(())
}

/// Reads a snapshot written by [`write_snapshot`] back into a field of
/// quantized values.
pub fn read_snapshot(path: impl AsRef<Path>) -> Result<ScalarField> {
    let path = path.as_ref();
    let image = GrayImage::read(path)?;
    let text = fs::read_to_string(sidecar_path(path))?;
    let get = |key: &str| -> Result<f64> {
        text.lines()
            .filter(|l| !l.trim_start().starts_with('#'))
            .filter_map(|l| l.split_once('='))
            .find(|(k, _)| k.trim() == key)
            .and_then(|(_, v)| v.trim().parse::<f64>().ok())
            .ok_or_else(|| Error::Pgm(format!("sidecar is missing `{key}`")))
    };
    let (min, max) = (get("min")?, get("max")?);
    let maxval = get("maxval")?;
    if get("width")? as usize != image.width() || get("height")? as usize != image.height() {
        return Err(Error::Pgm("sidecar resolution does not match image".into()));
    }
    if maxval as u16 != image.maxval() {
        return Err(Error::Pgm("sidecar maxval does not match image".into()));
    }
    let domain = Domain::new(
        Vec2::new(get("lower_x")?, get("lower_y")?),
        Vec2::new(get("length_x")?, get("length_y")?),
    )?;
    let (nx, ny) = (image.width(), image.height());
    let m = image.maxval();
    let mut samples = vec![0.0; nx * ny];
    for row in 0..ny {
        for i in 0..nx {
            let g = image.pixel(i, row);
            samples[(ny - 1 - row) * nx + i] = if g == m {
                max
            } else {
                min + g as f64 / m as f64 * (max - min)
            };
        }
    }
    ScalarField::new(domain, nx, ny, samples)
}
