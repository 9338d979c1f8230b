//! Square grayscale rasters: binary target masks, dose maps, cure maps.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// What the pixel values of an [`Image2D`] mean, and which invariant they obey.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageKind {
    /// Binary geometry mask; every value is exactly 0 or 1.
    TargetMask,
    /// Accumulated exposure; values are non-negative.
    Dose,
    /// Degree-of-cure style response; values lie in [0, 1].
    ContinuousCure,
    /// Unconstrained finite values (filtered reconstructions may go negative).
    Real,
}

/// Row-major 2D raster of real values. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Image2D {
    width: usize,
    height: usize,
    kind: ImageKind,
    data: Vec<f64>,
}

impl Image2D {
    /// Builds an image, checking the value invariant for `kind`.
    pub fn new(width: usize, height: usize, kind: ImageKind, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::param("size", "image dimensions must be non-zero"));
        }
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                what: "image data length",
                expected: width * height,
                actual: data.len(),
            });
        }
        for &v in &data {
            if !v.is_finite() {
                return Err(Error::param("data", "pixel values must be finite"));
            }
            let ok = match kind {
                ImageKind::TargetMask => v == 0.0 || v == 1.0,
                ImageKind::Dose => v >= 0.0,
                ImageKind::ContinuousCure => (0.0..=1.0).contains(&v),
                ImageKind::Real => true,
            };
            if !ok {
                return Err(Error::param(
                    "data",
                    format!("value {v} violates the {kind:?} invariant"),
                ));
            }
        }
        Ok(Image2D {
            width,
            height,
            kind,
            data,
        })
    }

    /// Square all-zero image.
    pub fn zeros(n: usize, kind: ImageKind) -> Self {
        Image2D::new(n, n, kind, vec![0.0; n * n]).expect("zeros satisfy every kind")
    }

    /// Builds a square image from a function of (x, y) pixel coordinates.
    pub fn from_fn(n: usize, kind: ImageKind, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(n * n);
        for y in 0..n {
            for x in 0..n {
                data.push(f(x, y));
            }
        }
        Image2D::new(n, n, kind, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn kind(&self) -> ImageKind {
        self.kind
    }

    pub fn is_square(&self) -> bool {
        self.width == self.height
    }

    /// Side length; errors if the image is not square.
    pub fn side(&self) -> Result<usize> {
        if self.is_square() {
            Ok(self.width)
        } else {
            Err(Error::NonSquareImage {
                width: self.width,
                height: self.height,
            })
        }
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.data.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Reinterprets the buffer under a different kind, revalidating.
    pub fn with_kind(&self, kind: ImageKind) -> Result<Self> {
        Image2D::new(self.width, self.height, kind, self.data.clone())
    }

    /// Divides by the maximum so the peak is 1. An all-zero image stays zero.
    pub fn normalized_by_max(&self) -> Image2D {
        let m = self.max_value();
        let data = if m > 0.0 {
            self.data.iter().map(|v| v / m).collect()
        } else {
            self.data.clone()
        };
        Image2D {
            width: self.width,
            height: self.height,
            kind: ImageKind::Real,
            data,
        }
    }

    /// Fraction of pixels at which two masks disagree.
    pub fn mismatch_fraction(&self, other: &Image2D) -> Result<f64> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch {
                what: "mismatch_fraction images",
                expected: self.width * self.height,
                actual: other.width * other.height,
            });
        }
        let wrong = self
            .data
            .iter()
            .zip(&other.data)
            .filter(|(a, b)| a != b)
            .count();
        Ok(wrong as f64 / (self.width * self.height) as f64)
    }
}

/// 1 where `img > cut`, else 0.
pub fn binarize(img: &Image2D, cut: f64) -> Image2D {
    let data = img
        .as_slice()
        .iter()
        .map(|&v| if v > cut { 1.0 } else { 0.0 })
        .collect();
    Image2D {
        width: img.width,
        height: img.height,
        kind: ImageKind::TargetMask,
        data,
    }
}

/// Zero-pads a raster to the smallest enclosing square, centering the content.
fn pad_to_square(width: usize, height: usize, data: Vec<f64>) -> (usize, Vec<f64>) {
    if width == height {
        return (width, data);
    }
    let n = width.max(height);
    let x0 = (n - width) / 2;
    let y0 = (n - height) / 2;
    let mut out = vec![0.0; n * n];
    for y in 0..height {
        for x in 0..width {
            out[(y + y0) * n + (x + x0)] = data[y * width + x];
        }
    }
    (n, out)
}

/// Loads an 8-bit grayscale image (PGM P5 or PNG) as values/255, zero-padding
/// non-square inputs to the smallest enclosing square.
pub fn load_image(path: &Path) -> Result<Image2D> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase());
    match ext.as_deref() {
        Some("pgm") => load_pgm(path),
        Some("png") => load_png(path),
        _ => Err(Error::format(
            "image path",
            format!("unsupported extension in {}", path.display()),
        )),
    }
}

fn from_gray_bytes(width: usize, height: usize, bytes: &[u8]) -> Result<Image2D> {
    let data: Vec<f64> = bytes.iter().map(|&b| b as f64 / 255.0).collect();
    let (n, data) = pad_to_square(width, height, data);
    Image2D::new(n, n, ImageKind::Dose, data)
}

fn load_pgm(path: &Path) -> Result<Image2D> {
    let mut raw = Vec::new();
    fs::File::open(path)?.read_to_end(&mut raw)?;
    let mut pos = 0usize;

    // Header tokens are separated by whitespace; '#' starts a comment line.
    let mut next_token = |raw: &[u8]| -> Result<String> {
        let mut tok = String::new();
        while pos < raw.len() {
            let b = raw[pos];
            if b == b'#' {
                while pos < raw.len() && raw[pos] != b'\n' {
                    pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                if !tok.is_empty() {
                    return Ok(tok);
                }
                pos += 1;
            } else {
                tok.push(b as char);
                pos += 1;
            }
        }
        if tok.is_empty() {
            Err(Error::format("PGM", "unexpected end of header"))
        } else {
            Ok(tok)
        }
    };

    let magic = next_token(&raw)?;
    if magic != "P5" {
        return Err(Error::format("PGM", format!("expected P5, got {magic}")));
    }
    let width: usize = next_token(&raw)?
        .parse()
        .map_err(|_| Error::format("PGM", "bad width"))?;
    let height: usize = next_token(&raw)?
        .parse()
        .map_err(|_| Error::format("PGM", "bad height"))?;
    let maxval: usize = next_token(&raw)?
        .parse()
        .map_err(|_| Error::format("PGM", "bad maxval"))?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::format(
            "PGM",
            format!("only 8-bit rasters supported (maxval {maxval})"),
        ));
    }
    pos += 1; // single whitespace after maxval
    let need = width * height;
    if raw.len() < pos + need {
        return Err(Error::format("PGM", "raster shorter than header implies"));
    }
    // Values scale by maxval per the spec of the format, then to [0,1].
    let data: Vec<f64> = raw[pos..pos + need]
        .iter()
        .map(|&b| b.min(maxval as u8) as f64 / maxval as f64)
        .collect();
    let (n, data) = pad_to_square(width, height, data);
    Image2D::new(n, n, ImageKind::Dose, data)
}

fn load_png(path: &Path) -> Result<Image2D> {
    let file = std::io::BufReader::new(fs::File::open(path)?);
    let decoder = png::Decoder::new(file);
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::format("PNG", e.to_string()))?;
    let mut buf = vec![0u8; reader.output_buffer_size().unwrap_or(0)];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::format("PNG", e.to_string()))?;
    if info.bit_depth != png::BitDepth::Eight || info.color_type != png::ColorType::Grayscale {
        return Err(Error::format(
            "PNG",
            "only 8-bit grayscale PNG is supported",
        ));
    }
    from_gray_bytes(
        info.width as usize,
        info.height as usize,
        &buf[..info.buffer_size()],
    )
}

/// Writes an image as 8-bit grayscale PNG, normalizing so the maximum maps to 255.
pub fn save_png_normalized(img: &Image2D, path: &Path) -> Result<()> {
    let m = img.max_value();
    let scale = if m > 0.0 { 255.0 / m } else { 0.0 };
    let bytes: Vec<u8> = img
        .as_slice()
        .iter()
        .map(|&v| (v.max(0.0) * scale).round().min(255.0) as u8)
        .collect();
    write_png_gray(path, img.width, img.height, &bytes)
}

pub(crate) fn write_png_gray(path: &Path, width: usize, height: usize, bytes: &[u8]) -> Result<()> {
    let file = fs::File::create(path)?;
    let w = BufWriter::new(file);
    let mut encoder = png::Encoder::new(w, width as u32, height as u32);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder
        .write_header()
        .map_err(|e| Error::format("PNG", e.to_string()))?;
    writer
        .write_image_data(bytes)
        .map_err(|e| Error::format("PNG", e.to_string()))?;
    Ok(())
}

/// Writes 8-bit binary PGM (P5).
pub fn write_pgm(path: &Path, width: usize, height: usize, bytes: &[u8]) -> Result<()> {
    if bytes.len() != width * height {
        return Err(Error::DimensionMismatch {
            what: "PGM raster",
            expected: width * height,
            actual: bytes.len(),
        });
    }
    let mut f = BufWriter::new(fs::File::create(path)?);
    write!(f, "P5\n{width} {height}\n255\n")?;
    f.write_all(bytes)?;
    Ok(())
}
