//! Grayscale image files: PGM (P2/P5) and 8/16-bit PNG.

use std::fs;
use std::io::Write;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma};

use crate::error::{Error, Result};
use crate::signal::image::{Image, Shape};

/// Integer samples as stored in the file, with the format's maximum value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawGray {
    pub shape: Shape,
    pub maxval: u32,
    pub samples: Vec<u16>,
}

impl RawGray {
    /// Maps samples linearly onto `[0, 1]`.
    pub fn normalized(&self) -> Image {
        let scale = 1.0 / self.maxval as f64;
        Image::from_raw(
            self.shape,
            self.samples.iter().map(|&s| s as f64 * scale).collect(),
        )
    }

    /// Samples as raw integer intensities (e.g. photon counts).
    pub fn counts(&self) -> Image {
        Image::from_raw(self.shape, self.samples.iter().map(|&s| s as f64).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FileKind {
    Pgm,
    Png,
}

fn kind_of(path: &Path) -> Result<FileKind> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("pgm") | Some("pnm") => Ok(FileKind::Pgm),
        Some("png") => Ok(FileKind::Png),
        _ => Err(Error::Format(format!(
            "{}: unsupported image extension (expected .pgm or .png)",
            path.display()
        ))),
    }
}

pub fn read_gray(path: impl AsRef<Path>) -> Result<RawGray> {
    let path = path.as_ref();
    match kind_of(path)? {
        FileKind::Pgm => parse_pgm(&fs::read(path)?),
        FileKind::Png => read_png(path),
    }
}

/// Loads an image and maps its integer samples onto `[0, 1]`.
pub fn load_normalized(path: impl AsRef<Path>) -> Result<Image> {
    Ok(read_gray(path)?.normalized())
}

/// Loads an image keeping the stored integer values (count images).
pub fn load_counts(path: impl AsRef<Path>) -> Result<Image> {
    Ok(read_gray(path)?.counts())
}

/// Writes an image with intensities in `[0, 1]` as 8-bit grayscale.
/// Values outside the range are clipped.
pub fn save_normalized(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let samples = img
        .data()
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u16)
        .collect();
    write_gray(
        path.as_ref(),
        &RawGray {
            shape: img.shape(),
            maxval: 255,
            samples,
        },
    )
}

/// Writes nonnegative integer-valued intensities without rescaling.
pub fn save_counts(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let mut samples = Vec::with_capacity(img.len());
    for &v in img.data() {
        if !(0.0..=65535.0).contains(&v) || v.fract() != 0.0 {
            return Err(Error::Format(format!(
                "count image value {v} is not an integer in [0, 65535]"
            )));
        }
        samples.push(v as u16);
    }
    let peak = samples.iter().copied().max().unwrap_or(0).max(1) as u32;
    let maxval = if peak < 256 { 255 } else { 65535 };
    write_gray(
        path.as_ref(),
        &RawGray {
            shape: img.shape(),
            maxval,
            samples,
        },
    )
}

pub fn write_gray(path: &Path, raw: &RawGray) -> Result<()> {
    match kind_of(path)? {
        FileKind::Pgm => {
            let mut out = Vec::new();
            write!(
                out,
                "P5\n{} {}\n{}\n",
                raw.shape.width, raw.shape.height, raw.maxval
            )?;
            if raw.maxval < 256 {
                out.extend(raw.samples.iter().map(|&s| s as u8));
            } else {
                for &s in &raw.samples {
                    out.extend_from_slice(&s.to_be_bytes());
                }
            }
            fs::write(path, out)?;
        }
        FileKind::Png => {
            let (w, h) = (raw.shape.width as u32, raw.shape.height as u32);
            let dynamic = if raw.maxval < 256 {
                let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
                    ImageBuffer::from_raw(w, h, raw.samples.iter().map(|&s| s as u8).collect())
                        .ok_or_else(|| Error::Format("image buffer size".into()))?;
                DynamicImage::ImageLuma8(buf)
            } else {
                let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
                    ImageBuffer::from_raw(w, h, raw.samples.clone())
                        .ok_or_else(|| Error::Format("image buffer size".into()))?;
                DynamicImage::ImageLuma16(buf)
            };
            dynamic
                .save_with_format(path, image::ImageFormat::Png)
                .map_err(png_error)?;
        }
    }
    Ok(())
}

fn png_error(e: image::ImageError) -> Error {
    match e {
        image::ImageError::IoError(io) => Error::Io(io),
        other => Error::Format(other.to_string()),
    }
}

fn read_png(path: &Path) -> Result<RawGray> {
    let img = image::ImageReader::open(path)?
        .with_guessed_format()?
        .decode()
        .map_err(png_error)?;
    let shape = Shape::new(img.width() as usize, img.height() as usize);
    Ok(match img {
        DynamicImage::ImageLuma8(buf) => RawGray {
            shape,
            maxval: 255,
            samples: buf.into_raw().into_iter().map(u16::from).collect(),
        },
        DynamicImage::ImageLuma16(buf) => RawGray {
            shape,
            maxval: 65535,
            samples: buf.into_raw(),
        },
        // color or alpha images are reduced to luminance
        other => RawGray {
            shape,
            maxval: 65535,
            samples: other.into_luma16().into_raw(),
        },
    })
}

/// Splits a PNM header into tokens, skipping `#` comments. Returns the
/// tokens and the byte offset just past the whitespace that ends the last one.
fn pnm_header(bytes: &[u8], count: usize) -> Result<(Vec<String>, usize)> {
    let mut tokens = Vec::with_capacity(count);
    let mut i = 0;
    while tokens.len() < count {
        while i < bytes.len() && (bytes[i].is_ascii_whitespace() || bytes[i] == b'#') {
            if bytes[i] == b'#' {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            } else {
                i += 1;
            }
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() && bytes[i] != b'#' {
            i += 1;
        }
        if start == i {
            return Err(Error::Format("truncated PGM header".into()));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    // exactly one whitespace byte separates the header from binary data
    Ok((tokens, i + 1))
}

fn parse_pgm(bytes: &[u8]) -> Result<RawGray> {
    let (header, offset) = pnm_header(bytes, 4)?;
    let magic = header[0].as_str();
    let num = |s: &str| -> Result<usize> {
        s.parse()
            .map_err(|_| Error::Format(format!("bad PGM header field {s:?}")))
    };
    let (width, height, maxval) = (num(&header[1])?, num(&header[2])?, num(&header[3])?);
    if width == 0 || height == 0 || maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!(
            "unsupported PGM geometry {width}x{height} maxval {maxval}"
        )));
    }
    let n = width * height;
    let samples: Vec<u16> = match magic {
        "P5" => {
            let data = bytes.get(offset..).unwrap_or(&[]);
            if maxval < 256 {
                if data.len() < n {
                    return Err(Error::Format("truncated P5 data".into()));
                }
                data[..n].iter().map(|&b| b as u16).collect()
            } else {
                if data.len() < 2 * n {
                    return Err(Error::Format("truncated P5 data".into()));
                }
                data[..2 * n]
                    .chunks_exact(2)
                    .map(|c| u16::from_be_bytes([c[0], c[1]]))
                    .collect()
            }
        }
        "P2" => {
            let text = String::from_utf8_lossy(bytes.get(offset.saturating_sub(1)..).unwrap_or(&[]));
            let values = text
                .lines()
                .map(|l| l.split('#').next().unwrap_or(""))
                .flat_map(str::split_ascii_whitespace)
                .take(n)
                .map(|s| {
                    s.parse::<u16>()
                        .map_err(|_| Error::Format(format!("bad P2 sample {s:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            if values.len() < n {
                return Err(Error::Format("truncated P2 data".into()));
            }
            values
        }
        other => {
            return Err(Error::Format(format!(
                "unsupported PNM magic {other:?} (expected P2 or P5)"
            )))
        }
    };
    if let Some(&s) = samples.iter().find(|&&s| s as usize > maxval) {
        return Err(Error::Format(format!("sample {s} exceeds maxval {maxval}")));
    }
    Ok(RawGray {
        shape: Shape::new(width, height),
        maxval: maxval as u32,
        samples,
    })
}
