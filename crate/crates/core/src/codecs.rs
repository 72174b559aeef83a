//! Decoding and encoding of the supported file formats into and out of the
//! canonical RGBA8 [`Raster`].
//!
//! Formats are detected from magic bytes; a declared format (from a file
//! extension or a client) is only cross-checked against the detected one.

use std::fmt;
use std::io::Cursor;
use std::str::FromStr;

use image::codecs::{bmp, jpeg, png, tiff};
use image::{DynamicImage, ExtendedColorType, ImageDecoder, ImageEncoder};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::Raster;

pub const DEFAULT_JPEG_QUALITY: u8 = 95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageFormat {
    Png,
    #[serde(alias = "jpeg")]
    Jpg,
    Bmp,
    #[serde(alias = "tif")]
    Tiff,
}

impl ImageFormat {
    pub const ALL: [ImageFormat; 4] = [
        ImageFormat::Jpg,
        ImageFormat::Tiff,
        ImageFormat::Png,
        ImageFormat::Bmp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ImageFormat::Png => "png",
            ImageFormat::Jpg => "jpg",
            ImageFormat::Bmp => "bmp",
            ImageFormat::Tiff => "tiff",
        }
    }

    pub fn is_lossless(self) -> bool {
        !matches!(self, ImageFormat::Jpg)
    }

    /// Guesses a format from a file name's extension.
    pub fn from_path(path: &str) -> Option<Self> {
        let ext = path.rsplit_once('.')?.1.to_ascii_lowercase();
        ext.parse().ok()
    }

    pub fn mime_type(self) -> &'static str {
        match self {
            ImageFormat::Png => "image/png",
            ImageFormat::Jpg => "image/jpeg",
            ImageFormat::Bmp => "image/bmp",
            ImageFormat::Tiff => "image/tiff",
        }
    }
}

impl fmt::Display for ImageFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ImageFormat {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "png" => Ok(ImageFormat::Png),
            "jpg" | "jpeg" => Ok(ImageFormat::Jpg),
            "bmp" => Ok(ImageFormat::Bmp),
            "tiff" | "tif" => Ok(ImageFormat::Tiff),
            other => Err(CodecError::UnsupportedFormat(other.to_string())),
        }
    }
}

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt {format} file: {detail}")]
    CorruptFile { format: ImageFormat, detail: String },
    #[error("declared format {declared} but content is {detected}")]
    FormatMismatch {
        declared: ImageFormat,
        detected: ImageFormat,
    },
    #[error("jpeg quality {0} outside 1..=100")]
    QualityOutOfRange(u8),
    #[error("encoding {format} failed: {detail}")]
    EncodeError { format: ImageFormat, detail: String },
}

#[derive(Debug, Clone)]
pub struct Imported {
    pub raster: Raster,
    pub format: ImageFormat,
    pub warnings: Vec<String>,
}

/// Identifies the container from its leading bytes.
pub fn detect_format(bytes: &[u8]) -> Result<ImageFormat, CodecError> {
    const PNG_MAGIC: &[u8] = b"\x89PNG\r\n\x1a\n";
    if bytes.starts_with(PNG_MAGIC) {
        Ok(ImageFormat::Png)
    } else if bytes.starts_with(&[0xFF, 0xD8, 0xFF]) {
        Ok(ImageFormat::Jpg)
    } else if bytes.starts_with(b"BM") {
        Ok(ImageFormat::Bmp)
    } else if bytes.starts_with(b"II*\0") || bytes.starts_with(b"MM\0*") {
        Ok(ImageFormat::Tiff)
    } else if bytes.starts_with(b"GIF87a") || bytes.starts_with(b"GIF89a") {
        Err(CodecError::UnsupportedFormat("gif".into()))
    } else if bytes.len() >= 12 && &bytes[..4] == b"RIFF" && &bytes[8..12] == b"WEBP" {
        Err(CodecError::UnsupportedFormat("webp".into()))
    } else {
        Err(CodecError::UnsupportedFormat("unrecognized content".into()))
    }
}

pub fn import_image(
    bytes: &[u8],
    declared: Option<ImageFormat>,
) -> Result<Imported, CodecError> {
    let format = detect_format(bytes)?;
    if let Some(declared) = declared {
        if declared != format {
            return Err(CodecError::FormatMismatch {
                declared,
                detected: format,
            });
        }
    }
    let corrupt = |e: image::ImageError| CodecError::CorruptFile {
        format,
        detail: e.to_string(),
    };
    let cursor = Cursor::new(bytes);
    let mut warnings = Vec::new();
    let image = match format {
        ImageFormat::Png => decode(png::PngDecoder::new(cursor).map_err(corrupt)?, &mut warnings),
        ImageFormat::Jpg => decode(jpeg::JpegDecoder::new(cursor).map_err(corrupt)?, &mut warnings),
        ImageFormat::Bmp => decode(bmp::BmpDecoder::new(cursor).map_err(corrupt)?, &mut warnings),
        ImageFormat::Tiff => decode(tiff::TiffDecoder::new(cursor).map_err(corrupt)?, &mut warnings),
    }
    .map_err(corrupt)?;
    let raster = to_canonical(image, &mut warnings).map_err(|detail| CodecError::CorruptFile {
        format,
        detail,
    })?;
    Ok(Imported {
        raster,
        format,
        warnings,
    })
}

fn decode(
    mut decoder: impl ImageDecoder,
    warnings: &mut Vec<String>,
) -> image::ImageResult<DynamicImage> {
    if decoder.icc_profile()?.is_some() {
        warnings.push("embedded ICC color profile stripped; raw sample values used".into());
    }
    if decoder.exif_metadata()?.is_some() {
        warnings.push("EXIF metadata stripped".into());
    }
    DynamicImage::from_decoder(decoder)
}

fn to_canonical(image: DynamicImage, warnings: &mut Vec<String>) -> Result<Raster, String> {
    let (width, height) = (image.width(), image.height());
    let pixels = match image {
        DynamicImage::ImageRgba8(buf) => buf.into_raw(),
        DynamicImage::ImageRgb8(_) | DynamicImage::ImageLuma8(_) | DynamicImage::ImageLumaA8(_) => {
            image.to_rgba8().into_raw()
        }
        DynamicImage::ImageLuma16(_)
        | DynamicImage::ImageLumaA16(_)
        | DynamicImage::ImageRgb16(_)
        | DynamicImage::ImageRgba16(_) => {
            warnings.push("16-bit samples reduced to 8 bits (high byte kept)".into());
            // to_rgba16 only expands channels; each sample keeps its value
            image
                .to_rgba16()
                .into_raw()
                .into_iter()
                .map(|v| (v >> 8) as u8)
                .collect()
        }
        other => {
            warnings.push("floating-point samples quantized to 8 bits".into());
            other
                .to_rgba32f()
                .into_raw()
                .into_iter()
                .map(|v| crate::ops::quantize(v as f64))
                .collect()
        }
    };
    Raster::from_rgba(width, height, pixels).map_err(|e| e.to_string())
}

/// Encodes a raster. `quality` applies to JPEG only and must be in 1..=100.
///
/// JPEG has no alpha channel; alpha is dropped before encoding.
pub fn export_image(
    raster: &Raster,
    format: ImageFormat,
    quality: u8,
) -> Result<Vec<u8>, CodecError> {
    if !(1..=100).contains(&quality) {
        return Err(CodecError::QualityOutOfRange(quality));
    }
    let (w, h) = raster.dimensions();
    let mut out = Vec::new();
    let result = match format {
        ImageFormat::Png => png::PngEncoder::new(&mut out).write_image(
            raster.as_bytes(),
            w,
            h,
            ExtendedColorType::Rgba8,
        ),
        ImageFormat::Bmp => bmp::BmpEncoder::new(&mut out).write_image(
            raster.as_bytes(),
            w,
            h,
            ExtendedColorType::Rgba8,
        ),
        ImageFormat::Tiff => tiff::TiffEncoder::new(Cursor::new(&mut out)).write_image(
            raster.as_bytes(),
            w,
            h,
            ExtendedColorType::Rgba8,
        ),
        ImageFormat::Jpg => {
            let rgb: Vec<u8> = raster
                .as_bytes()
                .chunks_exact(4)
                .flat_map(|c| [c[0], c[1], c[2]])
                .collect();
            jpeg::JpegEncoder::new_with_quality(&mut out, quality).write_image(
                &rgb,
                w,
                h,
                ExtendedColorType::Rgb8,
            )
        }
    };
    result.map_err(|e| CodecError::EncodeError {
        format,
        detail: e.to_string(),
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::Rgba;

    fn sample() -> Raster {
        Raster::from_fn(5, 3, |x, y| Rgba([x as u8 * 40, y as u8 * 70, 7, 100 + x as u8])).unwrap()
    }

    #[test]
    fn lossless_round_trips() {
        let r = sample();
        for f in [ImageFormat::Png, ImageFormat::Bmp, ImageFormat::Tiff] {
            let bytes = export_image(&r, f, DEFAULT_JPEG_QUALITY).unwrap();
            let back = import_image(&bytes, Some(f)).unwrap();
            assert_eq!(back.format, f);
            assert_eq!(back.raster, r, "{f} round trip");
        }
    }

    #[test]
    fn jpeg_is_opaque_and_close() {
        let r = Raster::filled(16, 16, Rgba([120, 60, 30, 10])).unwrap();
        let bytes = export_image(&r, ImageFormat::Jpg, 95).unwrap();
        let back = import_image(&bytes, None).unwrap().raster;
        assert!(back.pixels().all(|p| p.0[3] == 255));
        assert!(back.pixels().all(|p| (p.0[0] as i32 - 120).abs() <= 3));
    }

    #[test]
    fn rejects_gif_and_garbage() {
        assert!(matches!(
            import_image(b"GIF89a\x01\x00\x01\x00", None),
            Err(CodecError::UnsupportedFormat(f)) if f == "gif"
        ));
        assert!(matches!(import_image(b"", None), Err(CodecError::UnsupportedFormat(_))));
        assert!(matches!(
            import_image(b"\x89PNG\r\n\x1a\nnot really", None),
            Err(CodecError::CorruptFile { format: ImageFormat::Png, .. })
        ));
    }

    #[test]
    fn declared_format_is_cross_checked() {
        let bytes = export_image(&sample(), ImageFormat::Png, 95).unwrap();
        assert!(matches!(
            import_image(&bytes, Some(ImageFormat::Bmp)),
            Err(CodecError::FormatMismatch { declared: ImageFormat::Bmp, detected: ImageFormat::Png })
        ));
    }

    #[test]
    fn quality_zero_rejected() {
        assert!(matches!(
            export_image(&sample(), ImageFormat::Jpg, 0),
            Err(CodecError::QualityOutOfRange(0))
        ));
    }

    #[test]
    fn sixteen_bit_keeps_high_byte() {
        let buf = image::ImageBuffer::<image::Luma<u16>, _>::from_raw(2, 1, vec![0x12ff, 0xab01]).unwrap();
        let mut bytes = Vec::new();
        DynamicImage::ImageLuma16(buf)
            .write_to(&mut Cursor::new(&mut bytes), image::ImageFormat::Png)
            .unwrap();
        let imported = import_image(&bytes, None).unwrap();
        assert_eq!(imported.raster.get(0, 0), Rgba([0x12, 0x12, 0x12, 255]));
        assert_eq!(imported.raster.get(1, 0), Rgba([0xab, 0xab, 0xab, 255]));
        assert_eq!(imported.warnings.len(), 1);
    }

    #[test]
    fn grayscale_expanded() {
        let buf = image::GrayImage::from_raw(2, 1, vec![3, 250]).unwrap();
        let mut bytes = Vec::new();
        DynamicImage::ImageLuma8(buf)
            .write_to(&mut Cursor::new(&mut bytes), image::ImageFormat::Bmp)
            .unwrap();
        let r = import_image(&bytes, None).unwrap().raster;
        assert_eq!(r.get(1, 0), Rgba([250, 250, 250, 255]));
    }

    #[test]
    fn format_names() {
        assert_eq!("jpeg".parse::<ImageFormat>().unwrap(), ImageFormat::Jpg);
        assert_eq!(ImageFormat::from_path("x/y.TIF"), Some(ImageFormat::Tiff));
        assert!("gif".parse::<ImageFormat>().is_err());
    }
}
