use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One RGBA8 sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rgba(pub [u8; 4]);

impl Rgba {
    pub const BLACK: Rgba = Rgba([0, 0, 0, 255]);
    pub const WHITE: Rgba = Rgba([255, 255, 255, 255]);

    pub fn new(r: u8, g: u8, b: u8, a: u8) -> Self {
        Rgba([r, g, b, a])
    }

    /// Parses `#rrggbbaa` (lowercase or uppercase hex).
    pub fn parse_hex(s: &str) -> Option<Self> {
        let hex = s.strip_prefix('#')?;
        if hex.len() != 8 || !hex.bytes().all(|b| b.is_ascii_hexdigit()) {
            return None;
        }
        let mut out = [0u8; 4];
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = u8::from_str_radix(&hex[i * 2..i * 2 + 2], 16).ok()?;
        }
        Some(Rgba(out))
    }
}

impl fmt::Display for Rgba {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [r, g, b, a] = self.0;
        write!(f, "#{r:02x}{g:02x}{b:02x}{a:02x}")
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RasterError {
    #[error("raster dimensions must be at least 1x1, got {width}x{height}")]
    EmptyDimensions { width: u32, height: u32 },
    #[error("pixel buffer holds {actual} bytes, expected {expected} for {width}x{height} RGBA8")]
    BufferLength {
        width: u32,
        height: u32,
        expected: usize,
        actual: usize,
    },
}

/// Canonical in-memory image: row-major RGBA8, at least 1x1.
///
/// The fields are private so the buffer length invariant cannot be broken
/// after construction.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Raster {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl fmt::Debug for Raster {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Raster")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl Raster {
    pub fn from_rgba(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::EmptyDimensions { width, height });
        }
        let expected = width as usize * height as usize * 4;
        if pixels.len() != expected {
            return Err(RasterError::BufferLength {
                width,
                height,
                expected,
                actual: pixels.len(),
            });
        }
        Ok(Raster {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: u32, height: u32, color: Rgba) -> Result<Self, RasterError> {
        let count = width as usize * height as usize;
        Self::from_rgba(width, height, color.0.repeat(count))
    }

    /// Builds a raster by evaluating `f(x, y)` for every pixel.
    pub fn from_fn(
        width: u32,
        height: u32,
        mut f: impl FnMut(u32, u32) -> Rgba,
    ) -> Result<Self, RasterError> {
        let mut pixels = Vec::with_capacity(width as usize * height as usize * 4);
        for y in 0..height {
            for x in 0..width {
                pixels.extend_from_slice(&f(x, y).0);
            }
        }
        Self::from_rgba(width, height, pixels)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 4
    }

    /// Panics if `(x, y)` lies outside the raster.
    #[inline]
    pub fn get(&self, x: u32, y: u32) -> Rgba {
        assert!(x < self.width && y < self.height, "pixel ({x}, {y}) out of bounds");
        let o = self.offset(x, y);
        Rgba([
            self.pixels[o],
            self.pixels[o + 1],
            self.pixels[o + 2],
            self.pixels[o + 3],
        ])
    }

    #[inline]
    pub fn put(&mut self, x: u32, y: u32, px: Rgba) {
        assert!(x < self.width && y < self.height, "pixel ({x}, {y}) out of bounds");
        let o = self.offset(x, y);
        self.pixels[o..o + 4].copy_from_slice(&px.0);
    }

    pub fn pixels(&self) -> impl Iterator<Item = Rgba> + '_ {
        self.pixels
            .chunks_exact(4)
            .map(|c| Rgba([c[0], c[1], c[2], c[3]]))
    }

    /// Maps every pixel through `f`, keeping dimensions.
    pub fn map_pixels(&self, mut f: impl FnMut(Rgba) -> Rgba) -> Raster {
        let mut pixels = Vec::with_capacity(self.pixels.len());
        for px in self.pixels() {
            pixels.extend_from_slice(&f(px).0);
        }
        Raster {
            width: self.width,
            height: self.height,
            pixels,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_buffers() {
        assert_eq!(
            Raster::from_rgba(0, 1, vec![]),
            Err(RasterError::EmptyDimensions { width: 0, height: 1 })
        );
        assert!(matches!(
            Raster::from_rgba(2, 2, vec![0; 15]),
            Err(RasterError::BufferLength { expected: 16, actual: 15, .. })
        ));
    }

    #[test]
    fn get_put_row_major() {
        let mut r = Raster::filled(3, 2, Rgba::BLACK).unwrap();
        r.put(2, 1, Rgba::new(1, 2, 3, 4));
        assert_eq!(r.get(2, 1), Rgba::new(1, 2, 3, 4));
        assert_eq!(&r.as_bytes()[20..24], &[1, 2, 3, 4]);
    }

    #[test]
    fn color_hex_round_trip() {
        let c = Rgba::new(0x12, 0xab, 0, 0xff);
        assert_eq!(c.to_string(), "#12ab00ff");
        assert_eq!(Rgba::parse_hex("#12AB00FF"), Some(c));
        assert_eq!(Rgba::parse_hex("12ab00ff"), None);
        assert_eq!(Rgba::parse_hex("#12ab00"), None);
    }
}
