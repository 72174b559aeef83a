//! The scientific editing operation set.
//!
//! Every function here is a pure, total function from a raster and its
//! parameters to a new raster (or an error). Geometric operations only move
//! or copy pixels. Tone operations work per channel in `f64`, clamp to
//! `[0, 1]` and round half away from zero, and never touch alpha.

use std::f64::consts::FRAC_PI_4;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{Raster, Rgba};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OpError {
    #[error("rectangle x={x} y={y} w={w} h={h} exceeds {width}x{height} image")]
    OutOfBounds {
        x: i64,
        y: i64,
        w: u32,
        h: u32,
        width: u32,
        height: u32,
    },
    #[error("rotation must be 1, 2 or 3 clockwise quarter turns, got {0}")]
    InvalidAngle(i64),
    #[error("parameter {name}={value} outside {range}")]
    ParamOutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
}

/// Pixel rectangle with top-left origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PixelRect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl PixelRect {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        PixelRect { x, y, w, h }
    }

    pub fn full(img: &Raster) -> Self {
        PixelRect::new(0, 0, img.width(), img.height())
    }

    fn check_within(&self, img: &Raster) -> Result<(), OpError> {
        if self.w == 0 {
            return Err(range_err("w", self.w as f64, ">= 1"));
        }
        if self.h == 0 {
            return Err(range_err("h", self.h as f64, ">= 1"));
        }
        let fits_x = self.x as u64 + self.w as u64 <= img.width() as u64;
        let fits_y = self.y as u64 + self.h as u64 <= img.height() as u64;
        if fits_x && fits_y {
            Ok(())
        } else {
            Err(OpError::OutOfBounds {
                x: self.x as i64,
                y: self.y as i64,
                w: self.w,
                h: self.h,
                width: img.width(),
                height: img.height(),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Horizontal,
    Vertical,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Horizontal => "horizontal",
            Axis::Vertical => "vertical",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Axis {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "horizontal" => Ok(Axis::Horizontal),
            "vertical" => Ok(Axis::Vertical),
            _ => Err(()),
        }
    }
}

/// Brightness in `[-1, 1]`, contrast in `(-1, 1)`. `(0, 0)` is the identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToneParams {
    pub brightness: f64,
    pub contrast: f64,
}

impl ToneParams {
    pub fn validate(&self) -> Result<(), OpError> {
        if !(-1.0..=1.0).contains(&self.brightness) {
            return Err(range_err("brightness", self.brightness, "[-1, 1]"));
        }
        if !(self.contrast > -1.0 && self.contrast < 1.0) {
            return Err(range_err("contrast", self.contrast, "(-1, 1)"));
        }
        Ok(())
    }
}

/// Per-channel multipliers in `[0, 4]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelGains {
    pub r_gain: f64,
    pub g_gain: f64,
    pub b_gain: f64,
}

impl ChannelGains {
    pub const IDENTITY: ChannelGains = ChannelGains {
        r_gain: 1.0,
        g_gain: 1.0,
        b_gain: 1.0,
    };

    pub fn validate(&self) -> Result<(), OpError> {
        for (name, v) in [("r", self.r_gain), ("g", self.g_gain), ("b", self.b_gain)] {
            if !(0.0..=4.0).contains(&v) {
                return Err(range_err(name, v, "[0, 4]"));
            }
        }
        Ok(())
    }
}

/// Hue rotation angle in degrees, taken modulo 360.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HueShift {
    pub degrees: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeldSpec {
    /// Top-left corner of the inserted image (inside the border frame).
    pub x: u32,
    pub y: u32,
    pub border_width: u32,
    pub border_color: Rgba,
}

fn range_err(name: &'static str, value: f64, range: &'static str) -> OpError {
    OpError::ParamOutOfRange { name, value, range }
}

/// Clamp to `[0, 1]`, scale to 8 bits, round half away from zero.
#[inline]
pub(crate) fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn crop(img: &Raster, rect: PixelRect) -> Result<Raster, OpError> {
    rect.check_within(img)?;
    let row_bytes = rect.w as usize * 4;
    let mut pixels = Vec::with_capacity(row_bytes * rect.h as usize);
    let stride = img.width() as usize * 4;
    let src = img.as_bytes();
    for y in rect.y..rect.y + rect.h {
        let start = y as usize * stride + rect.x as usize * 4;
        pixels.extend_from_slice(&src[start..start + row_bytes]);
    }
    Ok(Raster::from_rgba(rect.w, rect.h, pixels).expect("crop keeps buffer consistent"))
}

/// Rotates clockwise by `quarter_turns` x 90 degrees.
pub fn rotate(img: &Raster, quarter_turns: u32) -> Result<Raster, OpError> {
    let (w, h) = img.dimensions();
    let out = match quarter_turns {
        1 => Raster::from_fn(h, w, |xo, yo| img.get(yo, h - 1 - xo)),
        2 => Raster::from_fn(w, h, |xo, yo| img.get(w - 1 - xo, h - 1 - yo)),
        3 => Raster::from_fn(h, w, |xo, yo| img.get(w - 1 - yo, xo)),
        other => return Err(OpError::InvalidAngle(other as i64)),
    };
    Ok(out.expect("rotation keeps buffer consistent"))
}

pub fn flip(img: &Raster, axis: Axis) -> Raster {
    let (w, h) = img.dimensions();
    match axis {
        Axis::Horizontal => Raster::from_fn(w, h, |x, y| img.get(w - 1 - x, y)),
        Axis::Vertical => Raster::from_fn(w, h, |x, y| img.get(x, h - 1 - y)),
    }
    .expect("flip keeps buffer consistent")
}

/// Applies a 256-entry lookup table to the color channels.
fn apply_lut(img: &Raster, lut: &[u8; 256]) -> Raster {
    img.map_pixels(|Rgba([r, g, b, a])| {
        Rgba([lut[r as usize], lut[g as usize], lut[b as usize], a])
    })
}

pub fn brightness_contrast(img: &Raster, p: ToneParams) -> Result<Raster, OpError> {
    p.validate()?;
    // tan(pi/4) is not exactly 1 in floating point
    let slope = if p.contrast == 0.0 {
        1.0
    } else {
        ((p.contrast + 1.0) * FRAC_PI_4).tan()
    };
    let mut lut = [0u8; 256];
    for (v, slot) in lut.iter_mut().enumerate() {
        let v01 = v as f64 / 255.0;
        *slot = quantize((v01 - 0.5) * slope + 0.5 + p.brightness);
    }
    Ok(apply_lut(img, &lut))
}

pub fn color_balance(img: &Raster, g: ChannelGains) -> Result<Raster, OpError> {
    g.validate()?;
    let lut_for = |gain: f64| {
        let mut lut = [0u8; 256];
        for (v, slot) in lut.iter_mut().enumerate() {
            *slot = quantize(v as f64 / 255.0 * gain);
        }
        lut
    };
    let (lr, lg, lb) = (lut_for(g.r_gain), lut_for(g.g_gain), lut_for(g.b_gain));
    Ok(img.map_pixels(|Rgba([r, g, b, a])| {
        Rgba([lr[r as usize], lg[g as usize], lb[b as usize], a])
    }))
}

fn rgb_to_hsl(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let l = (max + min) / 2.0;
    if max == min {
        return (0.0, 0.0, l);
    }
    let d = max - min;
    let s = if l > 0.5 {
        d / (2.0 - max - min)
    } else {
        d / (max + min)
    };
    let h = if max == r {
        ((g - b) / d).rem_euclid(6.0)
    } else if max == g {
        (b - r) / d + 2.0
    } else {
        (r - g) / d + 4.0
    };
    (h * 60.0, s, l)
}

fn hsl_to_rgb(h: f64, s: f64, l: f64) -> (f64, f64, f64) {
    if s == 0.0 {
        return (l, l, l);
    }
    let q = if l < 0.5 { l * (1.0 + s) } else { l + s - l * s };
    let p = 2.0 * l - q;
    let channel = |t: f64| {
        let t = t.rem_euclid(1.0);
        if t < 1.0 / 6.0 {
            p + (q - p) * 6.0 * t
        } else if t < 0.5 {
            q
        } else if t < 2.0 / 3.0 {
            p + (q - p) * (2.0 / 3.0 - t) * 6.0
        } else {
            p
        }
    };
    let hn = h / 360.0;
    (
        channel(hn + 1.0 / 3.0),
        channel(hn),
        channel(hn - 1.0 / 3.0),
    )
}

pub fn hue_rotate(img: &Raster, shift: HueShift) -> Result<Raster, OpError> {
    if !shift.degrees.is_finite() {
        return Err(range_err("deg", shift.degrees, "finite degrees"));
    }
    let delta = shift.degrees.rem_euclid(360.0);
    if delta == 0.0 {
        return Ok(img.clone());
    }
    Ok(img.map_pixels(|Rgba([r, g, b, a])| {
        let (h, s, l) = rgb_to_hsl(r as f64 / 255.0, g as f64 / 255.0, b as f64 / 255.0);
        let (r2, g2, b2) = hsl_to_rgb((h + delta).rem_euclid(360.0), s, l);
        Rgba([quantize(r2), quantize(g2), quantize(b2), a])
    }))
}

/// Binarizes on Rec.601 luma: white where `L >= t * 255`, black otherwise.
pub fn threshold(img: &Raster, t: f64) -> Result<Raster, OpError> {
    if !(0.0..=1.0).contains(&t) {
        return Err(range_err("t", t, "[0, 1]"));
    }
    // luma scaled by 1000 is exact in integers
    let cut = t * 255_000.0;
    Ok(img.map_pixels(|Rgba([r, g, b, a])| {
        let luma_milli = 299 * r as u32 + 587 * g as u32 + 114 * b as u32;
        let v = if luma_milli as f64 >= cut { 255 } else { 0 };
        Rgba([v, v, v, a])
    }))
}

/// Equalization lookup table for one channel histogram.
///
/// Returns `None` for a constant channel, which is left unchanged.
pub(crate) fn equalization_lut(hist: &[u64; 256]) -> Option<[u8; 256]> {
    let total: u64 = hist.iter().sum();
    let cdf_min = hist.iter().copied().find(|&c| c > 0)?;
    if cdf_min == total {
        return None;
    }
    let mut lut = [0u8; 256];
    let mut cdf = 0u64;
    for (v, slot) in lut.iter_mut().enumerate() {
        cdf += hist[v];
        if cdf >= cdf_min {
            let frac = (cdf - cdf_min) as f64 / (total - cdf_min) as f64;
            *slot = (255.0 * frac).round() as u8;
        }
    }
    Some(lut)
}

pub fn equalize_histogram(img: &Raster) -> Raster {
    let mut hists = [[0u64; 256]; 3];
    for px in img.pixels() {
        for (c, hist) in hists.iter_mut().enumerate() {
            hist[px.0[c] as usize] += 1;
        }
    }
    let identity: [u8; 256] = std::array::from_fn(|v| v as u8);
    let luts: Vec<[u8; 256]> = hists
        .iter()
        .map(|h| equalization_lut(h).unwrap_or(identity))
        .collect();
    img.map_pixels(|Rgba([r, g, b, a])| {
        Rgba([
            luts[0][r as usize],
            luts[1][g as usize],
            luts[2][b as usize],
            a,
        ])
    })
}

/// Pastes `insert` into `base` with its top-left at `(spec.x, spec.y)`,
/// framed by a solid border `spec.border_width` pixels thick.
///
/// The framed rectangle must lie inside `base`; nothing is clipped.
pub fn meld(base: &Raster, insert: &Raster, spec: MeldSpec) -> Result<Raster, OpError> {
    let bw = spec.border_width as i64;
    let fx = spec.x as i64 - bw;
    let fy = spec.y as i64 - bw;
    let fw = insert.width() as i64 + 2 * bw;
    let fh = insert.height() as i64 + 2 * bw;
    if fx < 0 || fy < 0 || fx + fw > base.width() as i64 || fy + fh > base.height() as i64 {
        return Err(OpError::OutOfBounds {
            x: fx,
            y: fy,
            w: fw.min(u32::MAX as i64) as u32,
            h: fh.min(u32::MAX as i64) as u32,
            width: base.width(),
            height: base.height(),
        });
    }
    let (fx, fy, fw, fh) = (fx as u32, fy as u32, fw as u32, fh as u32);
    let mut out = base.clone();
    for y in fy..fy + fh {
        for x in fx..fx + fw {
            let inside = x >= spec.x
                && x < spec.x + insert.width()
                && y >= spec.y
                && y < spec.y + insert.height();
            let px = if inside {
                insert.get(x - spec.x, y - spec.y)
            } else {
                spec.border_color
            };
            out.put(x, y, px);
        }
    }
    Ok(out)
}
