use std::collections::HashMap;

use imgjournal_core::ops::{self, equalize_histogram};
use imgjournal_core::{Axis, ChannelGains, HueShift, MeldSpec, OpError, PixelRect, Raster, Rgba, ToneParams};
use proptest::prelude::*;

fn raster(max: u32) -> impl Strategy<Value = Raster> {
    (1..=max, 1..=max).prop_flat_map(|(w, h)| {
        proptest::collection::vec(any::<u8>(), (w * h * 4) as usize)
            .prop_map(move |bytes| Raster::from_rgba(w, h, bytes).unwrap())
    })
}

fn multiset(r: &Raster) -> HashMap<Rgba, usize> {
    let mut counts = HashMap::new();
    for p in r.pixels() {
        *counts.entry(p).or_default() += 1;
    }
    counts
}

fn alpha(r: &Raster) -> Vec<u8> {
    r.pixels().map(|p| p.0[3]).collect()
}

proptest! {
    #[test]
    fn rotate_and_flip_permute_pixels(img in raster(12), turns in 1u32..=3) {
        let rotated = ops::rotate(&img, turns).unwrap();
        let (w, h) = img.dimensions();
        let expected = if turns == 2 { (w, h) } else { (h, w) };
        prop_assert_eq!(rotated.dimensions(), expected);
        prop_assert_eq!(multiset(&rotated), multiset(&img));
        prop_assert_eq!(multiset(&ops::flip(&img, Axis::Vertical)), multiset(&img));
    }

    #[test]
    fn crop_of_crop_is_offset_crop(img in raster(16), seed in any::<[u32; 8]>()) {
        let (w, h) = img.dimensions();
        let cw = 1 + seed[0] % w;
        let ch = 1 + seed[1] % h;
        let outer = PixelRect::new(seed[2] % (w - cw + 1), seed[3] % (h - ch + 1), cw, ch);
        let iw = 1 + seed[4] % cw;
        let ih = 1 + seed[5] % ch;
        let inner = PixelRect::new(seed[6] % (cw - iw + 1), seed[7] % (ch - ih + 1), iw, ih);
        let twice = ops::crop(&ops::crop(&img, outer).unwrap(), inner).unwrap();
        let once = ops::crop(&img, PixelRect::new(outer.x + inner.x, outer.y + inner.y, iw, ih)).unwrap();
        prop_assert_eq!(twice, once);
    }

    #[test]
    fn tone_ops_keep_alpha_and_dimensions(
        img in raster(10),
        b in -1.0f64..=1.0,
        c in -0.99f64..=0.99,
        gains in proptest::array::uniform3(0.0f64..=4.0),
        degrees in -720.0f64..720.0,
        t in 0.0f64..=1.0,
    ) {
        let outputs = [
            ops::brightness_contrast(&img, ToneParams { brightness: b, contrast: c }).unwrap(),
            ops::color_balance(&img, ChannelGains { r_gain: gains[0], g_gain: gains[1], b_gain: gains[2] }).unwrap(),
            ops::hue_rotate(&img, HueShift { degrees }).unwrap(),
            ops::threshold(&img, t).unwrap(),
            equalize_histogram(&img),
        ];
        for out in &outputs {
            prop_assert_eq!(out.dimensions(), img.dimensions());
            prop_assert_eq!(alpha(out), alpha(&img));
        }
    }

    #[test]
    fn threshold_is_binary(img in raster(10), t in 0.0f64..=1.0) {
        let out = ops::threshold(&img, t).unwrap();
        for p in out.pixels() {
            prop_assert!(p.0[..3] == [0, 0, 0] || p.0[..3] == [255, 255, 255]);
        }
    }

    #[test]
    fn equalize_is_monotone_per_channel(img in raster(10)) {
        let out = equalize_histogram(&img);
        for channel in 0..3 {
            let mut pairs: Vec<(u8, u8)> = img
                .pixels()
                .zip(out.pixels())
                .map(|(a, b)| (a.0[channel], b.0[channel]))
                .collect();
            pairs.sort();
            for pair in pairs.windows(2) {
                prop_assert!(pair[0].1 <= pair[1].1, "channel {} not monotone: {:?}", channel, pair);
            }
        }
    }

    #[test]
    fn meld_draws_frame_and_leaves_outside_untouched(
        base in raster(12),
        insert in raster(4),
        bw in 0u32..=2,
        color in any::<[u8; 4]>(),
        pos in any::<(u32, u32)>(),
    ) {
        let (w, h) = base.dimensions();
        let (iw, ih) = insert.dimensions();
        let spec_at = |x, y| MeldSpec { x, y, border_width: bw, border_color: Rgba(color) };
        if iw + 2 * bw > w || ih + 2 * bw > h {
            let err = ops::meld(&base, &insert, spec_at(bw, bw)).unwrap_err();
            prop_assert!(matches!(err, OpError::OutOfBounds { .. }), "{}", err);
            return Ok(());
        }
        let x = bw + pos.0 % (w - iw - 2 * bw + 1);
        let y = bw + pos.1 % (h - ih - 2 * bw + 1);
        let out = ops::meld(&base, &insert, spec_at(x, y)).unwrap();
        for py in 0..h {
            for px in 0..w {
                let inside = px >= x && px < x + iw && py >= y && py < y + ih;
                let in_frame = px + bw >= x && px < x + iw + bw && py + bw >= y && py < y + ih + bw;
                let expected = if inside {
                    insert.get(px - x, py - y)
                } else if in_frame {
                    Rgba(color)
                } else {
                    base.get(px, py)
                };
                prop_assert_eq!(out.get(px, py), expected, "pixel ({}, {})", px, py);
            }
        }
    }
}

#[test]
fn meld_frame_crossing_the_edge_is_rejected() {
    let base = Raster::filled(6, 6, Rgba::WHITE).unwrap();
    let insert = Raster::filled(2, 2, Rgba::BLACK).unwrap();
    let spec = MeldSpec { x: 0, y: 2, border_width: 1, border_color: Rgba::BLACK };
    assert!(matches!(ops::meld(&base, &insert, spec), Err(OpError::OutOfBounds { .. })));
}

#[test]
fn parameter_ranges_are_enforced() {
    let img = Raster::filled(2, 2, Rgba::WHITE).unwrap();
    let tone = |brightness, contrast| ops::brightness_contrast(&img, ToneParams { brightness, contrast });
    assert!(tone(1.5, 0.0).is_err());
    assert!(tone(0.0, 1.0).is_err());
    assert!(tone(f64::NAN, 0.0).is_err());
    let gains = ChannelGains { r_gain: 4.5, ..ChannelGains::IDENTITY };
    assert!(ops::color_balance(&img, gains).is_err());
    assert!(ops::hue_rotate(&img, HueShift { degrees: f64::INFINITY }).is_err());
    assert!(ops::threshold(&img, -0.1).is_err());
    assert!(matches!(ops::rotate(&img, 4), Err(OpError::InvalidAngle(4))));
}
