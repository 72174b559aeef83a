#![allow(dead_code)]

use imgjournal_core::{Action, Axis, ContentHash, Fixed6, ImageFormat, PixelRect, Raster, Rgba, Session};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_raster(rng: &mut impl Rng, width: u32, height: u32) -> Raster {
    let mut bytes = vec![0u8; width as usize * height as usize * 4];
    rng.fill(&mut bytes[..]);
    Raster::from_rgba(width, height, bytes).unwrap()
}

pub fn random_opaque_raster(rng: &mut impl Rng, width: u32, height: u32) -> Raster {
    let r = random_raster(rng, width, height);
    r.map_pixels(|Rgba([r, g, b, _])| Rgba([r, g, b, 255]))
}

pub fn random_sized_raster(rng: &mut impl Rng, max: u32) -> Raster {
    let w = rng.random_range(1..=max);
    let h = rng.random_range(1..=max);
    random_raster(rng, w, h)
}

fn fixed(rng: &mut impl Rng, lo: i64, hi: i64) -> Fixed6 {
    Fixed6::from_micros(rng.random_range(lo..=hi))
}

/// A random image operation whose parameters are valid for `current`.
/// MELD is only produced when `insert` (name, hash, raster) fits.
pub fn random_edit(
    rng: &mut impl Rng,
    current: &Raster,
    insert: Option<(&str, ContentHash, &Raster)>,
) -> Action {
    let (w, h) = current.dimensions();
    loop {
        let action = match rng.random_range(0..10) {
            0 => {
                let cw = rng.random_range(1..=w);
                let ch = rng.random_range(1..=h);
                let x = rng.random_range(0..=w - cw);
                let y = rng.random_range(0..=h - ch);
                Action::Crop(PixelRect::new(x, y, cw, ch))
            }
            1 => Action::Rotate {
                turns: rng.random_range(1..=3),
            },
            2 => Action::Flip(if rng.random() {
                Axis::Horizontal
            } else {
                Axis::Vertical
            }),
            3 => Action::BrightnessContrast {
                b: fixed(rng, -1_000_000, 1_000_000),
                c: fixed(rng, -999_999, 999_999),
            },
            4 => Action::ColorBalance {
                r: fixed(rng, 0, 4_000_000),
                g: fixed(rng, 0, 4_000_000),
                b: fixed(rng, 0, 4_000_000),
            },
            5 => Action::Hue {
                deg: fixed(rng, -720_000_000, 720_000_000),
            },
            6 => Action::Threshold {
                t: fixed(rng, 0, 1_000_000),
            },
            7 => Action::Equalize,
            _ => {
                let Some((name, ihash, raster)) = insert else { continue };
                let (iw, ih) = raster.dimensions();
                let bw = rng.random_range(0..=2u32);
                if iw + 2 * bw > w || ih + 2 * bw > h {
                    continue;
                }
                Action::Meld {
                    file: name.to_string(),
                    ihash,
                    x: rng.random_range(bw..=w - iw - bw),
                    y: rng.random_range(bw..=h - ih - bw),
                    bw,
                    bcolor: Rgba(rng.random()),
                }
            }
        };
        return action;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Edit,
    Undo,
    Redo,
    Export,
}

pub fn random_step(rng: &mut impl Rng) -> Step {
    match rng.random_range(0..10) {
        0..=4 => Step::Edit,
        5 | 6 => Step::Undo,
        7 | 8 => Step::Redo,
        _ => Step::Export,
    }
}

pub struct Insert {
    pub name: String,
    pub hash: ContentHash,
    pub raster: Raster,
}

/// Opens a session on a random raster with one registered insert.
pub fn random_session(rng: &mut impl Rng, width: u32, height: u32) -> (Session, Insert) {
    let mut session = Session::open(random_raster(rng, width, height), "source.png");
    let raster = random_sized_raster(rng, 4);
    let hash = session.add_insert("inset.png", raster.clone());
    let insert = Insert {
        name: "inset.png".into(),
        hash,
        raster,
    };
    (session, insert)
}

/// Performs one random step; returns whether it was accepted.
pub fn perform(rng: &mut impl Rng, session: &mut Session, step: Step, insert: &Insert) -> bool {
    match step {
        Step::Edit => {
            let action = random_edit(
                rng,
                session.current(),
                Some((&insert.name, insert.hash, &insert.raster)),
            );
            session
                .apply(action)
                .map_err(|e| panic!("generated edit rejected: {e}"))
                .is_ok()
        }
        Step::Undo => session.undo().is_ok(),
        Step::Redo => session.redo().is_ok(),
        Step::Export => session.export("out.png", ImageFormat::Png, 95).is_ok(),
    }
}
