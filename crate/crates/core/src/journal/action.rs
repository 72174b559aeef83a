use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::codecs::ImageFormat;
use crate::hash::ContentHash;
use crate::ops::{Axis, PixelRect};
use crate::raster::Rgba;

/// Fixed-point decimal with exactly six fractional digits.
///
/// Tone parameters are stored in this form so that the value an operation
/// runs with is exactly the value written to the journal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Fixed6(i64);

impl Fixed6 {
    pub const SCALE: i64 = 1_000_000;
    pub const ZERO: Fixed6 = Fixed6(0);
    pub const ONE: Fixed6 = Fixed6(Self::SCALE);

    pub fn from_micros(micros: i64) -> Self {
        Fixed6(micros)
    }

    pub fn micros(self) -> i64 {
        self.0
    }

    /// Rounds to the nearest millionth (half away from zero). `None` for
    /// non-finite or out-of-range input.
    pub fn from_f64(v: f64) -> Option<Self> {
        let scaled = (v * Self::SCALE as f64).round();
        if !scaled.is_finite() || scaled.abs() > 9.0e15 {
            return None;
        }
        Some(Fixed6(scaled as i64))
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / Self::SCALE as f64
    }
}

impl fmt::Display for Fixed6 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let scale = Self::SCALE as u64;
        write!(f, "{sign}{}.{:06}", abs / scale, abs % scale)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("expected a decimal with exactly 6 fractional digits")]
pub struct ParseFixed6Error;

impl FromStr for Fixed6 {
    type Err = ParseFixed6Error;

    /// Strict canonical form: `-?(0|[1-9][0-9]*)\.[0-9]{6}`, no negative zero.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (negative, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let (int, frac) = body.split_once('.').ok_or(ParseFixed6Error)?;
        if !is_canonical_uint(int) || frac.len() != 6 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(ParseFixed6Error);
        }
        let int: i64 = int.parse().map_err(|_| ParseFixed6Error)?;
        let frac: i64 = frac.parse().map_err(|_| ParseFixed6Error)?;
        let magnitude = int
            .checked_mul(Self::SCALE)
            .and_then(|v| v.checked_add(frac))
            .ok_or(ParseFixed6Error)?;
        if negative && magnitude == 0 {
            return Err(ParseFixed6Error);
        }
        Ok(Fixed6(if negative { -magnitude } else { magnitude }))
    }
}

pub(crate) fn is_canonical_uint(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()) && (s == "0" || !s.starts_with('0'))
}

/// Journal operation names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OpKind {
    Import,
    Crop,
    Rotate,
    Flip,
    BrightnessContrast,
    ColorBalance,
    Hue,
    Threshold,
    Equalize,
    Meld,
    Undo,
    Redo,
    Export,
}

/// Value type of a journal parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Int,
    Decimal,
    Text,
    Hash,
}

impl FieldKind {
    pub fn describe(self) -> &'static str {
        match self {
            FieldKind::Int => "integer",
            FieldKind::Decimal => "decimal with 6 fractional digits",
            FieldKind::Text => "quoted string",
            FieldKind::Hash => "64 lowercase hex digits",
        }
    }
}

use FieldKind::{Decimal as D, Hash as H, Int as I, Text as T};

impl OpKind {
    pub const ALL: [OpKind; 13] = [
        OpKind::Import,
        OpKind::Crop,
        OpKind::Rotate,
        OpKind::Flip,
        OpKind::BrightnessContrast,
        OpKind::ColorBalance,
        OpKind::Hue,
        OpKind::Threshold,
        OpKind::Equalize,
        OpKind::Meld,
        OpKind::Undo,
        OpKind::Redo,
        OpKind::Export,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OpKind::Import => "IMPORT",
            OpKind::Crop => "CROP",
            OpKind::Rotate => "ROTATE",
            OpKind::Flip => "FLIP",
            OpKind::BrightnessContrast => "BRIGHTNESS_CONTRAST",
            OpKind::ColorBalance => "COLOR_BALANCE",
            OpKind::Hue => "HUE",
            OpKind::Threshold => "THRESHOLD",
            OpKind::Equalize => "EQUALIZE",
            OpKind::Meld => "MELD",
            OpKind::Undo => "UNDO",
            OpKind::Redo => "REDO",
            OpKind::Export => "EXPORT",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Parameter keys in canonical order, excluding the trailing `hash`.
    pub fn schema(self) -> &'static [(&'static str, FieldKind)] {
        match self {
            OpKind::Import => &[("file", T)],
            OpKind::Crop => &[("x", I), ("y", I), ("w", I), ("h", I)],
            OpKind::Rotate => &[("turns", I)],
            OpKind::Flip => &[("axis", T)],
            OpKind::BrightnessContrast => &[("b", D), ("c", D)],
            OpKind::ColorBalance => &[("r", D), ("g", D), ("b", D)],
            OpKind::Hue => &[("deg", D)],
            OpKind::Threshold => &[("t", D)],
            OpKind::Equalize | OpKind::Undo | OpKind::Redo => &[],
            OpKind::Meld => &[
                ("file", T),
                ("ihash", H),
                ("x", I),
                ("y", I),
                ("bw", I),
                ("bcolor", T),
            ],
            OpKind::Export => &[("file", T), ("format", T), ("quality", I)],
        }
    }

    pub fn field_kind(self, key: &str) -> Option<FieldKind> {
        self.schema().iter().find(|(k, _)| *k == key).map(|&(_, kind)| kind)
    }

    /// Image operations that produce a new raster state.
    pub fn is_edit(self) -> bool {
        !matches!(
            self,
            OpKind::Import | OpKind::Undo | OpKind::Redo | OpKind::Export
        )
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FieldValue {
    Int(i64),
    Decimal(Fixed6),
    Text(String),
    Hash(ContentHash),
}

impl FieldValue {
    pub fn kind(&self) -> FieldKind {
        match self {
            FieldValue::Int(_) => FieldKind::Int,
            FieldValue::Decimal(_) => FieldKind::Decimal,
            FieldValue::Text(_) => FieldKind::Text,
            FieldValue::Hash(_) => FieldKind::Hash,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SchemaProblem {
    #[error("unknown operation")]
    UnknownOp,
    #[error("missing key `{0}`")]
    MissingKey(String),
    #[error("unexpected key `{0}`")]
    UnexpectedKey(String),
    #[error("duplicate key `{0}`")]
    DuplicateKey(String),
    #[error("key `{key}` expects {expected}")]
    InvalidValue { key: String, expected: String },
}

/// One journaled action with its typed parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Import {
        file: String,
    },
    Crop(PixelRect),
    Rotate {
        turns: u32,
    },
    Flip(Axis),
    BrightnessContrast {
        b: Fixed6,
        c: Fixed6,
    },
    ColorBalance {
        r: Fixed6,
        g: Fixed6,
        b: Fixed6,
    },
    Hue {
        deg: Fixed6,
    },
    Threshold {
        t: Fixed6,
    },
    Equalize,
    Meld {
        file: String,
        ihash: ContentHash,
        x: u32,
        y: u32,
        bw: u32,
        bcolor: Rgba,
    },
    Undo,
    Redo,
    Export {
        file: String,
        format: ImageFormat,
        quality: u8,
    },
}

impl Action {
    pub fn kind(&self) -> OpKind {
        match self {
            Action::Import { .. } => OpKind::Import,
            Action::Crop(_) => OpKind::Crop,
            Action::Rotate { .. } => OpKind::Rotate,
            Action::Flip(_) => OpKind::Flip,
            Action::BrightnessContrast { .. } => OpKind::BrightnessContrast,
            Action::ColorBalance { .. } => OpKind::ColorBalance,
            Action::Hue { .. } => OpKind::Hue,
            Action::Threshold { .. } => OpKind::Threshold,
            Action::Equalize => OpKind::Equalize,
            Action::Meld { .. } => OpKind::Meld,
            Action::Undo => OpKind::Undo,
            Action::Redo => OpKind::Redo,
            Action::Export { .. } => OpKind::Export,
        }
    }

    /// Parameters in canonical key order (without `hash`).
    pub fn fields(&self) -> Vec<(&'static str, FieldValue)> {
        use FieldValue::{Decimal, Hash, Int, Text};
        match self {
            Action::Import { file } => vec![("file", Text(file.clone()))],
            Action::Crop(r) => vec![
                ("x", Int(r.x.into())),
                ("y", Int(r.y.into())),
                ("w", Int(r.w.into())),
                ("h", Int(r.h.into())),
            ],
            Action::Rotate { turns } => vec![("turns", Int((*turns).into()))],
            Action::Flip(axis) => vec![("axis", Text(axis.as_str().into()))],
            Action::BrightnessContrast { b, c } => vec![("b", Decimal(*b)), ("c", Decimal(*c))],
            Action::ColorBalance { r, g, b } => {
                vec![("r", Decimal(*r)), ("g", Decimal(*g)), ("b", Decimal(*b))]
            }
            Action::Hue { deg } => vec![("deg", Decimal(*deg))],
            Action::Threshold { t } => vec![("t", Decimal(*t))],
            Action::Equalize | Action::Undo | Action::Redo => vec![],
            Action::Meld {
                file,
                ihash,
                x,
                y,
                bw,
                bcolor,
            } => vec![
                ("file", Text(file.clone())),
                ("ihash", Hash(*ihash)),
                ("x", Int((*x).into())),
                ("y", Int((*y).into())),
                ("bw", Int((*bw).into())),
                ("bcolor", Text(bcolor.to_string())),
            ],
            Action::Export {
                file,
                format,
                quality,
            } => vec![
                ("file", Text(file.clone())),
                ("format", Text(format.as_str().into())),
                ("quality", Int((*quality).into())),
            ],
        }
    }

    /// Builds an action from named parameters, checking them against the
    /// operation's schema: every key present exactly once, nothing extra,
    /// each value of the declared type.
    pub fn from_fields(
        kind: OpKind,
        fields: Vec<(String, FieldValue)>,
    ) -> Result<Action, SchemaProblem> {
        let schema = kind.schema();
        let mut slots: Vec<Option<FieldValue>> = vec![None; schema.len()];
        for (key, value) in fields {
            let idx = schema
                .iter()
                .position(|(k, _)| *k == key)
                .ok_or_else(|| SchemaProblem::UnexpectedKey(key.clone()))?;
            if slots[idx].is_some() {
                return Err(SchemaProblem::DuplicateKey(key));
            }
            let expected = schema[idx].1;
            if value.kind() != expected {
                return Err(SchemaProblem::InvalidValue {
                    key,
                    expected: expected.describe().into(),
                });
            }
            slots[idx] = Some(value);
        }
        let mut args = Args { schema, slots };
        let action = match kind {
            OpKind::Import => Action::Import { file: args.text(0)? },
            OpKind::Crop => Action::Crop(PixelRect::new(
                args.uint(0)?,
                args.uint(1)?,
                args.uint(2)?,
                args.uint(3)?,
            )),
            OpKind::Rotate => Action::Rotate { turns: args.uint(0)? },
            OpKind::Flip => {
                let axis = args.text(0)?;
                Action::Flip(axis.parse().map_err(|_| args.invalid(0, "\"horizontal\" or \"vertical\""))?)
            }
            OpKind::BrightnessContrast => Action::BrightnessContrast {
                b: args.decimal(0)?,
                c: args.decimal(1)?,
            },
            OpKind::ColorBalance => Action::ColorBalance {
                r: args.decimal(0)?,
                g: args.decimal(1)?,
                b: args.decimal(2)?,
            },
            OpKind::Hue => Action::Hue { deg: args.decimal(0)? },
            OpKind::Threshold => Action::Threshold { t: args.decimal(0)? },
            OpKind::Equalize => Action::Equalize,
            OpKind::Meld => {
                let file = args.text(0)?;
                let ihash = args.hash(1)?;
                let (x, y, bw) = (args.uint(2)?, args.uint(3)?, args.uint(4)?);
                let bcolor = Rgba::parse_hex(&args.text(5)?)
                    .ok_or_else(|| args.invalid(5, "color \"#rrggbbaa\""))?;
                Action::Meld { file, ihash, x, y, bw, bcolor }
            }
            OpKind::Undo => Action::Undo,
            OpKind::Redo => Action::Redo,
            OpKind::Export => {
                let file = args.text(0)?;
                let format = args
                    .text(1)?
                    .parse()
                    .map_err(|_| args.invalid(1, "one of \"jpg\", \"tiff\", \"png\", \"bmp\""))?;
                let quality = args.byte(2)?;
                Action::Export { file, format, quality }
            }
        };
        Ok(action)
    }
}

struct Args {
    schema: &'static [(&'static str, FieldKind)],
    slots: Vec<Option<FieldValue>>,
}

impl Args {
    fn take(&mut self, idx: usize) -> Result<FieldValue, SchemaProblem> {
        self.slots[idx]
            .take()
            .ok_or_else(|| SchemaProblem::MissingKey(self.schema[idx].0.into()))
    }

    fn invalid(&self, idx: usize, expected: &str) -> SchemaProblem {
        SchemaProblem::InvalidValue {
            key: self.schema[idx].0.into(),
            expected: expected.into(),
        }
    }

    fn text(&mut self, idx: usize) -> Result<String, SchemaProblem> {
        match self.take(idx)? {
            FieldValue::Text(s) => Ok(s),
            _ => unreachable!("kind checked against schema"),
        }
    }

    fn decimal(&mut self, idx: usize) -> Result<Fixed6, SchemaProblem> {
        match self.take(idx)? {
            FieldValue::Decimal(d) => Ok(d),
            _ => unreachable!("kind checked against schema"),
        }
    }

    fn hash(&mut self, idx: usize) -> Result<ContentHash, SchemaProblem> {
        match self.take(idx)? {
            FieldValue::Hash(h) => Ok(h),
            _ => unreachable!("kind checked against schema"),
        }
    }

    fn int(&mut self, idx: usize, max: i64) -> Result<i64, SchemaProblem> {
        match self.take(idx)? {
            FieldValue::Int(v) if (0..=max).contains(&v) => Ok(v),
            FieldValue::Int(_) => Err(self.invalid(idx, &format!("integer in 0..={max}"))),
            _ => unreachable!("kind checked against schema"),
        }
    }

    fn uint(&mut self, idx: usize) -> Result<u32, SchemaProblem> {
        self.int(idx, u32::MAX.into()).map(|v| v as u32)
    }

    fn byte(&mut self, idx: usize) -> Result<u8, SchemaProblem> {
        self.int(idx, u8::MAX.into()).map(|v| v as u8)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed6_format() {
        assert_eq!(Fixed6::from_f64(0.2).unwrap().to_string(), "0.200000");
        assert_eq!(Fixed6::from_f64(-0.5).unwrap().to_string(), "-0.500000");
        assert_eq!(Fixed6::from_f64(-0.0000004).unwrap().to_string(), "0.000000");
        assert_eq!(Fixed6::from_f64(120.0).unwrap().to_string(), "120.000000");
        assert_eq!(Fixed6::from_micros(-1).to_string(), "-0.000001");
        assert_eq!(Fixed6::from_f64(f64::NAN), None);
        assert_eq!("0.200000".parse::<Fixed6>().unwrap().to_f64(), 0.2);
    }

    #[test]
    fn fixed6_parse_is_strict() {
        for bad in ["0.2", "00.200000", "-0.000000", "1.0000000", ".200000", "1e3", "+1.000000", ""] {
            assert!(bad.parse::<Fixed6>().is_err(), "{bad}");
        }
        assert_eq!("-12.000001".parse::<Fixed6>().unwrap(), Fixed6::from_micros(-12_000_001));
    }

    #[test]
    fn schema_checks() {
        let ok = Action::from_fields(
            OpKind::Rotate,
            vec![("turns".into(), FieldValue::Int(2))],
        );
        assert_eq!(ok, Ok(Action::Rotate { turns: 2 }));
        assert_eq!(
            Action::from_fields(OpKind::Rotate, vec![]),
            Err(SchemaProblem::MissingKey("turns".into()))
        );
        assert_eq!(
            Action::from_fields(
                OpKind::Equalize,
                vec![("x".into(), FieldValue::Int(1))]
            ),
            Err(SchemaProblem::UnexpectedKey("x".into()))
        );
        assert!(matches!(
            Action::from_fields(OpKind::Rotate, vec![("turns".into(), FieldValue::Int(-1))]),
            Err(SchemaProblem::InvalidValue { .. })
        ));
        assert!(matches!(
            Action::from_fields(
                OpKind::Export,
                vec![
                    ("file".into(), FieldValue::Text("o.png".into())),
                    ("format".into(), FieldValue::Text("png".into())),
                    ("quality".into(), FieldValue::Int(300)),
                ]
            ),
            Err(SchemaProblem::InvalidValue { key, .. }) if key == "quality"
        ));
    }

    #[test]
    fn fields_round_trip_through_schema() {
        let action = Action::Meld {
            file: "inset.png".into(),
            ihash: ContentHash::from_bytes([7; 32]),
            x: 3,
            y: 4,
            bw: 1,
            bcolor: Rgba::new(1, 2, 3, 255),
        };
        let fields = action
            .fields()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        assert_eq!(Action::from_fields(OpKind::Meld, fields), Ok(action));
    }
}
