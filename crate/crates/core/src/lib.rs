//! Deterministic image editing with an executable journal.
//!
//! Every edit applied through a [`Session`] is recorded as one line of a
//! [`Journal`]. A journal can be replayed against the retained source image,
//! stepped through entry by entry, normalized to its linear history, and
//! verified against a claimed output by comparing content hashes of decoded
//! pixels.

pub mod codecs;
pub mod hash;
mod history;
pub mod journal;
pub mod ops;
pub mod raster;
pub mod replay;
pub mod session;

pub use codecs::{export_image, import_image, CodecError, ImageFormat, Imported};
pub use hash::{content_hash, ContentHash};
pub use journal::{Action, Fixed6, Journal, JournalEntry, JournalError, OpKind};
pub use ops::{Axis, ChannelGains, HueShift, MeldSpec, OpError, PixelRect, ToneParams};
pub use raster::{Raster, RasterError, Rgba};
pub use replay::{
    diff, normalize, replay, replay_with, step, verify, DiffReport, InsertStore, ReplayError,
    ReplayReport, Verdict,
};
pub use session::{Session, SessionError};
