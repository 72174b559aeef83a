//! Re-executing a journal against its source image.
//!
//! Replay is always recomputed from the source; there is no cache of
//! intermediate states. A hash mismatch does not stop the replay: the
//! computed raster is carried forward so the report pinpoints the first
//! divergence and every later one.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::hash::{content_hash, ContentHash};
use crate::history::History;
use crate::journal::{Action, Journal, JournalEntry, JournalError, OpKind};
use crate::ops::{self, ChannelGains, HueShift, MeldSpec, OpError, ToneParams};
use crate::raster::Raster;

/// Lookup of melded images by content hash.
pub trait InsertStore {
    fn get_insert(&self, hash: &ContentHash) -> Option<&Raster>;
}

impl InsertStore for HashMap<ContentHash, Raster> {
    fn get_insert(&self, hash: &ContentHash) -> Option<&Raster> {
        self.get(hash)
    }
}

impl<S: InsertStore + ?Sized> InsertStore for &S {
    fn get_insert(&self, hash: &ContentHash) -> Option<&Raster> {
        (**self).get_insert(hash)
    }
}

/// An empty store, for journals without MELD entries.
pub struct NoInserts;

impl InsertStore for NoInserts {
    fn get_insert(&self, _: &ContentHash) -> Option<&Raster> {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExecError {
    #[error(transparent)]
    Op(#[from] OpError),
    #[error("inserted image {0} is not available")]
    MissingInsert(ContentHash),
    #[error("nothing to undo")]
    NothingToUndo,
    #[error("nothing to redo")]
    NothingToRedo,
    #[error("{0} is not an image operation")]
    NotAnEdit(OpKind),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReplayError {
    #[error("source image hash {actual} does not match journal source hash {expected}")]
    SourceMismatch {
        expected: ContentHash,
        actual: ContentHash,
    },
    #[error("entry {seq} {op}: {source}")]
    Execution {
        seq: u64,
        op: OpKind,
        source: ExecError,
    },
    #[error("step {requested} out of range 0..={len}")]
    IndexOutOfRange { requested: usize, len: usize },
    #[error(transparent)]
    Journal(#[from] JournalError),
}

impl ReplayError {
    pub fn seq(&self) -> Option<u64> {
        match self {
            ReplayError::Execution { seq, .. } => Some(*seq),
            _ => None,
        }
    }
}

/// Applies one image operation. IMPORT, UNDO, REDO and EXPORT are not
/// image operations and are rejected.
pub fn execute_edit(
    action: &Action,
    current: &Raster,
    inserts: &dyn InsertStore,
) -> Result<Raster, ExecError> {
    let out = match action {
        Action::Crop(rect) => ops::crop(current, *rect)?,
        Action::Rotate { turns } => ops::rotate(current, *turns)?,
        Action::Flip(axis) => ops::flip(current, *axis),
        Action::BrightnessContrast { b, c } => ops::brightness_contrast(
            current,
            ToneParams {
                brightness: b.to_f64(),
                contrast: c.to_f64(),
            },
        )?,
        Action::ColorBalance { r, g, b } => ops::color_balance(
            current,
            ChannelGains {
                r_gain: r.to_f64(),
                g_gain: g.to_f64(),
                b_gain: b.to_f64(),
            },
        )?,
        Action::Hue { deg } => ops::hue_rotate(current, HueShift { degrees: deg.to_f64() })?,
        Action::Threshold { t } => ops::threshold(current, t.to_f64())?,
        Action::Equalize => ops::equalize_histogram(current),
        Action::Meld {
            ihash,
            x,
            y,
            bw,
            bcolor,
            ..
        } => {
            let insert = inserts
                .get_insert(ihash)
                .ok_or(ExecError::MissingInsert(*ihash))?;
            ops::meld(
                current,
                insert,
                MeldSpec {
                    x: *x,
                    y: *y,
                    border_width: *bw,
                    border_color: *bcolor,
                },
            )?
        }
        other => return Err(ExecError::NotAnEdit(other.kind())),
    };
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EntryRecord {
    pub seq: u64,
    pub op: OpKind,
    pub computed: ContentHash,
    pub recorded: ContentHash,
    pub matched: bool,
    pub elapsed_us: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReplayReport {
    pub records: Vec<EntryRecord>,
    pub verdict: Verdict,
}

impl ReplayReport {
    fn from_records(records: Vec<EntryRecord>) -> Self {
        let verdict = if records.iter().all(|r| r.matched) {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        ReplayReport { records, verdict }
    }

    pub fn first_mismatch(&self) -> Option<u64> {
        self.records.iter().find(|r| !r.matched).map(|r| r.seq)
    }

    /// One line per entry plus a closing verdict line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let _ = writeln!(
                out,
                "{} {} computed={} recorded={} {}",
                r.seq,
                r.op,
                r.computed.short(8),
                r.recorded.short(8),
                if r.matched { "MATCH" } else { "MISMATCH" }
            );
        }
        let _ = writeln!(out, "verdict: {}", self.verdict.as_str());
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DiffReport {
    pub identical: bool,
    pub dims_match: bool,
    pub differing_pixel_count: u64,
    pub max_channel_delta: u8,
    pub a_dims: (u32, u32),
    pub b_dims: (u32, u32),
}

impl DiffReport {
    pub fn render(&self) -> String {
        if self.identical {
            "identical\n".into()
        } else if !self.dims_match {
            format!(
                "dimensions differ: {}x{} vs {}x{}\n",
                self.a_dims.0, self.a_dims.1, self.b_dims.0, self.b_dims.1
            )
        } else {
            format!(
                "differing pixels: {} max channel delta: {}\n",
                self.differing_pixel_count, self.max_channel_delta
            )
        }
    }
}

pub fn diff(a: &Raster, b: &Raster) -> DiffReport {
    let (a_dims, b_dims) = (a.dimensions(), b.dimensions());
    if a_dims != b_dims {
        return DiffReport {
            identical: false,
            dims_match: false,
            differing_pixel_count: 0,
            max_channel_delta: 0,
            a_dims,
            b_dims,
        };
    }
    let mut count = 0u64;
    let mut max_delta = 0u8;
    for (pa, pb) in a.pixels().zip(b.pixels()) {
        if pa != pb {
            count += 1;
            for c in 0..4 {
                max_delta = max_delta.max(pa.0[c].abs_diff(pb.0[c]));
            }
        }
    }
    DiffReport {
        identical: count == 0,
        dims_match: true,
        differing_pixel_count: count,
        max_channel_delta: max_delta,
        a_dims,
        b_dims,
    }
}

/// Walks journal entries one at a time, tracking undo/redo exactly as a
/// session does.
struct Executor<'a> {
    source: &'a Raster,
    inserts: &'a dyn InsertStore,
    history: History<Raster>,
}

impl<'a> Executor<'a> {
    fn new(source: &'a Raster, inserts: &'a dyn InsertStore) -> Self {
        Executor {
            source,
            inserts,
            history: History::new(source.clone()),
        }
    }

    fn apply(&mut self, entry: &JournalEntry) -> Result<(), ReplayError> {
        let fail = |source| ReplayError::Execution {
            seq: entry.seq,
            op: entry.action.kind(),
            source,
        };
        match &entry.action {
            Action::Import { .. } => self.history = History::new(self.source.clone()),
            Action::Undo => {
                if !self.history.undo() {
                    return Err(fail(ExecError::NothingToUndo));
                }
            }
            Action::Redo => {
                if !self.history.redo() {
                    return Err(fail(ExecError::NothingToRedo));
                }
            }
            Action::Export { .. } => {}
            edit => {
                let next = execute_edit(edit, self.history.current(), self.inserts).map_err(fail)?;
                self.history.push(next);
            }
        }
        Ok(())
    }

    fn current(&self) -> &Raster {
        self.history.current()
    }
}

fn check_source(journal: &Journal, source: &Raster) -> Result<(), ReplayError> {
    let actual = content_hash(source);
    if actual != journal.source_hash {
        return Err(ReplayError::SourceMismatch {
            expected: journal.source_hash,
            actual,
        });
    }
    Ok(())
}

pub fn replay(journal: &Journal, source: &Raster) -> Result<(Raster, ReplayReport), ReplayError> {
    replay_with(journal, source, &NoInserts)
}

pub fn replay_with(
    journal: &Journal,
    source: &Raster,
    inserts: &dyn InsertStore,
) -> Result<(Raster, ReplayReport), ReplayError> {
    check_source(journal, source)?;
    let mut exec = Executor::new(source, inserts);
    let mut records = Vec::with_capacity(journal.len());
    for entry in journal.sorted_entries() {
        let started = Instant::now();
        exec.apply(entry)?;
        let computed = content_hash(exec.current());
        records.push(EntryRecord {
            seq: entry.seq,
            op: entry.action.kind(),
            computed,
            recorded: entry.post_hash,
            matched: computed == entry.post_hash,
            elapsed_us: started.elapsed().as_micros() as u64,
        });
    }
    Ok((exec.current().clone(), ReplayReport::from_records(records)))
}

/// Raster state after the first `n` entries. `n = 0` is the source itself.
pub fn step(
    journal: &Journal,
    source: &Raster,
    n: usize,
    inserts: &dyn InsertStore,
) -> Result<Raster, ReplayError> {
    check_source(journal, source)?;
    if n > journal.len() {
        return Err(ReplayError::IndexOutOfRange {
            requested: n,
            len: journal.len(),
        });
    }
    let mut exec = Executor::new(source, inserts);
    for entry in journal.sorted_entries().into_iter().take(n) {
        exec.apply(entry)?;
    }
    Ok(exec.current().clone())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verification {
    pub verdict: Verdict,
    pub replay: ReplayReport,
    pub diff: DiffReport,
    pub final_hash: ContentHash,
    pub claimed_hash: ContentHash,
}

impl Verification {
    pub fn render(&self) -> String {
        let mut out = format!("{}\n", self.verdict.as_str());
        out.push_str(&self.replay.render());
        let _ = writeln!(
            out,
            "final={} claimed={}",
            self.final_hash.short(8),
            self.claimed_hash.short(8)
        );
        out.push_str(&self.diff.render());
        out
    }
}

/// PASS iff every journal entry reproduces its recorded hash and the final
/// raster has the same content hash as `claimed`.
pub fn verify(
    journal: &Journal,
    source: &Raster,
    claimed: &Raster,
    inserts: &dyn InsertStore,
) -> Result<Verification, ReplayError> {
    let (out, report) = replay_with(journal, source, inserts)?;
    let final_hash = content_hash(&out);
    let claimed_hash = content_hash(claimed);
    let verdict = if report.verdict == Verdict::Pass && final_hash == claimed_hash {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(Verification {
        verdict,
        diff: diff(&out, claimed),
        replay: report,
        final_hash,
        claimed_hash,
    })
}

/// Reduces a journal to its linear history: undone edits and UNDO/REDO
/// entries are removed, surviving entries renumbered and their hashes
/// recomputed by execution.
///
/// EXPORT entries stay attached to the state they exported and are kept
/// only if that state survives.
pub fn normalize(
    journal: &Journal,
    source: &Raster,
    inserts: &dyn InsertStore,
) -> Result<Journal, ReplayError> {
    check_source(journal, source)?;
    let entries = journal.sorted_entries();
    let import = entries
        .first()
        .filter(|e| e.action.kind() == OpKind::Import)
        .ok_or_else(|| JournalError::InvariantViolation("first entry is not IMPORT".into()))?;

    // node 0 is the imported source; every edit creates a node
    let mut nodes: Vec<(&Action, Vec<&Action>)> = vec![(&import.action, Vec::new())];
    let mut history = History::new(0usize);
    for entry in &entries[1..] {
        let fail = |source| ReplayError::Execution {
            seq: entry.seq,
            op: entry.action.kind(),
            source,
        };
        match &entry.action {
            Action::Import { .. } => {
                return Err(JournalError::DuplicateImport { line: None, seq: entry.seq }.into())
            }
            Action::Undo => {
                if !history.undo() {
                    return Err(fail(ExecError::NothingToUndo));
                }
            }
            Action::Redo => {
                if !history.redo() {
                    return Err(fail(ExecError::NothingToRedo));
                }
            }
            Action::Export { .. } => nodes[*history.current()].1.push(&entry.action),
            edit => {
                nodes.push((edit, Vec::new()));
                history.push(nodes.len() - 1);
            }
        }
    }

    let mut out = Journal::new(journal.source_name.clone(), journal.source_hash);
    let mut current = source.clone();
    for &node in history.live_path() {
        let (action, exports) = &nodes[node];
        if node != 0 {
            current = execute_edit(action, &current, inserts).map_err(|source| {
                ReplayError::Execution {
                    seq: out.last_seq() + 1,
                    op: action.kind(),
                    source,
                }
            })?;
        }
        let hash = if node == 0 { journal.source_hash } else { content_hash(&current) };
        out.push((*action).clone(), hash)?;
        for export in exports {
            out.push((*export).clone(), hash)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::{Axis, PixelRect};
    use crate::raster::Rgba;

    fn source() -> Raster {
        Raster::from_fn(3, 2, |x, y| Rgba([x as u8 * 50, y as u8 * 90, 3, 255])).unwrap()
    }

    /// Builds a journal by executing actions, recording true hashes.
    fn record(src: &Raster, actions: &[Action]) -> Journal {
        let mut j = Journal::start("src.png", content_hash(src));
        let mut exec = Executor::new(src, &NoInserts);
        for action in actions {
            let seq = j.last_seq() + 1;
            let entry = JournalEntry { seq, action: action.clone(), post_hash: content_hash(src) };
            exec.apply(&entry).unwrap();
            j.push(action.clone(), content_hash(exec.current())).unwrap();
        }
        j
    }

    fn kinds(j: &Journal) -> Vec<OpKind> {
        j.entries.iter().map(|e| e.action.kind()).collect()
    }

    #[test]
    fn import_only_replays_to_source() {
        let src = source();
        let j = record(&src, &[]);
        let (out, report) = replay(&j, &src).unwrap();
        assert_eq!(out, src);
        assert_eq!(report.verdict, Verdict::Pass);
    }

    #[test]
    fn double_half_turn_is_identity() {
        let src = source();
        let j = record(&src, &[Action::Rotate { turns: 2 }, Action::Rotate { turns: 2 }]);
        let (out, report) = replay(&j, &src).unwrap();
        assert_eq!(out, src);
        assert_eq!(report.verdict, Verdict::Pass);
        assert_eq!(report.records.len(), 3);
    }

    #[test]
    fn tampered_hash_fails_at_that_seq() {
        let src = source();
        let mut j = record(
            &src,
            &[Action::Flip(Axis::Vertical), Action::Crop(PixelRect::new(1, 0, 2, 2)), Action::Equalize],
        );
        let mut bytes = *j.entries[2].post_hash.as_bytes();
        bytes[0] ^= 0x10;
        j.entries[2].post_hash = ContentHash::from_bytes(bytes);
        let (_, report) = replay(&j, &src).unwrap();
        assert_eq!(report.verdict, Verdict::Fail);
        assert_eq!(report.first_mismatch(), Some(3));
        // later entries still verified against the computed state
        assert!(report.records[3].matched);
        assert!(report.render().contains("3 CROP computed="));
        assert!(report.render().contains("MISMATCH"));
    }

    #[test]
    fn source_mismatch() {
        let src = source();
        let j = record(&src, &[]);
        let other = Raster::filled(1, 1, Rgba::BLACK).unwrap();
        assert!(matches!(replay(&j, &other), Err(ReplayError::SourceMismatch { .. })));
    }

    #[test]
    fn step_through_flips() {
        let src = source();
        let j = record(&src, &[Action::Flip(Axis::Horizontal), Action::Flip(Axis::Horizontal)]);
        assert_eq!(step(&j, &src, 0, &NoInserts).unwrap(), src);
        assert_eq!(step(&j, &src, 1, &NoInserts).unwrap(), src);
        assert_eq!(step(&j, &src, 2, &NoInserts).unwrap(), ops::flip(&src, Axis::Horizontal));
        assert_eq!(step(&j, &src, 3, &NoInserts).unwrap(), src);
        assert!(matches!(
            step(&j, &src, 4, &NoInserts),
            Err(ReplayError::IndexOutOfRange { requested: 4, len: 3 })
        ));
    }

    #[test]
    fn verify_detects_pixel_and_dims() {
        let src = source();
        let j = record(&src, &[Action::Rotate { turns: 1 }]);
        let (out, _) = replay(&j, &src).unwrap();
        let ok = verify(&j, &src, &out, &NoInserts).unwrap();
        assert_eq!(ok.verdict, Verdict::Pass);
        assert!(ok.diff.identical);

        let mut bad = out.clone();
        let px = bad.get(0, 1);
        bad.put(0, 1, Rgba([px.0[0] ^ 1, px.0[1], px.0[2], px.0[3]]));
        let v = verify(&j, &src, &bad, &NoInserts).unwrap();
        assert_eq!(v.verdict, Verdict::Fail);
        assert_eq!(v.diff.differing_pixel_count, 1);
        assert_eq!(v.replay.verdict, Verdict::Pass);

        let v = verify(&j, &src, &src, &NoInserts).unwrap();
        assert_eq!(v.verdict, Verdict::Fail);
        assert!(!v.diff.dims_match);
    }

    #[test]
    fn diff_counts() {
        let a = Raster::filled(2, 2, Rgba([10, 10, 10, 255])).unwrap();
        assert!(diff(&a, &a).identical);
        let mut b = a.clone();
        b.put(1, 1, Rgba([10, 13, 10, 255]));
        let d = diff(&a, &b);
        assert_eq!((d.differing_pixel_count, d.max_channel_delta), (1, 3));
        let c = Raster::filled(3, 3, Rgba::BLACK).unwrap();
        assert!(!diff(&a, &c).dims_match);
        assert!(diff(&a, &c).render().starts_with("dimensions differ"));
    }

    #[test]
    fn undo_replays_like_session() {
        let src = source();
        let j = record(&src, &[Action::Equalize, Action::Undo, Action::Redo, Action::Undo]);
        let (out, report) = replay(&j, &src).unwrap();
        assert_eq!(out, src);
        assert_eq!(report.verdict, Verdict::Pass);
    }

    #[test]
    fn undo_without_history_is_an_error() {
        let src = source();
        let mut j = Journal::start("src.png", content_hash(&src));
        j.push(Action::Undo, content_hash(&src)).unwrap();
        assert!(matches!(
            replay(&j, &src),
            Err(ReplayError::Execution { seq: 2, source: ExecError::NothingToUndo, .. })
        ));
    }

    #[test]
    fn normalize_examples() {
        let src = source();
        let crop = Action::Crop(PixelRect::new(0, 0, 2, 2));
        let n = normalize(&record(&src, &[crop.clone(), Action::Undo]), &src, &NoInserts).unwrap();
        assert_eq!(kinds(&n), vec![OpKind::Import]);

        let n = normalize(&record(&src, &[crop.clone(), Action::Undo, Action::Redo]), &src, &NoInserts)
            .unwrap();
        assert_eq!(kinds(&n), vec![OpKind::Import, OpKind::Crop]);

        let j = record(
            &src,
            &[Action::Flip(Axis::Horizontal), Action::Undo, Action::Rotate { turns: 1 }],
        );
        let n = normalize(&j, &src, &NoInserts).unwrap();
        assert_eq!(kinds(&n), vec![OpKind::Import, OpKind::Rotate]);
        assert_eq!(n.entries[1].seq, 2);
        assert_eq!(replay(&n, &src).unwrap().0, replay(&j, &src).unwrap().0);
        assert_eq!(normalize(&n, &src, &NoInserts).unwrap(), n);
    }

    #[test]
    fn normalize_keeps_exports_of_surviving_states() {
        let src = source();
        let export = |f: &str| Action::Export {
            file: f.into(),
            format: crate::codecs::ImageFormat::Png,
            quality: 95,
        };
        let j = record(
            &src,
            &[export("a.png"), Action::Equalize, export("b.png"), Action::Undo, Action::Rotate { turns: 2 }, export("c.png")],
        );
        let n = normalize(&j, &src, &NoInserts).unwrap();
        assert_eq!(
            kinds(&n),
            vec![OpKind::Import, OpKind::Export, OpKind::Rotate, OpKind::Export]
        );
        assert_eq!(replay(&n, &src).unwrap().1.verdict, Verdict::Pass);
    }
}
