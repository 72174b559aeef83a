//! The executable journal: an ordered, append-only list of actions bound to
//! a source image by its content hash.

mod action;
mod text;

pub use action::{Action, FieldKind, FieldValue, Fixed6, OpKind, SchemaProblem};
pub use text::{entry_line, parse, serialize, HEADER_MAGIC};

use thiserror::Error;

use crate::hash::ContentHash;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum JournalError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{}entry {seq} {op}: {problem}", line_prefix(*.line))]
    Schema {
        line: Option<usize>,
        seq: u64,
        op: String,
        problem: SchemaProblem,
    },
    #[error("{}{message}", line_prefix(*.line))]
    Sequence {
        line: Option<usize>,
        message: String,
    },
    #[error("{}duplicate IMPORT at entry {seq}", line_prefix(*.line))]
    DuplicateImport { line: Option<usize>, seq: u64 },
    #[error("journal invariant violated: {0}")]
    InvariantViolation(String),
}

fn line_prefix(line: Option<usize>) -> String {
    line.map(|l| format!("line {l}: ")).unwrap_or_default()
}

impl JournalError {
    /// Source line the error was found on, for errors raised while parsing.
    pub fn line(&self) -> Option<usize> {
        match self {
            JournalError::Syntax { line, .. } => Some(*line),
            JournalError::Schema { line, .. }
            | JournalError::Sequence { line, .. }
            | JournalError::DuplicateImport { line, .. } => *line,
            JournalError::InvariantViolation(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JournalEntry {
    pub seq: u64,
    pub action: Action,
    /// Content hash of the raster after this entry takes effect.
    pub post_hash: ContentHash,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Journal {
    pub version: u32,
    pub source_name: String,
    pub source_hash: ContentHash,
    pub entries: Vec<JournalEntry>,
}

impl Journal {
    /// A header with no entries yet. Not serializable until an IMPORT is
    /// appended.
    pub fn new(source_name: impl Into<String>, source_hash: ContentHash) -> Self {
        Journal {
            version: FORMAT_VERSION,
            source_name: source_name.into(),
            source_hash,
            entries: Vec::new(),
        }
    }

    /// Header plus the IMPORT entry for the source.
    pub fn start(source_name: impl Into<String>, source_hash: ContentHash) -> Self {
        let source_name = source_name.into();
        let mut j = Journal::new(source_name.clone(), source_hash);
        j.push(Action::Import { file: source_name }, source_hash)
            .expect("first IMPORT on an empty journal");
        j
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn last_seq(&self) -> u64 {
        self.entries.iter().map(|e| e.seq).max().unwrap_or(0)
    }

    fn has_import(&self) -> bool {
        self.entries.iter().any(|e| e.action.kind() == OpKind::Import)
    }

    /// Returns a new journal with one more entry; `self` is left untouched.
    pub fn append(&self, action: Action, post_hash: ContentHash) -> Result<Journal, JournalError> {
        let mut next = self.clone();
        next.push(action, post_hash)?;
        Ok(next)
    }

    /// In-place append. On error the journal is unchanged.
    pub fn push(&mut self, action: Action, post_hash: ContentHash) -> Result<&JournalEntry, JournalError> {
        let seq = self.last_seq() + 1;
        match (action.kind() == OpKind::Import, self.has_import()) {
            (true, true) => return Err(JournalError::DuplicateImport { line: None, seq }),
            (false, false) => {
                return Err(JournalError::Sequence {
                    line: None,
                    message: format!("entry {seq} {} precedes IMPORT", action.kind()),
                })
            }
            (true, false) if post_hash != self.source_hash => {
                return Err(JournalError::InvariantViolation(
                    "IMPORT hash differs from header source hash".into(),
                ))
            }
            _ => {}
        }
        self.entries.push(JournalEntry { seq, action, post_hash });
        Ok(self.entries.last().expect("just pushed"))
    }

    /// Checks the structural invariants against entries sorted by seq.
    pub fn validate(&self) -> Result<(), JournalError> {
        if self.version != FORMAT_VERSION {
            return Err(JournalError::InvariantViolation(format!(
                "unsupported version {}",
                self.version
            )));
        }
        let mut seqs: Vec<(u64, &JournalEntry)> = self.entries.iter().map(|e| (e.seq, e)).collect();
        seqs.sort_by_key(|(s, _)| *s);
        let Some((_, first)) = seqs.first() else {
            return Err(JournalError::InvariantViolation("journal has no IMPORT entry".into()));
        };
        for (i, (seq, _)) in seqs.iter().enumerate() {
            if *seq != i as u64 + 1 {
                return Err(JournalError::InvariantViolation(format!(
                    "sequence numbers not contiguous: expected {}, found {seq}",
                    i + 1
                )));
            }
        }
        if first.action.kind() != OpKind::Import {
            return Err(JournalError::InvariantViolation("first entry is not IMPORT".into()));
        }
        if first.post_hash != self.source_hash {
            return Err(JournalError::InvariantViolation(
                "IMPORT hash differs from header source hash".into(),
            ));
        }
        if let Some((seq, _)) = seqs[1..].iter().find(|(_, e)| e.action.kind() == OpKind::Import) {
            return Err(JournalError::DuplicateImport { line: None, seq: *seq });
        }
        Ok(())
    }

    /// Entries in ascending seq order.
    pub fn sorted_entries(&self) -> Vec<&JournalEntry> {
        let mut v: Vec<&JournalEntry> = self.entries.iter().collect();
        v.sort_by_key(|e| e.seq);
        v
    }
}
