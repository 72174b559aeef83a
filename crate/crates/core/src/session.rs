//! Interactive editing state: the single mutation path shared by the CLI
//! and the HTTP service.
//!
//! Every successful mutation appends exactly one journal entry. Failed
//! mutations leave the raster, history and journal untouched.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use crate::codecs::{export_image, CodecError, ImageFormat};
use crate::hash::{content_hash, ContentHash};
use crate::history::History;
use crate::journal::{serialize, Action, Journal, JournalEntry, JournalError};
use crate::raster::Raster;
use crate::replay::{execute_edit, replay_with, ExecError, InsertStore, ReplayError, Verdict};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Journal(#[from] JournalError),
    #[error("writing journal to {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("journal no longer reproduces the current image: {0}")]
    Incoherent(String),
}

impl SessionError {
    pub fn is_nothing_to_undo_or_redo(&self) -> bool {
        matches!(
            self,
            SessionError::Exec(ExecError::NothingToUndo | ExecError::NothingToRedo)
        )
    }
}

/// A recorded raster state.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub hash: ContentHash,
    pub raster: Arc<Raster>,
}

impl Snapshot {
    fn new(raster: Raster) -> Self {
        Snapshot {
            hash: content_hash(&raster),
            raster: Arc::new(raster),
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Inserts(HashMap<ContentHash, (String, Raster)>);

impl InsertStore for Inserts {
    fn get_insert(&self, hash: &ContentHash) -> Option<&Raster> {
        self.0.get(hash).map(|(_, r)| r)
    }
}

#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    source: Snapshot,
    history: History<Snapshot>,
    journal: Journal,
    inserts: Inserts,
    journal_path: Option<PathBuf>,
}

fn new_session_id() -> String {
    format!("{:032x}", rand::random::<u128>())
}

impl Session {
    pub fn open(source: Raster, name: impl Into<String>) -> Session {
        let source = Snapshot::new(source);
        Session {
            id: new_session_id(),
            journal: Journal::start(name, source.hash),
            history: History::new(source.clone()),
            source,
            inserts: Inserts::default(),
            journal_path: None,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn journal(&self) -> &Journal {
        &self.journal
    }

    pub fn journal_text(&self) -> String {
        serialize(&self.journal).expect("session journals are always valid")
    }

    pub fn source(&self) -> &Raster {
        &self.source.raster
    }

    pub fn source_name(&self) -> &str {
        &self.journal.source_name
    }

    pub fn source_hash(&self) -> ContentHash {
        self.source.hash
    }

    pub fn current(&self) -> &Raster {
        &self.history.current().raster
    }

    pub fn current_snapshot(&self) -> &Snapshot {
        self.history.current()
    }

    pub fn current_hash(&self) -> ContentHash {
        self.history.current().hash
    }

    /// Every state produced since import, including undone ones.
    pub fn history(&self) -> &[Snapshot] {
        self.history.archive()
    }

    pub fn history_len(&self) -> usize {
        self.history.archive().len()
    }

    pub fn undo_depth(&self) -> usize {
        self.history.undo_depth()
    }

    pub fn inserts(&self) -> &dyn InsertStore {
        &self.inserts
    }

    /// Name under which an insert was registered.
    pub fn insert_name(&self, hash: &ContentHash) -> Option<&str> {
        self.inserts.0.get(hash).map(|(n, _)| n.as_str())
    }

    /// Registers an image that MELD actions can reference by hash.
    pub fn add_insert(&mut self, name: impl Into<String>, raster: Raster) -> ContentHash {
        let hash = content_hash(&raster);
        self.inserts.0.entry(hash).or_insert((name.into(), raster));
        hash
    }

    /// Writes the journal to `path` now and after every later mutation.
    pub fn set_journal_path(&mut self, path: impl Into<PathBuf>) -> Result<(), SessionError> {
        let path = path.into();
        write_journal(&path, &self.journal)?;
        self.journal_path = Some(path);
        Ok(())
    }

    fn commit_journal(&mut self, action: Action, post_hash: ContentHash) -> Result<(), SessionError> {
        let next = self.journal.append(action, post_hash)?;
        if let Some(path) = &self.journal_path {
            write_journal(path, &next)?;
        }
        self.journal = next;
        Ok(())
    }

    /// Applies an image operation to the current raster. Any pending redo
    /// branch is discarded from the undo stack (its states stay archived).
    pub fn apply(&mut self, action: Action) -> Result<&JournalEntry, SessionError> {
        if !action.kind().is_edit() {
            return Err(ExecError::NotAnEdit(action.kind()).into());
        }
        let next = Snapshot::new(execute_edit(&action, self.current(), &self.inserts)?);
        let hash = next.hash;
        self.commit_journal(action, hash)?;
        self.history.push(next);
        Ok(self.last_entry())
    }

    pub fn undo(&mut self) -> Result<&JournalEntry, SessionError> {
        let mut history = self.history.clone();
        if !history.undo() {
            return Err(ExecError::NothingToUndo.into());
        }
        self.commit_journal(Action::Undo, history.current().hash)?;
        self.history = history;
        Ok(self.last_entry())
    }

    pub fn redo(&mut self) -> Result<&JournalEntry, SessionError> {
        let mut history = self.history.clone();
        if !history.redo() {
            return Err(ExecError::NothingToRedo.into());
        }
        self.commit_journal(Action::Redo, history.current().hash)?;
        self.history = history;
        Ok(self.last_entry())
    }

    /// Encodes the current raster and records an EXPORT entry.
    pub fn export(
        &mut self,
        file: impl Into<String>,
        format: ImageFormat,
        quality: u8,
    ) -> Result<Vec<u8>, SessionError> {
        let bytes = export_image(self.current(), format, quality)?;
        let action = Action::Export {
            file: file.into(),
            format,
            quality,
        };
        self.commit_journal(action, self.current_hash())?;
        Ok(bytes)
    }

    fn last_entry(&self) -> &JournalEntry {
        self.journal.entries.last().expect("journal starts with IMPORT")
    }

    /// Replays the journal over the source and checks it reproduces the
    /// current raster.
    pub fn check_coherence(&self) -> Result<(), SessionError> {
        let (out, report) = replay_with(&self.journal, self.source(), &self.inserts)
            .map_err(|e: ReplayError| SessionError::Incoherent(e.to_string()))?;
        if report.verdict != Verdict::Pass {
            return Err(SessionError::Incoherent(format!(
                "entry {} does not reproduce its recorded hash",
                report.first_mismatch().unwrap_or_default()
            )));
        }
        let hash = content_hash(&out);
        if hash != self.current_hash() {
            return Err(SessionError::Incoherent(format!(
                "replay ends at {} but current is {}",
                hash.short(8),
                self.current_hash().short(8)
            )));
        }
        Ok(())
    }
}

fn write_journal(path: &Path, journal: &Journal) -> Result<(), SessionError> {
    let text = serialize(journal)?;
    let io = |source| SessionError::Io {
        path: path.to_path_buf(),
        source,
    };
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, text).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}
