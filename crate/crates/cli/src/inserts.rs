use std::collections::HashMap;
use std::path::{Path, PathBuf};

use imgjournal_core::{content_hash, Action, ContentHash, Journal, Raster};

use crate::Failure;

/// Loads the images a journal melds: every `--insert` path, then any MELD
/// file still missing, resolved relative to the journal's directory.
/// Images whose hash matches no MELD entry are ignored; a MELD whose image
/// cannot be found surfaces later as a replay error.
pub fn collect(
    journal: &Journal,
    journal_path: &Path,
    explicit: &[PathBuf],
    read: impl Fn(&Path) -> Result<Raster, Failure>,
) -> Result<HashMap<ContentHash, Raster>, Failure> {
    let mut store = HashMap::new();
    for path in explicit {
        let raster = read(path)?;
        store.insert(content_hash(&raster), raster);
    }
    let dir = journal_path.parent().unwrap_or(Path::new("."));
    for entry in &journal.entries {
        let Action::Meld { file, ihash, .. } = &entry.action else { continue };
        if store.contains_key(ihash) {
            continue;
        }
        let candidate = dir.join(file);
        if !candidate.is_file() {
            continue;
        }
        let raster = read(&candidate)?;
        store.insert(content_hash(&raster), raster);
    }
    Ok(store)
}
