/// Linear undo/redo history over an archive of every state ever produced.
///
/// `timeline` indexes into `archive` and holds the current undo stack.
/// Pushing after undos drops the redo branch from the timeline; the archived
/// states stay recorded.
#[derive(Debug, Clone)]
pub(crate) struct History<T> {
    archive: Vec<T>,
    timeline: Vec<usize>,
    undo_depth: usize,
}

impl<T> History<T> {
    pub fn new(initial: T) -> Self {
        History {
            archive: vec![initial],
            timeline: vec![0],
            undo_depth: 0,
        }
    }

    fn cursor(&self) -> usize {
        self.timeline.len() - 1 - self.undo_depth
    }

    pub fn current(&self) -> &T {
        &self.archive[self.timeline[self.cursor()]]
    }

    pub fn push(&mut self, state: T) {
        self.timeline.truncate(self.cursor() + 1);
        self.archive.push(state);
        self.timeline.push(self.archive.len() - 1);
        self.undo_depth = 0;
    }

    pub fn can_undo(&self) -> bool {
        self.cursor() > 0
    }

    pub fn can_redo(&self) -> bool {
        self.undo_depth > 0
    }

    /// Returns false (and changes nothing) when there is nothing to undo.
    pub fn undo(&mut self) -> bool {
        if self.can_undo() {
            self.undo_depth += 1;
            true
        } else {
            false
        }
    }

    pub fn redo(&mut self) -> bool {
        if self.can_redo() {
            self.undo_depth -= 1;
            true
        } else {
            false
        }
    }

    pub fn undo_depth(&self) -> usize {
        self.undo_depth
    }

    pub fn archive(&self) -> &[T] {
        &self.archive
    }

    /// States from the initial one up to and including the current one.
    pub fn live_path(&self) -> impl Iterator<Item = &T> + '_ {
        self.timeline[..=self.cursor()].iter().map(|&i| &self.archive[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_after_undo_drops_redo_branch() {
        let mut h = History::new(0);
        h.push(1);
        h.push(2);
        assert!(h.undo());
        assert_eq!(*h.current(), 1);
        h.push(3);
        assert!(!h.can_redo());
        assert_eq!(h.live_path().copied().collect::<Vec<_>>(), vec![0, 1, 3]);
        assert_eq!(h.archive(), &[0, 1, 2, 3]);
        assert!(h.undo() && h.undo());
        assert_eq!(*h.current(), 0);
        assert!(!h.undo());
        assert!(h.redo());
        assert_eq!(*h.current(), 1);
    }
}
