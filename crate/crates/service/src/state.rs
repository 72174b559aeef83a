use std::collections::HashMap;
use std::sync::{Arc, Mutex as StdMutex, RwLock};
use std::time::{Duration, Instant};

use imgjournal_core::Session;
use tokio::sync::Mutex;

use crate::error::ApiError;

#[derive(Debug, Clone)]
pub struct Config {
    /// Request bodies above this many bytes are rejected with 413.
    pub max_upload_bytes: usize,
    /// Sessions untouched for this long are dropped.
    pub session_ttl: Duration,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            max_upload_bytes: 32 * 1024 * 1024,
            session_ttl: Duration::from_secs(60 * 60),
        }
    }
}

struct Slot {
    session: Arc<Mutex<Session>>,
    last_used: StdMutex<Instant>,
}

impl Slot {
    fn idle_for(&self, now: Instant) -> Duration {
        now.saturating_duration_since(*self.last_used.lock().unwrap())
    }
}

/// Shared server state: the live sessions, each behind its own async mutex
/// so that requests against one session run one at a time.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    config: Config,
    sessions: RwLock<HashMap<String, Arc<Slot>>>,
}

impl AppState {
    pub fn new(config: Config) -> Self {
        AppState {
            inner: Arc::new(Inner {
                config,
                sessions: RwLock::new(HashMap::new()),
            }),
        }
    }

    pub fn config(&self) -> &Config {
        &self.inner.config
    }

    pub fn session_count(&self) -> usize {
        self.inner.sessions.read().unwrap().len()
    }

    pub(crate) fn insert(&self, session: Session) -> Arc<Mutex<Session>> {
        let id = session.id().to_string();
        let slot = Arc::new(Slot {
            session: Arc::new(Mutex::new(session)),
            last_used: StdMutex::new(Instant::now()),
        });
        let handle = slot.session.clone();
        self.inner.sessions.write().unwrap().insert(id, slot);
        handle
    }

    /// Looks up a live session and marks it as used.
    pub(crate) fn get(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        let now = Instant::now();
        let slot = self
            .inner
            .sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::session_not_found(id))?;
        if slot.idle_for(now) > self.inner.config.session_ttl {
            self.inner.sessions.write().unwrap().remove(id);
            return Err(ApiError::session_not_found(id));
        }
        *slot.last_used.lock().unwrap() = now;
        Ok(slot.session.clone())
    }

    /// Drops sessions idle for longer than the TTL; returns how many.
    pub fn reap_idle(&self) -> usize {
        let now = Instant::now();
        let ttl = self.inner.config.session_ttl;
        let mut sessions = self.inner.sessions.write().unwrap();
        let before = sessions.len();
        sessions.retain(|_, slot| slot.idle_for(now) <= ttl);
        before - sessions.len()
    }
}
