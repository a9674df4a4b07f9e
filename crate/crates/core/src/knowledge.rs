//! Shared blackboard. The only mutable controller state lives here, which is
//! what lets every other micro-controller be stateless.
//!
//! All writes go through [`Knowledge::put`], a single serialization point:
//! last write wins, versions count up per key, and watchers are notified
//! synchronously in commit order.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::afsm::ContextState;
use crate::ensemble::FailureRecord;
use crate::meta::EnsembleConfig;
use crate::phone_sim::{EffectorState, HealthState, SensorSnapshot};

pub mod keys {
    pub const CONTEXT_STATE: &str = "context/state";
    pub const SENSORS_SNAPSHOT: &str = "sensors/snapshot";
    pub const EFFECTORS_STATE: &str = "effectors/state";
    pub const HEALTH: &str = "health";
    pub const ENSEMBLE_CONFIG: &str = "ensemble/config";
    pub const FAILURES_LATEST: &str = "failures/latest";
}

/// Slash-separated, non-empty path with non-empty segments.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct KnowledgeKey(String);

impl KnowledgeKey {
    pub fn new(path: &str) -> Result<Self, KnowledgeError> {
        if path.is_empty() || path.split('/').any(str::is_empty) {
            return Err(KnowledgeError::MalformedKey(String::from(path)));
        }
        Ok(KnowledgeKey(String::from(path)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Segment-wise prefix test: `failures` covers `failures/latest` but not `failuresX`.
    pub fn starts_with(&self, prefix: &KnowledgeKey) -> bool {
        match self.0.strip_prefix(prefix.as_str()) {
            Some(rest) => rest.is_empty() || rest.starts_with('/'),
            None => false,
        }
    }
}

impl fmt::Display for KnowledgeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Context(ContextState),
    Sensors(SensorSnapshot),
    Effectors(EffectorState),
    Health(HealthState),
    Failure(FailureRecord),
    Ensemble(EnsembleConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeEntry {
    pub key: KnowledgeKey,
    pub value: Value,
    pub version: u64,
    pub tick: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChangeNotification {
    pub key: KnowledgeKey,
    pub old_version: Option<u64>,
    pub new_version: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KnowledgeError {
    MalformedKey(String),
    TickRegression {
        key: String,
        last: u64,
        attempted: u64,
    },
}

impl fmt::Display for KnowledgeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KnowledgeError::MalformedKey(k) => write!(f, "malformed knowledge key `{k}`"),
            KnowledgeError::TickRegression {
                key,
                last,
                attempted,
            } => write!(
                f,
                "write to `{key}` at tick {attempted} precedes last write at tick {last}"
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WatchHandle(u64);

pub type NotificationSink = Box<dyn FnMut(&ChangeNotification) + Send + Sync>;

struct Watch {
    handle: WatchHandle,
    prefix: KnowledgeKey,
    sink: NotificationSink,
}

#[derive(Default)]
pub struct Knowledge {
    entries: BTreeMap<KnowledgeKey, KnowledgeEntry>,
    watches: Vec<Watch>,
    next_handle: u64,
}

impl fmt::Debug for Knowledge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Knowledge")
            .field("entries", &self.entries)
            .field("watches", &self.watches.len())
            .finish()
    }
}

impl Knowledge {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put(&mut self, key: &str, value: Value, tick: u64) -> Result<u64, KnowledgeError> {
        let key = KnowledgeKey::new(key)?;
        let old = self.entries.get(&key).map(|e| (e.version, e.tick));
        if let Some((_, last)) = old {
            if tick < last {
                return Err(KnowledgeError::TickRegression {
                    key: key.0,
                    last,
                    attempted: tick,
                });
            }
        }
        let old_version = old.map(|(v, _)| v);
        let version = old_version.map_or(1, |v| v + 1);
        self.entries.insert(
            key.clone(),
            KnowledgeEntry {
                key: key.clone(),
                value,
                version,
                tick,
            },
        );
        let note = ChangeNotification {
            key,
            old_version,
            new_version: version,
        };
        for watch in &mut self.watches {
            if note.key.starts_with(&watch.prefix) {
                (watch.sink)(&note);
            }
        }
        Ok(version)
    }

    pub fn get(&self, key: &str) -> Result<Option<&KnowledgeEntry>, KnowledgeError> {
        let key = KnowledgeKey::new(key)?;
        Ok(self.entries.get(&key))
    }

    pub fn watch(
        &mut self,
        prefix: &str,
        sink: NotificationSink,
    ) -> Result<WatchHandle, KnowledgeError> {
        let prefix = KnowledgeKey::new(prefix)?;
        let handle = WatchHandle(self.next_handle);
        self.next_handle += 1;
        self.watches.push(Watch {
            handle,
            prefix,
            sink,
        });
        Ok(handle)
    }

    /// Returns false if the handle was not active.
    pub fn unwatch(&mut self, handle: WatchHandle) -> bool {
        let before = self.watches.len();
        self.watches.retain(|w| w.handle != handle);
        self.watches.len() != before
    }

    pub fn entries(&self) -> impl Iterator<Item = &KnowledgeEntry> {
        self.entries.values()
    }

    /// Sum of all per-key versions; changes iff some key was written.
    pub fn total_versions(&self) -> u64 {
        self.entries.values().map(|e| e.version).sum()
    }

    pub fn context_state(&self) -> Option<ContextState> {
        match self
            .entries
            .get(&KnowledgeKey(String::from(keys::CONTEXT_STATE)))?
            .value
        {
            Value::Context(state) => Some(state),
            _ => None,
        }
    }

    pub fn health(&self) -> Option<HealthState> {
        match self
            .entries
            .get(&KnowledgeKey(String::from(keys::HEALTH)))?
            .value
        {
            Value::Health(h) => Some(h),
            _ => None,
        }
    }

    pub fn effectors(&self) -> Option<EffectorState> {
        match self
            .entries
            .get(&KnowledgeKey(String::from(keys::EFFECTORS_STATE)))?
            .value
        {
            Value::Effectors(e) => Some(e),
            _ => None,
        }
    }

    pub fn ensemble(&self) -> Option<EnsembleConfig> {
        match self
            .entries
            .get(&KnowledgeKey(String::from(keys::ENSEMBLE_CONFIG)))?
            .value
        {
            Value::Ensemble(c) => Some(c),
            _ => None,
        }
    }
}
