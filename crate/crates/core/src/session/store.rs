use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use super::{ClassificationSession, EventBody, SessionError, SessionEvent};
use crate::graph::DecisionGraph;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("invalid session id `{0}`")]
    InvalidId(String),
    #[error("session `{0}` not found")]
    NotFound(String),
    #[error("{path}: line {line} is not a valid event: {detail}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        detail: String,
    },
    #[error(transparent)]
    Session(#[from] SessionError),
}

impl StoreError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::Io { .. } => "IO_ERROR",
            Self::InvalidId(_) => "INVALID_ID",
            Self::NotFound(_) => "NOT_FOUND",
            Self::Corrupt { .. } => "CORRUPT_LOG",
            Self::Session(e) => e.code(),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Events read back from disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadedLog {
    pub events: Vec<SessionEvent>,
    /// Bytes dropped from an incomplete trailing record.
    pub truncated_bytes: u64,
}

/// Durable per-session NDJSON event logs with optional snapshots.
///
/// Layout: `<dir>/<id>.events.ndjson` and `<dir>/<id>.snapshot.json`.
#[derive(Debug, Clone)]
pub struct EventLogStore {
    dir: PathBuf,
}

const EVENTS_SUFFIX: &str = ".events.ndjson";
const SNAPSHOT_SUFFIX: &str = ".snapshot.json";

pub fn is_valid_session_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

impl EventLogStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, id: &str, suffix: &str) -> Result<PathBuf, StoreError> {
        if !is_valid_session_id(id) {
            return Err(StoreError::InvalidId(id.to_string()));
        }
        Ok(self.dir.join(format!("{id}{suffix}")))
    }

    pub fn exists(&self, id: &str) -> bool {
        self.path_for(id, EVENTS_SUFFIX)
            .map(|p| p.exists())
            .unwrap_or(false)
    }

    /// Appends one event and flushes it to stable storage before returning.
    pub fn append(&self, event: &SessionEvent) -> Result<(), StoreError> {
        let path = self.path_for(&event.session_id, EVENTS_SUFFIX)?;
        let mut line = serde_json::to_vec(event).expect("events serialize");
        line.push(b'\n');
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err(&path))?;
        file.write_all(&line).map_err(io_err(&path))?;
        file.sync_data().map_err(io_err(&path))?;
        Ok(())
    }

    /// Reads a session's events. An unterminated or unparsable final record
    /// is cut from the file; a bad record followed by good ones is an error.
    pub fn load(&self, id: &str) -> Result<LoadedLog, StoreError> {
        let path = self.path_for(id, EVENTS_SUFFIX)?;
        let file = match File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(StoreError::NotFound(id.to_string()))
            }
            Err(e) => return Err(io_err(&path)(e)),
        };
        let mut reader = BufReader::new(file);
        let mut events = Vec::new();
        let mut good_len: u64 = 0;
        let mut total_len: u64 = 0;
        let mut pending_error: Option<(usize, String)> = None;
        let mut buf = Vec::new();
        let mut line_no = 0;
        loop {
            buf.clear();
            let n = reader.read_until(b'\n', &mut buf).map_err(io_err(&path))?;
            if n == 0 {
                break;
            }
            line_no += 1;
            total_len += n as u64;
            if let Some((line, detail)) = pending_error.take() {
                return Err(StoreError::Corrupt { path, line, detail });
            }
            let terminated = buf.last() == Some(&b'\n');
            let text = String::from_utf8_lossy(&buf);
            if text.trim().is_empty() {
                if terminated {
                    good_len = total_len;
                }
                continue;
            }
            match serde_json::from_str::<SessionEvent>(text.trim_end()) {
                Ok(event) if terminated => {
                    events.push(event);
                    good_len = total_len;
                }
                Ok(_) => pending_error = Some((line_no, "unterminated record".into())),
                Err(e) => pending_error = Some((line_no, e.to_string())),
            }
        }
        let truncated_bytes = total_len - good_len;
        if truncated_bytes > 0 {
            let file = OpenOptions::new()
                .write(true)
                .open(&path)
                .map_err(io_err(&path))?;
            file.set_len(good_len).map_err(io_err(&path))?;
            file.sync_all().map_err(io_err(&path))?;
        }
        Ok(LoadedLog {
            events,
            truncated_bytes,
        })
    }

    /// Graph version recorded by the session's `created` event.
    pub fn pinned_version(&self, id: &str) -> Result<String, StoreError> {
        let path = self.path_for(id, EVENTS_SUFFIX)?;
        let file = match File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(StoreError::NotFound(id.to_string()))
            }
            Err(e) => return Err(io_err(&path)(e)),
        };
        let mut first = String::new();
        BufReader::new(file)
            .read_line(&mut first)
            .map_err(io_err(&path))?;
        let corrupt = |detail: String| StoreError::Corrupt {
            path: path.clone(),
            line: 1,
            detail,
        };
        let event: SessionEvent =
            serde_json::from_str(first.trim_end()).map_err(|e| corrupt(e.to_string()))?;
        match event.body {
            EventBody::Created { graph_version, .. } => Ok(graph_version),
            other => Err(corrupt(format!("first event is `{}`", other.kind()))),
        }
    }

    pub fn write_snapshot(&self, session: &ClassificationSession) -> Result<(), StoreError> {
        let path = self.path_for(&session.session_id, SNAPSHOT_SUFFIX)?;
        let tmp = path.with_extension("json.tmp");
        let body = serde_json::to_vec_pretty(session).expect("sessions serialize");
        {
            let mut f = File::create(&tmp).map_err(io_err(&tmp))?;
            f.write_all(&body).map_err(io_err(&tmp))?;
            f.sync_all().map_err(io_err(&tmp))?;
        }
        fs::rename(&tmp, &path).map_err(io_err(&path))?;
        Ok(())
    }

    pub fn read_snapshot(&self, id: &str) -> Result<Option<ClassificationSession>, StoreError> {
        let path = self.path_for(id, SNAPSHOT_SUFFIX)?;
        match fs::read(&path) {
            // An unreadable snapshot is only a cache miss; the log is authoritative.
            Ok(bytes) => Ok(serde_json::from_slice(&bytes).ok()),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(io_err(&path)(e)),
        }
    }

    /// Rebuilds a session from disk, starting from its snapshot when the
    /// snapshot agrees with the log. A disagreeing snapshot is deleted.
    pub fn restore(
        &self,
        graph: &DecisionGraph,
        id: &str,
    ) -> Result<ClassificationSession, StoreError> {
        let log = self.load(id)?;
        if let Some(snapshot) = self.read_snapshot(id)? {
            let at = snapshot.last_seq as usize;
            let consistent = at >= 1
                && at <= log.events.len()
                && snapshot.graph_version == graph.version()
                && log.events[at - 1].seq == snapshot.last_seq;
            if consistent {
                let mut session = snapshot;
                for event in &log.events[at..] {
                    session.apply(graph, event)?;
                }
                return Ok(session);
            }
            let path = self.path_for(id, SNAPSHOT_SUFFIX)?;
            fs::remove_file(&path).map_err(io_err(&path))?;
        }
        Ok(ClassificationSession::replay(graph, &log.events)?)
    }

    /// Ids of every session with an event log, sorted.
    pub fn session_ids(&self) -> Result<Vec<String>, StoreError> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.dir).map_err(io_err(&self.dir))? {
            let entry = entry.map_err(io_err(&self.dir))?;
            if let Some(name) = entry.file_name().to_str() {
                if let Some(id) = name.strip_suffix(EVENTS_SUFFIX) {
                    if is_valid_session_id(id) {
                        ids.push(id.to_string());
                    }
                }
            }
        }
        ids.sort();
        Ok(ids)
    }
}
