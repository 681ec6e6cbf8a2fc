use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use super::InteractionEvent;

#[derive(Debug, thiserror::Error)]
pub enum TelemetryStoreError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: line {line} is not a valid telemetry record: {detail}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        detail: String,
    },
}

/// Day-partitioned NDJSON telemetry files: `<dir>/telemetry-YYYY-MM-DD.ndjson`,
/// keyed by the UTC date of each event.
#[derive(Debug, Clone)]
pub struct TelemetryStore {
    dir: PathBuf,
}

const PREFIX: &str = "telemetry-";
const SUFFIX: &str = ".ndjson";

impl TelemetryStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, TelemetryStoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|source| TelemetryStoreError::Io {
            path: dir.clone(),
            source,
        })?;
        Ok(Self { dir })
    }

    /// Read-only view of a directory that may not exist.
    pub fn at(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn file_for(&self, event: &InteractionEvent) -> PathBuf {
        self.dir
            .join(format!("{PREFIX}{}{SUFFIX}", event.ts.format("%Y-%m-%d")))
    }

    /// Appends one record and syncs it before returning.
    pub fn append(&self, event: &InteractionEvent) -> Result<(), TelemetryStoreError> {
        let path = self.file_for(event);
        let mut line = serde_json::to_vec(event).expect("events serialize");
        line.push(b'\n');
        let io = |source| TelemetryStoreError::Io {
            path: path.clone(),
            source,
        };
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io)?;
        f.write_all(&line).map_err(io)?;
        f.sync_data().map_err(io)?;
        Ok(())
    }

    /// Day files in chronological order. A missing directory has none.
    pub fn files(&self) -> Result<Vec<PathBuf>, TelemetryStoreError> {
        let entries = match fs::read_dir(&self.dir) {
            Ok(e) => e,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(source) => {
                return Err(TelemetryStoreError::Io {
                    path: self.dir.clone(),
                    source,
                })
            }
        };
        let mut files: Vec<PathBuf> = entries
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with(PREFIX) && n.ends_with(SUFFIX))
            })
            .collect();
        files.sort();
        Ok(files)
    }

    /// Streams every stored record to `visit`, file by file. An incomplete
    /// last line of a file is skipped.
    pub fn for_each<F>(&self, mut visit: F) -> Result<(), TelemetryStoreError>
    where
        F: FnMut(InteractionEvent),
    {
        for path in self.files()? {
            scan(&path, &mut visit, false)?;
        }
        Ok(())
    }

    pub fn read_all(&self) -> Result<Vec<InteractionEvent>, TelemetryStoreError> {
        let mut out = Vec::new();
        self.for_each(|e| out.push(e))?;
        Ok(out)
    }

    /// Cuts incomplete trailing records left by an interrupted write.
    /// Returns the number of bytes removed.
    pub fn repair(&self) -> Result<u64, TelemetryStoreError> {
        let mut removed = 0;
        for path in self.files()? {
            removed += scan(&path, &mut |_| {}, true)?;
        }
        Ok(removed)
    }
}

fn scan(
    path: &Path,
    visit: &mut dyn FnMut(InteractionEvent),
    truncate: bool,
) -> Result<u64, TelemetryStoreError> {
    let io = |source| TelemetryStoreError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = BufReader::new(File::open(path).map_err(io)?);
    let mut buf = Vec::new();
    let mut total: u64 = 0;
    let mut good: u64 = 0;
    let mut line_no = 0;
    let mut pending: Option<(usize, String)> = None;
    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf).map_err(io)?;
        if n == 0 {
            break;
        }
        line_no += 1;
        total += n as u64;
        if let Some((line, detail)) = pending.take() {
            return Err(TelemetryStoreError::Corrupt {
                path: path.to_path_buf(),
                line,
                detail,
            });
        }
        let terminated = buf.last() == Some(&b'\n');
        let text = String::from_utf8_lossy(&buf);
        if text.trim().is_empty() {
            if terminated {
                good = total;
            }
            continue;
        }
        match serde_json::from_str::<InteractionEvent>(text.trim_end()) {
            Ok(event) if terminated => {
                visit(event);
                good = total;
            }
            Ok(_) => pending = Some((line_no, "unterminated record".into())),
            Err(e) => pending = Some((line_no, e.to_string())),
        }
    }
    let torn = total - good;
    if truncate && torn > 0 {
        let f = OpenOptions::new().write(true).open(path).map_err(io)?;
        f.set_len(good).map_err(io)?;
        f.sync_all().map_err(io)?;
    }
    Ok(torn)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::InteractionKind;

    fn ev(session: &str, ts: &str) -> InteractionEvent {
        InteractionEvent {
            session_id: session.into(),
            ts: ts.parse().unwrap(),
            kind: InteractionKind::TutorialConfirmed,
            node_context: None,
            material_id: None,
        }
    }

    #[test]
    fn partitions_by_day_and_reads_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let store = TelemetryStore::open(dir.path()).unwrap();
        store.append(&ev("b", "2025-05-03T00:00:01Z")).unwrap();
        store.append(&ev("a", "2025-05-02T23:59:59Z")).unwrap();
        let files = store.files().unwrap();
        assert_eq!(files.len(), 2);
        assert!(files[0].ends_with("telemetry-2025-05-02.ndjson"));
        let all = store.read_all().unwrap();
        assert_eq!(all[0].session_id, "a");
        assert_eq!(all[1].session_id, "b");
    }

    #[test]
    fn missing_dir_reads_empty() {
        let dir = tempfile::tempdir().unwrap();
        let store = TelemetryStore::at(dir.path().join("nope"));
        assert!(store.read_all().unwrap().is_empty());
    }

    #[test]
    fn torn_tail_is_skipped_then_repaired() {
        let dir = tempfile::tempdir().unwrap();
        let store = TelemetryStore::open(dir.path()).unwrap();
        let e = ev("a", "2025-05-02T10:00:00Z");
        store.append(&e).unwrap();
        let path = store.file_for(&e);
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"session_id\":\"a\",\"ts").unwrap();
        assert_eq!(store.read_all().unwrap(), vec![e.clone()]);
        assert!(store.repair().unwrap() > 0);
        store.append(&e).unwrap();
        assert_eq!(store.read_all().unwrap().len(), 2);
    }

    #[test]
    fn corrupt_middle_record_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let store = TelemetryStore::open(dir.path()).unwrap();
        let e = ev("a", "2025-05-02T10:00:00Z");
        fs::write(
            store.file_for(&e),
            format!("oops\n{}\n", serde_json::to_string(&e).unwrap()),
        )
        .unwrap();
        assert!(matches!(
            store.read_all(),
            Err(TelemetryStoreError::Corrupt { line: 1, .. })
        ));
    }
}
