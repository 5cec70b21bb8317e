use super::layout::LOCK_FILE;
use super::{io_err, ProvenanceError, Result};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

/// A lock whose heartbeat is older than this is considered abandoned.
pub const STALE_AFTER: Duration = Duration::from_secs(60);
const HEARTBEAT: Duration = Duration::from_secs(5);

fn now_secs() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Single-writer lock on an experiment. The file holds `pid heartbeat`;
/// a background thread refreshes the heartbeat until the guard drops.
pub struct ExperimentLock {
    path: PathBuf,
    stop: Arc<AtomicBool>,
    beat: Option<JoinHandle<()>>,
}

fn heartbeat_age(path: &Path) -> Option<Duration> {
    let text = fs::read_to_string(path).ok()?;
    let ts: u64 = text.split_whitespace().nth(1)?.parse().ok()?;
    Some(Duration::from_secs(now_secs().saturating_sub(ts)))
}

impl ExperimentLock {
    pub fn acquire(root: &Path, name: &str) -> Result<Self> {
        let path = root.join(LOCK_FILE);
        for _ in 0..2 {
            match OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(mut f) => {
                    write!(f, "{} {}", std::process::id(), now_secs()).map_err(|e| io_err(&path, e))?;
                    let stop = Arc::new(AtomicBool::new(false));
                    let beat = {
                        let (stop, path) = (stop.clone(), path.clone());
                        std::thread::spawn(move || {
                            let mut waited = Duration::ZERO;
                            while !stop.load(Ordering::Relaxed) {
                                std::thread::sleep(Duration::from_millis(100));
                                waited += Duration::from_millis(100);
                                if waited >= HEARTBEAT {
                                    waited = Duration::ZERO;
                                    let _ = fs::write(&path, format!("{} {}", std::process::id(), now_secs()));
                                }
                            }
                        })
                    };
                    return Ok(Self { path, stop, beat: Some(beat) });
                }
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                    // unreadable or old heartbeat: the writer died
                    match heartbeat_age(&path) {
                        Some(age) if age < STALE_AFTER => return Err(ProvenanceError::Locked(name.to_string())),
                        _ => {
                            log::warn!("removing stale lock on {name}");
                            let _ = fs::remove_file(&path);
                        }
                    }
                }
                Err(e) => return Err(io_err(&path, e)),
            }
        }
        Err(ProvenanceError::Locked(name.to_string()))
    }
}

/// True when a live writer (any process) holds the experiment at `root`.
pub fn is_locked(root: &Path) -> bool {
    matches!(heartbeat_age(&root.join(LOCK_FILE)), Some(age) if age < STALE_AFTER)
}

impl Drop for ExperimentLock {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(h) = self.beat.take() {
            let _ = h.join();
        }
        let _ = fs::remove_file(&self.path);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_writer_is_refused_and_stale_lock_recovered() {
        let dir = tempfile::tempdir().unwrap();
        let a = ExperimentLock::acquire(dir.path(), "e").unwrap();
        assert_eq!(ExperimentLock::acquire(dir.path(), "e").err(), Some(ProvenanceError::Locked("e".into())));
        drop(a);
        assert!(!dir.path().join(LOCK_FILE).exists());
        fs::write(dir.path().join(LOCK_FILE), format!("999999 {}", now_secs() - 3600)).unwrap();
        let b = ExperimentLock::acquire(dir.path(), "e").unwrap();
        drop(b);
    }
}
