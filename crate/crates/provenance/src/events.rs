use super::{io_err, Result};
use chrono::Utc;
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Info,
    Warn,
    Error,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Info => "INFO",
            Level::Warn => "WARN",
            Level::Error => "ERROR",
        })
    }
}

/// One append-only log file per stage run:
/// `YYYY-MM-DDTHH:MM:SSZ LEVEL stage message`.
pub struct EventLog {
    path: PathBuf,
    stage: String,
    file: File,
}

impl EventLog {
    /// Opens `<dir>/<stage>_<NNNN>.log` with the next free run number.
    pub fn open_run(dir: &Path, stage: &str) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let mut run = 1;
        loop {
            let path = dir.join(format!("{stage}_{run:04}.log"));
            match OpenOptions::new().append(true).create_new(true).open(&path) {
                Ok(file) => return Ok(Self { path, stage: stage.to_string(), file }),
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => run += 1,
                Err(e) => return Err(io_err(&path, e)),
            }
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn log(&mut self, level: Level, message: impl AsRef<str>) -> Result<()> {
        let ts = Utc::now().format("%Y-%m-%dT%H:%M:%SZ");
        // one line per event, so embedded newlines are flattened
        let msg = message.as_ref().replace('\n', " ");
        writeln!(self.file, "{ts} {level} {} {msg}", self.stage).map_err(|e| io_err(&self.path, e))?;
        self.file.flush().map_err(|e| io_err(&self.path, e))
    }

    pub fn info(&mut self, message: impl AsRef<str>) -> Result<()> {
        self.log(Level::Info, message)
    }

    pub fn warn(&mut self, message: impl AsRef<str>) -> Result<()> {
        self.log(Level::Warn, message)
    }

    pub fn error(&mut self, message: impl AsRef<str>) -> Result<()> {
        self.log(Level::Error, message)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_format_and_append_only_runs() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = EventLog::open_run(dir.path(), "train").unwrap();
        a.info("started").unwrap();
        a.warn("two\nlines").unwrap();
        let mut b = EventLog::open_run(dir.path(), "train").unwrap();
        b.error("boom").unwrap();
        assert!(a.path().ends_with("train_0001.log") && b.path().ends_with("train_0002.log"));
        let text = std::fs::read_to_string(a.path()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        let parts: Vec<&str> = lines[1].splitn(4, ' ').collect();
        assert_eq!(parts[0].len(), 20);
        assert!(chrono::NaiveDateTime::parse_from_str(parts[0], "%Y-%m-%dT%H:%M:%SZ").is_ok());
        assert_eq!(&parts[1..], &["WARN", "train", "two lines"]);
    }
}
