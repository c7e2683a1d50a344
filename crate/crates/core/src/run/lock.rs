use std::fs::{self, OpenOptions};
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};

use super::{RunError, LOCK_FILE};

/// Advisory single-writer lock: a file holding the owner's pid, removed on
/// drop. A lock whose owner no longer runs is taken over.
#[derive(Debug)]
pub(crate) struct RunLock {
    path: PathBuf,
}

fn owner_alive(path: &Path) -> bool {
    let Ok(text) = fs::read_to_string(path) else {
        // Unreadable lock file: assume it is being written by its owner.
        return true;
    };
    match text.trim().parse::<u32>() {
        Ok(pid) if pid == std::process::id() => true,
        Ok(pid) => {
            let proc = Path::new("/proc");
            !proc.is_dir() || proc.join(pid.to_string()).exists()
        }
        Err(_) => false,
    }
}

impl RunLock {
    pub(crate) fn acquire(dir: &Path) -> Result<Self, RunError> {
        let path = dir.join(LOCK_FILE);
        for _ in 0..2 {
            match OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(mut f) => {
                    write!(f, "{}", std::process::id()).map_err(|source| RunError::Io {
                        path: path.clone(),
                        source,
                    })?;
                    return Ok(Self { path });
                }
                Err(e) if e.kind() == ErrorKind::AlreadyExists => {
                    if owner_alive(&path) {
                        return Err(RunError::Locked(dir.to_path_buf()));
                    }
                    let _ = fs::remove_file(&path);
                }
                Err(source) => return Err(RunError::Io { path, source }),
            }
        }
        Err(RunError::Locked(dir.to_path_buf()))
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}
