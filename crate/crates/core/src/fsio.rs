//! Write-then-rename file output with an optional fault injector.

use std::fs::{self, File};
use std::io::{self, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde::Serialize;

pub const TMP_MARKER: &str = ".tmp-";

static COUNTER: AtomicU64 = AtomicU64::new(0);

/// Simulated crash: the `fail_at`-th write (0-based) stops after writing
/// `partial_fraction` of its bytes to the temporary file, and every later
/// write fails as if the process had died.
#[derive(Debug, Clone)]
pub struct FaultPlan {
    pub fail_at: usize,
    pub partial_fraction: f64,
    writes: usize,
    tripped: bool,
}

impl FaultPlan {
    pub fn new(fail_at: usize, partial_fraction: f64) -> Self {
        FaultPlan {
            fail_at,
            partial_fraction: partial_fraction.clamp(0.0, 1.0),
            writes: 0,
            tripped: false,
        }
    }

    pub fn tripped(&self) -> bool {
        self.tripped
    }

    /// Writes attempted so far, including the interrupted one.
    pub fn writes(&self) -> usize {
        self.writes
    }
}

#[derive(Debug, Clone, Default)]
pub struct AtomicWriter {
    faults: Option<Arc<Mutex<FaultPlan>>>,
}

impl AtomicWriter {
    pub fn with_faults(plan: Arc<Mutex<FaultPlan>>) -> Self {
        AtomicWriter { faults: Some(plan) }
    }

    pub fn write(&self, path: &Path, bytes: &[u8]) -> io::Result<()> {
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        fs::create_dir_all(dir)?;
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let tmp = dir.join(format!(
            "{name}{TMP_MARKER}{}-{}",
            std::process::id(),
            COUNTER.fetch_add(1, Ordering::Relaxed)
        ));

        let cut = self.fault_cut(bytes.len())?;
        let mut f = File::create(&tmp)?;
        if let Some(cut) = cut {
            f.write_all(&bytes[..cut])?;
            return Err(io::Error::other("injected fault: write interrupted"));
        }
        f.write_all(bytes)?;
        f.sync_all()?;
        drop(f);
        fs::rename(&tmp, path)
    }

    pub fn write_json<T: Serialize + ?Sized>(&self, path: &Path, value: &T) -> io::Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(io::Error::other)?;
        bytes.push(b'\n');
        self.write(path, &bytes)
    }

    fn fault_cut(&self, len: usize) -> io::Result<Option<usize>> {
        let Some(plan) = &self.faults else {
            return Ok(None);
        };
        let mut plan = plan.lock().expect("fault plan lock");
        if plan.tripped {
            return Err(io::Error::other("injected fault: process already crashed"));
        }
        let idx = plan.writes;
        plan.writes += 1;
        if idx == plan.fail_at {
            plan.tripped = true;
            return Ok(Some((len as f64 * plan.partial_fraction) as usize));
        }
        Ok(None)
    }
}

/// Removes leftover temporary files under `dir` (recursively).
pub fn sweep_temp_files(dir: &Path) -> io::Result<usize> {
    let mut removed = 0;
    if !dir.is_dir() {
        return Ok(0);
    }
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            removed += sweep_temp_files(&path)?;
        } else if is_temp_file(&path) {
            fs::remove_file(&path)?;
            removed += 1;
        }
    }
    Ok(removed)
}

pub fn is_temp_file(path: &Path) -> bool {
    path.file_name()
        .map(|n| n.to_string_lossy().contains(TMP_MARKER))
        .unwrap_or(false)
}
