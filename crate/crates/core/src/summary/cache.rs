use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use super::SummaryRecord;
use crate::fsio::AtomicWriter;

/// Lookup of summaries by cache key.
pub trait SummaryCache: Sync {
    fn get(&self, key: &str) -> io::Result<Option<SummaryRecord>>;
    fn put(&self, record: &SummaryRecord) -> io::Result<()>;
}

/// One JSON file per cache key.
#[derive(Debug, Clone)]
pub struct DirCache {
    dir: PathBuf,
    writer: AtomicWriter,
}

impl DirCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self::with_writer(dir, AtomicWriter::default())
    }

    pub fn with_writer(dir: impl Into<PathBuf>, writer: AtomicWriter) -> Self {
        DirCache {
            dir: dir.into(),
            writer,
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }
}

impl SummaryCache for DirCache {
    fn get(&self, key: &str) -> io::Result<Option<SummaryRecord>> {
        let path = self.path_for(key);
        match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text)
                .map(Some)
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", path.display()))),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn put(&self, record: &SummaryRecord) -> io::Result<()> {
        self.writer.write_json(&self.path_for(&record.cache_key), record)
    }
}
