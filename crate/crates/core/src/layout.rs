//! On-disk layout of the data directory.
//!
//! ```text
//! datas/
//!   rosbag-data/          input bags
//!   processed/<bag_id>/   manifest, video, frame index, audio, transcript
//!   booklist/             codebooks
//!   annotation/           projects, one per bag
//! ```

use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataDir {
    root: PathBuf,
}

impl DataDir {
    pub fn new(root: impl Into<PathBuf>) -> DataDir {
        DataDir { root: root.into() }
    }

    /// Creates the directory tree if missing.
    pub fn init(root: impl Into<PathBuf>) -> io::Result<DataDir> {
        let dir = DataDir::new(root);
        for sub in [dir.bags_dir(), dir.processed_dir(), dir.booklist_dir(), dir.annotation_dir()] {
            std::fs::create_dir_all(sub)?;
        }
        Ok(dir)
    }

    pub fn exists(&self) -> bool {
        self.root.is_dir()
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn bags_dir(&self) -> PathBuf {
        self.root.join("rosbag-data")
    }

    pub fn processed_dir(&self) -> PathBuf {
        self.root.join("processed")
    }

    pub fn processed(&self, bag_id: &str) -> PathBuf {
        self.processed_dir().join(bag_id)
    }

    pub fn manifest_path(&self, bag_id: &str) -> PathBuf {
        self.processed(bag_id).join("manifest.json")
    }

    pub fn booklist_dir(&self) -> PathBuf {
        self.root.join("booklist")
    }

    pub fn annotation_dir(&self) -> PathBuf {
        self.root.join("annotation")
    }

    pub fn project_path(&self, bag_id: &str) -> PathBuf {
        self.annotation_dir().join(format!("{bag_id}.json"))
    }
}

/// Writes through a sibling temp file and a rename so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    static SEQ: AtomicU64 = AtomicU64::new(0);
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}-{}", std::process::id(), SEQ.fetch_add(1, Ordering::Relaxed)));
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_creates_tree() {
        let tmp = tempfile::tempdir().unwrap();
        let d = DataDir::init(tmp.path().join("datas")).unwrap();
        assert!(d.bags_dir().is_dir());
        assert!(d.annotation_dir().is_dir());
        assert_eq!(d.project_path("abc"), tmp.path().join("datas/annotation/abc.json"));
    }

    #[test]
    fn atomic_write_replaces() {
        let tmp = tempfile::tempdir().unwrap();
        let p = tmp.path().join("x/y.json");
        write_atomic(&p, b"1").unwrap();
        write_atomic(&p, b"22").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"22");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
