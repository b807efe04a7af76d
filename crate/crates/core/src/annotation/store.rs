use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use super::{load_project, save_project_to, AnnotationError, Project};

/// The one owner of a project. Mutations run on a private copy, are
/// validated and persisted, and only then replace the shared snapshot, so a
/// failed edit leaves both memory and disk untouched.
#[derive(Debug)]
pub struct ProjectStore {
    path: PathBuf,
    current: RwLock<Arc<Project>>,
    writer: Mutex<()>,
}

impl ProjectStore {
    pub fn new(path: impl Into<PathBuf>, project: Project) -> ProjectStore {
        ProjectStore {
            path: path.into(),
            current: RwLock::new(Arc::new(project)),
            writer: Mutex::new(()),
        }
    }

    /// Loads `path`, or starts from `fresh()` if the file does not exist.
    pub fn open(path: impl Into<PathBuf>, fresh: impl FnOnce() -> Project) -> Result<ProjectStore, AnnotationError> {
        let path = path.into();
        let project = if path.exists() { load_project(&path)? } else { fresh() };
        Ok(ProjectStore::new(path, project))
    }

    pub fn path(&self) -> &std::path::Path {
        &self.path
    }

    pub fn snapshot(&self) -> Arc<Project> {
        self.current.read().expect("project lock").clone()
    }

    pub fn update<T>(&self, f: impl FnOnce(&mut Project) -> Result<T, AnnotationError>) -> Result<T, AnnotationError> {
        let _guard = self.writer.lock().expect("writer lock");
        let mut draft = (*self.snapshot()).clone();
        let out = f(&mut draft)?;
        draft.validate()?;
        save_project_to(&self.path, &draft)?;
        *self.current.write().expect("project lock") = Arc::new(draft);
        Ok(out)
    }

    pub fn save(&self) -> Result<(), AnnotationError> {
        let _guard = self.writer.lock().expect("writer lock");
        save_project_to(&self.path, &self.snapshot())
    }
}

#[cfg(test)]
mod tests {
    use super::super::TierKind;
    use super::*;

    #[test]
    fn failed_edit_changes_nothing() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("p.json");
        let store = ProjectStore::open(&path, || Project::new("b", 100)).unwrap();
        store
            .update(|p| p.create_tier("T", TierKind::FreeText, None, &Vec::new()).map(|_| ()))
            .unwrap();
        store.update(|p| p.add_annotation("T", 0, 50, "x", &Vec::new())).unwrap();
        let before = std::fs::read(&path).unwrap();
        let r = store.update(|p| {
            p.add_annotation("T", 60, 70, "y", &Vec::new())?;
            p.add_annotation("T", 40, 80, "z", &Vec::new())
        });
        assert!(matches!(r, Err(AnnotationError::Overlap { .. })));
        assert_eq!(store.snapshot().annotation_count(), 1);
        assert_eq!(std::fs::read(&path).unwrap(), before);
        assert_eq!(load_project(&path).unwrap(), *store.snapshot());
    }
}
