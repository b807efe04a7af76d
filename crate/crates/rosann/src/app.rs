//! Operations shared by the HTTP handlers and the CLI.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::SystemTime;

use rosann_core::annotation::{export_csv, Booklist, Project, ProjectStore};
use rosann_core::assist::{ChatBackend, ChatTranscript, FrameFilter, HttpChatClient};
use rosann_core::layout::DataDir;
use rosann_core::media::{bag_id_for, load_manifest, AudioDecoder, CommandDecoder, MediaManifest, Transcriber};
use rosann_core::stats::{compute_summary, ObservationWindow, StatsSummary};
use rosann_core::Exec;
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::jobs::JobManager;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BagEntry {
    pub file_name: String,
    pub bag_id: String,
    pub size: u64,
    pub processed: bool,
}

/// Project for `bag_id`: the saved file if there is one, otherwise an empty
/// project sized to the processed recording.
pub fn open_project(data: &DataDir, bag_id: &str) -> Result<Project, ApiError> {
    let path = data.project_path(bag_id);
    if path.exists() {
        return Ok(rosann_core::annotation::load_project(&path)?);
    }
    let manifest = load_manifest(data, bag_id)?;
    Ok(Project::new(bag_id, manifest.observation_ms))
}

pub fn project_stats(project: &Project, include_transcript: bool, t_ms: Option<u64>) -> Result<StatsSummary, ApiError> {
    let window = ObservationWindow::new(t_ms.unwrap_or(project.observation_ms))?;
    Ok(compute_summary(project, window, include_transcript, Exec::Parallel))
}

pub fn project_csv(project: &Project) -> String {
    export_csv(project)
}

/// Resolves a CLI bag argument: an existing path, or a file name under
/// `rosbag-data/`.
pub fn resolve_bag_path(data: &DataDir, arg: &str) -> PathBuf {
    let direct = PathBuf::from(arg);
    if direct.exists() {
        return direct;
    }
    let under = data.bags_dir().join(arg);
    if under.exists() {
        under
    } else {
        direct
    }
}

type BagCacheKey = (u64, Option<SystemTime>);

/// Long-lived service state.
pub struct AppState {
    pub data: DataDir,
    pub exec: Exec,
    pub jobs: JobManager,
    pub transcriber: Option<Arc<dyn Transcriber>>,
    pub decoder: Arc<dyn AudioDecoder>,
    /// Chat backend override; `None` builds an HTTP client from the
    /// environment per request.
    pub chat: Option<Arc<dyn ChatBackend>>,
    /// Face detector enabling the `detector` privacy mode.
    pub frame_filter: Option<Arc<dyn FrameFilter>>,
    pub ui_dir: Option<PathBuf>,
    projects: Mutex<HashMap<String, Arc<ProjectStore>>>,
    sessions: Mutex<HashMap<String, Arc<Mutex<ChatTranscript>>>>,
    bag_ids: Mutex<HashMap<PathBuf, (BagCacheKey, String)>>,
}

impl AppState {
    pub fn new(data: DataDir) -> AppState {
        AppState {
            data,
            exec: Exec::Parallel,
            jobs: JobManager::default(),
            transcriber: None,
            decoder: Arc::new(CommandDecoder::default()),
            chat: None,
            frame_filter: None,
            ui_dir: None,
            projects: Mutex::new(HashMap::new()),
            sessions: Mutex::new(HashMap::new()),
            bag_ids: Mutex::new(HashMap::new()),
        }
    }

    pub fn booklist(&self) -> Booklist {
        Booklist::new(self.data.booklist_dir())
    }

    pub fn chat_backend(&self) -> Result<Arc<dyn ChatBackend>, ApiError> {
        match &self.chat {
            Some(b) => Ok(b.clone()),
            None => Ok(Arc::new(HttpChatClient::from_env()?)),
        }
    }

    /// The single writer for a project, created on first use.
    pub fn project_store(&self, bag_id: &str) -> Result<Arc<ProjectStore>, ApiError> {
        let mut map = self.projects.lock().expect("project map");
        if let Some(s) = map.get(bag_id) {
            return Ok(s.clone());
        }
        let project = open_project(&self.data, bag_id)?;
        let store = Arc::new(ProjectStore::new(self.data.project_path(bag_id), project));
        map.insert(bag_id.to_string(), store.clone());
        Ok(store)
    }

    pub fn chat_session(&self, id: &str) -> Arc<Mutex<ChatTranscript>> {
        self.sessions
            .lock()
            .expect("session map")
            .entry(id.to_string())
            .or_insert_with(|| Arc::new(Mutex::new(ChatTranscript::new(id))))
            .clone()
    }

    fn bag_id_cached(&self, path: &Path) -> Result<String, ApiError> {
        let meta = std::fs::metadata(path)?;
        let key = (meta.len(), meta.modified().ok());
        if let Some((k, id)) = self.bag_ids.lock().expect("bag id cache").get(path) {
            if *k == key {
                return Ok(id.clone());
            }
        }
        let id = bag_id_for(path)?;
        self.bag_ids
            .lock()
            .expect("bag id cache")
            .insert(path.to_path_buf(), (key, id.clone()));
        Ok(id)
    }

    /// Bags under `rosbag-data/`, sorted by file name.
    pub fn list_bags(&self) -> Result<Vec<BagEntry>, ApiError> {
        let mut out = Vec::new();
        let entries = match std::fs::read_dir(self.data.bags_dir()) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(out),
            Err(e) => return Err(e.into()),
        };
        for entry in entries {
            let path = entry?.path();
            if !path.is_file() || path.extension().is_none_or(|x| x != "bag") {
                continue;
            }
            let bag_id = self.bag_id_cached(&path)?;
            out.push(BagEntry {
                file_name: path.file_name().unwrap_or_default().to_string_lossy().into_owned(),
                size: std::fs::metadata(&path)?.len(),
                processed: self.data.manifest_path(&bag_id).is_file(),
                bag_id,
            });
        }
        out.sort_by(|a, b| a.file_name.cmp(&b.file_name));
        Ok(out)
    }

    pub fn bag_path(&self, bag_id: &str) -> Result<PathBuf, ApiError> {
        self.list_bags()?
            .into_iter()
            .find(|b| b.bag_id == bag_id)
            .map(|b| self.data.bags_dir().join(b.file_name))
            .ok_or_else(|| ApiError::not_found(format!("no bag with id '{bag_id}'")))
    }

    pub fn manifest(&self, bag_id: &str) -> Result<MediaManifest, ApiError> {
        Ok(load_manifest(&self.data, bag_id)?)
    }
}
