use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};

use gridnet::datasets::{dataset_load, dataset_save, Dataset};
use gridnet::network::{model_load, model_save};
use gridnet::training::{EpochRecord, TrainingHistory};
use gridnet::{Network, NetworkConfig};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionStatus {
    Idle,
    Training,
}

/// A model owned by the registry. While training, the trainer holds the
/// network and `network` is `None`.
#[derive(Debug)]
pub struct ModelSession {
    pub id: String,
    pub config: NetworkConfig,
    pub class_names: Vec<String>,
    pub status: SessionStatus,
    pub history: TrainingHistory,
    network: Option<Network>,
}

impl ModelSession {
    pub fn new(id: String, network: Network, class_names: Vec<String>) -> Self {
        ModelSession {
            id,
            config: network.config().clone(),
            class_names,
            status: SessionStatus::Idle,
            history: TrainingHistory::default(),
            network: Some(network),
        }
    }

    /// The network, or 409 while a trainer holds it.
    pub fn network(&self) -> Result<&Network, ApiError> {
        self.network
            .as_ref()
            .ok_or_else(|| ApiError::training_in_progress(&self.id))
    }

    /// Moves the network out for training and marks the session busy.
    pub fn begin_training(&mut self) -> Result<Network, ApiError> {
        let net = self
            .network
            .take()
            .ok_or_else(|| ApiError::training_in_progress(&self.id))?;
        self.status = SessionStatus::Training;
        self.history = TrainingHistory::default();
        Ok(net)
    }

    pub fn record_epoch(&mut self, record: EpochRecord) {
        self.history.epochs.push(record);
    }

    pub fn finish_training(&mut self, network: Network) {
        self.network = Some(network);
        self.status = SessionStatus::Idle;
    }
}

pub type SharedSession = Arc<Mutex<ModelSession>>;

/// Locks a session, recovering the data if a trainer thread panicked.
pub fn lock(session: &SharedSession) -> MutexGuard<'_, ModelSession> {
    session
        .lock()
        .unwrap_or_else(|poisoned| poisoned.into_inner())
}

#[derive(Debug, Serialize, Deserialize)]
struct SessionMeta {
    class_names: Vec<String>,
    history: TrainingHistory,
}

/// In-memory registry of models and datasets, optionally mirrored to a directory.
#[derive(Debug, Clone, Default)]
pub struct AppState {
    inner: Arc<Inner>,
}

#[derive(Debug, Default)]
struct Inner {
    models: RwLock<BTreeMap<String, SharedSession>>,
    datasets: RwLock<BTreeMap<String, Arc<Dataset>>>,
    next_model: AtomicU64,
    next_dataset: AtomicU64,
    state_dir: Option<PathBuf>,
}

fn io_error(path: &Path, err: std::io::Error) -> ApiError {
    ApiError::from_lib(
        gridnet::Error::Io {
            path: path.display().to_string(),
            source: err,
        },
        "",
    )
}

fn id_number(id: &str, prefix: &str) -> Option<u64> {
    id.strip_prefix(prefix)?.parse().ok()
}

impl AppState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry backed by `dir`. Documents already in the directory are loaded.
    pub fn with_state_dir(dir: impl Into<PathBuf>) -> Result<Self, ApiError> {
        let dir = dir.into();
        for sub in ["models", "datasets"] {
            let p = dir.join(sub);
            fs::create_dir_all(&p).map_err(|e| io_error(&p, e))?;
        }
        let mut models = BTreeMap::new();
        let mut datasets = BTreeMap::new();
        let mut next_model = 0;
        let mut next_dataset = 0;

        for (path, id) in json_files(&dir.join("models"))? {
            let Some(stem) = id.strip_suffix(".model") else {
                continue;
            };
            let text = fs::read_to_string(&path).map_err(|e| io_error(&path, e))?;
            let net = model_load(&text).map_err(|e| ApiError::from_lib(e, "").context(&path))?;
            let meta_path = path.with_file_name(format!("{stem}.meta.json"));
            let meta = match fs::read_to_string(&meta_path) {
                Ok(text) => serde_json::from_str::<SessionMeta>(&text)
                    .map_err(|e| ApiError::bad_request(format!("{}: {e}", meta_path.display())))?,
                Err(_) => SessionMeta {
                    class_names: default_class_names(net.output_units()),
                    history: TrainingHistory::default(),
                },
            };
            if let Some(n) = id_number(stem, "model-") {
                next_model = next_model.max(n);
            }
            let mut session = ModelSession::new(stem.to_owned(), net, meta.class_names);
            session.history = meta.history;
            models.insert(stem.to_owned(), Arc::new(Mutex::new(session)));
        }
        for (path, id) in json_files(&dir.join("datasets"))? {
            let text = fs::read_to_string(&path).map_err(|e| io_error(&path, e))?;
            let ds = dataset_load(&text).map_err(|e| ApiError::from_lib(e, "").context(&path))?;
            if let Some(n) = id_number(&id, "dataset-") {
                next_dataset = next_dataset.max(n);
            }
            datasets.insert(id, Arc::new(ds));
        }

        Ok(AppState {
            inner: Arc::new(Inner {
                models: RwLock::new(models),
                datasets: RwLock::new(datasets),
                next_model: AtomicU64::new(next_model),
                next_dataset: AtomicU64::new(next_dataset),
                state_dir: Some(dir),
            }),
        })
    }

    pub fn insert_model(
        &self,
        network: Network,
        class_names: Vec<String>,
    ) -> Result<String, ApiError> {
        let id = format!(
            "model-{}",
            self.inner.next_model.fetch_add(1, Ordering::SeqCst) + 1
        );
        let session = ModelSession::new(id.clone(), network, class_names);
        self.persist_session(&session)?;
        self.inner
            .models
            .write()
            .expect("model registry lock")
            .insert(id.clone(), Arc::new(Mutex::new(session)));
        Ok(id)
    }

    pub fn model(&self, id: &str) -> Result<SharedSession, ApiError> {
        self.inner
            .models
            .read()
            .expect("model registry lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("model", id))
    }

    pub fn models(&self) -> Vec<SharedSession> {
        self.inner
            .models
            .read()
            .expect("model registry lock")
            .values()
            .cloned()
            .collect()
    }

    pub fn datasets(&self) -> Vec<(String, Arc<Dataset>)> {
        self.inner
            .datasets
            .read()
            .expect("dataset registry lock")
            .iter()
            .map(|(id, ds)| (id.clone(), ds.clone()))
            .collect()
    }

    pub fn insert_dataset(&self, ds: Dataset) -> Result<String, ApiError> {
        let id = format!(
            "dataset-{}",
            self.inner.next_dataset.fetch_add(1, Ordering::SeqCst) + 1
        );
        if let Some(dir) = &self.inner.state_dir {
            let path = dir.join("datasets").join(format!("{id}.json"));
            fs::write(&path, dataset_save(&ds)).map_err(|e| io_error(&path, e))?;
        }
        self.inner
            .datasets
            .write()
            .expect("dataset registry lock")
            .insert(id.clone(), Arc::new(ds));
        Ok(id)
    }

    pub fn dataset(&self, id: &str) -> Result<Arc<Dataset>, ApiError> {
        self.inner
            .datasets
            .read()
            .expect("dataset registry lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("dataset", id))
    }

    /// Writes the session's model and metadata when a state directory is set.
    /// Sessions in training are skipped; they are flushed when training ends.
    pub fn persist_session(&self, session: &ModelSession) -> Result<(), ApiError> {
        let (Some(dir), Some(net)) = (&self.inner.state_dir, session.network.as_ref()) else {
            return Ok(());
        };
        let models = dir.join("models");
        let model_path = models.join(format!("{}.model.json", session.id));
        fs::write(&model_path, model_save(net)).map_err(|e| io_error(&model_path, e))?;
        let meta = SessionMeta {
            class_names: session.class_names.clone(),
            history: session.history.clone(),
        };
        let meta_path = models.join(format!("{}.meta.json", session.id));
        let text = serde_json::to_string(&meta).expect("session metadata serializes");
        fs::write(&meta_path, text).map_err(|e| io_error(&meta_path, e))
    }
}

fn json_files(dir: &Path) -> Result<Vec<(PathBuf, String)>, ApiError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| io_error(dir, e))? {
        let path = entry.map_err(|e| io_error(dir, e))?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if let Some(stem) = name.strip_suffix(".json") {
            if !stem.ends_with(".meta") {
                out.push((path.clone(), stem.to_owned()));
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Class names used when a model is created without any: "0", "1", ...
pub fn default_class_names(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}
