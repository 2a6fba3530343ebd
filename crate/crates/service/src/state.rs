use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};

use chrono::Utc;
use tokio::sync::mpsc;

use molgen_core::dataset::{load_csv, Dataset, LoadOptions};
use molgen_core::enumerate::Control;

use crate::docs::{Project, Task, TaskKind, TaskProgress, TaskStatus};
use crate::store::{valid_id, Collection, Store, StoreError};

pub const RESTART_REASON: &str = "interrupted: the service stopped while this task was running";

pub(crate) struct Shared {
    pub store: Store,
    pub projects: Mutex<BTreeMap<String, Project>>,
    pub tasks: Mutex<BTreeMap<String, Task>>,
    pub controls: Mutex<HashMap<String, Control>>,
    pub queue: mpsc::UnboundedSender<String>,
    pub token: Option<String>,
    /// Set on shutdown; workers stop recording state from then on.
    pub halted: AtomicBool,
}

pub(crate) type State = Arc<Shared>;

impl Shared {
    /// Loads persisted documents. Tasks left running become failed and
    /// queued tasks are queued again in submission order.
    pub fn recover(
        store: Store,
        token: Option<String>,
    ) -> Result<(Shared, mpsc::UnboundedReceiver<String>), StoreError> {
        let (tx, rx) = mpsc::unbounded_channel();
        let projects: BTreeMap<String, Project> = store
            .list::<Project>(Collection::Projects)?
            .into_iter()
            .map(|p| (p.id.clone(), p))
            .collect();
        let mut tasks: Vec<Task> = store.list(Collection::Tasks)?;
        tasks.sort_by_key(|t| t.created_at);
        for t in &mut tasks {
            match t.status {
                TaskStatus::Running => {
                    t.status = TaskStatus::Failed;
                    t.error = Some(RESTART_REASON.into());
                    t.finished_at = Some(Utc::now());
                    store.put(Collection::Tasks, &t.id, t)?;
                }
                TaskStatus::Queued => {
                    let _ = tx.send(t.id.clone());
                }
                _ => {}
            }
        }
        let shared = Shared {
            store,
            projects: Mutex::new(projects),
            tasks: Mutex::new(tasks.into_iter().map(|t| (t.id.clone(), t)).collect()),
            controls: Mutex::new(HashMap::new()),
            queue: tx,
            token,
            halted: AtomicBool::new(false),
        };
        Ok((shared, rx))
    }

    pub fn halted(&self) -> bool {
        self.halted.load(Ordering::SeqCst)
    }

    pub fn dataset_path(&self, name: &str) -> Option<PathBuf> {
        valid_id(name).then(|| self.store.datasets_dir().join(format!("{name}.csv")))
    }

    pub fn load_dataset(&self, name: &str) -> Option<Dataset> {
        let path = self.dataset_path(name)?;
        if !path.exists() {
            return None;
        }
        load_csv(&path, &LoadOptions::default()).ok().map(|l| l.dataset)
    }

    pub fn project(&self, id: &str) -> Option<Project> {
        self.projects.lock().unwrap().get(id).cloned()
    }

    pub fn has_active_task(&self, project_id: &str) -> bool {
        self.tasks
            .lock()
            .unwrap()
            .values()
            .any(|t| t.project_id == project_id && t.status.is_active())
    }

    /// Task snapshot with live progress for running generate tasks.
    pub fn task(&self, id: &str) -> Option<Task> {
        let mut t = self.tasks.lock().unwrap().get(id).cloned()?;
        if t.status == TaskStatus::Running && t.kind == TaskKind::Generate {
            if let Some(c) = self.controls.lock().unwrap().get(id) {
                t.progress = TaskProgress {
                    nodes_expanded: c.progress.nodes.load(Ordering::Relaxed),
                    solutions: c.progress.solutions.load(Ordering::Relaxed),
                };
            }
        }
        Some(t)
    }

    pub fn save_project(&self, p: Project) -> Result<Project, StoreError> {
        let mut map = self.projects.lock().unwrap();
        self.store.put(Collection::Projects, &p.id, &p)?;
        map.insert(p.id.clone(), p.clone());
        Ok(p)
    }

    /// Applies `f` to a stored task and persists it, unless halted.
    pub fn update_task(&self, id: &str, f: impl FnOnce(&mut Task)) -> Result<Option<Task>, StoreError> {
        if self.halted() {
            return Ok(None);
        }
        let mut map = self.tasks.lock().unwrap();
        let Some(t) = map.get_mut(id) else { return Ok(None) };
        f(t);
        self.store.put(Collection::Tasks, id, t)?;
        Ok(Some(t.clone()))
    }

    pub fn insert_task(&self, t: Task) -> Result<(), StoreError> {
        let mut map = self.tasks.lock().unwrap();
        self.store.put(Collection::Tasks, &t.id, &t)?;
        map.insert(t.id.clone(), t);
        Ok(())
    }

    pub fn update_project(&self, id: &str, f: impl FnOnce(&mut Project)) -> Result<(), StoreError> {
        if self.halted() {
            return Ok(());
        }
        let mut map = self.projects.lock().unwrap();
        if let Some(p) = map.get_mut(id) {
            f(p);
            self.store.put(Collection::Projects, id, p)?;
        }
        Ok(())
    }
}
