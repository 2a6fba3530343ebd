use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use molgen_core::enumerate::{GenerationStats, LimitKind};
use molgen_core::pipeline::{GenerationSpec, TrainingSpec};

pub const API_VERSION: &str = "v1";

/// Client-supplied project fields. Server-owned fields may be echoed back
/// and are ignored.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectInput {
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default)]
    pub name: String,
    pub dataset: String,
    /// Dataset row indices left out of training.
    #[serde(default)]
    pub excluded: Vec<usize>,
    #[serde(default)]
    pub training: TrainingSpec,
    #[serde(default)]
    pub generation: GenerationSpec,
    #[serde(default, rename = "model")]
    _model: Option<Value>,
    #[serde(default, rename = "design_results")]
    _design_results: Option<Value>,
    #[serde(default, rename = "created_at")]
    _created_at: Option<Value>,
    #[serde(default, rename = "updated_at")]
    _updated_at: Option<Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Project {
    pub id: String,
    pub name: String,
    pub dataset: String,
    pub excluded: Vec<usize>,
    pub training: TrainingSpec,
    pub generation: GenerationSpec,
    /// Id of the train task whose model is current.
    pub model: Option<String>,
    /// Id of the latest succeeded generate task.
    pub design_results: Option<String>,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

impl Project {
    pub fn from_input(input: ProjectInput, id: String, previous: Option<&Project>) -> Project {
        let now = Utc::now();
        Project {
            id,
            name: input.name,
            dataset: input.dataset,
            excluded: input.excluded,
            training: input.training,
            generation: input.generation,
            model: previous.and_then(|p| p.model.clone()),
            design_results: previous.and_then(|p| p.design_results.clone()),
            created_at: previous.map_or(now, |p| p.created_at),
            updated_at: now,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Train,
    Generate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStatus {
    Queued,
    Running,
    Succeeded,
    Failed,
    Cancelled,
}

impl TaskStatus {
    pub fn is_active(self) -> bool {
        matches!(self, TaskStatus::Queued | TaskStatus::Running)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskRequest {
    pub project_id: String,
    #[serde(rename = "type")]
    pub kind: TaskKind,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskProgress {
    pub nodes_expanded: u64,
    pub solutions: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    pub project_id: String,
    #[serde(rename = "type")]
    pub kind: TaskKind,
    pub status: TaskStatus,
    /// Snapshot of the project settings the task runs with.
    pub payload: Value,
    /// Result document id, set on success.
    pub result: Option<String>,
    pub progress: TaskProgress,
    pub error: Option<String>,
    pub limit_reached: Option<LimitKind>,
    pub created_at: DateTime<Utc>,
    pub started_at: Option<DateTime<Utc>>,
    pub finished_at: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainPayload {
    pub dataset: String,
    pub excluded: Vec<usize>,
    pub training: TrainingSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratePayload {
    pub dataset: String,
    pub model: String,
    pub generation: GenerationSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignRow {
    pub smiles: String,
    pub predictions: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerateResult {
    /// Names for the `predictions` columns.
    pub properties: Vec<String>,
    pub rows: Vec<DesignRow>,
    pub stats: GenerationStats,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignResultsPage {
    pub project_id: String,
    pub task_id: Option<String>,
    pub properties: Vec<String>,
    pub total: usize,
    pub page: usize,
    pub page_size: usize,
    pub rows: Vec<DesignRow>,
    pub stats: Option<GenerationStats>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub name: String,
    pub size: usize,
    pub properties: Vec<String>,
    pub units: std::collections::BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetRow {
    pub index: usize,
    pub smiles: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetDetail {
    #[serde(flatten)]
    pub info: DatasetInfo,
    pub rows: Vec<DatasetRow>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct SmilesCheck {
    pub smiles: String,
    /// Parse as a fragment pattern rather than a molecule.
    #[serde(default)]
    pub fragment: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmilesVerdict {
    pub valid: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub canonical: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub position: Option<usize>,
}
