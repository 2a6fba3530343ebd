use std::sync::Arc;

use chrono::Utc;
use tokio::sync::{mpsc, Mutex};

use molgen_core::dataset::Dataset;
use molgen_core::enumerate::{generate_with, Control, LimitKind};
use molgen_core::pipeline::{generation_config, train, TrainOutcome};

use crate::docs::{DesignRow, GeneratePayload, GenerateResult, TaskKind, TaskStatus, TrainPayload};
use crate::state::State;
use crate::store::Collection;

enum Outcome {
    Done(serde_json::Value),
    Cancelled,
}

pub(crate) fn spawn_workers(state: State, rx: mpsc::UnboundedReceiver<String>, workers: usize) -> Vec<tokio::task::JoinHandle<()>> {
    let rx = Arc::new(Mutex::new(rx));
    (0..workers.max(1))
        .map(|_| {
            let rx = rx.clone();
            let state = state.clone();
            tokio::spawn(async move {
                loop {
                    let next = rx.lock().await.recv().await;
                    let Some(id) = next else { break };
                    if state.halted() {
                        break;
                    }
                    run_task(&state, &id).await;
                }
            })
        })
        .collect()
}

async fn run_task(state: &State, id: &str) {
    let control = Control::default();
    let started = state.update_task(id, |t| {
        if t.status == TaskStatus::Queued {
            t.status = TaskStatus::Running;
            t.started_at = Some(Utc::now());
        }
    });
    let task = match started {
        Ok(Some(t)) if t.status == TaskStatus::Running => t,
        _ => return,
    };
    state.controls.lock().unwrap().insert(id.to_string(), control.clone());

    let worker_state = state.clone();
    let worker_task = task.clone();
    let worker_control = control.clone();
    let joined = tokio::task::spawn_blocking(move || match worker_task.kind {
        TaskKind::Train => run_train(&worker_state, &worker_task.payload, &worker_control),
        TaskKind::Generate => run_generate(&worker_state, &worker_task.payload, &worker_control),
    })
    .await;
    state.controls.lock().unwrap().remove(id);
    if state.halted() {
        return;
    }

    let result = joined.unwrap_or_else(|e| Err(format!("task panicked: {e}")));
    let progress = crate::docs::TaskProgress {
        nodes_expanded: control.progress.nodes.load(std::sync::atomic::Ordering::Relaxed),
        solutions: control.progress.solutions.load(std::sync::atomic::Ordering::Relaxed),
    };
    match result {
        Ok(Outcome::Done(doc)) => {
            let limit = doc
                .get("stats")
                .and_then(|s| s.get("limit_reached"))
                .and_then(|v| serde_json::from_value::<Option<LimitKind>>(v.clone()).ok())
                .flatten();
            if let Err(e) = state.store.put(Collection::Results, id, &doc) {
                let _ = state.update_task(id, |t| fail(t, e.to_string()));
                return;
            }
            let _ = state.update_task(id, |t| {
                t.status = TaskStatus::Succeeded;
                t.result = Some(id.to_string());
                t.progress = progress;
                t.limit_reached = limit;
                t.finished_at = Some(Utc::now());
            });
            let _ = state.update_project(&task.project_id, |p| match task.kind {
                TaskKind::Train => p.model = Some(id.to_string()),
                TaskKind::Generate => p.design_results = Some(id.to_string()),
            });
        }
        Ok(Outcome::Cancelled) => {
            let _ = state.update_task(id, |t| {
                t.status = TaskStatus::Cancelled;
                t.progress = progress;
                t.finished_at = Some(Utc::now());
            });
        }
        Err(message) => {
            let _ = state.update_task(id, |t| fail(t, message));
        }
    }
}

fn fail(t: &mut crate::docs::Task, message: String) {
    t.status = TaskStatus::Failed;
    t.error = Some(message);
    t.finished_at = Some(Utc::now());
}

fn dataset_for(state: &State, name: &str, excluded: &[usize]) -> Result<Dataset, String> {
    let mut d = state.load_dataset(name).ok_or_else(|| format!("dataset {name:?} not found or unreadable"))?;
    if !excluded.is_empty() {
        let skip: std::collections::HashSet<usize> = excluded.iter().copied().collect();
        d.records = d
            .records
            .into_iter()
            .enumerate()
            .filter(|(i, _)| !skip.contains(i))
            .map(|(_, r)| r)
            .collect();
    }
    Ok(d)
}

fn run_train(state: &State, payload: &serde_json::Value, control: &Control) -> Result<Outcome, String> {
    let p: TrainPayload = serde_json::from_value(payload.clone()).map_err(|e| e.to_string())?;
    let d = dataset_for(state, &p.dataset, &p.excluded)?;
    let outcome = train(&d, &p.training).map_err(|e| e.to_string())?;
    if control.cancel.load(std::sync::atomic::Ordering::Relaxed) {
        return Ok(Outcome::Cancelled);
    }
    serde_json::to_value(&outcome).map(Outcome::Done).map_err(|e| e.to_string())
}

fn run_generate(state: &State, payload: &serde_json::Value, control: &Control) -> Result<Outcome, String> {
    let p: GeneratePayload = serde_json::from_value(payload.clone()).map_err(|e| e.to_string())?;
    let trained: TrainOutcome = state
        .store
        .get(Collection::Results, &p.model)
        .map_err(|e| e.to_string())?
        .ok_or_else(|| format!("model {} not found", p.model))?;
    let d = if p.generation.atoms.is_none() {
        Some(dataset_for(state, &p.dataset, &[])?)
    } else {
        None
    };
    let property = trained.model.property.clone().unwrap_or_else(|| "prediction".into());
    let config = generation_config(&p.generation, Some(trained.model), d.as_ref()).map_err(|e| e.to_string())?;
    let mut rows = Vec::new();
    let stats = generate_with(&config, control, |s| {
        rows.push(DesignRow {
            smiles: s.smiles,
            predictions: s.predictions,
        })
    })
    .map_err(|e| e.to_string())?;
    if stats.limit_reached == Some(LimitKind::Cancelled) {
        return Ok(Outcome::Cancelled);
    }
    let result = GenerateResult {
        properties: vec![property],
        rows,
        stats,
    };
    serde_json::to_value(&result).map(Outcome::Done).map_err(|e| e.to_string())
}
