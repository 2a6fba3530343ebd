use std::time::{Duration, Instant};

use reqwest::{Client, StatusCode};
use serde_json::{json, Value};

use molgen_service::{start, RunningService, ServiceConfig, RESTART_REASON};

async fn launch(dir: &std::path::Path, workers: usize, token: Option<&str>) -> RunningService {
    let mut c = ServiceConfig::new(dir);
    c.bind = "127.0.0.1:0".parse().unwrap();
    c.workers = workers;
    c.token = token.map(String::from);
    start(&c).await.unwrap()
}

fn demo_project(id: &str, atoms: &str) -> Value {
    json!({
        "id": id,
        "name": "demo",
        "dataset": "demo",
        "training": { "property": "score", "folds": 5 },
        "generation": { "atoms": atoms, "rules": "default" }
    })
}

async fn put(client: &Client, base: &str, doc: &Value) -> reqwest::Response {
    client.put(format!("{base}/api/v1/projects")).json(doc).send().await.unwrap()
}

async fn submit(client: &Client, base: &str, project: &str, kind: &str) -> reqwest::Response {
    client
        .post(format!("{base}/api/v1/tasks"))
        .json(&json!({ "project_id": project, "type": kind }))
        .send()
        .await
        .unwrap()
}

async fn task(client: &Client, base: &str, id: &str) -> Value {
    client
        .get(format!("{base}/api/v1/tasks/{id}"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap()
}

async fn wait_for(client: &Client, base: &str, id: &str, wanted: &[&str]) -> Value {
    let deadline = Instant::now() + Duration::from_secs(120);
    loop {
        let t = task(client, base, id).await;
        if wanted.contains(&t["status"].as_str().unwrap()) {
            return t;
        }
        assert!(Instant::now() < deadline, "task {id} stuck at {t}");
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
}

async fn wait_done(client: &Client, base: &str, id: &str) -> Value {
    wait_for(client, base, id, &["succeeded", "failed", "cancelled"]).await
}

async fn train_demo(client: &Client, base: &str, project: &str) -> Value {
    let r = submit(client, base, project, "train").await;
    assert_eq!(r.status(), StatusCode::ACCEPTED);
    let id = r.json::<Value>().await.unwrap()["id"].as_str().unwrap().to_string();
    let t = wait_done(client, base, &id).await;
    assert_eq!(t["status"], "succeeded", "{t}");
    t
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn full_walkthrough() {
    let dir = tempfile::tempdir().unwrap();
    let svc = launch(dir.path(), 2, None).await;
    let base = svc.url();
    let c = Client::new();

    let datasets: Value = c.get(format!("{base}/api/v1/datasets")).send().await.unwrap().json().await.unwrap();
    assert_eq!(datasets[0]["name"], "demo");

    let r = put(&c, &base, &demo_project("p1", "C:2")).await;
    assert_eq!(r.status(), StatusCode::OK);
    let stored: Value = r.json().await.unwrap();
    assert!(stored["created_at"].is_string());
    assert!(stored["model"].is_null());

    let empty: Value = c.get(format!("{base}/api/v1/designResults/p1")).send().await.unwrap().json().await.unwrap();
    assert_eq!(empty["total"], 0);
    assert_eq!(empty["rows"].as_array().unwrap().len(), 0);

    let r = submit(&c, &base, "p1", "generate").await;
    assert_eq!(r.status(), StatusCode::UNPROCESSABLE_ENTITY);

    let trained = train_demo(&c, &base, "p1").await;
    let result: Value = c
        .get(format!("{base}/api/v1/results/{}", trained["result"].as_str().unwrap()))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert!(result["model"]["metrics"]["cv_r2"].is_number());

    let r = submit(&c, &base, "p1", "generate").await;
    assert_eq!(r.status(), StatusCode::ACCEPTED);
    let id = r.json::<Value>().await.unwrap()["id"].as_str().unwrap().to_string();
    let t = wait_done(&c, &base, &id).await;
    assert_eq!(t["status"], "succeeded", "{t}");
    assert_eq!(t["progress"]["solutions"], 4);

    let page: Value = c.get(format!("{base}/api/v1/designResults/p1")).send().await.unwrap().json().await.unwrap();
    assert_eq!(page["total"], 4);
    let smiles: Vec<&str> = page["rows"].as_array().unwrap().iter().map(|r| r["smiles"].as_str().unwrap()).collect();
    let mut sorted = smiles.clone();
    sorted.sort();
    assert_eq!(sorted, vec!["C", "C#C", "C=C", "CC"]);
    assert_eq!(page["properties"], json!(["score"]));

    let p2: Value = c
        .get(format!("{base}/api/v1/designResults/p1?page=2&page_size=2"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    let p2_smiles: Vec<&str> = p2["rows"].as_array().unwrap().iter().map(|r| r["smiles"].as_str().unwrap()).collect();
    assert_eq!(p2_smiles, smiles[2..4].to_vec());

    let tsv = c
        .get(format!("{base}/api/v1/designResults/p1/export"))
        .send()
        .await
        .unwrap()
        .text()
        .await
        .unwrap();
    assert_eq!(tsv.lines().count(), 4);
    assert!(tsv.lines().all(|l| l.split('\t').count() == 2));

    svc.stop().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn error_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let svc = launch(dir.path(), 1, None).await;
    let base = svc.url();
    let c = Client::new();

    let r = put(&c, &base, &json!({ "id": "x", "name": "no dataset" })).await;
    assert_eq!(r.status(), StatusCode::BAD_REQUEST);
    assert_eq!(r.json::<Value>().await.unwrap()["field"], "dataset");

    let r = put(&c, &base, &json!({ "id": "x", "dataset": "missing" })).await;
    assert_eq!(r.status(), StatusCode::BAD_REQUEST);

    let mut bad_rules = demo_project("x", "C:2");
    bad_rules["generation"]["rules"] = json!("/etc/passwd");
    assert_eq!(put(&c, &base, &bad_rules).await.status(), StatusCode::BAD_REQUEST);

    let r = c.get(format!("{base}/api/v1/tasks/not-a-task")).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::NOT_FOUND);
    let r = c.get(format!("{base}/api/v1/designResults/nobody")).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::NOT_FOUND);
    assert_eq!(submit(&c, &base, "nobody", "train").await.status(), StatusCode::NOT_FOUND);

    let v: Value = c
        .post(format!("{base}/api/v1/smiles/validate"))
        .json(&json!({ "smiles": "C1C", "fragment": true }))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(v["valid"], false);
    assert!(v["position"].is_number());

    svc.stop().await;
}

/// A long generation keeps running while new submissions and polls answer quickly.
#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn submit_stays_fast_and_upsert_conflicts_while_busy() {
    let dir = tempfile::tempdir().unwrap();
    let svc = launch(dir.path(), 1, None).await;
    let base = svc.url();
    let c = Client::new();

    let mut big = demo_project("big", "C:7,N:2,O:2");
    big["generation"]["rules"] = json!("none");
    put(&c, &base, &big).await;
    train_demo(&c, &base, "big").await;
    let long = submit(&c, &base, "big", "generate").await.json::<Value>().await.unwrap();
    let long_id = long["id"].as_str().unwrap().to_string();
    wait_for(&c, &base, &long_id, &["running"]).await;

    put(&c, &base, &demo_project("small", "C:2")).await;
    let started = Instant::now();
    let r = submit(&c, &base, "small", "train").await;
    assert_eq!(r.status(), StatusCode::ACCEPTED);
    assert!(started.elapsed() < Duration::from_secs(1), "submit took {:?}", started.elapsed());
    let queued = r.json::<Value>().await.unwrap();
    assert_eq!(queued["status"], "queued");

    let started = Instant::now();
    let t = task(&c, &base, &long_id).await;
    assert!(started.elapsed() < Duration::from_secs(1));
    assert_eq!(t["status"], "running");

    tokio::time::sleep(Duration::from_millis(300)).await;
    let t = task(&c, &base, &long_id).await;
    assert!(t["progress"]["nodes_expanded"].as_u64().unwrap() > 0);

    assert_eq!(put(&c, &base, &big).await.status(), StatusCode::CONFLICT);

    let r = c.post(format!("{base}/api/v1/tasks/{long_id}/cancel")).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    let t = wait_done(&c, &base, &long_id).await;
    assert_eq!(t["status"], "cancelled");
    let t = wait_done(&c, &base, queued["id"].as_str().unwrap()).await;
    assert_eq!(t["status"], "succeeded");

    svc.stop().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn restart_keeps_documents_and_fails_interrupted_tasks() {
    let dir = tempfile::tempdir().unwrap();
    let svc = launch(dir.path(), 1, None).await;
    let base = svc.url();
    let c = Client::new();

    put(&c, &base, &demo_project("small", "C:2")).await;
    train_demo(&c, &base, "small").await;
    let mut big = demo_project("big", "C:7,N:2,O:2");
    big["generation"]["rules"] = json!("none");
    put(&c, &base, &big).await;
    let trained = train_demo(&c, &base, "big").await;
    let long = submit(&c, &base, "big", "generate").await.json::<Value>().await.unwrap();
    let long_id = long["id"].as_str().unwrap().to_string();
    wait_for(&c, &base, &long_id, &["running"]).await;
    let queued = submit(&c, &base, "small", "generate").await.json::<Value>().await.unwrap();
    assert_eq!(queued["status"], "queued");
    svc.stop().await;

    let svc = launch(dir.path(), 1, None).await;
    let base = svc.url();
    let t = task(&c, &base, &long_id).await;
    assert_eq!(t["status"], "failed");
    assert_eq!(t["error"], RESTART_REASON);
    let t = task(&c, &base, trained["id"].as_str().unwrap()).await;
    assert_eq!(t["status"], "succeeded");
    let p: Value = c.get(format!("{base}/api/v1/projects/big")).send().await.unwrap().json().await.unwrap();
    assert_eq!(p["model"], trained["id"]);
    let t = wait_done(&c, &base, queued["id"].as_str().unwrap()).await;
    assert_eq!(t["status"], "succeeded");
    let page: Value = c.get(format!("{base}/api/v1/designResults/small")).send().await.unwrap().json().await.unwrap();
    assert_eq!(page["total"], 4);
    svc.stop().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn token_guards_writes() {
    let dir = tempfile::tempdir().unwrap();
    let svc = launch(dir.path(), 1, Some("s3cret")).await;
    let base = svc.url();
    let c = Client::new();
    assert_eq!(put(&c, &base, &demo_project("p", "C:2")).await.status(), StatusCode::UNAUTHORIZED);
    let r = c
        .put(format!("{base}/api/v1/projects"))
        .bearer_auth("s3cret")
        .json(&demo_project("p", "C:2"))
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    let r = c.get(format!("{base}/api/v1/projects/p")).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    svc.stop().await;
}
