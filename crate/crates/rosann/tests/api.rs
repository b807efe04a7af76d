mod common;

use std::sync::{Arc, Mutex};

use axum::http::{Method, StatusCode};
use common::{call, Harness, PCM_CONFIG};
use rosann_core::annotation::load_project;
use rosann_core::assist::{AssistError, ChatBackend, FrameFilter};
use rosann_core::stats::{compute_summary, ObservationWindow};
use rosann_core::Exec;
use rosann_testkit::fixtures::MediaFixture;
use serde_json::{json, Value};

fn fixture() -> MediaFixture {
    MediaFixture {
        frames: 21,
        frame_interval_ms: 100,
        audio_chunks: 11,
        audio_interval_ms: 200,
        ..MediaFixture::default()
    }
}

async fn processed() -> (Harness, String) {
    let h = Harness::new();
    let id = h.add_bag("session.bag", &fixture());
    h.process(&id, PCM_CONFIG).await;
    (h, id)
}

#[tokio::test]
async fn empty_data_dir_lists_no_bags() {
    let h = Harness::new();
    let r = h.get("/api/bags").await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json(), json!([]));
    assert_eq!(h.get("/api/codebooks").await.json(), json!([]));
}

#[tokio::test]
async fn bags_topics_and_unknown_ids() {
    let h = Harness::new();
    let id = h.add_bag("a.bag", &fixture());
    std::fs::write(h.data.bags_dir().join("notes.txt"), "x").unwrap();
    let bags = h.get("/api/bags").await.json();
    assert_eq!(bags.as_array().unwrap().len(), 1);
    assert_eq!(bags[0]["bag_id"], id.as_str());
    assert_eq!(bags[0]["processed"], false);
    let topics = h.get(&format!("/api/bags/{id}/topics")).await.json();
    let names: Vec<&str> = topics.as_array().unwrap().iter().map(|t| t["topic"].as_str().unwrap()).collect();
    assert_eq!(names, ["/audio", "/image_raw"]);
    let r = h.get("/api/bags/nope/topics").await;
    assert_eq!((r.status, r.error_code()), (StatusCode::NOT_FOUND, "NOT_FOUND".into()));
    let r = h.get(&format!("/api/bags/{id}/manifest")).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    let r = h.get("/api/nothing/here").await;
    assert_eq!(r.error_code(), "NOT_FOUND");
}

#[tokio::test]
async fn second_process_is_served_from_cache() {
    let h = Harness::new();
    let id = h.add_bag("a.bag", &fixture());
    let first = h.post(&format!("/api/bags/{id}/process"), PCM_CONFIG).await;
    assert_eq!(first.status, StatusCode::ACCEPTED);
    assert_eq!(first.json()["cached"], false);
    h.process(&id, PCM_CONFIG).await;
    let mtime = std::fs::metadata(h.data.processed(&id).join("video.avi")).unwrap().modified().unwrap();
    let again = h.post(&format!("/api/bags/{id}/process"), PCM_CONFIG).await;
    assert_eq!(again.status, StatusCode::OK);
    let v = again.json();
    assert_eq!(v["cached"], true);
    assert!(v.get("job").is_none());
    assert_eq!(v["manifest"]["bag_id"], id.as_str());
    let after = std::fs::metadata(h.data.processed(&id).join("video.avi")).unwrap().modified().unwrap();
    assert_eq!(mtime, after);
    assert_eq!(h.get("/api/bags").await.json()[0]["processed"], true);
    let frames = h.get(&format!("/api/bags/{id}/frames")).await.json();
    assert_eq!(frames["entries"].as_array().unwrap().len(), 21);
}

#[tokio::test]
async fn bad_process_config_names_the_field() {
    let h = Harness::new();
    let id = h.add_bag("a.bag", &fixture());
    let r = h.post(&format!("/api/bags/{id}/process"), r#"{"jpeg_quality":"high"}"#).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(r.json()["error"]["field"], "jpeg_quality");
}

#[tokio::test]
async fn media_supports_byte_ranges() {
    let (h, id) = processed().await;
    let file = std::fs::read(h.data.processed(&id).join("video.avi")).unwrap();
    assert!(file.len() > 1024);
    let uri = format!("/media/{id}/video");
    let r = call(&h.state, Method::GET, &uri, "", &[("range", "bytes=0-1023")]).await;
    assert_eq!(r.status, StatusCode::PARTIAL_CONTENT);
    assert_eq!(r.body, file[..1024]);
    assert_eq!(
        r.headers["content-range"].to_str().unwrap(),
        format!("bytes 0-1023/{}", file.len())
    );
    let r = call(&h.state, Method::GET, &uri, "", &[("range", "bytes=999999999-")]).await;
    assert_eq!(r.status, StatusCode::RANGE_NOT_SATISFIABLE);
    let full = h.get(&uri).await;
    assert_eq!((full.status, full.body.len()), (StatusCode::OK, file.len()));
    let audio = h.get(&format!("/media/{id}/audio")).await;
    assert_eq!(&audio.body[..4], b"RIFF");
    assert_eq!(h.get(&format!("/media/{id}/subtitles")).await.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn annotation_lifecycle_and_overlap() {
    let (h, id) = processed().await;
    let base = format!("/api/projects/{id}");
    let p = h.get(&base).await.json();
    assert_eq!(p["observation_ms"], 2000);
    let r = h.post(&format!("{base}/tiers"), r#"{"name":"Gaze","kind":"free_text"}"#).await;
    assert_eq!(r.status, StatusCode::CREATED);
    let r = h.post(&format!("{base}/tiers"), r#"{"name":"Gaze","kind":"free_text"}"#).await;
    assert_eq!((r.status, r.error_code()), (StatusCode::CONFLICT, "DUPLICATE".into()));

    let add = |s: u64, e: u64| json!({"tier":"Gaze","start_ms":s,"end_ms":e,"value":"robot"}).to_string();
    let a = h.post(&format!("{base}/annotations"), &add(100, 500)).await;
    assert_eq!(a.status, StatusCode::CREATED);
    let a_id = a.json()["id"].as_str().unwrap().to_string();
    let touching = h.post(&format!("{base}/annotations"), &add(500, 700)).await;
    assert_eq!(touching.status, StatusCode::CREATED);

    let r = h.post(&format!("{base}/annotations"), &add(400, 600)).await;
    assert_eq!((r.status, r.error_code()), (StatusCode::CONFLICT, "OVERLAP".into()));
    let r = h.post(&format!("{base}/annotations"), &add(1900, 2500)).await;
    assert_eq!(r.error_code(), "OUT_OF_RANGE");

    let r = h.call(Method::PATCH, &format!("{base}/annotations/{a_id}"), r#"{"end_ms":300}"#).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json()["end_ms"], 300);
    let r = h.call(Method::PATCH, &format!("{base}/annotations/{a_id}"), r#"{"end_ms":600}"#).await;
    assert_eq!(r.error_code(), "OVERLAP");
    let r = h.call(Method::DELETE, &format!("{base}/annotations/{a_id}"), "").await;
    assert_eq!(r.status, StatusCode::OK);
    let r = h.call(Method::DELETE, &format!("{base}/annotations/{a_id}"), "").await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);

    let saved = load_project(&h.data.project_path(&id)).unwrap();
    assert_eq!(saved.annotation_count(), 1);
    assert_eq!(h.get(&base).await.json(), serde_json::to_value(&saved).unwrap());
    let r = h.call(Method::DELETE, &format!("{base}/tiers/Gaze"), "").await;
    assert_eq!(r.status, StatusCode::OK);
    assert!(h.get(&base).await.json()["tiers"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn malformed_bodies_use_the_envelope() {
    let (h, id) = processed().await;
    let base = format!("/api/projects/{id}");
    for body in ["{", "[]", r#"{"name":"T"}"#, r#"{"name":"T","kind":"sideways"}"#] {
        let r = h.post(&format!("{base}/tiers"), body).await;
        assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
        let e = &r.json()["error"];
        assert_eq!(e["code"], "VALIDATION");
        assert!(e["message"].as_str().unwrap().len() > 3);
    }
    let r = h.post(&format!("{base}/annotations"), r#"{"tier":"x","start_ms":-1,"end_ms":2,"value":"v"}"#).await;
    assert_eq!(r.json()["error"]["field"], "start_ms");
    let r = h.get(&format!("{base}/stats?t_ms=abc")).await;
    assert_eq!(r.json()["error"]["field"], "t_ms");
    let r = h.get(&format!("{base}/stats?t_ms=0")).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    let r = h.get(&format!("{base}/export/stats?format=xml")).await;
    assert_eq!(r.json()["error"]["field"], "format");
}

#[tokio::test]
async fn codebook_crud_and_binding() {
    let (h, id) = processed().await;
    let book = r##"{"name":"gestures","codes":[{"code":"point"},{"code":"wave","color":"#00FF00"}]}"##;
    let r = h.post("/api/codebooks", book).await;
    assert_eq!(r.status, StatusCode::CREATED);
    assert_eq!(r.json()["codes"][0]["color"], "#E6194B");
    assert_eq!(h.post("/api/codebooks", book).await.status, StatusCode::CONFLICT);
    let bad = h.post("/api/codebooks", r##"{"name":"b","codes":[{"code":"x","color":"red"}]}"##).await;
    assert_eq!(bad.status, StatusCode::UNPROCESSABLE_ENTITY);

    let base = format!("/api/projects/{id}");
    let r = h
        .post(&format!("{base}/tiers"), r#"{"name":"G","kind":"codebook","codebook_ref":"gestures"}"#)
        .await;
    assert_eq!(r.status, StatusCode::CREATED);
    let r = h.post(&format!("{base}/annotations"), r#"{"tier":"G","start_ms":0,"end_ms":10,"value":"nod"}"#).await;
    assert_eq!(r.error_code(), "CODE_NOT_IN_CODEBOOK");
    let r = h.post(&format!("{base}/annotations"), r#"{"tier":"G","start_ms":0,"end_ms":10,"value":"wave"}"#).await;
    assert_eq!(r.status, StatusCode::CREATED);

    let put = r##"{"name":"gestures","codes":[{"code":"point"},{"code":"wave"},{"code":"nod"}]}"##;
    assert_eq!(h.call(Method::PUT, "/api/codebooks/gestures", put).await.status, StatusCode::OK);
    assert_eq!(h.get("/api/codebooks/gestures").await.json()["codes"].as_array().unwrap().len(), 3);
    assert_eq!(h.call(Method::PUT, "/api/codebooks/other", put).await.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(h.call(Method::DELETE, "/api/codebooks/gestures", "").await.status, StatusCode::NO_CONTENT);
    assert_eq!(h.get("/api/codebooks/gestures").await.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn stats_endpoint_matches_direct_computation() {
    let h = Harness::new();
    let id = h.add_bag("a.bag", &fixture());
    h.process(&id, r#"{"audio_format":"pcm_s16le","transcribe":true}"#).await;
    let base = format!("/api/projects/{id}");
    assert_eq!(h.post(&format!("{base}/transcript"), "").await.status, StatusCode::OK);
    h.post(&format!("{base}/tiers"), r#"{"name":"A","kind":"free_text"}"#).await;
    for (s, e) in [(0, 300), (700, 1000), (1200, 1250)] {
        let body = json!({"tier":"A","start_ms":s,"end_ms":e,"value":"v"}).to_string();
        assert_eq!(h.post(&format!("{base}/annotations"), &body).await.status, StatusCode::CREATED);
    }
    let project = load_project(&h.data.project_path(&id)).unwrap();
    for include in [true, false] {
        let got = h.get(&format!("{base}/stats?include_transcript={include}")).await.json();
        let want = compute_summary(&project, ObservationWindow::for_project(&project).unwrap(), include, Exec::Sequential);
        assert_eq!(got, serde_json::to_value(&want).unwrap());
    }
    let got = h.get(&format!("{base}/stats?t_ms=60000")).await.json();
    assert_eq!(got["observation_ms"], 60000);
    let csv = h.get(&format!("{base}/export/stats?format=csv")).await;
    assert!(csv.headers["content-type"].to_str().unwrap().starts_with("text/csv"));
    assert!(csv.text().starts_with("scope,count,"));
    let js = h.get(&format!("{base}/export/stats")).await.json();
    assert_eq!(js["overall"]["occurrences"], 6);
    let js = h.get(&format!("{base}/export/stats?include_transcript=false")).await.json();
    assert_eq!(js["overall"]["occurrences"], 3);
}

#[tokio::test]
async fn transcript_import_creates_speaker_tiers() {
    let h = Harness::new();
    let id = h.add_bag("a.bag", &fixture());
    h.process(&id, r#"{"audio_format":"pcm_s16le","transcribe":true}"#).await;
    let segs = h.get(&format!("/api/bags/{id}/transcript")).await.json();
    assert_eq!(segs[0]["speaker"], "Speaker 1");
    let base = format!("/api/projects/{id}");
    let r = h.post(&format!("{base}/transcript"), "").await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json()["imported"], 3);
    let tiers: Vec<Value> = h.get(&base).await.json()["tiers"].as_array().unwrap().clone();
    let names: Vec<&str> = tiers.iter().map(|t| t["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["Speaker 1", "Speaker 2"]);
    assert!(tiers.iter().all(|t| t["kind"] == "transcript"));
    let again = h.post(&format!("{base}/transcript"), "").await;
    assert_eq!(again.status, StatusCode::CONFLICT);
    let replaced = h.post(&format!("{base}/transcript"), r#"{"replace":true}"#).await;
    assert_eq!(replaced.json()["imported"], 3);
}

#[tokio::test]
async fn csv_export_and_restart_persistence() {
    let (h, id) = processed().await;
    let base = format!("/api/projects/{id}");
    h.post(&format!("{base}/tiers"), r#"{"name":"Notes","kind":"free_text"}"#).await;
    h.post(&format!("{base}/annotations"), r#"{"tier":"Notes","start_ms":1500,"end_ms":1999,"value":"a, \"b\""}"#)
        .await;
    h.post(&format!("{base}/annotations"), r#"{"tier":"Notes","start_ms":0,"end_ms":5,"value":"first"}"#).await;
    let before = h.get(&base).await.json();
    let csv = h.get(&format!("{base}/export/csv")).await;
    let rows = rosann_testkit::csv_oracle::parse(&csv.text()).unwrap();
    assert_eq!(rows[0], ["tier", "content", "start_time", "end_time"]);
    assert_eq!(rows[1], ["Notes", "first", "00:00:00.000", "00:00:00.005"]);
    assert_eq!(rows[2], ["Notes", "a, \"b\"", "00:00:01.500", "00:00:01.999"]);

    let fresh = h.restart();
    let after = call(&fresh, Method::GET, &base, "", &[]).await.json();
    assert_eq!(before, after);
    let r = call(&fresh, Method::POST, &format!("{base}/annotations"), r#"{"tier":"Notes","start_ms":10,"end_ms":20,"value":"x"}"#, &[]).await;
    assert_eq!(r.json()["id"], "a3");
}

#[tokio::test]
async fn corrupt_project_file_is_reported() {
    let (h, id) = processed().await;
    std::fs::write(h.data.project_path(&id), r#"{"version":99}"#).unwrap();
    let r = h.get(&format!("/api/projects/{id}")).await;
    assert_eq!((r.status.as_u16(), r.error_code()), (500, "SCHEMA_VERSION".into()));
}

struct Canned {
    reply: String,
    bodies: Mutex<Vec<Value>>,
}

impl ChatBackend for Canned {
    fn complete(&self, body: &Value) -> Result<String, AssistError> {
        self.bodies.lock().unwrap().push(body.clone());
        Ok(self.reply.clone())
    }
}

struct FacesEverywhere;

impl FrameFilter for FacesEverywhere {
    fn contains_face(&self, _: u64, _: &[u8]) -> bool {
        true
    }
}

#[tokio::test]
async fn chat_turn_applies_suggestions() {
    let backend = Arc::new(Canned {
        reply: r#"[{"tier":"Emotion","start":0.1,"end":0.5,"value":"happy"},{"tier":"Emotion","start":0.2,"end":0.3,"value":"x"}]"#.into(),
        bodies: Mutex::new(Vec::new()),
    });
    let h = Harness::with(|s| {
        s.chat = Some(backend.clone());
        s.frame_filter = Some(Arc::new(FacesEverywhere));
    });
    let id = h.add_bag("a.bag", &fixture());
    h.process(&id, PCM_CONFIG).await;
    let base = format!("/api/projects/{id}");
    let r = h.post(&format!("{base}/chat"), r#"{"instruction":"mark emotions","session_id":"s1","privacy":"allow_all_frames","frames_per_minute":600}"#).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text());
    let v = r.json();
    assert_eq!(v["tiers"], json!(["Emotion"]));
    assert_eq!(v["applied"], 1);
    assert_eq!(v["rejected"].as_array().unwrap().len(), 1);
    let tier = &h.get(&base).await.json()["tiers"][0];
    assert_eq!((tier["origin"].as_str(), tier["annotations"][0]["start_ms"].as_u64()), (Some("llm"), Some(100)));
    assert!(backend.bodies.lock().unwrap()[0].to_string().contains("data:image/jpeg;base64,"));

    let r = h.post(&format!("{base}/chat"), r#"{"instruction":"again","session_id":"s1","privacy":"detector"}"#).await;
    assert_eq!(r.json()["tiers"], json!(["Emotion-2"]));
    assert!(!backend.bodies.lock().unwrap()[1].to_string().contains("data:image/jpeg"));
    let log = h.get(&format!("{base}/chat/s1")).await.json();
    assert_eq!(log["entries"].as_array().unwrap().len(), 5);

    let r = h.post(&format!("{base}/chat"), r#"{"instruction":"x","privacy":"everything"}"#).await;
    assert_eq!(r.json()["error"]["field"], "privacy");
}

#[tokio::test]
async fn chat_reply_without_json_is_a_note() {
    let backend = Arc::new(Canned {
        reply: "I could not find anything.".into(),
        bodies: Mutex::new(Vec::new()),
    });
    let h = Harness::with(|s| s.chat = Some(backend.clone()));
    let id = h.add_bag("a.bag", &fixture());
    h.process(&id, PCM_CONFIG).await;
    let r = h.post(&format!("/api/projects/{id}/chat"), r#"{"instruction":"x"}"#).await;
    assert_eq!(r.status, StatusCode::OK);
    assert!(r.json()["note"].is_string());
    assert_eq!(h.get(&format!("/api/projects/{id}")).await.json()["tiers"], json!([]));
}

#[tokio::test]
async fn ui_directory_is_served_when_configured() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("index.html"), "<html>ui</html>").unwrap();
    let dir = tmp.path().to_path_buf();
    let h = Harness::with(|s| s.ui_dir = Some(dir));
    let r = h.get("/index.html").await;
    assert_eq!(r.text(), "<html>ui</html>");
    assert_eq!(h.get("/api/bags").await.status, StatusCode::OK);
}

#[tokio::test]
async fn unknown_job_is_not_found() {
    let h = Harness::new();
    assert_eq!(h.get("/api/jobs/j999").await.error_code(), "NOT_FOUND");
}
