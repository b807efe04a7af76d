#![allow(dead_code)]

use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{HeaderMap, Method, Request, StatusCode};
use http_body_util::BodyExt;
use rosann::AppState;
use rosann_core::layout::DataDir;
use rosann_core::media::{StubTranscriber, TranscriptSegment};
use rosann_testkit::fixtures::MediaFixture;
use serde_json::Value;
use tower::ServiceExt;

pub struct Harness {
    pub tmp: tempfile::TempDir,
    pub data: DataDir,
    pub state: Arc<AppState>,
}

pub struct Reply {
    pub status: StatusCode,
    pub headers: HeaderMap,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.body)
            .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.body)))
    }

    pub fn text(&self) -> String {
        String::from_utf8_lossy(&self.body).into_owned()
    }

    pub fn error_code(&self) -> String {
        self.json()["error"]["code"].as_str().unwrap_or_default().to_string()
    }
}

pub fn seg(speaker: &str, start_ms: u64, end_ms: u64, text: &str) -> TranscriptSegment {
    TranscriptSegment {
        speaker: speaker.into(),
        start_ms,
        end_ms,
        text: text.into(),
    }
}

/// Processing body that keeps audio as raw PCM, so no external decoder runs.
pub const PCM_CONFIG: &str = r#"{"audio_format":"pcm_s16le"}"#;

impl Harness {
    pub fn new() -> Harness {
        Harness::with(|_| {})
    }

    pub fn with(configure: impl FnOnce(&mut AppState)) -> Harness {
        let tmp = tempfile::tempdir().unwrap();
        let data = DataDir::init(tmp.path().join("datas")).unwrap();
        let mut state = AppState::new(data.clone());
        state.transcriber = Some(Arc::new(StubTranscriber::new(vec![
            seg("robot", 0, 400, "hello there"),
            seg("child", 500, 900, "hi"),
            seg("robot", 1000, 1500, "shall we play"),
        ])));
        configure(&mut state);
        Harness {
            tmp,
            data,
            state: Arc::new(state),
        }
    }

    /// Same data directory, fresh service state, as after a restart.
    pub fn restart(&self) -> Arc<AppState> {
        Arc::new(AppState::new(self.data.clone()))
    }

    pub fn add_bag(&self, name: &str, fx: &MediaFixture) -> String {
        let path = fx.write(self.data.bags_dir().join(name));
        rosann_core::media::bag_id_for(&path).unwrap()
    }

    pub async fn call(&self, method: Method, uri: &str, body: &str) -> Reply {
        call(&self.state, method, uri, body, &[]).await
    }

    pub async fn get(&self, uri: &str) -> Reply {
        self.call(Method::GET, uri, "").await
    }

    pub async fn post(&self, uri: &str, body: &str) -> Reply {
        self.call(Method::POST, uri, body).await
    }

    /// Runs the process endpoint and waits for its job to finish.
    pub async fn process(&self, bag_id: &str, config: &str) -> Value {
        let r = self.post(&format!("/api/bags/{bag_id}/process"), config).await;
        let v = r.json();
        if r.status == StatusCode::OK {
            return v;
        }
        assert_eq!(r.status, StatusCode::ACCEPTED, "{}", r.text());
        let id = v["job"]["id"].as_str().unwrap().to_string();
        let deadline = Instant::now() + Duration::from_secs(30);
        loop {
            let j = self.get(&format!("/api/jobs/{id}")).await.json();
            match j["state"].as_str().unwrap() {
                "done" => return v,
                "failed" => panic!("processing failed: {j}"),
                _ if Instant::now() > deadline => panic!("processing timed out"),
                _ => std::thread::sleep(Duration::from_millis(20)),
            }
        }
    }
}

pub async fn call(state: &Arc<AppState>, method: Method, uri: &str, body: &str, headers: &[(&str, &str)]) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    for (k, v) in headers {
        req = req.header(*k, *v);
    }
    let resp = rosann::router(state.clone())
        .oneshot(req.body(Body::from(body.to_string())).unwrap())
        .await
        .unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, headers, body }
}
