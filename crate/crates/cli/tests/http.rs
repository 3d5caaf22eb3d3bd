use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use futures_util::StreamExt;
use grounding::config::EngineConfig;
use grounding::service::{SessionInfo, SessionStore, TurnResponse};
use grounding::session::Diagnostics;
use grounding::simkit::{run_scenario, Scenario, TraceLog};
use grounding_cli::server::{router, AppState, EventKind, SessionEvent};
use serde_json::{json, Value};
use tokio_tungstenite::tungstenite::Message;
use tower::ServiceExt;

fn app() -> (AppState, Router) {
    let state = AppState::new(SessionStore::new(EngineConfig::default()));
    (state.clone(), router(state))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map_or_else(Body::empty, |b| Body::from(b.to_string()))).unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = to_bytes(res.into_body(), usize::MAX).await.unwrap();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn create(app: &Router, domain: &str) -> SessionInfo {
    let (status, body) = call(app, "POST", "/sessions", Some(json!({ "domain": domain, "seed": 1 }))).await;
    assert_eq!(status, StatusCode::CREATED);
    serde_json::from_value(body).unwrap()
}

fn turn(text: &str, attention: f64) -> Value {
    json!({ "transcript": text, "attention_prob": attention, "noise_level": 0.0 })
}

#[tokio::test]
async fn session_lifecycle() {
    let (_, app) = app();
    let info = create(&app, "receptionist").await;
    assert_eq!(info.goals.len(), 4);
    let uri = |tail: &str| format!("/sessions/{}/{tail}", info.id);

    let (status, body) = call(&app, "GET", &uri("trace"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(serde_json::from_value::<TraceLog>(body).unwrap().turns.is_empty());

    let (status, body) = call(&app, "POST", &uri("turns"), Some(turn("I am here to visit Fred Smith", 0.95))).await;
    assert_eq!(status, StatusCode::OK);
    let r: TurnResponse = serde_json::from_value(body).unwrap();
    assert_eq!((r.chosen.as_str(), r.goal.as_deref()), ("do_service", Some("Visitation")));

    let (status, body) = call(&app, "POST", &uri("reactions"), Some(json!({ "reaction": "corrected" }))).await;
    assert_eq!(status, StatusCode::OK);
    let d: Diagnostics = serde_json::from_value(body).unwrap();
    assert!((d.adaptation.scale("do_service") - 0.85).abs() < 1e-12);

    let (status, body) = call(&app, "GET", &uri("diagnostics"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(serde_json::from_value::<Diagnostics>(body).unwrap(), d);

    let mut next = turn("what do you think of the weather", 0.05);
    next["reaction"] = json!("accepted");
    // The previous turn was already corrected.
    let (status, body) = call(&app, "POST", &uri("turns"), Some(next)).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"], "reaction");

    let (status, body) = call(&app, "POST", &uri("turns"), Some(turn("what do you think of the weather", 0.05))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["chosen"], "ignore");
    let (_, body) = call(&app, "GET", &uri("trace"), None).await;
    assert_eq!(body["turns"].as_array().unwrap().len(), 2);

    let (_, body) = call(&app, "GET", "/sessions", None).await;
    assert_eq!(body, json!([info.id]));
}

#[tokio::test]
#[allow(clippy::await_holding_lock)]
async fn error_mapping() {
    let (state, app) = app();
    let (status, body) = call(&app, "POST", "/sessions/s42/turns", Some(turn("hi", 0.5))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "unknown_session");
    assert_eq!(call(&app, "GET", "/sessions/s42/trace", None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "GET", "/sessions/s42/diagnostics", None).await.0, StatusCode::NOT_FOUND);

    let (status, body) = call(&app, "POST", "/sessions", Some(json!({ "domain": "bakery" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "invalid");
    let (status, _) = call(&app, "POST", "/sessions", Some(json!({ "domian": "presenter" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let info = create(&app, "presenter").await;
    let turns = format!("/sessions/{}/turns", info.id);
    assert_eq!(call(&app, "POST", &turns, Some(turn("next", 2.0))).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(call(&app, "POST", &turns, Some(json!({ "transcript": 3 }))).await.0, StatusCode::BAD_REQUEST);
    let reactions = format!("/sessions/{}/reactions", info.id);
    assert_eq!(call(&app, "POST", &reactions, Some(json!({ "reaction": "accepted" }))).await.0, StatusCode::CONFLICT);
    assert_eq!(call(&app, "POST", &reactions, Some(json!({ "reaction": "shrug" }))).await.0, StatusCode::BAD_REQUEST);

    let cell = state.store().handle(&info.id).unwrap();
    let guard = cell.lock();
    let (status, body) = call(&app, "POST", &turns, Some(turn("next slide", 0.9))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"], "busy");
    drop(guard);
    let (_, body) = call(&app, "GET", &format!("/sessions/{}/trace", info.id), None).await;
    assert!(body["turns"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn http_trace_equals_scenario_trace() {
    let cfg = EngineConfig::default();
    let scenario = Scenario::named("adaptation").unwrap();
    let expected = run_scenario(&scenario, &cfg).unwrap();
    let (_, app) = app();
    let body = json!({ "domain": scenario.domain, "seed": scenario.seed, "overrides": scenario.overrides });
    let (_, info) = call(&app, "POST", "/sessions", Some(body)).await;
    let id = info["id"].as_str().unwrap();
    for i in 0..scenario.turns.len() {
        let mut req = serde_json::to_value(scenario.input(i)).unwrap();
        if i > 0 {
            let prev = &expected.turns[i - 1];
            req["reaction"] = json!(scenario.reaction_policy(i - 1).react(&prev.decision, scenario.turns[i - 1].goal.as_deref()));
        }
        let (status, _) = call(&app, "POST", &format!("/sessions/{id}/turns"), Some(req)).await;
        assert_eq!(status, StatusCode::OK);
    }
    let last = scenario.turns.len() - 1;
    let r = scenario.reaction_policy(last).react(&expected.turns[last].decision, scenario.turns[last].goal.as_deref());
    call(&app, "POST", &format!("/sessions/{id}/reactions"), Some(json!({ "reaction": r }))).await;
    let (_, body) = call(&app, "GET", &format!("/sessions/{id}/trace"), None).await;
    assert_eq!(serde_json::from_value::<TraceLog>(body).unwrap(), expected);
}

#[tokio::test]
async fn event_stream_pushes_turn_diagnostics() {
    let (state, app) = app();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let served = app.clone();
    tokio::spawn(async move { axum::serve(listener, served).await.unwrap() });

    let a = create(&app, "presenter").await;
    let b = create(&app, "presenter").await;
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/sessions/{}/events", a.id)).await.unwrap();
    let mut next = async || -> SessionEvent {
        loop {
            match ws.next().await.unwrap().unwrap() {
                Message::Text(t) => return serde_json::from_str(&t).unwrap(),
                _ => continue,
            }
        }
    };
    let snap = next().await;
    assert_eq!((snap.kind, snap.diagnostics.turn), (EventKind::Snapshot, None));

    // Events for other sessions are filtered out.
    state.store().post_turn(&b.id, &serde_json::from_value(turn("next", 0.9)).unwrap()).unwrap();
    let (_, body) = call(&app, "POST", &format!("/sessions/{}/turns", b.id), Some(turn("next", 0.9))).await;
    assert_eq!(body["turn"], 1);

    let (_, body) = call(&app, "POST", &format!("/sessions/{}/turns", a.id), Some(turn("next slide please", 0.95))).await;
    let e = next().await;
    assert_eq!((e.kind, e.session.as_str()), (EventKind::Turn, a.id.as_str()));
    assert_eq!(serde_json::to_value(&e.diagnostics).unwrap(), body["diagnostics"]);

    call(&app, "POST", &format!("/sessions/{}/reactions", a.id), Some(json!({ "reaction": "accepted" }))).await;
    assert_eq!(next().await.kind, EventKind::Reaction);

    let err = tokio_tungstenite::connect_async(format!("ws://{addr}/sessions/nope/events")).await;
    assert!(err.is_err());
}
