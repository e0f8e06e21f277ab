mod support;

use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, StatusCode};
use serde_json::{json, Value};
use support::*;
use vignette_core::extract::record_exchange;
use vignette_core::runtime::{EventLog, Record, ViewerTrace};
use vignette_core::spec::{encode_spec, Character, VignetteSpec};

fn records(v: &Value) -> Vec<Record> {
    serde_json::from_value(v["records"].clone()).unwrap()
}

#[tokio::test]
async fn kelly_authoring_over_http_reproduces_the_frozen_spec_and_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    let api = Api::open(dir.path(), 0, &kelly_mock());

    let (status, v) = api.post("/api/v1/vignettes", json!({ "story": kelly_story() })).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    assert_eq!(v["extraction_stage"], "rooms_pending");
    assert_eq!(v["spec"]["environment"]["layout_id"], "residential");
    let names: Vec<&str> = v["spec"]["characters"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["me", "Julie", "Jack"]);
    let id = v["id"].as_str().unwrap().to_string();
    let base = format!("/api/v1/vignettes/{id}");
    let rooms = v["spec"]["environment"]["rooms"].as_array().unwrap();
    let dining = rooms.iter().find(|r| r["label"] == "dining").unwrap()["id"].as_str().unwrap().to_string();

    let (status, v) = api.post(&format!("{base}/rooms"), json!({ "labels": { dining.clone(): "living room" } })).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["extraction_stage"], "objects_pending");

    let objects = v["spec"]["environment"]["objects"].as_array().unwrap();
    let rug = objects.iter().find(|o| o["asset_id"] == "rug" && o["room_id"] == dining.as_str()).unwrap()["id"].as_str().unwrap().to_string();
    let (status, v) = api.post(&format!("{base}/environment"), json!({ "ops": [{ "op": "remove", "object_id": rug }] })).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert!(v["vignette"]["spec"]["environment"]["objects"].as_array().unwrap().iter().all(|o| o["id"] != rug.as_str()));
    let (status, v) =
        api.post(&format!("{base}/environment"), json!({ "ops": [{ "op": "add", "name": "dining chair", "room": "kitchen" }] })).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    let chair = v["touched"][0].as_str().unwrap().to_string();
    let (status, _) = api.post(&format!("{base}/confirm"), json!({ "stage": "objects_pending" })).await;
    assert_eq!(status, StatusCode::OK);

    let (status, reply) = api.post(&format!("{base}/characters/jack/chat"), json!({ "utterance": "I burned the rice again." })).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(reply, json!({ "text": "Oh no. Want me to order some takeout instead?", "withheld": false }));
    let (_, v) = api.get(&base).await;
    let mut jack: Character = serde_json::from_value(v["spec"]["characters"][2].clone()).unwrap();
    record_exchange(&mut jack, "I burned the rice again.", "Don't worry, it happens. I'll help you make it again.");
    let (status, _) = api
        .call(Method::PATCH, &format!("{base}/characters/jack"), Some(json!({ "conversation_snippets": jack.conversation_snippets })))
        .await;
    assert_eq!(status, StatusCode::OK);
    let (status, s) = api.post(&format!("{base}/characters/jack/suggest"), json!({})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(s["suggestions"]["personality"], "supportive");
    let patch = json!({ "accept": { "personality": "supportive" }, "sprite_id": "sprite.npc.3" });
    let (status, v) = api.call(Method::PATCH, &format!("{base}/characters/jack"), Some(patch)).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["spec"]["characters"][2]["personality"], "supportive");
    api.post(&format!("{base}/confirm"), json!({ "stage": "characters_pending" })).await;

    let edit = json!({ "edits": [{ "op": "add_activity", "event": 1, "character_id": "jack", "action": "having dinner", "object_id": chair }] });
    let (status, v) = api.post(&format!("{base}/events"), edit).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    let (status, v) = api.post(&format!("{base}/confirm"), json!({ "stage": "events_pending" })).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["extraction_stage"], "complete");

    let spec: VignetteSpec = serde_json::from_value(v["spec"].clone()).unwrap();
    assert_eq!(encode_spec(&spec).unwrap(), encode_spec(&kelly_spec()).unwrap(), "HTTP authoring drifted from the direct walkthrough");

    let before = api.get(&base).await.1;
    drop(api);
    let api = Api::open(dir.path(), 0, &kelly_mock());
    assert_eq!(api.get(&base).await.1, before, "restart lost or changed the vignette");
    let (_, list) = api.get("/api/v1/vignettes").await;
    assert_eq!(list.as_array().unwrap().len(), 1);
    assert_eq!(list[0]["extraction_stage"], "complete");
}

/// Drives a manual-clock session with the walkthrough trace: every command is posted while
/// the world sits at the tick it was recorded for.
#[tokio::test]
async fn walkthrough_replayed_over_http_matches_the_direct_log() {
    let dir = store_with_kelly();
    let api = Api::open(dir.path(), 0, &kelly_mock());
    let trace = ViewerTrace::load(&fixtures().join("kelly/traces/walkthrough.json")).unwrap();

    let (status, created) = api.post("/api/v1/sessions", json!({ "vignette_id": "kelly", "mode": "cd", "seed": trace.seed })).await;
    assert_eq!(status, StatusCode::CREATED, "{created}");
    assert_eq!(created["caption"], kelly_spec().story_text.as_str());
    assert_eq!(created["state"]["glow"], json!(["stove"]));
    let sid = created["session_id"].as_str().unwrap().to_string();
    let base = format!("/api/v1/sessions/{sid}");

    let mut wire = Vec::new();
    let mut since = 0;
    let mut tick = 0;
    let mut poll = |v: &Value, since: &mut u64| {
        wire.extend(records(v));
        *since = v["next_since"].as_u64().unwrap();
    };
    for c in &trace.commands {
        if c.at_tick > tick {
            let (status, v) = api.post(&format!("{base}/advance"), json!({ "ticks": c.at_tick - tick })).await;
            assert_eq!(status, StatusCode::OK, "{v}");
            tick = v["tick"].as_u64().unwrap();
            let (_, d) = api.get(&format!("{base}/state?since_tick={since}&timeout_ms=0")).await;
            poll(&d, &mut since);
        }
        let (status, ack) = api.post(&format!("{base}/commands"), serde_json::to_value(&c.kind).unwrap()).await;
        assert_eq!(status, StatusCode::ACCEPTED, "{ack}");
        assert_eq!(ack["apply_at_tick"], c.at_tick);
    }
    loop {
        let (status, v) = api.post(&format!("{base}/advance"), json!({ "ticks": 50 })).await;
        if status == StatusCode::GONE {
            break;
        }
        assert_eq!(status, StatusCode::OK, "{v}");
        let (_, d) = api.get(&format!("{base}/state?since_tick={since}&timeout_ms=0")).await;
        poll(&d, &mut since);
        if v["status"] == "ended" {
            break;
        }
        assert!(v["tick"].as_u64().unwrap() < 4_000, "walkthrough never ended");
    }

    let golden = std::fs::read_to_string(fixtures().join("kelly/golden/walkthrough.events.ndjson")).unwrap();
    assert_eq!(EventLog::from_records(wire.clone()).to_ndjson(), golden);
    let on_disk = std::fs::read_to_string(dir.path().join(format!("sessions/{sid}.ndjson"))).unwrap();
    assert_eq!(on_disk, golden, "session log on disk");

    let (status, e) = api.post(&format!("{base}/commands"), json!({ "kind": "move", "direction": "N" })).await;
    assert_eq!(status, StatusCode::GONE);
    assert_eq!(e["code"], "SESSION_ENDED");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn long_poll_deltas_concatenate_to_the_runtime_log() {
    let dir = store_with_kelly();
    let api = Api::open(dir.path(), 2, &kelly_mock());
    let (status, created) = api.post("/api/v1/sessions", json!({ "vignette_id": "kelly", "seed": 7 })).await;
    assert_eq!(status, StatusCode::CREATED);
    let sid = created["session_id"].as_str().unwrap().to_string();
    let base = format!("/api/v1/sessions/{sid}");

    let mut wire: Vec<Record> = Vec::new();
    let mut since = 0;
    let mut polls = 0;
    while since < 150 {
        let (status, d) = api.get(&format!("{base}/state?since_tick={since}&timeout_ms=1000")).await;
        assert_eq!(status, StatusCode::OK);
        let next = d["next_since"].as_u64().unwrap();
        assert!(next > since, "long poll returned without progress");
        let got = records(&d);
        assert!(got.iter().all(|r| r.tick >= since && r.tick < next), "delta outside its tick window");
        wire.extend(got);
        since = next;
        polls += 1;
        if polls == 3 {
            let started = std::time::Instant::now();
            let (status, ack) = api.post(&format!("{base}/commands"), json!({ "kind": "move", "direction": "N" })).await;
            assert_eq!(status, StatusCode::ACCEPTED, "{ack}");
            assert!(started.elapsed() < Duration::from_millis(50), "command ack took a tick or more");
        }
    }
    let (status, _) = api.call(Method::DELETE, &base, None).await;
    assert_eq!(status, StatusCode::OK);
    let (_, d) = api.get(&format!("{base}/state?since_tick={since}&timeout_ms=0")).await;
    assert_eq!(d["closed"], true);
    wire.extend(records(&d));

    let direct = api.state.session(&sid).unwrap().log();
    assert_eq!(wire, direct);
    let on_disk = std::fs::read_to_string(dir.path().join(format!("sessions/{sid}.ndjson"))).unwrap();
    assert_eq!(EventLog::from_ndjson(&on_disk).unwrap().records(), direct.as_slice());

    let (status, e) = api.post(&format!("{base}/commands"), json!({ "kind": "move", "direction": "S" })).await;
    assert_eq!(status, StatusCode::GONE, "{e}");
    let (status, e) = api.post(&format!("{base}/advance"), json!({ "ticks": 1 })).await;
    assert_eq!(status, StatusCode::CONFLICT, "{e}");
    assert_eq!(e["code"], "CLOCK_RUNNING");
}

#[tokio::test]
async fn request_errors_use_the_error_shape() {
    let dir = tempfile::tempdir().unwrap();
    let mut script: Value = serde_json::from_str(&std::fs::read_to_string(kelly_mock()).unwrap()).unwrap();
    let five = json!({
        "template": "EXTRACT_CHARACTERS",
        "match": { "story": "five of us" },
        "response": { "characters": [
            { "name": "me", "role": "PC" },
            { "name": "Ana", "role": "NPC" },
            { "name": "Ben", "role": "NPC" },
            { "name": "Cal", "role": "NPC" },
            { "name": "Dee", "role": "NPC" }
        ] }
    });
    script["entries"].as_array_mut().unwrap().insert(0, five);
    let script_path = dir.path().join("mock.json");
    std::fs::write(&script_path, script.to_string()).unwrap();
    let api = Api::open(&dir.path().join("store"), 0, &script_path);

    let (status, e) = api.post("/api/v1/vignettes", json!({ "story": "   " })).await;
    assert_eq!((status, e["code"].as_str()), (StatusCode::BAD_REQUEST, Some("EMPTY_STORY")));
    let (status, e) = api.raw(Method::POST, "/api/v1/vignettes", Some("application/json"), Body::empty()).await;
    assert_eq!((status, e["code"].as_str()), (StatusCode::BAD_REQUEST, Some("BAD_REQUEST")));
    let (status, e) = api.raw(Method::POST, "/api/v1/vignettes", Some("application/json"), Body::from("{\"story\":")).await;
    assert_eq!((status, e["code"].as_str()), (StatusCode::BAD_REQUEST, Some("BAD_REQUEST")));
    let (status, e) = api.raw(Method::POST, "/api/v1/vignettes", None, Body::from("{\"story\":\"hi\"}")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{e}");

    let (status, e) = api.post("/api/v1/vignettes", json!({ "story": "There were five of us at the lake and I cooked for everyone." })).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{e}");
    assert_eq!(e["code"], "CAP_EXCEEDED");
    assert_eq!(e["details"]["characters"].as_array().unwrap().len(), 5);
    assert_eq!(e["details"]["max"], 3);
    assert!(e["message"].as_str().unwrap().contains("5 characters"));

    let (status, e) = api.get("/api/v1/vignettes/nope").await;
    assert_eq!((status, e["code"].as_str()), (StatusCode::NOT_FOUND, Some("NOT_FOUND")));
    let (status, _) = api.get("/api/v1/sessions/nope/state").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = api.post("/api/v1/sessions/nope/commands", json!({ "kind": "wait", "n": 1 })).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, e) = api.get("/api/v2/whatever").await;
    assert_eq!((status, e["code"].as_str()), (StatusCode::NOT_FOUND, Some("NOT_FOUND")));

    let (_, v) = api.post("/api/v1/vignettes", json!({ "story": kelly_story() })).await;
    let id = v["id"].as_str().unwrap().to_string();
    let base = format!("/api/v1/vignettes/{id}");
    let (status, e) = api.post(&format!("{base}/confirm"), json!({ "stage": "events_pending" })).await;
    assert_eq!((status, e["code"].as_str()), (StatusCode::CONFLICT, Some("STAGE_VIOLATION")), "{e}");
    assert_eq!(e["details"]["actual"], "rooms_pending");
    let (status, e) = api.post(&format!("{base}/environment"), json!({ "ops": [] })).await;
    assert_eq!(status, StatusCode::CONFLICT, "{e}");
    let (status, e) = api.post("/api/v1/sessions", json!({ "vignette_id": id })).await;
    assert_eq!((status, e["code"].as_str()), (StatusCode::CONFLICT, Some("INCOMPLETE_SPEC")), "{e}");
    let (status, e) = api.call(Method::PATCH, &format!("{base}/characters/nobody"), Some(json!({ "name": "x" }))).await;
    assert_eq!(status, StatusCode::NOT_FOUND, "{e}");

    let (_, v) = api.post(&format!("{base}/rooms"), json!({})).await;
    let objects = v["spec"]["environment"]["objects"].as_array().unwrap().clone();
    let stove = objects.iter().find(|o| o["asset_id"] == "stove").unwrap();
    let other = objects.iter().find(|o| o["asset_id"] == "sofa").unwrap();
    let op = json!({ "ops": [{ "op": "move", "object_id": other["id"], "position": stove["position"] }] });
    let (status, e) = api.post(&format!("{base}/environment"), op).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{e}");
    assert_eq!(e["code"], "OBJECT_OVERLAP");
    assert!(!e["details"]["violations"].as_array().unwrap().is_empty());
    let (_, after) = api.get(&base).await;
    assert_eq!(after["spec"]["environment"]["objects"].as_array().unwrap(), &objects, "a rejected batch must not change the draft");

    let (status, e) = api.post(&format!("{base}/environment"), json!({ "ops": [{ "op": "remove", "object_id": "no_such_thing" }] })).await;
    assert_eq!((status, e["code"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("UNKNOWN_OBJECT_REF")), "{e}");
}

/// Upper `alpha` point of chi-square with `df` degrees of freedom (Wilson-Hilferty).
fn chi_square_upper(df: f64, z: f64) -> f64 {
    let a = 2.0 / (9.0 * df);
    df * (1.0 - a + z * a.sqrt()).powi(3)
}

#[tokio::test]
async fn baseline_sessions_pick_objects_uniformly() {
    let dir = store_with_kelly();
    let api = Api::open(dir.path(), 0, &kelly_mock());
    let objects: Vec<String> = kelly_spec().environment.objects.iter().map(|o| o.id.as_str().to_string()).collect();
    let mut counts: std::collections::BTreeMap<String, u64> = objects.iter().map(|o| (o.clone(), 0)).collect();
    let mut picks = 0u64;
    let mut seed = 0;
    while picks < 1_000 {
        let (status, created) = api.post("/api/v1/sessions", json!({ "vignette_id": "kelly", "mode": "bl", "seed": seed })).await;
        assert_eq!(status, StatusCode::CREATED, "{created}");
        let sid = created["session_id"].as_str().unwrap().to_string();
        let (status, _) = api.post(&format!("/api/v1/sessions/{sid}/advance"), json!({ "ticks": 4_000 })).await;
        assert_eq!(status, StatusCode::OK);
        let (_, d) = api.get(&format!("/api/v1/sessions/{sid}/state?since_tick=0&timeout_ms=0")).await;
        let log = records(&d);
        assert_eq!(log[0].payload["mode"], "BL");
        for r in log.iter().filter(|r| r.kind == vignette_core::runtime::RecordKind::PlanResolved) {
            let object = r.payload["plan_b"]["object_id"].as_str().expect("BL picks always name an object");
            *counts.get_mut(object).unwrap_or_else(|| panic!("picked unknown object {object}")) += 1;
            picks += 1;
        }
        api.call(Method::DELETE, &format!("/api/v1/sessions/{sid}"), None).await;
        seed += 1;
    }
    let expected = picks as f64 / objects.len() as f64;
    let chi: f64 = counts.values().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let limit = chi_square_upper((objects.len() - 1) as f64, 3.09);
    assert!(chi < limit, "BL picks over {picks} plans are not uniform: chi2 {chi:.1} >= {limit:.1}");
}

#[tokio::test]
async fn health_and_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let api = Api::open(dir.path(), 0, &kelly_mock());
    let (status, h) = api.get("/api/v1/health").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(h["status"], "ok");
    let (status, c) = api.get("/api/v1/catalog").await;
    assert_eq!(status, StatusCode::OK);
    assert!(c["assets"].as_array().unwrap().iter().any(|a| a["name"] == "stove"));
    assert!(c["layouts"].as_array().unwrap().iter().any(|l| l["id"] == "residential"));
}
