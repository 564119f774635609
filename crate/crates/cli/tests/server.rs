use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::Request;
use craft_cli::commands::{default_profile, load_library};
use craft_cli::server::{start, test_router, CommandReply, ControlLoop, Server};
use craft_core::bus::{MotorParams, VirtualBus};
use craft_core::retarget::SyntheticHand;
use craft_core::teleop::{Pipeline, PipelineConfig, StateMessage};
use craft_core::HandSpec;
use futures_util::{SinkExt, StreamExt};
use serde_json::Value;
use tokio_tungstenite::tungstenite::Message;
use tower::ServiceExt;

async fn server(rate_hz: f64) -> Server {
    let spec = Arc::new(HandSpec::default());
    let library = Arc::new(load_library(&spec).unwrap());
    let profile = default_profile(&spec).unwrap();
    let cfg = PipelineConfig { rate_hz, ..PipelineConfig::default() };
    let pipeline = Pipeline::new(spec, profile, VirtualBus::for_hand(MotorParams::default()), cfg).unwrap();
    start("127.0.0.1:0".parse().unwrap(), ControlLoop { pipeline, library, recording: None })
        .await
        .unwrap()
}

type Ws = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

async fn connect(s: &Server, path: &str) -> Ws {
    tokio_tungstenite::connect_async(format!("ws://{}{path}", s.addr)).await.unwrap().0
}

async fn next_state(ws: &mut Ws) -> StateMessage {
    loop {
        match tokio::time::timeout(Duration::from_secs(2), ws.next()).await.unwrap().unwrap().unwrap() {
            Message::Text(t) => return serde_json::from_str(t.as_str()).unwrap(),
            _ => continue,
        }
    }
}

async fn command(ws: &mut Ws, body: &str) -> CommandReply {
    ws.send(Message::Text(body.into())).await.unwrap();
    match tokio::time::timeout(Duration::from_secs(2), ws.next()).await.unwrap().unwrap().unwrap() {
        Message::Text(t) => serde_json::from_str(t.as_str()).unwrap(),
        m => panic!("unexpected {m:?}"),
    }
}

async fn get_json(path: &str) -> Value {
    let spec = HandSpec::default();
    let library = load_library(&spec).unwrap();
    let resp = test_router(&spec, &library)
        .oneshot(Request::get(path).body(Body::empty()).unwrap())
        .await
        .unwrap();
    assert!(resp.status().is_success());
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    serde_json::from_slice(&bytes).unwrap()
}

#[tokio::test]
async fn spec_endpoint_describes_the_hand() {
    let v = get_json("/spec").await;
    assert_eq!(v["joints"].as_array().unwrap().len(), 20);
    assert_eq!(v["digits"].as_array().unwrap().len(), 5);
    assert_eq!(v["hash"], HandSpec::default().content_hash());
    let back = HandSpec::from_toml_str(v["toml"].as_str().unwrap()).unwrap();
    assert_eq!(back, HandSpec::default());
}

#[tokio::test]
async fn grasps_endpoint_lists_all_presets() {
    let v = get_json("/grasps").await;
    let list = v.as_array().unwrap();
    assert_eq!(list.len(), 33);
    assert!(list.iter().all(|g| g["q"].as_array().unwrap().len() == 20));
}

#[tokio::test]
async fn two_subscribers_see_the_same_sequence() {
    let s = server(60.0).await;
    let mut a = connect(&s, "/state").await;
    let mut b = connect(&s, "/state").await;
    let mut ta = Vec::new();
    let mut tb = Vec::new();
    for _ in 0..30 {
        ta.push(next_state(&mut a).await);
        tb.push(next_state(&mut b).await);
    }
    for seq in [&ta, &tb] {
        assert!(seq.windows(2).all(|w| w[1].tick > w[0].tick && w[1].t > w[0].t));
    }
    let common: Vec<&StateMessage> = ta.iter().filter(|m| tb.iter().any(|n| n.tick == m.tick)).collect();
    assert!(common.len() >= 20);
    for m in common {
        let n = tb.iter().find(|n| n.tick == m.tick).unwrap();
        assert_eq!(m, n);
    }
    s.shutdown().await;
}

#[tokio::test]
async fn grasp_command_is_echoed_and_reached() {
    let s = server(30.0).await;
    let mut cmd = connect(&s, "/command").await;
    let mut state = connect(&s, "/state").await;
    let spec = HandSpec::default();
    let preset = load_library(&spec).unwrap().get("Power Sphere").unwrap().clone();
    let reply = command(&mut cmd, r#"{"kind":"grasp","name":"power sphere"}"#).await;
    assert!(reply.ok);
    assert_eq!(reply.target.unwrap(), preset.q.0.to_vec());
    tokio::time::sleep(Duration::from_millis(1500)).await;
    let mut m = next_state(&mut state).await;
    // drain anything queued before the sleep ended
    for _ in 0..70 {
        match tokio::time::timeout(Duration::from_millis(5), state.next()).await {
            Ok(Some(Ok(Message::Text(t)))) => m = serde_json::from_str(t.as_str()).unwrap(),
            _ => break,
        }
    }
    let err = m.q.iter().zip(preset.q.0.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 1e-3, "echoed pose off by {err}");
    assert!(!m.flags.stale);

    let bad = command(&mut cmd, r#"{"kind":"grasp","name":"nope"}"#).await;
    assert!(!bad.ok);
    let bad = command(&mut cmd, "not json").await;
    assert!(!bad.ok);
    let one = command(&mut cmd, r#"{"kind":"joint","joint":"index.pip","value":0.5}"#).await;
    let t = one.target.unwrap();
    let pip = "index.pip".parse::<craft_core::JointId>().unwrap().index();
    let dip = "index.dip".parse::<craft_core::JointId>().unwrap().index();
    assert_eq!((t[pip], t[dip]), (0.5, 0.5));
    s.shutdown().await;
}

#[tokio::test]
async fn keypoints_socket_drives_the_target() {
    let s = server(30.0).await;
    let mut kp = connect(&s, "/keypoints").await;
    let mut state = connect(&s, "/state").await;
    let frames = SyntheticHand::default().calibration_sweep(60, 30.0);
    for f in frames.iter().take(20) {
        kp.send(Message::Text(serde_json::to_string(f).unwrap().into())).await.unwrap();
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    kp.send(Message::Text("{}".into())).await.unwrap();
    let err = tokio::time::timeout(Duration::from_secs(2), kp.next()).await.unwrap().unwrap().unwrap();
    assert!(err.to_text().unwrap().contains("bad_frame"));
    let m = next_state(&mut state).await;
    assert!(m.target.iter().any(|&v| v != 0.0));
    // no frames for well over 200 ms: the target is held and flagged stale
    tokio::time::sleep(Duration::from_millis(400)).await;
    let mut last = next_state(&mut state).await;
    while let Ok(Some(Ok(Message::Text(t)))) = tokio::time::timeout(Duration::from_millis(5), state.next()).await {
        last = serde_json::from_str(t.as_str()).unwrap();
    }
    assert!(last.flags.stale);
    let summary = s.shutdown().await.summary;
    assert!(summary.frames_used >= 1);
    assert!(summary.stale_ticks >= 1);
}

#[tokio::test]
async fn stalled_subscriber_does_not_slow_the_loop() {
    let s = server(30.0).await;
    let _stalled = connect(&s, "/state").await;
    let mut live = connect(&s, "/state").await;
    let first = next_state(&mut live).await;
    tokio::time::sleep(Duration::from_secs(3)).await;
    let mut last = next_state(&mut live).await;
    let mut read = 1;
    while last.t - first.t < 2.9 {
        last = next_state(&mut live).await;
        read += 1;
        assert!(read < 1000, "state stream never caught up");
    }
    let dt = last.t - first.t;
    let ticks = (last.tick - first.tick) as f64;
    assert!(dt > 2.5, "loop advanced only {dt} s");
    // the loop kept its period within 20%
    assert!((dt / ticks - 1.0 / 30.0).abs() < 0.2 / 30.0, "mean period {}", dt / ticks);
    assert!(last.latency_ms < 2000.0 / 30.0);
    s.shutdown().await;
}
