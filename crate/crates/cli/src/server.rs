//! HTTP and WebSocket front of a running pipeline.
//!
//! | route        | kind      | payload                                   |
//! |--------------|-----------|-------------------------------------------|
//! | `GET /spec`  | JSON      | hand geometry, joint limits, spec TOML    |
//! | `GET /grasps`| JSON      | every preset with its 20 joint angles     |
//! | `/state`     | WebSocket | one `StateMessage` JSON text per tick     |
//! | `/keypoints` | WebSocket | `KeypointFrame` JSON text in, errors out  |
//! | `/command`   | WebSocket | `ConsoleCommand` in, `CommandReply` out   |
//!
//! Each `/state` subscriber reads from a bounded broadcast queue; a slow
//! reader loses the oldest messages and never stalls the control loop.

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::{Json, Router};
use craft_core::bus::VirtualBus;
use craft_core::grasp::GraspLibrary;
use craft_core::hand::{HandSpec, JointAngles, JointId, Slot};
use craft_core::retarget::KeypointFrame;
use craft_core::teleop::{
    CommandRecord, KeypointSource, Mailbox, Pipeline, RunSummary, SessionEntry, SessionRecord, SourceEvent,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::net::TcpListener;
use tokio::sync::{broadcast, mpsc, oneshot, watch};

pub const STATE_QUEUE: usize = 64;

/// Requests accepted on `/command`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConsoleCommand {
    /// Drive to a named grasp preset.
    Grasp { name: String },
    /// Full pose: 20 joint angles, or the 15 active ones.
    Joints { q: Vec<f64> },
    /// One joint by name, e.g. `index.pip`.
    Joint { joint: String, value: f64 },
    /// All joints to zero.
    Release,
    ClearFault,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandReply {
    pub ok: bool,
    /// The target now held, all 20 joints.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CommandReply {
    fn err(msg: impl Into<String>) -> Self {
        CommandReply {
            ok: false,
            target: None,
            error: Some(msg.into()),
        }
    }
}

type CommandRequest = (ConsoleCommand, oneshot::Sender<CommandReply>);

#[derive(Clone)]
struct AppState {
    spec_view: Arc<Value>,
    grasps_view: Arc<Value>,
    states: broadcast::Sender<Arc<str>>,
    mailbox: Mailbox,
    commands: mpsc::Sender<CommandRequest>,
}

pub fn spec_view(spec: &HandSpec) -> Value {
    let joints: Vec<Value> = spec
        .joints()
        .map(|j| {
            json!({
                "id": j.id.to_string(),
                "index": j.id.index(),
                "active": j.id.active_index().is_some(),
                "limits": j.limits,
                "rolling_radius": j.kind.radius(),
            })
        })
        .collect();
    let digits: Vec<Value> = spec
        .digits
        .iter()
        .map(|d| {
            json!({
                "digit": d.digit.name(),
                "mount": d.mount_pose,
                "phalanges": d.phalanges,
            })
        })
        .collect();
    json!({
        "hash": spec.content_hash(),
        "mass": spec.mass,
        "palm_length": spec.palm_length,
        "finger_length": spec.finger_length,
        "palm": spec.palm_pose,
        "digits": digits,
        "joints": joints,
        "toml": spec.to_toml_string(),
    })
}

pub fn grasps_view(library: &GraspLibrary) -> Value {
    Value::Array(
        library
            .presets()
            .iter()
            .map(|p| {
                json!({
                    "name": p.name,
                    "feix": p.feix,
                    "category": p.category,
                    "q": p.q.0.to_vec(),
                })
            })
            .collect(),
    )
}

/// Everything the control loop owns.
pub struct ControlLoop {
    pub pipeline: Pipeline<VirtualBus>,
    pub library: Arc<GraspLibrary>,
    /// When set, keypoints and commands are appended here.
    pub recording: Option<SessionRecord>,
}

pub struct LoopResult {
    pub summary: RunSummary,
    pub recording: Option<SessionRecord>,
}

fn apply(p: &mut Pipeline<VirtualBus>, library: &GraspLibrary, cmd: ConsoleCommand) -> CommandReply {
    let current = p.target().copied().unwrap_or_else(JointAngles::zeros);
    let q = match cmd {
        ConsoleCommand::Grasp { name } => match library.get(&name) {
            Some(g) => g.q,
            None => return CommandReply::err(format!("unknown grasp {name:?}")),
        },
        ConsoleCommand::Joints { q } => match q.len() {
            JointId::COUNT => JointAngles(q.try_into().expect("length checked")),
            JointId::ACTIVE_COUNT => JointAngles::from_active(&q.try_into().expect("length checked")),
            n => return CommandReply::err(format!("expected 20 or 15 angles, got {n}")),
        },
        ConsoleCommand::Joint { joint, value } => match joint.parse::<JointId>() {
            Ok(id) => {
                let mut q = current;
                let id = if id.slot == Slot::Dip { id.leader().unwrap_or(id) } else { id };
                q[id] = value;
                q
            }
            Err(e) => return CommandReply::err(e.to_string()),
        },
        ConsoleCommand::Release => JointAngles::zeros(),
        ConsoleCommand::ClearFault => {
            p.clear_fault();
            return CommandReply {
                ok: true,
                target: p.target().map(|q| q.0.to_vec()),
                error: None,
            };
        }
    };
    if q.0.iter().any(|v| !v.is_finite()) {
        return CommandReply::err("non-finite joint angle");
    }
    p.set_manual_target(&q);
    CommandReply {
        ok: true,
        target: p.target().map(|q| q.0.to_vec()),
        error: None,
    }
}

impl ControlLoop {
    async fn run(
        mut self,
        mut mailbox: Mailbox,
        mut commands: mpsc::Receiver<CommandRequest>,
        states: broadcast::Sender<Arc<str>>,
        mut stop: watch::Receiver<bool>,
    ) -> LoopResult {
        let dt = self.pipeline.config().dt();
        let mut interval = tokio::time::interval(Duration::from_secs_f64(dt));
        interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Skip);
        let start = Instant::now();
        let mut summary = RunSummary::default();
        loop {
            tokio::select! {
                _ = interval.tick() => {}
                _ = stop.changed() => break,
            }
            while let Ok((cmd, reply)) = commands.try_recv() {
                let _ = reply.send(apply(&mut self.pipeline, &self.library, cmd));
            }
            let now = start.elapsed().as_secs_f64();
            let frame = match mailbox.poll(now) {
                SourceEvent::Frame(f) => Some(f),
                SourceEvent::Idle => None,
                SourceEvent::Closed => break,
            };
            let out = self.pipeline.step(now, frame.as_ref());
            self.pipeline.client_mut().transport_mut().advance(dt);
            if let Some(rec) = &mut self.recording {
                if let Some(f) = &frame {
                    rec.entries.push(SessionEntry::Keypoints { t: now, frame: f.clone() });
                }
                if let Some(c) = &out.command {
                    rec.entries.push(SessionEntry::Command(CommandRecord::clone(c)));
                }
            }
            summary.ticks += 1;
            summary.commands += out.command.is_some() as u64;
            summary.frames_used += out.frame_used as u64;
            summary.frames_rejected += out.frame_rejected as u64;
            summary.stale_ticks += out.state.flags.stale as u64;
            if let Ok(text) = serde_json::to_string(&out.state) {
                // no subscribers is not an error
                let _ = states.send(Arc::from(text));
            }
        }
        summary.retries = self.pipeline.client().retries_used();
        summary.fault = self.pipeline.fault().map(str::to_owned);
        LoopResult {
            summary,
            recording: self.recording,
        }
    }
}

/// A bound, running server. Dropping it without [`Server::shutdown`]
/// leaves the tasks running until the runtime exits.
pub struct Server {
    pub addr: SocketAddr,
    stop: watch::Sender<bool>,
    control: tokio::task::JoinHandle<LoopResult>,
    http: tokio::task::JoinHandle<()>,
}

impl Server {
    pub async fn shutdown(self) -> LoopResult {
        let _ = self.stop.send(true);
        let result = self.control.await.expect("control loop panicked");
        self.http.abort();
        result
    }
}

pub async fn start(bind: SocketAddr, control: ControlLoop) -> std::io::Result<Server> {
    let listener = TcpListener::bind(bind).await?;
    let addr = listener.local_addr()?;
    let (states, _) = broadcast::channel(STATE_QUEUE);
    let (cmd_tx, cmd_rx) = mpsc::channel(64);
    let (stop_tx, stop_rx) = watch::channel(false);
    let mailbox = Mailbox::new();
    let app = AppState {
        spec_view: Arc::new(spec_view(control.pipeline.spec())),
        grasps_view: Arc::new(grasps_view(&control.library)),
        states: states.clone(),
        mailbox: mailbox.clone(),
        commands: cmd_tx,
    };
    let control = tokio::spawn(control.run(mailbox, cmd_rx, states, stop_rx));
    let router = router(app);
    let http = tokio::spawn(async move {
        let _ = axum::serve(listener, router).await;
    });
    Ok(Server {
        addr,
        stop: stop_tx,
        control,
        http,
    })
}

fn router(app: AppState) -> Router {
    Router::new()
        .route("/spec", get(get_spec))
        .route("/grasps", get(get_grasps))
        .route("/state", get(ws_state))
        .route("/keypoints", get(ws_keypoints))
        .route("/command", get(ws_command))
        .with_state(app)
}

async fn get_spec(State(app): State<AppState>) -> Json<Value> {
    Json(Value::clone(&app.spec_view))
}

async fn get_grasps(State(app): State<AppState>) -> Json<Value> {
    Json(Value::clone(&app.grasps_view))
}

async fn ws_state(ws: WebSocketUpgrade, State(app): State<AppState>) -> impl IntoResponse {
    let rx = app.states.subscribe();
    ws.on_upgrade(move |socket| stream_states(socket, rx))
}

async fn stream_states(mut socket: WebSocket, mut rx: broadcast::Receiver<Arc<str>>) {
    loop {
        tokio::select! {
            msg = rx.recv() => match msg {
                Ok(text) => {
                    if socket.send(Message::Text(text.as_ref().into())).await.is_err() {
                        return;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => return,
            },
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => {}
            },
        }
    }
}

async fn ws_keypoints(ws: WebSocketUpgrade, State(app): State<AppState>) -> impl IntoResponse {
    ws.on_upgrade(move |mut socket| async move {
        while let Some(Ok(msg)) = socket.recv().await {
            let Message::Text(text) = msg else { continue };
            match serde_json::from_str::<KeypointFrame>(text.as_str()) {
                Ok(frame) => app.mailbox.post(frame),
                Err(e) => {
                    let err = json!({ "error": "bad_frame", "message": e.to_string() }).to_string();
                    if socket.send(Message::Text(err.into())).await.is_err() {
                        return;
                    }
                }
            }
        }
    })
}

async fn ws_command(ws: WebSocketUpgrade, State(app): State<AppState>) -> impl IntoResponse {
    ws.on_upgrade(move |mut socket| async move {
        while let Some(Ok(msg)) = socket.recv().await {
            let Message::Text(text) = msg else { continue };
            let reply = match serde_json::from_str::<ConsoleCommand>(text.as_str()) {
                Ok(cmd) => {
                    let (tx, rx) = oneshot::channel();
                    if app.commands.send((cmd, tx)).await.is_err() {
                        CommandReply::err("control loop stopped")
                    } else {
                        rx.await.unwrap_or_else(|_| CommandReply::err("control loop stopped"))
                    }
                }
                Err(e) => CommandReply::err(e.to_string()),
            };
            let text = serde_json::to_string(&reply).expect("reply serializes");
            if socket.send(Message::Text(text.into())).await.is_err() {
                return;
            }
        }
    })
}

/// The router alone, over a detached control loop, for in-process tests.
pub fn test_router(spec: &HandSpec, library: &GraspLibrary) -> Router {
    let (states, _) = broadcast::channel(STATE_QUEUE);
    let (commands, _) = mpsc::channel(1);
    router(AppState {
        spec_view: Arc::new(spec_view(spec)),
        grasps_view: Arc::new(grasps_view(library)),
        states,
        mailbox: Mailbox::new(),
        commands,
    })
}
