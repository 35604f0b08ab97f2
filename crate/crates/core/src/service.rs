//! Live simulation over a web socket.
//!
//! One driver thread owns the [`Simulation`]; it applies queued operator
//! commands between ticks, advances at a wall-clock rate and publishes
//! encoded frames. Each connected client gets the latest frame on join and
//! then every broadcast frame; commands it sends are validated against the
//! latest frame and queued for the driver.
//!
//! Messages are JSON envelopes `{"type": "frame" | "command" | "error", "payload": {...}}`.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use tokio::sync::{broadcast, mpsc, watch};

use crate::bonding::BondGraph;
use crate::engine::{Command, CommandKind, Simulation};
use crate::geom::{Bounds, Vec2};
use crate::metrics::MetricsFrame;
use crate::scenario::{Scenario, WorldSize};
use crate::world::{InitError, WorldState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotView {
    pub id: usize,
    pub species: String,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub is_anchor: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeciesView {
    pub name: String,
    pub color: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFrame {
    /// Publication counter, strictly increasing per server.
    pub seq: u64,
    pub tick: u64,
    pub world: WorldSize,
    pub species: Vec<SpeciesView>,
    pub robots: Vec<RobotView>,
    pub bonds: Vec<[usize; 2]>,
    pub metrics: MetricsFrame,
    pub paused: bool,
}

impl StateFrame {
    pub fn project(
        seq: u64,
        world: &WorldState,
        graph: &BondGraph,
        metrics: &MetricsFrame,
        scenario: &Scenario,
        paused: bool,
    ) -> Self {
        Self {
            seq,
            tick: world.tick,
            world: WorldSize {
                width: world.bounds.width,
                height: world.bounds.height,
            },
            species: scenario
                .species
                .iter()
                .map(|s| SpeciesView {
                    name: s.name.clone(),
                    color: s.color.clone(),
                })
                .collect(),
            robots: world
                .robots
                .iter()
                .map(|r| RobotView {
                    id: r.id,
                    species: scenario.species[r.species].name.clone(),
                    x: r.pose.x,
                    y: r.pose.y,
                    vx: r.velocity.x,
                    vy: r.velocity.y,
                    is_anchor: r.is_anchor,
                })
                .collect(),
            bonds: graph.edges.iter().map(|&(a, b)| [a, b]).collect(),
            metrics: metrics.clone(),
            paused,
        }
    }

    /// Context for validating operator commands against this frame.
    pub fn command_context(&self) -> CommandContext {
        CommandContext {
            bounds: Bounds::new(self.world.width, self.world.height),
            robot_count: self.robots.len(),
            anchors: self.robots.iter().filter(|r| r.is_anchor).map(|r| r.id).collect(),
            species: self.species.iter().map(|s| s.name.clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorPayload {
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "snake_case")]
pub enum Envelope {
    Frame(StateFrame),
    Command(Command),
    Error(ErrorPayload),
}

impl Envelope {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("envelope serializes")
    }
}

pub fn encode_frame(frame: &StateFrame) -> Vec<u8> {
    Envelope::Frame(frame.clone()).to_json().into_bytes()
}

pub fn decode_frame(bytes: &[u8]) -> Result<StateFrame, serde_json::Error> {
    match serde_json::from_slice::<Envelope>(bytes)? {
        Envelope::Frame(f) => Ok(f),
        _ => Err(serde::de::Error::custom("not a frame message")),
    }
}

/// What a command is checked against: the latest published state.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandContext {
    pub bounds: Bounds,
    pub robot_count: usize,
    pub anchors: BTreeSet<usize>,
    pub species: Vec<String>,
}

impl CommandContext {
    pub fn from_world(world: &WorldState, scenario: &Scenario) -> Self {
        Self {
            bounds: world.bounds,
            robot_count: world.len(),
            anchors: world.anchor_ids().collect(),
            species: scenario.species.iter().map(|s| s.name.clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{message}")]
pub struct Rejection {
    pub field: Option<String>,
    pub message: String,
}

impl Rejection {
    fn new(field: Option<&str>, message: impl Into<String>) -> Self {
        Self {
            field: field.map(str::to_string),
            message: message.into(),
        }
    }

    pub fn to_envelope(&self) -> Envelope {
        Envelope::Error(ErrorPayload {
            message: self.message.clone(),
            field: self.field.clone(),
        })
    }
}

const COMMAND_KINDS: [&str; 7] = [
    "move_anchor",
    "add_anchor",
    "remove_anchor",
    "pause",
    "resume",
    "reset",
    "set_tick_rate",
];

/// Decodes an operator command, either bare (`{"kind": ...}`) or wrapped in a
/// `command` envelope, and checks it against `ctx`.
pub fn decode_command(bytes: &[u8], ctx: &CommandContext) -> Result<CommandKind, Rejection> {
    let value: Value =
        serde_json::from_slice(bytes).map_err(|e| Rejection::new(None, format!("malformed message: {e}")))?;
    let payload = match value.get("type").and_then(Value::as_str) {
        Some("command") => value
            .get("payload")
            .cloned()
            .ok_or_else(|| Rejection::new(Some("payload"), "missing payload"))?,
        Some(other) => return Err(Rejection::new(Some("type"), format!("unexpected message type {other}"))),
        None => value,
    };
    let kind = payload
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| Rejection::new(Some("kind"), "missing kind"))?;
    if !COMMAND_KINDS.contains(&kind) {
        return Err(Rejection::new(Some("kind"), format!("unknown kind: {kind}")));
    }
    check_fields(kind, &payload)?;
    let cmd: Command = serde_json::from_value(payload).map_err(|e| Rejection::new(None, format!("invalid command: {e}")))?;
    let cmd = cmd.kind;

    let check_pose = |x: f64, y: f64| {
        if x.is_finite() && y.is_finite() && ctx.bounds.contains(Vec2::new(x, y)) {
            Ok(())
        } else {
            Err(Rejection::new(Some("x"), format!("coordinates ({x}, {y}) outside bounds")))
        }
    };
    let check_anchor = |id: usize| {
        if id >= ctx.robot_count {
            Err(Rejection::new(Some("id"), format!("no such anchor: {id}")))
        } else if !ctx.anchors.contains(&id) {
            Err(Rejection::new(Some("id"), format!("robot {id} is not an anchor")))
        } else {
            Ok(())
        }
    };
    match &cmd {
        CommandKind::MoveAnchor { id, x, y } => {
            check_anchor(*id)?;
            check_pose(*x, *y)?;
        }
        CommandKind::AddAnchor { species, x, y } => {
            if !ctx.species.contains(species) {
                return Err(Rejection::new(Some("species"), format!("unknown species {species}")));
            }
            check_pose(*x, *y)?;
        }
        CommandKind::RemoveAnchor { id } => check_anchor(*id)?,
        CommandKind::SetTickRate { hz } if !(hz.is_finite() && *hz > 0.0) => {
            return Err(Rejection::new(Some("hz"), "tick rate must be > 0"));
        }
        _ => {}
    }
    Ok(cmd)
}

enum FieldType {
    Id,
    Number,
    Text,
}

fn command_fields(kind: &str) -> &'static [(&'static str, FieldType)] {
    use FieldType::*;
    match kind {
        "move_anchor" => &[("id", Id), ("x", Number), ("y", Number)],
        "add_anchor" => &[("species", Text), ("x", Number), ("y", Number)],
        "remove_anchor" => &[("id", Id)],
        "reset" => &[("seed", Id)],
        "set_tick_rate" => &[("hz", Number)],
        _ => &[],
    }
}

/// Names the first missing or mistyped field of a command payload.
fn check_fields(kind: &str, payload: &Value) -> Result<(), Rejection> {
    let fields = command_fields(kind);
    for (name, ty) in fields {
        let v = payload.get(*name);
        let ok = match (ty, v) {
            (_, None) => return Err(Rejection::new(Some(name), format!("missing field `{name}`"))),
            (FieldType::Id, Some(v)) => v.is_u64(),
            (FieldType::Number, Some(v)) => v.is_number(),
            (FieldType::Text, Some(v)) => v.is_string(),
        };
        if !ok {
            let expected = match ty {
                FieldType::Id => "a non-negative integer",
                FieldType::Number => "a number",
                FieldType::Text => "a string",
            };
            return Err(Rejection::new(Some(name), format!("field `{name}` must be {expected}")));
        }
    }
    if let Some(obj) = payload.as_object() {
        for key in obj.keys() {
            if key != "kind" && key != "issue_tick" && !fields.iter().any(|(n, _)| n == key) {
                return Err(Rejection::new(Some(key), format!("unknown field `{key}`")));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub scenario: Scenario,
    pub seed: u64,
    pub addr: SocketAddr,
    pub tick_rate_hz: f64,
    /// Broadcast one frame every this many ticks.
    pub frame_stride: u64,
    /// Where to append applied commands with their ticks, for offline replay.
    pub session_log: Option<PathBuf>,
}

impl ServeConfig {
    pub fn new(scenario: Scenario, addr: SocketAddr) -> Self {
        let seed = scenario.rng_seed;
        Self {
            scenario,
            seed,
            addr,
            tick_rate_hz: 30.0,
            frame_stride: 3,
            session_log: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Init(#[from] InitError),
    #[error("session log: {0}")]
    SessionLog(#[source] std::io::Error),
    #[error("server: {0}")]
    Io(#[from] std::io::Error),
}

type FrameText = Arc<str>;

#[derive(Clone)]
struct Shared {
    commands: mpsc::UnboundedSender<CommandKind>,
    frames: broadcast::Sender<(u64, FrameText)>,
    latest: watch::Receiver<Option<(u64, FrameText, CommandContext)>>,
}

/// Handle to a running server; dropping it does not stop the server.
pub struct ServerHandle {
    pub local_addr: SocketAddr,
    stop: Arc<AtomicBool>,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    driver: Option<std::thread::JoinHandle<()>>,
    server: tokio::task::JoinHandle<std::io::Result<()>>,
}

impl ServerHandle {
    pub async fn shutdown(mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        let _ = (&mut self.server).await;
        if let Some(d) = self.driver.take() {
            let _ = tokio::task::spawn_blocking(move || d.join()).await;
        }
    }

    /// Waits until the server stops.
    pub async fn wait(mut self) -> Result<(), ServeError> {
        let r = (&mut self.server).await;
        self.stop.store(true, Ordering::SeqCst);
        match r {
            Ok(r) => r.map_err(ServeError::Io),
            Err(e) => Err(ServeError::Io(std::io::Error::other(e))),
        }
    }
}

/// Binds the socket, starts the simulation driver and serves `/ws`.
pub async fn spawn_server(config: ServeConfig) -> Result<ServerHandle, ServeError> {
    let listener = tokio::net::TcpListener::bind(config.addr)
        .await
        .map_err(|source| ServeError::Bind {
            addr: config.addr,
            source,
        })?;
    let local_addr = listener.local_addr()?;

    let mut sim = Simulation::new(config.scenario.clone(), config.seed)?;
    sim.set_tick_rate(config.tick_rate_hz);
    let log = match &config.session_log {
        Some(p) => Some(BufWriter::new(File::create(p).map_err(ServeError::SessionLog)?)),
        None => None,
    };

    let (cmd_tx, cmd_rx) = mpsc::unbounded_channel();
    let (frame_tx, _) = broadcast::channel(64);
    let (latest_tx, latest_rx) = watch::channel(None);
    let stop = Arc::new(AtomicBool::new(false));

    let driver = {
        let frame_tx = frame_tx.clone();
        let stop = stop.clone();
        let stride = config.frame_stride.max(1);
        std::thread::Builder::new()
            .name("grfswarm-driver".into())
            .spawn(move || drive(sim, cmd_rx, frame_tx, latest_tx, stop, stride, log))?
    };

    let shared = Shared {
        commands: cmd_tx,
        frames: frame_tx,
        latest: latest_rx,
    };
    let app = Router::new().route("/ws", get(ws_handler)).with_state(shared);
    let (shutdown_tx, shutdown_rx) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = shutdown_rx.await;
            })
            .await
    });
    log::info!("serving on ws://{local_addr}/ws");
    Ok(ServerHandle {
        local_addr,
        stop,
        shutdown: Some(shutdown_tx),
        driver: Some(driver),
        server,
    })
}

/// Runs the server until it fails.
pub async fn serve_loop(config: ServeConfig) -> Result<(), ServeError> {
    spawn_server(config).await?.wait().await
}

fn publish(
    sim: &Simulation,
    seq: u64,
    frames: &broadcast::Sender<(u64, FrameText)>,
    latest: &watch::Sender<Option<(u64, FrameText, CommandContext)>>,
) {
    let graph = sim.graph();
    let metrics = MetricsFrame::compute(sim.world(), &graph, sim.scenario());
    let frame = StateFrame::project(seq, sim.world(), &graph, &metrics, sim.scenario(), sim.is_paused());
    let text: FrameText = Envelope::Frame(frame).to_json().into();
    let ctx = CommandContext::from_world(sim.world(), sim.scenario());
    latest.send_replace(Some((seq, text.clone(), ctx)));
    // No receivers is fine: the simulation runs regardless of clients.
    let _ = frames.send((seq, text));
}

fn drive(
    mut sim: Simulation,
    mut commands: mpsc::UnboundedReceiver<CommandKind>,
    frames: broadcast::Sender<(u64, FrameText)>,
    latest: watch::Sender<Option<(u64, FrameText, CommandContext)>>,
    stop: Arc<AtomicBool>,
    stride: u64,
    mut log: Option<BufWriter<File>>,
) {
    let mut seq = 0u64;
    publish(&sim, seq, &frames, &latest);
    let mut since_frame = 0u64;
    let mut next_deadline = Instant::now();
    while !stop.load(Ordering::SeqCst) {
        let mut changed = false;
        while let Ok(cmd) = commands.try_recv() {
            let tick = sim.world().tick;
            match sim.apply(&cmd) {
                Ok(()) => {
                    changed = true;
                    if let Some(w) = log.as_mut() {
                        let rec = Command::new(cmd.clone(), tick);
                        let line = serde_json::to_string(&rec).expect("command serializes");
                        if let Err(e) = writeln!(w, "{line}").and_then(|_| w.flush()) {
                            log::error!("session log write failed: {e}");
                        }
                    }
                }
                Err(e) => log::warn!("command {cmd:?} rejected: {e}"),
            }
        }
        if !sim.is_paused() {
            sim.step();
            since_frame += 1;
        }
        if changed || since_frame >= stride {
            seq += 1;
            publish(&sim, seq, &frames, &latest);
            since_frame = 0;
        }
        let period = Duration::from_secs_f64(1.0 / sim.tick_rate_hz().max(1e-3));
        next_deadline += period;
        let now = Instant::now();
        if next_deadline > now {
            std::thread::sleep(next_deadline - now);
        } else {
            next_deadline = now;
        }
    }
}

async fn ws_handler(ws: WebSocketUpgrade, State(shared): State<Shared>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| client_session(socket, shared))
}

async fn client_session(socket: WebSocket, shared: Shared) {
    let (mut tx, mut rx) = socket.split();
    let mut frames = shared.frames.subscribe();
    let mut last_seq = None;

    let initial = shared.latest.borrow().as_ref().map(|(s, t, _)| (*s, t.clone()));
    if let Some((seq, text)) = initial {
        if tx.send(Message::Text(text.as_ref().into())).await.is_err() {
            return;
        }
        last_seq = Some(seq);
    }

    loop {
        tokio::select! {
            frame = frames.recv() => match frame {
                Ok((seq, text)) => {
                    if last_seq.is_some_and(|l| seq <= l) {
                        continue;
                    }
                    if tx.send(Message::Text(text.as_ref().into())).await.is_err() {
                        break;
                    }
                    last_seq = Some(seq);
                }
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    log::debug!("client lagged by {n} frames");
                }
                Err(broadcast::error::RecvError::Closed) => break,
            },
            msg = rx.next() => match msg {
                Some(Ok(Message::Text(text))) => {
                    let ctx = shared.latest.borrow().as_ref().map(|(_, _, c)| c.clone());
                    let Some(ctx) = ctx else { continue };
                    match decode_command(text.as_bytes(), &ctx) {
                        Ok(cmd) => {
                            if shared.commands.send(cmd).is_err() {
                                break;
                            }
                        }
                        Err(rej) => {
                            let reply = rej.to_envelope().to_json();
                            if tx.send(Message::Text(reply.into())).await.is_err() {
                                break;
                            }
                        }
                    }
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {}
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::presets;

    fn ctx() -> CommandContext {
        let s = presets::bridge();
        let w = crate::world::init_world(&s, 1).unwrap();
        CommandContext::from_world(&w, &s)
    }

    #[test]
    fn decodes_move_anchor() {
        let c = ctx();
        let id = *c.anchors.iter().next().unwrap();
        let msg = format!(r#"{{"kind":"move_anchor","id":{id},"x":1.0,"y":2.0}}"#);
        assert_eq!(
            decode_command(msg.as_bytes(), &c).unwrap(),
            CommandKind::MoveAnchor { id, x: 1.0, y: 2.0 }
        );
        let wrapped = format!(r#"{{"type":"command","payload":{msg}}}"#);
        assert!(decode_command(wrapped.as_bytes(), &c).is_ok());
    }

    #[test]
    fn rejects_unknown_kind_and_non_anchor() {
        let c = ctx();
        let r = decode_command(br#"{"kind":"warp"}"#, &c).unwrap_err();
        assert!(r.message.contains("unknown kind"));
        let r = decode_command(br#"{"kind":"move_anchor","id":0,"x":1.0,"y":1.0}"#, &c).unwrap_err();
        assert!(r.message.contains("not an anchor"));
        let id = *c.anchors.iter().next().unwrap();
        let out = format!(r#"{{"kind":"move_anchor","id":{id},"x":-3.0,"y":1.0}}"#);
        assert!(decode_command(out.as_bytes(), &c).unwrap_err().message.contains("outside bounds"));
        let r = decode_command(br#"{"kind":"move_anchor","id":"a","x":1.0,"y":1.0}"#, &c).unwrap_err();
        assert_eq!(r.field.as_deref(), Some("id"));
        assert!(decode_command(b"not json", &c).is_err());
    }
}
