use std::sync::{Arc, Mutex};
use std::time::Instant;

use super::session::CommandRecord;
use super::state::{StateFlags, StateMessage};
use crate::bus::{BusClient, StreamTransport, Transport, VirtualBus, VirtualSerial};
use crate::error::Result;
use crate::hand::{project_coupling, HandSpec, JointAngles, JointId};
use crate::retarget::{keypoints_to_angles, retarget, CalibrationProfile, Ema, KeypointFrame, MIN_CONFIDENCE};
use crate::tendon::{joint_to_motor, motor_to_joint, MotorId, SpoolAngles};

pub const DEFAULT_RATE_HZ: f64 = 30.0;
pub const STALE_AFTER_S: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub rate_hz: f64,
    pub stale_after: f64,
    pub bus_attempts: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            rate_hz: DEFAULT_RATE_HZ,
            stale_after: STALE_AFTER_S,
            bus_attempts: 3,
        }
    }
}

impl PipelineConfig {
    pub fn dt(&self) -> f64 {
        1.0 / self.rate_hz
    }
}

/// What a source hands the pipeline on one tick.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceEvent {
    Frame(KeypointFrame),
    Idle,
    Closed,
}

pub trait KeypointSource {
    /// Newest frame available at virtual time `now`, if any is new.
    fn poll(&mut self, now: f64) -> SourceEvent;
}

/// Replays recorded frames against the virtual clock. Frame times are
/// taken relative to the first frame; when several frames fall due in one
/// tick only the newest is delivered.
#[derive(Debug, Clone)]
pub struct RecordedSource {
    frames: Vec<KeypointFrame>,
    next: usize,
    t0: f64,
}

impl RecordedSource {
    pub fn new(frames: Vec<KeypointFrame>) -> Self {
        let t0 = frames.first().map_or(0.0, |f| f.t);
        RecordedSource { frames, next: 0, t0 }
    }

    /// Duration from the first to the last frame.
    pub fn duration(&self) -> f64 {
        self.frames.last().map_or(0.0, |f| f.t - self.t0)
    }
}

impl KeypointSource for RecordedSource {
    fn poll(&mut self, now: f64) -> SourceEvent {
        if self.next >= self.frames.len() {
            return SourceEvent::Closed;
        }
        let mut due = None;
        while self.next < self.frames.len() && self.frames[self.next].t - self.t0 <= now + 1e-9 {
            due = Some(self.next);
            self.next += 1;
        }
        match due {
            Some(i) => SourceEvent::Frame(self.frames[i].clone()),
            None => SourceEvent::Idle,
        }
    }
}

#[derive(Debug, Default)]
struct MailboxInner {
    latest: Option<KeypointFrame>,
    closed: bool,
    overwritten: u64,
}

/// Single-slot, latest-value-wins handoff from a producer thread.
#[derive(Debug, Clone, Default)]
pub struct Mailbox {
    inner: Arc<Mutex<MailboxInner>>,
}

impl Mailbox {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn post(&self, frame: KeypointFrame) {
        let mut g = self.inner.lock().expect("mailbox poisoned");
        if g.latest.replace(frame).is_some() {
            g.overwritten += 1;
        }
    }

    pub fn close(&self) {
        self.inner.lock().expect("mailbox poisoned").closed = true;
    }

    /// Frames replaced before the consumer took them.
    pub fn overwritten(&self) -> u64 {
        self.inner.lock().expect("mailbox poisoned").overwritten
    }
}

impl KeypointSource for Mailbox {
    fn poll(&mut self, _now: f64) -> SourceEvent {
        let mut g = self.inner.lock().expect("mailbox poisoned");
        match g.latest.take() {
            Some(f) => SourceEvent::Frame(f),
            None if g.closed => SourceEvent::Closed,
            None => SourceEvent::Idle,
        }
    }
}

/// Transports whose simulated time the run loop moves forward.
pub trait Clocked {
    fn advance(&mut self, dt: f64);
}

impl Clocked for VirtualBus {
    fn advance(&mut self, dt: f64) {
        VirtualBus::advance(self, dt)
    }
}

impl Clocked for VirtualSerial {
    fn advance(&mut self, dt: f64) {
        VirtualSerial::advance(self, dt)
    }
}

impl<S: Clocked + std::io::Read + std::io::Write> Clocked for StreamTransport<S> {
    fn advance(&mut self, dt: f64) {
        self.get_mut().advance(dt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Origin {
    Keypoints,
    Manual,
}

/// Result of one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct TickOutput {
    /// Goals written this tick; `None` before the first target or after a fault.
    pub command: Option<CommandRecord>,
    pub state: StateMessage,
    pub frame_used: bool,
    pub frame_rejected: bool,
}

/// The fixed-rate control loop: keypoints → operator angles → calibrated
/// and smoothed joint targets → spool goals on the bus.
#[derive(Debug)]
pub struct Pipeline<T> {
    spec: Arc<HandSpec>,
    profile: CalibrationProfile,
    cfg: PipelineConfig,
    client: BusClient<T>,
    ema: Ema,
    target: Option<JointAngles>,
    origin: Origin,
    last_input: Option<f64>,
    fault: Option<String>,
    clamped: Vec<String>,
    tick: u64,
    ids: Vec<u8>,
}

impl<T: Transport> Pipeline<T> {
    pub fn new(spec: Arc<HandSpec>, profile: CalibrationProfile, transport: T, cfg: PipelineConfig) -> Result<Self> {
        profile.validate()?;
        let ema = Ema::new(profile.ema_alpha);
        Ok(Pipeline {
            spec,
            profile,
            cfg,
            client: BusClient::new(transport).with_attempts(cfg.bus_attempts),
            ema,
            target: None,
            origin: Origin::Keypoints,
            last_input: None,
            fault: None,
            clamped: Vec::new(),
            tick: 0,
            ids: MotorId::all().map(|m| m.0).collect(),
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn spec(&self) -> &HandSpec {
        &self.spec
    }

    pub fn profile(&self) -> &CalibrationProfile {
        &self.profile
    }

    pub fn client(&self) -> &BusClient<T> {
        &self.client
    }

    pub fn client_mut(&mut self) -> &mut BusClient<T> {
        &mut self.client
    }

    pub fn target(&self) -> Option<&JointAngles> {
        self.target.as_ref()
    }

    pub fn fault(&self) -> Option<&str> {
        self.fault.as_deref()
    }

    pub fn clear_fault(&mut self) {
        self.fault = None;
    }

    pub fn ticks(&self) -> u64 {
        self.tick
    }

    /// Replaces the target directly, e.g. from a console slider or a grasp
    /// preset. The pose is coupled and clamped onto the joint limits. Such
    /// targets are held indefinitely and never go stale.
    pub fn set_manual_target(&mut self, q: &JointAngles) {
        let q = self.clamp(&project_coupling(q));
        self.target = Some(q);
        self.origin = Origin::Manual;
        self.ema.reset();
    }

    fn clamp(&mut self, q: &JointAngles) -> JointAngles {
        self.clamped.clear();
        let mut out = *q;
        for id in JointId::all() {
            let [lo, hi] = self.spec.limits(id);
            let v = q[id].clamp(lo, hi);
            if v != q[id] {
                self.clamped.push(id.to_string());
            }
            out[id] = v;
        }
        out
    }

    fn accept(&mut self, frame: &KeypointFrame) -> bool {
        if !(frame.confidence >= MIN_CONFIDENCE) || frame.validate().is_err() {
            return false;
        }
        let Ok(op) = keypoints_to_angles(frame) else { return false };
        let Ok(raw) = retarget(&self.profile, &op) else { return false };
        let smoothed = self.ema.update(&raw);
        let q = self.clamp(&project_coupling(&smoothed));
        self.target = Some(q);
        self.origin = Origin::Keypoints;
        true
    }

    fn is_stale(&self, now: f64) -> bool {
        self.origin == Origin::Keypoints
            && match self.last_input {
                Some(t) => now - t > self.cfg.stale_after + 1e-9,
                None => self.target.is_some(),
            }
    }

    fn goals(&self, q: &JointAngles) -> Result<SpoolAngles> {
        let mut s = joint_to_motor(&self.spec, q)?;
        for m in MotorId::all() {
            s.set(m, s.get(m) + self.profile.spool_offsets[m.slot()]);
        }
        Ok(s)
    }

    /// One tick at virtual time `now`, consuming at most one frame.
    pub fn step(&mut self, now: f64, frame: Option<&KeypointFrame>) -> TickOutput {
        let started = Instant::now();
        let tick = self.tick;
        self.tick += 1;
        let mut state = StateMessage::idle(tick, now);

        let (mut used, mut rejected) = (false, false);
        if let Some(f) = frame {
            if self.fault.is_none() && self.accept(f) {
                used = true;
                self.last_input = Some(now);
            } else {
                rejected = self.fault.is_none();
            }
        }
        let stale = self.is_stale(now);

        let mut command = None;
        if self.fault.is_none() {
            if let Some(q) = self.target {
                match self.goals(&q) {
                    Ok(g) => {
                        let pairs: Vec<(u8, f64)> = MotorId::all().map(|m| (m.0, g.get(m))).collect();
                        match self.client.sync_write_goals(&pairs) {
                            Ok(()) => {
                                command = Some(CommandRecord {
                                    tick,
                                    t: now,
                                    targets: q.active().to_vec(),
                                    goals: g.0.to_vec(),
                                    stale,
                                })
                            }
                            Err(e) => self.fault = Some(format!("goal write failed: {e}")),
                        }
                    }
                    Err(e) => self.fault = Some(format!("goal mapping failed: {e}")),
                }
            }
        }

        if self.fault.is_none() {
            match self.client.sync_read_state(&self.ids) {
                Ok(readings) => {
                    let mut spools = SpoolAngles::default();
                    for r in &readings {
                        let m = MotorId(r.id);
                        spools.set(m, r.position - self.profile.spool_offsets[m.slot()]);
                        state.motor_positions[m.slot()] = r.position;
                        state.currents_ma[m.slot()] = r.current_ma;
                    }
                    let back = motor_to_joint(&self.spec, &spools);
                    state.q = back.q.0.to_vec();
                }
                Err(e) => self.fault = Some(format!("state read failed: {e}")),
            }
        }

        if let Some(q) = &self.target {
            state.target = q.0.to_vec();
        }
        let limit = crate::bus::MotorParams::default().current_limit_ma;
        state.flags = StateFlags {
            stale,
            fault: self.fault.clone(),
            clamped: if used { self.clamped.clone() } else { Vec::new() },
            overload: (0..MotorId::COUNT)
                .filter(|&i| state.currents_ma[i].abs() >= limit - 0.5)
                .map(|i| i as u8 + 1)
                .collect(),
        };
        state.latency_ms = started.elapsed().as_secs_f64() * 1e3;
        TickOutput {
            command,
            state,
            frame_used: used,
            frame_rejected: rejected,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunSummary {
    pub ticks: u64,
    pub commands: u64,
    pub frames_used: u64,
    pub frames_rejected: u64,
    pub stale_ticks: u64,
    pub retries: u64,
    pub fault: Option<String>,
}

/// Drives `pipeline` from `source` on a virtual clock until the source
/// closes or `max_ticks` elapse. The transport is advanced by one period
/// after every tick.
pub fn run_pipeline<T, S>(
    pipeline: &mut Pipeline<T>,
    source: &mut S,
    max_ticks: Option<u64>,
    mut observe: impl FnMut(&TickOutput, Option<&KeypointFrame>),
) -> RunSummary
where
    T: Transport + Clocked,
    S: KeypointSource + ?Sized,
{
    let dt = pipeline.cfg.dt();
    let mut sum = RunSummary::default();
    let mut k: u64 = 0;
    while max_ticks.map_or(true, |m| k < m) {
        let now = k as f64 * dt;
        let frame = match source.poll(now) {
            SourceEvent::Closed => break,
            SourceEvent::Idle => None,
            SourceEvent::Frame(f) => Some(f),
        };
        let out = pipeline.step(now, frame.as_ref());
        pipeline.client.transport_mut().advance(dt);
        sum.ticks += 1;
        sum.commands += out.command.is_some() as u64;
        sum.frames_used += out.frame_used as u64;
        sum.frames_rejected += out.frame_rejected as u64;
        sum.stale_ticks += out.state.flags.stale as u64;
        observe(&out, frame.as_ref());
        k += 1;
    }
    sum.retries = pipeline.client.retries_used();
    sum.fault = pipeline.fault.clone();
    sum
}
