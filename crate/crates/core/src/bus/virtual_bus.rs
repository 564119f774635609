use std::collections::{BTreeMap, VecDeque};
use std::io::{self, Read, Write};
use std::sync::mpsc::{channel, Receiver, Sender};

use serde::{Deserialize, Serialize};

use super::frame::{encode_frame, BusFrame, Instruction, BROADCAST_ID};
use super::parser::StreamParser;
use super::registers::{Access, Register, RegisterInfo, RegisterMap};
use super::units::{rad_to_ticks, ticks_to_rad};

pub const MODEL_NUMBER: u16 = 1200;
pub const FIRMWARE_VERSION: u8 = 46;

/// Device error codes carried in the first byte of a status frame.
pub mod status_code {
    pub const OK: u8 = 0x00;
    pub const INSTRUCTION: u8 = 0x02;
    pub const DATA_LENGTH: u8 = 0x05;
    pub const ACCESS: u8 = 0x07;
}

/// Electrical and thermal constants of a simulated servo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotorParams {
    /// Stall torque per amp, N·m/A.
    pub torque_constant: f64,
    pub current_limit_ma: f64,
    /// Slew rate toward the goal, rad/s.
    pub max_velocity: f64,
    /// Thermal time constant, s.
    pub thermal_tau: f64,
    /// Fractional loss of torque constant at thermal state 1.
    pub thermal_derating: f64,
    /// Steady-state thermal state per mA of current.
    pub heat_per_ma: f64,
}

impl Default for MotorParams {
    fn default() -> Self {
        MotorParams {
            torque_constant: 0.52 / 1.47,
            current_limit_ma: 600.0,
            max_velocity: 10.0,
            thermal_tau: 300.0,
            thermal_derating: 0.3,
            heat_per_ma: 1.0 / 600.0,
        }
    }
}

impl MotorParams {
    /// Current a constant `load` settles at once heating has equilibrated.
    /// `None` when the derating would push the draw past the clamp or the
    /// equilibrium does not exist.
    pub fn plateau_current_ma(&self, load: f64) -> Option<f64> {
        let i0 = load.abs() / self.torque_constant * 1000.0;
        let k = self.thermal_derating * self.heat_per_ma;
        let i = if k == 0.0 {
            i0
        } else {
            let disc = 1.0 - 4.0 * k * i0;
            if disc < 0.0 {
                return None;
            }
            (1.0 - disc.sqrt()) / (2.0 * k)
        };
        (i <= self.current_limit_ma).then_some(i)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirtualMotor {
    pub id: u8,
    pub params: MotorParams,
    pub torque_enabled: bool,
    pub goal_position: f64,
    pub present_position: f64,
    pub present_current: f64,
    pub current_limit: f64,
    /// Relative winding temperature, 0 at ambient.
    pub thermal_state: f64,
    /// Torque the motor must supply to hold its position, N·m.
    pub load_torque: f64,
}

impl VirtualMotor {
    pub fn new(id: u8, params: MotorParams) -> Self {
        VirtualMotor {
            id,
            params,
            torque_enabled: true,
            goal_position: 0.0,
            present_position: 0.0,
            present_current: 0.0,
            current_limit: params.current_limit_ma,
            thermal_state: 0.0,
            load_torque: 0.0,
        }
    }

    /// Torque available per amp at the current winding temperature.
    pub fn effective_torque_constant(&self) -> f64 {
        self.params.torque_constant * (1.0 - self.params.thermal_derating * self.thermal_state)
    }

    /// Current needed to hold `load_torque` right now, before clamping.
    pub fn required_current(&self) -> f64 {
        self.load_torque / self.effective_torque_constant() * 1000.0
    }

    pub fn is_saturated(&self) -> bool {
        self.torque_enabled && self.required_current().abs() > self.current_limit
    }

    pub fn advance(&mut self, dt: f64) {
        assert!(dt > 0.0, "time step must be positive");
        if !self.torque_enabled {
            self.present_current = 0.0;
        } else {
            let required = self.required_current();
            let limit = self.current_limit;
            self.present_current = required.clamp(-limit, limit);
            if required.abs() > limit {
                // the load wins and drags the spool backwards
                let sag = self.params.max_velocity * (1.0 - limit / required.abs());
                self.present_position -= required.signum() * sag * dt;
            } else {
                let err = self.goal_position - self.present_position;
                let max = self.params.max_velocity * dt;
                self.present_position += err.clamp(-max, max);
            }
        }
        let target = self.params.heat_per_ma * self.present_current.abs();
        let decay = (-dt / self.params.thermal_tau).exp();
        self.thermal_state = target + (self.thermal_state - target) * decay;
    }

    pub fn temperature_c(&self) -> f64 {
        25.0 + 40.0 * self.thermal_state
    }

    fn read(&self, r: Register) -> i64 {
        match r {
            Register::CurrentLimit => self.current_limit.round() as i64,
            Register::TorqueEnable => self.torque_enabled as i64,
            Register::GoalPosition => rad_to_ticks(self.goal_position) as i64,
            Register::PresentCurrent => self.present_current.round() as i64,
            Register::PresentPosition => rad_to_ticks(self.present_position) as i64,
            Register::PresentTemperature => self.temperature_c().round().clamp(0.0, 255.0) as i64,
        }
    }

    fn write(&mut self, r: Register, value: i64) {
        match r {
            Register::CurrentLimit => {
                self.current_limit = (value as f64).clamp(0.0, self.params.current_limit_ma)
            }
            Register::TorqueEnable => self.torque_enabled = value != 0,
            Register::GoalPosition => self.goal_position = ticks_to_rad(value as i32),
            Register::PresentCurrent | Register::PresentPosition | Register::PresentTemperature => {}
        }
    }
}

/// Work submitted to a [`VirtualBus`] from other threads.
#[derive(Debug)]
pub enum BusCommand {
    Frame {
        frame: BusFrame,
        reply: Option<Sender<Vec<BusFrame>>>,
    },
    SetLoad {
        id: u8,
        torque: f64,
    },
}

/// A bus of simulated servos, advanced by explicit [`VirtualBus::step`]
/// calls. Other threads reach it through the command queue.
#[derive(Debug)]
pub struct VirtualBus {
    motors: BTreeMap<u8, VirtualMotor>,
    map: RegisterMap,
    time: f64,
    rejected: u64,
    tx: Sender<BusCommand>,
    rx: Receiver<BusCommand>,
}

impl VirtualBus {
    pub fn new(ids: impl IntoIterator<Item = u8>, params: MotorParams) -> Self {
        let (tx, rx) = channel();
        VirtualBus {
            motors: ids.into_iter().map(|id| (id, VirtualMotor::new(id, params))).collect(),
            map: RegisterMap::default(),
            time: 0.0,
            rejected: 0,
            tx,
            rx,
        }
    }

    /// Fifteen motors with ids 1..=15.
    pub fn for_hand(params: MotorParams) -> Self {
        VirtualBus::new(1..=15, params)
    }

    pub fn with_register_map(mut self, map: RegisterMap) -> Self {
        self.map = map;
        self
    }

    pub fn register_map(&self) -> &RegisterMap {
        &self.map
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Sync writes that named an unknown register and therefore had no
    /// status frame to report the failure in.
    pub fn rejected_writes(&self) -> u64 {
        self.rejected
    }

    pub fn motor(&self, id: u8) -> Option<&VirtualMotor> {
        self.motors.get(&id)
    }

    pub fn motor_mut(&mut self, id: u8) -> Option<&mut VirtualMotor> {
        self.motors.get_mut(&id)
    }

    pub fn motors(&self) -> impl Iterator<Item = &VirtualMotor> {
        self.motors.values()
    }

    pub fn set_load(&mut self, id: u8, torque: f64) {
        if let Some(m) = self.motors.get_mut(&id) {
            m.load_torque = torque;
        }
    }

    /// Sender half of the command queue.
    pub fn queue(&self) -> Sender<BusCommand> {
        self.tx.clone()
    }

    /// Handles every queued command, in submission order.
    pub fn drain_queue(&mut self) -> usize {
        let mut n = 0;
        while let Ok(cmd) = self.rx.try_recv() {
            n += 1;
            match cmd {
                BusCommand::Frame { frame, reply } => {
                    let out = self.handle(&frame);
                    if let Some(tx) = reply {
                        let _ = tx.send(out);
                    }
                }
                BusCommand::SetLoad { id, torque } => self.set_load(id, torque),
            }
        }
        n
    }

    /// Applies inbound frames, then advances every motor by `dt`.
    pub fn step(&mut self, inbound: &[BusFrame], dt: f64) -> Vec<BusFrame> {
        let out = inbound.iter().flat_map(|f| self.handle(f)).collect();
        self.advance(dt);
        out
    }

    pub fn advance(&mut self, dt: f64) {
        assert!(dt > 0.0, "time step must be positive");
        for m in self.motors.values_mut() {
            m.advance(dt);
        }
        self.time += dt;
    }

    /// Status frames produced in reply to `frame`.
    pub fn handle(&mut self, frame: &BusFrame) -> Vec<BusFrame> {
        let p = &frame.params;
        let broadcast = frame.id == BROADCAST_ID;
        match frame.instruction {
            Instruction::Status => Vec::new(),
            Instruction::Ping => {
                let [lo, hi] = MODEL_NUMBER.to_le_bytes();
                let ids: Vec<u8> = if broadcast {
                    self.motors.keys().copied().collect()
                } else if self.motors.contains_key(&frame.id) {
                    vec![frame.id]
                } else {
                    Vec::new()
                };
                ids.into_iter()
                    .map(|id| BusFrame::status(id, status_code::OK, &[lo, hi, FIRMWARE_VERSION]))
                    .collect()
            }
            Instruction::Read => {
                if broadcast || !self.motors.contains_key(&frame.id) {
                    return Vec::new();
                }
                if p.len() != 4 {
                    return vec![BusFrame::status(frame.id, status_code::DATA_LENGTH, &[])];
                }
                let (addr, len) = (u16_at(p, 0), u16_at(p, 2));
                vec![self.read_status(frame.id, addr, len)]
            }
            Instruction::Write => {
                if p.len() < 3 {
                    return self.reply_unless_broadcast(frame.id, status_code::DATA_LENGTH);
                }
                let addr = u16_at(p, 0);
                let targets: Vec<u8> = if broadcast {
                    self.motors.keys().copied().collect()
                } else if self.motors.contains_key(&frame.id) {
                    vec![frame.id]
                } else {
                    return Vec::new();
                };
                let mut code = status_code::OK;
                for id in targets {
                    code = self.write_block(id, addr, &p[2..]);
                }
                self.reply_unless_broadcast(frame.id, code)
            }
            Instruction::SyncRead => {
                if !broadcast || p.len() < 4 {
                    return Vec::new();
                }
                let (addr, len) = (u16_at(p, 0), u16_at(p, 2));
                p[4..]
                    .iter()
                    .filter(|id| self.motors.contains_key(id))
                    .map(|&id| self.read_status(id, addr, len))
                    .collect()
            }
            Instruction::SyncWrite => {
                if !broadcast || p.len() < 4 {
                    self.rejected += 1;
                    return Vec::new();
                }
                let (addr, len) = (u16_at(p, 0), u16_at(p, 2) as usize);
                let body = &p[4..];
                if len == 0 || body.len() % (len + 1) != 0 {
                    self.rejected += 1;
                    return Vec::new();
                }
                for chunk in body.chunks(len + 1) {
                    if self.motors.contains_key(&chunk[0])
                        && self.write_block(chunk[0], addr, &chunk[1..]) != status_code::OK
                    {
                        self.rejected += 1;
                    }
                }
                Vec::new()
            }
        }
    }

    fn reply_unless_broadcast(&self, id: u8, code: u8) -> Vec<BusFrame> {
        if id == BROADCAST_ID {
            Vec::new()
        } else {
            vec![BusFrame::status(id, code, &[])]
        }
    }

    fn read_status(&self, id: u8, addr: u16, len: u16) -> BusFrame {
        let Some(span) = self.map.span(addr, len) else {
            return BusFrame::status(id, status_code::ACCESS, &[]);
        };
        let motor = &self.motors[&id];
        let mut data = vec![0u8; len as usize];
        for info in span {
            let off = (info.address - addr) as usize;
            put_le(&mut data[off..off + info.width as usize], motor.read(info.register));
        }
        BusFrame::status(id, status_code::OK, &data)
    }

    fn write_block(&mut self, id: u8, addr: u16, data: &[u8]) -> u8 {
        let Some(span) = self.map.span(addr, data.len() as u16) else {
            return status_code::ACCESS;
        };
        if span.iter().any(|i| i.access == Access::ReadOnly) {
            return status_code::ACCESS;
        }
        let motor = self.motors.get_mut(&id).expect("caller checked the id");
        for info in span {
            let off = (info.address - addr) as usize;
            motor.write(info.register, get_le(&data[off..off + info.width as usize]));
        }
        status_code::OK
    }
}

fn u16_at(p: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([p[at], p[at + 1]])
}

/// Writes the low `out.len()` bytes of `value`, little-endian.
pub(crate) fn put_le(out: &mut [u8], value: i64) {
    let bytes = value.to_le_bytes();
    out.copy_from_slice(&bytes[..out.len()]);
}

/// Sign-extending little-endian read of a 1, 2 or 4 byte field.
pub(crate) fn get_le(bytes: &[u8]) -> i64 {
    match bytes.len() {
        1 => bytes[0] as i8 as i64,
        2 => i16::from_le_bytes([bytes[0], bytes[1]]) as i64,
        4 => i32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as i64,
        n => panic!("unsupported register width {n}"),
    }
}

pub(crate) fn register_bytes(info: &RegisterInfo, value: i64) -> Vec<u8> {
    let mut out = vec![0; info.width as usize];
    put_le(&mut out, value);
    out
}

/// Byte-stream face of a [`VirtualBus`], standing in for a serial port.
/// Writes are parsed and answered immediately; replies are read back.
#[derive(Debug)]
pub struct VirtualSerial {
    bus: VirtualBus,
    parser: StreamParser,
    outbox: VecDeque<u8>,
}

impl VirtualSerial {
    pub fn new(bus: VirtualBus) -> Self {
        VirtualSerial {
            bus,
            parser: StreamParser::new(),
            outbox: VecDeque::new(),
        }
    }

    pub fn bus(&self) -> &VirtualBus {
        &self.bus
    }

    pub fn bus_mut(&mut self) -> &mut VirtualBus {
        &mut self.bus
    }

    pub fn parser(&self) -> &StreamParser {
        &self.parser
    }

    pub fn advance(&mut self, dt: f64) {
        self.bus.advance(dt);
    }
}

impl Write for VirtualSerial {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        for frame in self.parser.feed(buf) {
            for reply in self.bus.handle(&frame) {
                let bytes = encode_frame(&reply).map_err(io::Error::other)?;
                self.outbox.extend(bytes);
            }
        }
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

impl Read for VirtualSerial {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let n = buf.len().min(self.outbox.len());
        for (slot, b) in buf.iter_mut().zip(self.outbox.drain(..n)) {
            *slot = b;
        }
        Ok(n)
    }
}
