use std::io::{ErrorKind, Read, Write};

use super::frame::{encode_frame, BusFrame, Instruction, BROADCAST_ID};
use super::parser::StreamParser;
use super::registers::{Register, RegisterMap};
use super::units::{rad_to_ticks, ticks_to_rad};
use super::virtual_bus::{get_le, register_bytes, VirtualBus};
use super::BusError;

/// Something that can carry a request and collect its status replies.
pub trait Transport {
    fn exchange(&mut self, request: &BusFrame, replies: usize) -> Result<Vec<BusFrame>, BusError>;
}

impl Transport for VirtualBus {
    fn exchange(&mut self, request: &BusFrame, replies: usize) -> Result<Vec<BusFrame>, BusError> {
        let out = self.handle(request);
        if out.len() < replies {
            return Err(BusError::Timeout { id: request.id });
        }
        Ok(out)
    }
}

/// Frames over any byte stream, e.g. a serial port or
/// [`super::VirtualSerial`]. A read returning zero bytes (or timing out)
/// before all replies arrive is a timeout.
#[derive(Debug)]
pub struct StreamTransport<S> {
    io: S,
    parser: StreamParser,
}

impl<S: Read + Write> StreamTransport<S> {
    pub fn new(io: S) -> Self {
        StreamTransport {
            io,
            parser: StreamParser::new(),
        }
    }

    pub fn get_ref(&self) -> &S {
        &self.io
    }

    pub fn get_mut(&mut self) -> &mut S {
        &mut self.io
    }
}

impl<S: Read + Write> Transport for StreamTransport<S> {
    fn exchange(&mut self, request: &BusFrame, replies: usize) -> Result<Vec<BusFrame>, BusError> {
        let bytes = encode_frame(request)?;
        self.io.write_all(&bytes).map_err(|e| BusError::Transport(e.to_string()))?;
        self.io.flush().map_err(|e| BusError::Transport(e.to_string()))?;
        let mut out = Vec::new();
        let mut buf = [0u8; 256];
        while out.len() < replies {
            let n = match self.io.read(&mut buf) {
                Ok(0) => return Err(BusError::Timeout { id: request.id }),
                Ok(n) => n,
                Err(e) if matches!(e.kind(), ErrorKind::TimedOut | ErrorKind::WouldBlock) => {
                    return Err(BusError::Timeout { id: request.id })
                }
                Err(e) => return Err(BusError::Transport(e.to_string())),
            };
            self.parser.feed_into(&buf[..n], &mut out);
        }
        Ok(out)
    }
}

/// Position and current of one motor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorReading {
    pub id: u8,
    pub position: f64,
    pub current_ma: f64,
}

/// Typed register access with bounded retries.
#[derive(Debug)]
pub struct BusClient<T> {
    transport: T,
    map: RegisterMap,
    attempts: usize,
    retries_used: u64,
}

impl<T: Transport> BusClient<T> {
    /// Three attempts per request.
    pub fn new(transport: T) -> Self {
        BusClient {
            transport,
            map: RegisterMap::default(),
            attempts: 3,
            retries_used: 0,
        }
    }

    pub fn with_register_map(mut self, map: RegisterMap) -> Self {
        self.map = map;
        self
    }

    pub fn with_attempts(mut self, attempts: usize) -> Self {
        self.attempts = attempts.max(1);
        self
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    pub fn transport_mut(&mut self) -> &mut T {
        &mut self.transport
    }

    /// Requests that had to be re-sent at least once, summed over attempts.
    pub fn retries_used(&self) -> u64 {
        self.retries_used
    }

    fn request(&mut self, frame: &BusFrame, replies: usize) -> Result<Vec<BusFrame>, BusError> {
        let mut last = None;
        for attempt in 0..self.attempts {
            if attempt > 0 {
                self.retries_used += 1;
            }
            match self.transport.exchange(frame, replies) {
                Ok(out) => return check_replies(out),
                Err(e @ BusError::Device { .. }) => return Err(e),
                Err(e) => last = Some(e),
            }
        }
        Err(last.expect("at least one attempt"))
    }

    pub fn ping(&mut self, id: u8) -> Result<(), BusError> {
        self.request(&BusFrame::ping(id), 1).map(|_| ())
    }

    pub fn read(&mut self, id: u8, register: Register) -> Result<i64, BusError> {
        let info = self.map.info(register);
        let mut p = info.address.to_le_bytes().to_vec();
        p.extend((info.width as u16).to_le_bytes());
        let out = self.request(&BusFrame::new(id, Instruction::Read, p), 1)?;
        let data = out[0].status_data();
        if data.len() != info.width as usize {
            return Err(BusError::UnexpectedReply(format!("{} bytes for {register:?}", data.len())));
        }
        Ok(get_le(data))
    }

    pub fn write(&mut self, id: u8, register: Register, value: i64) -> Result<(), BusError> {
        let info = self.map.info(register);
        let mut p = info.address.to_le_bytes().to_vec();
        p.extend(register_bytes(&info, value));
        let replies = usize::from(id != BROADCAST_ID);
        self.request(&BusFrame::new(id, Instruction::Write, p), replies).map(|_| ())
    }

    /// One broadcast frame setting each motor's goal, in radians.
    pub fn sync_write_goals(&mut self, goals: &[(u8, f64)]) -> Result<(), BusError> {
        let info = self.map.info(Register::GoalPosition);
        let mut p = info.address.to_le_bytes().to_vec();
        p.extend((info.width as u16).to_le_bytes());
        for &(id, rad) in goals {
            p.push(id);
            p.extend(register_bytes(&info, rad_to_ticks(rad) as i64));
        }
        self.request(&BusFrame::new(BROADCAST_ID, Instruction::SyncWrite, p), 0)
            .map(|_| ())
    }

    /// Position and current of each listed motor, in order.
    pub fn sync_read_state(&mut self, ids: &[u8]) -> Result<Vec<MotorReading>, BusError> {
        let cur = self.map.info(Register::PresentCurrent);
        let pos = self.map.info(Register::PresentPosition);
        let start = cur.address.min(pos.address);
        let len = cur.end().max(pos.end()) - start;
        let mut p = start.to_le_bytes().to_vec();
        p.extend(len.to_le_bytes());
        p.extend_from_slice(ids);
        let out = self.request(&BusFrame::new(BROADCAST_ID, Instruction::SyncRead, p), ids.len())?;
        ids.iter()
            .map(|&id| {
                let f = out
                    .iter()
                    .find(|f| f.id == id)
                    .ok_or_else(|| BusError::UnexpectedReply(format!("no reply from {id}")))?;
                let d = f.status_data();
                if d.len() != len as usize {
                    return Err(BusError::UnexpectedReply(format!("short reply from {id}")));
                }
                let field = |i: &super::RegisterInfo| {
                    let off = (i.address - start) as usize;
                    get_le(&d[off..off + i.width as usize])
                };
                Ok(MotorReading {
                    id,
                    position: ticks_to_rad(field(&pos) as i32),
                    current_ma: field(&cur) as f64,
                })
            })
            .collect()
    }
}

fn check_replies(out: Vec<BusFrame>) -> Result<Vec<BusFrame>, BusError> {
    for f in &out {
        if f.instruction != Instruction::Status {
            return Err(BusError::UnexpectedReply(format!("{:?} from {}", f.instruction, f.id)));
        }
        match f.status_error() {
            Some(0) => {}
            Some(code) => return Err(BusError::Device { id: f.id, code }),
            None => return Err(BusError::UnexpectedReply(format!("empty status from {}", f.id))),
        }
    }
    Ok(out)
}
