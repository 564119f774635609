//! Servo-bus wire format and a simulated bus.
//!
//! Packets use the Protocol 2.0 layout:
//!
//! ```text
//! FF FF FD 00 | id | len_lo len_hi | instr | params (stuffed) | crc_lo crc_hi
//! ```
//!
//! `len` counts the instruction byte, the stuffed params and the CRC. Any
//! `FF FF FD` inside the params is followed by an extra `FD`. The CRC is
//! CRC-16 with polynomial 0x8005 and zero initial value over every byte
//! before it.

mod client;
mod crc;
mod frame;
mod parser;
mod registers;
mod units;
mod virtual_bus;

pub use client::{BusClient, MotorReading, StreamTransport, Transport};
pub use crc::{crc16, crc16_update};
pub use frame::{
    decode_frame, encode_frame, is_valid_id, stuff, unstuff, BusFrame, Instruction, BROADCAST_ID, HEADER,
    MAX_PARAMS, OVERHEAD,
};
pub use parser::{ParserStats, StreamParser};
pub use registers::{Access, Register, RegisterInfo, RegisterMap};
pub use units::{quantize_rad, rad_to_ticks, ticks_to_rad, TICKS_PER_REV};
pub use virtual_bus::{
    status_code, BusCommand, MotorParams, VirtualBus, VirtualMotor, VirtualSerial, FIRMWARE_VERSION, MODEL_NUMBER,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BusError {
    #[error("{0} parameter bytes exceed the packet limit")]
    Oversize(usize),
    #[error("id {0} is reserved")]
    InvalidId(u8),
    #[error("crc mismatch: wire 0x{wire:04X}, computed 0x{computed:04X}")]
    Crc { wire: u16, computed: u16 },
    #[error("malformed packet: {0}")]
    Malformed(String),
    #[error("no reply from id {id}")]
    Timeout { id: u8 },
    #[error("device {id} reported error 0x{code:02X}")]
    Device { id: u8, code: u8 },
    #[error("unexpected reply: {0}")]
    UnexpectedReply(String),
    #[error("register map: {0}")]
    RegisterMap(String),
    #[error("transport: {0}")]
    Transport(String),
}
