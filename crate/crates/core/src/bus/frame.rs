use serde::{Deserialize, Serialize};

use super::crc::crc16;
use super::BusError;

pub const HEADER: [u8; 4] = [0xFF, 0xFF, 0xFD, 0x00];
pub const BROADCAST_ID: u8 = 0xFE;
/// Header, id, length, instruction and CRC.
pub const OVERHEAD: usize = 10;
/// Largest parameter block accepted by the encoder and the parser.
pub const MAX_PARAMS: usize = 1024;
/// Upper bound on the length field once stuffing is accounted for.
pub(crate) const MAX_LENGTH_FIELD: usize = MAX_PARAMS + MAX_PARAMS / 3 + 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Instruction {
    Ping,
    Read,
    Write,
    SyncRead,
    SyncWrite,
    Status,
}

impl Instruction {
    pub const ALL: [Instruction; 6] = [
        Instruction::Ping,
        Instruction::Read,
        Instruction::Write,
        Instruction::SyncRead,
        Instruction::SyncWrite,
        Instruction::Status,
    ];

    pub fn code(self) -> u8 {
        match self {
            Instruction::Ping => 0x01,
            Instruction::Read => 0x02,
            Instruction::Write => 0x03,
            Instruction::SyncRead => 0x82,
            Instruction::SyncWrite => 0x83,
            Instruction::Status => 0x55,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Instruction::ALL.into_iter().find(|i| i.code() == code)
    }
}

/// One bus packet. For [`Instruction::Status`] the first parameter byte is
/// the device error code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BusFrame {
    pub id: u8,
    pub instruction: Instruction,
    pub params: Vec<u8>,
}

impl BusFrame {
    pub fn new(id: u8, instruction: Instruction, params: Vec<u8>) -> Self {
        BusFrame {
            id,
            instruction,
            params,
        }
    }

    pub fn ping(id: u8) -> Self {
        BusFrame::new(id, Instruction::Ping, Vec::new())
    }

    pub fn status(id: u8, error: u8, data: &[u8]) -> Self {
        let mut params = Vec::with_capacity(data.len() + 1);
        params.push(error);
        params.extend_from_slice(data);
        BusFrame::new(id, Instruction::Status, params)
    }

    /// Device error code of a status frame, if any.
    pub fn status_error(&self) -> Option<u8> {
        match self.instruction {
            Instruction::Status => self.params.first().copied(),
            _ => None,
        }
    }

    /// Payload of a status frame after the error byte.
    pub fn status_data(&self) -> &[u8] {
        match self.instruction {
            Instruction::Status if !self.params.is_empty() => &self.params[1..],
            _ => &[],
        }
    }

    /// CRC carried by this frame on the wire.
    pub fn crc(&self) -> Result<u16, BusError> {
        let bytes = encode_frame(self)?;
        let n = bytes.len();
        Ok(u16::from_le_bytes([bytes[n - 2], bytes[n - 1]]))
    }
}

pub fn is_valid_id(id: u8) -> bool {
    id <= 252 || id == BROADCAST_ID
}

/// Inserts 0xFD after every FF FF FD run in `params`.
pub fn stuff(params: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(params.len() + params.len() / 3);
    for &b in params {
        out.push(b);
        let n = out.len();
        if n >= 3 && out[n - 3..] == [0xFF, 0xFF, 0xFD] {
            out.push(0xFD);
        }
    }
    out
}

/// Reverses [`stuff`]. Returns `None` when an FF FF FD run is not followed
/// by the stuffing byte, which no encoder produces.
pub fn unstuff(stuffed: &[u8]) -> Option<Vec<u8>> {
    let mut out = Vec::with_capacity(stuffed.len());
    let mut i = 0;
    while i < stuffed.len() {
        let b = stuffed[i];
        out.push(b);
        i += 1;
        let n = out.len();
        if n >= 3 && out[n - 3..] == [0xFF, 0xFF, 0xFD] {
            if stuffed.get(i) != Some(&0xFD) {
                return None;
            }
            i += 1;
        }
    }
    Some(out)
}

pub fn encode_frame(frame: &BusFrame) -> Result<Vec<u8>, BusError> {
    if frame.params.len() > MAX_PARAMS {
        return Err(BusError::Oversize(frame.params.len()));
    }
    if !is_valid_id(frame.id) {
        return Err(BusError::InvalidId(frame.id));
    }
    let body = stuff(&frame.params);
    let length = (body.len() + 3) as u16;
    let mut out = Vec::with_capacity(body.len() + OVERHEAD);
    out.extend_from_slice(&HEADER);
    out.push(frame.id);
    out.extend_from_slice(&length.to_le_bytes());
    out.push(frame.instruction.code());
    out.extend_from_slice(&body);
    let crc = crc16(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

/// Decodes exactly one complete packet.
pub fn decode_frame(bytes: &[u8]) -> Result<BusFrame, BusError> {
    if bytes.len() < OVERHEAD || bytes[..4] != HEADER {
        return Err(BusError::Malformed("missing header".into()));
    }
    let length = u16::from_le_bytes([bytes[5], bytes[6]]) as usize;
    if length < 3 || bytes.len() != 7 + length {
        return Err(BusError::Malformed(format!(
            "length field {length} does not match {} bytes",
            bytes.len()
        )));
    }
    let n = bytes.len();
    let wire = u16::from_le_bytes([bytes[n - 2], bytes[n - 1]]);
    let computed = crc16(&bytes[..n - 2]);
    if wire != computed {
        return Err(BusError::Crc { wire, computed });
    }
    let id = bytes[4];
    if !is_valid_id(id) {
        return Err(BusError::InvalidId(id));
    }
    let instruction = Instruction::from_code(bytes[7])
        .ok_or_else(|| BusError::Malformed(format!("unknown instruction 0x{:02X}", bytes[7])))?;
    let params = unstuff(&bytes[8..n - 2])
        .ok_or_else(|| BusError::Malformed("bad byte stuffing".into()))?;
    if params.len() > MAX_PARAMS {
        return Err(BusError::Oversize(params.len()));
    }
    Ok(BusFrame {
        id,
        instruction,
        params,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ping_id1_bytes() {
        let bytes = encode_frame(&BusFrame::ping(1)).unwrap();
        assert_eq!(bytes, [0xFF, 0xFF, 0xFD, 0x00, 0x01, 0x03, 0x00, 0x01, 0x19, 0x4E]);
        assert_eq!(BusFrame::ping(1).crc().unwrap(), 0x4E19);
    }

    #[test]
    fn stuffing_roundtrip() {
        let params = vec![0xFF, 0xFF, 0xFD, 0x01, 0xFF, 0xFF, 0xFD];
        assert_eq!(stuff(&params), [0xFF, 0xFF, 0xFD, 0xFD, 0x01, 0xFF, 0xFF, 0xFD, 0xFD]);
        let frame = BusFrame::new(3, Instruction::Write, params);
        let bytes = encode_frame(&frame).unwrap();
        assert_eq!(bytes.len(), frame.params.len() + OVERHEAD + 2);
        assert_eq!(decode_frame(&bytes).unwrap(), frame);
    }

    #[test]
    fn unstuffed_pattern_is_rejected() {
        assert_eq!(unstuff(&[0xFF, 0xFF, 0xFD]), None);
        assert_eq!(unstuff(&[0xFF, 0xFF, 0xFD, 0x00]), None);
    }

    #[test]
    fn oversize_and_bad_ids() {
        let big = BusFrame::new(1, Instruction::Write, vec![0; MAX_PARAMS + 1]);
        assert!(matches!(encode_frame(&big), Err(BusError::Oversize(_))));
        for id in [253, 255] {
            assert!(matches!(encode_frame(&BusFrame::ping(id)), Err(BusError::InvalidId(_))));
        }
        assert!(encode_frame(&BusFrame::ping(BROADCAST_ID)).is_ok());
    }

    #[test]
    fn crc_corruption_detected() {
        let mut bytes = encode_frame(&BusFrame::new(7, Instruction::Read, vec![132, 0, 4, 0])).unwrap();
        let n = bytes.len();
        bytes[n - 1] ^= 0x01;
        assert!(matches!(decode_frame(&bytes), Err(BusError::Crc { .. })));
    }

    #[test]
    fn status_accessors() {
        let f = BusFrame::status(4, 0x07, &[1, 2]);
        assert_eq!(f.status_error(), Some(0x07));
        assert_eq!(f.status_data(), &[1, 2]);
        assert_eq!(BusFrame::ping(4).status_error(), None);
    }

    pub(crate) fn arb_frame() -> impl Strategy<Value = BusFrame> {
        let id = prop_oneof![0u8..=252, Just(BROADCAST_ID)];
        let instr = proptest::sample::select(Instruction::ALL.to_vec());
        // bias toward bytes that form the stuffing pattern
        let byte = prop_oneof![any::<u8>(), Just(0xFF), Just(0xFD)];
        let params = proptest::collection::vec(byte, 0..96);
        (id, instr, params).prop_map(|(id, instruction, params)| BusFrame {
            id,
            instruction,
            params,
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn roundtrip(frame in arb_frame()) {
            let bytes = encode_frame(&frame).unwrap();
            let stuffed_extra = bytes.len() - frame.params.len() - OVERHEAD;
            prop_assert_eq!(stuffed_extra, stuff(&frame.params).len() - frame.params.len());
            prop_assert_eq!(decode_frame(&bytes).unwrap(), frame);
        }
    }
}
