use super::frame::{decode_frame, encode_frame, BusFrame, HEADER, MAX_LENGTH_FIELD};
use super::BusError;

/// Counters kept by [`StreamParser`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParserStats {
    pub frames: u64,
    pub crc_errors: u64,
    pub malformed: u64,
    pub discarded_bytes: u64,
}

/// Incremental decoder for a byte stream that may contain noise, partial
/// packets and corrupted packets.
///
/// Output depends only on the concatenated input, never on how it was split
/// into chunks.
#[derive(Debug, Clone, Default)]
pub struct StreamParser {
    buf: Vec<u8>,
    stats: ParserStats,
}

impl StreamParser {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stats(&self) -> ParserStats {
        self.stats
    }

    /// Bytes held while waiting for the rest of a packet.
    pub fn pending(&self) -> usize {
        self.buf.len()
    }

    pub fn feed(&mut self, bytes: &[u8]) -> Vec<BusFrame> {
        let mut out = Vec::new();
        self.feed_into(bytes, &mut out);
        out
    }

    pub fn feed_into(&mut self, bytes: &[u8], out: &mut Vec<BusFrame>) {
        self.buf.extend_from_slice(bytes);
        let mut start = 0;
        loop {
            let rest = &self.buf[start..];
            let Some(pos) = find_header(rest) else {
                // keep a possible header prefix at the tail
                let keep = header_prefix_len(rest);
                let drop = rest.len() - keep;
                self.stats.discarded_bytes += drop as u64;
                start += drop;
                break;
            };
            self.stats.discarded_bytes += pos as u64;
            start += pos;
            let rest = &self.buf[start..];
            if rest.len() < 7 {
                break;
            }
            let length = u16::from_le_bytes([rest[5], rest[6]]) as usize;
            if !(3..=MAX_LENGTH_FIELD).contains(&length) {
                self.stats.malformed += 1;
                self.stats.discarded_bytes += 1;
                start += 1;
                continue;
            }
            let total = 7 + length;
            if rest.len() < total {
                break;
            }
            match decode_frame(&rest[..total]) {
                Ok(frame) if encode_frame(&frame).is_ok_and(|b| b == rest[..total]) => {
                    self.stats.frames += 1;
                    out.push(frame);
                    start += total;
                }
                Err(BusError::Crc { .. }) => {
                    self.stats.crc_errors += 1;
                    self.stats.discarded_bytes += 1;
                    start += 1;
                }
                _ => {
                    self.stats.malformed += 1;
                    self.stats.discarded_bytes += 1;
                    start += 1;
                }
            }
        }
        self.buf.drain(..start);
    }
}

fn find_header(bytes: &[u8]) -> Option<usize> {
    bytes.windows(HEADER.len()).position(|w| w == HEADER)
}

fn header_prefix_len(bytes: &[u8]) -> usize {
    (1..HEADER.len())
        .rev()
        .find(|&k| bytes.len() >= k && bytes[bytes.len() - k..] == HEADER[..k])
        .unwrap_or(0)
}
