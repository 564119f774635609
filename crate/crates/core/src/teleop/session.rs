use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::state::StateMessage;
use crate::error::{Error, Result};
use crate::retarget::KeypointFrame;

pub const SESSION_SCHEMA: &str = "craft-session";
pub const SESSION_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub schema: String,
    pub version: u32,
    pub profile_hash: String,
    pub spec_hash: String,
    pub rate_hz: f64,
}

/// Goals sent to the bus on one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandRecord {
    pub tick: u64,
    pub t: f64,
    /// Active joint targets, actuator order.
    pub targets: Vec<f64>,
    /// Spool goals in motor-id order, radians.
    pub goals: Vec<f64>,
    pub stale: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SessionEntry {
    Header(SessionHeader),
    Keypoints { t: f64, frame: KeypointFrame },
    Command(CommandRecord),
    State(StateMessage),
}

/// A whole recorded session.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionRecord {
    pub header: SessionHeader,
    pub entries: Vec<SessionEntry>,
}

impl SessionRecord {
    pub fn new(profile_hash: String, spec_hash: String, rate_hz: f64) -> Self {
        SessionRecord {
            header: SessionHeader {
                schema: SESSION_SCHEMA.into(),
                version: SESSION_VERSION,
                profile_hash,
                spec_hash,
                rate_hz,
            },
            entries: Vec::new(),
        }
    }

    pub fn keypoint_frames(&self) -> Vec<KeypointFrame> {
        self.entries
            .iter()
            .filter_map(|e| match e {
                SessionEntry::Keypoints { frame, .. } => Some(frame.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn commands(&self) -> Vec<CommandRecord> {
        self.entries
            .iter()
            .filter_map(|e| match e {
                SessionEntry::Command(c) => Some(c.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "{}", serde_json::to_string(&SessionEntry::Header(self.header.clone()))?)?;
        for e in &self.entries {
            writeln!(w, "{}", serde_json::to_string(e)?)?;
        }
        Ok(())
    }

    pub fn read_from(r: impl BufRead) -> Result<SessionRecord> {
        let mut lines = r.lines();
        let first = lines.next().ok_or_else(|| Error::Session("empty session file".into()))??;
        let header = match serde_json::from_str(&first)? {
            SessionEntry::Header(h) => h,
            _ => return Err(Error::Session("session does not start with a header".into())),
        };
        if header.schema != SESSION_SCHEMA || header.version != SESSION_VERSION {
            return Err(Error::Session(format!("unsupported session {} v{}", header.schema, header.version)));
        }
        let mut entries = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str(&line)? {
                SessionEntry::Header(_) => return Err(Error::Session("second header".into())),
                e => entries.push(e),
            }
        }
        Ok(SessionRecord { header, entries })
    }

    /// Errors unless the session was recorded with these hashes.
    pub fn check_hashes(&self, profile_hash: &str, spec_hash: &str) -> Result<()> {
        if self.header.profile_hash != profile_hash {
            return Err(Error::Session(format!(
                "profile hash {} does not match session {}",
                profile_hash, self.header.profile_hash
            )));
        }
        if self.header.spec_hash != spec_hash {
            return Err(Error::Session(format!(
                "hand-spec hash {} does not match session {}",
                spec_hash, self.header.spec_hash
            )));
        }
        Ok(())
    }
}

/// Serializes a command log, one record per line. Two logs are identical
/// exactly when these bytes are.
pub fn command_log_bytes(commands: &[CommandRecord]) -> Vec<u8> {
    let mut out = Vec::new();
    for c in commands {
        serde_json::to_writer(&mut out, c).expect("command records serialize");
        out.push(b'\n');
    }
    out
}
