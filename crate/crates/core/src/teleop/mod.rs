//! Fixed-rate teleoperation: keypoint sources, the control pipeline,
//! state telemetry and session recording with deterministic replay.

mod pipeline;
mod session;
mod state;

pub use pipeline::{
    run_pipeline, Clocked, KeypointSource, Mailbox, Pipeline, PipelineConfig, RecordedSource, RunSummary,
    SourceEvent, TickOutput, DEFAULT_RATE_HZ, STALE_AFTER_S,
};
pub use session::{
    command_log_bytes, CommandRecord, SessionEntry, SessionHeader, SessionRecord, SESSION_SCHEMA, SESSION_VERSION,
};
pub use state::{StateFlags, StateMessage, STATE_SCHEMA, STATE_VERSION};

use std::sync::Arc;

use crate::bus::{MotorParams, VirtualBus};
use crate::error::Result;
use crate::hand::HandSpec;
use crate::retarget::{CalibrationProfile, KeypointFrame};

/// Runs recorded frames through a fresh pipeline on a fresh virtual bus and
/// returns the session, keypoints and commands interleaved per tick.
pub fn record_session(
    spec: Arc<HandSpec>,
    profile: &CalibrationProfile,
    frames: Vec<KeypointFrame>,
    cfg: PipelineConfig,
) -> Result<(SessionRecord, RunSummary)> {
    let mut rec = SessionRecord::new(profile.content_hash(), spec.content_hash(), cfg.rate_hz);
    let bus = VirtualBus::for_hand(MotorParams::default());
    let mut p = Pipeline::new(spec, profile.clone(), bus, cfg)?;
    let mut src = RecordedSource::new(frames);
    let summary = run_pipeline(&mut p, &mut src, None, |out, frame| {
        if let Some(f) = frame {
            rec.entries.push(SessionEntry::Keypoints { t: out.state.t, frame: f.clone() });
        }
        if let Some(c) = &out.command {
            rec.entries.push(SessionEntry::Command(c.clone()));
        }
    });
    Ok((rec, summary))
}

/// Re-runs a recorded session's keypoints and returns the regenerated
/// command log. Fails if the session was recorded against another
/// profile or hand spec.
pub fn replay_session(
    spec: Arc<HandSpec>,
    profile: &CalibrationProfile,
    session: &SessionRecord,
) -> Result<Vec<CommandRecord>> {
    session.check_hashes(&profile.content_hash(), &spec.content_hash())?;
    let cfg = PipelineConfig {
        rate_hz: session.header.rate_hz,
        ..PipelineConfig::default()
    };
    let (rec, _) = record_session(spec, profile, session.keypoint_frames(), cfg)?;
    Ok(rec.commands())
}
