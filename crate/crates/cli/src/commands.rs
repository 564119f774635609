use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use craft_core::bus::{MotorParams, VirtualBus};
use craft_core::grasp::{load_presets, GraspLibrary};
use craft_core::hand::{HandSpec, JointAngles, JointId};
use craft_core::retarget::{
    calibrate_operator, calibrate_robot, read_keypoint_stream, spec_robot_limits, CalibrationProfile, KeypointFrame,
    SyntheticHand,
};
use craft_core::sim::{
    run_holding_test, run_pullout_test, run_repeatability_test, HoldConfig, PulloutConfig, RepeatConfig, TestReport,
};
use craft_core::teleop::{
    command_log_bytes, record_session, replay_session, run_pipeline, Pipeline, PipelineConfig, RecordedSource,
    SessionRecord,
};
use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use crate::{CliError, CliResult};

pub const SPEC_ENV: &str = "CRAFT_SPEC";

/// Settling tolerance for driving the virtual hand to a pose, rad.
pub const SETTLE_TOLERANCE: f64 = 5e-3;

pub fn load_spec(path: Option<&Path>) -> CliResult<Arc<HandSpec>> {
    let spec = match path {
        Some(p) => HandSpec::load(p).map_err(|e| CliError::new(1, "spec", format!("{}: {e}", p.display())))?,
        None => HandSpec::default(),
    };
    Ok(Arc::new(spec))
}

pub fn load_library(spec: &HandSpec) -> CliResult<GraspLibrary> {
    Ok(load_presets(spec)?)
}

/// Profile calibrated against the built-in synthetic operator, used when
/// no profile file is given.
pub fn default_profile(spec: &HandSpec) -> CliResult<CalibrationProfile> {
    let frames = SyntheticHand::default().calibration_sweep(60, 30.0);
    let cal = calibrate_operator(&frames)?;
    Ok(CalibrationProfile::new(spec_robot_limits(spec), cal.range)?)
}

pub fn load_profile(spec: &HandSpec, path: Option<&Path>) -> CliResult<CalibrationProfile> {
    match path {
        Some(p) => CalibrationProfile::load(p).map_err(|e| CliError::new(1, "profile", format!("{}: {e}", p.display()))),
        None => default_profile(spec),
    }
}

pub fn read_frames(path: &Path) -> CliResult<Vec<KeypointFrame>> {
    let f = File::open(path).map_err(|e| CliError::new(1, "io", format!("{}: {e}", path.display())))?;
    Ok(read_keypoint_stream(BufReader::new(f))?)
}

fn read_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::new(1, "io", format!("{}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e == "json");
    if is_json {
        serde_json::from_str(&text).map_err(|e| CliError::new(1, "config", e.to_string()))
    } else {
        toml::from_str(&text).map_err(|e| CliError::new(1, "config", e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TestName {
    Pullout,
    Repeat,
    Hold,
}

/// Runs one structural test and writes its report to `out`, or stdout.
pub fn run_test(spec: &HandSpec, which: TestName, config: Option<&Path>, out: Option<&Path>) -> CliResult<Value> {
    let report: TestReport = match which {
        TestName::Pullout => run_pullout_test(spec, &read_config::<PulloutConfig>(config)?)?,
        TestName::Repeat => run_repeatability_test(spec, &read_config::<RepeatConfig>(config)?)?,
        TestName::Hold => run_holding_test(spec, &read_config::<HoldConfig>(config)?)?,
    };
    match out {
        Some(p) => report.write_to(BufWriter::new(File::create(p)?))?,
        None => report.write_to(std::io::stdout().lock())?,
    }
    Ok(json!({
        "test": report.kind,
        "samples": report.samples.len(),
        "summary": report.summary,
        "report": out.map(|p| p.display().to_string()),
    }))
}

/// Ticks a fresh virtual hand toward `q` until the read-back pose is within
/// [`SETTLE_TOLERANCE`] on every joint or `timeout` seconds pass.
/// Returns (settled, elapsed seconds, final max error).
pub fn settle(p: &mut Pipeline<VirtualBus>, q: &JointAngles, timeout: f64) -> (bool, f64, f64) {
    p.set_manual_target(q);
    let target = *p.target().expect("target just set");
    let dt = p.config().dt();
    let mut t = 0.0;
    let mut err = f64::INFINITY;
    while t <= timeout {
        let out = p.step(t, None);
        p.client_mut().transport_mut().advance(dt);
        err = out.state.q.iter().zip(target.0.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if out.command.is_some() && err < SETTLE_TOLERANCE {
            return (true, t, err);
        }
        t += dt;
    }
    (false, t, err)
}

fn virtual_pipeline(spec: &Arc<HandSpec>, profile: CalibrationProfile, cfg: PipelineConfig) -> CliResult<Pipeline<VirtualBus>> {
    Ok(Pipeline::new(spec.clone(), profile, VirtualBus::for_hand(MotorParams::default()), cfg)?)
}

pub fn grasp(spec: &Arc<HandSpec>, name: &str, timeout: f64) -> CliResult<Value> {
    let library = load_library(spec)?;
    let Some(preset) = library.get(name) else {
        let names: Vec<&str> = library.names().collect();
        return Err(CliError::new(2, "unknown_grasp", format!("no grasp named {name:?}"))
            .with_detail(json!({ "valid": names })));
    };
    let mut p = virtual_pipeline(spec, default_profile(spec)?, PipelineConfig::default())?;
    let (settled, t, err) = settle(&mut p, &preset.q, timeout);
    let summary = json!({
        "grasp": preset.name,
        "settled": settled,
        "time_s": t,
        "max_error_rad": err,
        "tolerance_rad": SETTLE_TOLERANCE,
    });
    if settled {
        Ok(summary)
    } else {
        Err(CliError::new(1, "not_settled", format!("{} did not settle within {timeout} s", preset.name))
            .with_detail(summary))
    }
}

/// Drives each active joint of a virtual hand to both of its limits and
/// returns the poses read back at each extreme.
fn robot_sweep(spec: &Arc<HandSpec>) -> CliResult<Vec<JointAngles>> {
    let mut p = virtual_pipeline(spec, default_profile(spec)?, PipelineConfig::default())?;
    let mut samples = Vec::new();
    for id in JointId::active() {
        for bound in spec.limits(id) {
            let mut q = JointAngles::zeros();
            q[id] = bound;
            let (settled, _, err) = settle(&mut p, &q, 5.0);
            if !settled {
                return Err(CliError::new(1, "calibration", format!("{id} did not reach {bound} (error {err})")));
            }
            let out = p.step(0.0, None);
            samples.push(JointAngles(out.state.q.try_into().expect("20 joints")));
        }
    }
    Ok(samples)
}

pub fn calibrate(
    spec: &Arc<HandSpec>,
    operator: Option<&Path>,
    robot: bool,
    base: Option<&Path>,
    out: &Path,
) -> CliResult<Value> {
    if operator.is_none() && !robot {
        return Err(CliError::new(2, "usage", "calibrate needs --operator <file>, --robot, or both"));
    }
    let base = base.map(CalibrationProfile::load).transpose()?;
    let mut profile = match (operator, base) {
        (Some(path), base) => {
            let cal = calibrate_operator(&read_frames(path)?)?;
            let limits = base.as_ref().map_or_else(|| spec_robot_limits(spec), |b| b.robot_limits);
            let mut p = CalibrationProfile::new(limits, cal.range)?;
            if let Some(old) = base {
                p.ema_alpha = old.ema_alpha;
                p.workspace = old.workspace;
                p.spool_offsets = old.spool_offsets;
            }
            p
        }
        (None, Some(b)) => b,
        (None, None) => default_profile(spec)?,
    };
    if robot {
        profile.robot_limits = calibrate_robot(&robot_sweep(spec)?)?;
        profile.validate()?;
    }
    profile.save(out)?;
    Ok(json!({
        "profile": out.display().to_string(),
        "hash": profile.content_hash(),
        "operator": operator.map(|p| p.display().to_string()),
        "robot": robot,
    }))
}

pub fn record(spec: &Arc<HandSpec>, profile: &CalibrationProfile, input: &Path, out: &Path, rate_hz: f64) -> CliResult<Value> {
    let cfg = PipelineConfig { rate_hz, ..PipelineConfig::default() };
    let (rec, summary) = record_session(spec.clone(), profile, read_frames(input)?, cfg)?;
    let mut w = BufWriter::new(File::create(out)?);
    rec.write_to(&mut w)?;
    w.flush()?;
    Ok(json!({
        "session": out.display().to_string(),
        "ticks": summary.ticks,
        "commands": summary.commands,
        "frames_used": summary.frames_used,
        "frames_rejected": summary.frames_rejected,
        "stale_ticks": summary.stale_ticks,
        "fault": summary.fault,
    }))
}

pub fn replay(spec: &Arc<HandSpec>, profile: &CalibrationProfile, session: &Path, out: Option<&Path>) -> CliResult<Value> {
    let f = File::open(session).map_err(|e| CliError::new(1, "io", format!("{}: {e}", session.display())))?;
    let rec = SessionRecord::read_from(BufReader::new(f))?;
    let commands = replay_session(spec.clone(), profile, &rec)?;
    let bytes = command_log_bytes(&commands);
    let recorded = rec.commands();
    let matches = recorded.is_empty() || command_log_bytes(&recorded) == bytes;
    if let Some(p) = out {
        std::fs::write(p, &bytes)?;
    }
    let summary = json!({
        "commands": commands.len(),
        "log_bytes": bytes.len(),
        "matches_recording": matches,
        "log": out.map(|p| p.display().to_string()),
    });
    if matches {
        Ok(summary)
    } else {
        Err(CliError::new(1, "replay_mismatch", "replayed commands differ from the recording").with_detail(summary))
    }
}

/// Runs a recorded keypoint file through the pipeline on a virtual clock.
pub fn teleop_file(
    spec: &Arc<HandSpec>,
    profile: &CalibrationProfile,
    input: &Path,
    record_to: Option<&Path>,
    rate_hz: f64,
) -> CliResult<Value> {
    if let Some(out) = record_to {
        return record(spec, profile, input, out, rate_hz);
    }
    let cfg = PipelineConfig { rate_hz, ..PipelineConfig::default() };
    let mut p = virtual_pipeline(spec, profile.clone(), cfg)?;
    let s = run_pipeline(&mut p, &mut RecordedSource::new(read_frames(input)?), None, |_, _| {});
    Ok(json!({
        "ticks": s.ticks,
        "commands": s.commands,
        "frames_used": s.frames_used,
        "frames_rejected": s.frames_rejected,
        "stale_ticks": s.stale_ticks,
        "retries": s.retries,
        "fault": s.fault,
    }))
}
