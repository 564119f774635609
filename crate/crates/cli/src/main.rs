use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand};
use craft_cli::commands::{self, TestName, SPEC_ENV};
use craft_cli::server::{self, ControlLoop};
use craft_cli::{CliError, CliResult};
use craft_core::bus::{MotorParams, VirtualBus};
use craft_core::teleop::{Pipeline, PipelineConfig, SessionRecord, DEFAULT_RATE_HZ};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "craft", version, about = "Digital twin and teleoperation tools for a tendon-driven hand")]
struct Cli {
    /// Hand-spec TOML; the bundled spec when absent.
    #[arg(long, global = true, env = SPEC_ENV)]
    spec: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Virtual hand plus state server, driven from the console.
    Sim {
        #[arg(long, default_value = "127.0.0.1:8765")]
        bind: SocketAddr,
        #[arg(long, default_value_t = DEFAULT_RATE_HZ)]
        rate: f64,
        /// Stop after this many seconds instead of waiting for Ctrl-C.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Run the control pipeline from a keypoint file or the /keypoints socket.
    Teleop {
        /// A keypoint stream file, or `socket` to listen on the server.
        #[arg(long)]
        input: String,
        #[arg(long)]
        profile: Option<PathBuf>,
        /// Save the session here.
        #[arg(long)]
        record: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8765")]
        bind: SocketAddr,
        #[arg(long, default_value_t = DEFAULT_RATE_HZ)]
        rate: f64,
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Build a calibration profile.
    Calibrate {
        /// Operator calibration stream (keypoint file).
        #[arg(long)]
        operator: Option<PathBuf>,
        /// Measure robot limits by sweeping the virtual hand.
        #[arg(long)]
        robot: bool,
        /// Existing profile to update.
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long, default_value = "profile.toml")]
        out: PathBuf,
    },
    /// Run a structural test and write its report.
    Test {
        #[arg(value_enum)]
        which: TestName,
        /// Test configuration, TOML or JSON.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Drive the virtual hand to a grasp preset and wait for it to settle.
    Grasp {
        name: String,
        #[arg(long, default_value_t = 5.0)]
        timeout: f64,
    },
    /// Record a session from a keypoint file.
    Record {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_RATE_HZ)]
        rate: f64,
    },
    /// Replay a session and check its command log.
    Replay {
        session: PathBuf,
        #[arg(long)]
        profile: Option<PathBuf>,
        /// Write the regenerated command log here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(v) => {
            eprintln!("{v}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_line());
            ExitCode::from(e.code.clamp(1, 255) as u8)
        }
    }
}

fn run(cli: Cli) -> CliResult<Value> {
    let spec = commands::load_spec(cli.spec.as_deref())?;
    match cli.command {
        Command::Sim { bind, rate, duration } => {
            let profile = commands::default_profile(&spec)?;
            serve(spec, profile, bind, rate, duration, None)
        }
        Command::Teleop { input, profile, record, bind, rate, duration } => {
            let profile = commands::load_profile(&spec, profile.as_deref())?;
            if input == "socket" {
                serve(spec, profile, bind, rate, duration, record)
            } else {
                commands::teleop_file(&spec, &profile, input.as_ref(), record.as_deref(), rate)
            }
        }
        Command::Calibrate { operator, robot, profile, out } => {
            commands::calibrate(&spec, operator.as_deref(), robot, profile.as_deref(), &out)
        }
        Command::Test { which, config, out } => commands::run_test(&spec, which, config.as_deref(), out.as_deref()),
        Command::Grasp { name, timeout } => commands::grasp(&spec, &name, timeout),
        Command::Record { input, profile, out, rate } => {
            let profile = commands::load_profile(&spec, profile.as_deref())?;
            commands::record(&spec, &profile, &input, &out, rate)
        }
        Command::Replay { session, profile, out } => {
            let profile = commands::load_profile(&spec, profile.as_deref())?;
            commands::replay(&spec, &profile, &session, out.as_deref())
        }
    }
}

fn serve(
    spec: Arc<craft_core::HandSpec>,
    profile: craft_core::retarget::CalibrationProfile,
    bind: SocketAddr,
    rate: f64,
    duration: Option<f64>,
    record: Option<PathBuf>,
) -> CliResult<Value> {
    if !(rate > 0.0) {
        return Err(CliError::new(2, "usage", "--rate must be positive"));
    }
    let library = Arc::new(commands::load_library(&spec)?);
    let recording = record
        .as_ref()
        .map(|_| SessionRecord::new(profile.content_hash(), spec.content_hash(), rate));
    let cfg = PipelineConfig { rate_hz: rate, ..PipelineConfig::default() };
    let pipeline = Pipeline::new(spec, profile, VirtualBus::for_hand(MotorParams::default()), cfg)?;
    let control = ControlLoop { pipeline, library, recording };
    let rt = tokio::runtime::Runtime::new()?;
    let result = rt.block_on(async move {
        let server = server::start(bind, control)
            .await
            .map_err(|e| CliError::new(1, "bind", format!("{bind}: {e}")))?;
        println!("{}", json!({ "listening": server.addr.to_string() }));
        match duration {
            Some(s) => tokio::time::sleep(Duration::from_secs_f64(s)).await,
            None => {
                let _ = tokio::signal::ctrl_c().await;
            }
        }
        Ok::<_, CliError>(server.shutdown().await)
    })?;
    if let (Some(path), Some(rec)) = (&record, &result.recording) {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        rec.write_to(&mut f)?;
    }
    let s = result.summary;
    Ok(json!({
        "ticks": s.ticks,
        "commands": s.commands,
        "frames_used": s.frames_used,
        "frames_rejected": s.frames_rejected,
        "stale_ticks": s.stale_ticks,
        "retries": s.retries,
        "fault": s.fault,
        "session": record.map(|p| p.display().to_string()),
    }))
}
