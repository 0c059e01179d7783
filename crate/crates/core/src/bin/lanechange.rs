use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use lanechange::bridge::{BridgeConfig, Server, SessionMode, WatchSource};
use lanechange::config::AppConfig;
use lanechange::dqn::{AgentKind, Checkpoint};
use lanechange::eventlog::{EventLogWriter, LogHeader};
use lanechange::harness::{
    evaluate_logged, ingest_human_logs, rolling_collision_rate, train, Evaluation, Policy,
};
use lanechange::planners::{ClassicalPlanner, PlannerKind};
use lanechange::{Error, Result};

#[derive(Parser)]
#[command(name = "lanechange", version, about = "Adversary lane-change driving: simulator, planners, DQN agents")]
struct Cli {
    /// TOML config with [sim], [planner] and [train] tables.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent, writing metrics, the collision curve and checkpoints.
    Train {
        #[arg(long, default_value = "ours-p1")]
        agent: AgentKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Defaults to `train.train_episodes`.
        #[arg(long)]
        episodes: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Greedy evaluation of a checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// Evaluation of a classical planner.
    BaselineEval {
        #[arg(long, default_value = "p1")]
        planner: PlannerKind,
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// Per-trial, best-of-trials and average stats from human session logs.
    HumanStats {
        #[arg(required = true)]
        logs: Vec<PathBuf>,
    },
    /// Run the session bridge for the browser client.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8765")]
        listen: String,
        #[arg(long, default_value = "human")]
        mode: String,
        #[arg(long, default_value = "logs")]
        log_dir: PathBuf,
        /// Ticks per second; 0 for lockstep. Defaults to 1/dt.
        #[arg(long)]
        tick_hz: Option<f64>,
        #[arg(long, default_value_t = 25)]
        episodes: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Watch sessions drive with this checkpoint instead of a planner.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value = "p1")]
        planner: PlannerKind,
        /// Event log for replay sessions.
        #[arg(long)]
        replay: Option<PathBuf>,
    },
    /// Print the effective config as TOML.
    ShowConfig,
}

#[derive(Args)]
struct EvalArgs {
    /// Defaults to `train.eval_episodes`.
    #[arg(long)]
    episodes: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Overrides `sim.adversary_lane_change_prob`.
    #[arg(long)]
    adversary_prob: Option<f64>,
    /// Write the standard event log of every step here.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Write one JSON line of stats per episode here.
    #[arg(long)]
    episodes_out: Option<PathBuf>,
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("output serializes"));
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn run_eval(app: &AppConfig, policy: &mut dyn Policy, source: &str, args: &EvalArgs) -> Result<()> {
    let mut sim = app.sim.clone();
    if let Some(p) = args.adversary_prob {
        sim.adversary_lane_change_prob = p;
    }
    sim.validate()?;
    let n = args.episodes.unwrap_or(app.train.eval_episodes);
    let eval: Evaluation = match &args.log {
        Some(path) => {
            let mut header = LogHeader::new("eval", sim.clone());
            header.agent = Some(source.to_string());
            let mut w = EventLogWriter::new(create(path)?, header).map_err(io_err(path))?;
            let eval = evaluate_logged(&sim, policy, n, args.seed, Some(&mut w))?;
            w.flush().map_err(io_err(path))?;
            eval
        }
        None => evaluate_logged::<std::io::Sink>(&sim, policy, n, args.seed, None)?,
    };
    if let Some(path) = &args.episodes_out {
        let mut w = create(path)?;
        for ep in &eval.episodes {
            serde_json::to_writer(&mut w, ep).expect("stats serialize");
            w.write_all(b"\n").map_err(io_err(path))?;
        }
        w.flush().map_err(io_err(path))?;
    }
    print_json(&eval.aggregate);
    Ok(())
}

#[derive(Serialize)]
struct TrainSummary {
    agent: String,
    seed: u64,
    episodes: u64,
    grad_steps: u64,
    final_window_collision_rate: Option<f64>,
    out: PathBuf,
}

fn run(cli: Cli) -> Result<()> {
    let app = match &cli.config {
        Some(path) => AppConfig::load(path)?,
        None => AppConfig::default(),
    };
    match cli.command {
        Command::Train {
            agent,
            seed,
            episodes,
            out,
        } => {
            let episodes = episodes.unwrap_or(app.train.train_episodes);
            let result = train(&app, agent, seed, episodes, Some(&out))?;
            let curve = rolling_collision_rate(&result.outcomes(), 50);
            print_json(&TrainSummary {
                agent: agent.name().to_string(),
                seed,
                episodes,
                grad_steps: result.agent.grad_steps(),
                final_window_collision_rate: curve.last().copied(),
                out,
            });
        }
        Command::Eval { checkpoint, eval } => {
            let mut agent = Checkpoint::load(&checkpoint)?.restore()?;
            let name = agent.kind.name();
            run_eval(&app, &mut agent, name, &eval)?;
        }
        Command::BaselineEval { planner, eval } => {
            let mut p = ClassicalPlanner::new(planner, app.planner.clone());
            run_eval(&app, &mut p, planner.name(), &eval)?;
        }
        Command::HumanStats { logs } => print_json(&ingest_human_logs(&logs)?),
        Command::Serve {
            listen,
            mode,
            log_dir,
            tick_hz,
            episodes,
            seed,
            checkpoint,
            planner,
            replay,
        } => {
            let mut config = BridgeConfig::new(app, log_dir);
            config.mode = match mode.as_str() {
                "human" => SessionMode::Human,
                "watch" => SessionMode::Watch,
                "replay" => SessionMode::Replay,
                other => return Err(Error::Config(format!("unknown mode '{other}'"))),
            };
            if let Some(hz) = tick_hz {
                config.tick_hz = hz;
            }
            config.episodes = episodes;
            config.seed = seed;
            config.source = match checkpoint {
                Some(path) => WatchSource::Checkpoint(path),
                None => WatchSource::Planner(planner),
            };
            config.replay = replay;
            let server = Server::bind(listen.as_str(), config)?;
            eprintln!("listening on {}", server.local_addr()?);
            server.serve_forever()?;
        }
        Command::ShowConfig => print!("{}", app.to_toml()),
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Io { .. } => 3,
        Error::Parse { .. } => 4,
        Error::Checkpoint(_) => 5,
        Error::Net(_) => 6,
        Error::Protocol(_) => 7,
        _ => 1,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = serde_json::json!({ "error": e.category(), "message": e.to_string() });
            eprintln!("{report}");
            ExitCode::from(exit_code(&e))
        }
    }
}
