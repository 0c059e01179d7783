use std::fs::File;
use std::io::BufWriter;
use std::net::{TcpListener, ToSocketAddrs};
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use super::protocol::{
    ClientMessage, EndMessage, ErrorMessage, JoinMessage, ServerMessage, SessionMode, WatchSource,
};
use super::session::{Session, SessionSpec};
use super::transport::{detect, Received, Transport};
use crate::config::AppConfig;
use crate::error::{Error, Result};
use crate::eventlog::EventLog;

#[derive(Clone, Debug)]
pub struct BridgeConfig {
    pub app: AppConfig,
    /// Ticks per second in every mode; 0 runs lockstep: human sessions wait
    /// for each action and watch or replay sessions stream unpaced.
    pub tick_hz: f64,
    pub log_dir: PathBuf,
    pub mode: SessionMode,
    pub episodes: u64,
    pub seed: u64,
    pub source: WatchSource,
    pub replay: Option<PathBuf>,
    /// How long to wait for the opening `join`.
    pub join_timeout: Duration,
}

impl BridgeConfig {
    pub fn new(app: AppConfig, log_dir: PathBuf) -> Self {
        Self {
            tick_hz: 1.0 / app.sim.dt,
            app,
            log_dir,
            mode: SessionMode::Human,
            episodes: 25,
            seed: 0,
            source: WatchSource::default(),
            replay: None,
            join_timeout: Duration::from_secs(30),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.app.validate()?;
        if !(self.tick_hz.is_finite() && self.tick_hz >= 0.0) {
            return Err(Error::Config("tick_hz must be finite and non-negative".into()));
        }
        if self.episodes == 0 {
            return Err(Error::Config("sessions need at least one episode".into()));
        }
        Ok(())
    }

    fn spec(&self, join: &JoinMessage) -> Result<SessionSpec> {
        let mode = join.mode.unwrap_or(self.mode);
        let replay = match mode {
            SessionMode::Replay => {
                let path = join
                    .log
                    .clone()
                    .or_else(|| self.replay.clone())
                    .ok_or_else(|| Error::Config("replay needs a log".into()))?;
                Some(EventLog::read(&path)?)
            }
            _ => None,
        };
        Ok(SessionSpec {
            mode,
            seed: join.seed.unwrap_or(self.seed),
            episodes: join.episodes.unwrap_or(self.episodes).max(1),
            tester: join.tester.clone(),
            trial: join.trial,
            source: join.source.clone().unwrap_or_else(|| self.source.clone()),
            tick_hz: self.tick_hz,
            replay,
        })
    }
}

pub struct Server {
    listener: TcpListener,
    config: Arc<BridgeConfig>,
    next_id: Arc<AtomicU64>,
}

impl Server {
    pub fn bind(addr: impl ToSocketAddrs + std::fmt::Display, config: BridgeConfig) -> Result<Self> {
        config.validate()?;
        std::fs::create_dir_all(&config.log_dir).map_err(|e| Error::io(&config.log_dir, e))?;
        let listener =
            TcpListener::bind(&addr).map_err(|e| Error::Net(format!("cannot listen on {addr}: {e}")))?;
        Ok(Self {
            listener,
            config: Arc::new(config),
            next_id: Arc::new(AtomicU64::new(1)),
        })
    }

    pub fn local_addr(&self) -> Result<std::net::SocketAddr> {
        self.listener.local_addr().map_err(|e| Error::Net(e.to_string()))
    }

    /// Serves the next connection on the calling thread.
    pub fn serve_one(&self) -> Result<Option<EndMessage>> {
        let (stream, _) = self.listener.accept().map_err(|e| Error::Net(e.to_string()))?;
        stream.set_nodelay(true).map_err(|e| Error::Net(e.to_string()))?;
        let mut transport = detect(stream)?;
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        run_connection(transport.as_mut(), &self.config, id)
    }

    /// Accepts forever, one thread per connection.
    pub fn serve_forever(&self) -> Result<()> {
        loop {
            let (stream, _) = self.listener.accept().map_err(|e| Error::Net(e.to_string()))?;
            let config = Arc::clone(&self.config);
            let id = self.next_id.fetch_add(1, Ordering::Relaxed);
            std::thread::spawn(move || {
                let _ = stream.set_nodelay(true);
                if let Ok(mut t) = detect(stream) {
                    let _ = run_connection(t.as_mut(), &config, id);
                }
            });
        }
    }
}

fn send_error(t: &mut dyn Transport, e: &Error) -> Result<()> {
    t.send(&ServerMessage::Error(ErrorMessage::from_error(e)))
}

/// Runs one client from `join` to `end`. Returns `None` when the client
/// left before joining.
pub fn run_connection(
    t: &mut dyn Transport,
    config: &BridgeConfig,
    id: u64,
) -> Result<Option<EndMessage>> {
    let join = loop {
        match t.recv(Some(config.join_timeout))? {
            Received::Message(ClientMessage::Join(j)) => break j,
            Received::Message(ClientMessage::Quit(_)) | Received::Closed => return Ok(None),
            Received::Message(_) => {
                send_error(t, &Error::Protocol("expected join".into()))?;
            }
            Received::Invalid(e) => send_error(t, &e)?,
            Received::Timeout => return Ok(None),
        }
    };
    let spec = match config.spec(&join) {
        Ok(s) => s,
        Err(e) => {
            send_error(t, &e)?;
            return Err(e);
        }
    };
    let path = config.log_dir.join(format!("{}-{id:04}.jsonl", spec.mode.name()));
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut session = match Session::new(id, spec, &config.app, BufWriter::new(file)) {
        Ok(s) => s,
        Err(e) => {
            send_error(t, &e)?;
            return Err(e);
        }
    };
    t.send(&ServerMessage::Hello(session.hello()))?;
    t.send(&ServerMessage::Frame(session.initial_frame()))?;

    let period = (config.tick_hz > 0.0).then(|| Duration::from_secs_f64(1.0 / config.tick_hz));
    let start = Instant::now();
    let mut quit = false;
    while !session.is_finished() && !quit {
        match period {
            Some(p) => {
                let deadline = start + p.mul_f64((session.tick() + 1) as f64);
                loop {
                    let left = deadline.saturating_duration_since(Instant::now());
                    if left.is_zero() {
                        break;
                    }
                    let r = t.recv(Some(left))?;
                    if !handle(t, &mut session, r, &mut quit)? || quit {
                        break;
                    }
                }
            }
            None if session.mode() == SessionMode::Human => {
                while !session.has_pending_action() && !quit {
                    let r = t.recv(None)?;
                    if !handle(t, &mut session, r, &mut quit)? {
                        break;
                    }
                }
            }
            None => {
                let r = t.recv(Some(Duration::ZERO))?;
                handle(t, &mut session, r, &mut quit)?;
            }
        }
        if quit {
            break;
        }
        match session.step() {
            Ok(frame) => {
                if t.send(&ServerMessage::Frame(frame)).is_err() {
                    break;
                }
            }
            Err(e) => {
                let _ = send_error(t, &e);
                break;
            }
        }
    }
    let (mut end, writer) = session.finish()?;
    writer.into_inner().map_err(|e| Error::io(&path, e.into_error()))?;
    end.log = Some(path);
    // The client may already be gone.
    let _ = t.send(&ServerMessage::End(end.clone()));
    Ok(Some(end))
}

/// Applies one received item. Returns false when nothing more is waiting
/// right now.
fn handle<W: std::io::Write>(
    t: &mut dyn Transport,
    session: &mut Session<W>,
    received: Received,
    quit: &mut bool,
) -> Result<bool> {
    match received {
        Received::Message(ClientMessage::Action(a)) => {
            if let Err(e) = session.offer(&a) {
                send_error(t, &e)?;
            }
        }
        Received::Message(ClientMessage::Quit(_)) | Received::Closed => *quit = true,
        Received::Message(ClientMessage::Join(_)) => {
            send_error(t, &Error::Protocol("session already joined".into()))?;
        }
        Received::Invalid(e) => send_error(t, &e)?,
        Received::Timeout => return Ok(false),
    }
    Ok(true)
}
