use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::net::TcpStream;
use std::time::{Duration, Instant};

use tungstenite::{Message, WebSocket};

use super::protocol::{decode_client, encode, ClientMessage, ServerMessage};
use crate::error::{Error, Result};

#[derive(Debug)]
pub enum Received {
    Message(ClientMessage),
    /// A message that failed to decode; the connection stays usable.
    Invalid(Error),
    Timeout,
    Closed,
}

/// A bidirectional message channel to one client.
pub trait Transport: Send {
    fn send(&mut self, msg: &ServerMessage) -> Result<()>;

    /// Waits up to `timeout` for one message; `None` blocks, a zero duration
    /// polls.
    fn recv(&mut self, timeout: Option<Duration>) -> Result<Received>;
}

fn net(e: impl std::fmt::Display) -> Error {
    Error::Net(e.to_string())
}

fn is_timeout(e: &std::io::Error) -> bool {
    matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut)
}

fn set_wait(stream: &TcpStream, timeout: Option<Duration>) -> Result<()> {
    match timeout {
        Some(d) if d.is_zero() => stream.set_nonblocking(true).map_err(net),
        other => {
            stream.set_nonblocking(false).map_err(net)?;
            stream.set_read_timeout(other).map_err(net)
        }
    }
}

/// Newline-delimited JSON over a raw TCP stream.
pub struct LineTransport {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    pending: Vec<u8>,
}

impl LineTransport {
    pub fn new(stream: TcpStream) -> Result<Self> {
        let writer = stream.try_clone().map_err(net)?;
        Ok(Self {
            reader: BufReader::new(stream),
            writer,
            pending: Vec::new(),
        })
    }
}

impl Transport for LineTransport {
    fn send(&mut self, msg: &ServerMessage) -> Result<()> {
        let mut line = encode(msg);
        line.push('\n');
        self.writer.write_all(line.as_bytes()).map_err(net)
    }

    fn recv(&mut self, timeout: Option<Duration>) -> Result<Received> {
        let deadline = timeout.map(|t| Instant::now() + t);
        loop {
            let wait = deadline.map(|d| d.saturating_duration_since(Instant::now()));
            set_wait(self.reader.get_ref(), wait)?;
            let result = self.reader.read_until(b'\n', &mut self.pending);
            // The writer shares the socket; restore blocking mode for it.
            set_wait(self.reader.get_ref(), None)?;
            match result {
                Ok(0) => return Ok(Received::Closed),
                Ok(_) if self.pending.ends_with(b"\n") => {
                    let line = std::mem::take(&mut self.pending);
                    let text = String::from_utf8_lossy(&line);
                    if text.trim().is_empty() {
                        continue;
                    }
                    return Ok(match decode_client(&text) {
                        Ok(m) => Received::Message(m),
                        Err(e) => Received::Invalid(e),
                    });
                }
                Ok(_) => return Ok(Received::Closed),
                Err(e) if is_timeout(&e) => return Ok(Received::Timeout),
                Err(e) if e.kind() == ErrorKind::Interrupted => continue,
                Err(e) if matches!(e.kind(), ErrorKind::ConnectionReset | ErrorKind::BrokenPipe) => {
                    return Ok(Received::Closed)
                }
                Err(e) => return Err(net(e)),
            }
        }
    }
}

/// One JSON message per WebSocket text frame.
pub struct WsTransport {
    socket: WebSocket<TcpStream>,
}

impl WsTransport {
    /// Completes the server side of the handshake.
    pub fn accept(stream: TcpStream) -> Result<Self> {
        stream.set_nonblocking(false).map_err(net)?;
        let socket = tungstenite::accept(stream).map_err(net)?;
        Ok(Self { socket })
    }
}

impl Transport for WsTransport {
    fn send(&mut self, msg: &ServerMessage) -> Result<()> {
        set_wait(self.socket.get_ref(), None)?;
        self.socket.send(Message::text(encode(msg))).map_err(net)
    }

    fn recv(&mut self, timeout: Option<Duration>) -> Result<Received> {
        let deadline = timeout.map(|t| Instant::now() + t);
        loop {
            let wait = deadline.map(|d| d.saturating_duration_since(Instant::now()));
            set_wait(self.socket.get_ref(), wait)?;
            let result = self.socket.read();
            set_wait(self.socket.get_ref(), None)?;
            match result {
                Ok(Message::Text(text)) => {
                    return Ok(match decode_client(&text) {
                        Ok(m) => Received::Message(m),
                        Err(e) => Received::Invalid(e),
                    })
                }
                Ok(Message::Binary(_)) => {
                    return Ok(Received::Invalid(Error::Protocol("binary frames are not used".into())))
                }
                Ok(Message::Close(_)) => return Ok(Received::Closed),
                Ok(_) => continue,
                Err(tungstenite::Error::Io(e)) if is_timeout(&e) => return Ok(Received::Timeout),
                Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => {
                    return Ok(Received::Closed)
                }
                Err(tungstenite::Error::Io(e))
                    if matches!(e.kind(), ErrorKind::ConnectionReset | ErrorKind::BrokenPipe) =>
                {
                    return Ok(Received::Closed)
                }
                Err(e) => return Err(net(e)),
            }
        }
    }
}

/// Picks the transport from the first bytes: an HTTP `GET` starts a
/// WebSocket handshake, anything else is line-delimited JSON.
pub fn detect(stream: TcpStream) -> Result<Box<dyn Transport>> {
    stream.set_read_timeout(Some(Duration::from_secs(10))).map_err(net)?;
    let mut head = [0u8; 4];
    let n = loop {
        match stream.peek(&mut head) {
            Ok(n) if n >= 4 || n == 0 => break n,
            Ok(n) if head[..n] != b"GET "[..n] => break n,
            Ok(_) => std::thread::sleep(Duration::from_millis(1)),
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(net(e)),
        }
    };
    stream.set_read_timeout(None).map_err(net)?;
    if n == 4 && &head == b"GET " {
        Ok(Box::new(WsTransport::accept(stream)?))
    } else {
        Ok(Box::new(LineTransport::new(stream)?))
    }
}
