//! Session server between the simulator and a browser or scripted client.
//! See `docs/protocol.md` for the wire format.

mod protocol;
mod server;
mod session;
mod transport;

pub use protocol::{
    decode_client, decode_server, encode, ActionMessage, ClientMessage, EndMessage, ErrorMessage,
    FrameMessage, HelloMessage, Hud, JoinMessage, QuitMessage, ServerMessage, SessionMode,
    WatchSource, PROTOCOL_VERSION,
};
pub use server::{run_connection, BridgeConfig, Server};
pub use session::{Disposition, Session, SessionSpec};
pub use transport::{detect, LineTransport, Received, Transport, WsTransport};
