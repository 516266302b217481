//! Operational shell around `signpipe-core`: the streaming line protocol and
//! its TCP/WebSocket transports, file formats, configuration and the CLI.

pub mod cli;
pub mod config;
pub mod defaults;
pub mod persist;
pub mod server;
pub mod session;

pub use config::Config;
pub use persist::PersistError;
pub use server::Server;
pub use session::{Session, SessionContext};
