//! Network transports for the line protocol: newline-delimited JSON over TCP,
//! and optionally the same lines carried as WebSocket text messages.

use std::io;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use tokio::io::{AsyncBufRead, AsyncBufReadExt, AsyncWrite, AsyncWriteExt, BufReader, BufWriter};
use tokio::net::{TcpListener, TcpStream};

use crate::session::{Session, SessionContext};

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub struct Server {
    ctx: Arc<SessionContext>,
    tcp: TcpListener,
    ws: Option<TcpListener>,
}

async fn bind(addr: &str) -> Result<TcpListener, ServeError> {
    TcpListener::bind(addr).await.map_err(|source| ServeError::Bind { addr: addr.to_string(), source })
}

impl Server {
    pub async fn bind(ctx: SessionContext, addr: &str, ws_addr: Option<&str>) -> Result<Self, ServeError> {
        let tcp = bind(addr).await?;
        let ws = match ws_addr {
            Some(a) => Some(bind(a).await?),
            None => None,
        };
        Ok(Server { ctx: Arc::new(ctx), tcp, ws })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.tcp.local_addr()
    }

    pub fn ws_addr(&self) -> Option<SocketAddr> {
        self.ws.as_ref().and_then(|l| l.local_addr().ok())
    }

    /// Serves until the listeners fail; each connection runs on its own task.
    pub async fn run(self) -> Result<(), ServeError> {
        if let Some(ws) = self.ws {
            let app = Router::new().route("/ws", get(upgrade)).with_state(self.ctx.clone());
            tokio::spawn(async move {
                if let Err(e) = axum::serve(ws, app).await {
                    tracing::error!("websocket listener stopped: {e}");
                }
            });
        }
        loop {
            let (stream, peer) = self.tcp.accept().await?;
            let ctx = self.ctx.clone();
            tokio::spawn(async move {
                let session = ctx.open();
                let id = session.id();
                tracing::info!(session = id, %peer, "session opened");
                match serve_tcp(stream, session).await {
                    Ok(stats) => tracing::info!(session = id, ?stats, "session closed"),
                    Err(e) => tracing::info!(session = id, "session dropped: {e}"),
                }
            });
        }
    }
}

enum LineRead {
    Line,
    TooLong(usize),
    Eof,
}

/// Reads one '\n'-terminated line into `buf` without ever holding more than
/// `max` bytes; the tail of an oversized line is discarded.
async fn read_line_bounded<R: AsyncBufRead + Unpin>(r: &mut R, buf: &mut Vec<u8>, max: usize) -> io::Result<LineRead> {
    buf.clear();
    let mut total = 0usize;
    let mut too_long = false;
    loop {
        let chunk = r.fill_buf().await?;
        if chunk.is_empty() {
            return Ok(match (total, too_long) {
                (0, _) => LineRead::Eof,
                (n, true) => LineRead::TooLong(n),
                _ => LineRead::Line,
            });
        }
        let (take, done) = match chunk.iter().position(|&b| b == b'\n') {
            Some(i) => (i, true),
            None => (chunk.len(), false),
        };
        total += take;
        if !too_long {
            if buf.len() + take > max {
                too_long = true;
                buf.clear();
            } else {
                buf.extend_from_slice(&chunk[..take]);
            }
        }
        r.consume(take + usize::from(done));
        if done {
            return Ok(if too_long { LineRead::TooLong(total) } else { LineRead::Line });
        }
    }
}

async fn write_lines<W: AsyncWrite + Unpin>(w: &mut W, lines: &[String]) -> io::Result<()> {
    for l in lines {
        w.write_all(l.as_bytes()).await?;
        w.write_all(b"\n").await?;
    }
    w.flush().await
}

async fn serve_tcp(stream: TcpStream, mut session: Session) -> io::Result<crate::session::SessionStats> {
    stream.set_nodelay(true)?;
    let (r, w) = stream.into_split();
    let mut reader = BufReader::new(r);
    let mut writer = BufWriter::new(w);
    let mut buf = Vec::new();
    let limit = session.max_line_bytes();
    loop {
        let out = match read_line_bounded(&mut reader, &mut buf, limit).await? {
            LineRead::Eof => break,
            LineRead::Line => session.handle_line(&buf),
            LineRead::TooLong(n) => session.too_long(n),
        };
        write_lines(&mut writer, &out).await?;
    }
    // The peer may only have closed its sending half; deliver the flush if we can.
    let out = session.close();
    let _ = write_lines(&mut writer, &out).await;
    let _ = writer.shutdown().await;
    Ok(session.stats())
}

async fn upgrade(ws: WebSocketUpgrade, State(ctx): State<Arc<SessionContext>>) -> Response {
    ws.on_upgrade(move |socket| serve_ws(socket, ctx))
}

async fn serve_ws(mut socket: WebSocket, ctx: Arc<SessionContext>) {
    let mut session = ctx.open();
    tracing::info!(session = session.id(), "websocket session opened");
    while let Some(Ok(msg)) = socket.recv().await {
        let bytes = match &msg {
            Message::Text(t) => t.as_bytes(),
            Message::Binary(b) => b.as_ref(),
            Message::Close(_) => break,
            _ => continue,
        };
        let mut out = Vec::new();
        let lines: Vec<&[u8]> = bytes.split(|&b| b == b'\n').filter(|l| !l.is_empty()).collect();
        if lines.is_empty() {
            out.extend(session.handle_line(b""));
        }
        for line in lines {
            out.extend(session.handle_line(line));
        }
        for line in out {
            if socket.send(Message::Text(line.into())).await.is_err() {
                return;
            }
        }
    }
    for line in session.close() {
        if socket.send(Message::Text(line.into())).await.is_err() {
            break;
        }
    }
    tracing::info!(session = session.id(), stats = ?session.stats(), "websocket session closed");
}
