//! WebSocket front end for [`Session`].
//!
//! Each connection gets its own session owned by a dedicated thread. The
//! socket reader only forwards parsed messages into the owner's queue; the
//! owner applies queued messages, steps, and hands frames back to the writer.

use std::sync::mpsc as std_mpsc;
use std::time::{Duration, Instant};

use futures_util::{SinkExt, StreamExt};
use hermite_pde::domain::DomainSpec;
use hermite_pde::model::PdeModel;
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::mpsc;
use tokio_tungstenite::tungstenite::Message;

use crate::error::Result;
use crate::protocol::{ClientMessage, ServerMessage};
use crate::session::Session;

/// Accepts clients one after another, each with a fresh session built from
/// `model` and `domain`. Runs until the listener fails.
pub async fn serve(listener: TcpListener, model: PdeModel<f32>, domain: DomainSpec) -> Result<()> {
    loop {
        let (stream, _) = listener.accept().await?;
        let session = Session::new(model.clone(), domain.clone())?;
        if let Err(e) = handle_client(stream, session).await {
            eprintln!("session ended with error: {e}");
        }
    }
}

/// Runs one session over an accepted TCP stream until the client leaves.
pub async fn handle_client(stream: TcpStream, session: Session) -> Result<()> {
    let ws = tokio_tungstenite::accept_async(stream).await?;
    let (mut sink, mut source) = ws.split();
    let (in_tx, in_rx) = std_mpsc::channel::<ClientMessage>();
    let (out_tx, mut out_rx) = mpsc::unbounded_channel::<ServerMessage>();

    let owner = std::thread::spawn({
        let out_tx = out_tx.clone();
        move || run_owner(session, in_rx, out_tx)
    });

    let writer = tokio::spawn(async move {
        while let Some(msg) = out_rx.recv().await {
            if sink.send(Message::Text(msg.to_json())).await.is_err() {
                break;
            }
        }
        let _ = sink.close().await;
    });

    while let Some(msg) = source.next().await {
        let text = match msg {
            Ok(Message::Text(t)) => t.to_string(),
            Ok(Message::Close(_)) | Err(_) => break,
            Ok(Message::Binary(_)) => {
                let _ = out_tx.send(ServerMessage::Error {
                    msg: "binary messages are not supported".into(),
                });
                continue;
            }
            Ok(_) => continue,
        };
        match ClientMessage::parse(&text) {
            Ok(m) => {
                if in_tx.send(m).is_err() {
                    break;
                }
            }
            Err(e) => {
                let _ = out_tx.send(ServerMessage::Error { msg: e.to_string() });
            }
        }
    }
    drop(in_tx);
    drop(out_tx);
    let _ = tokio::task::spawn_blocking(move || owner.join()).await;
    let _ = writer.await;
    Ok(())
}

/// Session owner loop: drain the queue, then step and emit a frame unless
/// paused. Returns when the queue's sender is gone.
fn run_owner(mut session: Session, inbox: std_mpsc::Receiver<ClientMessage>, out: mpsc::UnboundedSender<ServerMessage>) {
    let send = |m: ServerMessage| out.send(m).is_ok();
    let mut pending: Option<ClientMessage> = None;
    loop {
        let started = Instant::now();
        let mut want_frame = false;
        let mut received = false;
        loop {
            let next = if let Some(m) = pending.take() {
                Ok(m)
            } else if session.is_paused() && !received {
                match inbox.recv() {
                    Ok(m) => Ok(m),
                    Err(_) => return,
                }
            } else {
                inbox.try_recv()
            };
            received = true;
            match next {
                Ok(msg) => match session.apply(&msg) {
                    Ok(()) => want_frame |= matches!(msg, ClientMessage::Paint { .. } | ClientMessage::Select { .. }),
                    Err(e) => {
                        if !send(ServerMessage::Error { msg: e.to_string() }) {
                            return;
                        }
                    }
                },
                Err(std_mpsc::TryRecvError::Empty) => break,
                Err(std_mpsc::TryRecvError::Disconnected) => return,
            }
        }
        if !session.is_paused() {
            if let Err(e) = session.step() {
                let _ = send(ServerMessage::Error { msg: e.to_string() });
                session.apply(&ClientMessage::Pause).expect("pause always applies");
            }
            want_frame = true;
        }
        if want_frame {
            let frame = session.frame().unwrap_or_else(|e| ServerMessage::Error { msg: e.to_string() });
            if !send(frame) {
                return;
            }
        }
        if let Some(rate) = session.max_rate() {
            let period = Duration::from_secs_f64(1.0 / rate);
            if let Some(rest) = period.checked_sub(started.elapsed()) {
                // wakes early on new messages
                match inbox.recv_timeout(rest) {
                    Ok(msg) => pending = Some(msg),
                    Err(std_mpsc::RecvTimeoutError::Timeout) => {}
                    Err(std_mpsc::RecvTimeoutError::Disconnected) => return,
                }
            }
        }
    }
}
