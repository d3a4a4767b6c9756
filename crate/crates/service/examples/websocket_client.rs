//! Starts the WebSocket server in-process on an ephemeral port, connects a
//! client, switches the frame field and prints a few decoded frames.
//!
//! `cargo run --example websocket_client -p hermite-pde-service`

use futures_util::{SinkExt, StreamExt};
use hermite_pde::field::{FieldLayout, PdeKind};
use hermite_pde::model::PdeModel;
use hermite_pde::nn::Architecture;
use hermite_pde_service::protocol::{decode_frame, ClientMessage, ServerMessage};
use hermite_pde_service::session::default_domain;
use tokio::net::TcpListener;
use tokio_tungstenite::tungstenite::Message;

#[tokio::main(flavor = "current_thread")]
async fn main() -> hermite_pde_service::Result<()> {
    let model = PdeModel::new(FieldLayout::default_wave(), Architecture::Plain { hidden: 8, layers: 2 }, 3)?;
    let listener = TcpListener::bind("127.0.0.1:0").await?;
    let addr = listener.local_addr()?;
    tokio::spawn(hermite_pde_service::server::serve(listener, model, default_domain(PdeKind::Wave, 32, 32)));

    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}")).await?;
    let select = ClientMessage::Select {
        field: "v_z".into(),
        upsample: Some(2.0),
        max_rate: Some(20.0),
    };
    println!("-> {}", select.to_json());
    ws.send(Message::Text(select.to_json())).await?;

    let mut shown = 0;
    while shown < 5 {
        let Some(msg) = ws.next().await else { break };
        let Message::Text(text) = msg? else { continue };
        match ServerMessage::parse(&text)? {
            ServerMessage::Frame { step, field, w, h, data } if field == "v_z" => {
                let values = decode_frame(&data)?;
                let peak = values.iter().fold(0.0f32, |m, v| m.max(v.abs()));
                println!("<- frame step {step}: {field} {w}x{h}, max |v_z| {peak:.4}");
                shown += 1;
            }
            ServerMessage::Frame { .. } => {}
            ServerMessage::Error { msg } => println!("<- error: {msg}"),
        }
    }
    ws.send(Message::Text(ClientMessage::Pause.to_json())).await?;
    Ok(())
}
