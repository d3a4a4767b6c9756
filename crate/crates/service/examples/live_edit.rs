//! Drives a headless session with the same JSON messages a browser client
//! sends: paints an obstacle into a running flow, then prints how far the
//! velocity frame moved. Uses an untrained model unless a checkpoint is
//! given.
//!
//! `cargo run --example live_edit -p hermite-pde-service -- [checkpoint]`

use std::path::Path;

use hermite_pde::field::{FieldLayout, PdeKind};
use hermite_pde::model::{Checkpoint, PdeModel};
use hermite_pde::nn::Architecture;
use hermite_pde_service::protocol::{decode_frame, ClientMessage, ServerMessage};
use hermite_pde_service::session::{default_domain, Session};

fn frame(session: &Session) -> Vec<f32> {
    match session.frame().expect("frame") {
        ServerMessage::Frame { data, .. } => decode_frame(&data).expect("valid payload"),
        ServerMessage::Error { msg } => panic!("{msg}"),
    }
}

fn main() -> hermite_pde_service::Result<()> {
    let model = match std::env::args().nth(1) {
        Some(path) => Checkpoint::load(Path::new(&path))?.model,
        None => PdeModel::new(FieldLayout::default_flow(), Architecture::Plain { hidden: 8, layers: 2 }, 1)?,
    };
    let (w, h) = (64, 32);
    let mut session = Session::new(model, default_domain(PdeKind::Flow, w, h))?;
    session.apply(&ClientMessage::parse(r#"{"type":"select","field":"v_mag","upsample":1}"#)?)?;
    for _ in 0..20 {
        session.step()?;
    }
    let before = frame(&session);

    // a disk of radius 3 halfway down the channel
    let cells: Vec<[i64; 2]> = (-3i64..=3)
        .flat_map(|dy| (-3i64..=3).map(move |dx| [dx, dy]))
        .filter(|[dx, dy]| dx * dx + dy * dy <= 9)
        .map(|[dx, dy]| [40 + dx, 16 + dy])
        .collect();
    let paint = format!(r#"{{"type":"paint","cells":{cells:?},"value":"solid"}}"#);
    session.apply(&ClientMessage::parse(&paint)?)?;

    println!("painted {} cells into the {w}x{h} channel", cells.len());
    for _ in 0..5 {
        session.step()?;
        let now = frame(&session);
        let diff = now.iter().zip(&before).map(|(a, b)| (a - b).abs()).fold(0.0f32, f32::max);
        println!("step {}: max |frame change| {diff:.4e}", session.steps());
    }
    Ok(())
}
