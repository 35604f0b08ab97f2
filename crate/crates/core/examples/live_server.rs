//! Serves the bridge scenario on a web socket, connects as a client, moves an
//! anchor and watches it land in the next frames.
//!
//! Pass `--stay` to keep serving on port 8080 afterwards.

use std::time::Duration;

use futures::{SinkExt, StreamExt};
use grfswarm::presets;
use grfswarm::service::{spawn_server, Envelope, ServeConfig};
use tokio_tungstenite::tungstenite::Message;

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let stay = std::env::args().any(|a| a == "--stay");
    let addr = if stay { "127.0.0.1:8080" } else { "127.0.0.1:0" };
    let server = spawn_server(ServeConfig::new(presets::bridge(), addr.parse()?)).await?;
    let url = format!("ws://{}/ws", server.local_addr);
    println!("serving {url}");

    let (mut ws, _) = tokio_tungstenite::connect_async(&url).await?;
    let mut moved = false;
    let mut frames = 0;
    while let Some(msg) = tokio::time::timeout(Duration::from_secs(5), ws.next()).await? {
        let Message::Text(text) = msg? else { continue };
        match serde_json::from_str::<Envelope>(text.as_str())? {
            Envelope::Frame(f) => {
                frames += 1;
                let anchor = f.robots.iter().rev().find(|r| r.is_anchor).unwrap();
                println!(
                    "tick {:>4}  bonds {:>2}  molecules {}  anchor {} at ({:.2}, {:.2})",
                    f.tick, f.bonds.len(), f.metrics.molecule_count, anchor.id, anchor.x, anchor.y
                );
                if frames == 5 && !moved {
                    let cmd = format!(r#"{{"kind":"move_anchor","id":{},"x":3.5,"y":3.0}}"#, anchor.id);
                    ws.send(Message::Text(cmd.into())).await?;
                    moved = true;
                }
                if frames == 12 {
                    break;
                }
            }
            Envelope::Error(e) => println!("server error: {}", e.message),
            Envelope::Command(_) => {}
        }
    }
    ws.close(None).await.ok();

    if stay {
        server.wait().await?;
    } else {
        server.shutdown().await;
    }
    Ok(())
}
