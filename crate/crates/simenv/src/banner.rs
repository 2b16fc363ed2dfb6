//! Raw TCP listener that greets each client with a fixed banner, for
//! exercising non-HTTP recon paths (FTP, SSH).

use std::time::Duration;

use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpListener;
use tokio::task::JoinHandle;

pub const FTP_BANNER: &str = "220 (vsFTPd 3.0.3)\r\n";

/// Listens on `host:port` (0 = ephemeral) and returns the bound port.
pub async fn serve_banner(host: &str, port: u16, banner: &str) -> std::io::Result<(u16, JoinHandle<()>)> {
    let listener = TcpListener::bind((host, port)).await?;
    let bound = listener.local_addr()?.port();
    let banner = banner.to_string();
    let task = tokio::spawn(async move {
        while let Ok((mut stream, _)) = listener.accept().await {
            let banner = banner.clone();
            tokio::spawn(async move {
                if stream.write_all(banner.as_bytes()).await.is_err() {
                    return;
                }
                // give the client a moment to send, then hang up
                let mut buf = [0u8; 1024];
                let _ = tokio::time::timeout(Duration::from_millis(100), stream.read(&mut buf)).await;
            });
        }
    });
    Ok((bound, task))
}
