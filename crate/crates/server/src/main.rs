use clap::Parser;
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(version, about = "HTTP/JSON service for the token pruning engine")]
struct Args {
    /// Address to bind.
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: String,
}

#[tokio::main]
async fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .init();
    let args = Args::parse();
    let listener = match tokio::net::TcpListener::bind(&args.addr).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("cannot bind {}: {e}", args.addr);
            std::process::exit(1);
        }
    };
    tracing::info!("listening on {}", listener.local_addr().expect("bound address"));
    if let Err(e) = tokprune_server::serve(listener).await {
        eprintln!("server error: {e}");
        std::process::exit(1);
    }
}
