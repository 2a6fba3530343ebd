use std::net::SocketAddr;
use std::path::PathBuf;

use clap::Args;

use molgen_service::{serve, ServiceConfig};

use crate::{data_err, usage_err, Context, CliError, Report};

/// Flags override the `MOLGEN_*` environment variables.
#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    bind: Option<SocketAddr>,
    /// Directory for projects, tasks, results and datasets.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Directory of static files (the web UI) served at `/`.
    #[arg(long)]
    static_dir: Option<PathBuf>,
}

pub fn run(ctx: &Context, a: &ServeArgs) -> Result<Report, CliError> {
    let mut config = ServiceConfig::from_env().map_err(usage_err)?;
    if let Some(b) = a.bind {
        config.bind = b;
    }
    if let Some(d) = &a.data_dir {
        config.data_dir = d.clone();
    }
    if let Some(s) = &a.static_dir {
        config.static_dir = Some(s.clone());
    }
    if let Some(w) = ctx.cli.workers {
        config.workers = w.max(1);
    }
    let _ = tracing_subscriber::fmt().with_writer(std::io::stderr).try_init();
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(data_err)?;
    runtime.block_on(serve(&config)).map_err(data_err)?;
    Ok(Report::ok(String::new(), serde_json::json!({ "stopped": true })))
}
