use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use tokprune_client::Client;
use tokprune_core::api::{CalibrateRequest, RunRequest, VerifyRequest};
use tokprune_core::config::RunConfig;
use tokprune_core::report::{forward_artifacts, prune_viz_artifacts, schedule_artifacts, write_artifacts, Artifact};
use tokprune_core::verify::{self, VerifyOptions, VerifyReport};
use tokprune_core::Segment;

#[derive(Parser)]
#[command(name = "tokprune", version, about = "Token elimination harness for one-stream trackers")]
struct Cli {
    /// Run against a tokprune-server at this URL instead of in-process.
    #[arg(long, global = true)]
    server: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-layer token counts, averages, and MACs (no forward pass).
    Schedule(RunArgs),
    /// Run the encoder and write trace, kept-index map, restored features, and masks.
    Forward(RunArgs),
    /// Like `forward`, but only the keep masks.
    PruneViz(RunArgs),
    /// Run the acceptance checks; exits 1 if any fails.
    Verify(VerifyArgs),
    /// Search the keep-ratio grid for a target final token count.
    Calibrate(CalibrateArgs),
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Preset name, e.g. ostrack256-utp. Repeat for a batch.
    #[arg(long)]
    preset: Vec<String>,
    /// JSON run config. Repeat for a batch.
    #[arg(long)]
    config: Vec<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; a batch writes one subdirectory per config.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Drop every prune event.
    #[arg(long)]
    no_prune: bool,
    /// Configs evaluated in parallel in a batch.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Override the encoder width (token geometry is unchanged).
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    heads: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Replace the SR keep ratio in the token-table checks (negative control).
    #[arg(long)]
    keep_ratio_sr: Option<f64>,
    #[arg(long, default_value_t = 100)]
    instances: usize,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long, default_value = "ostrack256")]
    preset: String,
    #[arg(long, default_value = "sr")]
    segment: Segment,
    #[arg(long)]
    target: usize,
    /// Comma-separated event layers; defaults to the preset's schedule.
    #[arg(long, value_delimiter = ',')]
    layers: Option<Vec<usize>>,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy)]
enum Op {
    Schedule,
    Forward,
    PruneViz,
}

enum Backend {
    Local,
    Remote { client: Client, rt: tokio::runtime::Runtime },
}

impl Backend {
    fn new(server: Option<String>) -> Result<Self> {
        Ok(match server {
            None => Backend::Local,
            Some(url) => Backend::Remote {
                client: Client::new(url),
                rt: tokio::runtime::Builder::new_multi_thread().enable_all().build()?,
            },
        })
    }

    /// Returns the artifacts and a one-line summary.
    fn run(&self, op: Op, req: &RunRequest) -> Result<(Vec<Artifact>, String)> {
        let label = req.label();
        match self {
            Backend::Local => {
                let cfg = req.resolve()?;
                Ok(match op {
                    Op::Schedule => {
                        let (r, a) = schedule_artifacts(&label, &cfg)?;
                        (a, schedule_line(&label, r.avg_vis_tok, r.cmp_vis_tok, r.reduction_pct))
                    }
                    Op::Forward => {
                        let (doc, a) = forward_artifacts(&label, &cfg)?;
                        (a, format!("{label}: {} layers, {} SR tokens survive", doc.layers.len(), doc.final_sr_tokens))
                    }
                    Op::PruneViz => {
                        let a = prune_viz_artifacts(&label, &cfg)?;
                        let n = a.len();
                        (a, format!("{label}: {n} masks"))
                    }
                })
            }
            Backend::Remote { client, rt } => rt.block_on(async {
                Ok(match op {
                    Op::Schedule => {
                        let r = client.schedule(req).await?;
                        let line =
                            schedule_line(&r.label, r.report.avg_vis_tok, r.report.cmp_vis_tok, r.report.reduction_pct);
                        (r.artifacts, line)
                    }
                    Op::Forward => {
                        let r = client.forward(req).await?;
                        let line = format!(
                            "{}: {} layers, {} SR tokens survive",
                            r.label,
                            r.trace.layers.len(),
                            r.trace.final_sr_tokens
                        );
                        (r.artifacts, line)
                    }
                    Op::PruneViz => {
                        let r = client.prune_viz(req).await?;
                        let line = format!("{}: {} masks", r.label, r.artifacts.len());
                        (r.artifacts, line)
                    }
                })
            }),
        }
    }
}

fn schedule_line(label: &str, avg: f64, cmp: usize, reduction: f64) -> String {
    use tokprune_core::budget::round_to;
    format!(
        "{label}: avg_vis_tok={:.0} ({:.1}) cmp_vis_tok={cmp} mac_reduction={reduction:.2}%",
        round_to(avg, 0),
        round_to(avg, 1)
    )
}

fn requests(args: &RunArgs) -> Result<Vec<RunRequest>> {
    let base = RunRequest {
        no_prune: args.no_prune,
        seed: args.seed,
        embed_dim: args.embed_dim,
        num_heads: args.heads,
        ..RunRequest::default()
    };
    let mut out: Vec<RunRequest> =
        args.preset.iter().map(|p| RunRequest { preset: Some(p.clone()), ..base.clone() }).collect();
    for path in &args.config {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg = RunConfig::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
        let label = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        out.push(RunRequest { config: Some(cfg), label, ..base.clone() });
    }
    if out.is_empty() {
        bail!("give at least one --preset or --config");
    }
    let mut labels: Vec<String> = out.iter().map(RunRequest::label).collect();
    labels.sort();
    labels.dedup();
    if labels.len() != out.len() {
        bail!("batch entries must have distinct labels");
    }
    Ok(out)
}

fn out_dir(args: &RunArgs, req: &RunRequest, batch: bool) -> PathBuf {
    if batch {
        args.out.join(req.label())
    } else {
        args.out.clone()
    }
}

/// Evaluates each request, at most `jobs` at a time, each into its own directory.
fn run_batch(backend: &Backend, op: Op, args: &RunArgs) -> Result<()> {
    let reqs = requests(args)?;
    let batch = reqs.len() > 1;
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<String>>>> = Mutex::new((0..reqs.len()).map(|_| None).collect());
    let work = || loop {
        let i = next.fetch_add(1, Ordering::SeqCst);
        let Some(req) = reqs.get(i) else { break };
        let r = backend.run(op, req).and_then(|(artifacts, line)| {
            let dir = out_dir(args, req, batch);
            write_to(&dir, &artifacts)?;
            Ok(line)
        });
        results.lock().unwrap()[i] = Some(r);
    };
    std::thread::scope(|s| {
        for _ in 0..args.jobs.clamp(1, reqs.len()) {
            s.spawn(work);
        }
    });
    let mut failed = 0;
    for (req, r) in reqs.iter().zip(results.into_inner().unwrap()) {
        match r.expect("every job ran") {
            Ok(line) => println!("{line}"),
            Err(e) => {
                eprintln!("error: {}: {e:#}", req.label());
                failed += 1;
            }
        }
    }
    if failed > 0 {
        bail!("{failed} of {} configs failed", reqs.len());
    }
    Ok(())
}

fn write_to(dir: &Path, artifacts: &[Artifact]) -> Result<()> {
    write_artifacts(dir, artifacts).with_context(|| format!("writing {}", dir.display()))
}

fn verify_cmd(backend: &Backend, args: &VerifyArgs) -> Result<bool> {
    let options = VerifyOptions { keep_ratio_sr: args.keep_ratio_sr, instances: args.instances, samples: args.samples };
    let report: VerifyReport = match backend {
        Backend::Local => verify::run(&options),
        Backend::Remote { client, rt } => rt.block_on(client.verify(&VerifyRequest { options }))?.report,
    };
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print!("{}", report.render());
    }
    Ok(report.passed())
}

fn calibrate_cmd(backend: &Backend, args: &CalibrateArgs) -> Result<()> {
    let req = CalibrateRequest {
        preset: args.preset.clone(),
        segment: args.segment,
        target: args.target,
        event_layers: args.layers.clone(),
    };
    let resp = match backend {
        Backend::Local => req.run()?,
        Backend::Remote { client, rt } => rt.block_on(client.calibrate(&req))?,
    };
    if args.json {
        println!("{}", serde_json::to_string_pretty(&resp)?);
        return Ok(());
    }
    println!("{} {} layers {:?} target {}", resp.preset, resp.segment, resp.event_layers, resp.target);
    if resp.solutions.is_empty() {
        println!("no grid point reaches the target");
    }
    for s in &resp.solutions {
        println!("keep_ratio={} rounding={:?}", s.keep_ratio, s.rounding);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = Backend::new(cli.server).and_then(|backend| match &cli.command {
        Command::Schedule(a) => run_batch(&backend, Op::Schedule, a).map(|_| true),
        Command::Forward(a) => run_batch(&backend, Op::Forward, a).map(|_| true),
        Command::PruneViz(a) => run_batch(&backend, Op::PruneViz, a).map(|_| true),
        Command::Verify(a) => verify_cmd(&backend, a),
        Command::Calibrate(a) => calibrate_cmd(&backend, a).map(|_| true),
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
