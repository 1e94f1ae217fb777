use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use sensedeploy_bench::{
    run_design, scratch_root, summarize, write_failures, write_records, write_summary,
    ExperimentDesign, HarnessConfig,
};
use sensedeploy_core::analysis::{
    rank_cities, read_readings_csv, write_ranking_csv, Disease, DiseaseProfile,
};
use sensedeploy_core::marshal::{MarshalOptions, MeasurementType};
use sensedeploy_core::repository::owm_fixture_lines;
use sensedeploy_core::selector::SelectorKind;
use sensedeploy_core::topsis::{rank, read_matrix_csv, write_result_csv, CriterionSpec};
use sensedeploy_core::Region;
use sensedeploy_deploy::agent::spawn_agent;
use sensedeploy_deploy::api::CreatedJob;
use sensedeploy_deploy::{
    serve, spawn_fleet, JobRequest, JobView, Orchestrator, OrchestratorConfig,
};

#[derive(Parser)]
#[command(
    name = "sensedeploy",
    version,
    about = "Select cloud sensors, build virtual-sensor descriptors and deploy them"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the orchestrator HTTP API.
    Serve(ServeArgs),
    /// Run one device agent.
    Agent {
        #[arg(long, default_value_t = 9100)]
        port: u16,
        #[arg(long, default_value = "agent-data")]
        dir: PathBuf,
    },
    /// Run several agents on consecutive ports.
    Fleet {
        #[arg(long, default_value_t = 4)]
        count: usize,
        #[arg(long, default_value_t = 9100)]
        base_port: u16,
        #[arg(long, default_value = "fleet-data")]
        dir: PathBuf,
    },
    /// Submit a deploy job and print its final status as JSON.
    Deploy(DeployArgs),
    /// Run the factorial timing experiment.
    Bench(BenchArgs),
    /// Rank cities by weather suitability for a disease.
    Report {
        #[arg(long)]
        disease: Disease,
        #[arg(long)]
        input: PathBuf,
    },
    /// Rank the options of a decision-matrix CSV.
    Topsis {
        #[arg(long)]
        input: PathBuf,
    },
    /// Write weather-service shaped records for a region.
    GenFixture {
        #[arg(long, value_parser = parse_region)]
        region: Region,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        first_id: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
    #[arg(long, default_value = "orchestrator-data")]
    data_dir: PathBuf,
    /// Directory of `*.owm.ndjson` files served as the `fixture` source.
    #[arg(long)]
    fixtures: Option<PathBuf>,
    /// Archive URI base announced to devices.
    #[arg(long)]
    public_url: Option<String>,
    #[arg(long, default_value_t = 60)]
    ack_timeout_secs: u64,
}

#[derive(Args)]
struct DeployArgs {
    /// `europe`, `north-america`, `world` or `min_lon,max_lon,min_lat,max_lat`.
    #[arg(long, value_parser = parse_region)]
    region: Region,
    #[arg(long)]
    count: usize,
    /// Agent base URLs.
    #[arg(long, value_delimiter = ',')]
    targets: Vec<String>,
    /// Start this many local agents instead of naming targets.
    #[arg(long, conflicts_with = "targets")]
    local_agents: Option<usize>,
    #[arg(long, default_value = "topsis")]
    selector: SelectorKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "synthetic")]
    source: String,
    #[arg(long)]
    fixtures: Option<PathBuf>,
    #[arg(long)]
    fetch_limit: Option<usize>,
    #[arg(long)]
    per_device_limit: Option<usize>,
    /// Comma-separated `name:max|min` list; all six context criteria by default.
    #[arg(long, value_delimiter = ',')]
    criteria: Option<Vec<CriterionSpec>>,
    #[arg(long, default_value = "temperature")]
    measurement_type: MeasurementType,
    #[arg(long, default_value_t = 168)]
    history_hours: u32,
    /// Orchestrator base URL; runs one in-process when omitted.
    #[arg(long)]
    server: Option<String>,
    #[arg(long, default_value_t = 60)]
    ack_timeout_secs: u64,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 4, 16])]
    devices: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [1000usize, 20_000, 40_000, 60_000, 80_000, 100_000])]
    sensors: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    reps: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Use running agents instead of local fleets.
    #[arg(long, value_delimiter = ',')]
    remote_targets: Option<Vec<String>>,
    /// Address the orchestrator binds to; must be reachable from remote agents.
    #[arg(long, default_value = "127.0.0.1:0")]
    bind: SocketAddr,
    #[arg(long)]
    public_url: Option<String>,
    /// Scratch space for agents and archives; defaults to /dev/shm when available.
    #[arg(long)]
    work_dir: Option<PathBuf>,
}

fn parse_region(s: &str) -> Result<Region, String> {
    if let Some(r) = Region::named(s) {
        return Ok(r);
    }
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| {
            format!("`{s}` is neither a region name nor min_lon,max_lon,min_lat,max_lat")
        })?;
    let [min_lon, max_lon, min_lat, max_lat] = parts[..] else {
        return Err(format!("expected four bounds, got {}", parts.len()));
    };
    Region::from_bounds(min_lon, max_lon, min_lat, max_lat).map_err(|e| e.to_string())
}

async fn shutdown_signal() {
    let _ = tokio::signal::ctrl_c().await;
}

async fn cmd_serve(args: ServeArgs) -> Result<()> {
    let mut config = OrchestratorConfig::new(&args.data_dir);
    config.fixture_dir = args.fixtures;
    config.public_base_url = args.public_url;
    config.ack_timeout = Duration::from_secs(args.ack_timeout_secs);
    let server = serve(Orchestrator::new(config)?, args.bind).await?;
    eprintln!("orchestrator listening on {}", server.base_url);
    shutdown_signal().await;
    Ok(())
}

async fn cmd_agents(count: usize, base_port: u16, dir: PathBuf) -> Result<()> {
    let fleet = spawn_fleet(count, base_port, &dir).await?;
    for a in &fleet.agents {
        println!("{}", a.endpoint);
    }
    shutdown_signal().await;
    Ok(())
}

async fn poll_remote(server: &str, request: &JobRequest) -> Result<JobView> {
    let http = reqwest::Client::new();
    let base = server.trim_end_matches('/');
    let resp = http
        .post(format!("{base}/jobs"))
        .json(request)
        .send()
        .await?;
    if !resp.status().is_success() {
        bail!(
            "{}: {}",
            resp.status(),
            resp.text().await.unwrap_or_default()
        );
    }
    let created: CreatedJob = resp.json().await?;
    loop {
        let view: JobView = http
            .get(format!("{base}/jobs/{}", created.id))
            .send()
            .await?
            .error_for_status()?
            .json()
            .await?;
        if view.job.state.is_terminal() {
            return Ok(view);
        }
        tokio::time::sleep(Duration::from_millis(200)).await;
    }
}

async fn cmd_deploy(args: DeployArgs) -> Result<bool> {
    let scratch = tempfile::tempdir()?;
    let fleet = match args.local_agents {
        Some(n) => Some(spawn_fleet(n, 0, &scratch.path().join("agents")).await?),
        None => None,
    };
    let targets = fleet
        .as_ref()
        .map_or(args.targets.clone(), |f| f.endpoints());
    let mut request = JobRequest::new(args.region, args.count, targets);
    request.selector = args.selector;
    request.seed = args.seed;
    request.source = args.source;
    request.fetch_limit = args.fetch_limit;
    request.per_device_limit = args.per_device_limit;
    request.criteria = args.criteria;
    request.marshal = MarshalOptions::new(args.measurement_type, args.history_hours);

    let view = match &args.server {
        Some(server) => poll_remote(server, &request).await?,
        None => {
            let mut config = OrchestratorConfig::new(scratch.path().join("orchestrator"));
            config.fixture_dir = args.fixtures;
            config.ack_timeout = Duration::from_secs(args.ack_timeout_secs);
            let server = serve(Orchestrator::new(config)?, "127.0.0.1:0".parse()?).await?;
            server.orchestrator.run(request).await?.into()
        }
    };
    println!("{}", serde_json::to_string_pretty(&view)?);
    Ok(view.job.state == sensedeploy_deploy::JobState::Complete)
}

async fn cmd_bench(args: BenchArgs) -> Result<()> {
    let design = ExperimentDesign::new(args.devices, args.sensors, args.reps, args.seed);
    fs::create_dir_all(&args.out)?;
    let work = match &args.work_dir {
        Some(dir) => tempfile::Builder::new().prefix("bench-").tempdir_in(dir)?,
        None => tempfile::Builder::new()
            .prefix("sensedeploy-bench-")
            .tempdir_in(scratch_root())?,
    };
    let mut config = HarnessConfig::local(work.path());
    config.bind = args.bind;
    config.public_base_url = args.public_url;
    config.remote_targets = args.remote_targets;
    let total = design.trial_count();
    let mut done = 0;
    let run = run_design(&design, &config, |trial, outcome| {
        done += 1;
        match outcome {
            Ok(r) => eprintln!(
                "[{done}/{total}] devices={} sensors={} rep={} setup_ms={:.1}",
                trial.devices, trial.sensors, trial.rep, r.setup_ms
            ),
            Err(f) => eprintln!(
                "[{done}/{total}] devices={} sensors={} rep={} FAILED in {}: {}",
                trial.devices, trial.sensors, trial.rep, f.phase, f.cause
            ),
        }
    })
    .await?;
    drop(work);

    write_records(
        BufWriter::new(File::create(args.out.join("trials.csv"))?),
        &run.records,
    )?;
    if !run.failures.is_empty() {
        write_failures(
            BufWriter::new(File::create(args.out.join("failures.csv"))?),
            &run.failures,
        )?;
    }
    if design.replications >= 2 && !run.records.is_empty() {
        let cells = summarize(&run.records)?;
        write_summary(
            BufWriter::new(File::create(args.out.join("summary.csv"))?),
            &cells,
        )?;
    }
    eprintln!(
        "{} records, {} failures written to {}",
        run.records.len(),
        run.failures.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_report(disease: Disease, input: PathBuf) -> Result<()> {
    let file = File::open(&input).with_context(|| format!("opening {}", input.display()))?;
    let readings = read_readings_csv(file)?;
    let ranking = rank_cities(&readings, &DiseaseProfile::for_disease(disease))?;
    write_ranking_csv(io::stdout().lock(), &ranking)?;
    Ok(())
}

fn cmd_topsis(input: PathBuf) -> Result<()> {
    let file = File::open(&input).with_context(|| format!("opening {}", input.display()))?;
    let matrix = read_matrix_csv(file)?;
    write_result_csv(io::stdout().lock(), &matrix, &rank(&matrix))?;
    Ok(())
}

fn cmd_gen_fixture(
    region: Region,
    count: usize,
    seed: u64,
    first_id: u64,
    out: PathBuf,
) -> Result<()> {
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(&out)?);
    for line in owm_fixture_lines(&region, count, seed, first_id) {
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

#[tokio::main]
async fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(io::stderr)
        .init();
    match Cli::parse().command {
        Command::Serve(args) => cmd_serve(args).await,
        Command::Agent { port, dir } => {
            let agent = spawn_agent(port, dir, Duration::from_secs(120)).await?;
            println!("{}", agent.endpoint);
            shutdown_signal().await;
            Ok(())
        }
        Command::Fleet {
            count,
            base_port,
            dir,
        } => cmd_agents(count, base_port, dir).await,
        Command::Deploy(args) => {
            if !cmd_deploy(args).await? {
                std::process::exit(2);
            }
            Ok(())
        }
        Command::Bench(args) => cmd_bench(args).await,
        Command::Report { disease, input } => cmd_report(disease, input),
        Command::Topsis { input } => cmd_topsis(input),
        Command::GenFixture {
            region,
            count,
            seed,
            first_id,
            out,
        } => cmd_gen_fixture(region, count, seed, first_id, out),
    }
}
