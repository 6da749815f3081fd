//! `shuttlelab`: validate inputs, analyze matches, print statistics, generate
//! synthetic fixtures and serve the API.
//!
//! Exit codes: 0 success, 1 invalid input, 2 usage error, 3 internal failure.

mod config;
mod report;

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::net::{IpAddr, Ipv4Addr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use shuttlelab_core::court::{solve_camera, CourtSpec};
use shuttlelab_core::ingest::{load_match_dir, RawMatch};
use shuttlelab_core::model::{validate_bundle, MatchBundle};
use shuttlelab_core::pipeline::{analyze, AnalyzeOptions};
use shuttlelab_core::query::{filter_shots, Role, ShotFilter};
use shuttlelab_core::stats::{
    derive_games, heatmap, summarize, Direction, HeatmapCell, Scope, ScopeSummary, ScoringRules,
};
use shuttlelab_core::synth::{self, SynthConfig};
use shuttlelab_core::{GameHalf, PlayerId, Zone};
use shuttlelab_service::{ServeConfig, ServiceError, BUNDLE_FILE};

use config::Config;

#[derive(Debug, Parser)]
#[command(name = "shuttlelab", version, about = "Badminton match analysis")]
struct Cli {
    /// TOML file with default flag values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for flight fitting (default: available parallelism).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check an input directory (or an analyzed bundle) and print diagnostics.
    Validate { path: PathBuf },
    /// Run the full analysis and write a bundle.
    Analyze(AnalyzeArgs),
    /// Print summaries and heatmaps from a bundle.
    Stats(StatsArgs),
    /// Generate a physically simulated match fixture with ground truth.
    Synth(SynthArgs),
    /// Serve the read-only API over a directory of bundles.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    input: PathBuf,
    /// Output path (default: <input>/bundle.json).
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Skip flight fitting; shots get no tendency, zones or labels.
    #[arg(long)]
    no_fit: bool,
    /// Hold the terminal speed at this value (m/s) instead of fitting it.
    #[arg(long)]
    vt: Option<f64>,
    /// Zone depth bounds in meters from the net, as `front_middle,middle_back`.
    #[arg(long, value_parser = parse_bounds)]
    zone_bounds: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Debug, Args)]
struct StatsArgs {
    bundle: PathBuf,
    #[arg(long)]
    game: Option<u32>,
    #[arg(long, requires = "game")]
    half: Option<GameHalf>,
    /// Only rallies won by this player.
    #[arg(long)]
    scorer: Option<PlayerId>,
    #[arg(long, default_value = "all")]
    role: Role,
    #[arg(long)]
    hitter: Option<PlayerId>,
    /// Zone codes like `A.back.right`, comma separated.
    #[arg(long, value_delimiter = ',')]
    from_zone: Vec<Zone>,
    #[arg(long, value_delimiter = ',')]
    to_zone: Vec<Zone>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Debug, Args)]
struct SynthArgs {
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rallies: Option<usize>,
    /// Pixel noise on the shuttle track.
    #[arg(long)]
    noise_px: Option<f64>,
    #[arg(long)]
    no_poses: bool,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    video_dir: Option<PathBuf>,
    /// Built viewer to host at `/`.
    #[arg(long)]
    static_dir: Option<PathBuf>,
    #[arg(long)]
    port: Option<u16>,
    #[arg(long)]
    bind: Option<IpAddr>,
}

const DEFAULT_PORT: u16 = 8080;

fn parse_bounds(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [a, b] = parts.as_slice() else {
        return Err("expected two comma-separated distances".into());
    };
    let num = |x: &str| {
        x.parse::<f64>()
            .map_err(|_| format!("{x:?} is not a number"))
    };
    Ok([num(a)?, num(b)?])
}

/// A failed command with its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let cfg = match &cli.config {
        Some(path) => config::load(path).map_err(Failure::usage)?,
        None => Config::default(),
    };
    if let Some(jobs) = cli.jobs.or(cfg.jobs) {
        if jobs == 0 {
            return Err(Failure::usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::internal(e.to_string()))?;
    }
    match cli.command {
        Command::Validate { path } => validate(&path),
        Command::Analyze(a) => cmd_analyze(a, &cfg),
        Command::Stats(a) => stats(a),
        Command::Synth(a) => cmd_synth(a, &cfg),
        Command::Serve(a) => serve(a, &cfg),
    }
}

fn load_input(dir: &Path) -> Result<RawMatch, Failure> {
    if !dir.is_dir() {
        return Err(Failure::invalid(format!(
            "{} is not a directory",
            dir.display()
        )));
    }
    load_match_dir(dir)
        .map_err(|e| Failure::invalid(format!("cannot load {}:\n{e}", dir.display())))
}

fn validate(path: &Path) -> Outcome {
    if path.is_file() {
        return validate_bundle_file(path);
    }
    let raw = load_input(path)?;
    let mut warnings: Vec<String> = raw.warnings.iter().map(ToString::to_string).collect();
    let mut errors = Vec::new();
    if let Err(e) = solve_camera(&raw.calibration, &CourtSpec::default()) {
        errors.push(format!("calibration: {e}"));
    }
    match derive_games(&raw.rally_records(), &ScoringRules::default()) {
        Ok(d) => warnings.extend(d.warnings.iter().map(ToString::to_string)),
        Err(e) => errors.push(format!("scoring: {e}")),
    }
    for w in &warnings {
        println!("warning: {w}");
    }
    if raw.manifest.negative_y_start.is_none() {
        errors
            .push("match.json: negative_y_start is required to place players on the court".into());
    }
    for e in &errors {
        println!("error: {e}");
    }
    let shots: usize = raw.rallies.iter().map(|r| r.shots.len()).sum();
    println!(
        "{}: {} rallies, {shots} shots, {} error(s), {} warning(s)",
        path.display(),
        raw.rallies.len(),
        errors.len(),
        warnings.len()
    );
    if errors.is_empty() {
        Ok(())
    } else {
        Err(Failure::invalid(format!(
            "{} failed validation",
            path.display()
        )))
    }
}

fn read_bundle(path: &Path) -> Result<MatchBundle, Failure> {
    shuttlelab_service::load_bundle(path).map_err(|e| match e {
        ServiceError::UnreadableBundle { .. } => Failure::invalid(e.to_string()),
        other => Failure::internal(other.to_string()),
    })
}

fn validate_bundle_file(path: &Path) -> Outcome {
    let bundle = read_bundle(path)?;
    let report = validate_bundle(&bundle);
    for v in &report.violations {
        println!("{v}");
    }
    let errors = report.errors().count();
    println!(
        "{}: {} rallies, {errors} error(s), {} warning(s)",
        path.display(),
        bundle.rally_count(),
        report.warnings().count()
    );
    if errors == 0 {
        Ok(())
    } else {
        Err(Failure::invalid(format!(
            "{} failed validation",
            path.display()
        )))
    }
}

fn cmd_analyze(a: AnalyzeArgs, cfg: &Config) -> Outcome {
    let mut court = CourtSpec::default();
    if let Some([x, y]) = a.zone_bounds.or(cfg.analyze.zone_bounds) {
        court = court.with_zone_bounds(x, y).map_err(Failure::usage)?;
    }
    let vt = a.vt.or(cfg.analyze.vt);
    if vt.is_some_and(|v| !(v.is_finite() && v > 0.0)) {
        return Err(Failure::usage("--vt must be a positive speed"));
    }
    let opts = AnalyzeOptions {
        fit: !(a.no_fit || cfg.analyze.no_fit.unwrap_or(false)),
        terminal_velocity: vt,
        court,
        ..Default::default()
    };
    let raw = load_input(&a.input)?;
    let bundle = analyze(&raw, &opts).map_err(|e| Failure::invalid(e.to_string()))?;
    for w in &bundle.warnings {
        eprintln!("warning: {w}");
    }
    let out = a.out.unwrap_or_else(|| a.input.join(BUNDLE_FILE));
    let json = bundle
        .to_json()
        .map_err(|e| Failure::internal(e.to_string()))?;
    fs::write(&out, json + "\n")
        .map_err(|e| Failure::internal(format!("cannot write {}: {e}", out.display())))?;
    let shots = bundle.shots().count();
    let fitted = bundle.shots().filter(|(_, _, s)| s.fit.is_some()).count();
    println!(
        "{}: {} rallies, {shots} shots ({fitted} fitted), {} warning(s) -> {}",
        bundle.match_id,
        bundle.rally_count(),
        bundle.warnings.len(),
        out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct StatsReport<'a> {
    match_id: &'a str,
    scope: Scope,
    summary: ScopeSummary,
    games: Vec<ScopeSummary>,
    filter: &'a ShotFilter,
    matched_shots: usize,
    heatmap_from: Vec<HeatmapCell>,
    heatmap_to: Vec<HeatmapCell>,
}

fn stats(a: StatsArgs) -> Outcome {
    let bundle = read_bundle(&a.bundle)?;
    let scope = match (a.game, a.half) {
        (None, _) => Scope::Match,
        (Some(game), None) => Scope::Game { game },
        (Some(game), Some(half)) => Scope::Half { game, half },
    };
    let zones = |v: Vec<Zone>| (!v.is_empty()).then(|| v.into_iter().collect::<BTreeSet<_>>());
    let filter = ShotFilter {
        game: a.game,
        half: a.half,
        scorer: a.scorer,
        role: a.role,
        hitter: a.hitter,
        from_zone: zones(a.from_zone),
        to_zone: zones(a.to_zone),
    };
    let matched = filter_shots(&bundle, &filter).map_err(|e| Failure::usage(e.to_string()))?;
    let shots = || matched.iter().map(|r| r.shot);
    let report = StatsReport {
        match_id: &bundle.match_id,
        scope,
        summary: summarize(&bundle, scope),
        games: bundle.summaries.games.clone(),
        filter: &filter,
        matched_shots: matched.len(),
        heatmap_from: heatmap(shots(), Direction::From),
        heatmap_to: heatmap(shots(), Direction::To),
    };
    match a.format {
        Format::Json => {
            let json = serde_json::to_string_pretty(&report)
                .map_err(|e| Failure::internal(e.to_string()))?;
            emit(&(json + "\n"))
        }
        Format::Text => emit(&text_report(&bundle, &report)),
    }
}

/// Writes a report to stdout. A reader that hangs up early (`| head`) is not
/// an error.
fn emit(text: &str) -> Outcome {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
            Err(Failure::internal(e.to_string()))
        }
        _ => Ok(()),
    }
}

fn text_report(bundle: &MatchBundle, r: &StatsReport) -> String {
    let mut out = String::new();
    report::match_table(&mut out, bundle, &bundle.summaries.matches);
    out.push('\n');
    for g in &r.games {
        if let Scope::Game { game } = g.scope {
            report::scope_table(&mut out, bundle, &format!("Game {game}"), g);
        }
    }
    if r.scope != Scope::Match {
        let title = match r.scope {
            Scope::Half { game, half } => format!("Game {game}, {half} half"),
            Scope::Game { game } => format!("Game {game} (selected)"),
            Scope::Match => unreachable!(),
        };
        out.push('\n');
        report::scope_table(&mut out, bundle, &title, &r.summary);
    }
    out.push('\n');
    if r.matched_shots == 0 {
        out.push_str("0 shots match the filter\n");
        return out;
    }
    out.push_str(&format!("{} shots match the filter\n", r.matched_shots));
    report::heatmap_grid(&mut out, "Shots from", &r.heatmap_from);
    report::heatmap_grid(&mut out, "Shots to", &r.heatmap_to);
    out
}

fn cmd_synth(a: SynthArgs, cfg: &Config) -> Outcome {
    let defaults = SynthConfig::default();
    let config = SynthConfig {
        seed: a.seed.or(cfg.synth.seed).unwrap_or(defaults.seed),
        rallies: a.rallies.or(cfg.synth.rallies).unwrap_or(defaults.rallies),
        noise_px: a.noise_px.unwrap_or(defaults.noise_px),
        poses: !a.no_poses,
        ..defaults
    };
    let m = synth::generate(&config).map_err(|e| match e {
        synth::SynthError::NoRallies | synth::SynthError::InvalidConfig(_) => {
            Failure::usage(e.to_string())
        }
        other => Failure::internal(other.to_string()),
    })?;
    m.write(&a.out)
        .map_err(|e| Failure::internal(format!("cannot write {}: {e}", a.out.display())))?;
    println!(
        "{}: {} rallies, {} shots -> {}",
        m.truth.match_id,
        m.rallies.len(),
        m.shots.len(),
        a.out.display()
    );
    Ok(())
}

fn serve(a: ServeArgs, cfg: &Config) -> Outcome {
    let s = &cfg.serve;
    let config = ServeConfig {
        data_dir: a
            .data_dir
            .or_else(|| s.data_dir.clone())
            .ok_or_else(|| Failure::usage("--data-dir is required"))?,
        video_dir: a.video_dir.or_else(|| s.video_dir.clone()),
        static_dir: a.static_dir.or_else(|| s.static_dir.clone()),
        bind: a.bind.or(s.bind).unwrap_or(IpAddr::V4(Ipv4Addr::LOCALHOST)),
        port: a.port.or(s.port).unwrap_or(DEFAULT_PORT),
    };
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::internal(e.to_string()))?;
    rt.block_on(async {
        let (addr, server) = shuttlelab_service::bind(&config)
            .await
            .map_err(|e| match e {
                ServiceError::Bind { .. } | ServiceError::Io(_) => Failure::internal(e.to_string()),
                other => Failure::invalid(other.to_string()),
            })?;
        println!("listening on http://{addr}");
        tokio::select! {
            r = server => r.map_err(|e| Failure::internal(e.to_string())),
            _ = tokio::signal::ctrl_c() => Ok(()),
        }
    })
}
