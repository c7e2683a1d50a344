//! `tunereel`: turn a WAV song into a scripted music video, stage by stage.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use tunereel_core::run::{required_kinds, stage_kinds};
use tunereel_core::{
    Container, EndpointKind, MuxerCommand, Pipeline, Run, RunConfig, RunError, Segmenter, Stage,
    StageStatus,
};

use config::{build_backends, CliConfig, ConfigProblems, Endpoints};

#[derive(Parser)]
#[command(name = "tunereel", version, about = "Automatic music videos from a song")]
struct Cli {
    /// Print results and errors as JSON.
    #[arg(long, global = true)]
    json: bool,
    /// TOML config file; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create a run directory and execute every stage.
    Run {
        audio: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Stop once this stage is done.
        #[arg(long, value_enum)]
        stop_after: Option<StageArg>,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        backends: BackendArgs,
    },
    /// Create a run directory and split the song into segments.
    Segment {
        audio: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Label the track and its segments.
    Analyze {
        dir: PathBuf,
        #[command(flatten)]
        backends: BackendArgs,
    },
    /// Ask the audio chat model for a story (lalm pipeline).
    Story {
        dir: PathBuf,
        #[command(flatten)]
        backends: BackendArgs,
    },
    /// Request and parse the scene script.
    Script {
        dir: PathBuf,
        #[command(flatten)]
        backends: BackendArgs,
    },
    /// Generate one clip per scene.
    Render {
        dir: PathBuf,
        #[command(flatten)]
        backends: BackendArgs,
    },
    /// Join the clips over the original audio.
    Assemble { dir: PathBuf },
    /// Run the stages that are not done yet.
    Resume {
        dir: PathBuf,
        #[command(flatten)]
        backends: BackendArgs,
    },
    /// Show stage status.
    Status { dir: PathBuf },
}

#[derive(Args, Default)]
struct RunArgs {
    #[arg(long, value_enum)]
    pipeline: Option<PipelineArg>,
    #[arg(long, value_enum)]
    segmenter: Option<SegmenterArg>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    fps: Option<f64>,
    #[arg(long)]
    width: Option<u32>,
    #[arg(long)]
    height: Option<u32>,
    /// Taxonomy JSON replacing the builtin one.
    #[arg(long, value_name = "FILE")]
    taxonomy: Option<PathBuf>,
    #[arg(long, value_enum)]
    container: Option<ContainerArg>,
    /// Muxer command line, split on whitespace. Placeholders:
    /// {frames_pattern} {fps} {audio} {out}.
    #[arg(long)]
    muxer: Option<String>,
    /// Extra attempts when a script response is unusable.
    #[arg(long)]
    retries: Option<u32>,
}

#[derive(Args, Default)]
struct BackendArgs {
    /// Use the deterministic offline backends.
    #[arg(long)]
    mock: bool,
    #[arg(long)]
    embed_url: Option<String>,
    #[arg(long)]
    chat_url: Option<String>,
    #[arg(long)]
    chat_audio_url: Option<String>,
    #[arg(long)]
    video_url: Option<String>,
    /// Per-request timeout in seconds.
    #[arg(long)]
    timeout: Option<f64>,
    #[arg(long)]
    max_retries: Option<u32>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PipelineArg {
    Clap,
    Lalm,
}

#[derive(Clone, Copy, ValueEnum)]
enum SegmenterArg {
    Random,
    Rules,
}

#[derive(Clone, Copy, ValueEnum)]
enum ContainerArg {
    Mp4,
    Manifest,
}

#[derive(Clone, Copy, ValueEnum)]
enum StageArg {
    Segment,
    Analyze,
    Script,
    Generate,
    Assemble,
}

impl From<StageArg> for Stage {
    fn from(s: StageArg) -> Self {
        match s {
            StageArg::Segment => Stage::Segment,
            StageArg::Analyze => Stage::Analyze,
            StageArg::Script => Stage::Script,
            StageArg::Generate => Stage::Generate,
            StageArg::Assemble => Stage::Assemble,
        }
    }
}

impl RunArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(p) = self.pipeline {
            cfg.pipeline = match p {
                PipelineArg::Clap => Pipeline::Clap,
                PipelineArg::Lalm => Pipeline::Lalm,
            };
        }
        if let Some(s) = self.segmenter {
            cfg.segmenter = match s {
                SegmenterArg::Random => Segmenter::Random,
                SegmenterArg::Rules => Segmenter::RuleBased,
            };
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(fps) = self.fps {
            cfg.generation.fps = fps;
        }
        if let Some(w) = self.width {
            cfg.generation.width = w;
        }
        if let Some(h) = self.height {
            cfg.generation.height = h;
        }
        if let Some(t) = &self.taxonomy {
            cfg.taxonomy_path = Some(t.clone());
        }
        if let Some(c) = self.container {
            cfg.container = match c {
                ContainerArg::Mp4 => Container::Mp4ViaMuxer,
                ContainerArg::Manifest => Container::ManifestOnly,
            };
        }
        if let Some(m) = &self.muxer {
            cfg.muxer = MuxerCommand {
                argv: m.split_whitespace().map(String::from).collect(),
            };
        }
        if let Some(r) = self.retries {
            cfg.script_retries = r;
        }
    }
}

impl BackendArgs {
    fn apply(&self, mock: &mut bool, e: &mut Endpoints) {
        *mock |= self.mock;
        for (flag, slot) in [
            (&self.embed_url, &mut e.embed),
            (&self.chat_url, &mut e.chat),
            (&self.chat_audio_url, &mut e.chat_audio),
            (&self.video_url, &mut e.video),
        ] {
            if flag.is_some() {
                slot.clone_from(flag);
            }
        }
        if self.timeout.is_some() {
            e.timeout_s = self.timeout;
        }
        if self.max_retries.is_some() {
            e.max_retries = self.max_retries;
        }
    }
}

fn default_output(audio: &Path) -> PathBuf {
    let stem = audio.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "song".into());
    PathBuf::from(format!("{stem}-run"))
}

fn load_config(path: Option<&Path>) -> anyhow::Result<CliConfig> {
    path.map_or_else(|| Ok(CliConfig::default()), config::load)
}

/// Validates the run config and the backend section together so that every
/// problem is listed at once.
fn check_new_run(cfg: &CliConfig, kinds: &[EndpointKind]) -> anyhow::Result<()> {
    let mut problems = cfg.run.problems();
    problems.extend(config::backend_problems(cfg.mock, &cfg.endpoints, kinds));
    if let Err(e) = cfg.run.load_taxonomy() {
        problems.push(format!("taxonomy: {e}"));
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(ConfigProblems(problems).into())
    }
}

fn open_with_backends(
    dir: &Path,
    file: &CliConfig,
    args: &BackendArgs,
    stages: &[Stage],
    extra: &[EndpointKind],
) -> anyhow::Result<(Run, tunereel_core::Backends)> {
    let run = Run::open(dir)?;
    let (mut mock, mut endpoints) = (file.mock, file.endpoints.clone());
    args.apply(&mut mock, &mut endpoints);
    let pipeline = run.manifest().pipeline;
    let mut kinds: Vec<EndpointKind> = extra.to_vec();
    for s in stages {
        for k in stage_kinds(*s, pipeline) {
            if !kinds.contains(k) {
                kinds.push(*k);
            }
        }
    }
    let backends = build_backends(mock, &endpoints, &kinds, run.manifest().run_seed)?;
    Ok((run, backends))
}

fn report(run: &Run, json: bool) {
    let m = run.manifest();
    if json {
        let stages: serde_json::Map<String, serde_json::Value> = m
            .stages
            .iter()
            .map(|(s, r)| (s.as_str().to_string(), serde_json::to_value(r.status).expect("status")))
            .collect();
        let output = m
            .record(Stage::Assemble)
            .filter(|r| r.status == StageStatus::Done)
            .and_then(|r| r.artifacts.first())
            .map(|rel| run.path(rel));
        let out = json!({
            "run_dir": run.root(),
            "run_id": m.run_id,
            "stages": stages,
            "output": output,
        });
        println!("{out}");
    } else {
        println!("run {} in {}", m.run_id, run.root().display());
        for (stage, rec) in &m.stages {
            let status = match rec.status {
                StageStatus::Pending => "pending",
                StageStatus::Done => "done",
                StageStatus::Failed => "failed",
            };
            println!("  {stage:<9} {status}");
        }
    }
}

fn execute(cli: &Cli) -> anyhow::Result<()> {
    let file = load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Run {
            audio,
            output,
            stop_after,
            run: run_args,
            backends: backend_args,
        } => {
            let mut cfg = file.clone();
            run_args.apply(&mut cfg.run);
            backend_args.apply(&mut cfg.mock, &mut cfg.endpoints);
            check_new_run(&cfg, required_kinds(cfg.run.pipeline))?;
            let backends = build_backends(
                cfg.mock,
                &cfg.endpoints,
                required_kinds(cfg.run.pipeline),
                cfg.run.seed,
            )?;
            let dir = output.clone().unwrap_or_else(|| default_output(audio));
            let mut run = Run::init(&dir, cfg.run, audio)?;
            let result = run.run_pending(&backends, stop_after.map(Stage::from));
            report(&run, cli.json);
            result?;
        }
        Command::Segment {
            audio,
            output,
            run: run_args,
        } => {
            let mut cfg = file.clone();
            run_args.apply(&mut cfg.run);
            check_new_run(&cfg, &[])?;
            let dir = output.clone().unwrap_or_else(|| default_output(audio));
            let mut run = Run::init(&dir, cfg.run, audio)?;
            let result = run.run_stage(Stage::Segment, &Default::default());
            report(&run, cli.json);
            result?;
        }
        Command::Analyze { dir, backends } => stage_command(cli, &file, dir, backends, Stage::Analyze)?,
        Command::Script { dir, backends } => stage_command(cli, &file, dir, backends, Stage::Script)?,
        Command::Render { dir, backends } => stage_command(cli, &file, dir, backends, Stage::Generate)?,
        Command::Assemble { dir } => stage_command(cli, &file, dir, &BackendArgs::default(), Stage::Assemble)?,
        Command::Story { dir, backends } => {
            let (mut run, b) = open_with_backends(dir, &file, backends, &[], &[EndpointKind::ChatAudio])?;
            let path = run.write_story(&b)?;
            if cli.json {
                println!("{}", json!({ "story": path }));
            } else {
                println!("{}", path.display());
            }
        }
        Command::Resume { dir, backends } => {
            let pending: Vec<Stage> = {
                let run = Run::open(dir)?;
                let m = run.manifest();
                Stage::ALL.into_iter().filter(|s| m.status(*s) != StageStatus::Done).collect()
            };
            let (mut run, b) = open_with_backends(dir, &file, backends, &pending, &[])?;
            let result = run.run_pending(&b, None);
            report(&run, cli.json);
            result?;
        }
        Command::Status { dir } => {
            let path = dir.join(tunereel_core::run::MANIFEST_FILE);
            let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let run_manifest: tunereel_core::RunManifest =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            if cli.json {
                println!("{}", serde_json::to_string(&run_manifest.stages)?);
            } else {
                for (stage, rec) in &run_manifest.stages {
                    let err = rec.error.as_deref().map(|e| format!(" ({e})")).unwrap_or_default();
                    println!("{stage:<9} {:?}{err}", rec.status);
                }
            }
        }
    }
    Ok(())
}

fn stage_command(cli: &Cli, file: &CliConfig, dir: &Path, args: &BackendArgs, stage: Stage) -> anyhow::Result<()> {
    let (mut run, backends) = open_with_backends(dir, file, args, &[stage], &[])?;
    let result = run.run_stage(stage, &backends);
    report(&run, cli.json);
    result.map_err(Into::into)
}

/// Stable machine-readable error kinds for `--json`.
fn error_json(err: &anyhow::Error) -> (serde_json::Value, u8) {
    if let Some(ConfigProblems(problems)) = err.downcast_ref::<ConfigProblems>() {
        let v = json!({ "error": { "kind": "config", "message": err.to_string(), "problems": problems } });
        return (v, 2);
    }
    let (kind, stage) = match err.downcast_ref::<RunError>() {
        Some(RunError::InvalidConfig(problems)) => {
            let v = json!({ "error": { "kind": "config", "message": err.to_string(), "problems": problems } });
            return (v, 2);
        }
        Some(RunError::DirectoryNotEmpty(_)) => ("directory_not_empty", None),
        Some(RunError::Input { .. }) => ("input", None),
        Some(RunError::Locked(_)) => ("locked", None),
        Some(RunError::MissingManifest(_) | RunError::CorruptManifest { .. }) => ("manifest", None),
        Some(RunError::Integrity { stage, .. }) => ("integrity", Some(*stage)),
        Some(RunError::InputChanged) => ("integrity", None),
        Some(RunError::NotReady { stage, .. }) => ("not_ready", Some(*stage)),
        Some(RunError::NotLalm) => ("wrong_pipeline", None),
        Some(RunError::StageFailed { stage, .. }) => ("stage_failed", Some(*stage)),
        Some(RunError::Taxonomy(_)) => ("taxonomy", None),
        Some(RunError::Io { .. }) => ("io", None),
        None => ("error", None),
    };
    let mut body = json!({ "kind": kind, "message": format!("{err:#}") });
    if let Some(stage) = stage {
        body["stage"] = json!(stage.as_str());
    }
    (json!({ "error": body }), 1)
}

fn main() -> ExitCode {
    let json_requested = std::env::args().any(|a| a == "--json");
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if json_requested && e.use_stderr() => {
            let msg = e.to_string();
            eprintln!("{}", json!({ "error": { "kind": "usage", "message": msg.trim() } }));
            return ExitCode::from(2);
        }
        Err(e) => e.exit(),
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (value, code) = error_json(&err);
            if cli.json {
                eprintln!("{value}");
            } else {
                eprintln!("error: {err:#}");
            }
            ExitCode::from(code)
        }
    }
}
