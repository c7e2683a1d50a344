//! Run directories: one directory per pipeline run holding the input copy,
//! every intermediate artifact and a manifest with per-stage status.

mod lock;
mod stages;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{AssemblyError, Container, MuxerCommand};
use crate::audio::{AudioError, DEFAULT_ANALYSIS_RATE};
use crate::backends::{
    sha256_hex, ChatBackend, EmbeddingBackend, EndpointKind, MockEmbedding, PatternVideo,
    TemplateChat, VideoBackend,
};
use crate::generation::{GenerationError, GenerationSettings};
use crate::scripting::{ScriptError, ScriptPromptOptions};
use crate::segmentation::{SegmentationConfig, SegmentationError};
use crate::taxonomy::{LabelTaxonomy, TaxonomyError};

use lock::RunLock;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const INPUT_FILE: &str = "input.wav";
pub const TAXONOMY_FILE: &str = "taxonomy.json";
pub const LOCK_FILE: &str = ".lock";
pub const SUBDIRS: [&str; 6] = ["segments", "analysis", "prompts", "scripts", "clips", "output"];
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pipeline {
    #[default]
    Clap,
    Lalm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Segmenter {
    #[default]
    #[serde(rename = "random")]
    Random,
    #[serde(rename = "rules")]
    RuleBased,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Segment,
    Analyze,
    Script,
    Generate,
    Assemble,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Segment,
        Stage::Analyze,
        Stage::Script,
        Stage::Generate,
        Stage::Assemble,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Segment => "segment",
            Stage::Analyze => "analyze",
            Stage::Script => "script",
            Stage::Generate => "generate",
            Stage::Assemble => "assemble",
        }
    }

    pub fn position(self) -> usize {
        Stage::ALL.iter().position(|s| *s == self).expect("listed")
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    #[default]
    Pending,
    Done,
    Failed,
}

/// Everything that determines a run's artifacts besides the input audio
/// and the backends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub pipeline: Pipeline,
    pub segmenter: Segmenter,
    /// Run seed. Overrides `segmentation.seed` and seeds every scene.
    pub seed: u64,
    pub analysis_rate: u32,
    pub segmentation: SegmentationConfig,
    /// Builtin taxonomy when absent.
    pub taxonomy_path: Option<PathBuf>,
    pub prompt: ScriptPromptOptions,
    pub generation: GenerationSettings,
    pub container: Container,
    pub muxer: MuxerCommand,
    /// Extra attempts when a script response cannot be used.
    pub script_retries: u32,
    pub analysis_concurrency: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            pipeline: Pipeline::Clap,
            segmenter: Segmenter::Random,
            seed: 0,
            analysis_rate: DEFAULT_ANALYSIS_RATE,
            segmentation: SegmentationConfig::default(),
            taxonomy_path: None,
            prompt: ScriptPromptOptions::default(),
            generation: GenerationSettings::default(),
            container: Container::ManifestOnly,
            muxer: MuxerCommand::default(),
            script_retries: 2,
            analysis_concurrency: 4,
        }
    }
}

impl RunConfig {
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        if self.analysis_rate == 0 {
            p.push("analysis_rate must be positive".into());
        }
        if self.analysis_concurrency == 0 {
            p.push("analysis_concurrency must be at least 1".into());
        }
        if self.prompt.character_directive.trim().is_empty() {
            p.push("prompt.character_directive must not be empty".into());
        }
        if self.container == Container::Mp4ViaMuxer && self.muxer.argv.is_empty() {
            p.push("muxer.argv must not be empty for the mp4 container".into());
        }
        p.extend(self.segmentation.problems().into_iter().map(|s| format!("segmentation: {s}")));
        p.extend(self.generation.problems().into_iter().map(|s| format!("generation: {s}")));
        p
    }

    /// SHA-256 over the config serialized with sorted keys.
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        sha256_hex(value.to_string().as_bytes())
    }

    pub fn load_taxonomy(&self) -> Result<LabelTaxonomy, TaxonomyError> {
        let taxonomy = match &self.taxonomy_path {
            Some(path) => LabelTaxonomy::load(path)?,
            None => LabelTaxonomy::builtin(),
        };
        taxonomy.validate()?;
        Ok(taxonomy)
    }
}

/// Backend kinds a pipeline talks to.
pub fn required_kinds(pipeline: Pipeline) -> &'static [EndpointKind] {
    match pipeline {
        Pipeline::Clap => &[EndpointKind::Embed, EndpointKind::Chat, EndpointKind::Video],
        Pipeline::Lalm => &[
            EndpointKind::Embed,
            EndpointKind::ChatAudio,
            EndpointKind::Chat,
            EndpointKind::Video,
        ],
    }
}

/// Backend kinds a single stage talks to.
pub fn stage_kinds(stage: Stage, pipeline: Pipeline) -> &'static [EndpointKind] {
    match (stage, pipeline) {
        (Stage::Analyze, _) => &[EndpointKind::Embed],
        (Stage::Script, Pipeline::Clap) => &[EndpointKind::Chat],
        (Stage::Script, Pipeline::Lalm) => &[EndpointKind::ChatAudio, EndpointKind::Chat],
        (Stage::Generate, _) => &[EndpointKind::Video],
        (Stage::Segment | Stage::Assemble, _) => &[],
    }
}

#[derive(Default)]
pub struct Backends {
    pub embed: Option<Box<dyn EmbeddingBackend>>,
    pub chat: Option<Box<dyn ChatBackend>>,
    pub chat_audio: Option<Box<dyn ChatBackend>>,
    pub video: Option<Box<dyn VideoBackend>>,
}

impl Backends {
    /// Deterministic offline backends for every kind.
    pub fn mock(seed: u64) -> Self {
        Self {
            embed: Some(Box::new(MockEmbedding::new(seed))),
            chat: Some(Box::new(TemplateChat::new(seed))),
            chat_audio: Some(Box::new(TemplateChat::new(seed))),
            video: Some(Box::new(PatternVideo::new())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StageRecord {
    pub status: StageStatus,
    /// Paths relative to the run directory.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub artifacts: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputRecord {
    pub source: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub run_id: String,
    pub created_at: String,
    pub pipeline: Pipeline,
    pub segmenter: Segmenter,
    pub run_seed: u64,
    pub input: InputRecord,
    pub config_hash: String,
    pub config: RunConfig,
    pub stages: BTreeMap<Stage, StageRecord>,
}

impl RunManifest {
    pub fn status(&self, stage: Stage) -> StageStatus {
        self.stages.get(&stage).map(|r| r.status).unwrap_or_default()
    }

    pub fn record(&self, stage: Stage) -> Option<&StageRecord> {
        self.stages.get(&stage)
    }

    pub fn is_complete(&self) -> bool {
        Stage::ALL.iter().all(|s| self.status(*s) == StageStatus::Done)
    }

    /// First stage that is not done.
    pub fn next_stage(&self) -> Option<Stage> {
        Stage::ALL.into_iter().find(|s| self.status(*s) != StageStatus::Done)
    }

    /// Problems with the manifest's own consistency.
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        if self.format_version != FORMAT_VERSION {
            p.push(format!("unsupported format_version {}", self.format_version));
        }
        if self.config_hash != self.config.hash() {
            p.push("config_hash does not match config".into());
        }
        if self.pipeline != self.config.pipeline
            || self.segmenter != self.config.segmenter
            || self.run_seed != self.config.seed
        {
            p.push("pipeline, segmenter or run_seed disagree with config".into());
        }
        if self.stages.len() != Stage::ALL.len() {
            p.push("stage map must list all five stages".into());
        }
        let mut blocked = None;
        for stage in Stage::ALL {
            let status = self.status(stage);
            if status == StageStatus::Done {
                if let Some(prev) = blocked {
                    p.push(format!("{stage} is done but {prev} is not"));
                }
            } else if blocked.is_none() {
                blocked = Some(stage);
            }
        }
        p
    }
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Segmentation(#[from] SegmentationError),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error(transparent)]
    Script(#[from] ScriptError),
    #[error(transparent)]
    Generation(#[from] GenerationError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error("no {0:?} backend configured")]
    MissingBackend(EndpointKind),
    #[error("unusable script after {attempts} attempts: {last}")]
    UnusableScript { attempts: u32, last: String },
    #[error("{path}: {reason}")]
    Artifact { path: PathBuf, reason: String },
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0} exists and is not empty")]
    DirectoryNotEmpty(PathBuf),
    #[error("cannot use input {path}: {reason}")]
    Input { path: PathBuf, reason: String },
    #[error("invalid run config: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error("run directory {0} is in use by another process")]
    Locked(PathBuf),
    #[error("no manifest in {0}")]
    MissingManifest(PathBuf),
    #[error("corrupt manifest {path}: {reason}")]
    CorruptManifest { path: PathBuf, reason: String },
    #[error("integrity error: {stage} is done but {path} is missing")]
    Integrity { stage: Stage, path: PathBuf },
    #[error("input.wav no longer matches the recorded checksum")]
    InputChanged,
    #[error("cannot run {stage}: {blocking} is not done")]
    NotReady { stage: Stage, blocking: Stage },
    #[error("the story step only exists in the lalm pipeline")]
    NotLalm,
    #[error("{stage} failed: {source}")]
    StageFailed {
        stage: Stage,
        #[source]
        source: StageError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Joins a forward-slash relative path onto `root`.
fn resolve(root: &Path, rel: &str) -> PathBuf {
    rel.split('/').fold(root.to_path_buf(), |p, part| p.join(part))
}

/// An open run directory. Holds the directory's lock until dropped.
pub struct Run {
    root: PathBuf,
    manifest: RunManifest,
    _lock: RunLock,
}

impl fmt::Debug for Run {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Run")
            .field("root", &self.root)
            .field("run_id", &self.manifest.run_id)
            .finish()
    }
}

impl Run {
    /// Creates the directory skeleton, copies the input and writes a
    /// manifest with every stage pending.
    pub fn init(dir: &Path, config: RunConfig, input: &Path) -> Result<Self, RunError> {
        let problems = config.problems();
        if !problems.is_empty() {
            return Err(RunError::InvalidConfig(problems));
        }
        let taxonomy = config.load_taxonomy()?;
        if dir.exists() {
            let mut entries = fs::read_dir(dir).map_err(io_err(dir))?;
            if entries.next().is_some() {
                return Err(RunError::DirectoryNotEmpty(dir.to_path_buf()));
            }
        }
        let input_err = |reason: String| RunError::Input {
            path: input.to_path_buf(),
            reason,
        };
        let bytes = fs::read(input).map_err(|e| input_err(e.to_string()))?;
        crate::audio::decode_audio(&bytes, config.analysis_rate).map_err(|e| input_err(e.to_string()))?;

        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let lock = RunLock::acquire(dir)?;
        for sub in SUBDIRS {
            let p = dir.join(sub);
            fs::create_dir_all(&p).map_err(io_err(&p))?;
        }
        let copy = dir.join(INPUT_FILE);
        crate::write_atomic(&copy, &bytes).map_err(io_err(&copy))?;
        let tax = dir.join(TAXONOMY_FILE);
        crate::write_atomic(&tax, taxonomy.to_json().as_bytes()).map_err(io_err(&tax))?;

        let manifest = RunManifest {
            format_version: FORMAT_VERSION,
            run_id: uuid::Uuid::new_v4().to_string(),
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            pipeline: config.pipeline,
            segmenter: config.segmenter,
            run_seed: config.seed,
            input: InputRecord {
                source: input.to_string_lossy().into_owned(),
                sha256: sha256_hex(&bytes),
            },
            config_hash: config.hash(),
            config,
            stages: Stage::ALL.iter().map(|s| (*s, StageRecord::default())).collect(),
        };
        let run = Run {
            root: dir.to_path_buf(),
            manifest,
            _lock: lock,
        };
        run.save()?;
        Ok(run)
    }

    /// Opens an existing run and checks that every artifact of a done stage
    /// is still on disk.
    pub fn open(dir: &Path) -> Result<Self, RunError> {
        let path = dir.join(MANIFEST_FILE);
        if !path.is_file() {
            return Err(RunError::MissingManifest(dir.to_path_buf()));
        }
        let lock = RunLock::acquire(dir)?;
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let corrupt = |reason: String| RunError::CorruptManifest {
            path: path.clone(),
            reason,
        };
        let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| corrupt(e.to_string()))?;
        let problems = manifest.problems();
        if !problems.is_empty() {
            return Err(corrupt(problems.join("; ")));
        }
        let run = Run {
            root: dir.to_path_buf(),
            manifest,
            _lock: lock,
        };
        run.check_integrity()?;
        Ok(run)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> &RunManifest {
        &self.manifest
    }

    pub fn config(&self) -> &RunConfig {
        &self.manifest.config
    }

    /// Absolute path of a run-relative artifact name.
    pub fn path(&self, rel: &str) -> PathBuf {
        resolve(&self.root, rel)
    }

    pub fn check_integrity(&self) -> Result<(), RunError> {
        for required in [INPUT_FILE, TAXONOMY_FILE] {
            let p = self.path(required);
            if !p.is_file() {
                return Err(RunError::Integrity {
                    stage: Stage::Segment,
                    path: p,
                });
            }
        }
        let bytes = fs::read(self.path(INPUT_FILE)).map_err(io_err(&self.path(INPUT_FILE)))?;
        if sha256_hex(&bytes) != self.manifest.input.sha256 {
            return Err(RunError::InputChanged);
        }
        for (stage, record) in &self.manifest.stages {
            if record.status != StageStatus::Done {
                continue;
            }
            for rel in &record.artifacts {
                let p = self.path(rel);
                if !p.exists() {
                    return Err(RunError::Integrity {
                        stage: *stage,
                        path: p,
                    });
                }
            }
        }
        Ok(())
    }

    fn save(&self) -> Result<(), RunError> {
        let path = self.root.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes") + "\n";
        crate::write_atomic(&path, json.as_bytes()).map_err(io_err(&path))
    }

    /// Resets `stage` and every later stage to pending. Artifacts stay on
    /// disk.
    pub fn invalidate_from(&mut self, stage: Stage) -> Result<(), RunError> {
        let mut changed = false;
        for s in &Stage::ALL[stage.position()..] {
            let rec = self.manifest.stages.entry(*s).or_default();
            if *rec != StageRecord::default() {
                *rec = StageRecord::default();
                changed = true;
            }
        }
        if changed {
            self.save()?;
        }
        Ok(())
    }

    /// Runs one stage. All earlier stages must be done; a stage that is
    /// already done is invalidated together with its successors first.
    pub fn run_stage(&mut self, stage: Stage, backends: &Backends) -> Result<(), RunError> {
        if let Some(blocking) = Stage::ALL[..stage.position()]
            .iter()
            .find(|s| self.manifest.status(**s) != StageStatus::Done)
        {
            return Err(RunError::NotReady {
                stage,
                blocking: *blocking,
            });
        }
        if self.manifest.status(stage) == StageStatus::Done {
            self.invalidate_from(stage)?;
        }
        let result = stages::execute(self, stage, backends);
        let record = self.manifest.stages.entry(stage).or_default();
        match result {
            Ok(artifacts) => {
                *record = StageRecord {
                    status: StageStatus::Done,
                    artifacts,
                    error: None,
                };
                self.save()
            }
            Err(source) => {
                *record = StageRecord {
                    status: StageStatus::Failed,
                    artifacts: Vec::new(),
                    error: Some(source.to_string()),
                };
                self.save()?;
                Err(RunError::StageFailed { stage, source })
            }
        }
    }

    /// Runs every stage that is not done, in order, stopping after
    /// `stop_after` when given.
    pub fn run_pending(&mut self, backends: &Backends, stop_after: Option<Stage>) -> Result<(), RunError> {
        while let Some(stage) = self.manifest.next_stage() {
            if stop_after.is_some_and(|last| stage > last) {
                break;
            }
            self.run_stage(stage, backends)?;
        }
        Ok(())
    }

    /// Asks the audio chat backend for a story and writes it to
    /// `scripts/story.txt`. The script stage reuses an existing story.
    pub fn write_story(&mut self, backends: &Backends) -> Result<PathBuf, RunError> {
        if self.manifest.pipeline != Pipeline::Lalm {
            return Err(RunError::NotLalm);
        }
        stages::write_story(self, backends)
            .map(|rel| self.path(&rel))
            .map_err(|source| RunError::StageFailed {
                stage: Stage::Script,
                source,
            })
    }
}

/// Creates a run directory and returns its manifest.
pub fn init_run(config: RunConfig, input: &Path, dir: &Path) -> Result<RunManifest, RunError> {
    Run::init(dir, config, input).map(|r| r.manifest)
}

/// Executes the pending stages of the run in `dir`.
pub fn run_pipeline(
    dir: &Path,
    backends: &Backends,
    stop_after: Option<Stage>,
) -> Result<RunManifest, RunError> {
    let mut run = Run::open(dir)?;
    run.run_pending(backends, stop_after)?;
    Ok(run.manifest)
}

/// Re-executes only the stages that are not done.
pub fn resume_run(dir: &Path, backends: &Backends) -> Result<RunManifest, RunError> {
    run_pipeline(dir, backends, None)
}

#[cfg(test)]
mod tests;
