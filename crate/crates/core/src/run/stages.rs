use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Backends, Pipeline, Run, Segmenter, Stage, StageError, INPUT_FILE, TAXONOMY_FILE};
use crate::assembly::{assemble_video, AssemblySpec};
use crate::audio::{load_audio, AudioBuffer};
use crate::backends::{ChatMessage, EndpointKind};
use crate::generation::{generate_all, scene_dir_name, ClipArtifact};
use crate::scripting::{
    build_clap_script_prompt, build_decomposition_prompt, build_lalm_story_request, parse_script,
    request_script, validate_script, ScriptSource, StoryConcept, VideoScript,
};
use crate::segmentation::{segment_random, segment_rule_based, SegmentPlan};
use crate::taxonomy::{Analyzer, LabelTaxonomy, SegmentAnalysis, TrackAnalysis};

pub(super) const SEGMENTS_JSON: &str = "segments/segments.json";
pub(super) const SEGMENTS_TXT: &str = "segments/segments.txt";
pub(super) const TRACK_TXT: &str = "analysis/track.txt";
pub(super) const ANALYSIS_JSON: &str = "analysis/analysis.json";
pub(super) const SCRIPT_PROMPT: &str = "prompts/script_prompt.txt";
pub(super) const STORY_PROMPT: &str = "prompts/story_prompt.txt";
pub(super) const STORY: &str = "scripts/story.txt";
pub(super) const RAW_RESPONSE: &str = "scripts/raw_response.txt";
pub(super) const PARSED_SCRIPT: &str = "scripts/parsed_script.json";
pub(super) const VALIDATION: &str = "scripts/validation.json";

fn segment_txt(i: usize) -> String {
    format!("analysis/segment_{i}.txt")
}

fn clip_dir(n: usize) -> String {
    format!("clips/{}", scene_dir_name(n))
}

/// Structured analysis results kept for the later stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct AnalysisRecord {
    track: TrackAnalysis,
    segments: Vec<SegmentAnalysis>,
}

fn artifact_err(path: &Path, reason: impl ToString) -> StageError {
    StageError::Artifact {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    }
}

fn write(run: &Run, rel: &str, text: &str) -> Result<String, StageError> {
    let path = run.path(rel);
    crate::write_atomic(&path, text.as_bytes()).map_err(|e| artifact_err(&path, e))?;
    Ok(rel.to_string())
}

fn read(run: &Run, rel: &str) -> Result<String, StageError> {
    let path = run.path(rel);
    fs::read_to_string(&path).map_err(|e| artifact_err(&path, e))
}

fn load_input(run: &Run) -> Result<AudioBuffer, StageError> {
    Ok(load_audio(&run.path(INPUT_FILE), run.config().analysis_rate)?)
}

fn load_plan(run: &Run) -> Result<SegmentPlan, StageError> {
    Ok(SegmentPlan::from_json(&read(run, SEGMENTS_JSON)?)?)
}

fn load_analysis(run: &Run) -> Result<AnalysisRecord, StageError> {
    serde_json::from_str(&read(run, ANALYSIS_JSON)?).map_err(|e| artifact_err(&run.path(ANALYSIS_JSON), e))
}

fn load_script(run: &Run) -> Result<VideoScript, StageError> {
    VideoScript::from_json(&read(run, PARSED_SCRIPT)?).map_err(|e| artifact_err(&run.path(PARSED_SCRIPT), e))
}

fn load_taxonomy(run: &Run) -> Result<LabelTaxonomy, StageError> {
    Ok(LabelTaxonomy::load(&run.path(TAXONOMY_FILE))?)
}

/// The visual guideline text shared by the script prompt and clip prompts.
fn style_text(run: &Run, analysis: &AnalysisRecord) -> String {
    match run.config().prompt.style_guideline_text.as_deref().map(str::trim) {
        Some(s) if !s.is_empty() => s.to_string(),
        _ => analysis.track.visual_sentences(),
    }
}

pub(super) fn execute(run: &Run, stage: Stage, backends: &Backends) -> Result<Vec<String>, StageError> {
    match stage {
        Stage::Segment => segment(run),
        Stage::Analyze => analyze(run, backends),
        Stage::Script => script(run, backends),
        Stage::Generate => generate(run, backends),
        Stage::Assemble => assemble(run),
    }
}

fn segment(run: &Run) -> Result<Vec<String>, StageError> {
    let config = run.config();
    let buffer = load_input(run)?;
    let mut seg_config = config.segmentation.clone();
    seg_config.seed = config.seed;
    let plan = match config.segmenter {
        Segmenter::Random => segment_random(buffer.duration_s(), &seg_config)?,
        Segmenter::RuleBased => segment_rule_based(&buffer, &seg_config)?,
    };
    Ok(vec![
        write(run, SEGMENTS_JSON, &plan.to_json())?,
        write(run, SEGMENTS_TXT, &plan.to_text())?,
    ])
}

fn analyze(run: &Run, backends: &Backends) -> Result<Vec<String>, StageError> {
    let embed = backends
        .embed
        .as_deref()
        .ok_or(StageError::MissingBackend(EndpointKind::Embed))?;
    let buffer = load_input(run)?;
    let plan = load_plan(run)?;
    let taxonomy = load_taxonomy(run)?;
    let analyzer = Analyzer::new(embed).with_concurrency(run.config().analysis_concurrency);
    let track = analyzer.analyze_track(&buffer, &taxonomy)?;
    // The story pipeline only needs track-level context.
    let segments = match run.config().pipeline {
        Pipeline::Clap => analyzer.analyze_segments(&buffer, &plan, &taxonomy)?,
        Pipeline::Lalm => Vec::new(),
    };
    let mut artifacts = vec![write(run, TRACK_TXT, &track.to_text())?];
    for seg in &segments {
        artifacts.push(write(run, &segment_txt(seg.segment_index + 1), &seg.to_text())?);
    }
    let record = AnalysisRecord { track, segments };
    let json = serde_json::to_string_pretty(&record).expect("analysis serializes") + "\n";
    artifacts.push(write(run, ANALYSIS_JSON, &json)?);
    Ok(artifacts)
}

pub(super) fn write_story(run: &Run, backends: &Backends) -> Result<String, StageError> {
    let chat = backends
        .chat_audio
        .as_deref()
        .ok_or(StageError::MissingBackend(EndpointKind::ChatAudio))?;
    let messages = build_lalm_story_request(
        &run.path(INPUT_FILE),
        run.config().prompt.additional_prompt.as_deref(),
    )?;
    let story = request_script(&messages, chat, &run.path(STORY_PROMPT), &run.path(STORY))?;
    StoryConcept::new(story, run.path(INPUT_FILE))?;
    Ok(STORY.to_string())
}

fn script(run: &Run, backends: &Backends) -> Result<Vec<String>, StageError> {
    let chat = backends
        .chat
        .as_deref()
        .ok_or(StageError::MissingBackend(EndpointKind::Chat))?;
    let plan = load_plan(run)?;
    let analysis = load_analysis(run)?;
    let mut artifacts = Vec::new();
    let (prompt, source) = match run.config().pipeline {
        Pipeline::Clap => {
            let mut options = run.config().prompt.clone();
            options.style_guideline_text = Some(style_text(run, &analysis));
            let prompt = build_clap_script_prompt(&analysis.track, &analysis.segments, &options)?;
            (prompt, ScriptSource::ClapPipeline)
        }
        Pipeline::Lalm => {
            if !run.path(STORY).is_file() {
                write_story(run, backends)?;
            }
            let story = StoryConcept::new(read(run, STORY)?, run.path(INPUT_FILE))?;
            artifacts.extend([STORY_PROMPT.to_string(), STORY.to_string()]);
            let style = style_text(run, &analysis);
            let prompt = build_decomposition_prompt(&story, &plan, Some(&style))?;
            (prompt, ScriptSource::LalmPipeline)
        }
    };
    let messages = [ChatMessage::user(prompt)];
    let attempts = run.config().script_retries + 1;
    let mut last = String::new();
    for _ in 0..attempts {
        let raw = request_script(&messages, chat, &run.path(SCRIPT_PROMPT), &run.path(RAW_RESPONSE))?;
        let mut script = match parse_script(&raw, plan.len()) {
            Ok(s) => s,
            Err(e) => {
                last = e.to_string();
                continue;
            }
        };
        script.source = source;
        let report = validate_script(&script, &plan);
        if !report.is_ok() {
            last = format!("{:?}", report.hard);
            continue;
        }
        let validation = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
        artifacts.extend([
            SCRIPT_PROMPT.to_string(),
            RAW_RESPONSE.to_string(),
            write(run, PARSED_SCRIPT, &(script.to_json() + "\n"))?,
            write(run, VALIDATION, &validation)?,
        ]);
        return Ok(artifacts);
    }
    Err(StageError::UnusableScript { attempts, last })
}

fn generate(run: &Run, backends: &Backends) -> Result<Vec<String>, StageError> {
    let video = backends
        .video
        .as_deref()
        .ok_or(StageError::MissingBackend(EndpointKind::Video))?;
    let plan = load_plan(run)?;
    let analysis = load_analysis(run)?;
    let script = load_script(run)?;
    let style = style_text(run, &analysis);
    let clips = generate_all(
        &script,
        &plan,
        Some(&style),
        video,
        &run.config().generation,
        run.config().seed,
        &run.path("clips"),
        &run.path("prompts"),
    )?;
    Ok(clips.iter().map(|c| clip_dir(c.scene_number())).collect())
}

fn assemble(run: &Run) -> Result<Vec<String>, StageError> {
    let plan = load_plan(run)?;
    let mut clips = Vec::with_capacity(plan.len());
    for n in 1..=plan.len() {
        let dir = run.path(&clip_dir(n));
        if dir.is_dir() {
            clips.push(ClipArtifact::load(&dir)?);
        }
    }
    let container = run.config().container;
    let rel = format!("output/{}", container.file_name());
    let spec = AssemblySpec {
        clips,
        audio_path: run.path(INPUT_FILE),
        output_path: run.path(&rel),
        container,
        expected_scenes: plan.len(),
        muxer: run.config().muxer.clone(),
        relative_to: Some(run.root().to_path_buf()),
    };
    assemble_video(&spec)?;
    Ok(vec![rel])
}
