use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ScriptError, StoryConcept};
use crate::backends::{AudioAttachment, ChatMessage};
use crate::segmentation::SegmentPlan;
use crate::taxonomy::{SegmentAnalysis, TrackAnalysis};

pub const DEFAULT_CHARACTER_DIRECTIVE: &str = "at least one animal character";
pub const LALM_SYSTEM_PROMPT: &str = "You are a helpful assistant.";

const CONCRETE_SCENES: &str = "Make sure the scene descriptions are concrete and to the point, \
they need to be easy for a text2video model to generate videos from.";
const BRIEF_SCENES: &str = "Scene descriptions need to be as brief as possible. Every scene can \
be described in one sentence at the most. Omit all unnecesary details from the description.";
const SCENE_MARKER_INSTRUCTION: &str = "In your response, start the description of every scene \
with the exact letters: \"SCENE #:\", '#' substituted with the scene number. Do NOT add any \
special or any other type of characters to this line! Example: \"SCENE 1:\\n\"";
const BEGIN_MARKER_INSTRUCTION: &str = "Before the start of the script, add the words \
\"BEGIN SCRIPT\\n\" so that I can easily extract it.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScriptPromptOptions {
    pub additional_prompt: Option<String>,
    /// Who appears in the story, e.g. "at least four people".
    pub character_directive: String,
    /// Visual guideline sentences. Rendered from the track's visual-style
    /// labels when absent.
    pub style_guideline_text: Option<String>,
}

impl Default for ScriptPromptOptions {
    fn default() -> Self {
        Self {
            additional_prompt: None,
            character_directive: DEFAULT_CHARACTER_DIRECTIVE.into(),
            style_guideline_text: None,
        }
    }
}

/// Seconds rounded to two decimals, printed without trailing zeros but with
/// at least one decimal: 5.49, 6.2, 7.0.
pub fn format_duration(seconds: f64) -> String {
    let rounded = (seconds * 100.0).round() / 100.0;
    let s = format!("{rounded}");
    if s.contains('.') {
        s
    } else {
        format!("{s}.0")
    }
}

fn scene_length(duration_s: f64) -> String {
    format!("The scene will be {} seconds long.", format_duration(duration_s))
}

fn non_empty(s: &Option<String>) -> Option<&str> {
    s.as_deref().map(str::trim).filter(|s| !s.is_empty())
}

/// The script prompt for the embedding-analysis pipeline.
pub fn build_clap_script_prompt(
    track: &TrackAnalysis,
    segments: &[SegmentAnalysis],
    options: &ScriptPromptOptions,
) -> Result<String, ScriptError> {
    if segments.is_empty() {
        return Err(ScriptError::NoSegments);
    }
    let directive = options.character_directive.trim();
    if directive.is_empty() {
        return Err(ScriptError::EmptyDirective);
    }
    let mut opening = String::from("You need to think of a story and a script for a music video.");
    if let Some(extra) = non_empty(&options.additional_prompt) {
        opening.push(' ');
        opening.push_str(extra);
    }
    let visual = match non_empty(&options.style_guideline_text) {
        Some(text) => text.to_string(),
        None => track.visual_sentences(),
    };
    let mut lines = vec![
        opening,
        "The story structure needs to have a beginning, middle and an ending.".into(),
        "You will write the story based on the characteristics of the music that are provided to you.".into(),
        "The story needs to be told as descriptions of sccenes that will appear in a music video.".into(),
        "The structure needs to be reflected in the scene layout, to try to mimic the story's progression.".into(),
        format!(
            "The story should include {directive}. For consistency, repeat their descriptions in every scene."
        ),
        CONCRETE_SCENES.into(),
        format!("There are {} scenes in total.", segments.len()),
        "When listening to the entire song, it can be described like this:".into(),
        format!("the overall {} ", track.content_sentences()),
        String::new(),
        "When listening to individual segments, they can be described like this:".into(),
        String::new(),
    ];
    for (i, seg) in segments.iter().enumerate() {
        lines.push(format!("Scene {}:", i + 1));
        lines.push(format!("{} {}", seg.sentences(), scene_length(seg.duration_s)));
    }
    lines.extend([
        String::new(),
        "Each scene needs to visually match the following guidelines:".into(),
        format!("{visual} "),
        String::new(),
        BRIEF_SCENES.into(),
        SCENE_MARKER_INSTRUCTION.into(),
        BEGIN_MARKER_INSTRUCTION.into(),
    ]);
    Ok(lines.join("\n"))
}

/// The user text of the story request, with the optional extra instruction
/// in its placeholder slot.
pub fn lalm_story_text(additional_prompt: Option<&str>) -> String {
    format!(
        "Think of a story for a music video for this song. {} The story should be engaging and \
         visually appealing, with a focus on the emotions conveyed by the music and lyrics.",
        additional_prompt.unwrap_or("")
    )
}

/// System message plus a user message carrying the song and the story request.
pub fn build_lalm_story_request(
    song_ref: &Path,
    additional_prompt: Option<&str>,
) -> Result<Vec<ChatMessage>, ScriptError> {
    let wav = std::fs::read(song_ref).map_err(|source| ScriptError::MissingAudio {
        path: song_ref.to_path_buf(),
        source,
    })?;
    let audio = AudioAttachment {
        name: song_ref
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "audio.wav".into()),
        wav: wav.into(),
    };
    let extra = additional_prompt.map(str::trim).filter(|s| !s.is_empty());
    Ok(vec![
        ChatMessage::system(LALM_SYSTEM_PROMPT),
        ChatMessage::user_with_audio(audio, lalm_story_text(extra)),
    ])
}

/// Asks a text model to split a finished story into one scene per segment,
/// with the same output markers as the script prompt.
pub fn build_decomposition_prompt(
    story: &StoryConcept,
    plan: &SegmentPlan,
    style_guideline_text: Option<&str>,
) -> Result<String, ScriptError> {
    if story.text.trim().is_empty() {
        return Err(ScriptError::EmptyStory);
    }
    if plan.is_empty() {
        return Err(ScriptError::NoSegments);
    }
    let mut lines = vec![
        "Below is the story for a music video.".to_string(),
        String::new(),
        "STORY:".into(),
        story.text.trim().to_string(),
        String::new(),
        "Turn this story into a script for the music video, told as descriptions of scenes \
         that follow the story from its beginning to its end."
            .into(),
        CONCRETE_SCENES.into(),
        format!("There are {} scenes in total.", plan.len()),
        "The scenes have these lengths:".into(),
    ];
    for seg in plan.segments() {
        lines.push(format!("Scene {}: {}", seg.index + 1, scene_length(seg.duration_s())));
    }
    if let Some(style) = style_guideline_text.map(str::trim).filter(|s| !s.is_empty()) {
        lines.push(String::new());
        lines.push("Each scene needs to visually match the following guidelines:".into());
        lines.push(style.to_string());
    }
    lines.extend([
        String::new(),
        BRIEF_SCENES.into(),
        SCENE_MARKER_INSTRUCTION.into(),
        BEGIN_MARKER_INSTRUCTION.into(),
    ]);
    Ok(lines.join("\n"))
}
