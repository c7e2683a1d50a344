//! Prompt and parser checks against the reference prompt/response pair in
//! `fixtures/`.

use tunereel_core::backends::{ChatBackend, ChatMessage, ReplayChat, TemplateChat};
use tunereel_core::scripting::*;
use tunereel_core::segmentation::{CutReason, Segment, SegmentMethod, SegmentPlan};
use tunereel_core::taxonomy::{CategoryClassification, LabelTaxonomy, SegmentAnalysis, TrackAnalysis};

const PROMPT: &str = include_str!("../fixtures/clap_prompt.txt");
const RESPONSE: &str = include_str!("../fixtures/clap_response.txt");

const DURATIONS_MS: [u64; 7] = [5490, 7130, 7870, 6660, 6200, 5720, 4940];

fn classification(taxonomy: &LabelTaxonomy, id: &str, label: &str) -> CategoryClassification {
    let cat = taxonomy.category(id).unwrap();
    assert!(cat.labels.iter().any(|l| l == label), "{label:?} not in {id}");
    CategoryClassification {
        category_id: id.into(),
        display_name: cat.display_name.clone(),
        chosen_label: label.into(),
        scores: Vec::new(),
    }
}

fn reference_analyses() -> (TrackAnalysis, Vec<SegmentAnalysis>) {
    let t = LabelTaxonomy::builtin();
    let c = |id, label| classification(&t, id, label);
    let track = TrackAnalysis {
        content_style: vec![
            c("instrumental_energy", "It has multiple peaks and valleys throughout."),
            c("instrumental_palette", "Orchestral or cinematic instruments"),
            c("tempo_range", "Very fast (140+ BPM)"),
            c("production_quality", "Very polished, glossy, and modern"),
            c("mood", "Uplifting and bright"),
        ],
        visual_style: vec![
            c("location", "exterior"),
            c("visual_setting", "Natural"),
            c("visual_style", "Monochromatic or limited color palette"),
            c("visual_focus", "Multiple focal points or characters"),
        ],
    };
    let moderate = "Moderate intensity with a clear beat";
    let high = "High energy and full instrumentation";
    let strings = "String or orchestral elements";
    let fluct = "It fluctuates multiple times within the segment";
    let drop = "It features a sudden drop or pause before the next section";
    let rows = [
        (moderate, strings, fluct, "It acts as a noticeable break or \"breather\""),
        (moderate, strings, fluct, drop),
        (high, strings, fluct, drop),
        (high, strings, fluct, "It cleanly continues the energy from the previous segment"),
        (moderate, strings, "It stays uniformly loud/energetic", "It slowly fades out or prepares for a drop"),
        (high, "Synths or electronic sounds", fluct, "It dramatically shifts the energy or mood"),
        (high, strings, fluct, drop),
    ];
    let segments = rows
        .iter()
        .zip(DURATIONS_MS)
        .enumerate()
        .map(|(i, ((intensity, element, shift, function), ms))| SegmentAnalysis {
            segment_index: i,
            duration_s: ms as f64 / 1000.0,
            classifications: vec![
                c("instrumental_intensity", intensity),
                c("prominent_element", element),
                c("dynamic_shift", shift),
                c("rhythm", "Irregular or changing time signatures"),
                c("transition_function", function),
            ],
        })
        .collect();
    (track, segments)
}

fn reference_plan() -> SegmentPlan {
    let mut start = 0;
    let segments = DURATIONS_MS
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let s = Segment {
                index: i,
                start_ms: start,
                end_ms: start + d,
                cut_reason: if i == 6 { CutReason::EndOfTrack } else { CutReason::RandomLength },
            };
            start += d;
            s
        })
        .collect();
    SegmentPlan::new(segments, 44_010, SegmentMethod::Random, 0).unwrap()
}

fn options() -> ScriptPromptOptions {
    ScriptPromptOptions {
        character_directive: "at least four people".into(),
        ..Default::default()
    }
}

#[test]
fn clap_prompt_matches_reference_byte_for_byte() {
    let (track, segments) = reference_analyses();
    let prompt = build_clap_script_prompt(&track, &segments, &options()).unwrap();
    for (i, (got, want)) in prompt.lines().zip(PROMPT.lines()).enumerate() {
        assert_eq!(got, want, "line {}", i + 1);
    }
    assert_eq!(prompt, PROMPT);
}

#[test]
fn clap_prompt_key_lines() {
    let (track, segments) = reference_analyses();
    let prompt = build_clap_script_prompt(&track, &segments, &options()).unwrap();
    assert!(prompt.contains("There are 7 scenes in total."));
    for d in ["5.49", "7.13", "7.87", "6.66", "6.2", "5.72", "4.94"] {
        assert!(prompt.contains(&format!("The scene will be {d} seconds long.")), "{d}");
    }
    assert!(prompt.contains("start the description of every scene with the exact letters: \"SCENE #:\""));
    assert!(prompt.contains("add the words \"BEGIN SCRIPT\\n\""));
}

#[test]
fn clap_prompt_is_pure_and_takes_extras() {
    let (track, segments) = reference_analyses();
    let a = build_clap_script_prompt(&track, &segments, &options()).unwrap();
    assert_eq!(a, build_clap_script_prompt(&track, &segments, &options()).unwrap());
    let extra = ScriptPromptOptions {
        additional_prompt: Some("Set it in winter.".into()),
        ..options()
    };
    let b = build_clap_script_prompt(&track, &segments, &extra).unwrap();
    assert!(b.starts_with("You need to think of a story and a script for a music video. Set it in winter.\n"));
    assert!(matches!(
        build_clap_script_prompt(&track, &[], &options()),
        Err(ScriptError::NoSegments)
    ));
}

#[test]
fn reference_response_parses_to_seven_scenes() {
    let script = parse_script(RESPONSE, 7).unwrap();
    assert_eq!(script.scenes.len(), 7);
    assert!(script.scenes[0].description.starts_with("A group of four people"));
    assert!(script.scenes[6].description.ends_with("final, uplifting note."));
    assert_eq!(script.raw_response, RESPONSE);
    let report = validate_script(&script, &reference_plan());
    assert!(report.hard.is_empty(), "{report:?}");
}

#[test]
fn replay_mock_returns_reference_response() {
    let (track, segments) = reference_analyses();
    let prompt = build_clap_script_prompt(&track, &segments, &options()).unwrap();
    let chat = ReplayChat::new().with(PROMPT, RESPONSE);
    assert_eq!(chat.chat(&[ChatMessage::user(prompt)]).unwrap(), RESPONSE);
}

#[test]
fn template_mock_answers_the_reference_prompt() {
    let reply = TemplateChat::new(1).chat(&[ChatMessage::user(PROMPT)]).unwrap();
    let script = parse_script(&reply, 7).unwrap();
    assert!(validate_script(&script, &reference_plan()).is_ok());
}

#[test]
fn wrong_count_reported() {
    assert!(matches!(
        parse_script(RESPONSE, 8),
        Err(ScriptError::SceneCountMismatch { found: 7, expected: 8 })
    ));
    let six = RESPONSE.replace("SCENE 7:", "Scene seven:");
    assert!(matches!(
        parse_script(&six, 7),
        Err(ScriptError::SceneCountMismatch { found: 6, expected: 7 })
    ));
}
