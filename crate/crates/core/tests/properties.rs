use proptest::prelude::*;
use tunereel_core::audio::{AudioBuffer, TimeSpan};
use tunereel_core::backends::{
    AudioAttachment, BackendError, ChatBackend, ChatMessage, EmbeddingBackend, MockEmbedding,
    TemplateChat,
};
use tunereel_core::generation::{
    conform_clip, frame_name, ClipArtifact, ClipManifest, CLIP_MANIFEST, FRAME_PATTERN,
};
use tunereel_core::run::{Stage, StageStatus};
use tunereel_core::{ConformPolicy, GenerationError};
use tunereel_core::scripting::{parse_script, validate_script, Scene, ScriptSource, VideoScript};
use tunereel_core::segmentation::{segment_random, CutReason, SegmentPlan, SegmentationConfig};
use tunereel_core::taxonomy::{classify_category, LabelCategory, LabelTaxonomy};

fn random_cfg(seed: u64) -> SegmentationConfig {
    SegmentationConfig {
        seed,
        ..Default::default()
    }
}

proptest! {
    #[test]
    fn random_plans_tile_the_track(duration_ms in 30_000u64..=300_000, seed: u64) {
        let d = duration_ms as f64 / 1000.0;
        let plan = segment_random(d, &random_cfg(seed)).unwrap();
        let segs = plan.segments();
        prop_assert_eq!(segs[0].start_ms, 0);
        prop_assert_eq!(segs.last().unwrap().end_ms, duration_ms);
        for (i, s) in segs.iter().enumerate() {
            prop_assert_eq!(s.index, i);
            prop_assert!(s.end_ms > s.start_ms);
            if i + 1 < segs.len() {
                prop_assert_eq!(segs[i + 1].start_ms, s.end_ms);
                prop_assert!((4000..=8000).contains(&(s.end_ms - s.start_ms)));
                prop_assert_eq!(s.cut_reason, CutReason::RandomLength);
            } else {
                prop_assert!(s.end_ms - s.start_ms <= 8000);
                prop_assert_eq!(s.cut_reason, CutReason::EndOfTrack);
            }
        }
        prop_assert_eq!(plan.to_json(), segment_random(d, &random_cfg(seed)).unwrap().to_json());
    }

    #[test]
    fn plan_json_round_trips(duration_ms in 1u64..=400_000, seed: u64) {
        let plan = segment_random(duration_ms as f64 / 1000.0, &random_cfg(seed)).unwrap();
        let back = SegmentPlan::from_json(&plan.to_json()).unwrap();
        prop_assert_eq!(&back, &plan);
        prop_assert_eq!(back.to_json(), plan.to_json());
    }

    #[test]
    fn slices_of_a_partition_reassemble(
        len in 100usize..5000,
        rate in prop::sample::select(vec![8000u32, 16000, 22050, 44100]),
        fractions in prop::collection::btree_set(1u32..999, 0..8),
    ) {
        let samples: Vec<f32> = (0..len).map(|i| ((i * 7919) % 2001) as f32 / 1000.0 - 1.0).collect();
        let buf = AudioBuffer::new(samples.clone(), rate).unwrap();
        let d = buf.duration_s();
        let mut bounds = vec![0.0];
        bounds.extend(fractions.iter().map(|f| d * *f as f64 / 1000.0));
        bounds.push(d);
        let mut joined = Vec::new();
        let mut pieces = 0usize;
        for w in bounds.windows(2) {
            let Ok(span) = TimeSpan::new(w[0], w[1]) else { continue };
            if let Ok(piece) = buf.slice_span(span) {
                prop_assert_eq!(piece.sample_rate(), rate);
                let want = (w[1] - w[0]) * rate as f64;
                prop_assert!((piece.len() as f64 - want).abs() <= 1.0);
                joined.extend_from_slice(piece.samples());
                pieces += 1;
            }
        }
        // Only spans narrower than half a sample can be dropped.
        let boundaries = bounds.len() - 1;
        prop_assert!(samples.len().abs_diff(joined.len()) <= boundaries - pieces.min(boundaries));
        if pieces == boundaries {
            prop_assert_eq!(&joined, &samples);
        }
        let whole = buf.slice_span(TimeSpan::new(0.0, d).unwrap()).unwrap();
        prop_assert_eq!(whole.samples(), buf.samples());
    }

    #[test]
    fn mock_embeddings_are_unit_and_stable(text in ".{0,80}", seed: u64) {
        let m = MockEmbedding::new(seed);
        let a = m.embed_texts(std::slice::from_ref(&text)).unwrap().remove(0);
        let b = m.embed_texts(&[text]).unwrap().remove(0);
        prop_assert_eq!(a.len(), 512);
        let norm: f64 = a.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
        prop_assert!((norm - 1.0).abs() < 1e-6);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn parse_inverts_serialize(descriptions in prop::collection::vec("[A-Za-z][A-Za-z ,.'!?-]{0,60}", 1..30)) {
        let scenes: Vec<Scene> = descriptions
            .iter()
            .enumerate()
            .map(|(i, d)| Scene { number: i + 1, description: d.split_whitespace().collect::<Vec<_>>().join(" ") })
            .collect();
        let script = VideoScript { scenes: scenes.clone(), raw_response: String::new(), source: ScriptSource::ClapPipeline };
        let parsed = parse_script(&script.to_script_text(), scenes.len()).unwrap();
        prop_assert_eq!(parsed.scenes, scenes);
        let back = VideoScript::from_json(&script.to_json()).unwrap();
        prop_assert_eq!(back, script);
    }

    #[test]
    fn parser_never_panics(raw in "(BEGIN SCRIPT|END SCRIPT|SCENE [0-9]{0,3}:?|\n|[ -~]{0,10}){0,40}", expected in 0usize..10) {
        let _ = parse_script(&raw, expected);
    }

    #[test]
    fn stage_order_invariant_is_detected(statuses in prop::collection::vec(0u8..3, 5)) {
        let stage_status = |s: u8| match s { 0 => StageStatus::Pending, 1 => StageStatus::Done, _ => StageStatus::Failed };
        let mut text = String::from("{");
        for (i, (stage, s)) in Stage::ALL.iter().zip(&statuses).enumerate() {
            if i > 0 { text.push(','); }
            text.push_str(&format!("\"{}\":{{\"status\":{}}}", stage.as_str(), serde_json::to_string(&stage_status(*s)).unwrap()));
        }
        text.push('}');
        let mut manifest: serde_json::Value = serde_json::from_str(&template_manifest()).unwrap();
        manifest["stages"] = serde_json::from_str(&text).unwrap();
        let m: tunereel_core::RunManifest = serde_json::from_value(manifest).unwrap();
        let first_open = statuses.iter().position(|s| *s != 1).unwrap_or(5);
        let violates = statuses[first_open.min(5)..].contains(&1);
        prop_assert_eq!(m.problems().iter().any(|p| p.contains("is done but")), violates);
    }
}

fn template_manifest() -> String {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("a.wav");
    std::fs::write(&input, tunereel_core::synth::sine(440.0, 0.5, 8000, 0.5).to_wav_bytes()).unwrap();
    let m = tunereel_core::init_run(Default::default(), &input, &tmp.path().join("r")).unwrap();
    serde_json::to_string(&m).unwrap()
}

#[test]
fn template_chat_scripts_parse_for_every_count() {
    let chat = TemplateChat::new(3);
    for n in 1..=50 {
        let cfg = SegmentationConfig { min_random_s: 5.0, max_random_s: 5.0, ..Default::default() };
        let plan = segment_random(5.0 * n as f64, &cfg).unwrap();
        assert_eq!(plan.len(), n);
        let prompt = format!("Write a script. There are {n} scenes in total.\nBEGIN SCRIPT please.");
        let raw = chat.chat(&[ChatMessage::user(prompt)]).unwrap();
        let script = parse_script(&raw, n).unwrap_or_else(|e| panic!("n={n}: {e}"));
        assert!(validate_script(&script, &plan).is_ok(), "n={n}");
    }
    let wav = tunereel_core::synth::sine(220.0, 0.5, 8000, 0.3).to_wav_bytes();
    let story = chat
        .chat(&[ChatMessage::user_with_audio(AudioAttachment { name: "s.wav".into(), wav: wav.into() }, "story please")])
        .unwrap();
    assert!(!story.trim().is_empty());
}

/// Wraps the mock and multiplies one label's text vector and the audio
/// vector by positive factors.
struct Scaled {
    inner: MockEmbedding,
    label: String,
    label_factor: f32,
    audio_factor: f32,
}

impl EmbeddingBackend for Scaled {
    fn identity(&self) -> String {
        format!("scaled:{}:{}:{}", self.label, self.label_factor, self.audio_factor)
    }

    fn embed_audio(&self, audio: &AudioBuffer) -> Result<Vec<f32>, BackendError> {
        Ok(self.inner.embed_audio(audio)?.into_iter().map(|x| x * self.audio_factor).collect())
    }

    fn embed_texts(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, BackendError> {
        let mut v = self.inner.embed_texts(texts)?;
        for (t, e) in texts.iter().zip(v.iter_mut()) {
            if *t == self.label {
                e.iter_mut().for_each(|x| *x *= self.label_factor);
            }
        }
        Ok(v)
    }
}

fn categories() -> Vec<LabelCategory> {
    LabelTaxonomy::builtin().categories
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn argmax_ignores_positive_scaling(
        seed: u64,
        cat_idx in 0usize..14,
        label_pick: prop::sample::Index,
        label_factor in 0.01f32..100.0,
        audio_factor in 0.01f32..100.0,
        freq in 100.0f64..2000.0,
    ) {
        let category = &categories()[cat_idx];
        let audio = tunereel_core::synth::sine(freq, 0.25, 8000, 0.4);
        let base = classify_category(&audio, category, &MockEmbedding::new(seed)).unwrap();
        let scaled = Scaled {
            inner: MockEmbedding::new(seed),
            label: category.labels[label_pick.index(category.labels.len())].clone(),
            label_factor,
            audio_factor,
        };
        let other = classify_category(&audio, category, &scaled).unwrap();
        prop_assert_eq!(base.chosen_label, other.chosen_label);
    }
}

fn stored_clip(dir: &std::path::Path, frames: usize, fps: f64) -> ClipArtifact {
    for i in 0..frames {
        std::fs::write(dir.join(frame_name(i)), format!("frame {i}")).unwrap();
    }
    let manifest = ClipManifest {
        scene_number: 1,
        fps,
        frame_count: frames,
        frame_pattern: FRAME_PATTERN.into(),
        prompt_hash: "0".into(),
        seed: 0,
        width: 1,
        height: 1,
    };
    std::fs::write(dir.join(CLIP_MANIFEST), serde_json::to_string(&manifest).unwrap()).unwrap();
    ClipArtifact::load(dir).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn conform_reaches_target_frame_count(
        have in 1usize..60,
        duration_ms in 50u64..5000,
        fps in prop::sample::select(vec![8.0, 12.0, 24.0]),
        hold in any::<bool>(),
    ) {
        let tmp = tempfile::tempdir().unwrap();
        let clip = stored_clip(tmp.path(), have, fps);
        let duration = duration_ms as f64 / 1000.0;
        let need = ((duration * fps).round() as usize).max(1);
        let policy = if hold { ConformPolicy::HoldLastFrame } else { ConformPolicy::TrimEnd };
        match conform_clip(&clip, duration, policy) {
            Ok(out) => {
                prop_assert!(hold || have >= need);
                prop_assert_eq!(out.frame_count(), need);
                prop_assert_eq!(ClipArtifact::load(tmp.path()).unwrap().frame_count(), need);
                for i in 0..need {
                    let want = format!("frame {}", i.min(have - 1));
                    prop_assert_eq!(std::fs::read_to_string(out.frame_path(i)).unwrap(), want);
                }
                prop_assert!(!out.frame_path(need).exists());
            }
            Err(GenerationError::ClipTooShort { have: h, need: n, .. }) => {
                prop_assert!(!hold);
                prop_assert_eq!((h, n), (have, need));
            }
            Err(e) => prop_assert!(false, "{e}"),
        }
    }
}
