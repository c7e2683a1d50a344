use std::fs;

use super::stages::*;
use super::*;
use crate::backends::ReplayChat;
use crate::generation::GenerationSettings;
use crate::scripting::{ScriptSource, VideoScript};
use crate::segmentation::SegmentPlan;
use crate::synth;

fn song(dir: &Path) -> PathBuf {
    let path = dir.join("song.wav");
    fs::write(&path, synth::demo_song(44.01, 16000).to_wav_bytes()).unwrap();
    path
}

fn small_config(seed: u64) -> RunConfig {
    RunConfig {
        seed,
        generation: GenerationSettings {
            width: 16,
            height: 16,
            ..Default::default()
        },
        ..Default::default()
    }
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn init_creates_skeleton_with_pending_stages() {
    let tmp = tempfile::tempdir().unwrap();
    let input = song(tmp.path());
    let dir = tmp.path().join("run");
    let m = init_run(small_config(1), &input, &dir).unwrap();
    assert_eq!(m.stages.len(), 5);
    assert!(m.stages.values().all(|r| r.status == StageStatus::Pending));
    for sub in SUBDIRS {
        assert!(dir.join(sub).is_dir(), "{sub}");
    }
    assert_eq!(fs::read(dir.join(INPUT_FILE)).unwrap(), fs::read(&input).unwrap());
    assert!(dir.join(MANIFEST_FILE).is_file());
    assert!(!dir.join(LOCK_FILE).exists());

    let err = init_run(small_config(1), &input, &dir).unwrap_err();
    assert!(matches!(err, RunError::DirectoryNotEmpty(_)));
}

#[test]
fn init_rejects_bad_input_and_config() {
    let tmp = tempfile::tempdir().unwrap();
    let bogus = tmp.path().join("not.wav");
    fs::write(&bogus, b"hello").unwrap();
    let err = init_run(small_config(1), &bogus, &tmp.path().join("a")).unwrap_err();
    assert!(matches!(err, RunError::Input { .. }));

    let mut cfg = small_config(1);
    cfg.analysis_rate = 0;
    cfg.generation.fps = 0.0;
    let err = init_run(cfg, &song(tmp.path()), &tmp.path().join("b")).unwrap_err();
    match err {
        RunError::InvalidConfig(p) => assert_eq!(p.len(), 2, "{p:?}"),
        other => panic!("{other}"),
    }
}

#[test]
fn config_hash_tracks_config() {
    let a = small_config(1);
    assert_eq!(a.hash(), a.clone().hash());
    let mut b = a.clone();
    b.seed = 2;
    assert_ne!(a.hash(), b.hash());
    let mut c = a.clone();
    c.segmentation.max_rule_s = 6.5;
    assert_ne!(a.hash(), c.hash());
    let round: RunConfig = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
    assert_eq!(round.hash(), a.hash());
}

#[test]
fn full_mock_run_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let input = song(tmp.path());
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let dir = tmp.path().join(name);
        init_run(small_config(7), &input, &dir).unwrap();
        let m = run_pipeline(&dir, &Backends::mock(7), None).unwrap();
        assert!(m.is_complete());
        let plan = SegmentPlan::from_json(&fs::read_to_string(dir.join(SEGMENTS_JSON)).unwrap()).unwrap();
        for rel in [SEGMENTS_TXT, TRACK_TXT, SCRIPT_PROMPT, RAW_RESPONSE, PARSED_SCRIPT] {
            assert!(resolve(&dir, rel).is_file(), "{rel}");
        }
        for i in 1..=plan.len() {
            assert!(dir.join(format!("analysis/segment_{i}.txt")).is_file());
            assert!(dir.join(format!("clips/scene_{i}/clip.json")).is_file());
            assert!(dir.join(format!("prompts/scene_{i}.txt")).is_file());
        }
        let out: crate::assembly::AssemblyManifest =
            serde_json::from_str(&fs::read_to_string(dir.join("output/final.manifest.json")).unwrap()).unwrap();
        assert_eq!(out.clips.len(), plan.len());
        assert!((out.video_duration_s - 44.01).abs() <= plan.len() as f64 / out.fps);
        let mut tree = read_tree(&dir);
        tree.retain(|(rel, _)| rel != MANIFEST_FILE);
        outputs.push(tree);
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn stop_after_script_then_resume_matches_uninterrupted() {
    let tmp = tempfile::tempdir().unwrap();
    let input = song(tmp.path());
    let full = tmp.path().join("full");
    init_run(small_config(3), &input, &full).unwrap();
    run_pipeline(&full, &Backends::mock(3), None).unwrap();

    let part = tmp.path().join("part");
    init_run(small_config(3), &input, &part).unwrap();
    let m = run_pipeline(&part, &Backends::mock(3), Some(Stage::Script)).unwrap();
    assert_eq!(m.status(Stage::Script), StageStatus::Done);
    assert_eq!(m.status(Stage::Generate), StageStatus::Pending);
    assert!(part.join(PARSED_SCRIPT).is_file());
    assert!(fs::read_dir(part.join("clips")).unwrap().next().is_none());

    let m = resume_run(&part, &Backends::mock(3)).unwrap();
    assert!(m.is_complete());
    let name = "output/final.manifest.json";
    assert_eq!(fs::read(resolve(&full, name)).unwrap(), fs::read(resolve(&part, name)).unwrap());

    // A finished run resumes as a no-op.
    let before = fs::read(part.join(MANIFEST_FILE)).unwrap();
    resume_run(&part, &Backends::mock(3)).unwrap();
    assert_eq!(fs::read(part.join(MANIFEST_FILE)).unwrap(), before);
}

#[test]
fn deleted_artifact_is_an_integrity_error() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    init_run(small_config(1), &song(tmp.path()), &dir).unwrap();
    run_pipeline(&dir, &Backends::mock(1), Some(Stage::Segment)).unwrap();
    fs::remove_file(dir.join(SEGMENTS_JSON)).unwrap();
    let err = resume_run(&dir, &Backends::mock(1)).unwrap_err();
    assert!(matches!(err, RunError::Integrity { stage: Stage::Segment, .. }), "{err}");

    let missing = tmp.path().join("nothing");
    assert!(matches!(Run::open(&missing), Err(RunError::MissingManifest(_))));
}

#[test]
fn edited_manifest_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    init_run(small_config(1), &song(tmp.path()), &dir).unwrap();
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).unwrap().replacen("\"seed\": 1", "\"seed\": 2", 1);
    fs::write(&path, text).unwrap();
    assert!(matches!(Run::open(&dir), Err(RunError::CorruptManifest { .. })));
}

#[test]
fn second_writer_is_locked_out() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    init_run(small_config(1), &song(tmp.path()), &dir).unwrap();
    let first = Run::open(&dir).unwrap();
    assert!(matches!(Run::open(&dir), Err(RunError::Locked(_))));
    drop(first);
    Run::open(&dir).unwrap();
    // A lock left by a process that is gone is taken over.
    fs::write(dir.join(LOCK_FILE), "4294967295").unwrap();
    Run::open(&dir).unwrap();
}

#[test]
fn stages_run_in_order_only() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    let mut run = Run::init(&dir, small_config(1), &song(tmp.path())).unwrap();
    let err = run.run_stage(Stage::Script, &Backends::mock(1)).unwrap_err();
    assert!(matches!(
        err,
        RunError::NotReady {
            stage: Stage::Script,
            blocking: Stage::Segment
        }
    ));
}

#[test]
fn failed_stage_is_recorded_and_resumable() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    init_run(small_config(1), &song(tmp.path()), &dir).unwrap();
    let mut no_video = Backends::mock(1);
    no_video.video = None;
    let err = run_pipeline(&dir, &no_video, None).unwrap_err();
    assert!(matches!(err, RunError::StageFailed { stage: Stage::Generate, .. }));
    let run = Run::open(&dir).unwrap();
    let m = run.manifest();
    assert_eq!(m.status(Stage::Script), StageStatus::Done);
    assert_eq!(m.status(Stage::Generate), StageStatus::Failed);
    assert!(m.record(Stage::Generate).unwrap().error.as_deref().unwrap().contains("Video"));
    assert_eq!(m.status(Stage::Assemble), StageStatus::Pending);
    drop(run);
    assert!(resume_run(&dir, &Backends::mock(1)).unwrap().is_complete());
}

#[test]
fn unusable_script_is_retried_then_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    init_run(small_config(1), &song(tmp.path()), &dir).unwrap();
    let mut backends = Backends::mock(1);
    run_pipeline(&dir, &backends, Some(Stage::Analyze)).unwrap();
    let prompt_free = ReplayChat::new();
    backends.chat = Some(Box::new(prompt_free));
    // A replay miss is a backend error and is not retried.
    assert!(run_pipeline(&dir, &backends, None).is_err());

    struct Garbage(std::sync::atomic::AtomicU32);
    impl ChatBackend for Garbage {
        fn chat(&self, _: &[crate::backends::ChatMessage]) -> Result<String, crate::backends::BackendError> {
            self.0.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            Ok("no markers here".into())
        }
    }
    let garbage = std::sync::Arc::new(Garbage(Default::default()));
    struct Shared(std::sync::Arc<Garbage>);
    impl ChatBackend for Shared {
        fn chat(&self, m: &[crate::backends::ChatMessage]) -> Result<String, crate::backends::BackendError> {
            self.0.chat(m)
        }
    }
    backends.chat = Some(Box::new(Shared(garbage.clone())));
    let err = run_pipeline(&dir, &backends, None).unwrap_err();
    assert!(err.to_string().contains("3 attempts"), "{err}");
    assert_eq!(garbage.0.load(std::sync::atomic::Ordering::SeqCst), 3);
    assert!(dir.join(SCRIPT_PROMPT).is_file());
    assert_eq!(fs::read_to_string(dir.join(RAW_RESPONSE)).unwrap(), "no markers here");
}

#[test]
fn lalm_run_writes_story_and_embeds_it() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    let mut cfg = small_config(5);
    cfg.pipeline = Pipeline::Lalm;
    init_run(cfg, &song(tmp.path()), &dir).unwrap();
    let m = run_pipeline(&dir, &Backends::mock(5), None).unwrap();
    assert!(m.is_complete());
    let story = fs::read_to_string(dir.join(STORY)).unwrap();
    assert!(!story.trim().is_empty());
    assert!(dir.join(STORY_PROMPT).is_file());
    assert!(fs::read_to_string(dir.join(SCRIPT_PROMPT)).unwrap().contains(story.trim()));
    assert!(!dir.join("analysis/segment_1.txt").exists());
    let script = VideoScript::from_json(&fs::read_to_string(dir.join(PARSED_SCRIPT)).unwrap()).unwrap();
    assert_eq!(script.source, ScriptSource::LalmPipeline);
}

#[test]
fn story_step_needs_lalm() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    let mut run = Run::init(&dir, small_config(1), &song(tmp.path())).unwrap();
    assert!(matches!(run.write_story(&Backends::mock(1)), Err(RunError::NotLalm)));
}

#[test]
fn rerunning_a_done_stage_invalidates_later_ones() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    let mut run = Run::init(&dir, small_config(1), &song(tmp.path())).unwrap();
    let b = Backends::mock(1);
    run.run_pending(&b, Some(Stage::Script)).unwrap();
    run.run_stage(Stage::Analyze, &b).unwrap();
    assert_eq!(run.manifest().status(Stage::Analyze), StageStatus::Done);
    assert_eq!(run.manifest().status(Stage::Script), StageStatus::Pending);
    assert!(run.manifest().problems().is_empty());
}
