//! Music-to-video pipeline: segment a song, label its parts, have a language
//! model write one scene per segment, render the scenes and assemble them
//! over the original audio.

pub mod assembly;
pub mod audio;
pub mod backends;
mod fsutil;
pub mod generation;
pub mod scripting;
pub mod segmentation;
pub mod synth;
pub mod run;
pub mod taxonomy;

pub use fsutil::write_atomic;
pub use assembly::{assemble_video, AssemblyError, AssemblySpec, Container, MuxerCommand};
pub use audio::{load_audio, AudioBuffer, AudioError, TimeSpan};
pub use backends::{BackendEndpointConfig, BackendError, EndpointKind, HttpBackend};
pub use generation::{ClipArtifact, ConformPolicy, GenerationError, GenerationSettings};
pub use run::{
    init_run, resume_run, run_pipeline, Backends, Pipeline, Run, RunConfig, RunError, RunManifest,
    Segmenter, Stage, StageStatus,
};
pub use scripting::{parse_script, Scene, ScriptError, ScriptPromptOptions, VideoScript};
pub use segmentation::{CutReason, Segment, SegmentPlan, SegmentationConfig, SegmentationError};
pub use taxonomy::{LabelTaxonomy, SegmentAnalysis, TaxonomyError, TrackAnalysis};
