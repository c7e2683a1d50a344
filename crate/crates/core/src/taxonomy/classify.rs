use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use super::{
    CategoryClassification, LabelCategory, LabelScore, LabelTaxonomy, Scope, SegmentAnalysis,
    TaxonomyError, TrackAnalysis,
};
use crate::audio::AudioBuffer;
use crate::backends::{l2_normalize, EmbeddingBackend};
use crate::segmentation::{Segment, SegmentPlan};

type LabelKey = (String, String);

/// Unit-norm label embeddings keyed by (backend identity, label text).
#[derive(Debug, Default)]
pub struct LabelCache {
    entries: RwLock<HashMap<LabelKey, Arc<[f32]>>>,
}

impl LabelCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("label cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Embeddings for `labels` in order, fetching only the ones not cached.
    pub fn embeddings(
        &self,
        backend: &dyn EmbeddingBackend,
        labels: &[String],
    ) -> Result<Vec<Arc<[f32]>>, TaxonomyError> {
        let id = backend.identity();
        let key = |l: &String| (id.clone(), l.clone());
        let mut missing: Vec<String> = {
            let map = self.entries.read().expect("label cache lock");
            labels.iter().filter(|l| !map.contains_key(&key(l))).cloned().collect()
        };
        missing.dedup();
        if !missing.is_empty() {
            let vectors = backend.embed_texts(&missing)?;
            if vectors.len() != missing.len() {
                return Err(TaxonomyError::Invalid(format!(
                    "backend returned {} embeddings for {} labels",
                    vectors.len(),
                    missing.len()
                )));
            }
            let mut fresh = Vec::with_capacity(missing.len());
            for (label, v) in missing.iter().zip(vectors) {
                let unit = l2_normalize(&v)
                    .ok_or_else(|| TaxonomyError::DegenerateEmbedding(format!("label {label:?}")))?;
                fresh.push((key(label), Arc::<[f32]>::from(unit)));
            }
            self.entries.write().expect("label cache lock").extend(fresh);
        }
        let map = self.entries.read().expect("label cache lock");
        Ok(labels.iter().map(|l| map[&key(l)].clone()).collect())
    }
}

/// Cosine similarity of a unit audio vector against unit label vectors.
pub fn cosine_scores(audio_unit: &[f32], labels: &[Arc<[f32]>]) -> Result<Vec<f64>, TaxonomyError> {
    labels
        .iter()
        .map(|l| {
            if l.len() != audio_unit.len() {
                return Err(TaxonomyError::DimensionMismatch {
                    audio: audio_unit.len(),
                    label: l.len(),
                });
            }
            Ok(audio_unit
                .iter()
                .zip(l.iter())
                .map(|(a, b)| *a as f64 * *b as f64)
                .sum())
        })
        .collect()
}

/// Index of the largest score; the earliest index wins ties.
pub fn argmax_first(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if best.map_or(true, |b| s > scores[b]) {
            best = Some(i);
        }
    }
    best
}

/// Classifies audio against a taxonomy, caching label embeddings across calls.
pub struct Analyzer<'a> {
    backend: &'a dyn EmbeddingBackend,
    cache: LabelCache,
    concurrency: usize,
}

impl<'a> Analyzer<'a> {
    pub fn new(backend: &'a dyn EmbeddingBackend) -> Self {
        Self {
            backend,
            cache: LabelCache::new(),
            concurrency: 4,
        }
    }

    /// Maximum number of segments embedded at once.
    pub fn with_concurrency(mut self, limit: usize) -> Self {
        self.concurrency = limit.max(1);
        self
    }

    pub fn cache(&self) -> &LabelCache {
        &self.cache
    }

    fn embed_audio(&self, audio: &AudioBuffer) -> Result<Vec<f32>, TaxonomyError> {
        let raw = self.backend.embed_audio(audio)?;
        l2_normalize(&raw).ok_or_else(|| TaxonomyError::DegenerateEmbedding("audio".into()))
    }

    /// Scores a raw (not necessarily normalised) audio embedding.
    pub fn classify_embedding(
        &self,
        audio_embedding: &[f32],
        category: &LabelCategory,
    ) -> Result<CategoryClassification, TaxonomyError> {
        if category.labels.is_empty() {
            return Err(TaxonomyError::EmptyCategory(category.id.clone()));
        }
        let unit = l2_normalize(audio_embedding)
            .ok_or_else(|| TaxonomyError::DegenerateEmbedding("audio".into()))?;
        let label_vecs = self.cache.embeddings(self.backend, &category.labels)?;
        let scores = cosine_scores(&unit, &label_vecs)?;
        let best = argmax_first(&scores).expect("non-empty category");
        Ok(CategoryClassification {
            category_id: category.id.clone(),
            display_name: category.display_name.clone(),
            chosen_label: category.labels[best].clone(),
            scores: category
                .labels
                .iter()
                .zip(scores)
                .map(|(label, score)| LabelScore {
                    label: label.clone(),
                    score,
                })
                .collect(),
        })
    }

    pub fn classify(
        &self,
        audio: &AudioBuffer,
        category: &LabelCategory,
    ) -> Result<CategoryClassification, TaxonomyError> {
        if category.labels.is_empty() {
            return Err(TaxonomyError::EmptyCategory(category.id.clone()));
        }
        let emb = self.embed_audio(audio)?;
        self.classify_embedding(&emb, category)
    }

    fn classify_scope(
        &self,
        embedding: &[f32],
        taxonomy: &LabelTaxonomy,
        scope: Scope,
    ) -> Result<Vec<CategoryClassification>, TaxonomyError> {
        taxonomy
            .in_scope(scope)
            .map(|c| self.classify_embedding(embedding, c))
            .collect()
    }

    /// Classifies the whole track once per content-style and visual-style
    /// category.
    pub fn analyze_track(
        &self,
        buffer: &AudioBuffer,
        taxonomy: &LabelTaxonomy,
    ) -> Result<TrackAnalysis, TaxonomyError> {
        let emb = self.embed_audio(buffer)?;
        Ok(TrackAnalysis {
            content_style: self.classify_scope(&emb, taxonomy, Scope::ContentStyle)?,
            visual_style: self.classify_scope(&emb, taxonomy, Scope::VisualStyle)?,
        })
    }

    pub fn analyze_segments(
        &self,
        buffer: &AudioBuffer,
        plan: &SegmentPlan,
        taxonomy: &LabelTaxonomy,
    ) -> Result<Vec<SegmentAnalysis>, TaxonomyError> {
        self.analyze_spans(buffer, plan.segments(), taxonomy)
    }

    /// One analysis per segment, in segment order. Segments are processed
    /// concurrently up to the configured limit; the first failing segment (by
    /// index) is reported.
    pub fn analyze_spans(
        &self,
        buffer: &AudioBuffer,
        segments: &[Segment],
        taxonomy: &LabelTaxonomy,
    ) -> Result<Vec<SegmentAnalysis>, TaxonomyError> {
        if segments.is_empty() {
            return Ok(Vec::new());
        }
        // Warm the cache once so workers only take read locks.
        for c in taxonomy.in_scope(Scope::SegmentWise) {
            self.cache.embeddings(self.backend, &c.labels)?;
        }
        let analyze_one = |seg: &Segment| -> Result<SegmentAnalysis, TaxonomyError> {
            let audio = buffer.slice_span(seg.span())?;
            let emb = self.embed_audio(&audio)?;
            Ok(SegmentAnalysis {
                segment_index: seg.index,
                duration_s: seg.duration_s(),
                classifications: self.classify_scope(&emb, taxonomy, Scope::SegmentWise)?,
            })
        };
        let results: Vec<Mutex<Option<Result<SegmentAnalysis, TaxonomyError>>>> =
            segments.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        std::thread::scope(|s| {
            for _ in 0..self.concurrency.min(segments.len()) {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(seg) = segments.get(i) else { break };
                    *results[i].lock().expect("result slot") = Some(analyze_one(seg));
                });
            }
        });
        results
            .into_iter()
            .zip(segments)
            .map(|(slot, seg)| {
                slot.into_inner()
                    .expect("result slot")
                    .expect("every segment visited")
                    .map_err(|e| TaxonomyError::Segment {
                        index: seg.index,
                        source: Box::new(e),
                    })
            })
            .collect()
    }
}

pub fn classify_category(
    audio: &AudioBuffer,
    category: &LabelCategory,
    backend: &dyn EmbeddingBackend,
) -> Result<CategoryClassification, TaxonomyError> {
    Analyzer::new(backend).classify(audio, category)
}

pub fn analyze_segments(
    buffer: &AudioBuffer,
    plan: &SegmentPlan,
    taxonomy: &LabelTaxonomy,
    backend: &dyn EmbeddingBackend,
) -> Result<Vec<SegmentAnalysis>, TaxonomyError> {
    Analyzer::new(backend).analyze_segments(buffer, plan, taxonomy)
}

pub fn analyze_track(
    buffer: &AudioBuffer,
    taxonomy: &LabelTaxonomy,
    backend: &dyn EmbeddingBackend,
) -> Result<TrackAnalysis, TaxonomyError> {
    Analyzer::new(backend).analyze_track(buffer, taxonomy)
}
