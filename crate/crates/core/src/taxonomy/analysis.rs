use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelScore {
    pub label: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryClassification {
    pub category_id: String,
    pub display_name: String,
    pub chosen_label: String,
    /// Cosine similarity per label, in taxonomy order.
    pub scores: Vec<LabelScore>,
}

impl CategoryClassification {
    pub fn sentence(&self) -> String {
        format!("{} is {}.", self.display_name, self.chosen_label)
    }

    pub fn chosen_score(&self) -> Option<f64> {
        self.scores
            .iter()
            .find(|s| s.label == self.chosen_label)
            .map(|s| s.score)
    }
}

fn sentences(list: &[CategoryClassification]) -> String {
    list.iter()
        .map(CategoryClassification::sentence)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentAnalysis {
    pub segment_index: usize,
    pub duration_s: f64,
    pub classifications: Vec<CategoryClassification>,
}

impl SegmentAnalysis {
    /// `"Instrumental intensity is ... . Rhythm is ... ."`
    pub fn sentences(&self) -> String {
        sentences(&self.classifications)
    }

    pub fn to_text(&self) -> String {
        format!("{}\n", self.sentences())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackAnalysis {
    pub content_style: Vec<CategoryClassification>,
    pub visual_style: Vec<CategoryClassification>,
}

impl TrackAnalysis {
    pub fn content_sentences(&self) -> String {
        sentences(&self.content_style)
    }

    pub fn visual_sentences(&self) -> String {
        sentences(&self.visual_style)
    }

    pub fn to_text(&self) -> String {
        format!(
            "Content style: {}\nVisual style: {}\n",
            self.content_sentences(),
            self.visual_sentences()
        )
    }
}
