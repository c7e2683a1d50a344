use serde::{Deserialize, Serialize};

use super::VideoScript;
use crate::segmentation::SegmentPlan;

pub const MAX_WORDS: usize = 60;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HardFailure {
    CountMismatch { found: usize, expected: usize },
    NonContiguousNumbering { position: usize, found: usize },
    EmptyDescription { scene: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    MultiSentence { scene: usize, sentences: usize },
    TooLong { scene: usize, words: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub hard: Vec<HardFailure>,
    pub warnings: Vec<Warning>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.hard.is_empty()
    }
}

/// Counts runs of `.`, `!` or `?` that end a word: "He runs. He falls." has
/// two, "Wait..." has one, "3.5 m" none.
pub fn count_sentences(text: &str) -> usize {
    let chars: Vec<char> = text.chars().collect();
    let terminal = |c: char| matches!(c, '.' | '!' | '?');
    let mut count = 0;
    let mut i = 0;
    while i < chars.len() {
        if terminal(chars[i]) {
            let mut j = i;
            while j < chars.len() && terminal(chars[j]) {
                j += 1;
            }
            let closes = chars.get(j).map_or(true, |c| c.is_whitespace() || matches!(c, '"' | '\'' | ')'));
            if closes && i > 0 {
                count += 1;
            }
            i = j;
        } else {
            i += 1;
        }
    }
    count
}

pub fn validate_script(script: &VideoScript, plan: &SegmentPlan) -> ValidationReport {
    let mut report = ValidationReport::default();
    if script.scenes.len() != plan.len() {
        report.hard.push(HardFailure::CountMismatch {
            found: script.scenes.len(),
            expected: plan.len(),
        });
    }
    for (i, scene) in script.scenes.iter().enumerate() {
        if scene.number != i + 1 {
            report.hard.push(HardFailure::NonContiguousNumbering {
                position: i + 1,
                found: scene.number,
            });
        }
        if scene.description.trim().is_empty() {
            report.hard.push(HardFailure::EmptyDescription {
                scene: scene.number,
            });
            continue;
        }
        let sentences = count_sentences(&scene.description);
        if sentences > 1 {
            report.warnings.push(Warning::MultiSentence {
                scene: scene.number,
                sentences,
            });
        }
        let words = scene.description.split_whitespace().count();
        if words > MAX_WORDS {
            report.warnings.push(Warning::TooLong {
                scene: scene.number,
                words,
            });
        }
    }
    report
}
