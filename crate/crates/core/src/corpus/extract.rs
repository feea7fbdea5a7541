use std::collections::BTreeSet;

use aho_corasick::{AhoCorasick, MatchKind};

use super::{normalize_title, SkillVocabulary};

/// Dictionary matcher over normalized text.
///
/// A surface form matches only when it starts and ends on token boundaries.
/// Among boundary-anchored candidates the leftmost-longest one wins and
/// scanning resumes after it, so matches never overlap.
#[derive(Debug, Clone)]
pub struct SkillExtractor {
    automaton: AhoCorasick,
    canonical: Vec<String>,
}

impl SkillExtractor {
    pub fn new(vocab: &SkillVocabulary) -> Self {
        let (patterns, canonical): (Vec<&str>, Vec<String>) = vocab
            .surface_forms()
            .map(|(surface, canon)| (surface, canon.to_string()))
            .unzip();
        let automaton = AhoCorasick::builder()
            .match_kind(MatchKind::Standard)
            .build(&patterns)
            .expect("vocabulary automaton fits in memory");
        SkillExtractor { automaton, canonical }
    }

    /// Returns the set of canonical skills mentioned in `text`.
    pub fn extract(&self, text: &str) -> BTreeSet<String> {
        let text = normalize_title(text);
        self.matches(&text)
            .into_iter()
            .map(|(_, _, skill)| skill.to_string())
            .collect()
    }

    /// Selected `(start, end, canonical)` spans in already-normalized text.
    pub fn matches<'a>(&'a self, text: &str) -> Vec<(usize, usize, &'a str)> {
        let bytes = text.as_bytes();
        let mut candidates: Vec<(usize, usize, usize)> = self
            .automaton
            .find_overlapping_iter(text)
            .filter(|m| {
                (m.start() == 0 || bytes[m.start() - 1] == b' ') && (m.end() == bytes.len() || bytes[m.end()] == b' ')
            })
            .map(|m| (m.start(), m.end(), m.pattern().as_usize()))
            .collect();
        candidates.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));

        let mut out = Vec::new();
        let mut pos = 0;
        for (start, end, pat) in candidates {
            if start >= pos {
                out.push((start, end, self.canonical[pat].as_str()));
                pos = end;
            }
        }
        out
    }
}

/// One-shot convenience over [`SkillExtractor`].
pub fn extract_skills(text: &str, vocab: &SkillVocabulary) -> BTreeSet<String> {
    SkillExtractor::new(vocab).extract(text)
}
