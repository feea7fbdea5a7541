use std::collections::HashMap;
use std::path::Path;

use super::normalize_title;
use crate::error::{Error, Result};
use crate::io::open_lines;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkillEntry {
    pub canonical: String,
    pub aliases: Vec<String>,
}

/// Canonical skills with their surface-form aliases.
///
/// All names are stored normalized. Every surface form (canonical names
/// included) maps to exactly one skill.
#[derive(Debug, Clone, PartialEq)]
pub struct SkillVocabulary {
    entries: Vec<SkillEntry>,
    surface: HashMap<String, usize>,
}

impl SkillVocabulary {
    /// Builds a vocabulary from `(canonical, aliases)` pairs, normalizing
    /// every name.
    pub fn from_entries<I, S>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<S>)>,
        S: AsRef<str>,
    {
        let mut vocab = SkillVocabulary {
            entries: Vec::new(),
            surface: HashMap::new(),
        };
        for (canonical, aliases) in entries {
            vocab.push(canonical.as_ref(), aliases.iter().map(AsRef::as_ref))?;
        }
        if vocab.entries.is_empty() {
            return Err(Error::Vocabulary("vocabulary is empty".into()));
        }
        Ok(vocab)
    }

    fn push<'a>(&mut self, canonical: &str, aliases: impl Iterator<Item = &'a str>) -> Result<()> {
        let canonical = normalize_title(canonical);
        if canonical.is_empty() {
            return Err(Error::Vocabulary("skill name normalizes to empty".into()));
        }
        let mut entry = SkillEntry {
            canonical: canonical.clone(),
            aliases: Vec::new(),
        };
        self.claim(&canonical, &canonical)?;
        for alias in aliases {
            let alias = normalize_title(alias);
            if alias.is_empty() || alias == canonical || entry.aliases.contains(&alias) {
                continue;
            }
            self.claim(&alias, &canonical)?;
            entry.aliases.push(alias);
        }
        self.entries.push(entry);
        Ok(())
    }

    fn claim(&mut self, form: &str, canonical: &str) -> Result<()> {
        if let Some(&other) = self.surface.get(form) {
            let owner = &self.entries[other].canonical;
            return Err(Error::Vocabulary(format!(
                "duplicate surface form {form:?} claimed by skills {owner:?} and {canonical:?}"
            )));
        }
        self.surface.insert(form.to_string(), self.entries.len());
        Ok(())
    }

    pub fn entries(&self) -> &[SkillEntry] {
        &self.entries
    }

    /// Number of canonical skills.
    pub fn size(&self) -> usize {
        self.entries.len()
    }

    pub fn surface_forms(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().flat_map(|e| {
            std::iter::once(e.canonical.as_str())
                .chain(e.aliases.iter().map(String::as_str))
                .map(move |s| (s, e.canonical.as_str()))
        })
    }

    pub fn canonical_of(&self, surface: &str) -> Option<&str> {
        self.surface.get(surface).map(|&i| self.entries[i].canonical.as_str())
    }

    pub fn contains(&self, canonical: &str) -> bool {
        self.surface
            .get(canonical)
            .is_some_and(|&i| self.entries[i].canonical == canonical)
    }
}

/// Loads a TSV vocabulary: column 1 is the canonical skill, further columns
/// are aliases; `#` lines are comments.
pub fn load_skill_vocabulary(path: &Path) -> Result<SkillVocabulary> {
    let mut vocab = SkillVocabulary {
        entries: Vec::new(),
        surface: HashMap::new(),
    };
    for (lineno, line) in open_lines(path)? {
        let line = line?;
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let mut cols = line.split('\t');
        let canonical = cols.next().unwrap_or_default();
        vocab
            .push(canonical, cols)
            .map_err(|e| Error::parse(path, lineno, e.to_string()))?;
    }
    if vocab.entries.is_empty() {
        return Err(Error::Vocabulary(format!("{}: no skills found", path.display())));
    }
    Ok(vocab)
}

pub fn write_skill_vocabulary(path: &Path, vocab: &SkillVocabulary) -> Result<()> {
    let mut s = String::new();
    for e in vocab.entries() {
        s.push_str(&e.canonical);
        for a in &e.aliases {
            s.push('\t');
            s.push_str(a);
        }
        s.push('\n');
    }
    crate::io::write_text(path, &s)
}
