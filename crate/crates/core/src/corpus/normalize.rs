use std::sync::LazyLock;

use regex::Regex;
use unicode_normalization::UnicodeNormalization;

static PUNCT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[\p{P}\p{Cc}[:punct:]]").expect("valid regex"));

/// Canonical form of a title or skill surface form.
///
/// Lowercases, applies NFC, replaces punctuation (Unicode `P*`, ASCII
/// punctuation and symbols, control characters) with spaces, then collapses
/// and trims whitespace. Non-ASCII symbols such as emoji are kept.
pub fn normalize_title(text: &str) -> String {
    let lowered: String = text.to_lowercase().nfc().collect();
    let stripped = PUNCT.replace_all(&lowered, " ");
    let mut out = String::with_capacity(stripped.len());
    for tok in stripped.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(tok);
    }
    out
}
