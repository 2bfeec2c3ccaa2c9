//! Text canonicalization and the content-word tokenizer.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

/// Words ignored by [`content_tokens`].
pub const STOPWORDS: [&str; 25] = [
    "a", "an", "the", "and", "or", "but", "of", "to", "in", "on", "at", "by", "for", "with",
    "from", "as", "is", "are", "was", "were", "be", "it", "that", "this", "have",
];

fn is_terminal_punct(c: char) -> bool {
    matches!(c, '.' | '!' | '?' | ';' | ':' | ',')
}

/// Canonical form used for deduplication: lowercase, single spaces, no
/// surrounding whitespace and no trailing sentence punctuation.
pub fn normalize(text: &str) -> String {
    let lowered = text.to_lowercase();
    let mut out = String::with_capacity(lowered.len());
    for word in lowered.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    // stripping punctuation can expose whitespace ("a ." -> "a "), so trim both
    let trimmed = out.trim_end_matches(|c: char| is_terminal_punct(c) || c.is_whitespace());
    out.truncate(trimmed.len());
    out
}

/// Lowercased alphanumeric runs, in order, including stopwords.
pub fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| w.to_lowercase())
        .collect()
}

pub fn is_stopword(word: &str) -> bool {
    STOPWORDS.contains(&word)
}

/// Content tokens in order of appearance (duplicates kept).
pub fn content_words(text: &str) -> Vec<String> {
    words(text).into_iter().filter(|w| !is_stopword(w)).collect()
}

/// Set of content tokens.
pub fn content_tokens(text: &str) -> BTreeSet<String> {
    content_words(text).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize("The cat sat."), "the cat sat");
        assert_eq!(normalize(""), "");
        assert_eq!(normalize("  A  dog   runs "), "a dog runs");
        assert_eq!(normalize(normalize("  A  dog   runs ").as_str()), "a dog runs");
        assert_eq!(normalize("wait . !"), "wait");
        assert_eq!(normalize("...."), "");
    }

    #[test]
    fn tokenizer_drops_stopwords_and_punctuation() {
        let t = content_tokens("The cat, sat-on the MAT!");
        let got: Vec<&str> = t.iter().map(String::as_str).collect();
        assert_eq!(got, ["cat", "mat", "sat"]);
        assert_eq!(STOPWORDS.len(), 25);
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(s in "\\PC{0,40}") {
            let once = normalize(&s);
            prop_assert_eq!(normalize(&once), once.clone());
        }

        #[test]
        fn normalize_idempotent_on_punctuated_ascii(s in "[ a-zA-Z.!?;:,\t]{0,30}") {
            let once = normalize(&s);
            prop_assert_eq!(normalize(&once), once);
        }
    }
}
