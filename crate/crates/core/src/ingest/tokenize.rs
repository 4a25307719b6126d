use serde::{Deserialize, Serialize};
use unicode_segmentation::UnicodeSegmentation;

/// Word segmentation used for every frequency lookup.
///
/// Text is split on Unicode word boundaries (UAX #29). Segments without a
/// single letter or digit are dropped, and the remaining words are
/// lowercased unless `lowercase` is off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizerConfig {
    pub lowercase: bool,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        Self { lowercase: true }
    }
}

impl TokenizerConfig {
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        let mut out = Vec::new();
        self.for_each_token(text, |t| out.push(t.to_owned()));
        out
    }

    /// Visit tokens without collecting them; `build_table` uses this on the hot path.
    pub fn for_each_token(&self, text: &str, mut f: impl FnMut(&str)) {
        let mut buf = String::new();
        for word in text.unicode_words() {
            if self.lowercase && word.chars().any(char::is_uppercase) {
                buf.clear();
                buf.extend(word.chars().flat_map(char::to_lowercase));
                f(&buf);
            } else {
                f(word);
            }
        }
    }
}

pub fn tokenize(text: &str, config: &TokenizerConfig) -> Vec<String> {
    config.tokenize(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lowercases_and_strips_punctuation() {
        let t = TokenizerConfig::default();
        assert_eq!(t.tokenize("The cat sat."), ["the", "cat", "sat"]);
    }

    #[test]
    fn empty_text() {
        assert!(TokenizerConfig::default().tokenize("").is_empty());
        assert!(TokenizerConfig::default().tokenize(" ... !? ").is_empty());
    }

    #[test]
    fn hyphen_splits_letter_digit_runs() {
        // UAX #29 breaks at the hyphen; "b2" stays one word (ALetter x Numeric).
        assert_eq!(TokenizerConfig::default().tokenize("A-1 b2"), ["a", "1", "b2"]);
    }

    #[test]
    fn case_preserved_when_disabled() {
        let t = TokenizerConfig { lowercase: false };
        assert_eq!(t.tokenize("The Cat"), ["The", "Cat"]);
    }

    #[test]
    fn deterministic() {
        let t = TokenizerConfig::default();
        let s = "Ünïcode wörds, can't stop: 3.14 ÉTÉ";
        assert_eq!(t.tokenize(s), t.tokenize(s));
        assert_eq!(t.tokenize(s), ["ünïcode", "wörds", "can't", "stop", "3.14", "été"]);
    }
}
