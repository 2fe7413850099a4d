//! Tokenization rules shared by the similarity scorer and the metrics.
//!
//! A punctuation character is any character that is neither alphanumeric nor
//! whitespace.

fn is_punct(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace()
}

/// Number of maximal runs of non-whitespace characters.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Tokens for the embedding scorer: lowercase, split on whitespace, then peel
/// leading and trailing punctuation off each token as single-character tokens.
/// Interior punctuation (`don't`, `co-operate`) stays attached.
pub fn similarity_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let lower = word.to_lowercase();
        let chars: Vec<char> = lower.chars().collect();
        let Some(start) = chars.iter().position(|&c| !is_punct(c)) else {
            out.extend(chars.iter().map(|c| c.to_string()));
            continue;
        };
        // `start` exists, so a last non-punctuation character does too.
        let end = chars.iter().rposition(|&c| !is_punct(c)).unwrap() + 1;
        out.extend(chars[..start].iter().map(|c| c.to_string()));
        out.push(chars[start..end].iter().collect());
        out.extend(chars[end..].iter().map(|c| c.to_string()));
    }
    out
}

/// Tokens for BLEU and the chrF++ word n-grams: every punctuation character
/// becomes a standalone token, then the rest is split on whitespace.
pub fn metric_tokens(text: &str, lowercase: bool) -> Vec<String> {
    let owned;
    let text = if lowercase {
        owned = text.to_lowercase();
        owned.as_str()
    } else {
        text
    };
    let mut out = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_whitespace() {
            if !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
        } else if is_punct(c) {
            if !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
            out.push(c.to_string());
        } else {
            current.push(c);
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn word_count_uses_unicode_whitespace() {
        assert_eq!(word_count("  a b\u{00a0}c\t d\n"), 4);
        assert_eq!(word_count(""), 0);
    }

    #[test]
    fn similarity_tokens_peel_edges_only() {
        assert_eq!(
            similarity_tokens("\"Hello,\" she said—don't go..."),
            vec!["\"", "hello", ",", "\"", "she", "said—don't", "go", ".", ".", "."]
        );
        assert_eq!(similarity_tokens("?!"), vec!["?", "!"]);
        assert_eq!(similarity_tokens("ÉTÉ"), vec!["été"]);
    }

    #[test]
    fn metric_tokens_split_every_punctuation_mark() {
        assert_eq!(
            metric_tokens("Don't stop, Anna.", false),
            vec!["Don", "'", "t", "stop", ",", "Anna", "."]
        );
        assert_eq!(metric_tokens("A b", true), vec!["a", "b"]);
        assert!(metric_tokens("   ", false).is_empty());
    }
}
