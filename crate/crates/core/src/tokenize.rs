//! Language-independent code tokenizer shared by every scoring, serialization
//! and metric path.
//!
//! Runs of alphanumeric characters and `_` form one token, so identifiers are
//! kept whole (`camelCase` and `snake_case` are not split). Every other
//! non-whitespace character is a token of its own.

use std::collections::BTreeSet;

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Tokenizes a single piece of text.
pub fn tokenize(text: &str) -> Vec<&str> {
    tokenize_spans(text).into_iter().map(|(_, t)| t).collect()
}

/// Tokens with their byte offsets into `text`.
pub fn tokenize_spans(text: &str) -> Vec<(usize, &str)> {
    let mut tokens = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if is_word_char(c) {
            if start.is_none() {
                start = Some(i);
            }
            continue;
        }
        if let Some(s) = start.take() {
            tokens.push((s, &text[s..i]));
        }
        if !c.is_whitespace() {
            tokens.push((i, &text[i..i + c.len_utf8()]));
        }
    }
    if let Some(s) = start {
        tokens.push((s, &text[s..]));
    }
    tokens
}

/// Tokenizes a sequence of lines; line boundaries are not represented.
pub fn tokenize_lines<S: AsRef<str>>(lines: &[S]) -> Vec<String> {
    lines
        .iter()
        .flat_map(|l| tokenize(l.as_ref()))
        .map(str::to_owned)
        .collect()
}

/// Number of tokens in one line.
pub fn token_count(line: &str) -> usize {
    tokenize(line).len()
}

/// Identifier tokens start with a letter or `_`; numbers and punctuation are
/// not identifiers.
pub fn is_identifier(token: &str) -> bool {
    token
        .chars()
        .next()
        .is_some_and(|c| c.is_alphabetic() || c == '_')
}

/// Distinct identifiers appearing in `lines`.
pub fn identifier_set<S: AsRef<str>>(lines: &[S]) -> BTreeSet<String> {
    lines
        .iter()
        .flat_map(|l| tokenize(l.as_ref()))
        .filter(|t| is_identifier(t))
        .map(str::to_owned)
        .collect()
}

/// Distinct tokens of any kind.
pub fn token_set<S: AsRef<str>>(lines: &[S]) -> BTreeSet<String> {
    lines
        .iter()
        .flat_map(|l| tokenize(l.as_ref()))
        .map(str::to_owned)
        .collect()
}

/// Jaccard similarity of two token sets; two empty sets are identical.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identifiers_stay_whole() {
        assert_eq!(
            tokenize("benchName, ok = b.context.match.fullName(&b.common, name)"),
            vec![
                "benchName", ",", "ok", "=", "b", ".", "context", ".", "match", ".", "fullName",
                "(", "&", "b", ".", "common", ",", "name", ")"
            ]
        );
        assert_eq!(tokenize("snake_case camelCase"), vec!["snake_case", "camelCase"]);
    }

    #[test]
    fn spans_point_into_source() {
        let text = "  x.y(42)";
        for (at, t) in tokenize_spans(text) {
            assert_eq!(&text[at..at + t.len()], t);
        }
    }

    #[test]
    fn operators_split_per_char() {
        assert_eq!(tokenize("a := b"), vec!["a", ":", "=", "b"]);
        assert!(tokenize("   \t ").is_empty());
    }

    #[test]
    fn identifier_classification() {
        assert!(is_identifier("_x"));
        assert!(is_identifier("matcher"));
        assert!(!is_identifier("42"));
        assert!(!is_identifier("*"));
    }

    #[test]
    fn jaccard_edges() {
        let a = token_set(&["x y"]);
        let b = token_set(&["y z"]);
        assert!((jaccard(&a, &b) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(jaccard(&BTreeSet::new(), &BTreeSet::new()), 1.0);
    }
}
