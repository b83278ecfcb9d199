// Copyright 2026 The Tripartite Authors
// SPDX-License-Identifier: Apache-2.0

//! Small text utilities shared by chunking, mock annotation and the mock
//! embedder.

use std::ops::Range;

/// Byte ranges of the sentences in `text`.
///
/// A sentence ends at `.`, `!` or `?` followed by whitespace, or at the end
/// of the input. Ranges exclude surrounding whitespace and are returned in
/// order; whitespace-only input yields no ranges.
pub(crate) fn sentence_spans(text: &str) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    let mut start: Option<usize> = None;
    let mut chars = text.char_indices().peekable();
    while let Some((i, ch)) = chars.next() {
        if start.is_none() {
            if ch.is_whitespace() {
                continue;
            }
            start = Some(i);
        }
        if matches!(ch, '.' | '!' | '?') {
            let at_boundary = match chars.peek() {
                Some(&(_, next)) => next.is_whitespace(),
                None => true,
            };
            if at_boundary {
                let end = i + ch.len_utf8();
                spans.push(start.take().unwrap()..end);
            }
        }
    }
    if let Some(s) = start {
        let end = text.trim_end().len();
        if end > s {
            spans.push(s..end);
        }
    }
    spans
}

/// Lowercase slug: ASCII alphanumerics kept, every other run collapsed to `-`.
pub(crate) fn slugify(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    let mut pending_dash = false;
    for ch in name.chars() {
        if ch.is_alphanumeric() {
            if pending_dash && !out.is_empty() {
                out.push('-');
            }
            pending_dash = false;
            out.extend(ch.to_lowercase());
        } else {
            pending_dash = true;
        }
    }
    out
}

/// 64-bit FNV-1a. Stable across platforms and releases, unlike `DefaultHasher`.
pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

/// Lowercased alphanumeric tokens.
pub(crate) fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sentences(text: &str) -> Vec<&str> {
        sentence_spans(text).into_iter().map(|r| &text[r]).collect()
    }

    #[test]
    fn splits_on_terminal_punctuation_followed_by_space() {
        assert_eq!(
            sentences("One. Two! Three? Four"),
            vec!["One.", "Two!", "Three?", "Four"]
        );
    }

    #[test]
    fn decimal_points_do_not_split() {
        assert_eq!(sentences("Dose is 2.5 mg. Next."), vec!["Dose is 2.5 mg.", "Next."]);
    }

    #[test]
    fn whitespace_only_has_no_sentences() {
        assert!(sentences("  \n\t ").is_empty());
        assert!(sentences("").is_empty());
    }

    #[test]
    fn newlines_count_as_whitespace() {
        assert_eq!(sentences("A line.\nB line.\n\n"), vec!["A line.", "B line."]);
    }

    #[test]
    fn slugs() {
        assert_eq!(slugify("Blood Pressure"), "blood-pressure");
        assert_eq!(slugify("  Risk  factors!! "), "risk-factors");
        assert_eq!(slugify("Type-2 diabetes"), "type-2-diabetes");
        assert_eq!(slugify("***"), "");
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a64(b"a"), 0xaf63_dc4c_8601_ec8c);
    }
}
