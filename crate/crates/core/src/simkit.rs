//! LCS-based sequence similarity.
//!
//! The similarity of two sequences is `2 * LCS(a, b) / (|a| + |b|)`, with
//! two empty sequences defined as identical. The same ratio serves as the
//! search objective (over lines) and as the benchmark metric (over lines and
//! over characters).

use serde::{Deserialize, Serialize};

/// The unit a line list is compared at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Granularity {
    /// Each line is one element.
    LineLevel,
    /// Lines are joined with a single `\n` (no trailing newline) and each
    /// Unicode scalar value is one element.
    CharLevel,
}

/// Length of the longest common subsequence of `a` and `b`.
///
/// Runs in `O(|a| * |b|)` time and keeps a single row of `min(|a|, |b|) + 1`
/// counters.
pub fn lcs_length<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    if short.is_empty() {
        return 0;
    }
    let mut row = vec![0usize; short.len() + 1];
    for x in long {
        // `diag` holds the previous row's value at column j - 1.
        let mut diag = 0;
        for (j, y) in short.iter().enumerate() {
            let above = row[j + 1];
            row[j + 1] = if x == y {
                diag + 1
            } else {
                above.max(row[j])
            };
            diag = above;
        }
    }
    row[short.len()]
}

/// `2 * lcs / (len_a + len_b)`, or 1.0 when both lengths are zero.
pub fn ratio(lcs: usize, len_a: usize, len_b: usize) -> f64 {
    let total = len_a + len_b;
    if total == 0 {
        1.0
    } else {
        (2 * lcs) as f64 / total as f64
    }
}

/// Similarity of two sequences of arbitrary comparable elements.
pub fn sequence_similarity<T: PartialEq>(a: &[T], b: &[T]) -> f64 {
    ratio(lcs_length(a, b), a.len(), b.len())
}

/// Similarity of two line lists at the given granularity.
pub fn similarity<A: AsRef<str>, B: AsRef<str>>(a: &[A], b: &[B], g: Granularity) -> f64 {
    match g {
        Granularity::LineLevel => {
            let a: Vec<&str> = a.iter().map(AsRef::as_ref).collect();
            let b: Vec<&str> = b.iter().map(AsRef::as_ref).collect();
            sequence_similarity(&a, &b)
        }
        Granularity::CharLevel => sequence_similarity(&flatten_chars(a), &flatten_chars(b)),
    }
}

/// Knobs that only apply to reported (not searched) similarities.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportOptions {
    /// Strip trailing whitespace from every line before comparing.
    pub trim_trailing_whitespace: bool,
}

/// Similarity at the given granularity after applying `opts`.
pub fn similarity_with<A: AsRef<str>, B: AsRef<str>>(
    a: &[A],
    b: &[B],
    g: Granularity,
    opts: ReportOptions,
) -> f64 {
    if !opts.trim_trailing_whitespace {
        return similarity(a, b, g);
    }
    let a: Vec<&str> = a.iter().map(|l| l.as_ref().trim_end()).collect();
    let b: Vec<&str> = b.iter().map(|l| l.as_ref().trim_end()).collect();
    similarity(&a, &b, g)
}

fn flatten_chars<S: AsRef<str>>(lines: &[S]) -> Vec<char> {
    let mut out = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.extend(line.as_ref().chars());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lcs_examples() {
        assert_eq!(lcs_length(&['A', 'B', 'C'], &['A', 'C']), 2);
        assert_eq!(lcs_length(&[1, 2, 3, 4], &[1, 2, 3, 4]), 4);
        assert_eq!(lcs_length(&['a', 'b'], &['x', 'y', 'z']), 0);
        assert_eq!(lcs_length::<u8>(&[], &[1, 2]), 0);
    }

    #[test]
    fn line_similarity_examples() {
        let s = similarity(&["x", "y", "z"], &["x", "z"], Granularity::LineLevel);
        assert!((s - 0.8).abs() < 1e-12);
        assert_eq!(similarity(&["a", "b"], &["a", "b"], Granularity::LineLevel), 1.0);
        let empty: [&str; 0] = [];
        assert_eq!(similarity(&empty, &["a"], Granularity::LineLevel), 0.0);
        assert_eq!(similarity(&empty, &empty, Granularity::LineLevel), 1.0);
        assert_eq!(similarity(&empty, &empty, Granularity::CharLevel), 1.0);
    }

    #[test]
    fn char_level_joins_with_single_newline() {
        // "ab\ncd" vs "abcd": LCS 4 over 5 + 4 elements.
        let s = similarity(&["ab", "cd"], &["abcd"], Granularity::CharLevel);
        assert!((s - 8.0 / 9.0).abs() < 1e-12);
        // A single empty line is the empty string, same as no lines at all.
        let empty: [&str; 0] = [];
        assert_eq!(similarity(&[""], &empty, Granularity::CharLevel), 1.0);
    }

    #[test]
    fn trim_option_only_touches_trailing_whitespace() {
        let opts = ReportOptions {
            trim_trailing_whitespace: true,
        };
        assert_eq!(
            similarity_with(&["a  "], &["a"], Granularity::LineLevel, opts),
            1.0
        );
        assert_eq!(
            similarity_with(&["  a"], &["a"], Granularity::LineLevel, opts),
            0.0
        );
    }
}
