use super::types::Segment;
use crate::tokenize::token_count;

/// Smallest accepted segment budget.
pub const MIN_SEGMENT_TOKENS: usize = 16;

/// Greedily tiles a file into whole-line segments of at most
/// `max_segment_tokens` tokens. A line that alone exceeds the budget becomes
/// its own segment. Budgets below [`MIN_SEGMENT_TOKENS`] are raised to it.
pub fn split_segments(file_path: &str, lines: &[String], max_segment_tokens: usize) -> Vec<Segment> {
    let budget = max_segment_tokens.max(MIN_SEGMENT_TOKENS);
    let mut out = Vec::new();
    let mut start = 0usize;
    let mut used = 0usize;
    for (i, line) in lines.iter().enumerate() {
        let t = token_count(line);
        if i > start && used + t > budget {
            out.push(make(file_path, lines, start, i, used));
            start = i;
            used = 0;
        }
        used += t;
    }
    if start < lines.len() {
        out.push(make(file_path, lines, start, lines.len(), used));
    }
    out
}

fn make(file_path: &str, lines: &[String], start: usize, end: usize, tokens: usize) -> Segment {
    Segment {
        file_path: file_path.to_owned(),
        start_line: start + 1,
        lines: lines[start..end].to_vec(),
        token_count: tokens,
    }
}
